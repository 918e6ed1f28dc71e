#include <doctest.h>

#include <cmath>
#include <set>

#include "edhie/grammar.hpp"

using namespace edhie;

TEST_CASE("grammar text parsing and validation") {
  const Pcfg g = parse_grammar("# tiny\nS -> S + T [0.3] | T [0.7]\nT -> x [0.5] | c [0.5]\n");
  CHECK(g.start() == "S");
  CHECK(g.rules("S").size() == 2);
  CHECK(g.rules("T")[1].rhs == std::vector<std::string>{"c"});
  CHECK(g.is_nonterminal("T"));
  CHECK_FALSE(g.is_nonterminal("x"));
  CHECK(to_text(parse_grammar(to_text(g))) == to_text(g));

  CHECK_THROWS(parse_grammar("S -> x [0.5] | c [0.4]\n"));        // does not sum to one
  CHECK_THROWS(parse_grammar("S -> x [0.0] | c [1.0]\n"));        // zero probability
  CHECK_THROWS(parse_grammar("S -> x + U [1.0]\n"));              // undefined nonterminal
  CHECK_THROWS(parse_grammar("S -> S + S [1.0]\n"));              // start never terminates
  CHECK_THROWS(parse_grammar("S x [1.0]\n"));                     // malformed line
}

TEST_CASE("builtin grammars and vocabularies agree") {
  for (const auto& [name, g] : builtin_grammars()) {
    CAPTURE(name);
    const Vocabulary v = builtin_vocabulary(name);
    for (const auto& nt : g.nonterminals())
      for (const auto& prod : g.rules(nt))
        for (const auto& tok : prod.rhs) {
          if (g.is_nonterminal(tok) || tok == "(" || tok == ")") continue;
          CAPTURE(tok);
          CHECK(v.contains(tok));
        }
  }
}

TEST_CASE("height one forces single leaves") {
  const Pcfg& ae = builtin_grammars().at("ae");
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const ExprTree t = sample_expression(ae, rng, 1);
    CHECK(t.height() == 1);
    CHECK((t.symbol().name == "x" || t.symbol().name == "c"));
  }
}

TEST_CASE("sampled trees respect the height cap") {
  Rng rng(2);
  for (const auto& [name, g] : builtin_grammars()) {
    for (int i = 0; i < 100; ++i) CHECK(sample_expression(g, rng, 5).height() <= 5);
  }
}

TEST_CASE("corpus generation") {
  const Pcfg& ae = builtin_grammars().at("ae");
  const Vocabulary v = builtin_vocabulary("ae");
  Rng rng(3);
  const auto corpus = generate_corpus(ae, 300, 4, true, rng, &v);
  REQUIRE(corpus.size() == 300);
  std::set<std::string> seen;
  for (const auto& t : corpus) {
    CHECK(t.height() <= 4);
    CHECK(canonicalize(t) == t);
    CHECK(parse_postfix(to_postfix_string(t), v) == t);  // only vocabulary symbols
    seen.insert(to_postfix_string(t));
  }
  CHECK(seen.size() == corpus.size());

  Rng a(9), b(9);
  CHECK(generate_corpus(ae, 50, 4, false, a, &v) == generate_corpus(ae, 50, 4, false, b, &v));
}

TEST_CASE("dedup exhaustion is reported") {
  // Three distinct strings: x, c and x + c.
  const Pcfg tiny = parse_grammar("S -> x [0.4] | c [0.3] | ( x + c ) [0.3]\n");
  Rng rng(4);
  CHECK_THROWS_AS(generate_corpus(tiny, 5, 4, true, rng, nullptr, 200), SamplingError);
  CHECK(generate_corpus(tiny, 3, 4, true, rng, nullptr, 200).size() == 3);
  CHECK(generate_corpus(tiny, 5, 4, false, rng).size() == 5);
}

TEST_CASE("rule frequencies follow the grammar") {
  const Pcfg& ae = builtin_grammars().at("ae");
  Rng rng(5);
  RuleCounts counts;
  SamplerOptions opts;
  opts.max_height = 4;
  for (int i = 0; i < 2000; ++i) sample_expression(ae, rng, opts, nullptr, &counts);
  for (const auto& nt : ae.nonterminals()) {
    const auto& c = counts.counts.at(nt);
    double n = 0.0;
    for (auto k : c) n += static_cast<double>(k);
    const auto& rules = ae.rules(nt);
    for (std::size_t k = 0; k < rules.size(); ++k) {
      const double p = rules[k].probability;
      CAPTURE(nt);
      CAPTURE(k);
      CHECK(std::abs(static_cast<double>(c[k]) - n * p) <= 4.0 * std::sqrt(n * p * (1.0 - p)));
    }
  }
}
