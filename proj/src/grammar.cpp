#include "edhie/grammar.hpp"

#include <charconv>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_set>

namespace edhie {

bool looks_like_nonterminal(std::string_view token) {
  return !token.empty() && token[0] >= 'A' && token[0] <= 'Z';
}

Pcfg::Pcfg(std::vector<std::string> nonterminals,
           std::map<std::string, std::vector<Production>> rules)
    : nonterminals_(std::move(nonterminals)), rules_(rules.begin(), rules.end()) {
  if (nonterminals_.empty()) throw ParseError("grammar has no rules");
  for (const auto& nt : nonterminals_) {
    auto it = rules_.find(nt);
    if (it == rules_.end() || it->second.empty()) throw ParseError("no rules for " + nt);
    double sum = 0.0;
    for (const auto& p : it->second) {
      if (!(p.probability > 0.0 && p.probability <= 1.0))
        throw ParseError("rule probability out of (0,1] for " + nt);
      sum += p.probability;
      for (const auto& sym : p.rhs)
        if (looks_like_nonterminal(sym) && !rules_.count(sym))
          throw ParseError("unknown nonterminal " + sym + " in rules of " + nt);
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ParseError("probabilities of " + nt + " sum to " + std::to_string(sum));
  }

  // Productivity fixed point.
  std::set<std::string, std::less<>> productive;
  for (bool grew = true; grew;) {
    grew = false;
    for (const auto& nt : nonterminals_) {
      if (productive.count(nt)) continue;
      for (const auto& p : rules_.at(nt)) {
        bool ok = true;
        for (const auto& sym : p.rhs)
          if (looks_like_nonterminal(sym) && !productive.count(sym)) ok = false;
        if (ok) {
          productive.insert(nt);
          grew = true;
          break;
        }
      }
    }
  }
  if (!productive.count(start())) throw ParseError("grammar is not productive from " + start());
}

const std::vector<Production>& Pcfg::rules(const std::string& nonterminal) const {
  auto it = rules_.find(nonterminal);
  if (it == rules_.end()) throw std::out_of_range("no nonterminal " + nonterminal);
  return it->second;
}

bool Pcfg::is_nonterminal(std::string_view token) const { return rules_.find(token) != rules_.end(); }

Pcfg parse_grammar(std::string_view text) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<Production>> rules;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto tokens = split_tokens(line);
    if (tokens.empty() || tokens[0][0] == '#') continue;
    auto where = [&] { return "grammar line " + std::to_string(lineno) + ": "; };
    if (tokens.size() < 3 || tokens[1] != "->" || !looks_like_nonterminal(tokens[0]))
      throw ParseError(where() + "expected 'NT -> ...'");
    const std::string& lhs = tokens[0];
    if (rules.count(lhs)) throw ParseError(where() + "duplicate nonterminal " + lhs);
    order.push_back(lhs);
    auto& prods = rules[lhs];
    Production cur;
    bool have_prob = false;
    for (std::size_t i = 2; i < tokens.size(); ++i) {
      const std::string& tok = tokens[i];
      if (tok == "|") {
        if (!have_prob) throw ParseError(where() + "alternative without [p]");
        prods.push_back(std::move(cur));
        cur = {};
        have_prob = false;
      } else if (tok.size() > 2 && tok.front() == '[' && tok.back() == ']') {
        if (have_prob) throw ParseError(where() + "two probabilities on one alternative");
        double p = 0.0;
        auto [ptr, ec] = std::from_chars(tok.data() + 1, tok.data() + tok.size() - 1, p);
        if (ec != std::errc() || ptr != tok.data() + tok.size() - 1)
          throw ParseError(where() + "bad probability " + tok);
        cur.probability = p;
        have_prob = true;
      } else {
        if (have_prob) throw ParseError(where() + "symbol after probability");
        cur.rhs.push_back(tok);
      }
    }
    if (!have_prob) throw ParseError(where() + "alternative without [p]");
    if (cur.rhs.empty()) throw ParseError(where() + "empty production");
    prods.push_back(std::move(cur));
  }
  return Pcfg(std::move(order), std::move(rules));
}

std::string to_text(const Pcfg& grammar) {
  std::string out;
  for (const auto& nt : grammar.nonterminals()) {
    out += nt + " ->";
    bool first = true;
    for (const auto& p : grammar.rules(nt)) {
      if (!first) out += " |";
      first = false;
      for (const auto& s : p.rhs) out += " " + s;
      char buf[32];
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, p.probability);
      (void)ec;
      out += " [" + std::string(buf, ptr) + "]";
    }
    out += '\n';
  }
  return out;
}

void RuleCounts::add(const std::string& nonterminal, std::size_t rule, std::size_t n_rules) {
  auto& v = counts[nonterminal];
  if (v.size() < n_rules) v.resize(n_rules, 0);
  ++v[rule];
}

std::optional<std::vector<std::string>> sample_derivation(const Pcfg& g, Rng& rng,
                                                          std::size_t max_expansions,
                                                          RuleCounts* counts) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::string> out;
  // Leftmost derivation; the stack holds symbols still to expand, reversed.
  std::vector<std::string> stack{g.start()};
  std::size_t expansions = 0;
  while (!stack.empty()) {
    std::string sym = std::move(stack.back());
    stack.pop_back();
    if (!g.is_nonterminal(sym)) {
      out.push_back(std::move(sym));
      continue;
    }
    if (++expansions > max_expansions) return std::nullopt;
    const auto& prods = g.rules(sym);
    double u = unit(rng);
    std::size_t pick = prods.size() - 1;
    for (std::size_t i = 0; i < prods.size(); ++i) {
      if (u < prods[i].probability) {
        pick = i;
        break;
      }
      u -= prods[i].probability;
    }
    if (counts) counts->add(sym, pick, prods.size());
    const auto& rhs = prods[pick].rhs;
    for (auto it = rhs.rbegin(); it != rhs.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

ExprTree sample_expression(const Pcfg& g, Rng& rng, const SamplerOptions& options,
                           const Vocabulary* vocab, RuleCounts* counts) {
  if (options.max_height < 1) throw std::invalid_argument("max_height must be >= 1");
  for (std::size_t attempt = 0; attempt < options.resample_budget; ++attempt) {
    auto tokens = sample_derivation(g, rng, options.max_expansions, counts);
    if (!tokens) continue;
    ExprTree tree = parse_infix(*tokens, vocab);
    if (tree.height() <= options.max_height) return tree;
  }
  throw SamplingError("no derivation within height " + std::to_string(options.max_height) +
                      " after " + std::to_string(options.resample_budget) + " draws");
}

ExprTree sample_expression(const Pcfg& g, Rng& rng, std::size_t max_height) {
  SamplerOptions opts;
  opts.max_height = max_height;
  return sample_expression(g, rng, opts);
}

namespace {

std::optional<ExprTree> fit_to_vocabulary(const ExprTree& t, const Vocabulary& vocab, bool& changed) {
  const Symbol& s = t.symbol();
  std::optional<ExprTree> left, right;
  if (t.has_left()) {
    left = fit_to_vocabulary(t.left(), vocab, changed);
    if (!left) return std::nullopt;
  }
  if (t.has_right()) {
    right = fit_to_vocabulary(t.right(), vocab, changed);
    if (!right) return std::nullopt;
  }
  if (s.kind == SymbolKind::literal) {
    if (!vocab.has_constant()) return std::nullopt;
    changed = true;
    return ExprTree::leaf(vocab[vocab.index_of("c")]);
  }
  auto idx = vocab.find(s.name);
  if (!idx || !(vocab[*idx] == s)) return std::nullopt;
  return ExprTree::make(s, std::move(left), std::move(right));
}

}  // namespace

std::vector<ExprTree> generate_corpus(const Pcfg& g, std::size_t n, std::size_t max_height,
                                      bool dedup, Rng& rng, const Vocabulary* vocab,
                                      std::size_t resample_budget) {
  if (n < 1) throw std::invalid_argument("corpus size must be >= 1");
  SamplerOptions opts;
  opts.max_height = max_height;
  opts.resample_budget = resample_budget;
  std::vector<ExprTree> out;
  out.reserve(n);
  std::unordered_set<std::string> seen;
  std::size_t failures = 0;
  while (out.size() < n) {
    if (failures >= resample_budget)
      throw SamplingError("corpus generation stalled at " + std::to_string(out.size()) + " of " +
                          std::to_string(n) + " trees after " + std::to_string(resample_budget) +
                          " consecutive rejected draws");
    ExprTree tree = canonicalize(sample_expression(g, rng, opts));
    if (vocab) {
      bool changed = false;
      auto fitted = fit_to_vocabulary(tree, *vocab, changed);
      if (!fitted) {
        ++failures;
        continue;
      }
      tree = changed ? canonicalize(*fitted) : *fitted;
    }
    if (dedup && !seen.insert(to_postfix_string(tree)).second) {
      ++failures;
      continue;
    }
    failures = 0;
    out.push_back(std::move(tree));
  }
  return out;
}

const std::map<std::string, std::string>& builtin_grammar_texts() {
  static const std::map<std::string, std::string> texts = [] {
    const std::string ae_head =
        "S -> S A F [0.4] | F [0.6]\n"
        "A -> + [0.5] | - [0.5]\n"
        "F -> F B T [0.4] | T [0.6]\n"
        "B -> * [0.5] | / [0.5]\n";
    const std::string ng_head =
        "E -> E + F [0.2] | E - F [0.2] | F [0.6]\n"
        "F -> E * T [0.2] | E / T [0.2] | T [0.6]\n"
        "T -> V [0.4] | ( E ) P [0.2] | ( E ) [0.2] | R ( E ) [0.2]\n";
    const std::string ng_tail =
        "P -> ^2 [0.39] | ^3 [0.26] | ^4 [0.19] | ^5 [0.16]\n"
        "R -> sin [0.2] | cos [0.2] | exp [0.2] | log [0.2] | sqrt [0.2]\n";
    const std::string fm_head =
        "E -> E + F [0.2] | E - F [0.2] | F [0.6]\n"
        "F -> E * T [0.2] | E / T [0.2] | T [0.6]\n"
        "T -> V [0.4] | c [0.3] | A [0.3]\n"
        "A -> ( E ) P [0.1] | ( E ) [0.55] | R ( E ) [0.35]\n";
    const std::string fm_tail =
        "P -> ^2 [0.8] | ^3 [0.2]\n"
        "R -> sin [0.25] | cos [0.25] | exp [0.25] | sqrt [0.25]\n";
    return std::map<std::string, std::string>{
        {"ae", ae_head + "T -> ( S ) [0.25] | c [0.375] | x [0.375]\n"},
        {"trig", ae_head +
                     "T -> ( S ) [0.15] | cos ( S ) [0.05] | sin ( S ) [0.05] | L [0.75]\n"
                     "L -> c [0.5] | x [0.5]\n"},
        {"nguyen", ng_head + "V -> x [1.0]\n" + ng_tail},
        {"nguyen2", ng_head + "V -> x [0.5] | y [0.5]\n" + ng_tail},
        {"feynman", fm_head + "V -> x [1.0]\n" + fm_tail},
        {"feynman2", fm_head + "V -> x [0.5] | y [0.5]\n" + fm_tail},
    };
  }();
  return texts;
}

const std::map<std::string, Pcfg>& builtin_grammars() {
  static const std::map<std::string, Pcfg> grammars = [] {
    std::map<std::string, Pcfg> out;
    for (const auto& [name, text] : builtin_grammar_texts()) out.emplace(name, parse_grammar(text));
    return out;
  }();
  return grammars;
}

Vocabulary builtin_vocabulary(std::string_view name) {
  if (name == "ae") return Vocabulary::from_tokens({"x", "c", "+", "-", "*", "/"});
  if (name == "trig") return Vocabulary::from_tokens({"x", "c", "+", "-", "*", "/", "sin", "cos"});
  if (name == "nguyen" || name == "nguyen2") {
    std::vector<std::string> t{"x"};
    if (name == "nguyen2") t.push_back("y");
    for (auto s : {"+", "-", "*", "/", "^2", "^3", "^4", "^5", "sin", "cos", "exp", "log", "sqrt"})
      t.emplace_back(s);
    return Vocabulary::from_tokens(t);
  }
  if (name == "feynman" || name == "feynman2") {
    std::vector<std::string> t{"x"};
    if (name == "feynman2") t.push_back("y");
    for (auto s : {"c", "+", "-", "*", "/", "^2", "^3", "sin", "cos", "exp", "sqrt"}) t.emplace_back(s);
    return Vocabulary::from_tokens(t);
  }
  throw std::invalid_argument("unknown builtin vocabulary: " + std::string(name));
}

}  // namespace edhie
