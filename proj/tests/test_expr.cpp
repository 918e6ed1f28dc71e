#include <doctest.h>

#include <cmath>

#include "edhie/expr.hpp"
#include "edhie/grammar.hpp"
#include "support.hpp"

using namespace edhie;

namespace {

const Vocabulary& arith() {
  static const Vocabulary v = Vocabulary::from_tokens({"x", "y", "c", "+", "-", "*", "/", "sin", "cos", "exp",
                                                        "log", "sqrt", "^2", "^3"});
  return v;
}

std::vector<std::string> toks(std::initializer_list<const char*> list) { return {list.begin(), list.end()}; }

}  // namespace

TEST_CASE("symbols resolve to the expected kinds and arities") {
  CHECK(builtin_symbol("+").arity() == 2);
  CHECK(builtin_symbol("sin").arity() == 1);
  CHECK(builtin_symbol("^3").kind == SymbolKind::unary_fn);
  CHECK(builtin_symbol("c").kind == SymbolKind::constant);
  CHECK(builtin_symbol("x").kind == SymbolKind::variable);
  const Symbol two = builtin_symbol("2.5");
  CHECK(two.kind == SymbolKind::literal);
  CHECK(two.value == 2.5);
  CHECK(literal_symbol(0.1).name == "0.1");
}

TEST_CASE("vocabulary invariants") {
  CHECK_THROWS(Vocabulary::from_tokens({"+", "c"}));       // no variable
  CHECK_THROWS(Vocabulary::from_tokens({"x", "x", "+"}));  // duplicate
  const Vocabulary v = Vocabulary::from_tokens({"x", "+", "sin"});
  CHECK(v.index_of("sin") == 2);
  CHECK_FALSE(v.has_constant());
  CHECK(read_vocabulary(write_vocabulary(arith())) == arith());
}

TEST_CASE("tree construction enforces arity") {
  const Symbol plus = builtin_symbol("+"), sin = builtin_symbol("sin"), x = builtin_symbol("x");
  const ExprTree leaf = ExprTree::leaf(x);
  CHECK_THROWS_AS(ExprTree::make(sin, leaf, leaf), std::invalid_argument);
  CHECK_THROWS_AS(ExprTree::make(plus, leaf, std::nullopt), std::invalid_argument);
  CHECK_THROWS_AS(ExprTree::make(x, leaf, std::nullopt), std::invalid_argument);
  CHECK_THROWS_AS(ExprTree::make(sin, std::nullopt, leaf), std::invalid_argument);
  CHECK_NOTHROW(ExprTree::make(sin, leaf, std::nullopt));
}

TEST_CASE("postfix parsing") {
  const ExprTree t = parse_postfix(toks({"x", "x", "+"}), arith());
  CHECK(t.symbol().name == "+");
  CHECK(t.left().symbol().name == "x");
  CHECK(t.right().symbol().name == "x");

  const ExprTree fig = parse_postfix("x cos x +", arith());
  CHECK(to_infix_string(fig) == "( cos ( x ) + x )");

  const auto seq = toks({"x", "c", "+", "x", "*"});
  const ExprTree m = parse_postfix(seq, arith());
  CHECK(m.symbol().name == "*");
  CHECK(m.left().symbol().name == "+");
  CHECK(to_notation(m, Notation::postfix) == seq);

  CHECK_THROWS_AS(parse_postfix("x q +", arith()), ParseError);
  CHECK_THROWS_AS(parse_postfix("x +", arith()), ParseError);
  CHECK_THROWS_AS(parse_postfix("x x", arith()), ParseError);
  CHECK_THROWS_AS(parse_postfix("", arith()), ParseError);
}

TEST_CASE("notations") {
  const ExprTree t = parse_postfix("x c + x *", arith());
  CHECK(join_tokens(to_notation(t, Notation::prefix)) == "* + x c x");
  CHECK(join_tokens(to_notation(t, Notation::infix)) == "( ( x + c ) * x )");
  CHECK(to_notation(parse_postfix("x x +", arith()), Notation::postfix) == toks({"x", "x", "+"}));
  // Prefix and postfix never contain parentheses.
  for (auto n : {Notation::prefix, Notation::postfix})
    for (const auto& tok : to_notation(t, n)) CHECK((tok != "(" && tok != ")"));
}

TEST_CASE("infix parsing follows the usual precedence") {
  CHECK(to_postfix_string(parse_infix("x + x * c")) == "x x c * +");
  CHECK(to_postfix_string(parse_infix("(x + x) * c")) == "x x + c *");
  CHECK(to_postfix_string(parse_infix("x - x - x")) == "x x - x -");
  CHECK(to_postfix_string(parse_infix("sin(x)^2 / x")) == "x sin ^2 x /");
  CHECK(to_postfix_string(parse_infix("-0.5 * x")) == "-0.5 x *");
  // Fully parenthesized output parses back to the same tree.
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const ExprTree t = oracle::random_tree(arith(), 6, rng);
    CHECK(parse_infix(to_infix_string(t), &arith()) == t);
  }
}

TEST_CASE("postfix round trip on random trees") {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    const ExprTree t = oracle::random_tree(arith(), 6, rng);
    CHECK(t.height() <= 6);
    CHECK(parse_postfix(to_notation(t, Notation::postfix), arith()) == t);
  }
}

TEST_CASE("size, height and constants") {
  const ExprTree t = parse_postfix("x c + x * sin", arith());
  CHECK(t.size() == 6);
  CHECK(t.height() == 4);
  CHECK(t.count_constants() == 1);
  CHECK(parse_postfix("x", arith()).height() == 1);
}

TEST_CASE("scalar evaluation") {
  CHECK(*evaluate(parse_postfix("x x +", arith()), {{"x", 3.0}}) == 6.0);
  const ExprTree ng1 = parse_infix("x^3 + x^2 + x");
  CHECK(*evaluate(ng1, {{"x", 2.0}}) == 14.0);
  const std::vector<double> zero{0.0};
  CHECK_FALSE(evaluate(parse_postfix("x c /", arith()), {{"x", 1.0}}, zero).has_value());
  CHECK_FALSE(evaluate(parse_postfix("x log", arith()), {{"x", -1.0}}).has_value());
  CHECK_FALSE(evaluate(parse_postfix("x sqrt", arith()), {{"x", -1.0}}).has_value());
  CHECK_FALSE(evaluate(parse_postfix("x exp exp", arith()), {{"x", 10.0}}).has_value());
  // Constants are consumed in left-to-right order.
  const std::vector<double> cs{2.0, 5.0};
  CHECK(*evaluate(parse_postfix("c x c - /", arith()), {{"x", 1.0}}, cs) == doctest::Approx(2.0 / (1.0 - 5.0)));
  CHECK_THROWS_AS(evaluate(parse_postfix("x y +", arith()), {{"x", 1.0}}), EvalError);
  CHECK_THROWS_AS(evaluate(parse_postfix("x c +", arith()), {{"x", 1.0}}), EvalError);
}

TEST_CASE("compiled evaluation matches scalar evaluation") {
  Rng rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const std::vector<std::string> vars{"x", "y"};
  for (int i = 0; i < 300; ++i) {
    const ExprTree t = oracle::random_tree(arith(), 5, rng);
    std::vector<double> cs(t.count_constants());
    for (double& c : cs) c = u(rng);
    Eigen::MatrixXd data(8, 2);
    for (Eigen::Index r = 0; r < data.rows(); ++r) data.row(r) << u(rng), u(rng);
    const CompiledExpr program(t, vars);
    CHECK(program.constant_count() == cs.size());
    const Eigen::ArrayXd out = program.evaluate(data, cs);
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
      const auto s = evaluate(t, {{"x", data(r, 0)}, {"y", data(r, 1)}}, cs);
      if (s)
        CHECK(out(r) == *s);
      else
        CHECK(std::isnan(out(r)));
    }
  }
}

TEST_CASE("edit distance examples") {
  const ExprTree t = parse_postfix("x c + x *", arith());
  CHECK(edit_distance(t, t) == 0);
  CHECK(edit_distance(toks({"x", "x", "+"}), toks({"x", "c", "+"})) == 1);
  CHECK(edit_distance(toks({"x", "sin"}), toks({"x", "x", "+", "sin"})) == 2);
  CHECK(edit_distance(parse_postfix("x sin", arith()), parse_postfix("x x + sin", arith())) == 2);
  CHECK(edit_distance(std::vector<std::string>{}, toks({"x", "x"})) == 2);
}

TEST_CASE("edit distance matches the recursive oracle and metric axioms") {
  Rng rng(3);
  const std::vector<std::string> alphabet{"x", "c", "+", "sin", "^2"};
  std::uniform_int_distribution<std::size_t> len(0, 12), sym(0, alphabet.size() - 1);
  auto random_seq = [&] {
    std::vector<std::string> s(len(rng));
    for (auto& t : s) t = alphabet[sym(rng)];
    return s;
  };
  for (int i = 0; i < 300; ++i) {
    const auto a = random_seq(), b = random_seq(), c = random_seq();
    const auto ab = edit_distance(a, b);
    CHECK(ab == oracle::edit_distance(a, b));
    CHECK(ab == edit_distance(b, a));
    CHECK((ab == 0) == (a == b));
    CHECK(edit_distance(a, c) <= ab + edit_distance(b, c));
  }
}

TEST_CASE("canonicalize rewrites") {
  const Vocabulary& v = arith();
  CHECK(to_postfix_string(canonicalize(parse_postfix("c c +", v))) == "c");
  CHECK(to_postfix_string(canonicalize(parse_infix("2 * 3"))) == "6");
  CHECK(to_postfix_string(canonicalize(parse_postfix("x sin x sin -", v))) == "0");
  CHECK(to_postfix_string(canonicalize(parse_postfix("x x /", v))) == "1");
  // Placeholders are fitted independently, so c - c is not zero.
  CHECK(to_postfix_string(canonicalize(parse_postfix("c x * c x * -", v))) == "c x * c x * -");
  CHECK(to_postfix_string(canonicalize(parse_infix("neg(neg(x))"))) == "x");
  CHECK(to_postfix_string(canonicalize(parse_postfix("x c c * +", v))) == "x c +");
}

TEST_CASE("canonicalize is idempotent and preserves values") {
  Rng rng(4);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (int i = 0; i < 500; ++i) {
    const ExprTree t = oracle::random_tree(arith(), 6, rng);
    const ExprTree once = canonicalize(t);
    CHECK(canonicalize(once) == once);
    if (t.count_constants() == 0) {
      const double x = u(rng), y = u(rng);
      const auto a = evaluate(t, {{"x", x}, {"y", y}});
      const auto b = evaluate(once, {{"x", x}, {"y", y}});
      if (a && b) CHECK(*b == doctest::Approx(*a).epsilon(1e-9));
    }
  }
}

TEST_CASE("corpus text round trip") {
  Rng rng(6);
  std::vector<ExprTree> trees;
  for (int i = 0; i < 50; ++i) trees.push_back(oracle::random_tree(arith(), 5, rng));
  const std::string text = "# comment\n" + write_corpus(trees);
  CHECK(read_corpus(text, arith()) == trees);
}
