#include "edhie/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cctype>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace edhie {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_binary_name(std::string_view s) {
  return s == "+" || s == "-" || s == "*" || s == "/";
}

bool is_unary_name(std::string_view s) {
  return s == "sin" || s == "cos" || s == "exp" || s == "log" || s == "sqrt" ||
         s == "asin" || s == "neg" || s == "^2" || s == "^3" || s == "^4" || s == "^5";
}

bool is_power_name(std::string_view s) { return s.size() == 2 && s[0] == '^'; }

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto alpha = [](char ch) { return std::isalpha(static_cast<unsigned char>(ch)) || ch == '_'; };
  if (!alpha(s[0])) return false;
  return std::all_of(s.begin(), s.end(), [&](char ch) {
    return alpha(ch) || std::isdigit(static_cast<unsigned char>(ch));
  });
}

double apply_unary(std::string_view name, double a) {
  switch (name[0]) {
    case 's': return name == "sin" ? std::sin(a) : std::sqrt(a);
    case 'c': return std::cos(a);
    case 'e': return std::exp(a);
    case 'l': return std::log(a);
    case 'a': return std::asin(a);
    case 'n': return -a;
    case '^':
      switch (name[1]) {
        case '2': return a * a;
        case '3': return a * a * a;
        case '4': return (a * a) * (a * a);
        default: return (a * a) * (a * a) * a;
      }
  }
  throw EvalError("unknown unary function: " + std::string(name));
}

double apply_binary(char op, double a, double b) {
  switch (op) {
    case '+': return a + b;
    case '-': return a - b;
    case '*': return a * b;
    default: return a / b;
  }
}

std::optional<double> eval_rec(const ExprTree& t, const std::map<std::string, double>& bindings,
                               std::span<const double> constants, std::size_t& next_const) {
  const Symbol& s = t.symbol();
  double result = 0.0;
  switch (s.kind) {
    case SymbolKind::literal: result = s.value; break;
    case SymbolKind::constant:
      if (next_const >= constants.size()) throw EvalError("too few constant values");
      result = constants[next_const++];
      break;
    case SymbolKind::variable: {
      auto it = bindings.find(s.name);
      if (it == bindings.end()) throw EvalError("unbound variable: " + s.name);
      result = it->second;
      break;
    }
    case SymbolKind::unary_fn: {
      auto a = eval_rec(t.left(), bindings, constants, next_const);
      if (!a) return std::nullopt;
      result = apply_unary(s.name, *a);
      break;
    }
    case SymbolKind::binary_op: {
      // Evaluate both sides even if the left is undefined so the constant
      // counter stays aligned with the in-order placeholder positions.
      auto a = eval_rec(t.left(), bindings, constants, next_const);
      auto b = eval_rec(t.right(), bindings, constants, next_const);
      if (!a || !b) return std::nullopt;
      result = apply_binary(s.name[0], *a, *b);
      break;
    }
  }
  if (!std::isfinite(result)) return std::nullopt;
  return result;
}

bool contains_constant(const ExprTree& t) {
  if (t.symbol().kind == SymbolKind::constant) return true;
  if (t.has_left() && contains_constant(t.left())) return true;
  return t.has_right() && contains_constant(t.right());
}

void emit(const ExprTree& t, Notation n, std::vector<std::string>& out) {
  const Symbol& s = t.symbol();
  switch (n) {
    case Notation::prefix:
      out.push_back(s.name);
      if (t.has_left()) emit(t.left(), n, out);
      if (t.has_right()) emit(t.right(), n, out);
      return;
    case Notation::postfix:
      if (t.has_left()) emit(t.left(), n, out);
      if (t.has_right()) emit(t.right(), n, out);
      out.push_back(s.name);
      return;
    case Notation::infix:
      if (s.arity() == 2) {
        out.emplace_back("(");
        emit(t.left(), n, out);
        out.push_back(s.name);
        emit(t.right(), n, out);
        out.emplace_back(")");
      } else if (s.arity() == 1 && is_power_name(s.name)) {
        emit(t.left(), n, out);
        out.push_back(s.name);
      } else if (s.arity() == 1) {
        out.push_back(s.name);
        out.emplace_back("(");
        emit(t.left(), n, out);
        out.emplace_back(")");
      } else {
        out.push_back(s.name);
      }
      return;
  }
}

class InfixParser {
 public:
  InfixParser(std::span<const std::string> tokens, const Vocabulary* vocab)
      : tokens_(tokens), vocab_(vocab) {}

  ExprTree parse() {
    ExprTree t = expression();
    if (pos_ != tokens_.size()) fail("unexpected token '" + tokens_[pos_] + "'");
    return t;
  }

 private:
  const std::string* peek() const { return pos_ < tokens_.size() ? &tokens_[pos_] : nullptr; }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("infix parse error at token " + std::to_string(pos_) + ": " + what);
  }

  void expect(std::string_view tok) {
    if (!peek() || *peek() != tok) fail("expected '" + std::string(tok) + "'");
    ++pos_;
  }

  Symbol resolve(const std::string& tok) const {
    if (auto v = parse_number(tok)) return literal_symbol(*v);
    if (vocab_) {
      auto idx = vocab_->find(tok);
      if (!idx) throw ParseError("unknown token: " + tok);
      return (*vocab_)[*idx];
    }
    return builtin_symbol(tok);
  }

  ExprTree expression() {
    ExprTree lhs = term();
    while (peek() && (*peek() == "+" || *peek() == "-")) {
      Symbol op = resolve(tokens_[pos_++]);
      lhs = ExprTree::binary(op, lhs, term());
    }
    return lhs;
  }

  ExprTree term() {
    ExprTree lhs = powered();
    while (peek() && (*peek() == "*" || *peek() == "/")) {
      Symbol op = resolve(tokens_[pos_++]);
      lhs = ExprTree::binary(op, lhs, powered());
    }
    return lhs;
  }

  ExprTree powered() {
    ExprTree base = primary();
    while (peek() && is_power_name(*peek())) base = ExprTree::unary(resolve(tokens_[pos_++]), base);
    return base;
  }

  ExprTree primary() {
    const std::string* tok = peek();
    if (!tok) fail("unexpected end of input");
    if (*tok == "(") {
      ++pos_;
      ExprTree inner = expression();
      expect(")");
      return inner;
    }
    if (*tok == "-") {
      ++pos_;
      const std::string* num = peek();
      std::optional<double> v = num ? parse_number(*num) : std::nullopt;
      if (!v) fail("unary minus is only supported before a number");
      ++pos_;
      return ExprTree::leaf(literal_symbol(-*v));
    }
    ++pos_;
    Symbol s = resolve(*tok);
    if (s.arity() == 1 && !is_power_name(s.name)) {
      expect("(");
      ExprTree arg = expression();
      expect(")");
      return ExprTree::unary(s, arg);
    }
    if (s.arity() != 0) fail("operator '" + *tok + "' in operand position");
    return ExprTree::leaf(s);
  }

  std::span<const std::string> tokens_;
  const Vocabulary* vocab_;
  std::size_t pos_ = 0;
};

ExprTree parse_postfix_impl(std::span<const std::string> tokens,
                            const std::function<Symbol(const std::string&)>& resolve) {
  std::vector<ExprTree> stack;
  for (const auto& tok : tokens) {
    Symbol s = resolve(tok);
    const auto need = static_cast<std::size_t>(s.arity());
    if (stack.size() < need) throw ParseError("stack underflow at token '" + tok + "'");
    if (need == 0) {
      stack.push_back(ExprTree::leaf(std::move(s)));
    } else if (need == 1) {
      ExprTree child = std::move(stack.back());
      stack.back() = ExprTree::unary(std::move(s), std::move(child));
    } else {
      ExprTree right = std::move(stack.back());
      stack.pop_back();
      ExprTree left = std::move(stack.back());
      stack.back() = ExprTree::binary(std::move(s), std::move(left), std::move(right));
    }
  }
  if (stack.empty()) throw ParseError("empty expression");
  if (stack.size() > 1)
    throw ParseError("malformed postfix expression: " + std::to_string(stack.size()) +
                     " items left on the stack");
  return std::move(stack.back());
}

}  // namespace

std::string_view to_string(SymbolKind kind) {
  switch (kind) {
    case SymbolKind::binary_op: return "binary";
    case SymbolKind::unary_fn: return "unary";
    case SymbolKind::variable: return "variable";
    case SymbolKind::constant: return "constant";
    case SymbolKind::literal: return "literal";
  }
  return "?";
}

SymbolKind parse_symbol_kind(std::string_view text) {
  if (text == "binary") return SymbolKind::binary_op;
  if (text == "unary") return SymbolKind::unary_fn;
  if (text == "variable") return SymbolKind::variable;
  if (text == "constant") return SymbolKind::constant;
  if (text == "literal") return SymbolKind::literal;
  throw ParseError("unknown symbol kind: " + std::string(text));
}

Symbol builtin_symbol(std::string_view token) {
  if (is_binary_name(token)) return {std::string(token), SymbolKind::binary_op};
  if (is_unary_name(token)) return {std::string(token), SymbolKind::unary_fn};
  if (token == "c") return {"c", SymbolKind::constant};
  if (auto v = parse_number(token)) return literal_symbol(*v);
  if (is_identifier(token)) return {std::string(token), SymbolKind::variable};
  throw ParseError("not a symbol: '" + std::string(token) + "'");
}

Symbol literal_symbol(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  (void)ec;
  return {std::string(buf, ptr), SymbolKind::literal, value};
}

// ---------------------------------------------------------------- Vocabulary

Vocabulary::Vocabulary(std::vector<Symbol> symbols) : symbols_(std::move(symbols)) {
  bool has_variable = false;
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (!index_.emplace(symbols_[i].name, i).second)
      throw std::invalid_argument("duplicate vocabulary symbol: " + symbols_[i].name);
    has_variable |= symbols_[i].kind == SymbolKind::variable;
  }
  if (!has_variable) throw std::invalid_argument("vocabulary needs at least one variable");
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens) {
  std::vector<Symbol> symbols;
  symbols.reserve(tokens.size());
  for (const auto& t : tokens) symbols.push_back(builtin_symbol(t));
  return Vocabulary(std::move(symbols));
}

Vocabulary Vocabulary::from_tokens(std::initializer_list<std::string_view> tokens) {
  std::vector<std::string> v(tokens.begin(), tokens.end());
  return from_tokens(std::span<const std::string>(v));
}

std::optional<std::size_t> Vocabulary::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::index_of(std::string_view name) const {
  auto idx = find(name);
  if (!idx) throw ParseError("symbol not in vocabulary: " + std::string(name));
  return *idx;
}

bool Vocabulary::has_constant() const {
  return std::any_of(symbols_.begin(), symbols_.end(),
                     [](const Symbol& s) { return s.kind == SymbolKind::constant; });
}

std::vector<std::string> Vocabulary::variables() const {
  std::vector<std::string> out;
  for (const auto& s : symbols_)
    if (s.kind == SymbolKind::variable) out.push_back(s.name);
  return out;
}

std::string write_vocabulary(const Vocabulary& vocab) {
  std::string out;
  for (const auto& s : vocab.symbols()) {
    out += s.name;
    out += '\t';
    out += to_string(s.kind);
    out += '\n';
  }
  return out;
}

Vocabulary read_vocabulary(std::string_view text) {
  std::vector<Symbol> symbols;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("vocabulary line without tab: " + line);
    Symbol s{line.substr(0, tab), parse_symbol_kind(line.substr(tab + 1))};
    if (s.kind == SymbolKind::literal) {
      auto v = parse_number(s.name);
      if (!v) throw ParseError("literal symbol is not a number: " + s.name);
      s.value = *v;
    }
    symbols.push_back(std::move(s));
  }
  return Vocabulary(std::move(symbols));
}

// ------------------------------------------------------------------ ExprTree

ExprTree ExprTree::make(Symbol symbol, std::optional<ExprTree> left,
                        std::optional<ExprTree> right) {
  const int arity = symbol.arity();
  const bool ok = (arity == 2 && left && right) || (arity == 1 && left && !right) ||
                  (arity == 0 && !left && !right);
  if (!ok)
    throw std::invalid_argument("child layout does not match arity " + std::to_string(arity) +
                                " of symbol '" + symbol.name + "'");
  return ExprTree(std::make_shared<const Node>(
      Node{std::move(symbol), std::move(left), std::move(right)}));
}

ExprTree ExprTree::leaf(Symbol symbol) {
  return make(std::move(symbol), std::nullopt, std::nullopt);
}

ExprTree ExprTree::unary(Symbol symbol, ExprTree child) {
  return make(std::move(symbol), std::move(child), std::nullopt);
}

ExprTree ExprTree::binary(Symbol symbol, ExprTree left, ExprTree right) {
  return make(std::move(symbol), std::move(left), std::move(right));
}

const Symbol& ExprTree::symbol() const { return node_->symbol; }
bool ExprTree::has_left() const { return node_->left.has_value(); }
bool ExprTree::has_right() const { return node_->right.has_value(); }
const ExprTree& ExprTree::left() const { return *node_->left; }
const ExprTree& ExprTree::right() const { return *node_->right; }

std::size_t ExprTree::size() const {
  return 1 + (has_left() ? left().size() : 0) + (has_right() ? right().size() : 0);
}

std::size_t ExprTree::height() const {
  return 1 + std::max(has_left() ? left().height() : 0, has_right() ? right().height() : 0);
}

std::size_t ExprTree::count_constants() const {
  return (symbol().kind == SymbolKind::constant ? 1 : 0) +
         (has_left() ? left().count_constants() : 0) +
         (has_right() ? right().count_constants() : 0);
}

bool operator==(const ExprTree& a, const ExprTree& b) {
  if (a.node_ == b.node_) return true;
  if (!(a.symbol() == b.symbol())) return false;
  if (a.has_left() != b.has_left() || a.has_right() != b.has_right()) return false;
  if (a.has_left() && !(a.left() == b.left())) return false;
  return !a.has_right() || a.right() == b.right();
}

// ----------------------------------------------------------------- notations

std::vector<std::string> split_tokens(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

ExprTree parse_postfix(std::span<const std::string> tokens, const Vocabulary& vocab) {
  return parse_postfix_impl(tokens, [&](const std::string& tok) {
    auto idx = vocab.find(tok);
    if (!idx) throw ParseError("unknown token: " + tok);
    return vocab[*idx];
  });
}

ExprTree parse_postfix(std::string_view line, const Vocabulary& vocab) {
  auto tokens = split_tokens(line);
  return parse_postfix(tokens, vocab);
}

ExprTree parse_postfix(std::string_view line) {
  auto tokens = split_tokens(line);
  return parse_postfix_impl(tokens, [](const std::string& tok) { return builtin_symbol(tok); });
}

std::vector<std::string> tokenize_infix(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto digit = [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)) != 0; };
  while (i < text.size()) {
    const char ch = text[i];
    if (std::isspace(static_cast<unsigned char>(ch))) {
      ++i;
    } else if (ch == '(' || ch == ')' || ch == '+' || ch == '-' || ch == '*' || ch == '/') {
      out.emplace_back(1, ch);
      ++i;
    } else if (ch == '^') {
      std::size_t j = i + 1;
      while (j < text.size() && digit(text[j])) ++j;
      if (j == i + 1) throw ParseError("'^' must be followed by an integer exponent");
      out.emplace_back(text.substr(i, j - i));
      i = j;
    } else if (digit(ch) || ch == '.') {
      std::size_t j = i;
      while (j < text.size() && (digit(text[j]) || text[j] == '.')) ++j;
      if (j < text.size() && (text[j] == 'e' || text[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < text.size() && (text[k] == '+' || text[k] == '-')) ++k;
        if (k < text.size() && digit(text[k])) {
          j = k;
          while (j < text.size() && digit(text[j])) ++j;
        }
      }
      out.emplace_back(text.substr(i, j - i));
      i = j;
    } else if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      std::size_t j = i;
      while (j < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
        ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
    } else {
      throw ParseError(std::string("unexpected character '") + ch + "'");
    }
  }
  return out;
}

ExprTree parse_infix(std::span<const std::string> tokens, const Vocabulary* vocab) {
  return InfixParser(tokens, vocab).parse();
}

ExprTree parse_infix(std::string_view text, const Vocabulary* vocab) {
  auto tokens = tokenize_infix(text);
  return parse_infix(tokens, vocab);
}

std::vector<std::string> to_notation(const ExprTree& tree, Notation notation) {
  std::vector<std::string> out;
  out.reserve(tree.size() * (notation == Notation::infix ? 3 : 1));
  emit(tree, notation, out);
  return out;
}

std::string to_postfix_string(const ExprTree& tree) {
  return join_tokens(to_notation(tree, Notation::postfix));
}

std::string to_infix_string(const ExprTree& tree) {
  return join_tokens(to_notation(tree, Notation::infix));
}

// ---------------------------------------------------------------- evaluation

std::optional<double> evaluate(const ExprTree& tree, const std::map<std::string, double>& bindings,
                               std::span<const double> constants) {
  const std::size_t expected = tree.count_constants();
  if (constants.size() != expected)
    throw EvalError("expected " + std::to_string(expected) + " constant values, got " +
                    std::to_string(constants.size()));
  std::size_t next = 0;
  return eval_rec(tree, bindings, constants, next);
}

CompiledExpr::CompiledExpr(const ExprTree& tree, std::span<const std::string> variables) {
  std::size_t depth = 0;
  auto compile = [&](auto&& self, const ExprTree& t) -> void {
    const Symbol& s = t.symbol();
    if (t.has_left()) self(self, t.left());
    if (t.has_right()) self(self, t.right());
    Instr in{Op::literal};
    switch (s.kind) {
      case SymbolKind::literal: in = {Op::literal, 0, s.value}; break;
      case SymbolKind::constant: in = {Op::constant, static_cast<int>(n_constants_++)}; break;
      case SymbolKind::variable: {
        auto it = std::find(variables.begin(), variables.end(), s.name);
        if (it == variables.end()) throw EvalError("unbound variable: " + s.name);
        in = {Op::variable, static_cast<int>(it - variables.begin())};
        break;
      }
      case SymbolKind::binary_op:
        in.op = s.name == "+" ? Op::add : s.name == "-" ? Op::sub : s.name == "*" ? Op::mul : Op::div;
        break;
      case SymbolKind::unary_fn: {
        static const std::pair<std::string_view, Op> table[] = {
            {"sin", Op::sin},   {"cos", Op::cos},   {"exp", Op::exp},   {"log", Op::log},
            {"sqrt", Op::sqrt}, {"asin", Op::asin}, {"neg", Op::neg},   {"^2", Op::pow2},
            {"^3", Op::pow3},   {"^4", Op::pow4},   {"^5", Op::pow5}};
        auto it = std::find_if(std::begin(table), std::end(table),
                               [&](const auto& e) { return e.first == s.name; });
        if (it == std::end(table)) throw EvalError("unknown function: " + s.name);
        in.op = it->second;
        break;
      }
    }
    if (s.arity() == 0) max_stack_ = std::max(max_stack_, ++depth);
    if (s.arity() == 2) --depth;
    program_.push_back(in);
  };
  compile(compile, tree);
}

Eigen::ArrayXd CompiledExpr::evaluate(const Eigen::MatrixXd& data,
                                      std::span<const double> constants) const {
  if (constants.size() != n_constants_)
    throw EvalError("expected " + std::to_string(n_constants_) + " constant values, got " +
                    std::to_string(constants.size()));
  const Eigen::Index n = data.rows();
  std::vector<Eigen::ArrayXd> stack(max_stack_);
  std::size_t top = 0;
  auto finite_or_nan = [](double v) { return std::isfinite(v) ? v : kNaN; };
  for (const Instr& in : program_) {
    switch (in.op) {
      case Op::variable: stack[top++] = data.col(in.index).array(); break;
      case Op::constant: stack[top++] = Eigen::ArrayXd::Constant(n, finite_or_nan(constants[in.index])); break;
      case Op::literal: stack[top++] = Eigen::ArrayXd::Constant(n, in.value); break;
      case Op::add: case Op::sub: case Op::mul: case Op::div: {
        Eigen::ArrayXd& a = stack[top - 2];
        const Eigen::ArrayXd& b = stack[top - 1];
        switch (in.op) {
          case Op::add: a += b; break;
          case Op::sub: a -= b; break;
          case Op::mul: a *= b; break;
          default: a /= b; break;
        }
        a = a.unaryExpr(finite_or_nan);
        --top;
        break;
      }
      default: {
        Eigen::ArrayXd& a = stack[top - 1];
        double (*f)(double) = nullptr;
        switch (in.op) {
          case Op::sin: f = [](double v) { return std::sin(v); }; break;
          case Op::cos: f = [](double v) { return std::cos(v); }; break;
          case Op::exp: f = [](double v) { return std::exp(v); }; break;
          case Op::log: f = [](double v) { return std::log(v); }; break;
          case Op::sqrt: f = [](double v) { return std::sqrt(v); }; break;
          case Op::asin: f = [](double v) { return std::asin(v); }; break;
          case Op::neg: f = [](double v) { return -v; }; break;
          case Op::pow2: f = [](double v) { return v * v; }; break;
          case Op::pow3: f = [](double v) { return v * v * v; }; break;
          case Op::pow4: f = [](double v) { return (v * v) * (v * v); }; break;
          default: f = [](double v) { return (v * v) * (v * v) * v; }; break;
        }
        a = a.unaryExpr([f, &finite_or_nan](double v) { return finite_or_nan(f(v)); });
        break;
      }
    }
  }
  return std::move(stack[0]);
}

// ------------------------------------------------------------- edit distance

std::size_t edit_distance(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::size_t edit_distance(const ExprTree& a, const ExprTree& b) {
  return edit_distance(to_notation(a, Notation::postfix), to_notation(b, Notation::postfix));
}

// ------------------------------------------------------------ canonicalizer

namespace {

ExprTree rewrite(const ExprTree& t, bool& changed) {
  const Symbol& s = t.symbol();
  if (s.arity() == 0) return t;

  ExprTree left = rewrite(t.left(), changed);
  if (s.arity() == 1) {
    const Symbol& ls = left.symbol();
    if (ls.kind == SymbolKind::literal) {
      double v = apply_unary(s.name, ls.value);
      if (std::isfinite(v)) {
        changed = true;
        return ExprTree::leaf(literal_symbol(v));
      }
    }
    if (s.name == "neg" && ls.name == "neg") {
      changed = true;
      return left.left();
    }
    return ExprTree::unary(s, std::move(left));
  }

  ExprTree right = rewrite(t.right(), changed);
  const Symbol& ls = left.symbol();
  const Symbol& rs = right.symbol();
  if (ls.kind == SymbolKind::literal && rs.kind == SymbolKind::literal) {
    double v = apply_binary(s.name[0], ls.value, rs.value);
    if (std::isfinite(v)) {
      changed = true;
      return ExprTree::leaf(literal_symbol(v));
    }
  }
  if (ls.kind == SymbolKind::constant && rs.kind == SymbolKind::constant) {
    changed = true;
    return left;
  }
  if ((s.name == "-" || s.name == "/") && left == right && !contains_constant(left)) {
    changed = true;
    return ExprTree::leaf(literal_symbol(s.name == "-" ? 0.0 : 1.0));
  }
  return ExprTree::binary(s, std::move(left), std::move(right));
}

}  // namespace

ExprTree canonicalize(const ExprTree& tree) {
  ExprTree current = tree;
  for (;;) {
    bool changed = false;
    ExprTree next = rewrite(current, changed);
    if (!changed) return next;
    current = std::move(next);
  }
}

// ------------------------------------------------------------------- corpus

std::vector<ExprTree> read_corpus(std::string_view text, const Vocabulary& vocab) {
  std::vector<ExprTree> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto tokens = split_tokens(line);
    if (tokens.empty() || tokens[0][0] == '#') continue;
    try {
      out.push_back(parse_postfix(tokens, vocab));
    } catch (const ParseError& e) {
      throw ParseError("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string write_corpus(std::span<const ExprTree> trees) {
  std::string out;
  for (const auto& t : trees) {
    out += to_postfix_string(t);
    out += '\n';
  }
  return out;
}

std::string load_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::vector<ExprTree> load_corpus_file(const std::string& path, const Vocabulary& vocab) {
  return read_corpus(load_text_file(path), vocab);
}

}  // namespace edhie
