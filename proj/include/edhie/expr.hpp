#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace edhie {

enum class SymbolKind { binary_op, unary_fn, variable, constant, literal };

std::string_view to_string(SymbolKind kind);
SymbolKind parse_symbol_kind(std::string_view text);

/// A vocabulary entry. Operators and functions carry their evaluation rule
/// implicitly through the name; literals carry their value.
struct Symbol {
  std::string name;
  SymbolKind kind = SymbolKind::variable;
  double value = 0.0;  // literals only

  int arity() const noexcept {
    switch (kind) {
      case SymbolKind::binary_op: return 2;
      case SymbolKind::unary_fn: return 1;
      default: return 0;
    }
  }
  bool is_leaf() const noexcept { return arity() == 0; }

  friend bool operator==(const Symbol& a, const Symbol& b) {
    return a.kind == b.kind && a.name == b.name;
  }
};

/// Resolves a token to a symbol using the built-in operator table: known
/// operator/function names, `c` for the constant placeholder, numbers for
/// literals, and any other identifier for a variable.
Symbol builtin_symbol(std::string_view token);

/// Symbol for a numeric literal, named by the shortest round-trip decimal.
Symbol literal_symbol(double value);

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<Symbol> symbols);

  /// Builds a vocabulary by resolving each token with builtin_symbol().
  static Vocabulary from_tokens(std::span<const std::string> tokens);
  static Vocabulary from_tokens(std::initializer_list<std::string_view> tokens);

  std::size_t size() const noexcept { return symbols_.size(); }
  const Symbol& operator[](std::size_t i) const { return symbols_[i]; }
  const std::vector<Symbol>& symbols() const noexcept { return symbols_; }

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;  // throws if absent
  bool contains(std::string_view name) const { return find(name).has_value(); }
  bool has_constant() const;

  std::vector<std::string> variables() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.symbols_ == b.symbols_;
  }

 private:
  std::vector<Symbol> symbols_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Vocabulary file: one `name<TAB>kind` entry per line.
std::string write_vocabulary(const Vocabulary& vocab);
Vocabulary read_vocabulary(std::string_view text);

/// Immutable binary expression tree. Children are shared, so copies are
/// cheap and trees can be handed to concurrent workers freely.
class ExprTree {
 public:
  static ExprTree leaf(Symbol symbol);
  static ExprTree unary(Symbol symbol, ExprTree child);
  static ExprTree binary(Symbol symbol, ExprTree left, ExprTree right);
  /// Generic constructor; rejects any child layout that disagrees with the
  /// symbol's arity.
  static ExprTree make(Symbol symbol, std::optional<ExprTree> left,
                       std::optional<ExprTree> right);

  const Symbol& symbol() const;
  bool has_left() const;
  bool has_right() const;
  const ExprTree& left() const;
  const ExprTree& right() const;

  std::size_t size() const;
  std::size_t height() const;
  std::size_t count_constants() const;

  friend bool operator==(const ExprTree& a, const ExprTree& b);

 private:
  struct Node;
  explicit ExprTree(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

struct ExprTree::Node {
  Symbol symbol;
  std::optional<ExprTree> left;
  std::optional<ExprTree> right;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Notation { infix, prefix, postfix };

ExprTree parse_postfix(std::span<const std::string> tokens, const Vocabulary& vocab);
ExprTree parse_postfix(std::string_view line, const Vocabulary& vocab);
/// Postfix parse resolving tokens with builtin_symbol() instead of a vocabulary.
ExprTree parse_postfix(std::string_view line);

/// Infix parser: `+ -` < `* /` < postfix powers (`^2`..`^5`), function calls
/// `name ( expr )`, parentheses and numeric literals. A null vocabulary
/// resolves tokens through builtin_symbol().
ExprTree parse_infix(std::span<const std::string> tokens, const Vocabulary* vocab = nullptr);
ExprTree parse_infix(std::string_view text, const Vocabulary* vocab = nullptr);
std::vector<std::string> tokenize_infix(std::string_view text);

std::vector<std::string> to_notation(const ExprTree& tree, Notation notation);
std::string to_postfix_string(const ExprTree& tree);
std::string to_infix_string(const ExprTree& tree);

std::vector<std::string> split_tokens(std::string_view line);
std::string join_tokens(std::span<const std::string> tokens);

/// Scalar evaluation. Constant placeholders take `constants` in in-order
/// (left-to-right) position. Any non-finite intermediate yields nullopt.
std::optional<double> evaluate(const ExprTree& tree,
                               const std::map<std::string, double>& bindings,
                               std::span<const double> constants = {});

/// Postfix program over data columns; the hot path of constant fitting.
class CompiledExpr {
 public:
  CompiledExpr(const ExprTree& tree, std::span<const std::string> variables);

  /// Row-wise evaluation over `data` (one column per variable). Undefined
  /// rows come back as NaN.
  Eigen::ArrayXd evaluate(const Eigen::MatrixXd& data, std::span<const double> constants) const;
  std::size_t constant_count() const noexcept { return n_constants_; }

 private:
  enum class Op : unsigned char {
    variable, constant, literal, add, sub, mul, div,
    sin, cos, exp, log, sqrt, asin, neg, pow2, pow3, pow4, pow5
  };
  struct Instr {
    Op op;
    int index = 0;
    double value = 0.0;
  };
  std::vector<Instr> program_;
  std::size_t n_constants_ = 0;
  std::size_t max_stack_ = 0;
};

std::size_t edit_distance(std::span<const std::string> a, std::span<const std::string> b);
/// Token-level Levenshtein distance between postfix serializations.
std::size_t edit_distance(const ExprTree& a, const ExprTree& b);

/// Rewrites to a fixed point: folds literal-only subtrees, collapses a binary
/// op over two constant placeholders into one placeholder, rewrites t-t to 0
/// and t/t to 1 when t has no placeholder, and drops double negation.
ExprTree canonicalize(const ExprTree& tree);

/// Corpus file: one postfix expression per line, `#` starts a comment line.
std::vector<ExprTree> read_corpus(std::string_view text, const Vocabulary& vocab);
std::string write_corpus(std::span<const ExprTree> trees);

std::vector<ExprTree> load_corpus_file(const std::string& path, const Vocabulary& vocab);
void save_text_file(const std::string& path, std::string_view text);
std::string load_text_file(const std::string& path);

}  // namespace edhie
