#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "edhie/expr.hpp"
#include "edhie/random.hpp"

namespace edhie {

struct Production {
  std::vector<std::string> rhs;
  double probability = 1.0;
};

/// Weighted context-free grammar. Nonterminals are identifiers starting with
/// an uppercase letter; every other token is a terminal.
class Pcfg {
 public:
  /// Validates: probabilities per nonterminal sum to one, every nonterminal
  /// used on a right-hand side has rules, and the start symbol is productive.
  Pcfg(std::vector<std::string> nonterminals, std::map<std::string, std::vector<Production>> rules);

  const std::string& start() const { return nonterminals_.front(); }
  const std::vector<std::string>& nonterminals() const { return nonterminals_; }
  const std::vector<Production>& rules(const std::string& nonterminal) const;
  bool is_nonterminal(std::string_view token) const;

 private:
  std::vector<std::string> nonterminals_;
  std::map<std::string, std::vector<Production>, std::less<>> rules_;
};

bool looks_like_nonterminal(std::string_view token);

/// `NT -> sym sym ... [p] | ... [p]`, one nonterminal per line, `#` comments.
/// The first left-hand side is the start symbol.
Pcfg parse_grammar(std::string_view text);
std::string to_text(const Pcfg& grammar);

struct SamplerOptions {
  std::size_t max_height = 7;
  std::size_t resample_budget = 1000;
  std::size_t max_expansions = 2000;  // runaway derivations count as rejections
};

/// Rule-choice tallies over every attempted derivation, accepted or not.
struct RuleCounts {
  std::map<std::string, std::vector<std::size_t>> counts;
  void add(const std::string& nonterminal, std::size_t rule, std::size_t n_rules);
};

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Draws one derivation and returns its terminal string, or nullopt when the
/// expansion limit is hit.
std::optional<std::vector<std::string>> sample_derivation(const Pcfg& g, Rng& rng,
                                                          std::size_t max_expansions,
                                                          RuleCounts* counts = nullptr);

/// Rejection sampler: derivations whose infix parse is taller than
/// `max_height` are redrawn, up to the resample budget.
ExprTree sample_expression(const Pcfg& g, Rng& rng, const SamplerOptions& options,
                           const Vocabulary* vocab = nullptr, RuleCounts* counts = nullptr);
ExprTree sample_expression(const Pcfg& g, Rng& rng, std::size_t max_height);

/// Samples `n` canonicalized trees. With a vocabulary, literal leaves that the
/// canonicalizer introduces become the placeholder `c` when the vocabulary has
/// one; trees that still use symbols outside it are redrawn.
std::vector<ExprTree> generate_corpus(const Pcfg& g, std::size_t n, std::size_t max_height,
                                      bool dedup, Rng& rng, const Vocabulary* vocab = nullptr,
                                      std::size_t resample_budget = 1000);

/// Builtin grammars by name: ae, trig, nguyen, nguyen2, feynman, feynman2.
const std::map<std::string, Pcfg>& builtin_grammars();
const std::map<std::string, std::string>& builtin_grammar_texts();
/// Token library matching each builtin grammar.
Vocabulary builtin_vocabulary(std::string_view name);

}  // namespace edhie
