#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "edhie/expr.hpp"
#include "edhie/grammar.hpp"
#include "edhie/hvae.hpp"

namespace edhie {

/// Samples in rows; one column per variable.
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;

  Eigen::Index rows() const { return x.rows(); }
};

struct SRTask {
  std::string name;
  std::vector<std::string> variables;
  Dataset train;
  Dataset test;
  Vocabulary vocab;
  std::size_t budget = 100000;        // unique expressions
  double success_threshold = 1e-10;   // train RMSE
  double verify_threshold = 1e-8;     // test RMSE for the equivalence check
  std::optional<ExprTree> ground_truth;
};

void validate(const SRTask& task);

/// Reads `name,...,target` CSV with a header row; the last column is the target.
Dataset read_dataset_csv(std::string_view text, std::vector<std::string>* header = nullptr);
std::string write_dataset_csv(const Dataset& data, std::span<const std::string> variables);

// ---- scoring

/// Root mean squared error; +inf if any prediction is not finite.
double rmse(const Eigen::ArrayXd& prediction, const Eigen::VectorXd& y);

/// max(0, 1 - SSE / SST) with SST taken around `y_train_mean`.
double bounded_r2(const Eigen::ArrayXd& prediction, const Eigen::VectorXd& y, double y_train_mean);

// ---- constant fitting

struct NelderMeadOptions {
  int iterations = 200;
  double initial_step = 1.0;
};

struct Minimum {
  Eigen::VectorXd x;
  double value = 0.0;
};

/// Derivative-free simplex minimization.
Minimum nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                    const NelderMeadOptions& options = {});

struct FitConfig {
  int restarts = 4;
  int iterations = 200;
  double init_low = -5.0;
  double init_high = 5.0;
  /// Restarts run on at most this many rows, then the best one is polished on
  /// all rows. 0 disables the subsample.
  std::size_t subsample = 256;
};

struct FitResult {
  std::vector<double> constants;
  double rmse = 0.0;
};

FitResult fit_constants(const ExprTree& tree, std::span<const std::string> variables, const Dataset& data,
                        Rng& rng, const FitConfig& config = {});

// ---- operators

Eigen::VectorXd crossover(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double mix);
Eigen::VectorXd crossover(const Eigen::VectorXd& a, const Eigen::VectorXd& b, Rng& rng);

/// Draw from N(mix * mu, diag(mix * sigma + (1 - mix))^2) with sigma = exp(logvar / 2).
Eigen::VectorXd mutate_around(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar, double mix, Rng& rng);
/// Decode, re-encode, then mutate_around with a uniform mix.
Eigen::VectorXd mutate(const HvaeModel& model, const Eigen::VectorXd& z, std::size_t max_height, Rng& rng);

// ---- search

struct CurvePoint {
  std::size_t evaluations = 0;
  double train_rmse = 0.0;
  double test_r2 = 0.0;
};

struct RunReport {
  std::string method;
  std::string task;
  std::uint64_t seed = 0;
  bool success = false;
  std::string best_postfix;
  std::string best_infix;
  std::vector<double> best_constants;
  double best_train_rmse = 0.0;
  double best_test_r2 = 0.0;
  std::optional<std::size_t> evaluations_to_success;
  std::size_t unique_evaluated = 0;
  std::vector<double> generation_best_rmse;
  std::vector<CurvePoint> curve;
};

std::string run_report_to_json(const RunReport& report);
RunReport run_report_from_json(std::string_view text);

struct SearchConfig {
  std::size_t population = 200;
  std::size_t tournament = 3;
  double p_crossover = 0.7;
  double p_mutation = 0.3;
  std::size_t elitism = 1;
  std::size_t max_height = 7;  // decoding / sampling height cap
  FitConfig fit;
  /// Stop after this many decoded or sampled candidates per unit of budget,
  /// so searches that keep revisiting known expressions still end.
  std::size_t draws_per_budget = 50;
};

RunReport evolve(const HvaeModel& model, const SRTask& task, const SearchConfig& config, std::uint64_t seed);
RunReport random_search(const HvaeModel& model, const SRTask& task, const SearchConfig& config,
                        std::uint64_t seed);
RunReport grammar_search(const Pcfg& grammar, const SRTask& task, const SearchConfig& config,
                         std::uint64_t seed);

/// Key used for deduplication: postfix of the canonical form.
std::string dedup_key(const ExprTree& tree);

}  // namespace edhie
