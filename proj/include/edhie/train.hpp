#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "edhie/expr.hpp"
#include "edhie/hvae.hpp"
#include "edhie/nnmath.hpp"

namespace edhie {

enum class AnnealShape { tanh, constant };

/// lambda_i = 0.5 * (tanh((i - midpoint) / steepness) + 1), frozen at
/// lambda_{freeze_after} from iteration freeze_after on.
struct AnnealConfig {
  AnnealShape shape = AnnealShape::tanh;
  double midpoint = 800.0;
  double steepness = 200.0;
  std::size_t freeze_after = 1800;
  double constant = 0.0;  // used by AnnealShape::constant
};

/// Constants exactly as printed for the published experiments (midpoint 4500,
/// steepness 2, frozen after 1800 iterations), which keep lambda near zero.
AnnealConfig published_annealing();

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  int latent_dim = 32;
  int hidden_dim = 64;
  AnnealConfig anneal;
  std::uint64_t seed = 0;
  nn::AdamConfig adam;
  /// Height cap for free decoding during evaluation; 0 means corpus max + 1.
  std::size_t decode_max_height = 0;
};

void validate(const TrainConfig& cfg);

/// Iterations count optimizer steps (minibatches).
double lambda_schedule(const AnnealConfig& anneal, std::size_t iteration);

struct BatchRecord {
  std::size_t iteration = 0;
  double lambda = 0.0;
  double total = 0.0;  // batch means
  double reconstruction = 0.0;
  double kl = 0.0;
};

struct EpochSummary {
  std::size_t epoch = 0;
  double mean_total = 0.0;
  double mean_reconstruction = 0.0;
  double validation_loss = 0.0;  // NaN without a validation set
};

struct TrainResult {
  std::vector<BatchRecord> trace;
  std::vector<EpochSummary> epochs;
  std::size_t skipped_steps = 0;
  std::size_t best_epoch = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::vector<BatchRecord> trace)
      : std::runtime_error(what), trace(std::move(trace)) {}
  std::vector<BatchRecord> trace;
};

struct TrainHooks {
  std::function<void(const EpochSummary&, const HvaeModel&)> on_epoch;
  /// Held-out trees for best-checkpoint selection (teacher-forced loss at z = mu).
  std::span<const ExprTree> validation;
};

/// Shuffled minibatch training. Each tree is taped separately; gradients are
/// averaged over the batch and applied with one optimizer step. On a
/// non-finite loss the model is rolled back to the last completed epoch and
/// TrainingDiverged is thrown.
TrainResult train(HvaeModel& model, std::span<const ExprTree> corpus, const TrainConfig& cfg, Rng& rng,
                  const TrainHooks& hooks = {});

/// Fresh model initialized from cfg.seed and trained on `corpus`.
HvaeModel train_new_model(const Vocabulary& vocab, std::span<const ExprTree> corpus, const TrainConfig& cfg,
                          TrainResult* result = nullptr, const TrainHooks& hooks = {});

std::size_t max_height_of(std::span<const ExprTree> corpus);

/// Greedy reconstruction of each tree through mu.
struct ReconstructionStats {
  double mean_edit_distance = 0.0;
  std::size_t invalid = 0;
  std::size_t count = 0;
};
ReconstructionStats reconstruction_error(const HvaeModel& model, std::span<const ExprTree> trees,
                                         std::size_t max_height);

struct EvalReport {
  double mean_edit_distance = 0.0;
  double std_edit_distance = 0.0;  // sample std over fold means
  double invalid_rate = 0.0;
  std::vector<double> fold_edit_distance;
  std::vector<double> fold_invalid_rate;
  std::size_t folds = 0;
  std::size_t corpus_size = 0;
  TrainConfig config;
};

/// Seeded k-fold split; assignment[i] is the fold of corpus item i.
std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed);

EvalReport cross_validate(const Vocabulary& vocab, std::span<const ExprTree> corpus, const TrainConfig& cfg,
                          std::size_t folds = 5);

enum class SweepAxis { corpus_size, latent_dim };
SweepAxis parse_sweep_axis(std::string_view name);

struct SweepRow {
  double value = 0.0;
  EvalReport report;
};

std::vector<SweepRow> sweep(const Vocabulary& vocab, std::span<const ExprTree> corpus, const TrainConfig& cfg,
                            SweepAxis axis, std::span<const double> values, std::size_t folds = 5);

std::string report_to_text(const EvalReport& report);
std::string report_csv_header();
std::string report_csv_row(const EvalReport& report);
std::string sweep_to_csv(SweepAxis axis, std::span<const SweepRow> rows);
std::string trace_to_csv(std::span<const BatchRecord> trace);

}  // namespace edhie
