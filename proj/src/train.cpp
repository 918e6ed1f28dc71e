#include "edhie/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "edhie/random.hpp"

namespace edhie {

AnnealConfig published_annealing() {
  AnnealConfig a;
  a.midpoint = 4500.0;
  a.steepness = 2.0;
  a.freeze_after = 1800;
  return a;
}

void validate(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw std::invalid_argument("batch size must be positive");
  if (cfg.latent_dim < 1 || cfg.hidden_dim < 1) throw std::invalid_argument("dimensions must be positive");
  if (cfg.anneal.freeze_after < 1) throw std::invalid_argument("freeze_after must be >= 1");
  if (cfg.anneal.shape == AnnealShape::tanh && !(cfg.anneal.steepness > 0.0))
    throw std::invalid_argument("annealing steepness must be positive");
  if (cfg.anneal.shape == AnnealShape::constant && cfg.anneal.constant < 0.0)
    throw std::invalid_argument("constant lambda must be >= 0");
}

double lambda_schedule(const AnnealConfig& a, std::size_t iteration) {
  if (a.shape == AnnealShape::constant) return a.constant;
  const double i = static_cast<double>(std::min(iteration, a.freeze_after));
  return 0.5 * (std::tanh((i - a.midpoint) / a.steepness) + 1.0);
}

namespace {

std::vector<Matrix> snapshot(const HvaeModel& m) {
  std::vector<Matrix> out;
  for (const auto* p : m.parameters()) out.push_back(p->value);
  return out;
}

void restore(HvaeModel& m, const std::vector<Matrix>& snap) {
  auto params = m.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i]->value = snap[i];
    params[i]->zero_grad();
  }
}

double validation_loss(const HvaeModel& m, std::span<const ExprTree> trees, double lambda) {
  const Vector eps = Vector::Zero(m.latent_dim());
  double sum = 0.0;
  for (const auto& t : trees) sum += loss_value(m, t, lambda, eps).total;
  return sum / static_cast<double>(trees.size());
}

}  // namespace

TrainResult train(HvaeModel& model, std::span<const ExprTree> corpus, const TrainConfig& cfg, Rng& rng,
                  const TrainHooks& hooks) {
  validate(cfg);
  if (corpus.empty()) throw std::invalid_argument("training corpus is empty");
  TrainResult result;
  nn::Adam adam(model.parameters(), cfg.adam);
  nn::Tape tape;
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<Matrix> checkpoint = snapshot(model);
  std::vector<Matrix> best = checkpoint;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t iteration = 0;
  model.zero_grad();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0, epoch_rec = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      const double lambda = lambda_schedule(cfg.anneal, iteration);
      BatchRecord rec{iteration, lambda, 0.0, 0.0, 0.0};
      for (std::size_t k = start; k < end; ++k) {
        tape.clear();
        TapedLoss l = loss(model, corpus[order[k]], lambda, rng, tape);
        if (!std::isfinite(l.terms.total)) {
          restore(model, checkpoint);
          throw TrainingDiverged("non-finite loss at iteration " + std::to_string(iteration) +
                                     "; model restored to the end of epoch " + std::to_string(epoch),
                                 std::move(result.trace));
        }
        tape.backward(l.total, inv);
        rec.total += inv * l.terms.total;
        rec.reconstruction += inv * l.terms.reconstruction;
        rec.kl += inv * l.terms.kl;
      }
      tape.clear();
      if (!adam.step()) ++result.skipped_steps;
      result.trace.push_back(rec);
      epoch_total += rec.total * static_cast<double>(end - start);
      epoch_rec += rec.reconstruction * static_cast<double>(end - start);
      ++iteration;
    }
    EpochSummary summary;
    summary.epoch = epoch;
    summary.mean_total = epoch_total / static_cast<double>(corpus.size());
    summary.mean_reconstruction = epoch_rec / static_cast<double>(corpus.size());
    summary.validation_loss = std::numeric_limits<double>::quiet_NaN();
    checkpoint = snapshot(model);
    if (!hooks.validation.empty()) {
      summary.validation_loss =
          validation_loss(model, hooks.validation, lambda_schedule(cfg.anneal, iteration));
      if (summary.validation_loss < best_val) {
        best_val = summary.validation_loss;
        best = checkpoint;
        result.best_epoch = epoch;
      }
    } else {
      result.best_epoch = epoch;
    }
    result.epochs.push_back(summary);
    if (hooks.on_epoch) hooks.on_epoch(summary, model);
  }
  if (!hooks.validation.empty() && std::isfinite(best_val)) restore(model, best);
  return result;
}

HvaeModel train_new_model(const Vocabulary& vocab, std::span<const ExprTree> corpus, const TrainConfig& cfg,
                          TrainResult* result, const TrainHooks& hooks) {
  HvaeModel model(vocab, cfg.hidden_dim, cfg.latent_dim);
  Rng init_rng(derive_seed(cfg.seed, "init"));
  model.initialize(init_rng);
  Rng train_rng(derive_seed(cfg.seed, "train"));
  TrainResult r = train(model, corpus, cfg, train_rng, hooks);
  if (result) *result = std::move(r);
  return model;
}

std::size_t max_height_of(std::span<const ExprTree> corpus) {
  std::size_t h = 1;
  for (const auto& t : corpus) h = std::max(h, t.height());
  return h;
}

namespace {

bool structurally_valid(const ExprTree& t, const Vocabulary& vocab) {
  // Re-serialize and re-parse against the vocabulary; any arity or symbol
  // violation fails here.
  try {
    return parse_postfix(to_notation(t, Notation::postfix), vocab) == t;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

ReconstructionStats reconstruction_error(const HvaeModel& model, std::span<const ExprTree> trees,
                                         std::size_t max_height) {
  ReconstructionStats s;
  double total = 0.0;
  for (const auto& t : trees) {
    ExprTree out = decode_tree(model, encode_tree(model, t).mu, max_height, DecodeMode::greedy);
    if (!structurally_valid(out, model.vocab())) ++s.invalid;
    total += static_cast<double>(edit_distance(t, out));
    ++s.count;
  }
  s.mean_edit_distance = s.count ? total / static_cast<double>(s.count) : 0.0;
  return s;
}

std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 2 || n < folds) throw std::invalid_argument("need at least 2 folds and one item per fold");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, "folds"));
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> assignment(n);
  for (std::size_t k = 0; k < n; ++k) assignment[perm[k]] = k % folds;
  return assignment;
}

namespace {

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

EvalReport cross_validate(const Vocabulary& vocab, std::span<const ExprTree> corpus, const TrainConfig& cfg,
                          std::size_t folds) {
  validate(cfg);
  if (folds < 2) throw std::invalid_argument("cross-validation needs at least 2 folds");
  if (corpus.size() < folds) throw std::invalid_argument("corpus smaller than the number of folds");
  const auto assignment = fold_assignment(corpus.size(), folds, cfg.seed);
  const std::size_t max_height = cfg.decode_max_height ? cfg.decode_max_height : max_height_of(corpus) + 1;

  EvalReport report;
  report.folds = folds;
  report.corpus_size = corpus.size();
  report.config = cfg;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<ExprTree> train_set, test_set;
    for (std::size_t i = 0; i < corpus.size(); ++i) (assignment[i] == f ? test_set : train_set).push_back(corpus[i]);
    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = derive_seed(cfg.seed, "fold", f);
    HvaeModel model = train_new_model(vocab, train_set, fold_cfg);
    ReconstructionStats s = reconstruction_error(model, test_set, max_height);
    report.fold_edit_distance.push_back(s.mean_edit_distance);
    report.fold_invalid_rate.push_back(static_cast<double>(s.invalid) / static_cast<double>(s.count));
  }
  report.mean_edit_distance = mean_of(report.fold_edit_distance);
  report.std_edit_distance = sample_std(report.fold_edit_distance);
  report.invalid_rate = mean_of(report.fold_invalid_rate);
  return report;
}

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "corpus_size" || name == "corpus-size") return SweepAxis::corpus_size;
  if (name == "latent_dim" || name == "latent-dim") return SweepAxis::latent_dim;
  throw std::invalid_argument("unknown sweep axis: " + std::string(name));
}

std::vector<SweepRow> sweep(const Vocabulary& vocab, std::span<const ExprTree> corpus, const TrainConfig& cfg,
                            SweepAxis axis, std::span<const double> values, std::size_t folds) {
  if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
  std::vector<std::size_t> perm(corpus.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(cfg.seed, "sweep"));
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<SweepRow> rows;
  for (double v : values) {
    TrainConfig c = cfg;
    std::vector<ExprTree> subset;
    if (axis == SweepAxis::corpus_size) {
      const auto n = static_cast<std::size_t>(v);
      if (n < folds || n > corpus.size()) throw std::invalid_argument("corpus size out of range: " + std::to_string(n));
      for (std::size_t k = 0; k < n; ++k) subset.push_back(corpus[perm[k]]);
    } else {
      c.latent_dim = static_cast<int>(v);
      subset.assign(corpus.begin(), corpus.end());
    }
    rows.push_back({v, cross_validate(vocab, subset, c, folds)});
  }
  return rows;
}

std::string report_to_text(const EvalReport& r) {
  std::ostringstream out;
  out.precision(4);
  out << std::fixed;
  out << "folds:           " << r.folds << "\n"
      << "corpus size:     " << r.corpus_size << "\n"
      << "latent/hidden:   " << r.config.latent_dim << "/" << r.config.hidden_dim << "\n"
      << "epochs/batch:    " << r.config.epochs << "/" << r.config.batch_size << "\n"
      << "edit distance:   " << r.mean_edit_distance << " (+- " << r.std_edit_distance << ")\n"
      << "invalid rate:    " << r.invalid_rate << "\n"
      << "per fold:       ";
  for (double d : r.fold_edit_distance) out << " " << d;
  out << "\n";
  return out.str();
}

std::string report_csv_header() {
  return "folds,corpus_size,latent_dim,hidden_dim,epochs,batch_size,mean_edit_distance,std_edit_distance,"
         "invalid_rate";
}

std::string report_csv_row(const EvalReport& r) {
  std::ostringstream out;
  out.precision(6);
  out << r.folds << "," << r.corpus_size << "," << r.config.latent_dim << "," << r.config.hidden_dim << ","
      << r.config.epochs << "," << r.config.batch_size << "," << r.mean_edit_distance << ","
      << r.std_edit_distance << "," << r.invalid_rate;
  return out.str();
}

std::string sweep_to_csv(SweepAxis axis, std::span<const SweepRow> rows) {
  std::string out = (axis == SweepAxis::corpus_size ? "corpus_size_value," : "latent_dim_value,") +
                    report_csv_header() + "\n";
  for (const auto& row : rows) {
    std::ostringstream line;
    line << row.value << "," << report_csv_row(row.report) << "\n";
    out += line.str();
  }
  return out;
}

std::string trace_to_csv(std::span<const BatchRecord> trace) {
  std::ostringstream out;
  out.precision(10);
  out << "iteration,lambda,total,reconstruction,kl\n";
  for (const auto& r : trace)
    out << r.iteration << "," << r.lambda << "," << r.total << "," << r.reconstruction << "," << r.kl << "\n";
  return out.str();
}

}  // namespace edhie
