#include "edhie/sr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "edhie/random.hpp"

namespace edhie {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

void validate(const SRTask& task) {
  if (task.variables.empty()) throw std::invalid_argument("task has no variables");
  if (task.budget < 1) throw std::invalid_argument("budget must be >= 1");
  const auto cols = static_cast<Eigen::Index>(task.variables.size());
  for (const Dataset* d : {&task.train, &task.test}) {
    if (d->x.cols() != cols) throw std::invalid_argument("data columns do not match the variables");
    if (d->x.rows() != d->y.size()) throw std::invalid_argument("data rows do not match targets");
    if (d->x.rows() < 1) throw std::invalid_argument("empty data set");
  }
}

Dataset read_dataset_csv(std::string_view text, std::vector<std::string>* header) {
  std::vector<std::vector<double>> rows;
  std::vector<std::string> names;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t p = 0;
    while (true) {
      std::size_t c = line.find(',', p);
      std::string cell(line.substr(p, c == std::string_view::npos ? std::string_view::npos : c - p));
      cell.erase(0, cell.find_first_not_of(" \t"));
      cell.erase(cell.find_last_not_of(" \t") + 1);
      cells.push_back(std::move(cell));
      if (c == std::string_view::npos) break;
      p = c + 1;
    }
    if (first) {
      names = std::move(cells);
      if (names.size() < 2) throw ParseError("CSV needs at least one variable and a target column");
      first = false;
      continue;
    }
    if (cells.size() != names.size()) throw ParseError("CSV row has " + std::to_string(cells.size()) + " cells");
    std::vector<double> row;
    for (const auto& cell : cells) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) throw ParseError("bad number in CSV: " + cell);
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (names.empty()) throw ParseError("empty CSV");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto k = static_cast<Eigen::Index>(names.size()) - 1;
  Dataset d;
  d.x.resize(n, k);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) d.x(i, j) = rows[i][j];
    d.y(i) = rows[i][k];
  }
  if (header) {
    names.pop_back();
    *header = std::move(names);
  }
  return d;
}

std::string write_dataset_csv(const Dataset& data, std::span<const std::string> variables) {
  std::string out;
  for (const auto& v : variables) out += v + ",";
  out += "target\n";
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) out += format_double(data.x(i, j)) + ",";
    out += format_double(data.y(i)) + "\n";
  }
  return out;
}

double rmse(const Eigen::ArrayXd& prediction, const Eigen::VectorXd& y) {
  if (prediction.size() != y.size()) throw std::invalid_argument("rmse: length mismatch");
  if (!prediction.allFinite()) return kInf;
  const double mse = (prediction - y.array()).square().mean();
  return std::isfinite(mse) ? std::sqrt(mse) : kInf;
}

double bounded_r2(const Eigen::ArrayXd& prediction, const Eigen::VectorXd& y, double y_train_mean) {
  if (prediction.size() != y.size() || y.size() < 1) throw std::invalid_argument("bounded_r2: bad lengths");
  if (!prediction.allFinite()) return 0.0;
  const double sse = (y.array() - prediction).square().sum();
  const double sst = (y.array() - y_train_mean).square().sum();
  if (!std::isfinite(sse)) return 0.0;
  if (sst == 0.0) return sse == 0.0 ? 1.0 : 0.0;
  const double r2 = 1.0 - sse / sst;
  return std::isfinite(r2) ? std::clamp(r2, 0.0, 1.0) : 0.0;
}

Minimum nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                    const NelderMeadOptions& options) {
  auto eval = [&](const Eigen::VectorXd& x) {
    const double v = f(x);
    return std::isnan(v) ? kInf : v;
  };
  const Eigen::Index n = x0.size();
  if (n == 0) return {x0, eval(x0)};

  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> val(pts.size());
  for (Eigen::Index i = 0; i < n; ++i) pts[static_cast<std::size_t>(i + 1)](i) += options.initial_step;
  for (std::size_t i = 0; i < pts.size(); ++i) val[i] = eval(pts[i]);

  std::vector<std::size_t> order(pts.size());
  for (int iter = 0; iter < options.iterations; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];

    double diameter = 0.0;
    for (std::size_t i : order) diameter = std::max(diameter, (pts[i] - pts[best]).lpNorm<Eigen::Infinity>());
    if (val[worst] == val[best] && diameter <= 1e-15 * std::max(1.0, pts[best].lpNorm<Eigen::Infinity>())) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i : order)
      if (i != worst) centroid += pts[i];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = eval(xr);
    if (fr < val[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        val[worst] = fe;
      } else {
        pts[worst] = xr;
        val[worst] = fr;
      }
      continue;
    }
    if (fr < val[second]) {
      pts[worst] = xr;
      val[worst] = fr;
      continue;
    }
    const bool outside = fr < val[worst];
    const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                       : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(xc);
    if (outside ? fc <= fr : fc < val[worst]) {
      pts[worst] = xc;
      val[worst] = fc;
      continue;
    }
    for (std::size_t i : order) {
      if (i == best) continue;
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      val[i] = eval(pts[i]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(val.begin(), val.end()) - val.begin());
  return {pts[best], val[best]};
}

FitResult fit_constants(const ExprTree& tree, std::span<const std::string> variables, const Dataset& data,
                        Rng& rng, const FitConfig& config) {
  if (data.rows() < 1) throw std::invalid_argument("fit_constants: empty data");
  const CompiledExpr program(tree, variables);
  const std::size_t k = program.constant_count();
  if (k == 0) return {{}, rmse(program.evaluate(data.x, {}), data.y)};

  auto objective = [&](const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    return [&program, &x, &y](const Eigen::VectorXd& c) {
      return rmse(program.evaluate(x, std::span<const double>(c.data(), static_cast<std::size_t>(c.size()))), y);
    };
  };

  const bool use_subsample = config.subsample > 0 && static_cast<std::size_t>(data.rows()) > config.subsample;
  const auto m = static_cast<Eigen::Index>(use_subsample ? config.subsample : data.rows());
  const Eigen::MatrixXd sub_x = data.x.topRows(m);
  const Eigen::VectorXd sub_y = data.y.head(m);

  std::uniform_real_distribution<double> init(config.init_low, config.init_high);
  NelderMeadOptions nm;
  nm.iterations = config.iterations;
  Minimum best{Eigen::VectorXd(), kInf};
  for (int r = 0; r < std::max(1, config.restarts); ++r) {
    Eigen::VectorXd x0(static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < x0.size(); ++i) x0(i) = init(rng);
    Minimum cand = nelder_mead(objective(sub_x, sub_y), x0, nm);
    if (best.x.size() == 0 || cand.value < best.value) best = std::move(cand);
  }
  if (use_subsample) {
    NelderMeadOptions polish = nm;
    polish.initial_step = 0.1 * std::max(1.0, best.x.lpNorm<Eigen::Infinity>());
    best = nelder_mead(objective(data.x, data.y), best.x, polish);
  }
  return {std::vector<double>(best.x.data(), best.x.data() + best.x.size()), best.value};
}

Eigen::VectorXd crossover(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double mix) {
  if (a.size() != b.size()) throw std::invalid_argument("crossover: dimension mismatch");
  return (1.0 - mix) * a + mix * b;
}

Eigen::VectorXd crossover(const Eigen::VectorXd& a, const Eigen::VectorXd& b, Rng& rng) {
  return crossover(a, b, std::uniform_real_distribution<double>(0.0, 1.0)(rng));
}

Eigen::VectorXd mutate_around(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar, double mix, Rng& rng) {
  const Eigen::VectorXd scale = (mix * (0.5 * logvar.array()).exp() + (1.0 - mix)).matrix();
  const Eigen::VectorXd eps = standard_normal(mu.size(), rng);
  return mix * mu + scale.cwiseProduct(eps);
}

Eigen::VectorXd mutate(const HvaeModel& model, const Eigen::VectorXd& z, std::size_t max_height, Rng& rng) {
  const LatentPoint p = encode_tree(model, decode_tree(model, z, max_height));
  const double mix = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return mutate_around(p.mu, p.logvar, mix, rng);
}

std::string dedup_key(const ExprTree& tree) { return to_postfix_string(canonicalize(tree)); }

namespace {

/// Dedup cache, constant fitting, best tracking and the success check.
class Evaluator {
 public:
  Evaluator(const SRTask& task, const SearchConfig& config, std::uint64_t seed, RunReport& report)
      : task_(task), config_(config), fit_rng_(derive_seed(seed, "fit")), report_(report) {
    validate(task);
    train_mean_ = task.train.y.mean();
    if (task.ground_truth) truth_key_ = dedup_key(*task.ground_truth);
    report_.best_train_rmse = kInf;
  }

  bool done() const { return done_; }

  double score(const ExprTree& tree) {
    const ExprTree canon = canonicalize(tree);
    std::string key = to_postfix_string(canon);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    if (done_) return kInf;

    FitResult fit{{}, kInf};
    try {
      fit = fit_constants(canon, task_.variables, task_.train, fit_rng_, config_.fit);
    } catch (const std::exception&) {
      // Variables outside the task: scored as undefined.
    }
    cache_.emplace(key, fit.rmse);
    ++report_.unique_evaluated;

    const bool solved = fit.rmse < task_.success_threshold && verify(canon, key, fit.constants);
    if (solved || fit.rmse < report_.best_train_rmse || report_.best_postfix.empty()) record_best(canon, key, fit);
    if (solved) {
      report_.success = true;
      report_.evaluations_to_success = report_.unique_evaluated;
      done_ = true;
    }
    if (report_.unique_evaluated >= task_.budget) done_ = true;
    return fit.rmse;
  }

 private:
  bool verify(const ExprTree& canon, const std::string& key, const std::vector<double>& constants) const {
    if (!truth_key_.empty() && key == truth_key_) return true;
    return test_rmse(canon, constants) < task_.verify_threshold;
  }

  double test_rmse(const ExprTree& canon, const std::vector<double>& constants) const {
    const CompiledExpr program(canon, task_.variables);
    return rmse(program.evaluate(task_.test.x, constants), task_.test.y);
  }

  void record_best(const ExprTree& canon, const std::string& key, const FitResult& fit) {
    report_.best_postfix = key;
    report_.best_infix = to_infix_string(canon);
    report_.best_constants = fit.constants;
    report_.best_train_rmse = fit.rmse;
    report_.best_test_r2 = 0.0;
    if (std::isfinite(fit.rmse)) {
      const CompiledExpr program(canon, task_.variables);
      report_.best_test_r2 = bounded_r2(program.evaluate(task_.test.x, fit.constants), task_.test.y, train_mean_);
    }
    report_.curve.push_back({report_.unique_evaluated, fit.rmse, report_.best_test_r2});
  }

  const SRTask& task_;
  const SearchConfig& config_;
  Rng fit_rng_;
  RunReport& report_;
  double train_mean_ = 0.0;
  std::string truth_key_;
  std::unordered_map<std::string, double> cache_;
  bool done_ = false;
};

RunReport start_report(const char* method, const SRTask& task, std::uint64_t seed) {
  RunReport r;
  r.method = method;
  r.task = task.name;
  r.seed = seed;
  return r;
}

std::size_t draw_cap(const SRTask& task, const SearchConfig& config) {
  return std::max<std::size_t>(1, config.draws_per_budget) * task.budget;
}

}  // namespace

RunReport random_search(const HvaeModel& model, const SRTask& task, const SearchConfig& config,
                        std::uint64_t seed) {
  RunReport report = start_report("hvar", task, seed);
  Evaluator ev(task, config, seed, report);
  Rng rng(derive_seed(seed, "search"));
  const std::size_t cap = draw_cap(task, config);
  const std::size_t block = std::max<std::size_t>(1, config.population);
  for (std::size_t draws = 0; !ev.done() && draws < cap;) {
    const Eigen::VectorXd z = standard_normal(model.latent_dim(), rng);
    ev.score(decode_tree(model, z, config.max_height));
    if (++draws % block == 0 || ev.done()) report.generation_best_rmse.push_back(report.best_train_rmse);
  }
  return report;
}

RunReport grammar_search(const Pcfg& grammar, const SRTask& task, const SearchConfig& config,
                         std::uint64_t seed) {
  RunReport report = start_report("grammar", task, seed);
  Evaluator ev(task, config, seed, report);
  Rng rng(derive_seed(seed, "search"));
  SamplerOptions opts;
  opts.max_height = config.max_height;
  const std::size_t cap = draw_cap(task, config);
  const std::size_t block = std::max<std::size_t>(1, config.population);
  for (std::size_t draws = 0; !ev.done() && draws < cap;) {
    try {
      ev.score(sample_expression(grammar, rng, opts));
    } catch (const SamplingError&) {
      // Counted as a draw; the cap bounds grammars that rarely fit the height.
    }
    if (++draws % block == 0 || ev.done()) report.generation_best_rmse.push_back(report.best_train_rmse);
  }
  return report;
}

RunReport evolve(const HvaeModel& model, const SRTask& task, const SearchConfig& config, std::uint64_t seed) {
  if (config.population < 2) throw std::invalid_argument("population must be >= 2");
  if (config.tournament < 1) throw std::invalid_argument("tournament size must be >= 1");
  RunReport report = start_report("edhie", task, seed);
  Evaluator ev(task, config, seed, report);
  Rng rng(derive_seed(seed, "search"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t cap = draw_cap(task, config);
  std::size_t draws = 0;

  struct Individual {
    Eigen::VectorXd z;
    double fitness;
  };
  auto spawn = [&](Eigen::VectorXd z) {
    const double f = ev.score(decode_tree(model, z, config.max_height));
    ++draws;
    return Individual{std::move(z), f};
  };

  std::vector<Individual> population;
  while (population.size() < config.population && !ev.done())
    population.push_back(spawn(standard_normal(model.latent_dim(), rng)));

  auto best_fitness = [&] {
    double b = kInf;
    for (const auto& ind : population) b = std::min(b, ind.fitness);
    return b;
  };
  report.generation_best_rmse.push_back(best_fitness());

  std::uniform_int_distribution<std::size_t> pick(0, population.size() - 1);
  auto tournament = [&]() -> const Individual& {
    std::size_t winner = pick(rng);
    for (std::size_t k = 1; k < config.tournament; ++k) {
      const std::size_t c = pick(rng);
      if (population[c].fitness < population[winner].fitness) winner = c;
    }
    return population[winner];
  };

  while (!ev.done() && draws < cap) {
    std::vector<std::size_t> order(population.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return population[a].fitness < population[b].fitness; });
    std::vector<Individual> next;
    for (std::size_t e = 0; e < std::min(config.elitism, population.size()); ++e) next.push_back(population[order[e]]);
    while (next.size() < population.size() && !ev.done() && draws < cap) {
      Eigen::VectorXd child = tournament().z;
      if (unit(rng) < config.p_crossover) child = crossover(child, tournament().z, rng);
      if (unit(rng) < config.p_mutation) child = mutate(model, child, config.max_height, rng);
      next.push_back(spawn(std::move(child)));
    }
    if (next.size() < population.size()) {
      // Stopped mid-generation; keep the unreplaced tail so the trace stays meaningful.
      for (std::size_t i = next.size(); i < population.size(); ++i) next.push_back(population[order[i]]);
    }
    population = std::move(next);
    report.generation_best_rmse.push_back(best_fitness());
  }
  return report;
}

namespace {

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

double number_or_inf(const nlohmann::json& j) { return j.is_null() ? kInf : j.get<double>(); }

}  // namespace

std::string run_report_to_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["method"] = r.method;
  j["task"] = r.task;
  j["seed"] = r.seed;
  j["success"] = r.success;
  j["best_postfix"] = r.best_postfix;
  j["best_infix"] = r.best_infix;
  j["best_constants"] = r.best_constants;
  j["best_train_rmse"] = number_or_null(r.best_train_rmse);
  j["best_test_r2"] = r.best_test_r2;
  j["evaluations_to_success"] =
      r.evaluations_to_success ? nlohmann::ordered_json(*r.evaluations_to_success) : nlohmann::ordered_json(nullptr);
  j["unique_evaluated"] = r.unique_evaluated;
  auto& gens = j["generation_best_rmse"] = nlohmann::ordered_json::array();
  for (double v : r.generation_best_rmse) gens.push_back(number_or_null(v));
  auto& curve = j["curve"] = nlohmann::ordered_json::array();
  for (const auto& p : r.curve)
    curve.push_back({{"evaluations", p.evaluations}, {"train_rmse", number_or_null(p.train_rmse)}, {"test_r2", p.test_r2}});
  return j.dump(2);
}

RunReport run_report_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  RunReport r;
  r.method = j.at("method").get<std::string>();
  r.task = j.at("task").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.success = j.at("success").get<bool>();
  r.best_postfix = j.at("best_postfix").get<std::string>();
  r.best_infix = j.at("best_infix").get<std::string>();
  r.best_constants = j.at("best_constants").get<std::vector<double>>();
  r.best_train_rmse = number_or_inf(j.at("best_train_rmse"));
  r.best_test_r2 = j.at("best_test_r2").get<double>();
  if (!j.at("evaluations_to_success").is_null())
    r.evaluations_to_success = j.at("evaluations_to_success").get<std::size_t>();
  r.unique_evaluated = j.at("unique_evaluated").get<std::size_t>();
  for (const auto& v : j.at("generation_best_rmse")) r.generation_best_rmse.push_back(number_or_inf(v));
  for (const auto& p : j.at("curve"))
    r.curve.push_back({p.at("evaluations").get<std::size_t>(), number_or_inf(p.at("train_rmse")),
                       p.at("test_r2").get<double>()});
  return r;
}

}  // namespace edhie
