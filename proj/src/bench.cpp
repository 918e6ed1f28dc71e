#include "edhie/bench.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "edhie/grammar.hpp"
#include "edhie/random.hpp"

namespace edhie {

namespace {

std::string lit(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

BenchmarkEquation make(std::string id, const std::string& infix, std::vector<std::string> vars,
                       std::vector<std::array<double, 2>> intervals, std::string vocabulary,
                       bool reconstructable = true) {
  BenchmarkEquation eq{std::move(id), parse_infix(infix), std::move(vars), std::move(intervals), 5000,
                       std::move(vocabulary), reconstructable};
  return eq;
}

std::map<std::string, BenchmarkEquation> build() {
  using std::numbers::pi;
  const std::array<double, 2> wide{-20.0, 20.0};
  const std::array<double, 2> fm{1.0, 5.0};
  const std::array<double, 2> fm_alt{1.0, 10.0};
  std::vector<BenchmarkEquation> all = {
      make("NG-1", "x^3 + x^2 + x", {"x"}, {wide}, "nguyen"),
      make("NG-2", "x^4 + x^3 + x^2 + x", {"x"}, {wide}, "nguyen"),
      make("NG-3", "x^5 + x^4 + x^3 + x^2 + x", {"x"}, {wide}, "nguyen"),
      make("NG-4", "(x^3)^2 + x^5 + x^4 + x^3 + x^2 + x", {"x"}, {wide}, "nguyen"),
      make("NG-5", "sin(x^2) * cos(x) - 1", {"x"}, {wide}, "nguyen"),
      make("NG-6", "sin(x) + sin(x + x^2)", {"x"}, {wide}, "nguyen"),
      make("NG-7", "log(x + 1) + log(x^2 + 1)", {"x"}, {{0.0, 40.0}}, "nguyen"),
      make("NG-8", "sqrt(x)", {"x"}, {{0.0, 80.0}}, "nguyen"),
      make("NG-9", "sin(x) + sin(y^2)", {"x", "y"}, {{0.0, 20.0}, {0.0, 20.0}}, "nguyen2"),
      make("NG-10", "2 * sin(x) * cos(y)", {"x", "y"}, {{0.0, 20.0}, {0.0, 20.0}}, "nguyen2"),
      make("FM-1", lit(1.0 / std::sqrt(2.0 * pi)) + " * exp(-0.5 * x^2)", {"x"}, {{1.0, 3.0}}, "feynman"),
      make("FM-2", "exp(-0.5 * (x / y)^2) / (" + lit(std::sqrt(2.0 * pi)) + " * y)", {"x", "y"},
           {{1.0, 3.0}, {1.0, 3.0}}, "feynman2"),
      make("FM-3.1", "x * y", {"x", "y"}, {fm, fm}, "feynman2"),
      make("FM-3.2", "x * y", {"x", "y"}, {fm_alt, fm_alt}, "feynman2"),
      make("FM-4.1", "0.5 * x * y^2", {"x", "y"}, {fm, fm}, "feynman2"),
      make("FM-4.2", "0.5 * x * y^2", {"x", "y"}, {fm_alt, fm_alt}, "feynman2"),
      make("FM-5.1", "x / y", {"x", "y"}, {fm, fm}, "feynman2"),
      make("FM-5.2", "x / y", {"x", "y"}, {fm_alt, fm_alt}, "feynman2"),
      make("FM-6", "asin(x * sin(y))", {"x", "y"}, {{0.0, 1.0}, fm}, "feynman2", false),
      make("FM-7.1", lit(1.0 / (2.0 * pi)) + " * x * y", {"x", "y"}, {fm, fm}, "feynman2"),
      make("FM-7.2", lit(1.0 / (2.0 * pi)) + " * x * y", {"x", "y"}, {fm_alt, fm_alt}, "feynman2"),
      make("FM-8", "1.5 * x * y", {"x", "y"}, {fm, fm}, "feynman2"),
      make("FM-9", "x / (" + lit(4.0 * pi) + " * y^2)", {"x", "y"}, {fm, fm}, "feynman2"),
      make("FM-10", "(1 + x * y) / (1 - " + lit(1.0 / 3.0) + " * x * y)", {"x", "y"}, {{0.0, 1.0}, {0.0, 1.0}},
           "feynman2"),
      make("FM-11", "x * y^2", {"x", "y"}, {fm, fm}, "feynman2"),
      make("FM-12", "x / (2 * (1 + y))", {"x", "y"}, {fm, fm}, "feynman2"),
  };
  std::map<std::string, BenchmarkEquation> out;
  for (auto& eq : all) out.emplace(eq.id, std::move(eq));
  return out;
}

}  // namespace

const std::map<std::string, BenchmarkEquation>& builtin_benchmarks() {
  static const auto table = build();
  return table;
}

const BenchmarkEquation& find_benchmark(const std::string& id) {
  const auto& table = builtin_benchmarks();
  auto it = table.find(id);
  if (it == table.end()) throw std::invalid_argument("unknown benchmark: " + id);
  return it->second;
}

std::vector<std::string> benchmark_suite(const std::string& suite) {
  std::vector<std::string> ids;
  if (suite == "nguyen") {
    for (int i = 1; i <= 10; ++i) ids.push_back("NG-" + std::to_string(i));
  } else if (suite == "feynman") {
    for (const char* id : {"FM-1", "FM-2", "FM-3.1", "FM-3.2", "FM-4.1", "FM-4.2", "FM-5.1", "FM-5.2", "FM-6",
                           "FM-7.1", "FM-7.2", "FM-8", "FM-9", "FM-10", "FM-11", "FM-12"})
      ids.emplace_back(id);
  } else {
    throw std::invalid_argument("unknown suite: " + suite);
  }
  return ids;
}

Dataset simulate_dataset(const BenchmarkEquation& eq, std::size_t points, Rng& rng) {
  const auto k = static_cast<Eigen::Index>(eq.variables.size());
  if (eq.intervals.size() != eq.variables.size()) throw std::invalid_argument(eq.id + ": interval count mismatch");
  std::vector<std::uniform_real_distribution<double>> draw;
  for (const auto& iv : eq.intervals) {
    if (!(iv[0] < iv[1])) throw std::invalid_argument(eq.id + ": empty interval");
    draw.emplace_back(iv[0], iv[1]);
  }
  const CompiledExpr program(eq.expression, eq.variables);
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(points), k);
  d.y.resize(static_cast<Eigen::Index>(points));
  Eigen::MatrixXd row(1, k);
  const std::size_t max_draws = 100 * points + 1000;
  std::size_t draws = 0;
  for (std::size_t i = 0; i < points;) {
    if (++draws > max_draws) throw std::runtime_error(eq.id + ": too many undefined samples");
    for (Eigen::Index j = 0; j < k; ++j) row(0, j) = draw[static_cast<std::size_t>(j)](rng);
    const double y = program.evaluate(row, {})(0);
    if (!std::isfinite(y)) continue;
    d.x.row(static_cast<Eigen::Index>(i)) = row.row(0);
    d.y(static_cast<Eigen::Index>(i)) = y;
    ++i;
  }
  return d;
}

SRTask simulate(const BenchmarkEquation& eq, std::uint64_t seed) {
  SRTask task;
  task.name = eq.id;
  task.variables = eq.variables;
  task.vocab = builtin_vocabulary(eq.vocabulary);
  task.ground_truth = eq.expression;
  Rng train_rng(derive_seed(seed, "train"));
  Rng test_rng(derive_seed(seed, "test"));
  task.train = simulate_dataset(eq, eq.points, train_rng);
  task.test = simulate_dataset(eq, eq.points, test_rng);
  return task;
}

SearchMethod parse_search_method(std::string_view name) {
  if (name == "edhie") return SearchMethod::edhie;
  if (name == "hvar") return SearchMethod::hvar;
  if (name == "grammar") return SearchMethod::grammar;
  throw std::invalid_argument("unknown method: " + std::string(name));
}

std::string_view to_string(SearchMethod method) {
  switch (method) {
    case SearchMethod::edhie: return "edhie";
    case SearchMethod::hvar: return "hvar";
    case SearchMethod::grammar: return "grammar";
  }
  return "?";
}

RunReport run_method(SearchMethod method, const SRTask& task, const HvaeModel* model, const Pcfg* grammar,
                     const SearchConfig& config, std::uint64_t seed) {
  if (method == SearchMethod::grammar) {
    if (!grammar) throw std::invalid_argument("grammar search needs a grammar");
    return grammar_search(*grammar, task, config, seed);
  }
  if (!model) throw std::invalid_argument(std::string(to_string(method)) + " needs a trained model");
  return method == SearchMethod::edhie ? evolve(*model, task, config, seed) : random_search(*model, task, config, seed);
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

std::string file_stem(const std::string& id, std::size_t run) { return id + "_" + std::to_string(run); }

}  // namespace

SummaryRow summarize(const std::string& id, const std::vector<RunReport>& runs) {
  SummaryRow row;
  row.id = id;
  row.runs = runs.size();
  std::vector<double> r2, evals;
  for (const auto& r : runs) {
    r2.push_back(r.best_test_r2);
    if (r.success) {
      ++row.successes;
      evals.push_back(static_cast<double>(*r.evaluations_to_success));
    }
  }
  std::tie(row.mean_r2, row.std_r2) = mean_std(r2);
  if (!evals.empty()) {
    auto [m, s] = mean_std(evals);
    row.mean_evaluations = m;
    row.std_evaluations = s;
  }
  return row;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "id,runs,successes,mean_r2,std_r2,mean_evaluations,std_evaluations\n";
  for (const auto& r : rows) {
    out += r.id + "," + std::to_string(r.runs) + "," + std::to_string(r.successes) + "," + fmt(r.mean_r2) + "," +
           fmt(r.std_r2) + "," + (r.mean_evaluations ? fmt(*r.mean_evaluations) : "NA") + "," +
           (r.std_evaluations ? fmt(*r.std_evaluations) : "NA") + "\n";
  }
  return out;
}

std::string curve_csv(const RunReport& report) {
  std::ostringstream out;
  out.precision(10);
  out << "evaluations,train_rmse,test_r2\n";
  for (const auto& p : report.curve) out << p.evaluations << "," << p.train_rmse << "," << p.test_r2 << "\n";
  return out.str();
}

std::vector<SummaryRow> run_experiment(const ExperimentConfig& config, const HvaeModel* model,
                                       std::vector<RunReport>* all_runs) {
  if (config.runs < 1) throw std::invalid_argument("runs must be >= 1");
  if (config.ids.empty()) throw std::invalid_argument("no benchmark ids");
  namespace fs = std::filesystem;
  if (!config.out_dir.empty()) {
    fs::create_directories(fs::path(config.out_dir) / "runs");
    fs::create_directories(fs::path(config.out_dir) / "curves");
  }
  std::vector<SummaryRow> rows;
  for (const auto& id : config.ids) {
    const BenchmarkEquation& eq = find_benchmark(id);
    SRTask task = simulate(eq, derive_seed(config.seed, id, 0));
    task.budget = config.budget;
    const Pcfg* grammar = nullptr;
    if (config.method == SearchMethod::grammar) grammar = &builtin_grammars().at(eq.vocabulary);
    std::vector<RunReport> runs;
    for (std::size_t k = 0; k < config.runs; ++k) {
      RunReport r = run_method(config.method, task, model, grammar, config.search,
                               derive_seed(config.seed, id + "/run", k));
      if (!config.out_dir.empty()) {
        save_text_file((fs::path(config.out_dir) / "runs" / (file_stem(id, k) + ".json")).string(),
                       run_report_to_json(r) + "\n");
        save_text_file((fs::path(config.out_dir) / "curves" / (file_stem(id, k) + ".csv")).string(), curve_csv(r));
      }
      runs.push_back(std::move(r));
    }
    rows.push_back(summarize(id, runs));
    if (all_runs) all_runs->insert(all_runs->end(), runs.begin(), runs.end());
  }
  if (!config.out_dir.empty())
    save_text_file((fs::path(config.out_dir) / "summary.csv").string(), summary_csv(rows));
  return rows;
}

}  // namespace edhie
