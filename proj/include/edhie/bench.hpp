#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "edhie/expr.hpp"
#include "edhie/hvae.hpp"
#include "edhie/sr.hpp"

namespace edhie {

struct BenchmarkEquation {
  std::string id;
  ExprTree expression;
  std::vector<std::string> variables;
  std::vector<std::array<double, 2>> intervals;  // one [lo, hi] per variable
  std::size_t points = 5000;
  std::string vocabulary;  // builtin vocabulary / grammar name
  bool reconstructable = true;  // false when the ground truth needs a symbol outside the vocabulary
};

/// NG-1..NG-10 and the 16 two-variable-or-fewer Feynman entries, by id.
const std::map<std::string, BenchmarkEquation>& builtin_benchmarks();
const BenchmarkEquation& find_benchmark(const std::string& id);
std::vector<std::string> benchmark_suite(const std::string& suite);  // "nguyen" or "feynman"

/// Uniform draws per variable; undefined rows are redrawn. Train and test use
/// seeds derived from `seed`.
SRTask simulate(const BenchmarkEquation& eq, std::uint64_t seed);
Dataset simulate_dataset(const BenchmarkEquation& eq, std::size_t points, Rng& rng);

enum class SearchMethod { edhie, hvar, grammar };
SearchMethod parse_search_method(std::string_view name);
std::string_view to_string(SearchMethod method);

/// One search run on a prepared task.
RunReport run_method(SearchMethod method, const SRTask& task, const HvaeModel* model, const Pcfg* grammar,
                     const SearchConfig& config, std::uint64_t seed);

struct SummaryRow {
  std::string id;
  std::size_t runs = 0;
  std::size_t successes = 0;
  double mean_r2 = 0.0;
  double std_r2 = 0.0;
  std::optional<double> mean_evaluations;  // over successful runs
  std::optional<double> std_evaluations;
};

SummaryRow summarize(const std::string& id, const std::vector<RunReport>& runs);
std::string summary_csv(const std::vector<SummaryRow>& rows);
std::string curve_csv(const RunReport& report);

struct ExperimentConfig {
  SearchMethod method = SearchMethod::edhie;
  std::vector<std::string> ids;
  std::size_t runs = 10;
  std::size_t budget = 100000;
  std::uint64_t seed = 0;
  SearchConfig search;
  std::string out_dir;  // empty: no files
};

/// Runs every (equation, run) pair with per-run seeds derived from
/// (seed, id, run). Writes summary.csv, runs/<id>_<run>.json and
/// curves/<id>_<run>.csv under out_dir.
std::vector<SummaryRow> run_experiment(const ExperimentConfig& config, const HvaeModel* model,
                                       std::vector<RunReport>* all_runs = nullptr);

}  // namespace edhie
