// End-to-end acceptance checks; one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "edhie/bench.hpp"
#include "edhie/grammar.hpp"
#include "edhie/latent.hpp"
#include "edhie/sr.hpp"
#include "edhie/train.hpp"
#include "support.hpp"

#ifndef EDHIE_CLI
#define EDHIE_CLI "edhie"
#endif

using namespace edhie;
namespace fs = std::filesystem;

namespace {

int failures = 0;
const auto start = std::chrono::steady_clock::now();

double elapsed() { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); }

std::map<int, std::string> results;

// Results are printed in criterion order at the end; progress goes to stderr.
void report(int id, bool ok, const std::string& detail) {
  if (!ok) ++failures;
  std::ostringstream line;
  line << "criterion " << id << ": " << (ok ? "PASS" : "FAIL") << "  " << detail;
  results[id] = line.str();
  std::cerr << line.str() << "  [" << std::fixed << std::setprecision(1) << elapsed() << "s]" << std::endl;
}

std::string num(double v, int precision = 4) {
  std::ostringstream out;
  out << std::setprecision(precision) << v;
  return out.str();
}

// Shared desk-scale training protocol: 2000 deduplicated trees of height <= 4,
// latent 32, 40 epochs, KL weight frozen on its plateau after 600 batches.
constexpr std::size_t kCorpusSize = 2000;
constexpr std::size_t kCorpusHeight = 4;

TrainConfig desk_config() {
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.latent_dim = 32;
  cfg.hidden_dim = 64;
  cfg.batch_size = 32;
  cfg.anneal.freeze_after = 600;
  cfg.seed = 11;
  return cfg;
}

std::vector<ExprTree> desk_corpus(const std::string& grammar) {
  const Vocabulary vocab = builtin_vocabulary(grammar);
  Rng rng(derive_seed(7, "corpus"));
  return generate_corpus(builtin_grammars().at(grammar), kCorpusSize, kCorpusHeight, true, rng, &vocab);
}

bool structurally_valid(const ExprTree& t, const Vocabulary& vocab, std::size_t max_height) {
  if (t.height() > max_height) return false;
  try {
    return parse_postfix(to_postfix_string(t), vocab) == t;
  } catch (const std::exception&) {
    return false;
  }
}

// ---- 1

void decoder_validity(const HvaeModel& trained) {
  const std::size_t n = 100000, height = 7;
  HvaeModel fresh(trained.vocab(), trained.hidden_dim(), trained.latent_dim());
  Rng init(123);
  fresh.initialize(init);
  std::size_t invalid_trained = 0, invalid_fresh = 0;
  Rng rng(derive_seed(1, "prior"));
  for (const auto& t : sample_prior(trained, n, height, rng)) invalid_trained += !structurally_valid(t, trained.vocab(), height);
  for (const auto& t : sample_prior(fresh, n, height, rng)) invalid_fresh += !structurally_valid(t, fresh.vocab(), height);
  report(1, invalid_trained == 0 && invalid_fresh == 0,
         "invalid among 100000 prior decodes: trained " + std::to_string(invalid_trained) + ", untrained " +
             std::to_string(invalid_fresh));
}

// ---- 2

void reconstruction(const std::vector<ExprTree>& corpus) {
  const EvalReport r = cross_validate(builtin_vocabulary("ae"), corpus, desk_config(), 5);
  report(2, r.mean_edit_distance <= 0.5,
         "5-fold edit distance " + num(r.mean_edit_distance) + " +- " + num(r.std_edit_distance) +
             " (bound 0.5), invalid rate " + num(r.invalid_rate));
}

// ---- 3

void gradients() {
  HvaeModel m(builtin_vocabulary("ae"), 16, 8);
  Rng rng(3);
  m.initialize(rng);
  const ExprTree tree = parse_postfix("x c * x /", m.vocab());
  const Vector eps = standard_normal(8, rng);
  const double lambda = 0.8;
  nn::Tape tape;
  m.zero_grad();
  tape.backward(taped_loss(m, tree, lambda, eps, tape).total);
  std::vector<Matrix> analytic;
  for (const auto* p : m.parameters()) analytic.push_back(p->grad);
  const double err =
      oracle::max_gradient_error(m.parameters(), analytic, [&] { return loss_value(m, tree, lambda, eps).total; });
  report(3, tree.height() == 3 && err < 1e-4,
         "max relative gradient error " + num(err, 3) + " over " + std::to_string(m.parameter_count()) +
             " parameters (bound 1e-4)");
}

// ---- 4

void kl() {
  const bool zero = kl_divergence(Vector::Zero(32), Vector::Zero(32)) == 0.0;
  const double unit = kl_divergence(Vector::Unit(32, 0), Vector::Zero(32));
  Rng rng(4);
  std::size_t negative = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vector mu = standard_normal(8, rng) * 3.0, lv = standard_normal(8, rng) * 3.0;
    negative += kl_divergence(mu, lv) < 0.0;
  }
  report(4, zero && std::abs(unit - 0.5) <= 1e-12 && negative == 0,
         std::string("KL(0,0)=0 ") + (zero ? "exact" : "inexact") + ", KL(e1,0)-0.5=" + num(unit - 0.5, 3) +
             ", negative values " + std::to_string(negative) + "/10000");
}

// ---- 5

void edit_distance_oracle() {
  Rng rng(5);
  const std::vector<std::string> alphabet{"x", "y", "c", "+", "-", "*", "/", "sin", "^2"};
  std::uniform_int_distribution<std::size_t> len(0, 15), sym(0, alphabet.size() - 1);
  auto seq = [&] {
    std::vector<std::string> s(len(rng));
    for (auto& t : s) t = alphabet[sym(rng)];
    return s;
  };
  std::size_t mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = seq(), b = seq();
    mismatches += edit_distance(a, b) != oracle::edit_distance(a, b);
  }
  report(5, mismatches == 0, "mismatches against the reference on 1000 pairs: " + std::to_string(mismatches));
}

// ---- 6

void pcfg_fidelity() {
  const Pcfg& g = builtin_grammars().at("ae");
  Rng rng(6);
  RuleCounts counts;
  std::size_t derivations = 0;
  while (derivations < 10000)
    if (sample_derivation(g, rng, 2000, &counts)) ++derivations;
  double worst = 0.0;
  bool ok = true;
  for (const auto& nt : g.nonterminals()) {
    const auto it = counts.counts.find(nt);
    if (it == counts.counts.end()) continue;
    double n = 0.0;
    for (auto k : it->second) n += static_cast<double>(k);
    const auto& rules = g.rules(nt);
    for (std::size_t k = 0; k < rules.size(); ++k) {
      const double p = rules[k].probability;
      const double sigma = std::sqrt(n * p * (1.0 - p));
      const double z = sigma > 0.0 ? std::abs(static_cast<double>(it->second[k]) - n * p) / sigma : 0.0;
      worst = std::max(worst, z);
      ok = ok && z <= 3.0;
    }
  }
  report(6, ok, "largest rule-frequency deviation " + num(worst, 3) + " sigma over 10000 samples (bound 3)");
}

// ---- 7

void operators() {
  Rng rng(7);
  const Vector a = standard_normal(32, rng), b = standard_normal(32, rng);
  const bool endpoints = crossover(a, b, 0.0) == a && crossover(a, b, 1.0) == b;
  Vector mu(4), lv(4);
  mu << 1.5, -2.0, 0.0, 0.7;
  lv << 0.0, std::log(0.1), std::log(3.0), -1.0;
  const double mix = 0.4;
  const std::size_t n = 100000;
  Vector sum = Vector::Zero(4);
  for (std::size_t i = 0; i < n; ++i) sum += mutate_around(mu, lv, mix, rng);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < 4; ++k) {
    const double s = mix * std::exp(0.5 * lv(k)) + (1.0 - mix);
    worst = std::max(worst, std::abs(sum(k) / n - mix * mu(k)) / (s / std::sqrt(static_cast<double>(n))));
  }
  report(7, endpoints && worst <= 4.0,
         std::string("crossover endpoints ") + (endpoints ? "exact" : "wrong") + ", mutation mean deviation " +
             num(worst, 3) + " sigma/sqrt(n) (bound 4)");
}

// ---- 8, 9

struct SrOutcome {
  std::size_t successes = 0;
  std::string detail;
};

SrOutcome reconstruct(const HvaeModel& model, const std::string& id, std::size_t budget) {
  const BenchmarkEquation& eq = find_benchmark(id);
  SRTask task = simulate(eq, 5);
  task.budget = budget;
  SearchConfig cfg;
  cfg.max_height = kCorpusHeight + 1;
  SrOutcome out;
  out.detail = id + " evaluations";
  for (std::uint64_t r = 0; r < 3; ++r) {
    const RunReport rep = evolve(model, task, cfg, derive_seed(99, id, r));
    bool ok = false;
    if (rep.success) {
      // Independent re-check on train and held-out points.
      const CompiledExpr program(parse_postfix(rep.best_postfix), task.variables);
      const double train = rmse(program.evaluate(task.train.x, rep.best_constants), task.train.y);
      const double test = rmse(program.evaluate(task.test.x, rep.best_constants), task.test.y);
      ok = train < 1e-10 && test < 1e-8;
    }
    out.successes += ok;
    out.detail += " " + (ok ? std::to_string(*rep.evaluations_to_success) : std::string("fail"));
  }
  return out;
}

HvaeModel desk_model(const std::string& grammar) {
  return train_new_model(builtin_vocabulary(grammar), desk_corpus(grammar), desk_config());
}

void easy_equations() {
  const HvaeModel model = desk_model("nguyen");
  const SrOutcome a = reconstruct(model, "NG-1", 20000);
  const SrOutcome b = reconstruct(model, "NG-8", 20000);
  report(8, a.successes >= 2 && b.successes >= 2,
         a.detail + "; " + b.detail + " (need 2 of 3 each within 20000)");
}

void feynman_smoke() {
  const HvaeModel model = desk_model(find_benchmark("FM-3.1").vocabulary);
  const SrOutcome a = reconstruct(model, "FM-3.1", 2000);
  report(9, a.successes >= 2, a.detail + " (need 2 of 3 within 2000)");
}

// ---- 10

void interpolation(const HvaeModel& model, const std::vector<ExprTree>& corpus) {
  const std::size_t height = kCorpusHeight + 1;
  Rng rng(10);
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
  std::size_t endpoint_errors = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const ExprTree& a = corpus[i];
    const ExprTree& b = corpus[pick(rng)];
    const auto ladder = interpolate(model, a, b, 4, height);
    endpoint_errors += ladder.front().tree != decode_tree(model, encode_tree(model, a).mu, height);
    endpoint_errors += ladder.back().tree != decode_tree(model, encode_tree(model, b).mu, height);
  }
  double roughness = 0.0;
  for (int i = 0; i < 20; ++i) roughness += ladder_roughness(interpolate(model, corpus[pick(rng)], corpus[pick(rng)], 4, height)) / 20.0;
  double baseline = 0.0;
  const int pairs = 1000;
  for (int i = 0; i < pairs; ++i)
    baseline += static_cast<double>(edit_distance(corpus[pick(rng)], corpus[pick(rng)])) / pairs;
  report(10, endpoint_errors == 0 && roughness <= baseline,
         "endpoint mismatches " + std::to_string(endpoint_errors) + "/200, mean step distance " + num(roughness) +
             " vs random pair distance " + num(baseline));
}

// ---- 11

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

bool run_cli_script(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream csv(dir / "data.csv");
    csv << "x,target\n";
    for (int i = 1; i <= 30; ++i) csv << 0.1 * i << "," << 2.0 * 0.1 * i + 1.0 << "\n";
  }
  const std::string cli = std::string("\"") + EDHIE_CLI + "\"";
  const std::vector<std::string> commands{
      "corpus --grammar ae --n 200 --max-height 4 --dedup --seed 3 --out corpus.txt",
      "train --corpus corpus.txt --vocab ae --epochs 2 --hidden-dim 16 --latent-dim 8 --seed 4 --out-model m.hvae "
      "--trace trace.csv > train.out",
      "evaluate --corpus corpus.txt --vocab ae --epochs 1 --hidden-dim 8 --latent-dim 4 --folds 3 --seed 2 "
      "--csv eval.csv > eval.out",
      "sweep --corpus corpus.txt --vocab ae --epochs 1 --hidden-dim 8 --axis latent_dim --values 2,4 --folds 2 "
      "--seed 2 --out sweep.csv",
      "encode --model m.hvae --input corpus.txt --out z.txt",
      "decode --model m.hvae --input z.txt --mode stochastic --seed 5 --out decoded.txt",
      "sample --model m.hvae --n 50 --seed 6 --out prior.txt",
      "sample --model m.hvae --n 20 --around \"x c +\" --mode stochastic --seed 6 --out around.txt",
      "interpolate --model m.hvae --from \"x c +\" --to \"x x * c /\" --steps 4 > interp.out",
      "export-json --model m.hvae --out m.json",
      "import-json --input m.json --out-model m2.hvae",
      "sr --method edhie --task data.csv --model m.hvae --budget 100 --seed 8 > sr_edhie.out",
      "sr --method hvar --task data.csv --model m.hvae --budget 100 --seed 8 --out sr_hvar",
      "sr --method grammar --task NG-1 --budget 100 --runs 2 --seed 8 --out sr_grammar > sr_grammar.out",
      "bench --suite nguyen --ids NG-1,NG-2 --method grammar --runs 2 --budget 50 --seed 9 --out bench > bench.out",
  };
  for (const auto& c : commands) {
    const std::string line = "cd \"" + dir.string() + "\" && " + cli + " " + c + " 2>> stderr.log";
    if (std::system(line.c_str()) != 0) {
      std::cerr << "command failed: " << c << "\n";
      return false;
    }
  }
  return true;
}

void determinism() {
  const fs::path root = fs::temp_directory_path() / "edhie_acceptance_cli";
  const fs::path a = root / "a", b = root / "b";
  if (!run_cli_script(a) || !run_cli_script(b)) {
    report(11, false, "a CLI command failed; see stderr");
    return;
  }
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file() || entry.path().filename() == "stderr.log") continue;
    const fs::path rel = fs::relative(entry.path(), a);
    ++files;
    if (!fs::exists(b / rel) || read_file(entry.path()) != read_file(b / rel)) {
      ++differing;
      std::cerr << "differs: " << rel << "\n";
    }
  }
  fs::remove_all(root);
  report(11, files > 0 && differing == 0,
         std::to_string(differing) + " of " + std::to_string(files) + " output files differ across two invocations");
}

}  // namespace

int main() {
  try {
    kl();
    edit_distance_oracle();
    pcfg_fidelity();
    operators();
    gradients();
    determinism();

    const std::vector<ExprTree> corpus = desk_corpus("ae");
    const HvaeModel ae = desk_model("ae");
    decoder_validity(ae);
    interpolation(ae, corpus);
    reconstruction(corpus);
    easy_equations();
    feynman_smoke();
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 2;
  }
  for (const auto& [id, line] : results) std::cout << line << "\n";
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
