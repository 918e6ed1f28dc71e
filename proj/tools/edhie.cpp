#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "edhie/bench.hpp"
#include "edhie/grammar.hpp"
#include "edhie/latent.hpp"
#include "edhie/random.hpp"
#include "edhie/sr.hpp"
#include "edhie/train.hpp"

using namespace edhie;
namespace fs = std::filesystem;

namespace {

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    save_text_file(path, text);
}

Pcfg load_grammar(const std::string& name_or_path) {
  const auto& builtin = builtin_grammars();
  if (auto it = builtin.find(name_or_path); it != builtin.end()) return it->second;
  return parse_grammar(load_text_file(name_or_path));
}

Vocabulary load_vocab(const std::string& name_or_path) {
  if (fs::exists(name_or_path)) return read_vocabulary(load_text_file(name_or_path));
  return builtin_vocabulary(name_or_path);
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::string vector_line(const Eigen::VectorXd& v) {
  std::ostringstream out;
  out.precision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? " " : "") << v(i);
  return out.str();
}

DecodeMode parse_mode(const std::string& s) {
  if (s == "greedy") return DecodeMode::greedy;
  if (s == "stochastic") return DecodeMode::stochastic;
  throw std::invalid_argument("mode must be greedy or stochastic");
}

struct TrainFlags {
  std::string corpus;
  std::string vocab = "ae";
  TrainConfig cfg;
  std::string anneal_shape = "tanh";
  double lr = 1e-3;
  double clip = 0.0;

  void add(CLI::App* app) {
    app->add_option("--corpus", corpus, "Corpus file (one postfix expression per line)")->required();
    app->add_option("--vocab", vocab, "Builtin vocabulary name or vocabulary file")->capture_default_str();
    app->add_option("--latent-dim", cfg.latent_dim)->capture_default_str();
    app->add_option("--hidden-dim", cfg.hidden_dim)->capture_default_str();
    app->add_option("--epochs", cfg.epochs)->capture_default_str();
    app->add_option("--batch-size", cfg.batch_size)->capture_default_str();
    app->add_option("--anneal-shape", anneal_shape, "tanh or constant")->capture_default_str();
    app->add_option("--anneal-midpoint", cfg.anneal.midpoint)->capture_default_str();
    app->add_option("--anneal-steepness", cfg.anneal.steepness)->capture_default_str();
    app->add_option("--anneal-freeze", cfg.anneal.freeze_after)->capture_default_str();
    app->add_option("--anneal-constant", cfg.anneal.constant, "Lambda for the constant shape")
        ->capture_default_str();
    app->add_option("--lr", lr)->capture_default_str();
    app->add_option("--clip-norm", clip, "Gradient norm clip, 0 disables")->capture_default_str();
    app->add_option("--decode-max-height", cfg.decode_max_height, "0: corpus max height + 1")
        ->capture_default_str();
    app->add_option("--seed", cfg.seed)->capture_default_str();
  }

  TrainConfig config() const {
    TrainConfig c = cfg;
    if (anneal_shape == "constant")
      c.anneal.shape = AnnealShape::constant;
    else if (anneal_shape != "tanh")
      throw std::invalid_argument("anneal shape must be tanh or constant");
    c.adam.learning_rate = lr;
    c.adam.clip_norm = clip;
    return c;
  }
};

struct SearchFlags {
  SearchConfig cfg;
  void add(CLI::App* app) {
    app->add_option("--population", cfg.population)->capture_default_str();
    app->add_option("--tournament", cfg.tournament)->capture_default_str();
    app->add_option("--p-crossover", cfg.p_crossover)->capture_default_str();
    app->add_option("--p-mutation", cfg.p_mutation)->capture_default_str();
    app->add_option("--max-height", cfg.max_height)->capture_default_str();
    app->add_option("--restarts", cfg.fit.restarts, "Constant-fitting restarts")->capture_default_str();
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree variational autoencoder for expressions and latent-space symbolic regression"};
  app.require_subcommand(1);

  // corpus
  auto* corpus_cmd = app.add_subcommand("corpus", "Sample a corpus from a grammar");
  std::string grammar_name = "ae", corpus_vocab, corpus_out;
  std::size_t corpus_n = 2000, corpus_height = 4;
  bool dedup = false;
  std::uint64_t corpus_seed = 0;
  corpus_cmd->add_option("--grammar", grammar_name, "Builtin grammar name or grammar file")->capture_default_str();
  corpus_cmd->add_option("--vocab", corpus_vocab, "Vocabulary (default: builtin of the same name)");
  corpus_cmd->add_option("--n", corpus_n)->capture_default_str();
  corpus_cmd->add_option("--max-height", corpus_height)->capture_default_str();
  corpus_cmd->add_flag("--dedup", dedup);
  corpus_cmd->add_option("--seed", corpus_seed)->capture_default_str();
  corpus_cmd->add_option("--out", corpus_out, "Output file (default stdout)");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model on a corpus");
  TrainFlags train_flags;
  train_flags.add(train_cmd);
  std::string out_model, trace_out, validation_path, checkpoint_path;
  train_cmd->add_option("--out-model", out_model)->required();
  train_cmd->add_option("--trace", trace_out, "Per-batch loss trace CSV");
  train_cmd->add_option("--validation", validation_path, "Held-out corpus for best-epoch selection");
  train_cmd->add_option("--checkpoint", checkpoint_path, "Model file rewritten after every epoch");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Cross-validated reconstruction error");
  TrainFlags eval_flags;
  eval_flags.add(eval_cmd);
  std::size_t folds = 5;
  std::string eval_csv;
  eval_cmd->add_option("--folds", folds)->capture_default_str();
  eval_cmd->add_option("--csv", eval_csv, "Also write the report row as CSV");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Cross-validation over corpus size or latent size");
  TrainFlags sweep_flags;
  sweep_flags.add(sweep_cmd);
  std::string axis, values, sweep_out;
  std::size_t sweep_folds = 5;
  sweep_cmd->add_option("--axis", axis, "corpus_size or latent_dim")->required();
  sweep_cmd->add_option("--values", values, "Comma-separated values")->required();
  sweep_cmd->add_option("--folds", sweep_folds)->capture_default_str();
  sweep_cmd->add_option("--out", sweep_out, "CSV output (default stdout)");

  // encode / decode / sample / interpolate / export-json
  std::string model_path, input_path, output_path, mode = "greedy";
  std::size_t max_height = 7;
  std::uint64_t seed = 0;

  auto* encode_cmd = app.add_subcommand("encode", "Latent means of a corpus, one vector per line");
  encode_cmd->add_option("--model", model_path)->required();
  encode_cmd->add_option("--input", input_path, "Corpus file")->required();
  encode_cmd->add_option("--out", output_path);

  auto* decode_cmd = app.add_subcommand("decode", "Decode latent vectors (one per line) to postfix");
  decode_cmd->add_option("--model", model_path)->required();
  decode_cmd->add_option("--input", input_path, "File of whitespace-separated vectors")->required();
  decode_cmd->add_option("--out", output_path);
  decode_cmd->add_option("--max-height", max_height)->capture_default_str();
  decode_cmd->add_option("--mode", mode)->capture_default_str();
  decode_cmd->add_option("--seed", seed)->capture_default_str();

  auto* sample_cmd = app.add_subcommand("sample", "Decode prior or neighborhood samples");
  std::size_t sample_n = 10;
  std::string around;
  sample_cmd->add_option("--model", model_path)->required();
  sample_cmd->add_option("--n", sample_n)->capture_default_str();
  sample_cmd->add_option("--around", around, "Postfix expression whose neighborhood to sample");
  sample_cmd->add_option("--max-height", max_height)->capture_default_str();
  sample_cmd->add_option("--mode", mode)->capture_default_str();
  sample_cmd->add_option("--seed", seed)->capture_default_str();
  sample_cmd->add_option("--out", output_path);

  auto* interp_cmd = app.add_subcommand("interpolate", "Linear interpolation between two expressions");
  std::string from, to;
  std::size_t steps = 4;
  interp_cmd->add_option("--model", model_path)->required();
  interp_cmd->add_option("--from", from, "Postfix expression")->required();
  interp_cmd->add_option("--to", to, "Postfix expression")->required();
  interp_cmd->add_option("--steps", steps)->capture_default_str();
  interp_cmd->add_option("--max-height", max_height)->capture_default_str();

  auto* export_cmd = app.add_subcommand("export-json", "Write a model as JSON");
  export_cmd->add_option("--model", model_path)->required();
  export_cmd->add_option("--out", output_path);

  auto* import_cmd = app.add_subcommand("import-json", "Convert a JSON model back to the binary format");
  import_cmd->add_option("--input", input_path)->required();
  import_cmd->add_option("--out-model", output_path)->required();

  // sr
  auto* sr_cmd = app.add_subcommand("sr", "Symbolic regression on one task");
  std::string method = "edhie", task_name, test_csv, sr_grammar, sr_out;
  std::size_t budget = 100000, runs = 1;
  SearchFlags sr_flags;
  sr_flags.add(sr_cmd);
  sr_cmd->add_option("--method", method, "edhie, hvar or grammar")->capture_default_str();
  sr_cmd->add_option("--task", task_name, "Benchmark id or CSV file (last column is the target)")->required();
  sr_cmd->add_option("--test", test_csv, "Test CSV for a CSV task (default: the training CSV)");
  sr_cmd->add_option("--model", model_path);
  sr_cmd->add_option("--grammar", sr_grammar, "Grammar for --method grammar");
  sr_cmd->add_option("--budget", budget)->capture_default_str();
  sr_cmd->add_option("--runs", runs)->capture_default_str();
  sr_cmd->add_option("--seed", seed)->capture_default_str();
  sr_cmd->add_option("--out", sr_out, "Directory for runs/*.json, curves/*.csv and summary.csv");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Benchmark suite experiment");
  std::string suite = "nguyen", ids, bench_out;
  std::size_t bench_runs = 10, bench_budget = 100000;
  SearchFlags bench_flags;
  bench_flags.add(bench_cmd);
  bench_cmd->add_option("--suite", suite, "nguyen or feynman")->capture_default_str();
  bench_cmd->add_option("--ids", ids, "Comma-separated subset of benchmark ids");
  bench_cmd->add_option("--method", method)->capture_default_str();
  bench_cmd->add_option("--model", model_path);
  bench_cmd->add_option("--runs", bench_runs)->capture_default_str();
  bench_cmd->add_option("--budget", bench_budget)->capture_default_str();
  bench_cmd->add_option("--seed", seed)->capture_default_str();
  bench_cmd->add_option("--out", bench_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*corpus_cmd) {
      const Pcfg g = load_grammar(grammar_name);
      std::optional<Vocabulary> vocab;
      if (!corpus_vocab.empty())
        vocab = load_vocab(corpus_vocab);
      else if (builtin_grammars().count(grammar_name))
        vocab = builtin_vocabulary(grammar_name);
      Rng rng(corpus_seed);
      const auto trees = generate_corpus(g, corpus_n, corpus_height, dedup, rng, vocab ? &*vocab : nullptr);
      emit(corpus_out, write_corpus(trees));
    } else if (*train_cmd) {
      const Vocabulary vocab = load_vocab(train_flags.vocab);
      const auto corpus = load_corpus_file(train_flags.corpus, vocab);
      std::vector<ExprTree> validation;
      if (!validation_path.empty()) validation = load_corpus_file(validation_path, vocab);
      TrainHooks hooks;
      hooks.validation = validation;
      hooks.on_epoch = [&](const EpochSummary& s, const HvaeModel& m) {
        std::cerr << "epoch " << s.epoch + 1 << " loss " << s.mean_total << " reconstruction "
                  << s.mean_reconstruction;
        if (!validation.empty()) std::cerr << " validation " << s.validation_loss;
        std::cerr << "\n";
        if (!checkpoint_path.empty()) save_model(m, checkpoint_path);
      };
      TrainResult result;
      try {
        const HvaeModel model = train_new_model(vocab, corpus, train_flags.config(), &result, hooks);
        save_model(model, out_model);
      } catch (const TrainingDiverged& e) {
        if (!trace_out.empty()) save_text_file(trace_out, trace_to_csv(e.trace));
        throw;
      }
      if (!trace_out.empty()) save_text_file(trace_out, trace_to_csv(result.trace));
    } else if (*eval_cmd) {
      const Vocabulary vocab = load_vocab(eval_flags.vocab);
      const auto corpus = load_corpus_file(eval_flags.corpus, vocab);
      const EvalReport report = cross_validate(vocab, corpus, eval_flags.config(), folds);
      std::cout << report_to_text(report);
      if (!eval_csv.empty()) save_text_file(eval_csv, report_csv_header() + "\n" + report_csv_row(report) + "\n");
    } else if (*sweep_cmd) {
      const Vocabulary vocab = load_vocab(sweep_flags.vocab);
      const auto corpus = load_corpus_file(sweep_flags.corpus, vocab);
      const auto vals = parse_values(values);
      const SweepAxis ax = parse_sweep_axis(axis);
      const auto rows = sweep(vocab, corpus, sweep_flags.config(), ax, vals, sweep_folds);
      for (const auto& row : rows) std::cerr << "value " << row.value << "\n" << report_to_text(row.report);
      emit(sweep_out, sweep_to_csv(ax, rows));
    } else if (*encode_cmd) {
      const HvaeModel model = load_model(model_path);
      std::string out;
      for (const auto& t : load_corpus_file(input_path, model.vocab()))
        out += vector_line(encode_tree(model, t).mu) + "\n";
      emit(output_path, out);
    } else if (*decode_cmd) {
      const HvaeModel model = load_model(model_path);
      const DecodeMode m = parse_mode(mode);
      Rng rng(seed);
      std::istringstream in(load_text_file(input_path));
      std::string line, out;
      while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::vector<double> v;
        for (double d; ls >> d;) v.push_back(d);
        if (v.empty()) continue;
        if (static_cast<int>(v.size()) != model.latent_dim())
          throw std::invalid_argument("vector of size " + std::to_string(v.size()) + ", model latent size is " +
                                      std::to_string(model.latent_dim()));
        const Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
        out += to_postfix_string(decode_tree(model, z, max_height, m, &rng)) + "\n";
      }
      emit(output_path, out);
    } else if (*sample_cmd) {
      const HvaeModel model = load_model(model_path);
      Rng rng(seed);
      const auto trees = around.empty()
                             ? sample_prior(model, sample_n, max_height, rng, parse_mode(mode))
                             : neighborhood_sample(model, parse_postfix(around, model.vocab()), sample_n, max_height,
                                                   rng, parse_mode(mode));
      emit(output_path, write_corpus(trees));
    } else if (*interp_cmd) {
      const HvaeModel model = load_model(model_path);
      const auto ladder = interpolate(model, parse_postfix(from, model.vocab()), parse_postfix(to, model.vocab()),
                                      steps, max_height);
      std::ostringstream out;
      out.precision(4);
      out << "alpha\texpression\n";
      for (const auto& s : ladder) out << s.alpha << "\t" << to_infix_string(s.tree) << "\n";
      std::cout << out.str();
    } else if (*export_cmd) {
      emit(output_path, model_to_json(load_model(model_path)) + "\n");
    } else if (*import_cmd) {
      save_model(model_from_json(load_text_file(input_path)), output_path);
    } else if (*sr_cmd) {
      const SearchMethod m = parse_search_method(method);
      SRTask task;
      const auto& table = builtin_benchmarks();
      std::optional<Pcfg> grammar;
      if (auto it = table.find(task_name); it != table.end()) {
        task = simulate(it->second, derive_seed(seed, task_name, 0));
        if (m == SearchMethod::grammar)
          grammar = load_grammar(sr_grammar.empty() ? it->second.vocabulary : sr_grammar);
      } else {
        task.name = fs::path(task_name).stem().string();
        task.train = read_dataset_csv(load_text_file(task_name), &task.variables);
        std::vector<std::string> test_vars = task.variables;
        task.test = test_csv.empty() ? task.train : read_dataset_csv(load_text_file(test_csv), &test_vars);
        if (test_vars != task.variables) throw std::invalid_argument("test CSV header differs from training CSV");
        if (m == SearchMethod::grammar) {
          if (sr_grammar.empty()) throw std::invalid_argument("--grammar is required for a CSV task");
          grammar = load_grammar(sr_grammar);
        }
      }
      task.budget = budget;
      std::optional<HvaeModel> model;
      if (m != SearchMethod::grammar) {
        if (model_path.empty()) throw std::invalid_argument("--model is required for " + method);
        model = load_model(model_path);
      }
      if (!sr_out.empty()) {
        fs::create_directories(fs::path(sr_out) / "runs");
        fs::create_directories(fs::path(sr_out) / "curves");
      }
      std::vector<RunReport> reports;
      for (std::size_t k = 0; k < runs; ++k) {
        RunReport r = run_method(m, task, model ? &*model : nullptr, grammar ? &*grammar : nullptr, sr_flags.cfg,
                                 derive_seed(seed, task.name + "/run", k));
        const std::string stem = task.name + "_" + std::to_string(k);
        if (sr_out.empty()) {
          std::cout << run_report_to_json(r) << "\n";
        } else {
          save_text_file((fs::path(sr_out) / "runs" / (stem + ".json")).string(), run_report_to_json(r) + "\n");
          save_text_file((fs::path(sr_out) / "curves" / (stem + ".csv")).string(), curve_csv(r));
        }
        std::cerr << stem << ": " << (r.success ? "solved" : "not solved") << " after " << r.unique_evaluated
                  << " expressions, best " << r.best_infix << "\n";
        reports.push_back(std::move(r));
      }
      const std::string summary = summary_csv({summarize(task.name, reports)});
      if (sr_out.empty())
        std::cout << summary;
      else
        save_text_file((fs::path(sr_out) / "summary.csv").string(), summary);
    } else if (*bench_cmd) {
      ExperimentConfig cfg;
      cfg.method = parse_search_method(method);
      if (ids.empty()) {
        cfg.ids = benchmark_suite(suite);
      } else {
        std::stringstream ss(ids);
        for (std::string id; std::getline(ss, id, ',');) cfg.ids.push_back(id);
      }
      cfg.runs = bench_runs;
      cfg.budget = bench_budget;
      cfg.seed = seed;
      cfg.search = bench_flags.cfg;
      cfg.out_dir = bench_out;
      std::optional<HvaeModel> model;
      if (cfg.method != SearchMethod::grammar) {
        if (model_path.empty()) throw std::invalid_argument("--model is required for " + method);
        model = load_model(model_path);
      }
      std::cout << summary_csv(run_experiment(cfg, model ? &*model : nullptr));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
