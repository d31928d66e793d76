// aefocl command-line driver.
//
//   aefocl gen           synthetic imbalanced feature streams
//   aefocl run           one training run with reports
//   aefocl sweep         alpha / gamma / strategy grid
//   aefocl diagnose      per-element histograms for one class
//   aefocl extract-info  header and label/task counts of a feature file
//
// Exit codes: 0 ok, 1 config error, 2 data error, 3 numerical error.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aefocl/aefocl.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct RunFlags {
  std::string config;
  std::string dataset;
  std::string val;
  double gamma = 1.0;
  std::uint32_t buffer_size = aefocl::ProjectionBuffer::kDefaultWidth;
  std::uint64_t buffer_seed = 0;
  double buffer_scale = 0.0;
  double alpha = 1.0;
  std::uint64_t pfg_seed = 0;
  std::uint64_t cap = 0;
  std::string strategy = "rebase";
  std::string val_cadence = "task";
  std::string val_scope = "task";
  std::uint64_t batch_size = 0;
  std::string out;
  bool checkpoint = false;
};

struct RunOptions {
  CLI::Option* dataset;
  CLI::Option* val;
  CLI::Option* gamma;
  CLI::Option* buffer_size;
  CLI::Option* buffer_seed;
  CLI::Option* buffer_scale;
  CLI::Option* alpha;
  CLI::Option* pfg_seed;
  CLI::Option* cap;
  CLI::Option* strategy;
  CLI::Option* val_cadence;
  CLI::Option* val_scope;
  CLI::Option* batch_size;
  CLI::Option* out;
  CLI::Option* checkpoint;
};

// Options shared by run and sweep. In sweep, --gamma/--alpha/--strategy are
// registered separately as lists.
RunOptions add_run_options(CLI::App* app, RunFlags& f, bool sweep) {
  RunOptions o{};
  app->add_option("--config", f.config, "JSON run config; flags override its values");
  o.dataset = app->add_option("--dataset", f.dataset, "training feature file (.aeff or .csv)");
  o.val = app->add_option("--val", f.val, "validation feature file");
  if (!sweep) {
    o.gamma = app->add_option("--gamma", f.gamma, "ridge regularization (> 0)");
    o.alpha = app->add_option("--alpha", f.alpha, "pseudo-feature noise coefficient (>= 0)");
    o.strategy = app->add_option("--strategy", f.strategy, "rebase | carry");
  }
  o.buffer_size = app->add_option("--buffer-size", f.buffer_size, "projection width d_buf");
  o.buffer_seed = app->add_option("--buffer-seed", f.buffer_seed, "projection weight seed");
  o.buffer_scale = app->add_option("--buffer-scale", f.buffer_scale, "projection weight std (0: 1/sqrt(d_feat))");
  o.pfg_seed = app->add_option("--pfg-seed", f.pfg_seed, "pseudo-feature seed");
  o.cap = app->add_option("--cap", f.cap, "max pseudo-samples per class per phase");
  o.val_cadence = app->add_option("--val-cadence", f.val_cadence, "task | batch");
  o.val_scope = app->add_option("--val-scope", f.val_scope, "task | all");
  o.batch_size = app->add_option("--batch-size", f.batch_size, "records per phase, 0 = one phase per task");
  o.out = app->add_option("--out", f.out, "output directory");
  o.checkpoint = app->add_flag("--checkpoint", f.checkpoint, "write the final pipeline checkpoint");
  return o;
}

aefocl::RunConfig build_run_config(const RunFlags& f, const RunOptions& o) {
  aefocl::RunConfig cfg;
  if (!f.config.empty()) cfg = aefocl::merge_run_config(cfg, aefocl::read_json_file(f.config));
  auto given = [](CLI::Option* opt) { return opt != nullptr && opt->count() > 0; };
  if (given(o.dataset)) cfg.dataset = f.dataset;
  if (given(o.val)) cfg.val_dataset = f.val;
  if (given(o.gamma)) cfg.gamma = f.gamma;
  if (given(o.buffer_size)) cfg.buffer_size = f.buffer_size;
  if (given(o.buffer_seed)) cfg.buffer_seed = f.buffer_seed;
  if (given(o.buffer_scale)) cfg.buffer_scale = f.buffer_scale;
  if (given(o.alpha)) cfg.alpha = f.alpha;
  if (given(o.pfg_seed)) cfg.pfg_seed = f.pfg_seed;
  if (given(o.cap)) cfg.cap = f.cap;
  if (given(o.strategy)) cfg.strategy = aefocl::parse_strategy(f.strategy);
  if (given(o.val_cadence)) cfg.val_cadence = aefocl::parse_cadence(f.val_cadence);
  if (given(o.val_scope)) cfg.val_scope = aefocl::parse_scope(f.val_scope);
  if (given(o.batch_size)) cfg.batch_size = f.batch_size;
  if (given(o.out)) cfg.out_dir = f.out;
  if (given(o.checkpoint)) cfg.write_checkpoint = f.checkpoint;
  cfg.validate();
  return cfg;
}

int cmd_gen(const std::string& preset, const std::string& config, std::optional<std::uint64_t> samples_per_task,
            std::optional<std::uint32_t> d_feat, std::optional<std::uint64_t> seed, const std::string& out,
            const std::string& val_out, std::uint64_t val_samples_per_task, const std::string& spec_out) {
  nlohmann::json j = config.empty() ? nlohmann::json::object() : aefocl::read_json_file(config);
  if (!preset.empty()) j["preset"] = preset;
  if (!j.contains("preset") && config.empty()) throw aefocl::ConfigError("gen needs --preset or --config");
  if (samples_per_task) j["samples_per_task"] = *samples_per_task;
  if (d_feat) j["d_feat"] = *d_feat;
  if (seed) j["seed"] = *seed;
  const aefocl::SynthSpec spec = aefocl::synth_spec_from_json(j);
  aefocl::generate_stream(spec, out);
  std::cout << "wrote " << spec.total_records() << " records to " << out << '\n';
  if (!val_out.empty()) {
    aefocl::SynthSpec val = spec;
    val.seed = aefocl::derive_seed(spec.seed, {0x7a1});
    if (val_samples_per_task > 0) val.samples_per_task = val_samples_per_task;
    aefocl::generate_stream(val, val_out);
    std::cout << "wrote " << val.total_records() << " records to " << val_out << '\n';
  }
  if (!spec_out.empty()) {
    std::ofstream os(spec_out);
    os << aefocl::to_json(spec).dump(2) << '\n';
  }
  return kExitOk;
}

int cmd_run(const aefocl::RunConfig& cfg) {
  const aefocl::RunResult r = aefocl::run_and_report(cfg);
  std::cout << "run " << r.run_id << ": " << r.phases << " phases, AMCA " << r.amca_balanced() << " (iterative "
            << r.amca_iterative() << "), pseudo_count " << r.pseudo_total << '\n';
  return kExitOk;
}

int cmd_sweep(const aefocl::RunConfig& cfg, const std::vector<double>& alphas, const std::vector<double>& gammas,
              const std::vector<std::string>& strategy_names) {
  std::vector<aefocl::Strategy> strategies;
  for (const auto& s : strategy_names) strategies.push_back(aefocl::parse_strategy(s));
  const auto rows = aefocl::run_sweep(cfg, alphas, gammas, strategies);
  aefocl::write_sweep_csv(std::cout, rows);
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream os(std::filesystem::path(cfg.out_dir) / "sweep.csv");
    aefocl::write_sweep_csv(os, rows);
  }
  return kExitOk;
}

int cmd_diagnose(const std::string& dataset, aefocl::ClassIndex cls, const std::vector<std::uint32_t>& elements,
                 std::uint32_t bins, const std::string& out, const std::string& stats_out) {
  const aefocl::Dataset ds = aefocl::load_dataset(dataset);
  const auto hists =
      aefocl::class_histograms(ds.records, ds.header.d_feat, ds.header.num_classes, cls, elements, bins);
  if (out.empty()) {
    aefocl::write_histogram_csv(std::cout, cls, hists);
  } else {
    std::ofstream os(out);
    aefocl::write_histogram_csv(os, cls, hists);
  }
  if (!stats_out.empty()) {
    aefocl::ClassStats stats(ds.header.num_classes, ds.header.d_feat);
    for (const auto& rec : ds.records) stats.observe(rec);
    std::ofstream os(stats_out);
    aefocl::write_stats_csv(os, stats);
  }
  return kExitOk;
}

int cmd_info(const std::string& dataset) {
  std::cout << aefocl::dataset_info(aefocl::load_dataset(dataset)).dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exemplar-free online continual learning with analytic ridge classifiers"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic feature stream");
  std::string gen_preset, gen_config, gen_out, gen_val_out, gen_spec_out;
  std::uint64_t gen_spt = 0, gen_seed = 0, gen_val_spt = 0;
  std::uint32_t gen_d_feat = 0;
  gen->add_option("--preset", gen_preset, "soda10m-like | balanced");
  gen->add_option("--config", gen_config, "JSON synthetic spec");
  auto* gen_spt_opt = gen->add_option("--samples-per-task", gen_spt);
  auto* gen_d_opt = gen->add_option("--d-feat", gen_d_feat);
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed);
  gen->add_option("-o,--out", gen_out, "output feature file")->required();
  gen->add_option("--val-out", gen_val_out, "also write a validation split here");
  gen->add_option("--val-samples-per-task", gen_val_spt, "validation samples per task (default: same as training)");
  gen->add_option("--spec-out", gen_spec_out, "write the effective spec (with class means/stds) as JSON");

  // run
  auto* run = app.add_subcommand("run", "train over a stream and write reports");
  RunFlags run_flags;
  const RunOptions run_opts = add_run_options(run, run_flags, false);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a grid of configurations");
  RunFlags sweep_flags;
  RunOptions sweep_opts = add_run_options(sweep, sweep_flags, true);
  std::vector<double> sweep_alphas{1.0}, sweep_gammas{1.0};
  std::vector<std::string> sweep_strategies{"rebase"};
  sweep->add_option("--alpha", sweep_alphas, "comma-separated alphas")->delimiter(',');
  sweep->add_option("--gamma", sweep_gammas, "comma-separated gammas")->delimiter(',');
  sweep->add_option("--strategy", sweep_strategies, "comma-separated strategies")->delimiter(',');

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "histogram feature elements of one class");
  std::string diag_dataset, diag_out, diag_stats_out;
  aefocl::ClassIndex diag_class = 0;
  std::vector<std::uint32_t> diag_elements{0, 1, 2, 3, 4, 5};
  std::uint32_t diag_bins = 30;
  diag->add_option("--dataset", diag_dataset)->required();
  diag->add_option("--class", diag_class)->required();
  diag->add_option("--elements", diag_elements, "comma-separated feature indices")->delimiter(',');
  diag->add_option("--bins", diag_bins);
  diag->add_option("-o,--out", diag_out, "histogram CSV (default stdout)");
  diag->add_option("--stats-out", diag_stats_out, "per-class moment CSV for all classes");

  // extract-info
  auto* info = app.add_subcommand("extract-info", "print header and counts of a feature file");
  std::string info_dataset;
  info->add_option("dataset", info_dataset)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) {
      auto opt = [](CLI::Option* o, auto v) { return o->count() ? std::optional(v) : std::nullopt; };
      return cmd_gen(gen_preset, gen_config, opt(gen_spt_opt, gen_spt), opt(gen_d_opt, gen_d_feat),
                     opt(gen_seed_opt, gen_seed), gen_out, gen_val_out, gen_val_spt, gen_spec_out);
    }
    if (*run) return cmd_run(build_run_config(run_flags, run_opts));
    if (*sweep) {
      const auto cfg = build_run_config(sweep_flags, sweep_opts);
      return cmd_sweep(cfg, sweep_alphas, sweep_gammas, sweep_strategies);
    }
    if (*diag) return cmd_diagnose(diag_dataset, diag_class, diag_elements, diag_bins, diag_out, diag_stats_out);
    if (*info) return cmd_info(info_dataset);
  } catch (const aefocl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const aefocl::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const aefocl::Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
