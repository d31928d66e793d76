#ifndef AEFOCL_RUNNER_HPP_
#define AEFOCL_RUNNER_HPP_

// Experiment driver: streams a feature file through the pipeline, validates
// at task or batch boundaries and writes reports.
//
// Batching: records are read in file order and grouped into batches that
// never straddle a task boundary. batch_size == 0 makes each task a single
// batch (one phase per task).
//
// Validation: at each validation point the balanced and the iterative
// classifiers are scored on the validation records whose task_id equals the
// current task (val_scope "task"), or on the whole validation file
// (val_scope "all").
//
// Outputs in out_dir:
//   report.csv            balanced classifier, run_id,task,class,n_val,accuracy
//   report_iterative.csv  same schema, iterative classifier
//   summary.json          config echo, per-point means, AMCA, pseudo counts
//   checkpoint.aefp       final pipeline state (only with write_checkpoint)

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aefocl/error.hpp"
#include "aefocl/eval.hpp"
#include "aefocl/features.hpp"
#include "aefocl/pipeline.hpp"

namespace aefocl {

enum class ValCadence { kTask, kBatch };
enum class ValScope { kTask, kAll };

inline std::string_view to_string(ValCadence c) { return c == ValCadence::kTask ? "task" : "batch"; }
inline std::string_view to_string(ValScope s) { return s == ValScope::kTask ? "task" : "all"; }

inline ValCadence parse_cadence(std::string_view s) {
  if (s == "task") return ValCadence::kTask;
  if (s == "batch") return ValCadence::kBatch;
  throw ConfigError("unknown validation cadence '" + std::string(s) + "' (expected task or batch)");
}

inline ValScope parse_scope(std::string_view s) {
  if (s == "task") return ValScope::kTask;
  if (s == "all") return ValScope::kAll;
  throw ConfigError("unknown validation scope '" + std::string(s) + "' (expected task or all)");
}

struct RunConfig {
  std::string dataset;
  std::string val_dataset;
  double gamma = 1.0;
  std::uint32_t buffer_size = ProjectionBuffer::kDefaultWidth;
  std::uint64_t buffer_seed = 0;
  double buffer_scale = 0.0;
  double alpha = 1.0;
  std::uint64_t pfg_seed = 0;
  std::optional<std::uint64_t> cap;
  Strategy strategy = Strategy::kRebase;
  ValCadence val_cadence = ValCadence::kTask;
  ValScope val_scope = ValScope::kTask;
  std::uint64_t batch_size = 0;
  std::string out_dir;
  bool write_checkpoint = false;

  void validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("--gamma must be > 0");
    if (buffer_size < 1) throw ConfigError("--buffer-size must be >= 1");
    if (!(buffer_scale >= 0.0) || !std::isfinite(buffer_scale)) throw ConfigError("--buffer-scale must be >= 0");
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("--alpha must be >= 0");
    if (dataset.empty()) throw ConfigError("no training dataset given");
    if (val_dataset.empty()) throw ConfigError("no validation dataset given");
    if (!std::filesystem::exists(dataset)) throw ConfigError("dataset '" + dataset + "' does not exist");
    if (!std::filesystem::exists(val_dataset)) throw ConfigError("validation dataset '" + val_dataset + "' does not exist");
  }

  PipelineConfig pipeline_config() const {
    PipelineConfig p;
    p.gamma = gamma;
    p.d_buf = buffer_size;
    p.buffer_seed = buffer_seed;
    p.buffer_scale = buffer_scale;
    p.pfg.alpha = alpha;
    p.pfg.seed = pfg_seed;
    p.pfg.cap = cap;
    p.strategy = strategy;
    return p;
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j{{"dataset", c.dataset},
                   {"val_dataset", c.val_dataset},
                   {"gamma", c.gamma},
                   {"buffer_size", c.buffer_size},
                   {"buffer_seed", c.buffer_seed},
                   {"buffer_scale", c.buffer_scale},
                   {"alpha", c.alpha},
                   {"pfg_seed", c.pfg_seed},
                   {"cap", nullptr},
                   {"strategy", std::string(to_string(c.strategy))},
                   {"val_cadence", std::string(to_string(c.val_cadence))},
                   {"val_scope", std::string(to_string(c.val_scope))},
                   {"batch_size", c.batch_size},
                   {"out_dir", c.out_dir},
                   {"write_checkpoint", c.write_checkpoint}};
  if (c.cap) j["cap"] = *c.cap;
  return j;
}

// Overlays the keys present in `j` onto `base`.
inline RunConfig merge_run_config(RunConfig base, const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "dataset") base.dataset = value.get<std::string>();
      else if (key == "val_dataset") base.val_dataset = value.get<std::string>();
      else if (key == "gamma") base.gamma = value.get<double>();
      else if (key == "buffer_size") base.buffer_size = value.get<std::uint32_t>();
      else if (key == "buffer_seed") base.buffer_seed = value.get<std::uint64_t>();
      else if (key == "buffer_scale") base.buffer_scale = value.get<double>();
      else if (key == "alpha") base.alpha = value.get<double>();
      else if (key == "pfg_seed") base.pfg_seed = value.get<std::uint64_t>();
      else if (key == "cap") base.cap = value.is_null() ? std::nullopt : std::optional(value.get<std::uint64_t>());
      else if (key == "strategy") base.strategy = parse_strategy(value.get<std::string>());
      else if (key == "val_cadence") base.val_cadence = parse_cadence(value.get<std::string>());
      else if (key == "val_scope") base.val_scope = parse_scope(value.get<std::string>());
      else if (key == "batch_size") base.batch_size = value.get<std::uint64_t>();
      else if (key == "out_dir") base.out_dir = value.get<std::string>();
      else if (key == "write_checkpoint") base.write_checkpoint = value.get<bool>();
      else throw ConfigError("unknown run config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad run config: ") + e.what());
  }
  return base;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path.string() + "'");
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse '" + path.string() + "': " + e.what());
  }
}

// Config echo without output-location settings; what identifies a run.
inline nlohmann::json run_identity(const RunConfig& c) {
  nlohmann::json j = to_json(c);
  j.erase("out_dir");
  j.erase("write_checkpoint");
  return j;
}

// Stable 64-bit FNV-1a of run_identity().
inline std::string run_id_for(const RunConfig& c) {
  const std::string s = run_identity(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

struct RunResult {
  std::string run_id;
  std::vector<PhaseReport> balanced;
  std::vector<PhaseReport> iterative;
  std::uint64_t phases = 0;
  std::uint64_t pseudo_total = 0;          // pseudo rows generated over the run
  std::vector<std::uint64_t> real_counts;  // per class
  std::optional<PipelineState> final_state;

  double amca_balanced() const { return balanced.empty() ? 0.0 : balanced.back().running_amca; }
  double amca_iterative() const { return iterative.empty() ? 0.0 : iterative.back().running_amca; }
};

// Runs the stream in memory; writes nothing.
inline RunResult run_experiment(const RunConfig& cfg, const Dataset& val) {
  // Binary files are streamed; CSV fixtures are small and loaded whole.
  std::optional<DatasetReader> reader;
  Dataset csv;
  std::size_t csv_pos = 0;
  DatasetHeader h;
  if (std::filesystem::path(cfg.dataset).extension() == ".csv") {
    csv = read_csv_dataset(cfg.dataset, val.header.num_classes);
    h = csv.header;
  } else {
    reader.emplace(cfg.dataset);
    h = reader->header();
  }
  auto next_record = [&]() -> std::optional<FeatureRecord> {
    if (reader) return reader->next();
    if (csv_pos < csv.records.size()) return csv.records[csv_pos++];
    return std::nullopt;
  };
  if (val.header.d_feat != h.d_feat || val.header.num_classes != h.num_classes) {
    throw InputError("validation dataset dimensions differ from training dataset");
  }
  PipelineState state = PipelineState::init(h.d_feat, h.num_classes, cfg.pipeline_config());

  RunResult result;
  result.run_id = run_id_for(cfg);

  auto validate_at = [&](TaskIndex task_id) {
    std::vector<FeatureRecord> subset;
    std::vector<ClassIndex> truths;
    for (const auto& rec : val.records) {
      if (cfg.val_scope == ValScope::kAll || rec.task_id == task_id) {
        subset.push_back(rec);
        truths.push_back(rec.label);
      }
    }
    if (subset.empty()) return;
    PhaseReport b;
    b.task_id = task_id;
    b.phase = state.phase();
    b.score = score_task(infer(state, subset), truths, h.num_classes);
    PhaseReport it = b;
    it.score = score_task(predict_records(state.iterative(), state.buffer(), subset), truths, h.num_classes);
    append_report(result.balanced, std::move(b));
    append_report(result.iterative, std::move(it));
  };

  std::vector<FeatureRecord> batch;
  std::optional<FeatureRecord> pending = next_record();
  while (pending) {
    const TaskIndex task = pending->task_id;
    batch.clear();
    while (pending && pending->task_id == task && (cfg.batch_size == 0 || batch.size() < cfg.batch_size)) {
      batch.push_back(std::move(*pending));
      pending = next_record();
    }
    if (pending && pending->task_id < task) throw InputError("task ids in the training stream must be nondecreasing");
    const bool task_ends = !pending || pending->task_id != task;
    const bool validate = cfg.val_cadence == ValCadence::kBatch || task_ends;
    state = train_batch(state, batch, validate);
    result.pseudo_total += state.last_pseudo_total();
    if (validate) validate_at(task);
  }
  if (result.balanced.empty()) throw UsageError("no validation point produced any scores");
  result.phases = state.phase();
  result.real_counts = state.stats().counts();
  result.final_state = std::move(state);
  return result;
}

inline nlohmann::json summary_json(const RunConfig& cfg, const RunResult& r) {
  nlohmann::json points = nlohmann::json::array();
  for (std::size_t i = 0; i < r.balanced.size(); ++i) {
    const auto& b = r.balanced[i];
    points.push_back({{"task", b.task},
                      {"task_id", b.task_id},
                      {"phase", b.phase},
                      {"mean_class_accuracy", b.score.mean_class_accuracy},
                      {"mean_class_accuracy_iterative", r.iterative[i].score.mean_class_accuracy},
                      {"excluded_classes", b.score.excluded_classes()},
                      {"confusion", b.score.confusion}});
  }
  const auto recall_b = mean_class_recall(r.balanced, static_cast<std::uint32_t>(r.real_counts.size()));
  const auto recall_i = mean_class_recall(r.iterative, static_cast<std::uint32_t>(r.real_counts.size()));
  auto opt_array = [](const std::vector<std::optional<double>>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& x : v) a.push_back(x ? nlohmann::json(*x) : nlohmann::json(nullptr));
    return a;
  };
  return nlohmann::json{{"run_id", r.run_id},
                        {"config", run_identity(cfg)},
                        {"phases", r.phases},
                        {"points", points},
                        {"amca", r.amca_balanced()},
                        {"amca_iterative", r.amca_iterative()},
                        {"class_recall", opt_array(recall_b)},
                        {"class_recall_iterative", opt_array(recall_i)},
                        {"pseudo_count", r.pseudo_total},
                        {"cap_active", cfg.cap.has_value()},
                        {"real_class_counts", r.real_counts}};
}

inline void write_run_outputs(const RunConfig& cfg, const RunResult& r) {
  const std::filesystem::path out(cfg.out_dir);
  std::filesystem::create_directories(out);
  {
    std::ofstream os(out / "report.csv");
    write_report_csv(os, r.run_id, r.balanced);
  }
  {
    std::ofstream os(out / "report_iterative.csv");
    write_report_csv(os, r.run_id, r.iterative);
  }
  {
    std::ofstream os(out / "summary.json");
    os << summary_json(cfg, r).dump(2) << '\n';
  }
  if (cfg.write_checkpoint && r.final_state) {
    std::ofstream os(out / "checkpoint.aefp", std::ios::binary);
    write_pipeline(os, *r.final_state);
  }
}

inline RunResult run_and_report(const RunConfig& cfg) {
  cfg.validate();
  const Dataset val = load_dataset(cfg.val_dataset);
  RunResult r = run_experiment(cfg, val);
  if (!cfg.out_dir.empty()) write_run_outputs(cfg, r);
  return r;
}

// ---------------------------------------------------------------------------
// Sweeps over the cartesian product of alpha x gamma x strategy.

struct SweepRow {
  double alpha = 0.0;
  double gamma = 0.0;
  Strategy strategy = Strategy::kRebase;
  std::string run_id;
  double amca = 0.0;
  double amca_iterative = 0.0;
  std::uint64_t pseudo_count = 0;
};

inline std::vector<SweepRow> run_sweep(const RunConfig& base, std::span<const double> alphas,
                                       std::span<const double> gammas, std::span<const Strategy> strategies) {
  if (alphas.empty() || gammas.empty() || strategies.empty()) throw ConfigError("sweep needs at least one value per axis");
  base.validate();
  const Dataset val = load_dataset(base.val_dataset);
  std::vector<SweepRow> rows;
  for (double gamma : gammas) {
    for (Strategy strategy : strategies) {
      for (double alpha : alphas) {
        RunConfig cfg = base;
        cfg.alpha = alpha;
        cfg.gamma = gamma;
        cfg.strategy = strategy;
        cfg.validate();
        const std::string run_id = run_id_for(cfg);
        if (!base.out_dir.empty()) cfg.out_dir = (std::filesystem::path(base.out_dir) / ("run_" + run_id)).string();
        const RunResult r = run_experiment(cfg, val);
        if (!cfg.out_dir.empty()) write_run_outputs(cfg, r);
        rows.push_back({alpha, gamma, strategy, r.run_id, r.amca_balanced(), r.amca_iterative(), r.pseudo_total});
      }
    }
  }
  return rows;
}

// CSV: alpha,gamma,strategy,run_id,amca,amca_iterative,pseudo_count
inline void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows) {
  os << "alpha,gamma,strategy,run_id,amca,amca_iterative,pseudo_count\n";
  os.precision(17);
  for (const auto& r : rows) {
    os << r.alpha << ',' << r.gamma << ',' << to_string(r.strategy) << ',' << r.run_id << ',' << r.amca << ','
       << r.amca_iterative << ',' << r.pseudo_count << '\n';
  }
}

}  // namespace aefocl

#endif  // AEFOCL_RUNNER_HPP_
