#ifndef AEFOCL_SYNTH_DATA_HPP_
#define AEFOCL_SYNTH_DATA_HPP_

// Synthetic imbalanced feature streams: class-conditional diagonal Gaussians
// over K consecutive tasks, written in the binary feature format.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include <boost/random/discrete_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <nlohmann/json.hpp>

#include "aefocl/error.hpp"
#include "aefocl/features.hpp"
#include "aefocl/random.hpp"

namespace aefocl {

struct SynthSpec {
  std::uint32_t num_classes = 0;
  std::uint32_t d_feat = 0;
  std::uint32_t num_tasks = 1;
  std::vector<double> proportions;
  std::vector<std::vector<double>> means;  // C x d_feat
  std::vector<std::vector<double>> stds;   // C x d_feat
  std::uint64_t samples_per_task = 0;
  std::uint64_t seed = 0;
  // When set, every task holds exactly round(p_c * samples_per_task) samples of
  // class c (largest-remainder rounding) instead of a multinomial draw.
  bool exact_counts = false;

  void validate() const {
    if (num_classes < 2) throw InputError("synthetic spec needs at least 2 classes");
    if (d_feat < 1) throw InputError("synthetic spec needs d_feat >= 1");
    if (num_tasks < 1) throw InputError("synthetic spec needs at least one task");
    if (samples_per_task < 1) throw InputError("synthetic spec needs samples_per_task >= 1");
    if (proportions.size() != num_classes) throw InputError("proportions must have one entry per class");
    double sum = 0.0;
    for (double p : proportions) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw InputError("proportions must be finite and >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InputError("proportions must sum to 1");
    if (means.size() != num_classes || stds.size() != num_classes) throw InputError("means/stds must be C x d_feat");
    for (std::uint32_t c = 0; c < num_classes; ++c) {
      if (means[c].size() != d_feat || stds[c].size() != d_feat) throw InputError("means/stds must be C x d_feat");
      for (std::uint32_t j = 0; j < d_feat; ++j) {
        if (!std::isfinite(means[c][j])) throw InputError("class means must be finite");
        if (!(stds[c][j] > 0.0) || !std::isfinite(stds[c][j])) throw InputError("class stds must be > 0");
      }
    }
  }

  std::uint64_t total_records() const noexcept { return samples_per_task * num_tasks; }
};

// Draws class means ~ N(0, mean_scale^2) and stds ~ U[std_min, std_max]
// elementwise.
inline void fill_class_params(SynthSpec& spec, double mean_scale, double std_min, double std_max,
                              std::uint64_t param_seed) {
  if (!(std_min > 0.0) || !(std_max >= std_min)) throw InputError("need 0 < std_min <= std_max");
  Engine eng(derive_seed(param_seed, {0x5eed}));
  boost::random::uniform_real_distribution<double> uni(std_min, std_max);
  spec.means.assign(spec.num_classes, std::vector<double>(spec.d_feat));
  spec.stds.assign(spec.num_classes, std::vector<double>(spec.d_feat));
  for (std::uint32_t c = 0; c < spec.num_classes; ++c) {
    for (std::uint32_t j = 0; j < spec.d_feat; ++j) spec.means[c][j] = mean_scale * standard_normal(eng);
    for (std::uint32_t j = 0; j < spec.d_feat; ++j) spec.stds[c][j] = std_max > std_min ? uni(eng) : std_min;
  }
}

struct ClassParamShape {
  double mean_scale = 0.3;
  double std_min = 0.5;
  double std_max = 1.5;
  std::uint64_t param_seed = 7;
};

// Six classes with a long-tailed profile: the head class holds 55% of the
// data and the tail class 0.3%; the middle values only shape the tail.
inline constexpr std::array<double, 6> kSodaLikeProportions = {0.55, 0.20, 0.12, 0.08, 0.047, 0.003};

inline SynthSpec soda_like_preset(std::uint32_t d_feat = 64, std::uint64_t samples_per_task = 3500,
                                  std::uint64_t seed = 1, const ClassParamShape& shape = {}) {
  SynthSpec spec;
  spec.num_classes = 6;
  spec.d_feat = d_feat;
  spec.num_tasks = 6;
  spec.proportions.assign(kSodaLikeProportions.begin(), kSodaLikeProportions.end());
  spec.samples_per_task = samples_per_task;
  spec.seed = seed;
  fill_class_params(spec, shape.mean_scale, shape.std_min, shape.std_max, shape.param_seed);
  return spec;
}

// Equal proportions with exact per-task counts, so class counts tie at every
// task boundary.
inline SynthSpec balanced_preset(std::uint32_t num_classes = 6, std::uint32_t d_feat = 64,
                                 std::uint64_t samples_per_task = 600, std::uint64_t seed = 1,
                                 const ClassParamShape& shape = {}) {
  SynthSpec spec;
  spec.num_classes = num_classes;
  spec.d_feat = d_feat;
  spec.num_tasks = 6;
  spec.proportions.assign(num_classes, 1.0 / num_classes);
  spec.samples_per_task = samples_per_task;
  spec.seed = seed;
  spec.exact_counts = true;
  fill_class_params(spec, shape.mean_scale, shape.std_min, shape.std_max, shape.param_seed);
  return spec;
}

namespace detail {

inline std::vector<std::uint64_t> exact_class_counts(const std::vector<double>& p, std::uint64_t n) {
  std::vector<std::uint64_t> counts(p.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::uint64_t assigned = 0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    const double want = p[c] * static_cast<double>(n);
    counts[c] = static_cast<std::uint64_t>(std::floor(want));
    assigned += counts[c];
    rem.emplace_back(want - std::floor(want), c);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[rem[i % rem.size()].second];
  return counts;
}

}  // namespace detail

// Records in task order; each task's labels are drawn (or, with exact_counts,
// shuffled) from its own substream.
inline std::vector<FeatureRecord> generate_records(const SynthSpec& spec) {
  spec.validate();
  std::vector<FeatureRecord> out;
  out.reserve(spec.total_records());
  for (TaskIndex t = 0; t < spec.num_tasks; ++t) {
    Engine eng(derive_seed(spec.seed, {t}));
    std::vector<ClassIndex> labels;
    labels.reserve(spec.samples_per_task);
    if (spec.exact_counts) {
      const auto counts = detail::exact_class_counts(spec.proportions, spec.samples_per_task);
      for (ClassIndex c = 0; c < spec.num_classes; ++c) labels.insert(labels.end(), counts[c], c);
      // Fisher-Yates with the portable engine.
      for (std::size_t i = labels.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(eng() % i);
        std::swap(labels[i - 1], labels[j]);
      }
    } else {
      boost::random::discrete_distribution<ClassIndex, double> pick(spec.proportions.begin(), spec.proportions.end());
      for (std::uint64_t i = 0; i < spec.samples_per_task; ++i) labels.push_back(pick(eng));
    }
    for (ClassIndex label : labels) {
      FeatureRecord rec;
      rec.label = label;
      rec.task_id = t;
      rec.vector.resize(spec.d_feat);
      for (std::uint32_t j = 0; j < spec.d_feat; ++j) {
        rec.vector[j] = static_cast<float>(spec.means[label][j] + spec.stds[label][j] * standard_normal(eng));
      }
      out.push_back(std::move(rec));
    }
  }
  return out;
}

inline void generate_stream(const SynthSpec& spec, const std::filesystem::path& path) {
  const auto records = generate_records(spec);
  write_dataset(path, spec.d_feat, spec.num_classes, records);
}

// ---------------------------------------------------------------------------
// JSON
//
// {
//   "preset": "soda10m-like" | "balanced",        optional base
//   "num_classes": 6, "d_feat": 64, "num_tasks": 6,
//   "proportions": [...], "samples_per_task": 3500, "seed": 1,
//   "exact_counts": false,
//   "means": [[...]], "stds": [[...]],             explicit class params, or
//   "mean_scale": 0.3, "std_min": 0.5, "std_max": 1.5, "param_seed": 7
// }

inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  try {
    ClassParamShape shape;
    shape.mean_scale = j.value("mean_scale", shape.mean_scale);
    shape.std_min = j.value("std_min", shape.std_min);
    shape.std_max = j.value("std_max", shape.std_max);
    shape.param_seed = j.value("param_seed", shape.param_seed);

    SynthSpec spec;
    const std::string preset = j.value("preset", std::string());
    const auto d_feat = j.value<std::uint32_t>("d_feat", 64);
    const auto seed = j.value<std::uint64_t>("seed", 1);
    if (preset == "soda10m-like") {
      spec = soda_like_preset(d_feat, j.value<std::uint64_t>("samples_per_task", 3500), seed, shape);
    } else if (preset == "balanced") {
      spec = balanced_preset(j.value<std::uint32_t>("num_classes", 6), d_feat,
                             j.value<std::uint64_t>("samples_per_task", 600), seed, shape);
    } else if (!preset.empty()) {
      throw ConfigError("unknown synthetic preset '" + preset + "'");
    } else {
      spec.num_classes = j.at("num_classes").get<std::uint32_t>();
      spec.d_feat = d_feat;
      spec.samples_per_task = j.at("samples_per_task").get<std::uint64_t>();
      spec.seed = seed;
      if (j.contains("proportions")) {
        spec.proportions = j.at("proportions").get<std::vector<double>>();
      } else {
        spec.proportions.assign(spec.num_classes, 1.0 / spec.num_classes);
      }
    }
    spec.num_tasks = j.value("num_tasks", spec.num_tasks);
    spec.exact_counts = j.value("exact_counts", spec.exact_counts);
    if (!preset.empty() && j.contains("proportions")) spec.proportions = j.at("proportions").get<std::vector<double>>();
    if (j.contains("means") || j.contains("stds")) {
      spec.means = j.at("means").get<std::vector<std::vector<double>>>();
      spec.stds = j.at("stds").get<std::vector<std::vector<double>>>();
    } else if (preset.empty()) {
      if (spec.num_classes < 2 || spec.d_feat < 1) throw InputError("synthetic spec needs C >= 2 and d_feat >= 1");
      fill_class_params(spec, shape.mean_scale, shape.std_min, shape.std_max, shape.param_seed);
    }
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad synthetic spec: ") + e.what());
  } catch (const InputError& e) {
    throw ConfigError(std::string("bad synthetic spec: ") + e.what());
  }
}

inline nlohmann::json to_json(const SynthSpec& spec) {
  return nlohmann::json{{"num_classes", spec.num_classes}, {"d_feat", spec.d_feat},
                        {"num_tasks", spec.num_tasks},     {"proportions", spec.proportions},
                        {"means", spec.means},             {"stds", spec.stds},
                        {"samples_per_task", spec.samples_per_task},
                        {"seed", spec.seed},               {"exact_counts", spec.exact_counts}};
}

}  // namespace aefocl

#endif  // AEFOCL_SYNTH_DATA_HPP_
