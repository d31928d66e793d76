#ifndef AEFOCL_PFG_HPP_
#define AEFOCL_PFG_HPP_

// Pseudo-feature generator. Tops every class up to the largest class count by
// sampling raw features from a diagonal normal N(mu_c, (alpha * sigma_c)^2),
// then projecting them through the buffer. Classes with fewer than two real
// samples have no sigma estimate and are skipped.
//
// Class c draws from its own mt19937_64 substream seeded with
// derive_seed(seed, {phase, c}), so output is independent of block size and of
// which other classes are generated.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "aefocl/class_stats.hpp"
#include "aefocl/error.hpp"
#include "aefocl/features.hpp"
#include "aefocl/random.hpp"

namespace aefocl {

struct PfgConfig {
  double alpha = 1.0;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> cap;  // max pseudo-samples per class per phase

  void validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InputError("alpha must be finite and >= 0");
  }
};

struct PseudoBatch {
  Eigen::MatrixXd raw;  // sampled backbone-space features, m x d_feat
  Eigen::MatrixXd x;    // projected, m x d_buf
  Eigen::MatrixXd y;    // one-hot, m x C
  std::vector<ClassIndex> labels;
  std::vector<std::uint64_t> counts;  // per class

  Eigen::Index rows() const noexcept { return x.rows(); }
  bool empty() const noexcept { return x.rows() == 0; }
};

// Number of pseudo-samples each class receives: min(n_max - n_c, cap) for
// classes with n_c >= 2, zero otherwise.
inline std::vector<std::uint64_t> plan_pseudo_counts(const ClassStats& stats, const PfgConfig& cfg) {
  const std::uint64_t n_max = stats.max_count();
  std::vector<std::uint64_t> plan(stats.num_classes(), 0);
  for (ClassIndex c = 0; c < stats.num_classes(); ++c) {
    const auto n = stats[c].count;
    if (n < 2) continue;
    plan[c] = std::min(n_max - n, cfg.cap.value_or(std::numeric_limits<std::uint64_t>::max()));
  }
  return plan;
}

// Block of pseudo rows for one class, handed to the consumer of
// for_each_pseudo_block().
struct PseudoBlock {
  ClassIndex label;
  const Eigen::MatrixXd& raw;
  const Eigen::MatrixXd& x;
  const Eigen::MatrixXd& y;
};

// Generates pseudo-features class by class (ascending class index) in blocks
// of at most `block_rows`, calling `sink` for each block. Lets callers absorb
// large pseudo batches without materializing them.
inline void for_each_pseudo_block(const ClassStats& stats, const ProjectionBuffer& buf, const PfgConfig& cfg,
                                  std::uint64_t phase, Eigen::Index block_rows,
                                  const std::function<void(const PseudoBlock&)>& sink) {
  cfg.validate();
  if (stats.d_feat() != buf.d_feat()) throw InputError("class stats and projection buffer disagree on d_feat");
  if (block_rows < 1) throw InputError("block_rows must be positive");
  const auto plan = plan_pseudo_counts(stats, cfg);
  const std::uint32_t d_feat = stats.d_feat();
  for (ClassIndex c = 0; c < stats.num_classes(); ++c) {
    if (plan[c] == 0) continue;
    const auto& m = stats[c];
    const Eigen::VectorXd spread = cfg.alpha * m.stddev;
    Engine eng(derive_seed(cfg.seed, {phase, c}));
    const Eigen::RowVectorXd label_row = one_hot(c, stats.num_classes());
    std::uint64_t remaining = plan[c];
    while (remaining > 0) {
      const auto rows = static_cast<Eigen::Index>(std::min<std::uint64_t>(remaining, block_rows));
      Eigen::MatrixXd raw(rows, d_feat);
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (std::uint32_t j = 0; j < d_feat; ++j) raw(i, j) = m.mean(j) + spread(j) * standard_normal(eng);
      }
      const Eigen::MatrixXd x = project_rows(raw, buf);
      const Eigen::MatrixXd y = label_row.replicate(rows, 1);
      sink(PseudoBlock{c, raw, x, y});
      remaining -= static_cast<std::uint64_t>(rows);
    }
  }
}

inline PseudoBatch generate(const ClassStats& stats, const ProjectionBuffer& buf, const PfgConfig& cfg,
                            std::uint64_t phase = 0) {
  const auto plan = plan_pseudo_counts(stats, cfg);
  std::uint64_t total = 0;
  for (auto n : plan) total += n;
  PseudoBatch out;
  out.counts = plan;
  out.raw.resize(static_cast<Eigen::Index>(total), stats.d_feat());
  out.x.resize(static_cast<Eigen::Index>(total), buf.d_buf());
  out.y.resize(static_cast<Eigen::Index>(total), stats.num_classes());
  out.labels.reserve(total);
  Eigen::Index row = 0;
  for_each_pseudo_block(stats, buf, cfg, phase, std::numeric_limits<Eigen::Index>::max(), [&](const PseudoBlock& b) {
    out.raw.middleRows(row, b.raw.rows()) = b.raw;
    out.x.middleRows(row, b.x.rows()) = b.x;
    out.y.middleRows(row, b.y.rows()) = b.y;
    out.labels.insert(out.labels.end(), static_cast<std::size_t>(b.raw.rows()), b.label);
    row += b.raw.rows();
  });
  return out;
}

}  // namespace aefocl

#endif  // AEFOCL_PFG_HPP_
