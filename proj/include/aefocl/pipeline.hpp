#ifndef AEFOCL_PIPELINE_HPP_
#define AEFOCL_PIPELINE_HPP_

// Per-batch online training procedure.
//
// Each call to train_batch() is one phase k:
//   1. project the batch through the frozen buffer and one-hot the labels
//   2. fold every raw feature into the per-class moments
//   3. iterative <- update(iterative, X_k, Y_k)
//   4. sample pseudo-features that top every class up to the largest count
//   5. REBASE: balanced <- update(iterative, pseudo)
//      CARRY:  balanced <- update(update(balanced, X_k, Y_k), pseudo)
//   6. k <- k + 1
//
// Inference always uses the balanced classifier. The state holds only W, R,
// class moments and configuration; no feature rows survive a call.
//
// Checkpoint layout (little-endian):
//   char[4] "AEFP" | u32 version (=1) | u32 strategy | u64 phase | u8 balanced_current
//   | u32 d_feat | u32 d_buf | u64 buffer_seed | f64 buffer_scale | u8 inline_weights
//   | [f64 weights[d_feat*d_buf] row-major, only if inline_weights]
//   | f64 alpha | u64 pfg_seed | u8 has_cap | u64 cap
//   | u32 C | u64 last_pseudo_counts[C]
//   | stats block (see class_stats.hpp) | iterative classifier | balanced classifier

#include <algorithm>
#include <cstdint>
#include <istream>
#include <memory>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "aefocl/analytic_classifier.hpp"
#include "aefocl/binary_io.hpp"
#include "aefocl/class_stats.hpp"
#include "aefocl/error.hpp"
#include "aefocl/features.hpp"
#include "aefocl/pfg.hpp"

namespace aefocl {

inline constexpr char kPipelineMagic[5] = "AEFP";
inline constexpr std::uint32_t kPipelineVersion = 1;

// How the balanced classifier is obtained each phase.
enum class Strategy : std::uint32_t {
  kRebase = 0,  // re-derive from the iterative classifier (real data only)
  kCarry = 1,   // keep updating the previous balanced classifier
};

inline std::string_view to_string(Strategy s) { return s == Strategy::kRebase ? "rebase" : "carry"; }

inline Strategy parse_strategy(std::string_view s) {
  if (s == "rebase") return Strategy::kRebase;
  if (s == "carry") return Strategy::kCarry;
  throw ConfigError("unknown strategy '" + std::string(s) + "' (expected rebase or carry)");
}

struct PipelineConfig {
  double gamma = 1.0;
  std::uint32_t d_buf = ProjectionBuffer::kDefaultWidth;
  std::uint64_t buffer_seed = 0;
  double buffer_scale = 0.0;  // 0 selects 1/sqrt(d_feat)
  PfgConfig pfg;
  Strategy strategy = Strategy::kRebase;
};

class PipelineState {
 public:
  static PipelineState init(std::uint32_t d_feat, std::uint32_t num_classes, const PipelineConfig& cfg) {
    if (num_classes < 2) throw InputError("need at least two classes");
    cfg.pfg.validate();
    auto buf = std::make_shared<const ProjectionBuffer>(d_feat, cfg.d_buf, cfg.buffer_seed, cfg.buffer_scale);
    return PipelineState(std::move(buf), num_classes, cfg.gamma, cfg.pfg, cfg.strategy);
  }

  // For hand-built buffers.
  static PipelineState init(std::shared_ptr<const ProjectionBuffer> buf, std::uint32_t num_classes, double gamma,
                            const PfgConfig& pfg, Strategy strategy) {
    if (num_classes < 2) throw InputError("need at least two classes");
    if (!buf) throw InputError("projection buffer is null");
    pfg.validate();
    return PipelineState(std::move(buf), num_classes, gamma, pfg, strategy);
  }

  const ClassifierState& iterative() const noexcept { return iterative_; }
  const ClassifierState& balanced() const noexcept { return balanced_; }
  const ClassStats& stats() const noexcept { return stats_; }
  const ProjectionBuffer& buffer() const noexcept { return *buf_; }
  std::shared_ptr<const ProjectionBuffer> shared_buffer() const noexcept { return buf_; }
  const PfgConfig& pfg() const noexcept { return pfg_; }
  Strategy strategy() const noexcept { return strategy_; }
  std::uint64_t phase() const noexcept { return phase_; }
  std::uint32_t num_classes() const noexcept { return stats_.num_classes(); }
  std::uint32_t d_feat() const noexcept { return buf_->d_feat(); }
  // False when the last REBASE phase skipped deriving the balanced classifier.
  bool balanced_current() const noexcept { return balanced_current_; }
  // Pseudo-samples generated per class in the most recent phase.
  const std::vector<std::uint64_t>& last_pseudo_counts() const noexcept { return last_pseudo_counts_; }
  std::uint64_t last_pseudo_total() const noexcept {
    return std::accumulate(last_pseudo_counts_.begin(), last_pseudo_counts_.end(), std::uint64_t{0});
  }

  bool operator==(const PipelineState& o) const {
    return iterative_ == o.iterative_ && balanced_ == o.balanced_ && stats_ == o.stats_ &&
           buf_->weights() == o.buf_->weights() && pfg_.alpha == o.pfg_.alpha && pfg_.seed == o.pfg_.seed &&
           pfg_.cap == o.pfg_.cap && strategy_ == o.strategy_ && phase_ == o.phase_ &&
           balanced_current_ == o.balanced_current_ && last_pseudo_counts_ == o.last_pseudo_counts_;
  }

 private:
  PipelineState(std::shared_ptr<const ProjectionBuffer> buf, std::uint32_t num_classes, double gamma,
                const PfgConfig& pfg, Strategy strategy)
      : buf_(std::move(buf)),
        iterative_(ClassifierState::fresh(buf_->d_buf(), num_classes, gamma)),
        balanced_(iterative_),
        stats_(num_classes, buf_->d_feat()),
        pfg_(pfg),
        strategy_(strategy),
        last_pseudo_counts_(num_classes, 0) {}

  friend PipelineState train_batch(const PipelineState&, std::span<const FeatureRecord>, bool);
  friend void write_pipeline(std::ostream&, const PipelineState&);
  friend PipelineState read_pipeline(std::istream&);

  std::shared_ptr<const ProjectionBuffer> buf_;
  ClassifierState iterative_;
  ClassifierState balanced_;
  ClassStats stats_;
  PfgConfig pfg_;
  Strategy strategy_;
  std::uint64_t phase_ = 0;
  bool balanced_current_ = true;
  std::vector<std::uint64_t> last_pseudo_counts_;
};

// Projected inputs and one-hot targets for a batch of records.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> batch_matrices(std::span<const FeatureRecord> batch,
                                                                  const ProjectionBuffer& buf,
                                                                  std::uint32_t num_classes) {
  std::vector<ClassIndex> labels;
  labels.reserve(batch.size());
  for (const auto& rec : batch) labels.push_back(rec.label);
  return {project_rows(stack_features(batch, buf.d_feat()), buf), one_hot_rows(labels, num_classes)};
}

// Runs one phase and returns the successor state; `state` is never modified,
// so a throw leaves the caller's state intact.
//
// With derive_balanced == false under REBASE, steps 4-5 are skipped and the
// returned state reports balanced_current() == false. Pseudo substreams are
// keyed by phase, so skipping some phases does not change the balanced
// classifier of the phases that do derive it. CARRY always derives.
inline PipelineState train_batch(const PipelineState& state, std::span<const FeatureRecord> batch,
                                 bool derive_balanced = true) {
  const std::uint32_t num_classes = state.num_classes();
  for (const auto& rec : batch) check_record(rec, state.d_feat(), num_classes);

  PipelineState next = state;
  const auto [x, y] = batch_matrices(batch, *state.buf_, num_classes);

  for (const auto& rec : batch) next.stats_.observe(rec);
  next.iterative_ = update(state.iterative_, x, y);

  const bool carry = state.strategy_ == Strategy::kCarry;
  std::fill(next.last_pseudo_counts_.begin(), next.last_pseudo_counts_.end(), 0);
  if (carry || derive_balanced) {
    ClassifierState balanced = carry ? update(state.balanced_, x, y) : next.iterative_;
    const ClassStats snap = next.stats_.snapshot();
    for_each_pseudo_block(snap, *state.buf_, state.pfg_, state.phase_, state.buf_->d_buf(),
                          [&](const PseudoBlock& b) {
                            balanced = update(balanced, b.x, b.y);
                            next.last_pseudo_counts_[b.label] += static_cast<std::uint64_t>(b.x.rows());
                          });
    next.balanced_ = std::move(balanced);
    next.balanced_current_ = true;
  } else {
    next.balanced_current_ = false;
  }
  ++next.phase_;
  return next;
}

inline std::vector<ClassIndex> predict_records(const ClassifierState& clf, const ProjectionBuffer& buf,
                                               std::span<const FeatureRecord> records) {
  if (records.empty()) return {};
  return predict(clf, project_rows(stack_features(records, buf.d_feat()), buf));
}

// Predictions from the balanced classifier.
inline std::vector<ClassIndex> infer(const PipelineState& state, std::span<const FeatureRecord> records) {
  if (state.phase() == 0) throw UsageError("infer called before any train_batch");
  if (!state.balanced_current()) throw UsageError("balanced classifier was not derived for the latest phase");
  for (const auto& rec : records) {
    if (rec.vector.size() != state.d_feat()) throw InputError("feature length mismatch in inference batch");
  }
  return predict_records(state.balanced(), state.buffer(), records);
}

// ---------------------------------------------------------------------------
// Checkpoint

inline void write_pipeline(std::ostream& os, const PipelineState& s) {
  io::write_tag(os, kPipelineMagic);
  io::write_le<std::uint32_t>(os, kPipelineVersion);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.strategy_));
  io::write_le<std::uint64_t>(os, s.phase_);
  io::write_le<std::uint8_t>(os, s.balanced_current_ ? 1 : 0);
  const ProjectionBuffer& buf = *s.buf_;
  io::write_le<std::uint32_t>(os, buf.d_feat());
  io::write_le<std::uint32_t>(os, buf.d_buf());
  io::write_le<std::uint64_t>(os, buf.seed());
  io::write_le<double>(os, buf.scale());
  const bool inline_weights = buf.scale() == 0.0;
  io::write_le<std::uint8_t>(os, inline_weights ? 1 : 0);
  if (inline_weights) {
    for (Eigen::Index i = 0; i < buf.weights().rows(); ++i)
      for (Eigen::Index j = 0; j < buf.weights().cols(); ++j) io::write_le<double>(os, buf.weights()(i, j));
  }
  io::write_le<double>(os, s.pfg_.alpha);
  io::write_le<std::uint64_t>(os, s.pfg_.seed);
  io::write_le<std::uint8_t>(os, s.pfg_.cap ? 1 : 0);
  io::write_le<std::uint64_t>(os, s.pfg_.cap.value_or(0));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.last_pseudo_counts_.size()));
  for (auto n : s.last_pseudo_counts_) io::write_le<std::uint64_t>(os, n);
  write_stats(os, s.stats_);
  write_classifier(os, s.iterative_);
  write_classifier(os, s.balanced_);
}

inline PipelineState read_pipeline(std::istream& is) {
  io::LeReader in(is);
  const auto tag = in.read_tag("pipeline magic");
  if (std::string(tag.data(), 4) != std::string(kPipelineMagic, 4)) throw FormatError("bad pipeline magic, expected AEFP", 0);
  const auto version = in.read<std::uint32_t>("pipeline version");
  if (version != kPipelineVersion) throw FormatError("unsupported pipeline version " + std::to_string(version), 4);
  const auto strategy_raw = in.read<std::uint32_t>("strategy");
  if (strategy_raw > 1) throw FormatError("bad strategy tag", 8);
  const auto phase = in.read<std::uint64_t>("phase");
  const auto balanced_current = in.read<std::uint8_t>("balanced flag");
  const auto d_feat = in.read<std::uint32_t>("buffer d_feat");
  const auto d_buf = in.read<std::uint32_t>("buffer d_buf");
  const auto buf_seed = in.read<std::uint64_t>("buffer seed");
  const auto buf_scale = in.read<double>("buffer scale");
  const auto inline_weights = in.read<std::uint8_t>("buffer weight flag");
  if (d_feat == 0 || d_buf == 0) throw FormatError("buffer dimensions must be positive", in.offset());
  std::shared_ptr<const ProjectionBuffer> buf;
  if (inline_weights) {
    Eigen::MatrixXd w(d_feat, d_buf);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = in.read<double>("buffer weights");
    buf = std::make_shared<const ProjectionBuffer>(std::move(w));
  } else {
    buf = std::make_shared<const ProjectionBuffer>(d_feat, d_buf, buf_seed, buf_scale);
  }
  PfgConfig pfg;
  pfg.alpha = in.read<double>("alpha");
  pfg.seed = in.read<std::uint64_t>("pfg seed");
  const auto has_cap = in.read<std::uint8_t>("cap flag");
  const auto cap = in.read<std::uint64_t>("cap");
  if (has_cap) pfg.cap = cap;
  const auto c = in.read<std::uint32_t>("num classes");
  std::vector<std::uint64_t> pseudo(c);
  for (auto& n : pseudo) n = in.read<std::uint64_t>("pseudo counts");
  ClassStats stats = read_stats(in);
  ClassifierState iterative = read_classifier(in);
  ClassifierState balanced = read_classifier(in);
  if (stats.num_classes() != c || stats.d_feat() != d_feat || iterative.dim() != d_buf || balanced.dim() != d_buf ||
      iterative.num_classes() != c || balanced.num_classes() != c) {
    throw FormatError("pipeline checkpoint sections disagree on dimensions", in.offset());
  }
  PipelineState s = PipelineState::init(std::move(buf), c, iterative.gamma(), pfg, static_cast<Strategy>(strategy_raw));
  s.phase_ = phase;
  s.balanced_current_ = balanced_current != 0;
  s.last_pseudo_counts_ = std::move(pseudo);
  s.stats_ = std::move(stats);
  s.iterative_ = std::move(iterative);
  s.balanced_ = std::move(balanced);
  return s;
}

}  // namespace aefocl

#endif  // AEFOCL_PIPELINE_HPP_
