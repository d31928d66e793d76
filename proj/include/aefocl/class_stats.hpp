#ifndef AEFOCL_CLASS_STATS_HPP_
#define AEFOCL_CLASS_STATS_HPP_

// Per-class streaming moments of raw backbone features.
//
// For each class the running mean mu and mean square nu are updated as
//   mu <- f/n + (n-1)/n * mu,   nu <- f^2/n + (n-1)/n * nu
// and the unbiased standard deviation follows as sqrt(n/(n-1) * (nu - mu^2)),
// defined once n >= 2.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aefocl/binary_io.hpp"
#include "aefocl/error.hpp"
#include "aefocl/features.hpp"

namespace aefocl {

struct ClassMoments {
  std::uint64_t count = 0;
  Eigen::VectorXd mean;
  Eigen::VectorXd mean_square;
  Eigen::VectorXd stddev;  // meaningful only when count >= 2

  bool has_stddev() const noexcept { return count >= 2; }

  bool operator==(const ClassMoments& o) const {
    return count == o.count && mean == o.mean && mean_square == o.mean_square && stddev == o.stddev;
  }
};

class ClassStats {
 public:
  ClassStats(std::uint32_t num_classes, std::uint32_t d_feat) : d_feat_(d_feat) {
    if (num_classes < 1 || d_feat < 1) throw InputError("class stats dimensions must be positive");
    classes_.resize(num_classes);
    for (auto& m : classes_) {
      m.mean = Eigen::VectorXd::Zero(d_feat);
      m.mean_square = Eigen::VectorXd::Zero(d_feat);
      m.stddev = Eigen::VectorXd::Zero(d_feat);
    }
  }

  std::uint32_t num_classes() const noexcept { return static_cast<std::uint32_t>(classes_.size()); }
  std::uint32_t d_feat() const noexcept { return d_feat_; }

  const ClassMoments& operator[](ClassIndex c) const { return at(c); }
  const ClassMoments& at(ClassIndex c) const {
    if (c >= classes_.size()) throw InputError("class " + std::to_string(c) + " out of range");
    return classes_[c];
  }

  std::vector<std::uint64_t> counts() const {
    std::vector<std::uint64_t> out;
    out.reserve(classes_.size());
    for (const auto& m : classes_) out.push_back(m.count);
    return out;
  }

  std::uint64_t max_count() const noexcept {
    std::uint64_t best = 0;
    for (const auto& m : classes_) best = std::max(best, m.count);
    return best;
  }

  template <typename Scalar>
  void observe(ClassIndex label, std::span<const Scalar> f) {
    if (label >= classes_.size()) {
      throw InputError("label " + std::to_string(label) + " out of range for " + std::to_string(classes_.size()) +
                       " classes");
    }
    if (f.size() != d_feat_) {
      throw InputError("feature length " + std::to_string(f.size()) + " != d_feat " + std::to_string(d_feat_));
    }
    for (auto v : f) {
      if (!std::isfinite(static_cast<double>(v))) throw InputError("non-finite feature passed to class stats");
    }
    ClassMoments& m = classes_[label];
    ++m.count;
    const double n = static_cast<double>(m.count);
    const double keep = (n - 1.0) / n;
    for (std::uint32_t i = 0; i < d_feat_; ++i) {
      const double x = static_cast<double>(f[i]);
      m.mean(i) = x / n + keep * m.mean(i);
      m.mean_square(i) = x * x / n + keep * m.mean_square(i);
    }
    if (m.count >= 2) {
      const double bessel = n / (n - 1.0);
      for (std::uint32_t i = 0; i < d_feat_; ++i) {
        const double var = bessel * (m.mean_square(i) - m.mean(i) * m.mean(i));
        m.stddev(i) = var > 0.0 ? std::sqrt(var) : 0.0;
      }
    }
  }

  void observe(ClassIndex label, const std::vector<float>& f) { observe(label, std::span<const float>(f)); }
  void observe(ClassIndex label, const std::vector<double>& f) { observe(label, std::span<const double>(f)); }
  void observe(const FeatureRecord& rec) { observe(rec.label, std::span<const float>(rec.vector)); }

  // Immutable copy for a generation pass.
  ClassStats snapshot() const { return *this; }

  bool operator==(const ClassStats& o) const { return d_feat_ == o.d_feat_ && classes_ == o.classes_; }

  // Restores one class from persisted moments; stddev is recomputed.
  void restore(ClassIndex c, std::uint64_t count, Eigen::VectorXd mean, Eigen::VectorXd mean_square) {
    if (c >= classes_.size()) throw InputError("class out of range");
    if (mean.size() != d_feat_ || mean_square.size() != d_feat_) throw InputError("moment length mismatch");
    ClassMoments& m = classes_[c];
    m.count = count;
    m.mean = std::move(mean);
    m.mean_square = std::move(mean_square);
    m.stddev = Eigen::VectorXd::Zero(d_feat_);
    if (count >= 2) {
      const double n = static_cast<double>(count);
      for (std::uint32_t i = 0; i < d_feat_; ++i) {
        const double var = n / (n - 1.0) * (m.mean_square(i) - m.mean(i) * m.mean(i));
        m.stddev(i) = var > 0.0 ? std::sqrt(var) : 0.0;
      }
    }
  }

 private:
  std::uint32_t d_feat_;
  std::vector<ClassMoments> classes_;
};

// Long-format CSV: class,n,element,mu,nu,sigma. sigma is empty when n < 2.
inline void write_stats_csv(std::ostream& os, const ClassStats& stats) {
  os << "class,n,element,mu,nu,sigma\n";
  os.precision(17);
  for (ClassIndex c = 0; c < stats.num_classes(); ++c) {
    const auto& m = stats[c];
    for (std::uint32_t i = 0; i < stats.d_feat(); ++i) {
      os << c << ',' << m.count << ',' << i << ',' << m.mean(i) << ',' << m.mean_square(i) << ',';
      if (m.has_stddev()) os << m.stddev(i);
      os << '\n';
    }
  }
}

// Binary form used inside pipeline checkpoints:
//   u32 C | u32 d_feat | per class: u64 n | f64 mu[d_feat] | f64 nu[d_feat]
inline void write_stats(std::ostream& os, const ClassStats& stats) {
  io::write_le<std::uint32_t>(os, stats.num_classes());
  io::write_le<std::uint32_t>(os, stats.d_feat());
  for (ClassIndex c = 0; c < stats.num_classes(); ++c) {
    const auto& m = stats[c];
    io::write_le<std::uint64_t>(os, m.count);
    for (Eigen::Index i = 0; i < m.mean.size(); ++i) io::write_le<double>(os, m.mean(i));
    for (Eigen::Index i = 0; i < m.mean_square.size(); ++i) io::write_le<double>(os, m.mean_square(i));
  }
}

inline ClassStats read_stats(io::LeReader& in) {
  const std::uint64_t start = in.offset();
  const auto c = in.read<std::uint32_t>("stats C");
  const auto d = in.read<std::uint32_t>("stats d_feat");
  if (c == 0 || d == 0) throw FormatError("stats dimensions must be positive", start);
  ClassStats stats(c, d);
  for (ClassIndex k = 0; k < c; ++k) {
    const auto n = in.read<std::uint64_t>("stats count");
    Eigen::VectorXd mu(d), nu(d);
    for (std::uint32_t i = 0; i < d; ++i) mu(i) = in.read<double>("stats mu");
    for (std::uint32_t i = 0; i < d; ++i) nu(i) = in.read<double>("stats nu");
    stats.restore(k, n, std::move(mu), std::move(nu));
  }
  return stats;
}

}  // namespace aefocl

#endif  // AEFOCL_CLASS_STATS_HPP_
