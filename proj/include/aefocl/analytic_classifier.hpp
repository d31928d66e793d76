#ifndef AEFOCL_ANALYTIC_CLASSIFIER_HPP_
#define AEFOCL_ANALYTIC_CLASSIFIER_HPP_

// Ridge-regression classifier trained by recursive analytic updates.
//
// The state is (W, R, gamma) with R = (sum_i X_i^T X_i + gamma I)^-1. A batch
// (X, Y) is absorbed through the Woodbury identity
//
//   R' = R - R X^T (I + X R X^T)^-1 X R
//   W' = (I - R' X^T X) W + R' X^T Y
//
// which reproduces the joint closed-form solution on all rows seen so far
// without keeping any of them. joint_fit() is that closed form, computed by an
// unrelated path, and serves as the reference in tests.
//
// Checkpoint layout (little-endian):
//   char[4] "AEFC" | u32 version (=1) | u32 d | u32 C | f64 gamma
//   | f64 W[d*C] row-major | f64 R[d*d] row-major

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "aefocl/binary_io.hpp"
#include "aefocl/error.hpp"
#include "aefocl/features.hpp"

namespace aefocl {

inline constexpr char kClassifierMagic[5] = "AEFC";
inline constexpr std::uint32_t kClassifierVersion = 1;

class ClassifierState {
 public:
  // Fresh state: W = 0, R = I / gamma.
  static ClassifierState fresh(Eigen::Index d, Eigen::Index num_classes, double gamma) {
    check_gamma(gamma);
    if (d < 1 || num_classes < 1) throw InputError("classifier dimensions must be positive");
    return ClassifierState(Eigen::MatrixXd::Zero(d, num_classes), Eigen::MatrixXd::Identity(d, d) / gamma, gamma);
  }

  ClassifierState(Eigen::MatrixXd weights, Eigen::MatrixXd autocorr_inv, double gamma)
      : weights_(std::move(weights)), autocorr_inv_(std::move(autocorr_inv)), gamma_(gamma) {
    check_gamma(gamma);
    if (autocorr_inv_.rows() != autocorr_inv_.cols() || autocorr_inv_.rows() != weights_.rows()) {
      throw InputError("R must be d x d with d = rows(W)");
    }
  }

  const Eigen::MatrixXd& weights() const noexcept { return weights_; }
  // R, the inverse regularized feature autocorrelation.
  const Eigen::MatrixXd& autocorr_inv() const noexcept { return autocorr_inv_; }
  double gamma() const noexcept { return gamma_; }
  Eigen::Index dim() const noexcept { return weights_.rows(); }
  Eigen::Index num_classes() const noexcept { return weights_.cols(); }

  bool operator==(const ClassifierState& o) const {
    return gamma_ == o.gamma_ && weights_.rows() == o.weights_.rows() && weights_.cols() == o.weights_.cols() &&
           weights_ == o.weights_ && autocorr_inv_ == o.autocorr_inv_;
  }

 private:
  static void check_gamma(double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InputError("gamma must be finite and > 0");
  }

  Eigen::MatrixXd weights_;
  Eigen::MatrixXd autocorr_inv_;
  double gamma_;
};

namespace detail {

inline void check_batch(const ClassifierState& s, const Eigen::Ref<const Eigen::MatrixXd>& x,
                        const Eigen::Ref<const Eigen::MatrixXd>& y) {
  if (x.rows() != y.rows()) throw InputError("X and Y row counts differ");
  if (x.cols() != s.dim()) {
    throw InputError("X has " + std::to_string(x.cols()) + " columns, classifier expects " + std::to_string(s.dim()));
  }
  if (y.cols() != s.num_classes()) {
    throw InputError("Y has " + std::to_string(y.cols()) + " columns, classifier expects " +
                     std::to_string(s.num_classes()));
  }
  if (!x.allFinite() || !y.allFinite()) throw InputError("non-finite values in X or Y");
}

}  // namespace detail

// Absorbs one batch and returns the new state; `state` is left untouched.
//
// Batches taller than d are folded in row blocks of at most d rows, so each
// Cholesky solve is at most d x d. By the weight-invariant property this is
// the same solution as a single block.
inline ClassifierState update(const ClassifierState& state, const Eigen::Ref<const Eigen::MatrixXd>& x,
                              const Eigen::Ref<const Eigen::MatrixXd>& y) {
  detail::check_batch(state, x, y);
  if (x.rows() == 0) return state;

  Eigen::MatrixXd r = state.autocorr_inv();
  Eigen::MatrixXd w = state.weights();
  const Eigen::Index block = std::max<Eigen::Index>(state.dim(), 1);

  for (Eigen::Index start = 0; start < x.rows(); start += block) {
    const Eigen::Index m = std::min(block, x.rows() - start);
    const auto xb = x.middleRows(start, m);
    const auto yb = y.middleRows(start, m);

    const Eigen::MatrixXd rxt = r * xb.transpose();  // d x m
    Eigen::MatrixXd gram = xb * rxt;                 // m x m, X R X^T
    gram.diagonal().array() += 1.0;
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("I + X R X^T is not positive definite; classifier state is corrupted");
    }
    r.noalias() -= rxt * llt.solve(rxt.transpose());
    r = (0.5 * (r + r.transpose())).eval();

    // (I - R' X^T X) W + R' X^T Y  ==  W + R' X^T (Y - X W)
    const Eigen::MatrixXd residual = yb - xb * w;
    w.noalias() += r * (xb.transpose() * residual);
  }
  if (!r.allFinite() || !w.allFinite()) throw NumericalError("update produced non-finite values");
  return ClassifierState(std::move(w), std::move(r), state.gamma());
}

// Closed-form ridge solution on all rows at once:
//   W = (X^T X + gamma I)^-1 X^T Y,  R = (X^T X + gamma I)^-1
inline ClassifierState joint_fit(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::MatrixXd>& y,
                                 double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InputError("gamma must be finite and > 0");
  if (x.rows() != y.rows()) throw InputError("X and Y row counts differ");
  if (x.cols() < 1 || y.cols() < 1) throw InputError("classifier dimensions must be positive");
  if (!x.allFinite() || !y.allFinite()) throw InputError("non-finite values in X or Y");
  const Eigen::Index d = x.cols();
  Eigen::MatrixXd a = x.transpose() * x;
  a.diagonal().array() += gamma;
  const Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw NumericalError("X^T X + gamma I is not positive definite");
  Eigen::MatrixXd w = llt.solve(x.transpose() * y);
  Eigen::MatrixXd r = llt.solve(Eigen::MatrixXd::Identity(d, d));
  return ClassifierState(std::move(w), std::move(r), gamma);
}

inline Eigen::MatrixXd scores(const ClassifierState& state, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  if (x.cols() != state.dim()) {
    throw InputError("X has " + std::to_string(x.cols()) + " columns, classifier expects " +
                     std::to_string(state.dim()));
  }
  return x * state.weights();
}

// Argmax of X W per row; ties go to the lowest class index.
inline std::vector<ClassIndex> predict(const ClassifierState& state, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  const Eigen::MatrixXd s = scores(state, x);
  std::vector<ClassIndex> labels(static_cast<std::size_t>(s.rows()), 0);
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < s.cols(); ++c) {
      if (s(i, c) > s(i, best)) best = c;
    }
    labels[static_cast<std::size_t>(i)] = static_cast<ClassIndex>(best);
  }
  return labels;
}

// max |R - R^T| / max |R|
inline double symmetry_residual(const Eigen::MatrixXd& r) {
  const double scale = r.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (r - r.transpose()).cwiseAbs().maxCoeff() / scale;
}

inline bool is_positive_definite(const Eigen::MatrixXd& r) {
  const Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (r + r.transpose()));
  return llt.info() == Eigen::Success;
}

// ---------------------------------------------------------------------------
// Checkpoint

inline void write_classifier(std::ostream& os, const ClassifierState& s) {
  io::write_tag(os, kClassifierMagic);
  io::write_le<std::uint32_t>(os, kClassifierVersion);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.dim()));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.num_classes()));
  io::write_le<double>(os, s.gamma());
  for (Eigen::Index i = 0; i < s.dim(); ++i)
    for (Eigen::Index j = 0; j < s.num_classes(); ++j) io::write_le<double>(os, s.weights()(i, j));
  for (Eigen::Index i = 0; i < s.dim(); ++i)
    for (Eigen::Index j = 0; j < s.dim(); ++j) io::write_le<double>(os, s.autocorr_inv()(i, j));
}

inline ClassifierState read_classifier(io::LeReader& in) {
  const std::uint64_t start = in.offset();
  const auto tag = in.read_tag("classifier magic");
  if (std::string(tag.data(), 4) != std::string(kClassifierMagic, 4)) {
    throw FormatError("bad classifier magic, expected AEFC", start);
  }
  const auto version = in.read<std::uint32_t>("classifier version");
  if (version != kClassifierVersion) {
    throw FormatError("unsupported classifier version " + std::to_string(version), start + 4);
  }
  const auto d = in.read<std::uint32_t>("classifier d");
  const auto c = in.read<std::uint32_t>("classifier C");
  const auto gamma = in.read<double>("classifier gamma");
  if (d == 0 || c == 0) throw FormatError("classifier dimensions must be positive", start + 8);
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw FormatError("classifier gamma must be > 0", start + 16);
  Eigen::MatrixXd w(d, c);
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = in.read<double>("classifier W");
  Eigen::MatrixXd r(d, d);
  for (Eigen::Index i = 0; i < r.rows(); ++i)
    for (Eigen::Index j = 0; j < r.cols(); ++j) r(i, j) = in.read<double>("classifier R");
  return ClassifierState(std::move(w), std::move(r), gamma);
}

inline ClassifierState read_classifier(std::istream& is) {
  io::LeReader in(is);
  return read_classifier(in);
}

}  // namespace aefocl

#endif  // AEFOCL_ANALYTIC_CLASSIFIER_HPP_
