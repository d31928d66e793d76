// Acceptance checks. One PASS/FAIL line per criterion; exits 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "aefocl/aefocl.hpp"
#include "test_util.hpp"

using namespace aefocl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void check(const char* name, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
  std::fflush(stdout);
  if (!o.pass) ++g_failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// Recursive classifier vs direct solutions

struct Instance {
  Eigen::MatrixXd x, y;
  double gamma;
  std::vector<Eigen::Index> cuts;  // batch boundaries, ascending, last == rows
};

std::vector<Instance> make_instances() {
  std::mt19937_64 rng(20240601);
  const int dims[] = {8, 64, 256};
  const int classes[] = {2, 6};
  const double gammas[] = {0.1, 1.0, 10.0};
  std::vector<Instance> out;
  for (int i = 0; i < 20; ++i) {
    const int d = dims[i % 3];
    const int c = classes[(i / 3) % 2];
    std::uniform_int_distribution<Eigen::Index> pick_n(1, 5000);
    const Eigen::Index n = i == 0 ? 5000 : pick_n(rng);
    Instance in;
    // ReLU-shaped inputs like projected features, plus a dense block
    in.x = test::random_matrix(rng, n, d).cwiseMax(0.0) + 0.1 * test::random_matrix(rng, n, d);
    in.y = test::random_one_hot(rng, n, c);
    in.gamma = gammas[i % 3];
    std::uniform_int_distribution<int> pick_batches(1, 12);
    const int batches = pick_batches(rng);
    std::uniform_int_distribution<Eigen::Index> pick_cut(0, n);
    for (int b = 0; b < batches - 1; ++b) in.cuts.push_back(pick_cut(rng));
    in.cuts.push_back(n);
    std::sort(in.cuts.begin(), in.cuts.end());
    out.push_back(std::move(in));
  }
  return out;
}

// Direct references, independent of the library's LLT-based joint_fit.
Eigen::MatrixXd direct_inverse(const Eigen::MatrixXd& x, double gamma) {
  const Eigen::MatrixXd a = x.transpose() * x + gamma * Eigen::MatrixXd::Identity(x.cols(), x.cols());
  return a.fullPivLu().inverse();
}

Eigen::MatrixXd direct_weights(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double gamma) {
  const Eigen::MatrixXd a = x.transpose() * x + gamma * Eigen::MatrixXd::Identity(x.cols(), x.cols());
  return a.fullPivLu().solve(x.transpose() * y);
}

struct FoldResult {
  double w_err = 0.0;       // vs direct solve
  double w_joint_err = 0.0; // vs joint_fit
  double r_err = 0.0;
  double worst_asym = 0.0;
  bool always_pd = true;
  int updates = 0;
};

FoldResult fold(const Instance& in) {
  FoldResult f;
  ClassifierState s = ClassifierState::fresh(in.x.cols(), in.y.cols(), in.gamma);
  Eigen::Index start = 0;
  for (Eigen::Index cut : in.cuts) {
    s = update(s, in.x.middleRows(start, cut - start), in.y.middleRows(start, cut - start));
    start = cut;
    ++f.updates;
    const Eigen::MatrixXd& r = s.autocorr_inv();
    f.worst_asym = std::max(f.worst_asym, (r - r.transpose()).cwiseAbs().maxCoeff() / r.cwiseAbs().maxCoeff());
    Eigen::LLT<Eigen::MatrixXd> llt(r);
    if (llt.info() != Eigen::Success) f.always_pd = false;
  }
  f.w_err = test::max_rel_error(s.weights(), direct_weights(in.x, in.y, in.gamma));
  f.w_joint_err = test::max_rel_error(s.weights(), joint_fit(in.x, in.y, in.gamma).weights());
  f.r_err = test::max_rel_error(s.autocorr_inv(), direct_inverse(in.x, in.gamma));
  return f;
}

// ---------------------------------------------------------------------------
// Synthetic preset experiments, shared by the qualitative checks

struct PresetRuns {
  fs::path dir;
  std::map<std::tuple<double, double, int>, RunResult> cache;

  PresetRuns() {
    dir = test::temp_dir("acceptance_preset");
    generate_stream(soda_like_preset(64, 3500, 1), dir / "train.aeff");
    generate_stream(soda_like_preset(64, 2000, 2), dir / "val.aeff");
  }

  RunConfig config(double alpha, double gamma, Strategy s) const {
    RunConfig c;
    c.dataset = (dir / "train.aeff").string();
    c.val_dataset = (dir / "val.aeff").string();
    c.buffer_size = 256;
    c.alpha = alpha;
    c.gamma = gamma;
    c.strategy = s;
    return c;
  }

  const RunResult& get(double alpha, double gamma, Strategy s) {
    const auto key = std::make_tuple(alpha, gamma, static_cast<int>(s));
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, run_and_report(config(alpha, gamma, s))).first;
    return it->second;
  }
};

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Pinned from the first verified run (train seed 1, val seed 2, d_buf 256,
// buffer/pfg seeds 0, gamma 1, alpha 1).
constexpr double kPinnedAmcaBalanced = 0.835167;
constexpr double kPinnedAmcaIterative = 0.646718;
constexpr double kPinnedMinorityBalanced = 0.704497;
constexpr double kPinnedMinorityIterative = 0.0;
constexpr double kPinTolerance = 1e-3;

}  // namespace

int main() {
  const auto instances = make_instances();
  std::vector<FoldResult> folds;

  check("weight-invariance", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0, worst_joint = 0.0;
    int updates = 0;
    for (const auto& in : instances) {
      folds.push_back(fold(in));
      worst = std::max(worst, folds.back().w_err);
      worst_joint = std::max(worst_joint, folds.back().w_joint_err);
      updates += folds.back().updates;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return Outcome{worst <= 1e-8 && worst_joint <= 1e-8 && secs <= 60.0,
                   fmt("20 instances, %d updates, max rel err %.2e vs direct solve, %.2e vs joint fit, %.1f s "
                       "(limits 1e-8, 60 s)",
                       updates, worst, worst_joint, secs)};
  });

  check("inverse-autocorrelation", [&] {
    if (folds.size() != instances.size()) return Outcome{false, "fold results missing"};
    double worst = 0.0, asym = 0.0;
    bool pd = true;
    for (const auto& f : folds) {
      worst = std::max(worst, f.r_err);
      asym = std::max(asym, f.worst_asym);
      pd = pd && f.always_pd;
    }
    return Outcome{worst <= 1e-8 && pd && asym <= 1e-12,
                   fmt("max rel err %.2e vs direct inverse (limit 1e-8), max asymmetry %.1e, PD after every "
                       "update: %s",
                       worst, asym, pd ? "yes" : "no")};
  });

  check("class-moments", [] {
    std::mt19937_64 rng(7);
    double worst_mu = 0.0, worst_nu = 0.0, worst_sigma = 0.0;
    const std::uint32_t d = 16;
    for (int stream = 0; stream < 5; ++stream) {
      std::normal_distribution<double> center(0.0, 3.0);
      std::uniform_real_distribution<double> spread(0.5, 2.0);
      std::vector<double> mu(d), sd(d);
      for (std::uint32_t j = 0; j < d; ++j) {
        mu[j] = center(rng);
        sd[j] = spread(rng);
      }
      std::normal_distribution<double> z(0.0, 1.0);
      std::vector<std::vector<double>> rows(10000, std::vector<double>(d));
      ClassStats stats(2, d);
      for (auto& row : rows) {
        for (std::uint32_t j = 0; j < d; ++j) row[j] = static_cast<float>(mu[j] + sd[j] * z(rng));
        stats.observe(1, row);
      }
      // two-pass batch statistics
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(d), sq = Eigen::VectorXd::Zero(d), ss = Eigen::VectorXd::Zero(d);
      for (const auto& row : rows)
        for (std::uint32_t j = 0; j < d; ++j) {
          mean(j) += row[j];
          sq(j) += row[j] * row[j];
        }
      mean /= 10000.0;
      sq /= 10000.0;
      for (const auto& row : rows)
        for (std::uint32_t j = 0; j < d; ++j) ss(j) += (row[j] - mean(j)) * (row[j] - mean(j));
      const Eigen::VectorXd sigma = (ss / 9999.0).cwiseSqrt();
      const auto& m = stats[1];
      auto rel = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return ((a - b).array().abs() / b.array().abs()).maxCoeff();
      };
      worst_mu = std::max(worst_mu, rel(m.mean, mean));
      worst_nu = std::max(worst_nu, rel(m.mean_square, sq));
      worst_sigma = std::max(worst_sigma, rel(m.stddev, sigma));
    }
    const double worst = std::max({worst_mu, worst_nu, worst_sigma});
    return Outcome{worst <= 1e-10, fmt("5 streams x 10k samples x 16 elements, max elementwise rel err mu %.2e, "
                                       "nu %.2e, sigma %.2e (limit 1e-10)",
                                       worst_mu, worst_nu, worst_sigma)};
  });

  check("pseudo-balancing", [] {
    std::mt19937_64 rng(11);
    const std::uint32_t d = 4;
    const std::vector<std::uint64_t> counts{3000, 1200, 40, 2, 1, 0};
    ClassStats stats(6, d);
    std::normal_distribution<double> z(0.0, 1.0);
    for (ClassIndex c = 0; c < counts.size(); ++c)
      for (std::uint64_t i = 0; i < counts[c]; ++i) {
        std::vector<double> f(d);
        for (std::uint32_t j = 0; j < d; ++j) f[j] = (c - 2.0) * (j + 1.0) * 0.3 + (0.5 + 0.25 * j) * z(rng);
        stats.observe(c, f);
      }
    const ProjectionBuffer buf(d, 32, 5);

    bool counts_ok = true;
    PfgConfig cfg;
    cfg.seed = 77;
    const PseudoBatch one = generate(stats, buf, cfg, 0);
    for (ClassIndex c = 0; c < counts.size(); ++c) {
      const std::uint64_t want = counts[c] >= 2 ? 3000 - counts[c] : 0;
      counts_ok = counts_ok && one.counts[c] == want;
      if (counts[c] >= 2) counts_ok = counts_ok && counts[c] + one.counts[c] == 3000;
    }
    counts_ok = counts_ok && static_cast<std::uint64_t>(one.rows()) == 1800 + 2960 + 2998;

    cfg.alpha = 0.0;
    const PseudoBatch zero = generate(stats, buf, cfg, 0);
    bool zero_ok = zero.rows() == one.rows();
    for (Eigen::Index i = 0; i < zero.rows() && zero_ok; ++i) {
      zero_ok = zero.raw.row(i) == stats[zero.labels[i]].mean.transpose();
    }

    // alpha = 1: per class with m >= 1000, per element sample mean within
    // 3 SE of mu and sample std within 3 SE of sigma.
    int checks = 0, outside = 0;
    double worst_z = 0.0;
    Eigen::Index row = 0;
    for (ClassIndex c = 0; c < counts.size(); ++c) {
      const auto m = static_cast<Eigen::Index>(one.counts[c]);
      if (m >= 1000) {
        const auto block = one.raw.middleRows(row, m);
        for (std::uint32_t j = 0; j < d; ++j) {
          const double target_mu = stats[c].mean(j), target_sd = stats[c].stddev(j);
          const double mean = block.col(j).mean();
          const double sd = std::sqrt((block.col(j).array() - mean).square().sum() / (m - 1.0));
          const double z_mean = std::abs(mean - target_mu) / (target_sd / std::sqrt(double(m)));
          const double z_sd = std::abs(sd - target_sd) / (target_sd / std::sqrt(2.0 * (m - 1.0)));
          worst_z = std::max({worst_z, z_mean, z_sd});
          checks += 2;
          outside += (z_mean > 3.0) + (z_sd > 3.0);
        }
      }
      row += m;
    }
    return Outcome{counts_ok && zero_ok && outside == 0 && checks > 0,
                   fmt("top-up counts exact: %s; alpha=0 rows equal mu: %s; alpha=1 moment checks %d, outside 3 SE "
                       "%d (worst %.2f SE)",
                       counts_ok ? "yes" : "no", zero_ok ? "yes" : "no", checks, outside, worst_z)};
  });

  check("balanced-equivalence", [] {
    const SynthSpec spec = soda_like_preset(16, 500, 9);
    const auto recs = generate_records(spec);
    PipelineConfig cfg;
    cfg.d_buf = 64;
    cfg.gamma = 1.0;
    cfg.pfg.seed = 3;
    PipelineState s = PipelineState::init(16, 6, cfg);
    Eigen::MatrixXd all_x(0, 64), all_y(0, 6);
    double worst = 0.0;
    std::uint64_t pseudo_rows = 0;
    for (TaskIndex t = 0; t < spec.num_tasks; ++t) {
      std::vector<FeatureRecord> batch;
      for (const auto& r : recs)
        if (r.task_id == t) batch.push_back(r);
      const std::uint64_t phase = s.phase();
      s = train_batch(s, batch);
      const auto [x, y] = batch_matrices(batch, s.buffer(), 6);
      Eigen::MatrixXd nx(all_x.rows() + x.rows(), 64), ny(all_y.rows() + y.rows(), 6);
      nx << all_x, x;
      ny << all_y, y;
      all_x = std::move(nx);
      all_y = std::move(ny);
      const PseudoBatch p = generate(s.stats(), s.buffer(), cfg.pfg, phase);
      pseudo_rows += static_cast<std::uint64_t>(p.rows());
      Eigen::MatrixXd jx(all_x.rows() + p.rows(), 64), jy(all_y.rows() + p.rows(), 6);
      jx << all_x, p.x;
      jy << all_y, p.y;
      worst = std::max(worst, test::max_rel_error(s.balanced().weights(), direct_weights(jx, jy, cfg.gamma)));
    }
    return Outcome{worst <= 1e-8 && pseudo_rows > 0,
                   fmt("6 phases, %llu pseudo rows in total, max rel err %.2e vs direct solve (limit 1e-8)",
                       static_cast<unsigned long long>(pseudo_rows), worst)};
  });

  PresetRuns preset;

  check("imbalance-benefit", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const RunResult& r = preset.get(1.0, 1.0, Strategy::kRebase);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::uint64_t n = std::accumulate(r.real_counts.begin(), r.real_counts.end(), std::uint64_t{0});
    const auto rb = mean_class_recall(r.balanced, 6);
    const auto ri = mean_class_recall(r.iterative, 6);
    const double min_b = rb[5].value_or(-1.0), min_i = ri[5].value_or(-1.0);
    const bool direction = r.amca_balanced() > r.amca_iterative() && min_b > min_i;
    const bool pinned = std::abs(r.amca_balanced() - kPinnedAmcaBalanced) <= kPinTolerance &&
                        std::abs(r.amca_iterative() - kPinnedAmcaIterative) <= kPinTolerance &&
                        std::abs(min_b - kPinnedMinorityBalanced) <= kPinTolerance &&
                        std::abs(min_i - kPinnedMinorityIterative) <= kPinTolerance;
    return Outcome{direction && pinned && n >= 20000 && secs <= 300.0,
                   fmt("%llu samples, AMCA balanced %.6f vs iterative %.6f, minority recall %.6f vs %.6f, "
                       "pinned fixtures %s, %.1f s (limit 300 s)",
                       static_cast<unsigned long long>(n), r.amca_balanced(), r.amca_iterative(), min_b, min_i,
                       pinned ? "match" : "DIFFER", secs)};
  });

  check("alpha-sweep-peak", [&] {
    std::string detail = "AMCA";
    double at_one = preset.get(1.0, 1.0, Strategy::kRebase).amca_balanced();
    bool peak = true;
    for (double a : {0.0, 0.5, 1.0, 2.0, 4.0}) {
      const double v = preset.get(a, 1.0, Strategy::kRebase).amca_balanced();
      detail += fmt(" a=%g:%.4f", a, v);
      peak = peak && v <= at_one;
    }
    return Outcome{peak, detail + (peak ? "; maximum at alpha=1" : "; alpha=1 is not the maximum")};
  });

  check("rebase-vs-carry", [&] {
    std::string detail = "AMCA rebase/carry";
    bool ok = true;
    for (double g : {0.1, 1.0, 10.0, 100.0}) {
      const double rb = preset.get(1.0, g, Strategy::kRebase).amca_balanced();
      const double cr = preset.get(1.0, g, Strategy::kCarry).amca_balanced();
      detail += fmt(" g=%g:%.4f/%.4f", g, rb, cr);
      ok = ok && rb >= cr;
    }
    return Outcome{ok, detail};
  });

  check("state-size", [] {
    PipelineConfig cfg;
    cfg.d_buf = 64;
    auto bytes_after = [&](std::uint64_t spt) {
      const auto recs = generate_records(soda_like_preset(16, spt, 4));
      PipelineState s = PipelineState::init(16, 6, cfg);
      std::size_t begin = 0;
      while (begin < recs.size()) {
        const std::size_t end = std::min(recs.size(), begin + 1000);
        s = train_batch(s, std::span<const FeatureRecord>(recs).subspan(begin, end - begin));
        begin = end;
      }
      std::ostringstream os;
      write_pipeline(os, s);
      return std::make_pair(recs.size(), os.str().size());
    };
    const auto [n_small, small] = bytes_after(167);
    const auto [n_big, big] = bytes_after(16667);
    // W and R for two classifiers, mu and nu per class, plus bounded metadata
    const std::size_t d = 64, c = 6, f = 16;
    const std::size_t payload = 8 * (2 * (d * d + d * c) + c * 2 * f);
    return Outcome{small == big && small >= payload && small - payload <= 256,
                   fmt("%zu samples -> %zu bytes, %zu samples -> %zu bytes; model payload %zu bytes", n_small, small,
                       n_big, big, payload)};
  });

  check("determinism", [&] {
    RunConfig c = preset.config(1.0, 1.0, Strategy::kRebase);
    c.write_checkpoint = true;
    c.out_dir = (preset.dir / "det_a").string();
    run_and_report(c);
    c.out_dir = (preset.dir / "det_b").string();
    run_and_report(c);
    int same = 0;
    const char* names[] = {"report.csv", "report_iterative.csv", "summary.json", "checkpoint.aefp"};
    for (const char* name : names) {
      const std::string a = file_bytes(preset.dir / "det_a" / name);
      same += !a.empty() && a == file_bytes(preset.dir / "det_b" / name);
    }
    return Outcome{same == 4, fmt("%d/4 output files byte-identical across two runs", same)};
  });

  // Interface used by the external feature extractor.
  check("golden-ingest", [] {
    const Dataset ds = read_binary_dataset(fs::path(AEFOCL_TEST_DATA_DIR) / "golden_3.aeff");
    const bool ok = ds.header.d_feat == 8 && ds.header.num_classes == 6 && ds.records.size() == 3 &&
                    ds.records[0].label == 0 && ds.records[1].label == 2 && ds.records[2].label == 5 &&
                    ds.records[2].task_id == 1 && ds.records[0].vector[1] == -1.25f &&
                    ds.records[1].vector[7] == -3.0f;
    return Outcome{ok, "checked-in 3-record feature file decodes to the expected labels, tasks and values"};
  });

  return g_failures == 0 ? 0 : 1;
}
