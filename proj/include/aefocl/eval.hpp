#ifndef AEFOCL_EVAL_HPP_
#define AEFOCL_EVAL_HPP_

// Class-balanced evaluation: per-class accuracy per task and the average mean
// class accuracy (AMCA), the mean over tasks of the unweighted class mean.

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "aefocl/error.hpp"
#include "aefocl/features.hpp"

namespace aefocl {

struct TaskScore {
  std::vector<std::uint64_t> n_val;            // validation samples per class
  std::vector<std::uint64_t> correct;          // correct predictions per class
  std::vector<std::optional<double>> accuracy; // nullopt when n_val == 0
  std::vector<std::vector<std::uint64_t>> confusion;  // [truth][prediction]
  double mean_class_accuracy = 0.0;            // over classes with n_val > 0

  std::vector<ClassIndex> excluded_classes() const {
    std::vector<ClassIndex> out;
    for (ClassIndex c = 0; c < accuracy.size(); ++c) {
      if (!accuracy[c]) out.push_back(c);
    }
    return out;
  }
};

inline TaskScore score_task(std::span<const ClassIndex> predictions, std::span<const ClassIndex> truths,
                            std::uint32_t num_classes) {
  if (predictions.size() != truths.size()) throw InputError("prediction and truth lengths differ");
  TaskScore s;
  s.n_val.assign(num_classes, 0);
  s.correct.assign(num_classes, 0);
  s.accuracy.assign(num_classes, std::nullopt);
  s.confusion.assign(num_classes, std::vector<std::uint64_t>(num_classes, 0));
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] >= num_classes || predictions[i] >= num_classes) throw InputError("label out of range in scoring");
    ++s.n_val[truths[i]];
    ++s.confusion[truths[i]][predictions[i]];
    if (predictions[i] == truths[i]) ++s.correct[truths[i]];
  }
  double sum = 0.0;
  std::uint32_t present = 0;
  for (ClassIndex c = 0; c < num_classes; ++c) {
    if (s.n_val[c] == 0) continue;
    const double a = static_cast<double>(s.correct[c]) / static_cast<double>(s.n_val[c]);
    s.accuracy[c] = a;
    sum += a;
    ++present;
  }
  if (present == 0) throw UsageError("no validation samples to score");
  s.mean_class_accuracy = sum / present;
  return s;
}

inline double amca(std::span<const double> task_means) {
  if (task_means.empty()) throw UsageError("AMCA of an empty task list");
  double sum = 0.0;
  for (double m : task_means) sum += m;
  return sum / static_cast<double>(task_means.size());
}

// One validation point.
struct PhaseReport {
  std::uint32_t task = 0;     // validation point index t
  TaskIndex task_id = 0;      // dataset task the point belongs to
  std::uint64_t phase = 0;    // pipeline phases completed
  TaskScore score;
  double running_amca = 0.0;  // AMCA over points 0..t
};

// Appends a scored point and fills in its running AMCA.
inline void append_report(std::vector<PhaseReport>& reports, PhaseReport report) {
  std::vector<double> means;
  means.reserve(reports.size() + 1);
  for (const auto& r : reports) means.push_back(r.score.mean_class_accuracy);
  means.push_back(report.score.mean_class_accuracy);
  report.task = static_cast<std::uint32_t>(reports.size());
  report.running_amca = amca(means);
  reports.push_back(std::move(report));
}

inline std::vector<double> task_means(std::span<const PhaseReport> reports) {
  std::vector<double> out;
  out.reserve(reports.size());
  for (const auto& r : reports) out.push_back(r.score.mean_class_accuracy);
  return out;
}

// Per-class accuracy averaged over the points where the class was present.
inline std::vector<std::optional<double>> mean_class_recall(std::span<const PhaseReport> reports,
                                                            std::uint32_t num_classes) {
  std::vector<double> sum(num_classes, 0.0);
  std::vector<std::uint32_t> n(num_classes, 0);
  for (const auto& r : reports) {
    for (ClassIndex c = 0; c < num_classes && c < r.score.accuracy.size(); ++c) {
      if (r.score.accuracy[c]) {
        sum[c] += *r.score.accuracy[c];
        ++n[c];
      }
    }
  }
  std::vector<std::optional<double>> out(num_classes);
  for (ClassIndex c = 0; c < num_classes; ++c) {
    if (n[c] > 0) out[c] = sum[c] / n[c];
  }
  return out;
}

// CSV schema: run_id,task,class,n_val,accuracy. Excluded classes are written
// with n_val 0 and an empty accuracy field.
inline void write_report_csv(std::ostream& os, const std::string& run_id, std::span<const PhaseReport> reports) {
  os << "run_id,task,class,n_val,accuracy\n";
  os.precision(17);
  for (const auto& r : reports) {
    for (ClassIndex c = 0; c < r.score.n_val.size(); ++c) {
      os << run_id << ',' << r.task << ',' << c << ',' << r.score.n_val[c] << ',';
      if (r.score.accuracy[c]) os << *r.score.accuracy[c];
      os << '\n';
    }
  }
}

}  // namespace aefocl

#endif  // AEFOCL_EVAL_HPP_
