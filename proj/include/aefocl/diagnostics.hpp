#ifndef AEFOCL_DIAGNOSTICS_HPP_
#define AEFOCL_DIAGNOSTICS_HPP_

// Feature-distribution diagnostics: binned histograms of selected feature
// elements for one class plus the fitted normal (mu, sigma), and dataset
// summaries. Plotting is left to external tools.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "aefocl/class_stats.hpp"
#include "aefocl/error.hpp"
#include "aefocl/features.hpp"

namespace aefocl {

struct ElementHistogram {
  std::uint32_t element = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::uint64_t> counts;
  double mu = 0.0;
  double sigma = 0.0;  // 0 when fewer than two samples

  double bin_width() const { return counts.empty() ? 0.0 : (hi - lo) / static_cast<double>(counts.size()); }
};

inline std::vector<ElementHistogram> class_histograms(std::span<const FeatureRecord> records, std::uint32_t d_feat,
                                                      std::uint32_t num_classes, ClassIndex cls,
                                                      std::span<const std::uint32_t> elements, std::uint32_t bins) {
  if (cls >= num_classes) throw InputError("class " + std::to_string(cls) + " out of range");
  if (bins < 1) throw InputError("need at least one bin");
  if (elements.empty()) throw InputError("no feature elements selected");
  for (auto e : elements) {
    if (e >= d_feat) throw InputError("feature element " + std::to_string(e) + " out of range");
  }

  ClassStats stats(num_classes, d_feat);
  std::vector<const FeatureRecord*> selected;
  for (const auto& rec : records) {
    if (rec.label != cls) continue;
    stats.observe(rec);
    selected.push_back(&rec);
  }
  if (selected.empty()) throw InputError("class " + std::to_string(cls) + " has no records");

  std::vector<ElementHistogram> out;
  for (auto e : elements) {
    ElementHistogram h;
    h.element = e;
    h.lo = std::numeric_limits<double>::infinity();
    h.hi = -std::numeric_limits<double>::infinity();
    for (const auto* rec : selected) {
      h.lo = std::min<double>(h.lo, rec->vector[e]);
      h.hi = std::max<double>(h.hi, rec->vector[e]);
    }
    if (h.hi <= h.lo) h.hi = h.lo + 1.0;
    h.counts.assign(bins, 0);
    for (const auto* rec : selected) {
      auto b = static_cast<std::int64_t>((rec->vector[e] - h.lo) / h.bin_width());
      b = std::clamp<std::int64_t>(b, 0, bins - 1);
      ++h.counts[static_cast<std::size_t>(b)];
    }
    h.mu = stats[cls].mean(e);
    h.sigma = stats[cls].has_stddev() ? stats[cls].stddev(e) : 0.0;
    out.push_back(std::move(h));
  }
  return out;
}

// CSV: class,element,bin,bin_lo,bin_hi,count,mu,sigma
inline void write_histogram_csv(std::ostream& os, ClassIndex cls, std::span<const ElementHistogram> hists) {
  os << "class,element,bin,bin_lo,bin_hi,count,mu,sigma\n";
  os.precision(17);
  for (const auto& h : hists) {
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      const double lo = h.lo + h.bin_width() * static_cast<double>(b);
      os << cls << ',' << h.element << ',' << b << ',' << lo << ',' << lo + h.bin_width() << ',' << h.counts[b] << ','
         << h.mu << ',' << h.sigma << '\n';
    }
  }
}

inline nlohmann::json dataset_info(const Dataset& ds) {
  std::vector<std::uint64_t> per_class(ds.header.num_classes, 0);
  std::vector<std::uint64_t> per_task;
  bool nondecreasing = true;
  TaskIndex last = 0;
  for (const auto& rec : ds.records) {
    ++per_class[rec.label];
    if (rec.task_id >= per_task.size()) per_task.resize(rec.task_id + 1, 0);
    ++per_task[rec.task_id];
    if (rec.task_id < last) nondecreasing = false;
    last = rec.task_id;
  }
  return nlohmann::json{{"version", ds.header.version},
                        {"d_feat", ds.header.d_feat},
                        {"num_classes", ds.header.num_classes},
                        {"num_records", ds.header.num_records},
                        {"class_counts", per_class},
                        {"task_counts", per_task},
                        {"task_ids_nondecreasing", nondecreasing}};
}

}  // namespace aefocl

#endif  // AEFOCL_DIAGNOSTICS_HPP_
