#ifndef AEFOCL_FEATURES_HPP_
#define AEFOCL_FEATURES_HPP_

// Feature records, the on-disk feature dataset format, the frozen random
// projection buffer and one-hot label encoding.
//
// Binary layout (all little-endian):
//   header:  char[4] "AEFF" | u32 version (=1) | u32 d_feat | u32 num_classes | u64 num_records
//   record:  u32 label | u32 task_id | f32 x d_feat
//
// CSV fallback, one record per line: label,task_id,f0,f1,...
// An optional first line whose first field is not a number is treated as a
// column header and skipped.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "aefocl/binary_io.hpp"
#include "aefocl/error.hpp"
#include "aefocl/random.hpp"

namespace aefocl {

using ClassIndex = std::uint32_t;
using TaskIndex = std::uint32_t;

inline constexpr char kDatasetMagic[5] = "AEFF";
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::uint64_t kDatasetHeaderBytes = 4 + 4 + 4 + 4 + 8;

struct FeatureRecord {
  ClassIndex label = 0;
  TaskIndex task_id = 0;
  std::vector<float> vector;

  bool operator==(const FeatureRecord&) const = default;
};

struct DatasetHeader {
  std::uint32_t version = kDatasetVersion;
  std::uint32_t d_feat = 0;
  std::uint32_t num_classes = 0;
  std::uint64_t num_records = 0;

  bool operator==(const DatasetHeader&) const = default;

  std::uint64_t record_bytes() const noexcept { return 8 + 4ULL * d_feat; }
};

struct Dataset {
  DatasetHeader header;
  std::vector<FeatureRecord> records;
};

inline bool all_finite(std::span<const float> v) {
  for (float x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// Throws InputError if the record violates the header's dimensions.
inline void check_record(const FeatureRecord& rec, std::uint32_t d_feat, std::uint32_t num_classes) {
  if (rec.label >= num_classes) {
    throw InputError("label " + std::to_string(rec.label) + " out of range for " +
                     std::to_string(num_classes) + " classes");
  }
  if (rec.vector.size() != d_feat) {
    throw InputError("feature length " + std::to_string(rec.vector.size()) + " != d_feat " +
                     std::to_string(d_feat));
  }
  if (!all_finite(rec.vector)) throw InputError("feature vector contains non-finite values");
}

// ---------------------------------------------------------------------------
// Projection buffer

// A frozen random linear layer followed by ReLU, lifting backbone features of
// width d_feat to classifier inputs of width d_buf. Weights are i.i.d. normal
// with standard deviation `scale` (1/sqrt(d_feat) unless given), drawn
// row-major from a seeded mt19937_64 so equal (seed, dims, scale) give
// bit-identical weights on every platform.
class ProjectionBuffer {
 public:
  static constexpr std::uint32_t kDefaultWidth = 8192;

  ProjectionBuffer(std::uint32_t d_feat, std::uint32_t d_buf, std::uint64_t seed, double scale = 0.0)
      : d_feat_(d_feat), d_buf_(d_buf), seed_(seed), scale_(scale > 0.0 ? scale : default_scale(d_feat)) {
    if (d_feat == 0 || d_buf == 0) throw InputError("projection buffer dimensions must be positive");
    if (!std::isfinite(scale) || scale < 0.0) throw InputError("projection scale must be finite and >= 0");
    weights_.resize(d_feat_, d_buf_);
    Engine eng(seed_);
    for (Eigen::Index r = 0; r < weights_.rows(); ++r) {
      for (Eigen::Index c = 0; c < weights_.cols(); ++c) weights_(r, c) = scale_ * standard_normal(eng);
    }
  }

  // Takes explicit weights; used for hand-built tests.
  explicit ProjectionBuffer(Eigen::MatrixXd weights)
      : d_feat_(static_cast<std::uint32_t>(weights.rows())),
        d_buf_(static_cast<std::uint32_t>(weights.cols())),
        seed_(0),
        scale_(0.0),
        weights_(std::move(weights)) {
    if (d_feat_ == 0 || d_buf_ == 0) throw InputError("projection buffer dimensions must be positive");
  }

  static double default_scale(std::uint32_t d_feat) {
    return d_feat == 0 ? 1.0 : 1.0 / std::sqrt(static_cast<double>(d_feat));
  }

  std::uint32_t d_feat() const noexcept { return d_feat_; }
  std::uint32_t d_buf() const noexcept { return d_buf_; }
  std::uint64_t seed() const noexcept { return seed_; }
  double scale() const noexcept { return scale_; }
  const Eigen::MatrixXd& weights() const noexcept { return weights_; }

 private:
  std::uint32_t d_feat_;
  std::uint32_t d_buf_;
  std::uint64_t seed_;
  double scale_;
  Eigen::MatrixXd weights_;
};

// ReLU(F * W_buffer) for a stack of raw feature rows F (n x d_feat).
inline Eigen::MatrixXd project_rows(const Eigen::Ref<const Eigen::MatrixXd>& raw, const ProjectionBuffer& buf) {
  if (raw.cols() != buf.d_feat()) {
    throw InputError("projection input width " + std::to_string(raw.cols()) + " != d_feat " +
                     std::to_string(buf.d_feat()));
  }
  Eigen::MatrixXd out = raw * buf.weights();
  return out.cwiseMax(0.0);
}

inline Eigen::RowVectorXd project(std::span<const float> f, const ProjectionBuffer& buf) {
  if (f.size() != buf.d_feat()) {
    throw InputError("projection input width " + std::to_string(f.size()) + " != d_feat " +
                     std::to_string(buf.d_feat()));
  }
  Eigen::RowVectorXd row(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) row(static_cast<Eigen::Index>(i)) = f[i];
  return project_rows(row, buf).row(0);
}

inline Eigen::RowVectorXd project(const FeatureRecord& rec, const ProjectionBuffer& buf) {
  return project(std::span<const float>(rec.vector), buf);
}

// Raw features of a batch as a 64-bit matrix, one record per row.
inline Eigen::MatrixXd stack_features(std::span<const FeatureRecord> batch, std::uint32_t d_feat) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(batch.size()), d_feat);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].vector.size() != d_feat) throw InputError("feature length mismatch in batch");
    for (std::uint32_t j = 0; j < d_feat; ++j) out(static_cast<Eigen::Index>(i), j) = batch[i].vector[j];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Label encoding

inline Eigen::RowVectorXd one_hot(ClassIndex label, std::uint32_t num_classes) {
  if (label >= num_classes) {
    throw InputError("label " + std::to_string(label) + " out of range for " + std::to_string(num_classes) +
                     " classes");
  }
  Eigen::RowVectorXd y = Eigen::RowVectorXd::Zero(num_classes);
  y(label) = 1.0;
  return y;
}

inline Eigen::MatrixXd one_hot_rows(std::span<const ClassIndex> labels, std::uint32_t num_classes) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) y.row(static_cast<Eigen::Index>(i)) = one_hot(labels[i], num_classes);
  return y;
}

// ---------------------------------------------------------------------------
// Binary format

inline void validate_header(const DatasetHeader& h, std::uint64_t offset = 4) {
  if (h.version != kDatasetVersion) throw FormatError("unsupported dataset version " + std::to_string(h.version), offset);
  if (h.d_feat < 1) throw FormatError("d_feat must be >= 1", offset + 4);
  if (h.num_classes < 2) throw FormatError("num_classes must be >= 2", offset + 8);
}

inline void write_header(std::ostream& os, const DatasetHeader& h) {
  io::write_tag(os, kDatasetMagic);
  io::write_le<std::uint32_t>(os, h.version);
  io::write_le<std::uint32_t>(os, h.d_feat);
  io::write_le<std::uint32_t>(os, h.num_classes);
  io::write_le<std::uint64_t>(os, h.num_records);
}

inline void write_record(std::ostream& os, const FeatureRecord& rec) {
  io::write_le<std::uint32_t>(os, rec.label);
  io::write_le<std::uint32_t>(os, rec.task_id);
  for (float x : rec.vector) io::write_le<float>(os, x);
}

// Streams records out of a binary feature file in file order.
class DatasetReader {
 public:
  explicit DatasetReader(const std::filesystem::path& path)
      : file_(std::make_unique<std::ifstream>(path, std::ios::binary)), reader_(*file_) {
    if (!*file_) throw FormatError("cannot open dataset '" + path.string() + "'", 0);
    read_header();
  }

  explicit DatasetReader(std::istream& is) : reader_(is) { read_header(); }

  const DatasetHeader& header() const noexcept { return header_; }
  std::uint64_t records_read() const noexcept { return index_; }

  // Next record, or nullopt once header.num_records records have been read.
  std::optional<FeatureRecord> next() {
    if (index_ >= header_.num_records) return std::nullopt;
    const std::uint64_t start = reader_.offset();
    FeatureRecord rec;
    rec.label = reader_.read<std::uint32_t>("record label");
    rec.task_id = reader_.read<std::uint32_t>("record task id");
    rec.vector.resize(header_.d_feat);
    for (auto& x : rec.vector) x = reader_.read<float>("record features");
    if (rec.label >= header_.num_classes) {
      throw FormatError("record " + std::to_string(index_) + " has label " + std::to_string(rec.label) +
                            " >= num_classes",
                        start);
    }
    if (!all_finite(rec.vector)) {
      throw FormatError("record " + std::to_string(index_) + " has non-finite features", start + 8);
    }
    ++index_;
    return rec;
  }

 private:
  void read_header() {
    const auto tag = reader_.read_tag("magic");
    if (std::string(tag.data(), 4) != std::string(kDatasetMagic, 4)) throw FormatError("bad magic, expected AEFF", 0);
    header_.version = reader_.read<std::uint32_t>("version");
    header_.d_feat = reader_.read<std::uint32_t>("d_feat");
    header_.num_classes = reader_.read<std::uint32_t>("num_classes");
    header_.num_records = reader_.read<std::uint64_t>("num_records");
    validate_header(header_);
  }

  std::unique_ptr<std::ifstream> file_;
  io::LeReader reader_;
  DatasetHeader header_;
  std::uint64_t index_ = 0;
};

inline Dataset read_binary_dataset(const std::filesystem::path& path) {
  DatasetReader reader(path);
  Dataset ds;
  ds.header = reader.header();
  ds.records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(ds.header.num_records, 1u << 20)));
  while (auto rec = reader.next()) ds.records.push_back(std::move(*rec));
  return ds;
}

// Writes `records` with a header whose num_records is records.size().
inline void write_dataset(std::ostream& os, std::uint32_t d_feat, std::uint32_t num_classes,
                          std::span<const FeatureRecord> records) {
  DatasetHeader h{kDatasetVersion, d_feat, num_classes, records.size()};
  validate_header(h);
  for (const auto& rec : records) check_record(rec, d_feat, num_classes);
  write_header(os, h);
  for (const auto& rec : records) write_record(os, rec);
}

inline void write_dataset(const std::filesystem::path& path, std::uint32_t d_feat, std::uint32_t num_classes,
                          std::span<const FeatureRecord> records) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open '" + path.string() + "' for writing");
  write_dataset(os, d_feat, num_classes, records);
  if (!os) throw InputError("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// CSV fallback

// num_classes == 0 infers C as max label + 1 (at least 2).
inline Dataset read_csv_dataset(const std::filesystem::path& path, std::uint32_t num_classes = 0) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open dataset '" + path.string() + "'", 0);
  Dataset ds;
  std::string line;
  std::uint64_t offset = 0;
  bool first = true;
  ClassIndex max_label = 0;
  while (std::getline(is, line)) {
    const std::uint64_t line_start = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string field; std::getline(ss, field, ',');) fields.push_back(field);
    auto parse = [&](const std::string& s, auto& out) {
      std::istringstream fs(s);
      fs >> out;
      return !fs.fail() && (fs >> std::ws).eof();
    };
    double probe = 0.0;
    if (first && !fields.empty() && !parse(fields[0], probe)) {
      first = false;
      continue;
    }
    first = false;
    if (fields.size() < 3) throw FormatError("CSV row needs label,task_id and at least one feature", line_start);
    FeatureRecord rec;
    double label = 0.0, task = 0.0;
    if (!parse(fields[0], label) || label < 0 || label != std::floor(label)) {
      throw FormatError("bad CSV label '" + fields[0] + "'", line_start);
    }
    if (!parse(fields[1], task) || task < 0 || task != std::floor(task)) {
      throw FormatError("bad CSV task id '" + fields[1] + "'", line_start);
    }
    rec.label = static_cast<ClassIndex>(label);
    rec.task_id = static_cast<TaskIndex>(task);
    for (std::size_t i = 2; i < fields.size(); ++i) {
      double v = 0.0;
      if (!parse(fields[i], v) || !std::isfinite(v)) throw FormatError("bad CSV feature '" + fields[i] + "'", line_start);
      rec.vector.push_back(static_cast<float>(v));
    }
    if (ds.records.empty()) {
      ds.header.d_feat = static_cast<std::uint32_t>(rec.vector.size());
    } else if (rec.vector.size() != ds.header.d_feat) {
      throw FormatError("CSV row has " + std::to_string(rec.vector.size()) + " features, expected " +
                            std::to_string(ds.header.d_feat),
                        line_start);
    }
    max_label = std::max(max_label, rec.label);
    ds.records.push_back(std::move(rec));
  }
  if (ds.records.empty()) throw FormatError("CSV dataset has no records", offset);
  ds.header.num_records = ds.records.size();
  ds.header.num_classes = num_classes != 0 ? num_classes : std::max<std::uint32_t>(2, max_label + 1);
  if (max_label >= ds.header.num_classes) throw FormatError("CSV label exceeds num_classes", 0);
  validate_header(ds.header);
  return ds;
}

// Dispatches on extension: ".csv" uses the CSV reader, anything else the binary one.
inline Dataset load_dataset(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return read_csv_dataset(path);
  return read_binary_dataset(path);
}

}  // namespace aefocl

#endif  // AEFOCL_FEATURES_HPP_
