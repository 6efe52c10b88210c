#ifndef RISKCAL_IO_HPP
#define RISKCAL_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "riskcal/matrix.hpp"
#include "riskcal/sim_eval.hpp"
#include "riskcal/tasks.hpp"

namespace riskcal {

// ---- regression CSV: header "id,x,y,f_hat", one row per record ----

struct RegressionTable {
  std::vector<std::int64_t> ids;
  RegressionData data;
};

void write_regression_csv(const std::string& path, const RegressionTable& t);
RegressionTable read_regression_csv(const std::string& path);

// ---- embedding file: header line "d=<int>", then "id,v1,...,vd" ----
// (the leading id is optional on read)

struct EmbeddingTable {
  std::vector<std::int64_t> ids;
  Matrix values;
};

void write_embedding_file(const std::string& path, const EmbeddingTable& t);
EmbeddingTable read_embedding_file(const std::string& path);

// ---- segmentation container: magic RCALSEG1, little-endian header
// (version u32, d1 u32, d2 u32, count u32, seed u64), then per record
// row-major float32 scores followed by row-major uint8 mask ----

struct SegContainer {
  std::uint64_t seed = 0;
  std::vector<SegmentationSample> samples;
};

void write_segmentation_container(const std::string& path,
                                  const SegContainer& c);
SegContainer read_segmentation_container(const std::string& path);

// ---- thresholds / certificate CSVs ----

struct ThresholdTable {
  std::uint64_t seed = 0;
  double alpha = 0.0;
  std::string kind;  // "aacrc" or "crc"
  std::vector<std::int64_t> ids;
  std::vector<double> thresholds;  // native orientation
};

void write_thresholds_csv(const std::string& path, const ThresholdTable& t);
ThresholdTable read_thresholds_csv(const std::string& path);

struct CertificateRow {
  std::int64_t id = 0;
  double residual = 0.0;
  bool converged = false;
  double objective = 0.0;
  int iterations = 0;
};

void write_certificate_csv(const std::string& path, std::uint64_t seed,
                           double tau,
                           const std::vector<CertificateRow>& rows);

// ---- evaluation reports ----

struct RecallBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double mean_threshold = 0.0;
  double sd_threshold = 0.0;
};

struct FileEvalReport {
  std::string task;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  std::size_t n_test = 0;
  double marginal_risk = 0.0;
  bool has_baseline = false;
  double crc_marginal_risk = 0.0;
  double recall_mean = 0.0;
  double precision_mean = 0.0;
  double crc_recall_mean = 0.0;
  double crc_precision_mean = 0.0;
  double spearman_rho = 0.0;
  double spearman_p = 1.0;
  std::vector<RecallBin> bins;  // segmentation: thresholds by recall@0.5 bin
};

void write_file_report_json(const std::string& path, const FileEvalReport& r);
void write_file_report_csv(const std::string& path, const FileEvalReport& r);

// Multi-repetition experiment report (JSON full, CSV flat per repetition).
std::string report_to_json(const EvalReport& report, std::uint64_t seed);
void write_report_json(const std::string& path, const EvalReport& report,
                       std::uint64_t seed);
void write_report_csv(const std::string& path, const EvalReport& report,
                      std::uint64_t seed);

}  // namespace riskcal

#endif
