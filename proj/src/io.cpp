#include "riskcal/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "riskcal/errors.hpp"

namespace riskcal {

namespace {

using json = nlohmann::json;

constexpr char kSegMagic[8] = {'R', 'C', 'A', 'L', 'S', 'E', 'G', '1'};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for reading: " + path);
  return in;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("bad number '" + s + "' in " + where);
  }
}

std::int64_t parse_id(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("bad id '" + s + "' in " + where);
  }
}

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_raw(std::ifstream& in, T& v, const std::string& path) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated file: " + path);
}

}  // namespace

void write_regression_csv(const std::string& path, const RegressionTable& t) {
  std::ofstream out = open_out(path);
  out << "id,x,y,f_hat\n";
  for (std::size_t i = 0; i < t.ids.size(); ++i)
    out << t.ids[i] << ',' << fmt(t.data.x[i]) << ',' << fmt(t.data.y[i])
        << ',' << fmt(t.data.f_hat[i]) << '\n';
}

RegressionTable read_regression_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line))
    throw DataError("empty regression CSV: " + path);
  if (split_csv(line) != std::vector<std::string>{"id", "x", "y", "f_hat"})
    throw DataError("unrecognized regression CSV header in " + path);
  RegressionTable t;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 4)
      throw DataError("malformed regression CSV row in " + path);
    t.ids.push_back(parse_id(cells[0], path));
    t.data.x.push_back(parse_double(cells[1], path));
    t.data.y.push_back(parse_double(cells[2], path));
    t.data.f_hat.push_back(parse_double(cells[3], path));
  }
  if (t.ids.empty()) throw DataError("no rows in regression CSV: " + path);
  return t;
}

void write_embedding_file(const std::string& path, const EmbeddingTable& t) {
  if (t.ids.size() != t.values.rows)
    throw DataError("embedding table: id/row count mismatch");
  std::ofstream out = open_out(path);
  out << "d=" << t.values.cols << '\n';
  for (std::size_t i = 0; i < t.values.rows; ++i) {
    out << t.ids[i];
    for (double v : t.values.row(i)) out << ',' << fmt(v);
    out << '\n';
  }
}

EmbeddingTable read_embedding_file(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty embedding file: " + path);
  if (line.size() > 0 && line.back() == '\r') line.pop_back();
  if (line.rfind("d=", 0) != 0)
    throw DataError("embedding file must start with 'd=<int>': " + path);
  const int d = static_cast<int>(parse_id(line.substr(2), path));
  if (d <= 0) throw DataError("bad embedding dimension in " + path);

  std::vector<std::int64_t> ids;
  std::vector<double> flat;
  bool with_id = false;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (rows == 0) {
      if (cells.size() == static_cast<std::size_t>(d) + 1)
        with_id = true;
      else if (cells.size() != static_cast<std::size_t>(d))
        throw DataError("embedding row width mismatch in " + path);
    } else if (cells.size() != static_cast<std::size_t>(d) + (with_id ? 1 : 0)) {
      throw DataError("embedding row width mismatch in " + path);
    }
    if (with_id)
      ids.push_back(parse_id(cells[0], path));
    else
      ids.push_back(static_cast<std::int64_t>(rows));
    for (std::size_t c = with_id ? 1 : 0; c < cells.size(); ++c)
      flat.push_back(parse_double(cells[c], path));
    ++rows;
  }
  if (rows == 0) throw DataError("no embedding rows in " + path);
  EmbeddingTable t;
  t.ids = std::move(ids);
  t.values = Matrix(rows, static_cast<std::size_t>(d));
  t.values.data = std::move(flat);
  return t;
}

void write_segmentation_container(const std::string& path,
                                  const SegContainer& c) {
  if (c.samples.empty()) throw DataError("segmentation container: no samples");
  const std::uint32_t d1 = static_cast<std::uint32_t>(c.samples[0].d1);
  const std::uint32_t d2 = static_cast<std::uint32_t>(c.samples[0].d2);
  std::ofstream out = open_out(path);
  out.write(kSegMagic, sizeof(kSegMagic));
  write_raw(out, std::uint32_t{1});
  write_raw(out, d1);
  write_raw(out, d2);
  write_raw(out, static_cast<std::uint32_t>(c.samples.size()));
  write_raw(out, c.seed);
  for (const SegmentationSample& s : c.samples) {
    if (s.d1 != d1 || s.d2 != d2)
      throw DataError("segmentation container: inconsistent image sizes");
    out.write(reinterpret_cast<const char*>(s.scores.data()),
              static_cast<std::streamsize>(s.scores.size() * sizeof(float)));
    out.write(reinterpret_cast<const char*>(s.mask.data()),
              static_cast<std::streamsize>(s.mask.size()));
  }
}

SegContainer read_segmentation_container(const std::string& path) {
  std::ifstream in = open_in(path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kSegMagic, sizeof(magic)) != 0)
    throw DataError("not a segmentation container: " + path);
  std::uint32_t version = 0, d1 = 0, d2 = 0, count = 0;
  read_raw(in, version, path);
  if (version != 1)
    throw DataError("unsupported segmentation container version in " + path);
  read_raw(in, d1, path);
  read_raw(in, d2, path);
  read_raw(in, count, path);
  SegContainer c;
  read_raw(in, c.seed, path);
  if (count == 0 || d1 == 0 || d2 == 0)
    throw DataError("degenerate segmentation container: " + path);
  c.samples.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    SegmentationSample& s = c.samples[i];
    s.d1 = d1;
    s.d2 = d2;
    s.scores.resize(static_cast<std::size_t>(d1) * d2);
    s.mask.resize(static_cast<std::size_t>(d1) * d2);
    in.read(reinterpret_cast<char*>(s.scores.data()),
            static_cast<std::streamsize>(s.scores.size() * sizeof(float)));
    in.read(reinterpret_cast<char*>(s.mask.data()),
            static_cast<std::streamsize>(s.mask.size()));
    if (!in) throw DataError("truncated segmentation container: " + path);
  }
  return c;
}

void write_thresholds_csv(const std::string& path, const ThresholdTable& t) {
  if (t.ids.size() != t.thresholds.size())
    throw DataError("threshold table: id/value count mismatch");
  std::ofstream out = open_out(path);
  out << "# riskcal-thresholds v1 seed=" << t.seed << " alpha=" << fmt(t.alpha)
      << " kind=" << t.kind << '\n';
  out << "id,threshold\n";
  for (std::size_t i = 0; i < t.ids.size(); ++i)
    out << t.ids[i] << ',' << fmt(t.thresholds[i]) << '\n';
}

ThresholdTable read_thresholds_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) ||
      line.rfind("# riskcal-thresholds v1 ", 0) != 0)
    throw DataError("unrecognized thresholds file: " + path);
  ThresholdTable t;
  {
    std::istringstream hdr(line.substr(2));
    std::string tok;
    while (hdr >> tok) {
      if (tok.rfind("seed=", 0) == 0)
        t.seed = static_cast<std::uint64_t>(std::stoull(tok.substr(5)));
      else if (tok.rfind("alpha=", 0) == 0)
        t.alpha = parse_double(tok.substr(6), path);
      else if (tok.rfind("kind=", 0) == 0)
        t.kind = tok.substr(5);
    }
  }
  if (!std::getline(in, line) || split_csv(line) !=
                                     std::vector<std::string>{"id", "threshold"})
    throw DataError("bad thresholds header row in " + path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 2) throw DataError("malformed thresholds row in " + path);
    t.ids.push_back(parse_id(cells[0], path));
    t.thresholds.push_back(parse_double(cells[1], path));
  }
  if (t.ids.empty()) throw DataError("no rows in thresholds file: " + path);
  return t;
}

void write_certificate_csv(const std::string& path, std::uint64_t seed,
                           double tau,
                           const std::vector<CertificateRow>& rows) {
  std::ofstream out = open_out(path);
  out << "# riskcal-certificate v1 seed=" << seed << " tau=" << fmt(tau)
      << '\n';
  out << "id,residual,converged,objective,iterations\n";
  for (const CertificateRow& r : rows)
    out << r.id << ',' << fmt(r.residual) << ',' << (r.converged ? 1 : 0)
        << ',' << fmt(r.objective) << ',' << r.iterations << '\n';
}

namespace {

json bins_to_json(const std::vector<RecallBin>& bins) {
  json arr = json::array();
  for (const RecallBin& b : bins)
    arr.push_back({{"lo", b.lo},
                   {"hi", b.hi},
                   {"count", b.count},
                   {"mean_threshold", b.mean_threshold},
                   {"sd_threshold", b.sd_threshold}});
  return arr;
}

double clean(double v) { return std::isfinite(v) ? v : 0.0; }

}  // namespace

void write_file_report_json(const std::string& path, const FileEvalReport& r) {
  json j;
  j["format"] = "riskcal-report";
  j["version"] = 1;
  j["seed"] = r.seed;
  j["task"] = r.task;
  j["alpha"] = r.alpha;
  j["n_test"] = r.n_test;
  j["marginal_risk"] = r.marginal_risk;
  if (r.has_baseline) j["crc_marginal_risk"] = r.crc_marginal_risk;
  if (r.task == "segmentation") {
    j["recall_mean"] = r.recall_mean;
    j["precision_mean"] = r.precision_mean;
    if (r.has_baseline) {
      j["crc_recall_mean"] = r.crc_recall_mean;
      j["crc_precision_mean"] = r.crc_precision_mean;
    }
    j["spearman_rho"] = clean(r.spearman_rho);
    j["spearman_p"] = clean(r.spearman_p);
    j["recall_bins"] = bins_to_json(r.bins);
  }
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_file_report_csv(const std::string& path, const FileEvalReport& r) {
  std::ofstream out = open_out(path);
  out << "# riskcal-report v1 seed=" << r.seed << '\n';
  out << "metric,value\n";
  out << "n_test," << r.n_test << '\n';
  out << "alpha," << fmt(r.alpha) << '\n';
  out << "marginal_risk," << fmt(r.marginal_risk) << '\n';
  if (r.has_baseline)
    out << "crc_marginal_risk," << fmt(r.crc_marginal_risk) << '\n';
  if (r.task == "segmentation") {
    out << "recall_mean," << fmt(r.recall_mean) << '\n';
    out << "precision_mean," << fmt(r.precision_mean) << '\n';
    if (r.has_baseline) {
      out << "crc_recall_mean," << fmt(r.crc_recall_mean) << '\n';
      out << "crc_precision_mean," << fmt(r.crc_precision_mean) << '\n';
    }
    out << "spearman_rho," << fmt(clean(r.spearman_rho)) << '\n';
    out << "spearman_p," << fmt(clean(r.spearman_p)) << '\n';
    for (const RecallBin& b : r.bins)
      out << "bin_" << fmt(b.lo) << '_' << fmt(b.hi) << ',' << b.count << ';'
          << fmt(b.mean_threshold) << ';' << fmt(b.sd_threshold) << '\n';
  }
}

std::string report_to_json(const EvalReport& report, std::uint64_t seed) {
  json j;
  j["format"] = "riskcal-experiment";
  j["version"] = 1;
  j["seed"] = seed;
  json reps = json::array();
  for (const RepetitionRecord& r : report.reps) {
    json jr;
    jr["ok"] = r.ok;
    if (!r.ok) jr["error"] = r.error;
    jr["marginal_risk"] = clean(r.marginal_risk);
    jr["crc_marginal_risk"] = clean(r.crc_marginal_risk);
    jr["recall_mean"] = clean(r.recall_mean);
    jr["precision_mean"] = clean(r.precision_mean);
    jr["crc_recall_mean"] = clean(r.crc_recall_mean);
    jr["crc_precision_mean"] = clean(r.crc_precision_mean);
    jr["spearman_rho"] = clean(r.spearman_rho);
    jr["spearman_p"] = clean(r.spearman_p);
    jr["fit_count"] = r.fit_count;
    jr["converged_count"] = r.converged_count;
    jr["max_residual"] = clean(r.max_residual);
    json groups = json::object();
    for (const auto& [g, gr] : r.per_group)
      groups[std::to_string(g)] = {{"risk", gr.risk}, {"count", gr.count}};
    jr["per_group"] = std::move(groups);
    jr["tilted_risks"] = r.tilted_risks;
    reps.push_back(std::move(jr));
  }
  j["repetitions"] = std::move(reps);
  json aggs = json::object();
  for (const auto& [name, agg] : report.aggregates)
    aggs[name] = {{"mean", clean(agg.mean)},
                  {"sd", clean(agg.sd)},
                  {"count", agg.count}};
  j["aggregates"] = std::move(aggs);
  return j.dump(2);
}

void write_report_json(const std::string& path, const EvalReport& report,
                       std::uint64_t seed) {
  std::ofstream out = open_out(path);
  out << report_to_json(report, seed) << '\n';
}

void write_report_csv(const std::string& path, const EvalReport& report,
                      std::uint64_t seed) {
  std::ofstream out = open_out(path);
  out << "# riskcal-experiment v1 seed=" << seed << '\n';
  out << "rep,ok,marginal_risk,crc_marginal_risk,recall_mean,precision_mean,"
         "crc_recall_mean,crc_precision_mean,spearman_rho,spearman_p,"
         "fit_count,converged_count,max_residual\n";
  for (std::size_t i = 0; i < report.reps.size(); ++i) {
    const RepetitionRecord& r = report.reps[i];
    out << i << ',' << (r.ok ? 1 : 0) << ',' << fmt(clean(r.marginal_risk))
        << ',' << fmt(clean(r.crc_marginal_risk)) << ','
        << fmt(clean(r.recall_mean)) << ',' << fmt(clean(r.precision_mean))
        << ',' << fmt(clean(r.crc_recall_mean)) << ','
        << fmt(clean(r.crc_precision_mean)) << ','
        << fmt(clean(r.spearman_rho)) << ',' << fmt(clean(r.spearman_p))
        << ',' << r.fit_count << ',' << r.converged_count << ','
        << fmt(clean(r.max_residual)) << '\n';
  }
}

}  // namespace riskcal
