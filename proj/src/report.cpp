#include "pprsim/report.hpp"

#include <zlib.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "json.hpp"

namespace pprsim {

namespace {

std::string fixed4(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

// JSON numbers carry the same 4-decimal rounding as the CSV.
nlohmann::json num4(double x) { return std::stod(fixed4(x)); }

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
  out.close();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  throw std::invalid_argument("unknown report format '" + s + "' (expected csv|json)");
}

std::string to_string(ReportFormat f) { return f == ReportFormat::Csv ? "csv" : "json"; }

std::string to_csv(const AccuracyReport& r) {
  std::ostringstream out;
  out << "M,alpha,radius,hits,samples,accuracy\n";
  for (const auto& c : r.cells) {
    out << c.documents << ',' << fixed4(c.alpha) << ',' << c.radius << ',' << c.hits << ','
        << c.samples << ',' << fixed4(c.accuracy()) << '\n';
  }
  return out.str();
}

std::string to_csv(const HopReport& r) {
  std::ostringstream out;
  out << "M,alpha,success,total,median,mean,std\n";
  for (const auto& row : r.rows) {
    out << row.documents << ',' << fixed4(row.alpha) << ',' << row.success << ',' << row.total;
    if (row.hops) {
      out << ',' << row.hops->median << ',' << fixed4(row.hops->mean) << ','
          << fixed4(row.hops->stddev);
    } else {
      out << ",,,";
    }
    out << '\n';
  }
  return out.str();
}

std::string to_csv(const SimulationResult& r) {
  std::ostringstream out;
  out << "query,origin,success,first_hit_hop,forward_hops,backtrack_hops\n";
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const auto& q = r.records[i];
    out << i << ',' << q.origin << ',' << (q.success ? 1 : 0) << ',';
    if (q.first_hit_hop) out << *q.first_hit_hop;
    out << ',' << q.forward_hops << ',' << q.backtrack_hops << '\n';
  }
  return out.str();
}

std::string to_json(const AccuracyReport& r) {
  auto cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"M", c.documents},
                     {"alpha", num4(c.alpha)},
                     {"radius", c.radius},
                     {"hits", c.hits},
                     {"samples", c.samples},
                     {"accuracy", num4(c.accuracy())}});
  }
  return nlohmann::json{{"experiment", "accuracy"}, {"cells", cells}}.dump(2) + "\n";
}

std::string to_json(const HopReport& r) {
  auto rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json j = {{"M", row.documents},
                        {"alpha", num4(row.alpha)},
                        {"success", row.success},
                        {"total", row.total},
                        {"median", nullptr},
                        {"mean", nullptr},
                        {"std", nullptr}};
    if (row.hops) {
      j["median"] = row.hops->median;
      j["mean"] = num4(row.hops->mean);
      j["std"] = num4(row.hops->stddev);
    }
    rows.push_back(j);
  }
  return nlohmann::json{{"experiment", "hops"}, {"rows", rows}}.dump(2) + "\n";
}

std::string to_json(const SimulationResult& r) {
  auto queries = nlohmann::json::array();
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const auto& q = r.records[i];
    queries.push_back({{"query", i},
                       {"origin", q.origin},
                       {"success", q.success},
                       {"first_hit_hop", q.first_hit_hop ? nlohmann::json(*q.first_hit_hop) : nlohmann::json()},
                       {"forward_hops", q.forward_hops},
                       {"backtrack_hops", q.backtrack_hops}});
  }
  nlohmann::json stats = {{"ticks", r.stats.ticks},
                          {"forwards", r.stats.forwards},
                          {"backtracks", r.stats.backtracks},
                          {"deliveries", r.stats.deliveries},
                          {"diffusion_iterations", r.stats.diffusion_iterations}};
  return nlohmann::json{{"experiment", "scenario"}, {"queries", queries}, {"stats", stats}}.dump(2) +
         "\n";
}

DatasetFingerprint fingerprint_file(const std::string& role, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string() + " for fingerprinting");
  uLong crc = crc32(0L, Z_NULL, 0);
  std::uint64_t bytes = 0;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = in.gcount();
    if (got <= 0) break;
    crc = crc32(crc, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(got));
    bytes += static_cast<std::uint64_t>(got);
  }
  char hex[16];
  std::snprintf(hex, sizeof hex, "%08lx", static_cast<unsigned long>(crc));
  return {role, path.string(), bytes, hex, false};
}

std::string RunManifest::to_json() const {
  auto sets = nlohmann::json::array();
  for (const auto& d : datasets) {
    nlohmann::json j = {{"role", d.role}, {"source", d.source}, {"synthetic", d.synthetic}};
    if (!d.synthetic) {
      j["bytes"] = d.bytes;
      j["crc32"] = d.crc32;
    }
    sets.push_back(j);
  }
  nlohmann::json j = {{"artifact", "pprsim"},
                      {"version", version},
                      {"seed", seed},
                      {"config", nlohmann::json::parse(config_json)},
                      {"datasets", sets}};
  return j.dump(2) + "\n";
}

std::filesystem::path manifest_path(const std::filesystem::path& report) {
  auto p = report;
  p += ".manifest.json";
  return p;
}

void emit_report(const std::string& body, const RunManifest& manifest,
                 const std::filesystem::path& path) {
  const auto manifest_file = manifest_path(path);
  auto tmp_report = path;
  tmp_report += ".tmp";
  auto tmp_manifest = manifest_file;
  tmp_manifest += ".tmp";
  std::error_code ignore;
  try {
    write_file(tmp_report, body);
    write_file(tmp_manifest, manifest.to_json());
    std::filesystem::rename(tmp_report, path);
    std::filesystem::rename(tmp_manifest, manifest_file);
  } catch (...) {
    std::filesystem::remove(tmp_report, ignore);
    std::filesystem::remove(tmp_manifest, ignore);
    // A renamed report without its manifest would break the pairing.
    if (!std::filesystem::exists(manifest_file, ignore)) std::filesystem::remove(path, ignore);
    throw;
  }
}

}  // namespace pprsim
