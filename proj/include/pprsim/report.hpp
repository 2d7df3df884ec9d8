#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pprsim/simulator.hpp"

namespace pprsim {

inline constexpr const char* kVersion = "0.1.0";

enum class ReportFormat { Csv, Json };

ReportFormat parse_report_format(const std::string& s);
std::string to_string(ReportFormat f);

/// Accuracy CSV columns: M,alpha,radius,hits,samples,accuracy.
std::string to_csv(const AccuracyReport& r);
/// Hop CSV columns: M,alpha,success,total,median,mean,std.
std::string to_csv(const HopReport& r);
/// Per-query CSV for a single scenario run.
std::string to_csv(const SimulationResult& r);

std::string to_json(const AccuracyReport& r);
std::string to_json(const HopReport& r);
std::string to_json(const SimulationResult& r);

struct DatasetFingerprint {
  std::string role;
  /// File path, or a description of the generator for synthetic inputs.
  std::string source;
  std::uint64_t bytes = 0;
  std::string crc32;
  bool synthetic = false;
};

/// Size and CRC-32 of a file on disk.
DatasetFingerprint fingerprint_file(const std::string& role, const std::filesystem::path& path);

struct RunManifest {
  /// Fully resolved configuration as JSON text (loadable with --config).
  std::string config_json;
  std::uint64_t seed = 0;
  std::vector<DatasetFingerprint> datasets;
  std::string version = kVersion;

  std::string to_json() const;
};

/// Path of the manifest written next to a report.
std::filesystem::path manifest_path(const std::filesystem::path& report);

/// Writes the report body and its manifest. Both go to temporary files first
/// and are renamed into place together, so a failure leaves neither behind.
void emit_report(const std::string& body, const RunManifest& manifest,
                 const std::filesystem::path& path);

}  // namespace pprsim
