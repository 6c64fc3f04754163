#pragma once

// Bit-exact CSV emission, CSV ingestion, checksums, and run manifests.

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace torsionlab::harness {

/// Shortest decimal string that parses back to the same double.
std::string format_number(double value);

/// CSV with a header row, ',' separator, '.' decimal point, '\n' endings.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(std::initializer_list<double> values);
  void add_row(std::span<const double> values);
  /// Row with a trailing text column (for status fields).
  void add_row(std::span<const double> values, std::string_view text);

  const std::string& text() const { return text_; }
  std::size_t columns() const { return columns_; }

 private:
  std::string text_;
  std::size_t columns_;
};

struct CsvData {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Reads a numeric CSV whose header must equal `expected` exactly.
/// Throws ConfigError naming the expected header on mismatch.
CsvData read_csv(const std::filesystem::path& path, std::span<const std::string> expected);

std::string sha256_hex(std::string_view bytes);

struct Artifact {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

/// Writes `content` to dir/name and records it.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir);

  void write(const std::string& name, std::string_view content);
  const std::vector<Artifact>& artifacts() const { return artifacts_; }
  const std::filesystem::path& directory() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<Artifact> artifacts_;
};

struct RunManifest {
  std::string command;
  std::string scenario_hash;
  std::string tool_version;
  std::string started_at;   // ISO-8601 UTC
  std::string finished_at;  // ISO-8601 UTC
  std::uint64_t seed = 0;
  int exit_code = 0;
  std::vector<Artifact> artifacts;

  std::string to_json() const;
};

std::string utc_timestamp();

/// Re-hashes every artifact listed in dir/manifest.json; returns the names that differ.
std::vector<std::string> verify_manifest(const std::filesystem::path& dir);

}  // namespace torsionlab::harness
