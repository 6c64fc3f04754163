#include "harness/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "torsionlab/errors.hpp"

namespace torsionlab::harness {

std::string format_number(double value) {
  if (value == 0.0) return "0";  // folds -0
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) text_ += ',';
    text_ += header[i];
  }
  text_ += '\n';
}

void CsvTable::add_row(std::initializer_list<double> values) {
  add_row(std::span<const double>(values.begin(), values.size()));
}

void CsvTable::add_row(std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) text_ += ',';
    text_ += format_number(values[i]);
  }
  text_ += '\n';
}

void CsvTable::add_row(std::span<const double> values, std::string_view text) {
  for (double v : values) {
    text_ += format_number(v);
    text_ += ',';
  }
  text_ += text;
  text_ += '\n';
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

std::string join(std::span<const std::string> cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) s += ',';
    s += cells[i];
  }
  return s;
}

}  // namespace

CsvData read_csv(const std::filesystem::path& path, std::span<const std::string> expected) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV file '" + path.string() + "'");
  CsvData data;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("CSV file '" + path.string() + "' is empty");
  data.header = split(line);
  if (!std::equal(data.header.begin(), data.header.end(), expected.begin(), expected.end())) {
    throw ConfigError("CSV schema error in '" + path.string() + "': expected header '" +
                      join(expected) + "', found '" + join(data.header) + "'");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != expected.size()) {
      throw ConfigError("CSV row has " + std::to_string(cells.size()) + " columns, expected " +
                            std::to_string(expected.size()),
                        line_no, 1);
    }
    std::vector<double> row;
    int column = 1;
    for (const auto& c : cells) {
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size()) {
        throw ConfigError("CSV value '" + c + "' is not a number", line_no, column);
      }
      row.push_back(v);
      column += static_cast<int>(c.size()) + 1;
    }
    data.rows.push_back(std::move(row));
  }
  return data;
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

ArtifactWriter::ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

void ArtifactWriter::write(const std::string& name, std::string_view content) {
  const auto path = dir_ / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("short write to '" + path.string() + "'");
  artifacts_.push_back({name, sha256_hex(content), content.size()});
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["tool"] = "torsionlab";
  j["tool_version"] = tool_version;
  j["command"] = command;
  j["scenario_hash"] = scenario_hash;
  j["seed"] = seed;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  j["exit_code"] = exit_code;
  j["artifacts"] = nlohmann::json::array();
  for (const auto& a : artifacts) {
    j["artifacts"].push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
  }
  return j.dump(2) + "\n";
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::array<char, 32> buf{};
  std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf.data();
}

std::vector<std::string> verify_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("no manifest.json in '" + dir.string() + "'");
  const auto j = nlohmann::json::parse(in);
  std::vector<std::string> bad;
  for (const auto& a : j.at("artifacts")) {
    const std::string name = a.at("path");
    std::ifstream f(dir / name, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    if (!f || sha256_hex(ss.str()) != a.at("sha256").get<std::string>()) bad.push_back(name);
  }
  return bad;
}

}  // namespace torsionlab::harness
