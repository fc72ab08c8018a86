#include "fadv/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fadv/analysis.hpp"
#include "fadv/dct.hpp"

namespace fadv::io {

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

std::string format_double(double v) {
  char buf[64];
  if (v == std::floor(v) && std::fabs(v) < 9007199254740992.0) {  // 2^53: exact integer range
    std::snprintf(buf, sizeof(buf), "%.0f", v);
    return buf;
  }
  // %.17g always round-trips; prefer the shortest representation that does.
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::string csv_field(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

}  // namespace

std::string render_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  auto append_row = [&out](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += csv_field(row[i]);
    }
    out += '\n';
  };
  append_row(header);
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw std::invalid_argument("csv: row width does not match header");
    append_row(row);
  }
  return out;
}

void emit_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
              const std::vector<std::vector<std::string>>& rows) {
  write_file_atomic(path, render_csv(header, rows));
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  auto end_field = [&]() {
    row.push_back(field);
    field.clear();
  };
  auto end_row = [&]() {
    end_field();
    if (!any) {
      table.header = row;
      any = true;
    } else {
      table.rows.push_back(row);
    }
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_row();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (!field.empty() || !row.empty()) end_row();
  return table;
}

void emit_pgm(const std::filesystem::path& path, std::span<const double> values64, bool equalize) {
  if (values64.size() != static_cast<std::size_t>(dct::kBlockCoeffs)) {
    throw std::invalid_argument("pgm: expected 64 values, got " + std::to_string(values64.size()));
  }
  std::vector<double> scaled;
  if (equalize) {
    scaled = analysis::histogram_equalize(values64);
  } else {
    const auto [lo_it, hi_it] = std::minmax_element(values64.begin(), values64.end());
    const double lo = *lo_it, hi = *hi_it;
    scaled.resize(values64.size());
    for (std::size_t i = 0; i < values64.size(); ++i) {
      scaled[i] = hi > lo ? (values64[i] - lo) / (hi - lo) : 0.0;
    }
  }
  std::string bytes = "P5\n8 8\n255\n";
  std::string grid(dct::kBlockCoeffs, '\0');
  for (int z = 0; z < dct::kBlockCoeffs; ++z) {
    auto [u, v] = dct::zigzag().to_coord(z);
    const long byte = std::lround(scaled[static_cast<std::size_t>(z)] * 255.0);
    grid[u * dct::kBlock + v] = static_cast<char>(std::clamp(byte, 0L, 255L));
  }
  bytes += grid;
  write_file_atomic(path, bytes);
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
  nlohmann::json j;
  j["config_hash"] = manifest.config_hash;
  j["version"] = manifest.version;
  j["seed"] = manifest.seed;
  j["started"] = manifest.started;
  j["finished"] = manifest.finished;
  j["files"] = manifest.files;
  write_file_atomic(path, j.dump(2) + "\n");
}

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace fadv::io
