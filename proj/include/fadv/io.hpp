#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fadv::io {

/// Write-then-rename so readers never observe a half-written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

std::string read_file(const std::filesystem::path& path);

/// Shortest decimal form that round-trips a double exactly.
std::string format_double(double v);

/// RFC-4180 style CSV: header row first, fields quoted when they contain a
/// comma, quote or newline.
std::string render_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

void emit_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
              const std::vector<std::vector<std::string>>& rows);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(const std::string& text);

/// Binary P5 PGM, 8x8, one byte per coefficient after folding the 64-vector
/// back into the (u, v) grid along the zigzag order. Values are scaled
/// linearly to 0..255 (all-equal input collapses to 0), or rank-equalized
/// first when `equalize` is set.
void emit_pgm(const std::filesystem::path& path, std::span<const double> values64, bool equalize);

/// Provenance record written next to every command's outputs.
struct RunManifest {
  std::string config_hash;
  std::string version;
  std::uint64_t seed = 0;
  std::string started;
  std::string finished;
  std::vector<std::string> files;
};

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

std::string iso8601_now();

inline constexpr const char* kToolkitVersion = "0.1.0";

}  // namespace fadv::io
