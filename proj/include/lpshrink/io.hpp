#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lpshrink::io {

/// 17 significant digits; round-trips every finite double.
std::string format_double(double x);

/// Reads one named numeric column from a headered CSV file.
std::vector<double> read_csv_column(const std::filesystem::path& path,
                                    std::string_view column);

/// Writes `text` to `path`, creating parent directories. IoError names the
/// path on failure.
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

/// Creates the directory (and parents) or throws IoError naming it.
void ensure_directory(const std::filesystem::path& dir);

std::vector<std::string> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

}  // namespace lpshrink::io
