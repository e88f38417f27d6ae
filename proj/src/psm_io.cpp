#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lpshrink/io.hpp"
#include "lpshrink/spectral_core.hpp"

namespace lpshrink {
namespace io {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.emplace_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

namespace {

double parse_double(const std::string& field, const std::filesystem::path& path,
                    int line_no) {
  double value = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw IoError(path.string() + ":" + std::to_string(line_no) +
                  ": not a number: '" + field + "'");
  }
  return value;
}

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path,
                                                std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool have_header = false;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (!have_header) {
      header = split(t, ',');
      have_header = true;
      continue;
    }
    rows.push_back(split(t, ','));
  }
  if (!have_header) throw IoError(path.string() + ": empty CSV file");
  return rows;
}

}  // namespace

std::vector<double> read_csv_column(const std::filesystem::path& path,
                                    std::string_view column) {
  std::vector<std::string> header;
  const auto rows = read_rows(path, header);
  std::ptrdiff_t col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == column) col = static_cast<std::ptrdiff_t>(i);
  }
  if (col < 0) {
    throw IoError(path.string() + ": missing column '" + std::string(column) + "'");
  }
  std::vector<double> out;
  out.reserve(rows.size());
  int line_no = 2;
  for (const auto& r : rows) {
    if (static_cast<std::ptrdiff_t>(r.size()) <= col) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": short row");
    }
    out.push_back(parse_double(r[static_cast<std::size_t>(col)], path, line_no));
    ++line_no;
  }
  return out;
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create directory " + dir.string() +
                  (ec ? ": " + ec.message() : std::string()));
  }
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) ensure_directory(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace io

PopulationSpectralMeasure load_psm_csv(const std::filesystem::path& path) {
  const auto taus = io::read_csv_column(path, "tau");
  auto weights = io::read_csv_column(path, "weight");
  if (taus.empty()) throw IoError(path.string() + ": no atoms");
  double total = 0.0;
  for (double w : weights) total += w;
  if (std::abs(total - 1.0) > 1e-6) {
    throw DomainError(path.string() + ": weights sum to " + io::format_double(total) +
                      ", not 1 within 1e-6");
  }
  std::vector<PopulationSpectralMeasure::Atom> atoms;
  atoms.reserve(taus.size());
  for (std::size_t i = 0; i < taus.size(); ++i) {
    atoms.push_back({taus[i], weights[i] / total});
  }
  // Renormalize once more so the 1e-12 invariant holds after division.
  double again = 0.0;
  for (const auto& a : atoms) again += a.weight;
  for (auto& a : atoms) a.weight /= again;
  return PopulationSpectralMeasure(std::move(atoms));
}

void write_psm_csv(const PopulationSpectralMeasure& psm,
                   const std::filesystem::path& path) {
  std::string text = "tau,weight\n";
  for (const auto& a : psm.atoms()) {
    text += io::format_double(a.tau) + "," + io::format_double(a.weight) + "\n";
  }
  io::write_text(path, text);
}

}  // namespace lpshrink
