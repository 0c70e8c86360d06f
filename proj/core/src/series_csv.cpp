#include "koopid/series_csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "koopid/error.hpp"

namespace koopid {
namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t row) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw FormatError("series csv: row " + std::to_string(row) + ": bad number '" + s + "'");
  }
  return v;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  return out;
}

} // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_series_csv(std::ostream& out, const ObservableSeries& series) {
  out << 't';
  for (Index k = 0; k < series.observables(); ++k) out << ",y" << k + 1;
  for (Index k = 0; k < series.inputs(); ++k) out << ",u" << k + 1;
  out << '\n';
  for (Index i = 0; i < series.samples(); ++i) {
    out << format_double(static_cast<double>(i) * series.dt());
    for (Index k = 0; k < series.observables(); ++k) out << ',' << format_double(series.Y()(k, i));
    for (Index k = 0; k < series.inputs(); ++k) out << ',' << format_double((*series.U())(k, i));
    out << '\n';
  }
}

void write_series_csv(const std::filesystem::path& path, const ObservableSeries& series) {
  std::ofstream out = open_out(path);
  write_series_csv(out, series);
  if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

ObservableSeries read_series_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("series csv: empty input");
  const auto header = split(strip_cr(line));
  if (header.empty() || header[0] != "t") throw FormatError("series csv: first column must be 't'");
  Index m = 0, q = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string& h = header[c];
    const std::string expect_y = "y" + std::to_string(m + 1);
    const std::string expect_u = "u" + std::to_string(q + 1);
    if (q == 0 && h == expect_y) {
      ++m;
    } else if (h == expect_u) {
      ++q;
    } else {
      throw FormatError("series csv: unexpected column '" + h + "'");
    }
  }
  if (m == 0) throw FormatError("series csv: no observable columns");

  std::vector<std::vector<double>> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw FormatError("series csv: row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                        " fields, header has " + std::to_string(header.size()));
    }
    std::vector<double> v(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) v[c] = parse_double(cells[c], row);
    rows.push_back(std::move(v));
  }
  const auto n = static_cast<Index>(rows.size());
  if (n < 2) throw FormatError("series csv: need at least 2 samples");

  const double dt = rows[1][0] - rows[0][0];
  if (!(dt > 0.0)) throw FormatError("series csv: t must increase");
  for (Index i = 0; i < n; ++i) {
    const double expect = rows[0][0] + static_cast<double>(i) * dt;
    if (std::abs(rows[static_cast<std::size_t>(i)][0] - expect) > 1e-9 * std::max(1.0, std::abs(expect))) {
      throw FormatError("series csv: non-uniform sampling at row " + std::to_string(i + 2));
    }
  }

  Matrix y(m, n);
  std::optional<Matrix> u;
  if (q > 0) u = Matrix(q, n);
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (Index k = 0; k < m; ++k) y(k, i) = r[static_cast<std::size_t>(1 + k)];
    for (Index k = 0; k < q; ++k) (*u)(k, i) = r[static_cast<std::size_t>(1 + m + k)];
  }
  try {
    return ObservableSeries(std::move(y), std::move(u), dt);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("series csv: ") + e.what());
  }
}

ObservableSeries read_series_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset '" + path.string() + "'");
  return read_series_csv(in);
}

void write_table_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                     const Matrix& rows) {
  if (static_cast<Index>(header.size()) != rows.cols()) {
    throw std::invalid_argument("write_table_csv: header/column count mismatch");
  }
  std::ofstream out = open_out(path);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (Index i = 0; i < rows.rows(); ++i) {
    for (Index c = 0; c < rows.cols(); ++c) out << (c ? "," : "") << format_double(rows(i, c));
    out << '\n';
  }
  if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

} // namespace koopid
