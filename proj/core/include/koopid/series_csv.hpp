#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "koopid/numerics.hpp"
#include "koopid/series.hpp"

namespace koopid {

// Series CSV: header `t,y1..ym[,u1..uq]`, one row per sample, every value
// printed with 17 significant digits so that reading it back is exact.

std::string format_double(double v);

void write_series_csv(std::ostream& out, const ObservableSeries& series);
void write_series_csv(const std::filesystem::path& path, const ObservableSeries& series);

/// Parses a series CSV; dt is t(1) - t(0) and the t column must be uniform.
/// Throws FormatError on malformed input.
ObservableSeries read_series_csv(std::istream& in);
ObservableSeries read_series_csv(const std::filesystem::path& path);

/// Generic result table: header line, then one row per matrix row.
void write_table_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                     const Matrix& rows);

} // namespace koopid
