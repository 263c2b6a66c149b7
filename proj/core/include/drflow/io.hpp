#pragma once

// Flat-file interfaces: CSV for plot-ready tables, a compact binary
// dump for flow checkpoints. All text output is locale-independent and
// formatted with max_digits10 so reruns are bitwise comparable.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "drflow/grid_measure.hpp"

namespace drflow::io {

/// Formats a double with enough digits to round-trip exactly.
std::string format_double(double x);

/// CSV with columns x,mass. A leading comment line records h and overflow.
void write_measure_csv(const GridMeasure& mu, const std::filesystem::path& path);

/// Compact binary dump: header (h, J, overflow) then the raw mass array.
void write_measure_binary(const GridMeasure& mu, const std::filesystem::path& path);
GridMeasure read_measure_binary(const std::filesystem::path& path);

void write_measure_binary(const GridMeasure& mu, std::ostream& os);
GridMeasure read_measure_binary(std::istream& is);

/// Minimal CSV writer: writes a header row then data rows.
class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void row(const std::vector<std::string>& cells);
    void comment(const std::string& text);

private:
    struct Impl;
    Impl* impl_;
    std::size_t columns_;
};

} // namespace drflow::io
