#include "drflow/io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace drflow::io {

std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x,
                                   std::chars_format::general,
                                   std::numeric_limits<double>::max_digits10);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

void write_measure_csv(const GridMeasure& mu, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string());
    os << "# h=" << format_double(mu.step()) << " overflow=" << format_double(mu.overflow())
       << "\n";
    os << "x,mass\n";
    for (std::size_t j = 0; j < mu.sites(); ++j) {
        os << format_double(mu.site_x(j)) << ',' << format_double(mu.mass_at(j)) << '\n';
    }
}

namespace {
constexpr char kMeasureMagic[4] = {'D', 'R', 'G', 'M'};

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("truncated measure dump");
    return v;
}
} // namespace

void write_measure_binary(const GridMeasure& mu, std::ostream& os) {
    os.write(kMeasureMagic, 4);
    put(os, mu.step());
    put<std::uint64_t>(os, mu.sites() - 1);  // J
    put(os, mu.overflow());
    os.write(reinterpret_cast<const char*>(mu.masses().data()),
             static_cast<std::streamsize>(mu.sites() * sizeof(double)));
}

GridMeasure read_measure_binary(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMeasureMagic, 4) != 0) {
        throw std::runtime_error("not a measure dump");
    }
    const double h = get<double>(is);
    const auto cells = get<std::uint64_t>(is);
    const double overflow = get<double>(is);
    std::vector<double> w(cells + 1);
    is.read(reinterpret_cast<char*>(w.data()),
            static_cast<std::streamsize>(w.size() * sizeof(double)));
    if (!is) throw std::runtime_error("truncated measure dump");
    return GridMeasure(h, std::move(w), overflow);
}

void write_measure_binary(const GridMeasure& mu, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string());
    write_measure_binary(mu, os);
}

GridMeasure read_measure_binary(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    return read_measure_binary(is);
}

struct CsvWriter::Impl {
    std::ofstream os;
};

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
    : impl_(new Impl), columns_(columns.size()) {
    impl_->os.open(path);
    if (!impl_->os) {
        delete impl_;
        throw std::runtime_error("cannot open " + path.string());
    }
    for (std::size_t i = 0; i < columns.size(); ++i) {
        impl_->os << columns[i] << (i + 1 < columns.size() ? "," : "\n");
    }
}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw std::runtime_error("CSV row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        impl_->os << cells[i] << (i + 1 < cells.size() ? "," : "\n");
    }
}

void CsvWriter::comment(const std::string& text) { impl_->os << "# " << text << "\n"; }

} // namespace drflow::io
