// data_io.hpp
//
// fvecs / bvecs / CSV readers and writers, plus the ground-truth CSV.
//
//   fvecs record: [int32 d][d x float32]   (little-endian)
//   bvecs record: [int32 d][d x uint8]
//
// Hamming data travels through bvecs as one byte per coordinate holding 0 or
// 1. Real-valued metrics read bvecs bytes as their integer values.
#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cslsh/core.hpp"

namespace cslsh {

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw input_error("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw input_error("write to '" + path + "' failed");
}

inline std::uint32_t load_u32le(const unsigned char* p) noexcept {
    return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
}

inline void store_u32le(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<unsigned char>(v >> s));
}

/// Splits a vecs file into records of `elem` bytes per coordinate; calls
/// `emit(offset_of_payload, d)` per record.
template <class Emit>
std::size_t scan_vecs(const std::vector<unsigned char>& bytes, std::size_t elem, Emit&& emit) {
    if (bytes.empty()) throw format_error("empty file: a dataset needs at least one record", 0);
    std::size_t pos = 0, dim = 0, records = 0;
    while (pos < bytes.size()) {
        if (bytes.size() - pos < 4) throw format_error("truncated record header", pos);
        const auto d = static_cast<std::int32_t>(load_u32le(&bytes[pos]));
        if (d <= 0) throw format_error("record dimension must be positive, got " + std::to_string(d), pos);
        if (records == 0) dim = static_cast<std::size_t>(d);
        if (static_cast<std::size_t>(d) != dim)
            throw format_error("record dimension " + std::to_string(d) + " differs from " + std::to_string(dim), pos);
        const std::size_t need = dim * elem;
        if (bytes.size() - pos - 4 < need) throw format_error("truncated record payload", pos + 4);
        emit(pos + 4, dim);
        pos += 4 + need;
        ++records;
    }
    return dim;
}

}  // namespace detail

/// Reads an fvecs file into a real-valued dataset (Euclidean or angular).
inline Dataset load_fvecs(const std::string& path, Metric metric = Metric::euclidean) {
    if (metric == Metric::hamming) throw input_error("fvecs holds real vectors; use bvecs for Hamming data");
    const auto bytes = detail::read_file(path);
    std::vector<float> values;
    const std::size_t dim = detail::scan_vecs(bytes, 4, [&](std::size_t off, std::size_t d) {
        for (std::size_t k = 0; k < d; ++k)
            values.push_back(std::bit_cast<float>(detail::load_u32le(&bytes[off + 4 * k])));
    });
    return Dataset::from_reals(metric, dim, std::move(values));
}

inline Dataset load_bvecs(const std::string& path, Metric metric = Metric::hamming) {
    const auto bytes = detail::read_file(path);
    std::vector<std::uint64_t> words;
    std::vector<float> values;
    std::size_t wpp = 0;
    const std::size_t dim = detail::scan_vecs(bytes, 1, [&](std::size_t off, std::size_t d) {
        if (metric != Metric::hamming) {
            for (std::size_t k = 0; k < d; ++k) values.push_back(static_cast<float>(bytes[off + k]));
            return;
        }
        wpp = words_for_bits(d);
        const std::size_t base = words.size();
        words.resize(base + wpp, 0);
        for (std::size_t k = 0; k < d; ++k) {
            const unsigned char b = bytes[off + k];
            if (b > 1) throw format_error("Hamming bvecs bytes must be 0 or 1", off + k);
            words[base + (k >> 6)] |= std::uint64_t{b} << (k & 63);
        }
    });
    if (metric == Metric::hamming) return Dataset::from_bits(dim, std::move(words));
    return Dataset::from_reals(metric, dim, std::move(values));
}

inline void write_fvecs(const std::string& path, const Dataset& data) {
    if (data.is_binary()) throw input_error("fvecs cannot hold bit vectors");
    std::vector<unsigned char> out;
    out.reserve(data.size() * (4 + 4 * data.dim()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        detail::store_u32le(out, static_cast<std::uint32_t>(data.dim()));
        for (float v : data.point(i).reals) detail::store_u32le(out, std::bit_cast<std::uint32_t>(v));
    }
    detail::write_file(path, out);
}

/// Hamming data as 0/1 bytes; real data only when every value is an integer in [0, 255].
inline void write_bvecs(const std::string& path, const Dataset& data) {
    std::vector<unsigned char> out;
    out.reserve(data.size() * (4 + data.dim()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        detail::store_u32le(out, static_cast<std::uint32_t>(data.dim()));
        const auto p = data.point(i);
        for (std::size_t k = 0; k < data.dim(); ++k) {
            if (data.is_binary()) {
                out.push_back(p.bit(k) ? 1 : 0);
                continue;
            }
            const float v = p.reals[k];
            if (!(v >= 0 && v <= 255 && v == static_cast<float>(static_cast<int>(v))))
                throw input_error("bvecs can only hold integer values in [0, 255]");
            out.push_back(static_cast<unsigned char>(v));
        }
    }
    detail::write_file(path, out);
}

/// One point per row, comma separated. Hamming cells must be 0 or 1.
inline Dataset parse_csv(std::string_view text, Metric metric, bool header = false) {
    std::vector<std::uint64_t> words;
    std::vector<float> values;
    std::size_t dim = 0, row = 0, points = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const std::size_t this_row = row++;
        if (header && this_row == 0) continue;
        if (line.empty()) continue;
        std::vector<float> cells;
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = line.find(',', start);
            std::string_view cell = line.substr(start, comma == std::string_view::npos ? line.size() - start : comma - start);
            while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
            while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
            float v = 0;
            const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || ec != std::errc{} || end != cell.data() + cell.size())
                throw format_error("row " + std::to_string(this_row) + ": non-numeric cell '" + std::string(cell) + "'",
                                   this_row);
            cells.push_back(v);
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (points == 0) dim = cells.size();
        if (cells.size() != dim)
            throw format_error("row " + std::to_string(this_row) + ": expected " + std::to_string(dim) + " cells, got " +
                                   std::to_string(cells.size()),
                               this_row);
        if (metric == Metric::hamming) {
            const std::size_t base = words.size();
            words.resize(base + words_for_bits(dim), 0);
            for (std::size_t k = 0; k < dim; ++k) {
                if (cells[k] != 0 && cells[k] != 1)
                    throw format_error("row " + std::to_string(this_row) + ": Hamming cells must be 0 or 1", this_row);
                if (cells[k] == 1) words[base + (k >> 6)] |= std::uint64_t{1} << (k & 63);
            }
        } else {
            values.insert(values.end(), cells.begin(), cells.end());
        }
        ++points;
    }
    if (points == 0) throw format_error("CSV contains no points", 0);
    if (metric == Metric::hamming) return Dataset::from_bits(dim, std::move(words));
    return Dataset::from_reals(metric, dim, std::move(values));
}

inline Dataset load_csv(const std::string& path, Metric metric, bool header = false) {
    const auto bytes = detail::read_file(path);
    return parse_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), metric, header);
}

inline std::string to_csv(const Dataset& data) {
    std::ostringstream out;
    out.precision(9);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto p = data.point(i);
        for (std::size_t k = 0; k < data.dim(); ++k) {
            if (k) out << ',';
            if (data.is_binary()) out << (p.bit(k) ? '1' : '0');
            else out << p.reals[k];
        }
        out << '\n';
    }
    return out.str();
}

inline void write_csv(const std::string& path, const Dataset& data) {
    const std::string s = to_csv(data);
    detail::write_file(path, {s.begin(), s.end()});
}

/// Loads by extension: .fvecs, .bvecs, .csv.
inline Dataset load_dataset(const std::string& path, Metric metric) {
    auto ends_with = [&](std::string_view ext) {
        return path.size() >= ext.size() && path.compare(path.size() - ext.size(), ext.size(), ext) == 0;
    };
    if (ends_with(".fvecs")) return load_fvecs(path, metric);
    if (ends_with(".bvecs")) return load_bvecs(path, metric);
    if (ends_with(".csv")) return load_csv(path, metric);
    throw input_error("unknown dataset extension for '" + path + "' (expected .fvecs, .bvecs or .csv)");
}

inline void save_dataset(const std::string& path, const Dataset& data) {
    auto ends_with = [&](std::string_view ext) {
        return path.size() >= ext.size() && path.compare(path.size() - ext.size(), ext.size(), ext) == 0;
    };
    if (ends_with(".fvecs")) return write_fvecs(path, data);
    if (ends_with(".bvecs")) return write_bvecs(path, data);
    if (ends_with(".csv")) return write_csv(path, data);
    throw input_error("unknown dataset extension for '" + path + "' (expected .fvecs, .bvecs or .csv)");
}

/// "query,point,distance" rows.
inline void write_ground_truth(const std::string& path, const std::vector<Candidate>& truth) {
    std::ostringstream out;
    out.precision(17);
    out << "query,point,distance\n";
    for (std::size_t i = 0; i < truth.size(); ++i) out << i << ',' << truth[i].id.index << ',' << truth[i].distance << '\n';
    const std::string s = out.str();
    detail::write_file(path, {s.begin(), s.end()});
}

inline std::vector<Candidate> load_ground_truth(const std::string& path) {
    const auto bytes = detail::read_file(path);
    std::istringstream in(std::string(bytes.begin(), bytes.end()));
    std::string line;
    std::vector<Candidate> out;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (row++ == 0) continue;
        if (line.empty()) continue;
        std::size_t q = 0;
        std::uint32_t id = 0;
        double d = 0;
        char c1 = 0, c2 = 0;
        std::istringstream ls(line);
        if (!(ls >> q >> c1 >> id >> c2 >> d) || c1 != ',' || c2 != ',' || q != out.size())
            throw format_error("malformed ground-truth row", row - 1);
        out.push_back({d, PointId{id}});
    }
    return out;
}

}  // namespace cslsh
