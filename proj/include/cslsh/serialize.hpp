// serialize.hpp
//
// Versioned binary format for built forests and ensembles. All integers are
// little-endian, floats are stored as their IEEE-754 bit patterns.
//
//   header    "CSLSHFST" | u32 version | u8 kind (1 forest, 2 ensemble)
//             u64 n | u64 dim | u8 metric | u8 family | u32 K
//             u32 R | u32 L' | u64 seed key | u64 dataset fingerprint
//   ensemble  u32 t | f64 cap | f64 level | f64 quorum | f64 restart
//   forest    u64 seed key, then per tree:
//               K members (u32 coordinate, or dim x f32 direction)
//               n x u64 string | n x u32 order
//               u32 node count | nodes (i32 child0, i32 child1, u32 begin, u32 end)
//
// Loading checks the dataset fingerprint so a structure is never paired with
// data it was not built on.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "cslsh/adaptive_query.hpp"
#include "cslsh/core.hpp"
#include "cslsh/lsh_family.hpp"
#include "cslsh/lsh_forest.hpp"
#include "cslsh/rng.hpp"

namespace cslsh {

inline constexpr char kFormatMagic[8] = {'C', 'S', 'L', 'S', 'H', 'F', 'S', 'T'};
inline constexpr std::uint32_t kFormatVersion = 1;

/// FNV-1a over the dataset's shape and raw contents.
inline std::uint64_t dataset_fingerprint(const Dataset& data) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto mix = [&](std::uint64_t v) {
        for (int s = 0; s < 64; s += 8) {
            h ^= (v >> s) & 0xFF;
            h *= 0x100000001B3ULL;
        }
    };
    mix(static_cast<std::uint64_t>(data.metric()));
    mix(data.dim());
    mix(data.size());
    for (auto w : data.raw_words()) mix(w);
    for (float v : data.raw_reals()) mix(std::bit_cast<std::uint32_t>(v));
    return h;
}

namespace detail {

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int s = 0; s < 32; s += 8) bytes_.push_back(static_cast<std::uint8_t>(v >> s));
    }
    void u64(std::uint64_t v) {
        for (int s = 0; s < 64; s += 8) bytes_.push_back(static_cast<std::uint8_t>(v >> s));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
    [[nodiscard]] const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<std::uint8_t>& bytes) : b_(bytes) {}

    std::uint8_t u8() {
        need(1);
        return b_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int s = 0; s < 32; s += 8) v |= std::uint32_t{b_[pos_++]} << s;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int s = 0; s < 64; s += 8) v |= std::uint64_t{b_[pos_++]} << s;
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    void raw(char* p, std::size_t n) {
        need(n);
        std::memcpy(p, b_.data() + pos_, n);
        pos_ += n;
    }
    [[nodiscard]] std::size_t offset() const noexcept { return pos_; }
    [[nodiscard]] bool at_end() const noexcept { return pos_ == b_.size(); }

private:
    void need(std::size_t n) const {
        if (b_.size() - pos_ < n) throw format_error("truncated structure file", pos_);
    }
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

struct Header {
    std::uint8_t kind = 1;
    std::uint64_t n = 0, dim = 0;
    Metric metric = Metric::hamming;
    FamilyKind family = FamilyKind::bit_sampling;
    std::uint32_t depth = 0, forests = 1, trees = 1;
    std::uint64_t seed_key = 0, fingerprint = 0;
};

inline void write_header(ByteWriter& w, const Header& h) {
    w.raw(kFormatMagic, sizeof kFormatMagic);
    w.u32(kFormatVersion);
    w.u8(h.kind);
    w.u64(h.n);
    w.u64(h.dim);
    w.u8(static_cast<std::uint8_t>(h.metric));
    w.u8(static_cast<std::uint8_t>(h.family));
    w.u32(h.depth);
    w.u32(h.forests);
    w.u32(h.trees);
    w.u64(h.seed_key);
    w.u64(h.fingerprint);
}

inline Header read_header(ByteReader& r, const Dataset& data) {
    char magic[8];
    r.raw(magic, 8);
    if (std::memcmp(magic, kFormatMagic, 8) != 0) throw format_error("not a structure file (bad magic)", 0);
    const std::size_t version_at = r.offset();
    const auto version = r.u32();
    if (version != kFormatVersion)
        throw format_error("unsupported format version " + std::to_string(version) + " (expected " +
                               std::to_string(kFormatVersion) + ")",
                           version_at);
    Header h;
    h.kind = r.u8();
    h.n = r.u64();
    h.dim = r.u64();
    const auto metric_at = r.offset();
    const auto m = r.u8();
    const auto f = r.u8();
    if (m > 2 || f > 1) throw format_error("unknown metric or family code", metric_at);
    h.metric = static_cast<Metric>(m);
    h.family = static_cast<FamilyKind>(f);
    h.depth = r.u32();
    h.forests = r.u32();
    h.trees = r.u32();
    h.seed_key = r.u64();
    const auto fp_at = r.offset();
    h.fingerprint = r.u64();
    if (h.n != data.size() || h.dim != data.dim() || h.metric != data.metric() || h.fingerprint != dataset_fingerprint(data))
        throw format_error("structure was built on a different dataset", fp_at);
    if (h.depth == 0 || h.depth > HashString::kMaxLength || h.forests == 0 || h.trees == 0)
        throw format_error("invalid structure parameters", metric_at);
    return h;
}

inline void write_forest_body(ByteWriter& w, const Forest& f) {
    w.u64(f.seed().key());
    for (unsigned j = 0; j < f.tree_count(); ++j) {
        const auto& t = f.tree(j);
        for (const auto& h : t.members()) {
            if (h.kind == FamilyKind::bit_sampling) w.u32(h.coordinate);
            else for (float v : h.direction) w.f32(v);
        }
        for (auto s : t.strings()) w.u64(s);
        for (auto id : t.order()) w.u32(id.index);
        w.u32(static_cast<std::uint32_t>(t.nodes().size()));
        for (const auto& node : t.nodes()) {
            w.i32(node.child[0]);
            w.i32(node.child[1]);
            w.u32(node.begin);
            w.u32(node.end);
        }
    }
}

inline Forest read_forest_body(ByteReader& r, const Header& h) {
    const LshFamily family(h.family, h.metric, h.dim);
    const RngSeed seed = RngSeed::from_key(r.u64());
    std::vector<ForestTrie> trees;
    trees.reserve(h.trees);
    for (unsigned j = 0; j < h.trees; ++j) {
        std::vector<HashSpec> members(h.depth);
        for (auto& m : members) {
            m.kind = h.family;
            if (h.family == FamilyKind::bit_sampling) {
                const auto at = r.offset();
                m.coordinate = r.u32();
                if (m.coordinate >= h.dim) throw format_error("hash coordinate out of range", at);
            } else {
                m.direction.resize(h.dim);
                for (auto& v : m.direction) v = r.f32();
            }
        }
        std::vector<std::uint64_t> strings(h.n);
        for (auto& s : strings) s = r.u64();
        std::vector<PointId> order(h.n);
        for (auto& id : order) {
            const auto at = r.offset();
            id.index = r.u32();
            if (id.index >= h.n) throw format_error("point id out of range", at);
        }
        const auto count_at = r.offset();
        const auto count = r.u32();
        if (count == 0 || count > 2 * (h.n + 1) * (h.depth + 1)) throw format_error("implausible node count", count_at);
        std::vector<TrieNode> nodes(count);
        for (auto& node : nodes) {
            const auto at = r.offset();
            node.child[0] = r.i32();
            node.child[1] = r.i32();
            node.begin = r.u32();
            node.end = r.u32();
            for (auto c : node.child)
                if (c < -1 || c >= static_cast<std::int32_t>(count)) throw format_error("child index out of range", at);
            if (node.begin > node.end || node.end > h.n) throw format_error("node range out of bounds", at);
        }
        trees.push_back(ForestTrie::from_parts(std::move(members), std::move(strings), std::move(order), std::move(nodes)));
    }
    return Forest::from_parts(family, h.depth, seed, std::move(trees));
}

inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw input_error("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw input_error("write to '" + path + "' failed");
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize_forest(const Forest& forest, const Dataset& data) {
    detail::ByteWriter w;
    detail::write_header(w, {1, data.size(), data.dim(), data.metric(), forest.family().kind(), forest.depth(), 1,
                             forest.tree_count(), forest.seed().key(), dataset_fingerprint(data)});
    detail::write_forest_body(w, forest);
    return w.bytes();
}

inline Forest deserialize_forest(const std::vector<std::uint8_t>& bytes, const Dataset& data) {
    detail::ByteReader r(bytes);
    const auto h = detail::read_header(r, data);
    if (h.kind != 1) throw format_error("file holds an ensemble, not a single forest", 12);
    auto f = detail::read_forest_body(r, h);
    if (!r.at_end()) throw format_error("trailing bytes after forest", r.offset());
    return f;
}

inline std::vector<std::uint8_t> serialize_ensemble(const ForestEnsemble& e) {
    const Dataset& data = e.dataset();
    detail::ByteWriter w;
    detail::write_header(w, {2, data.size(), data.dim(), data.metric(), e.family().kind(), e.depth(), e.forest_count(),
                             e.trees_per_forest(), e.seed().key(), dataset_fingerprint(data)});
    const auto& c = e.config();
    w.u32(c.t);
    w.f64(c.collision_cap);
    w.f64(c.level_fraction);
    w.f64(c.quorum_fraction);
    w.f64(c.restart_fraction);
    for (unsigned r = 0; r < e.forest_count(); ++r) detail::write_forest_body(w, e.forest(r));
    return w.bytes();
}

inline ForestEnsemble deserialize_ensemble(const std::vector<std::uint8_t>& bytes, const Dataset& data) {
    detail::ByteReader r(bytes);
    const auto h = detail::read_header(r, data);
    if (h.kind != 2) throw format_error("file holds a single forest, not an ensemble", 12);
    AdaptiveConfig c;
    c.t = r.u32();
    c.collision_cap = r.f64();
    c.level_fraction = r.f64();
    c.quorum_fraction = r.f64();
    c.restart_fraction = r.f64();
    std::vector<Forest> forests;
    forests.reserve(h.forests);
    for (unsigned k = 0; k < h.forests; ++k) forests.push_back(detail::read_forest_body(r, h));
    if (!r.at_end()) throw format_error("trailing bytes after ensemble", r.offset());
    return ForestEnsemble::from_parts(data, {h.forests, h.trees}, RngSeed::from_key(h.seed_key), c, std::move(forests));
}

inline void save_ensemble(const std::string& path, const ForestEnsemble& e) {
    detail::write_bytes(path, serialize_ensemble(e));
}

inline ForestEnsemble load_ensemble(const std::string& path, const Dataset& data) {
    return deserialize_ensemble(detail::read_bytes(path), data);
}

}  // namespace cslsh
