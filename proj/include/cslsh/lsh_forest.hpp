// lsh_forest.hpp
//
// LSH Forest: L prefix tries over K-level hash strings. Each point is stored
// at the node of the shortest prefix of its string that no other point shares,
// or at depth K when no such prefix exists. Every node records the range of
// points below it, so bucket sizes at any level come from an O(i) descent.
//
// Buckets at levels deeper than a single-point leaf still contain that point
// when its full string agrees with the query; the per-point strings are kept
// for exactly this check.
//
// Tries are stored uncompressed (one node per prefix on a branching path).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "cslsh/core.hpp"
#include "cslsh/lsh_family.hpp"
#include "cslsh/rng.hpp"

namespace cslsh {

struct TrieNode {
    std::int32_t child[2] = {-1, -1};
    std::uint32_t begin = 0;  // range into the sorted point order
    std::uint32_t end = 0;

    [[nodiscard]] bool is_leaf() const noexcept { return child[0] < 0 && child[1] < 0; }
    [[nodiscard]] std::uint32_t count() const noexcept { return end - begin; }
    friend bool operator==(const TrieNode&, const TrieNode&) = default;
};

/// Where a descent along the query's string currently is. node < 0 means the
/// bucket at this depth is empty.
struct TriePosition {
    std::int32_t node = 0;
    unsigned depth = 0;
};

/// Enumerates the bucket S_{i,j}(q): points whose length-i prefix agrees with
/// the query's. Order is by hash string, then by point id.
struct LevelCursor {
    unsigned tree = 0;
    unsigned level = 0;
    std::span<const PointId> ids;
    std::size_t node_visits = 0;

    [[nodiscard]] auto begin() const noexcept { return ids.begin(); }
    [[nodiscard]] auto end() const noexcept { return ids.end(); }
    [[nodiscard]] std::size_t size() const noexcept { return ids.size(); }
    [[nodiscard]] bool empty() const noexcept { return ids.empty(); }
};

class ForestTrie {
public:
    ForestTrie() = default;

    ForestTrie(const Dataset& data, const LshFamily& family, unsigned depth, const RngSeed& seed) : depth_(depth) {
        if (depth == 0 || depth > HashString::kMaxLength) throw input_error("forest depth K must be in [1, 64]");
        members_ = sample_members(family, depth, seed);
        strings_.resize(data.size());
        for (std::size_t x = 0; x < data.size(); ++x) strings_[x] = concat_hash(members_, data.point(x)).packed();
        build();
    }

    static std::vector<HashSpec> sample_members(const LshFamily& family, unsigned depth, const RngSeed& seed) {
        std::vector<HashSpec> members;
        members.reserve(depth);
        for (unsigned level = 0; level < depth; ++level) members.push_back(family.sample_member(seed.derive("level", level)));
        return members;
    }

    /// Rebuilds from stored arrays (deserialization). Members are re-derived from the seed.
    static ForestTrie from_parts(std::vector<HashSpec> members, std::vector<std::uint64_t> strings,
                                 std::vector<PointId> order, std::vector<TrieNode> nodes) {
        ForestTrie t;
        t.depth_ = static_cast<unsigned>(members.size());
        t.members_ = std::move(members);
        t.strings_ = std::move(strings);
        t.order_ = std::move(order);
        t.nodes_ = std::move(nodes);
        return t;
    }

    [[nodiscard]] unsigned depth() const noexcept { return depth_; }
    [[nodiscard]] std::span<const HashSpec> members() const noexcept { return members_; }
    [[nodiscard]] std::span<const TrieNode> nodes() const noexcept { return nodes_; }
    [[nodiscard]] std::span<const PointId> order() const noexcept { return order_; }
    [[nodiscard]] std::span<const std::uint64_t> strings() const noexcept { return strings_; }
    [[nodiscard]] std::size_t size() const noexcept { return strings_.size(); }

    [[nodiscard]] HashString string_of(PointId id) const noexcept { return {strings_[id.index], depth_}; }

    /// Value of level `level` (1-based) of h(q).
    [[nodiscard]] std::uint8_t hash_level(PointView q, unsigned level) const noexcept { return members_[level - 1](q); }

    [[nodiscard]] HashString hash_query(PointView q) const { return concat_hash(members_, q); }

    /// Moves one level down along the query's value at the next level.
    [[nodiscard]] TriePosition step(TriePosition pos, std::uint8_t bit) const noexcept {
        const unsigned next_depth = pos.depth + 1;
        if (pos.node < 0) return {-1, next_depth};
        const TrieNode& node = nodes_[static_cast<std::size_t>(pos.node)];
        if (!node.is_leaf()) return {node.child[bit], next_depth};
        const PointId only = order_[node.begin];
        if (node.count() == 1 && HashString(strings_[only.index], depth_).at(next_depth) == bit)
            return {pos.node, next_depth};
        return {-1, next_depth};
    }

    [[nodiscard]] std::span<const PointId> bucket_at(TriePosition pos) const noexcept {
        if (pos.node < 0) return {};
        const TrieNode& node = nodes_[static_cast<std::size_t>(pos.node)];
        return std::span(order_).subspan(node.begin, node.count());
    }

    [[nodiscard]] std::size_t count_at(TriePosition pos) const noexcept {
        return pos.node < 0 ? 0 : nodes_[static_cast<std::size_t>(pos.node)].count();
    }

    /// Descends i levels along q's string; node visits = i + 1.
    [[nodiscard]] TriePosition descend(HashString q, unsigned level, std::size_t* visits = nullptr) const {
        if (level > depth_) throw input_error("level exceeds forest depth K");
        TriePosition pos;
        std::size_t v = 1;
        for (unsigned l = 1; l <= level && pos.node >= 0; ++l, ++v) pos = step(pos, q.at(l));
        pos.depth = level;
        if (visits) *visits += v;
        return pos;
    }

    /// Depth of the node holding the point (its shortest unique prefix, or K).
    [[nodiscard]] unsigned stored_depth(PointId id) const {
        TriePosition pos;
        const HashString s = string_of(id);
        while (!nodes_[static_cast<std::size_t>(pos.node)].is_leaf()) pos = step(pos, s.at(pos.depth + 1));
        return pos.depth;
    }

    friend bool operator==(const ForestTrie&, const ForestTrie&) = default;

private:
    void build() {
        const auto n = static_cast<std::uint32_t>(strings_.size());
        order_.resize(n);
        for (std::uint32_t x = 0; x < n; ++x) order_[x] = PointId{x};
        std::sort(order_.begin(), order_.end(), [&](PointId a, PointId b) {
            return strings_[a.index] != strings_[b.index] ? strings_[a.index] < strings_[b.index] : a < b;
        });
        nodes_.clear();
        nodes_.reserve(2 * static_cast<std::size_t>(n) + 1);
        build_node(0, n, 0);
    }

    std::int32_t build_node(std::uint32_t begin, std::uint32_t end, unsigned depth) {
        const auto index = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back(TrieNode{{-1, -1}, begin, end});
        if (depth >= 1 && (end - begin == 1 || depth == depth_)) return index;
        const unsigned level = depth + 1;
        auto first = order_.begin() + begin;
        auto last = order_.begin() + end;
        const auto split = std::partition_point(
            first, last, [&](PointId p) { return HashString(strings_[p.index], depth_).at(level) == 0; });
        const auto mid = static_cast<std::uint32_t>(split - order_.begin());
        if (mid > begin) {
            const auto c = build_node(begin, mid, level);
            nodes_[static_cast<std::size_t>(index)].child[0] = c;
        }
        if (end > mid) {
            const auto c = build_node(mid, end, level);
            nodes_[static_cast<std::size_t>(index)].child[1] = c;
        }
        return index;
    }

    unsigned depth_ = 0;
    std::vector<HashSpec> members_;
    std::vector<std::uint64_t> strings_;  // packed hash string per point id
    std::vector<PointId> order_;          // point ids sorted by (string, id)
    std::vector<TrieNode> nodes_;         // nodes_[0] is the root
};

class Forest {
public:
    Forest() = default;

    Forest(const Dataset& data, const LshFamily& family, unsigned depth, unsigned trees, const RngSeed& seed)
        : family_(family), depth_(depth), seed_(seed) {
        if (depth == 0 || depth > HashString::kMaxLength) throw input_error("forest depth K must be in [1, 64]");
        if (trees == 0) throw input_error("forest needs at least one tree (L >= 1)");
        if (family.metric() != data.metric() || family.dim() != data.dim())
            throw input_error("family does not match the dataset");
        trees_.reserve(trees);
        for (unsigned j = 0; j < trees; ++j) trees_.emplace_back(data, family, depth, seed.derive("tree", j));
    }

    static Forest from_parts(LshFamily family, unsigned depth, RngSeed seed, std::vector<ForestTrie> trees) {
        Forest f;
        f.family_ = family;
        f.depth_ = depth;
        f.seed_ = seed;
        f.trees_ = std::move(trees);
        return f;
    }

    [[nodiscard]] unsigned depth() const noexcept { return depth_; }
    [[nodiscard]] unsigned tree_count() const noexcept { return static_cast<unsigned>(trees_.size()); }
    [[nodiscard]] const ForestTrie& tree(unsigned j) const { return trees_.at(j); }
    [[nodiscard]] const LshFamily& family() const noexcept { return *family_; }
    [[nodiscard]] const RngSeed& seed() const noexcept { return seed_; }

    /// Bucket of tree j (0-based) at level i (0 = every point).
    [[nodiscard]] LevelCursor bucket(unsigned j, unsigned i, PointView q) const {
        const auto& t = trees_.at(j);
        LevelCursor c{j, i, {}, 0};
        const auto pos = t.descend(t.hash_query(q), i, &c.node_visits);
        c.ids = t.bucket_at(pos);
        return c;
    }

    /// |S_{i,j}(q)| from stored subtree sizes, without enumerating the bucket.
    [[nodiscard]] std::size_t collision_count(unsigned j, unsigned i, PointView q, std::size_t* visits = nullptr) const {
        const auto& t = trees_.at(j);
        return t.count_at(t.descend(t.hash_query(q), i, visits));
    }

    friend bool operator==(const Forest&, const Forest&) = default;

private:
    std::optional<LshFamily> family_;
    unsigned depth_ = 0;
    RngSeed seed_;
    std::vector<ForestTrie> trees_;
};

/// C(i) = sum over x of f(dist(q, x))^i, the expected bucket size at level i.
inline double expected_collisions(const Dataset& data, const LshFamily& family, PointView q, unsigned level) {
    data.check_query(q);
    double sum = 0, comp = 0;
    for (std::size_t x = 0; x < data.size(); ++x) {
        const double v = std::pow(family.collision_probability(data.distance(PointId{static_cast<std::uint32_t>(x)}, q)),
                                  static_cast<double>(level));
        const double s = sum + v;
        comp += std::abs(sum) >= std::abs(v) ? (sum - s) + v : (v - s) + sum;
        sum = s;
    }
    return sum + comp;
}

}  // namespace cslsh
