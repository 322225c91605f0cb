#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "cslsh/data_io.hpp"
#include "cslsh/generators.hpp"
#include "cslsh/oracle.hpp"
#include "cslsh/serialize.hpp"

using namespace cslsh;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() / ("cslsh_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    [[nodiscard]] std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

void write_raw(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out << bytes;
}

Instance small(GeneratorKind kind, std::uint64_t seed = 1) {
    InstanceSpec s;
    s.kind = kind;
    s.n = 50;
    s.dim = kind == GeneratorKind::gaussian_angular ? 12 : 70;
    s.queries = 5;
    s.planted_distance = 2;
    s.shell_distance = 12;
    s.cluster_size = 10;
    s.cluster_bits = 4;
    s.seed = seed;
    return generate(s);
}

}  // namespace

TEST(DataIo, FvecsRoundTripIsBitExact) {
    TempDir dir;
    const auto d = Dataset::from_reals(Metric::euclidean, 3, {0.1F, -2.5F, 1e-30F, 3.0F, 0.0F, -0.0F});
    write_fvecs(dir.file("a.fvecs"), d);
    EXPECT_EQ(load_fvecs(dir.file("a.fvecs")), d);
    EXPECT_EQ(fs::file_size(dir.file("a.fvecs")), 2U * (4 + 12));
}

TEST(DataIo, BvecsHammingRoundTrip) {
    TempDir dir;
    const auto inst = small(GeneratorKind::uniform_hamming);
    write_bvecs(dir.file("a.bvecs"), inst.data);
    EXPECT_EQ(load_bvecs(dir.file("a.bvecs")), inst.data);
}

TEST(DataIo, BvecsRealBytes) {
    TempDir dir;
    const auto d = Dataset::from_reals(Metric::euclidean, 2, {0, 255, 7, 128});
    write_bvecs(dir.file("a.bvecs"), d);
    EXPECT_EQ(load_bvecs(dir.file("a.bvecs"), Metric::euclidean), d);
    EXPECT_THROW(write_bvecs(dir.file("b.bvecs"), Dataset::from_reals(Metric::euclidean, 1, {0.5F})), input_error);
}

TEST(DataIo, BvecsRejectsNonBinaryBytesForHamming) {
    TempDir dir;
    write_raw(dir.file("a.bvecs"), std::string("\x02\0\0\0\x01\x02", 6));
    EXPECT_THROW(load_bvecs(dir.file("a.bvecs")), format_error);
}

TEST(DataIo, MalformedVecs) {
    TempDir dir;
    write_raw(dir.file("empty.fvecs"), "");
    EXPECT_THROW(load_fvecs(dir.file("empty.fvecs")), format_error);
    write_raw(dir.file("trunc.fvecs"), std::string("\x02\0\0\0\0\0\0\0", 8));
    EXPECT_THROW(load_fvecs(dir.file("trunc.fvecs")), format_error);
    write_raw(dir.file("zero.fvecs"), std::string("\0\0\0\0", 4));
    EXPECT_THROW(load_fvecs(dir.file("zero.fvecs")), format_error);
    write_raw(dir.file("mixed.bvecs"), std::string("\x01\0\0\0\x01\x02\0\0\0\x01\x00", 11));
    EXPECT_THROW(load_bvecs(dir.file("mixed.bvecs")), format_error);
    EXPECT_THROW(load_fvecs(dir.file("missing.fvecs")), input_error);
    EXPECT_THROW(load_fvecs(dir.file("zero.fvecs"), Metric::hamming), input_error);
}

TEST(DataIo, CsvMatchesFvecs) {
    TempDir dir;
    const auto inst = small(GeneratorKind::gaussian_angular);
    write_fvecs(dir.file("a.fvecs"), inst.data);
    write_csv(dir.file("a.csv"), inst.data);
    EXPECT_EQ(load_csv(dir.file("a.csv"), Metric::angular), load_fvecs(dir.file("a.fvecs"), Metric::angular));
}

TEST(DataIo, CsvHammingAndHeader) {
    const auto d = parse_csv("a,b,c\n1,0,1\n0, 0 ,1\r\n", Metric::hamming, true);
    ASSERT_EQ(d.size(), 2U);
    EXPECT_EQ(d.dim(), 3U);
    EXPECT_EQ(to_csv(d), "1,0,1\n0,0,1\n");
}

TEST(DataIo, CsvErrorsCarryRow) {
    try {
        (void)parse_csv("1,2\n3\n", Metric::euclidean);
        FAIL();
    } catch (const format_error& e) {
        EXPECT_EQ(e.offset(), 1U);
    }
    EXPECT_THROW((void)parse_csv("1,x\n", Metric::euclidean), format_error);
    EXPECT_THROW((void)parse_csv("1,2\n", Metric::hamming), format_error);
    EXPECT_THROW((void)parse_csv("\n\n", Metric::euclidean), format_error);
}

TEST(DataIo, DispatchByExtension) {
    TempDir dir;
    const auto inst = small(GeneratorKind::planted_nn);
    save_dataset(dir.file("x.bvecs"), inst.data);
    save_dataset(dir.file("x.csv"), inst.data);
    EXPECT_EQ(load_dataset(dir.file("x.bvecs"), Metric::hamming), inst.data);
    EXPECT_EQ(load_dataset(dir.file("x.csv"), Metric::hamming), inst.data);
    EXPECT_THROW(save_dataset(dir.file("x.txt"), inst.data), input_error);
    EXPECT_THROW(save_dataset(dir.file("x.fvecs"), inst.data), input_error);
}

TEST(DataIo, GroundTruthRoundTrip) {
    TempDir dir;
    const auto inst = small(GeneratorKind::gaussian_angular);
    write_ground_truth(dir.file("t.csv"), inst.truth);
    const auto back = load_ground_truth(dir.file("t.csv"));
    ASSERT_EQ(back.size(), inst.truth.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].id, inst.truth[i].id);
        EXPECT_EQ(back[i].distance, inst.truth[i].distance);
    }
    write_raw(dir.file("bad.csv"), "query,point,distance\n1,2,3\n");
    EXPECT_THROW(load_ground_truth(dir.file("bad.csv")), format_error);
}

TEST(Generators, DeterministicInSeed) {
    for (auto kind : {GeneratorKind::uniform_hamming, GeneratorKind::planted_nn, GeneratorKind::dense_cluster,
                      GeneratorKind::gaussian_angular}) {
        const auto a = small(kind, 3), b = small(kind, 3), c = small(kind, 4);
        EXPECT_EQ(a.data, b.data);
        EXPECT_EQ(a.queries, b.queries);
        EXPECT_FALSE(a.data == c.data && a.queries == c.queries);
    }
}

TEST(Generators, TruthIsBruteForce) {
    for (auto kind : {GeneratorKind::uniform_hamming, GeneratorKind::planted_nn, GeneratorKind::dense_cluster,
                      GeneratorKind::gaussian_angular}) {
        const auto inst = small(kind);
        ASSERT_EQ(inst.truth.size(), inst.queries.size());
        for (std::size_t i = 0; i < inst.queries.size(); ++i) {
            const auto q = inst.queries.point(i);
            double best = inst.data.distance(PointId{0}, q);
            for (std::size_t x = 1; x < inst.data.size(); ++x)
                best = std::min(best, inst.data.distance(PointId{static_cast<std::uint32_t>(x)}, q));
            EXPECT_EQ(inst.truth[i].distance, best);
        }
    }
}

TEST(Generators, PlantedShellHolds) {
    const auto inst = small(GeneratorKind::planted_nn);
    for (std::size_t i = 0; i < inst.queries.size(); ++i) {
        const auto q = inst.queries.point(i);
        EXPECT_EQ(inst.truth[i].distance, 2.0);
        for (std::size_t x = 0; x < inst.data.size(); ++x)
            if (x != inst.truth[i].id.index) {
                EXPECT_GE(inst.data.distance(PointId{static_cast<std::uint32_t>(x)}, q), 12.0);
            }
    }
}

TEST(Generators, DenseClusterGeometry) {
    const auto inst = small(GeneratorKind::dense_cluster);
    for (std::size_t i = 0; i < inst.queries.size(); ++i) {
        const auto q = inst.queries.point(i);
        EXPECT_EQ(inst.truth[i].distance, 2.0);
        int near = 0;
        for (std::size_t x = 0; x < inst.data.size(); ++x) {
            const double d = inst.data.distance(PointId{static_cast<std::uint32_t>(x)}, q);
            if (d <= 3) {
                ++near;
            } else {
                EXPECT_GE(d, 12.0);
            }
        }
        EXPECT_EQ(near, 10);
    }
}

TEST(Generators, InvalidSpecs) {
    InstanceSpec s;
    s.n = 0;
    EXPECT_THROW(generate(s), input_error);
    s = {};
    s.planted_distance = 8;
    s.shell_distance = 8;
    EXPECT_THROW(generate(s), input_error);
    s = {};
    s.kind = GeneratorKind::dense_cluster;
    s.n = 10;
    s.cluster_size = 11;
    EXPECT_THROW(generate(s), input_error);
    s = {};
    s.n = 100;
    s.dim = 8;
    s.planted_distance = 1;
    s.shell_distance = 7;
    EXPECT_THROW(generate(s), input_error);
}

TEST(Serialize, ForestRoundTrip) {
    const auto inst = small(GeneratorKind::planted_nn);
    const Forest f(inst.data, LshFamily::for_dataset(inst.data), 24, 8, RngSeed(5));
    const auto bytes = serialize_forest(f, inst.data);
    EXPECT_EQ(deserialize_forest(bytes, inst.data), f);
    EXPECT_EQ(serialize_forest(deserialize_forest(bytes, inst.data), inst.data), bytes);
}

TEST(Serialize, EnsembleRoundTripQueriesIdentically) {
    TempDir dir;
    const auto inst = small(GeneratorKind::planted_nn);
    const ForestEnsemble e(inst.data, LshFamily::for_dataset(inst.data), 24, {4, 2}, RngSeed(6));
    save_ensemble(dir.file("e.bin"), e);
    const auto back = load_ensemble(dir.file("e.bin"), inst.data);
    EXPECT_EQ(serialize_ensemble(back), serialize_ensemble(e));
    for (std::size_t i = 0; i < inst.queries.size(); ++i) {
        const auto a = adaptive_nearest_neighbor(e, inst.queries.point(i), RngSeed(7));
        const auto b = adaptive_nearest_neighbor(back, inst.queries.point(i), RngSeed(7));
        EXPECT_EQ(a.best, b.best);
        EXPECT_EQ(a.cost, b.cost);
    }
}

TEST(Serialize, RejectsOtherDatasetAndDamage) {
    const auto inst = small(GeneratorKind::planted_nn);
    const auto other = small(GeneratorKind::planted_nn, 9);
    const ForestEnsemble e(inst.data, LshFamily::for_dataset(inst.data), 16, {2, 2}, RngSeed(8));
    auto bytes = serialize_ensemble(e);
    EXPECT_THROW(deserialize_ensemble(bytes, other.data), format_error);
    EXPECT_THROW(deserialize_forest(bytes, inst.data), format_error);
    auto truncated = bytes;
    truncated.resize(bytes.size() / 2);
    EXPECT_THROW(deserialize_ensemble(truncated, inst.data), format_error);
    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_THROW(deserialize_ensemble(trailing, inst.data), format_error);
    auto magic = bytes;
    magic[0] = 'X';
    EXPECT_THROW(deserialize_ensemble(magic, inst.data), format_error);
}
