#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "ferroscope/anomap.hpp"

using namespace ferroscope;
using namespace ferroscope::anomap;

namespace {

nets::ClassCatalog catalog6() { return nets::ClassCatalog::steel_six(); }

nets::ClassProbs probs_of(std::vector<float> p) { return nets::ClassProbs{std::move(p)}; }

ocsvm::AnomalyScore score_of(double norm) {
    ocsvm::AnomalyScore s;
    s.norm_score = norm;
    s.eq1_score = norm - 1.0;
    return s;
}

imgrid::TileGrid grid_of(int rows, int cols, int side) {
    return {rows, cols, side, imgrid::TilePolicy::DropPartial, rows * side, cols * side};
}

}  // namespace

TEST_CASE("anomalous feature is the score times the anomalous mass") {
    auto cat = catalog6();
    // zero anomalous probability -> 0 regardless of score
    CHECK(anomalous_feature(probs_of({1, 0, 0, 0, 0, 0}), score_of(0.9), cat) == 0.0);
    // single anomalous class with probability 1
    CHECK_THAT(anomalous_feature(probs_of({0, 1, 0, 0, 0, 0}), score_of(0.7), cat),
               Catch::Matchers::WithinAbs(0.7, 1e-12));
    // two anomalous classes: (0.3 + 0.2) * 0.5
    CHECK_THAT(anomalous_feature(probs_of({0.5f, 0.3f, 0.2f, 0, 0, 0}), score_of(0.5), cat),
               Catch::Matchers::WithinAbs(0.25, 1e-7));
}

TEST_CASE("anomalous feature rejects bad configurations") {
    auto cat = catalog6();
    cat.anomalous_set.clear();
    CHECK_THROWS_AS(anomalous_feature(probs_of({1, 0, 0, 0, 0, 0}), score_of(0.5), cat), ConfigError);
    CHECK_THROWS_AS(anomalous_feature(probs_of({1, 0}), score_of(0.5), catalog6()), InvalidArgument);
}

TEST_CASE("anomalous feature equals the explicit per-class summation") {
    auto cat = catalog6();
    Rng rng(123);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<float> p(6);
        float sum = 0;
        for (auto& v : p) {
            v = rng.unitf();
            sum += v;
        }
        for (auto& v : p) v /= sum;
        const double s = rng.unit();
        double oracle = 0.0;
        for (int a : cat.anomalous_set) oracle += double(p[std::size_t(a)]) * s;
        const double got = anomalous_feature(probs_of(p), score_of(s), cat);
        CHECK(std::abs(got - oracle) < 1e-7);
        CHECK(got >= 0.0);
        CHECK(got <= 1.0);
    }
}

TEST_CASE("build_map: order, counts, background flags") {
    auto g = grid_of(1, 7, 8);
    auto map = build_map(g, std::vector<double>(7, 0.0));
    CHECK(map.af.size() == 7);

    CHECK_THROWS_AS(build_map(g, std::vector<double>(6, 0.0)), InvalidArgument);
    CHECK_THROWS_AS(build_map(g, std::vector<double>(7, 0.0), std::vector<std::uint8_t>(3, 0)),
                    InvalidArgument);

    // permuting values without permuting indices produces a different map
    auto g2 = grid_of(2, 2, 8);
    auto m1 = build_map(g2, {0.1, 0.2, 0.3, 0.4});
    auto m2 = build_map(g2, {0.4, 0.3, 0.2, 0.1});
    CHECK(m1.af != m2.af);
}

TEST_CASE("jet endpoints are pure blue and pure red") {
    CHECK(jet_color(0.0) == Rgb{0, 0, 255});
    CHECK(jet_color(1.0) == Rgb{255, 0, 0});
    CHECK(jet_color(0.25) == Rgb{0, 255, 255});
    CHECK(jet_color(0.5) == Rgb{0, 255, 0});
    CHECK(jet_color(0.75) == Rgb{255, 255, 0});
    // midway between blue and cyan
    CHECK(jet_color(0.125) == Rgb{0, 128, 255});
}

TEST_CASE("render endpoints match the golden fixtures") {
    auto g = grid_of(1, 1, 24);
    RawImage cold = render(build_map(g, {0.0}));
    RawImage hot = render(build_map(g, {1.0}));
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x) {
            CHECK(cold.at(y, x, 0) == 0);
            CHECK(cold.at(y, x, 2) == 255);
            CHECK(hot.at(y, x, 0) == 255);
            CHECK(hot.at(y, x, 2) == 0);
        }

    const std::filesystem::path golden = FERROSCOPE_GOLDEN_DIR;
    RawImage gold_cold = imgrid::read_png(golden / "af0.png");
    RawImage gold_hot = imgrid::read_png(golden / "af1.png");
    CHECK(cold == gold_cold);
    CHECK(hot == gold_hot);
}

TEST_CASE("render blends over the base image") {
    auto g = grid_of(1, 2, 8);
    RawImage base(8, 16, 1, 100);
    auto map = build_map(g, {0.0, 1.0});

    RenderOptions opt;
    opt.alpha = 0.0;
    RawImage out = render(map, &base, opt);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == 100);

    opt.alpha = 1.0;
    RawImage pure = render(map, &base, opt);
    CHECK(pure.at(4, 2, 2) == 255);  // blue block
    CHECK(pure.at(4, 10, 0) == 255); // red block

    opt.alpha = 0.5;
    RawImage half = render(map, &base, opt);
    CHECK(half.at(4, 2, 2) == quantize_u8(0.5 * 255 + 0.5 * 100));
}

TEST_CASE("render rejects a base of the wrong size") {
    auto g = grid_of(2, 2, 8);
    RawImage base(15, 16, 1);
    auto map = build_map(g, std::vector<double>(4, 0.5));
    CHECK_THROWS_AS(render(map, &base), InvalidArgument);
}

TEST_CASE("background tiles render black regardless of AF") {
    auto g = grid_of(1, 2, 8);
    auto map = build_map(g, {1.0, 1.0}, {1, 0});
    RawImage out = render(map);
    CHECK(out.at(4, 4, 0) == 0);
    CHECK(out.at(4, 4, 1) == 0);
    CHECK(out.at(4, 4, 2) == 0);
    CHECK(out.at(4, 12, 0) == 255);
}

TEST_CASE("uniform map renders a single color at alpha 1") {
    auto g = grid_of(3, 3, 8);
    auto map = build_map(g, std::vector<double>(9, 0.42));
    RawImage out = render(map);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            CHECK(out.at(y, x, 0) == out.at(0, 0, 0));
            CHECK(out.at(y, x, 1) == out.at(0, 0, 1));
            CHECK(out.at(y, x, 2) == out.at(0, 0, 2));
        }
}

TEST_CASE("legend strip is appended on request") {
    auto g = grid_of(2, 2, 16);
    auto map = build_map(g, std::vector<double>(4, 0.5));
    RenderOptions opt;
    opt.legend = true;
    RawImage with = render(map, nullptr, opt);
    CHECK(with.width > 32);
    CHECK(with.height == 32);
}

TEST_CASE("histogram splits mass at zero") {
    auto bins = histogram({-1.0, -0.5, 0.5, 1.0}, 1.0);
    std::size_t anom = 0, norm = 0;
    for (const auto& b : bins) (b.anomalous_side ? anom : norm) += b.count;
    CHECK(anom == 2);
    CHECK(norm == 2);

    auto pos = histogram({0.25, 0.75, 2.0}, 0.5);
    for (const auto& b : pos)
        if (b.anomalous_side) CHECK(b.count == 0);
}

TEST_CASE("bimodal histogram keeps all the mass and separates modes") {
    Rng rng(321);
    std::vector<double> values;
    for (int i = 0; i < 1000; ++i) values.push_back(-2.0 + 0.5 * rng.normal());
    for (int i = 0; i < 1000; ++i) values.push_back(2.0 + 0.5 * rng.normal());
    auto bins = histogram(values, 0.25);
    std::size_t total = 0, anom = 0;
    for (const auto& b : bins) {
        total += b.count;
        if (b.anomalous_side) anom += b.count;
    }
    CHECK(total == 2000);
    CHECK(anom > 900);
    CHECK(anom < 1100);

    std::string csv = histogram_csv(bins);
    CHECK(csv.find("bin_low,bin_high,count,side") == 0);
    CHECK(csv.find("anomalous") != std::string::npos);

    RawImage img = render_histogram(bins);
    CHECK(img.height == 240);
}

TEST_CASE("histogram rejects bad input") {
    CHECK_THROWS_AS(histogram({1.0}, 0.0), InvalidArgument);
    CHECK_THROWS_AS(histogram({std::numeric_limits<double>::infinity()}, 1.0), InvalidArgument);
}

namespace {
ScoredTile make_scored(int side, std::uint8_t fill, double score, const std::string& id, int row = 0,
                       int col = 0) {
    imgrid::UnitImage u;
    u.side = side;
    u.channels = 1;
    u.row = row;
    u.col = col;
    u.source_id = id;
    u.pixels.assign(std::size_t(side) * std::size_t(side), fill);
    return {u, score};
}
}  // namespace

TEST_CASE("montage of 100 tiles is a 10x10 grid") {
    std::vector<ScoredTile> tiles;
    Rng rng(5);
    for (int i = 0; i < 128; ++i)
        tiles.push_back(make_scored(8, std::uint8_t(i), rng.unit(), "t" + std::to_string(i)));
    RawImage img = montage(tiles, 100, MontageOrder::MostAnomalous);
    CHECK(img.height == 80);
    CHECK(img.width == 80);
}

TEST_CASE("montage extremes and tie-breaking") {
    std::vector<ScoredTile> tiles = {
        make_scored(4, 10, 0.5, "b"),
        make_scored(4, 20, 0.9, "a"),
        make_scored(4, 30, 0.9, "c"),
        make_scored(4, 40, 0.1, "d"),
    };
    RawImage top = montage(tiles, 1, MontageOrder::MostAnomalous);
    CHECK(top.at(0, 0) == 20);  // highest score, ties broken by source_id: "a" before "c"
    RawImage bottom = montage(tiles, 1, MontageOrder::MostNormal);
    CHECK(bottom.at(0, 0) == 40);

    CHECK_THROWS_AS(montage(tiles, 5, MontageOrder::MostAnomalous), InvalidArgument);
}

TEST_CASE("montage ranking agrees between eq1 and norm scores") {
    Rng rng(6);
    std::vector<ScoredTile> by_norm, by_eq1;
    for (int i = 0; i < 16; ++i) {
        double norm = rng.unit();
        by_norm.push_back(make_scored(4, std::uint8_t(i), norm, "t" + std::to_string(i)));
        // eq1 = norm - 1: shifting all scores preserves the ordering
        by_eq1.push_back(make_scored(4, std::uint8_t(i), norm - 1.0, "t" + std::to_string(i)));
    }
    RawImage a = montage(by_norm, 16, MontageOrder::MostAnomalous);
    RawImage b = montage(by_eq1, 16, MontageOrder::MostAnomalous);
    CHECK(a == b);
}
