#include <catch2/catch_amalgamated.hpp>

#include "ferroscope/imgrid.hpp"

using namespace ferroscope;
using namespace ferroscope::imgrid;

namespace {

RawImage random_image(Rng& rng, int h, int w, int c = 1) {
    RawImage img(h, w, c);
    for (auto& p : img.pixels) p = std::uint8_t(rng.range(256));
    return img;
}

}  // namespace

TEST_CASE("scale_to_multiple reaches the smallest covering multiple") {
    Rng rng(41);
    RawImage strip = random_image(rng, 256, 1600);
    RawImage scaled = scale_to_multiple(strip, 256);
    CHECK(scaled.height == 256);
    CHECK(scaled.width == 1792);

    RawImage square = random_image(rng, 300, 300);
    RawImage up = scale_to_multiple(square, 256);
    CHECK(up.height == 512);
    CHECK(up.width == 512);
}

TEST_CASE("scale_to_multiple keeps exact multiples unchanged") {
    Rng rng(42);
    RawImage img = random_image(rng, 256, 256);
    RawImage out = scale_to_multiple(img, 256);
    CHECK(out == img);
}

TEST_CASE("scale_to_multiple rejects tiny side") {
    RawImage img(16, 16, 1);
    CHECK_THROWS_AS(scale_to_multiple(img, 0), InvalidArgument);
    CHECK_THROWS_AS(scale_to_multiple(img, 4), InvalidArgument);
}

TEST_CASE("scale_to_multiple is idempotent") {
    Rng rng(43);
    for (int trial = 0; trial < 10; ++trial) {
        int h = 9 + int(rng.range(400));
        int w = 9 + int(rng.range(400));
        RawImage img = random_image(rng, h, w);
        RawImage once = scale_to_multiple(img, 64);
        RawImage twice = scale_to_multiple(once, 64);
        CHECK(twice == once);
    }
}

TEST_CASE("tile splits a strip into 1x7 under ScaleUp") {
    Rng rng(44);
    RawImage strip = random_image(rng, 256, 1600);
    auto [grid, tiles] = tile(strip, 256, TilePolicy::ScaleUp, "strip0");
    CHECK(grid.rows == 1);
    CHECK(grid.cols == 7);
    CHECK(tiles.size() == 7);
    CHECK(grid.effective_width == 1792);
    CHECK(tiles[3].row == 0);
    CHECK(tiles[3].col == 3);
    CHECK(tiles[3].source_id == "strip0");
}

TEST_CASE("tile DropPartial on exact multiples") {
    Rng rng(45);
    RawImage img = random_image(rng, 1536, 2048);
    auto [grid, tiles] = tile(img, 256, TilePolicy::DropPartial);
    CHECK(grid.rows == 6);
    CHECK(grid.cols == 8);
    CHECK(tiles.size() == 48);
}

TEST_CASE("tile DropPartial keeps the single top-left tile of a 300x300 image") {
    Rng rng(46);
    RawImage img = random_image(rng, 300, 300);
    auto [grid, tiles] = tile(img, 256, TilePolicy::DropPartial);
    REQUIRE(grid.rows == 1);
    REQUIRE(grid.cols == 1);
    REQUIRE(tiles.size() == 1);
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 256; ++x)
            if (tiles[0].at(y, x) != img.at(y, x)) FAIL("tile content mismatch at " << y << "," << x);
}

TEST_CASE("tile rejects images smaller than one tile under DropPartial") {
    RawImage img(100, 300, 1);
    CHECK_THROWS_AS(tile(img, 256, TilePolicy::DropPartial), TooSmallError);
}

TEST_CASE("DropPartial tiles partition the cropped region bit-exactly") {
    Rng rng(47);
    for (int trial = 0; trial < 20; ++trial) {
        const int side = 32;
        int h = side + int(rng.range(200));
        int w = side + int(rng.range(200));
        int channels = rng.range(2) == 0 ? 1 : 3;
        RawImage img = random_image(rng, h, w, channels);
        auto [grid, tiles] = tile(img, side, TilePolicy::DropPartial);
        CHECK(grid.rows == h / side);
        CHECK(grid.cols == w / side);
        REQUIRE(tiles.size() == std::size_t(grid.rows) * std::size_t(grid.cols));

        // reconstruct and compare to the cropped source
        RawImage recon(grid.effective_height, grid.effective_width, channels);
        for (const auto& t : tiles)
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x)
                    for (int c = 0; c < channels; ++c)
                        recon.at(t.row * side + y, t.col * side + x, c) = t.at(y, x, c);
        bool equal = true;
        for (int y = 0; y < grid.effective_height && equal; ++y)
            for (int x = 0; x < grid.effective_width && equal; ++x)
                for (int c = 0; c < channels; ++c)
                    if (recon.at(y, x, c) != img.at(y, x, c)) equal = false;
        CHECK(equal);
    }
}

TEST_CASE("reassemble quantizes tile values into uniform blocks") {
    TileGrid g1{1, 1, 32, TilePolicy::DropPartial, 32, 32};
    RawImage full = reassemble(g1, {1.0});
    for (auto p : full.pixels) CHECK(p == 255);

    TileGrid g2{2, 2, 16, TilePolicy::DropPartial, 32, 32};
    RawImage checker = reassemble(g2, {0.0, 1.0, 1.0, 0.0});
    CHECK(checker.at(0, 0) == 0);
    CHECK(checker.at(0, 31) == 255);
    CHECK(checker.at(31, 0) == 255);
    CHECK(checker.at(31, 31) == 0);

    TileGrid g3{1, 7, 8, TilePolicy::DropPartial, 8, 56};
    RawImage mid = reassemble(g3, std::vector<double>(7, 0.5));
    for (auto p : mid.pixels) CHECK(p == 128);  // 127.5 rounds half up
}

TEST_CASE("reassemble rejects value-count mismatch") {
    TileGrid g{2, 2, 16, TilePolicy::DropPartial, 32, 32};
    CHECK_THROWS_AS(reassemble(g, {0.0, 1.0, 1.0}), InvalidArgument);
}

TEST_CASE("reassemble of tile means matches cropped source dimensions") {
    Rng rng(48);
    RawImage img = random_image(rng, 97, 130);
    auto [grid, tiles] = tile(img, 32, TilePolicy::DropPartial);
    std::vector<double> means;
    for (const auto& t : tiles) {
        double m = 0;
        for (auto p : t.pixels) m += p;
        means.push_back(m / (255.0 * double(t.pixels.size())));
    }
    RawImage map = reassemble(grid, means);
    CHECK(map.height == grid.effective_height);
    CHECK(map.width == grid.effective_width);
}

TEST_CASE("PNG round-trip preserves pixels for gray and RGB") {
    Rng rng(49);
    for (int channels : {1, 3}) {
        RawImage img = random_image(rng, 41, 67, channels);
        RawImage back = decode_png(encode_png(img));
        CHECK(back == img);
    }
}

TEST_CASE("decode_png rejects garbage") {
    CHECK_THROWS_AS(decode_png("definitely not a png"), FormatError);
}

TEST_CASE("tile manifest round-trips records") {
    std::vector<TileRecord> recs = {
        {"img_a", 0, 0, "tiles/img_a_r0_c0.png"},
        {"img_a", 0, 1, "tiles/img_a_r0_c1.png"},
        {"img_b", 3, 2, "tiles/img_b_r3_c2.png"},
    };
    auto parsed = parse_tile_manifest(format_tile_manifest(recs));
    REQUIRE(parsed.size() == 3);
    CHECK(parsed[2].source_id == "img_b");
    CHECK(parsed[2].row == 3);
    CHECK(parsed[2].col == 2);
    CHECK(parsed[2].relative_path == "tiles/img_b_r3_c2.png");

    CHECK_THROWS_AS(parse_tile_manifest("only,two,fields"), FormatError);
}
