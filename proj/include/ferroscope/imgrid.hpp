// Grid tiling: divide raw images into fixed-size square unit images on an
// M x N grid and reassemble per-tile values into full-resolution maps.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ferroscope/image.hpp"

namespace ferroscope::imgrid {

struct UnitImage {
    int side = 0;
    int row = 0;
    int col = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;  // side*side*channels, row-major
    std::string source_id;

    std::uint8_t& at(int y, int x, int c = 0) {
        return pixels[(std::size_t(y) * std::size_t(side) + std::size_t(x)) * std::size_t(channels) +
                      std::size_t(c)];
    }
    const std::uint8_t& at(int y, int x, int c = 0) const {
        return pixels[(std::size_t(y) * std::size_t(side) + std::size_t(x)) * std::size_t(channels) +
                      std::size_t(c)];
    }
};

enum class TilePolicy { ScaleUp, DropPartial };

inline const char* to_string(TilePolicy p) {
    return p == TilePolicy::ScaleUp ? "scaleup" : "droppartial";
}

inline TilePolicy tile_policy_from_string(const std::string& s) {
    if (s == "scaleup") return TilePolicy::ScaleUp;
    if (s == "droppartial") return TilePolicy::DropPartial;
    throw InvalidArgument("unknown tile policy: " + s);
}

struct TileGrid {
    int rows = 0;              // M
    int cols = 0;              // N
    int side = 0;
    TilePolicy policy = TilePolicy::ScaleUp;
    int effective_height = 0;  // pixels actually covered
    int effective_width = 0;
};

// Smallest multiple of `side` that covers each dimension; bilinear resampling.
// Dimensions already a multiple are unchanged.
inline RawImage scale_to_multiple(const RawImage& img, int side) {
    if (side < 8) throw InvalidArgument("scale_to_multiple: side must be >= 8, got " + std::to_string(side));
    if (img.height < 1 || img.width < 1) throw InvalidArgument("scale_to_multiple: empty image");
    auto up = [side](int dim) { return ((dim + side - 1) / side) * side; };
    int h = up(img.height), w = up(img.width);
    if (h == img.height && w == img.width) return img;
    return resize_bilinear(img, h, w);
}

// Cuts an M x N grid of side-square tiles, row-major. ScaleUp resamples first
// so both dimensions become exact multiples; DropPartial keeps only full
// tiles anchored at the top-left and discards partial edge strips.
inline std::pair<TileGrid, std::vector<UnitImage>> tile(const RawImage& img, int side, TilePolicy policy,
                                                        const std::string& source_id = "") {
    if (side < 8) throw InvalidArgument("tile: side must be >= 8, got " + std::to_string(side));

    RawImage work = img;
    if (policy == TilePolicy::ScaleUp) {
        work = scale_to_multiple(img, side);
    } else {
        if (img.height / side < 1 || img.width / side < 1)
            throw TooSmallError("tile: image " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                                " smaller than one " + std::to_string(side) + "-pixel tile");
    }

    TileGrid grid;
    grid.side = side;
    grid.policy = policy;
    grid.rows = work.height / side;
    grid.cols = work.width / side;
    grid.effective_height = grid.rows * side;
    grid.effective_width = grid.cols * side;

    std::vector<UnitImage> tiles;
    tiles.reserve(std::size_t(grid.rows) * std::size_t(grid.cols));
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            UnitImage u;
            u.side = side;
            u.row = r;
            u.col = c;
            u.channels = work.channels;
            u.source_id = source_id;
            u.pixels.resize(std::size_t(side) * std::size_t(side) * std::size_t(work.channels));
            for (int y = 0; y < side; ++y) {
                const std::uint8_t* src = &work.at(r * side + y, c * side, 0);
                std::memcpy(&u.at(y, 0, 0), src, std::size_t(side) * std::size_t(work.channels));
            }
            tiles.push_back(std::move(u));
        }
    }
    return {grid, std::move(tiles)};
}

// Expands one scalar per tile into a single-channel image of the grid's
// effective dimensions. Values are affinely mapped from [range_lo, range_hi]
// to [0,255] and quantized round-half-up.
inline RawImage reassemble(const TileGrid& grid, const std::vector<double>& values, double range_lo = 0.0,
                           double range_hi = 1.0) {
    const std::size_t want = std::size_t(grid.rows) * std::size_t(grid.cols);
    if (values.size() != want)
        throw InvalidArgument("reassemble: expected " + std::to_string(want) + " values, got " +
                              std::to_string(values.size()));
    if (!(range_hi > range_lo)) throw InvalidArgument("reassemble: empty value range");

    RawImage out(grid.effective_height, grid.effective_width, 1);
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            double t = (values[std::size_t(r) * std::size_t(grid.cols) + std::size_t(c)] - range_lo) /
                       (range_hi - range_lo);
            std::uint8_t q = quantize_u8(255.0 * t);
            for (int y = 0; y < grid.side; ++y)
                std::memset(&out.at(r * grid.side + y, c * grid.side), q, std::size_t(grid.side));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tile manifest: one text record per tile, `source_id,row,col,relative_path`.
// ---------------------------------------------------------------------------

struct TileRecord {
    std::string source_id;
    int row = 0;
    int col = 0;
    std::string relative_path;
};

inline std::string format_tile_manifest(const std::vector<TileRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += r.source_id;
        out += ',';
        out += std::to_string(r.row);
        out += ',';
        out += std::to_string(r.col);
        out += ',';
        out += r.relative_path;
        out += '\n';
    }
    return out;
}

inline std::vector<TileRecord> parse_tile_manifest(const std::string& text) {
    std::vector<TileRecord> records;
    std::size_t pos = 0;
    int lineno = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++lineno;
        if (line.empty()) continue;
        std::size_t a = line.find(',');
        std::size_t b = a == std::string::npos ? a : line.find(',', a + 1);
        std::size_t c = b == std::string::npos ? b : line.find(',', b + 1);
        if (c == std::string::npos)
            throw FormatError("tile manifest line " + std::to_string(lineno) + ": expected 4 fields");
        TileRecord r;
        r.source_id = line.substr(0, a);
        try {
            r.row = std::stoi(line.substr(a + 1, b - a - 1));
            r.col = std::stoi(line.substr(b + 1, c - b - 1));
        } catch (const std::exception&) {
            throw FormatError("tile manifest line " + std::to_string(lineno) + ": bad grid index");
        }
        r.relative_path = line.substr(c + 1);
        records.push_back(std::move(r));
    }
    return records;
}

inline RawImage to_image(const UnitImage& u) {
    RawImage img(u.side, u.side, u.channels);
    img.pixels = u.pixels;
    return img;
}

inline UnitImage from_image(const RawImage& img, const std::string& source_id = "", int row = 0, int col = 0) {
    if (img.height != img.width) throw ShapeError("unit image must be square");
    UnitImage u;
    u.side = img.height;
    u.row = row;
    u.col = col;
    u.channels = img.channels;
    u.pixels = img.pixels;
    u.source_id = source_id;
    return u;
}

}  // namespace ferroscope::imgrid
