// Anomalous feature map: combine per-tile class probabilities and anomaly
// scores into an M x N heat field, render it through the jet colormap
// (optionally blended over the source image), and produce score histograms
// and extreme-tile montages.

#pragma once

#include <iostream>

#include "ferroscope/imgrid.hpp"
#include "ferroscope/nets.hpp"
#include "ferroscope/ocsvm.hpp"

namespace ferroscope::anomap {

using imgrid::RawImage;
using imgrid::TileGrid;
using imgrid::UnitImage;

// AF = norm_score * sum of anomalous-class probabilities; always in [0,1].
inline double anomalous_feature(const nets::ClassProbs& probs, const ocsvm::AnomalyScore& score,
                                const nets::ClassCatalog& catalog) {
    if (catalog.anomalous_set.empty()) throw ConfigError("anomalous_feature: empty anomalous class set");
    if (int(probs.probs.size()) != catalog.size())
        throw InvalidArgument("anomalous_feature: probability vector does not match catalog size");
    double mass = 0.0;
    for (int a : catalog.anomalous_set) {
        if (a < 0 || a >= catalog.size()) throw ConfigError("anomalous_feature: class index out of range");
        mass += double(probs.probs[std::size_t(a)]);
    }
    double af = score.norm_score * mass;
    if (af < -1e-6 || af > 1.0 + 1e-6)
        std::cerr << "anomalous_feature: value " << af << " clamped into [0,1]\n";
    return std::clamp(af, 0.0, 1.0);
}

struct AnomalousFeatureMap {
    TileGrid grid;
    std::vector<double> af;                 // row-major M x N, values in [0,1]
    std::vector<std::uint8_t> background;   // row-major flags; background tiles render black
    double display_scale = 100.0;           // legend labels show af * display_scale
    std::string source_id;
};

inline AnomalousFeatureMap build_map(const TileGrid& grid, std::vector<double> af_values,
                                     std::vector<std::uint8_t> background = {},
                                     const std::string& source_id = "") {
    const std::size_t want = std::size_t(grid.rows) * std::size_t(grid.cols);
    if (af_values.size() != want)
        throw InvalidArgument("build_map: expected " + std::to_string(want) + " values, got " +
                              std::to_string(af_values.size()));
    if (!background.empty() && background.size() != want)
        throw InvalidArgument("build_map: background flags must match the grid");
    for (auto& v : af_values) {
        if (v < -1e-6 || v > 1.0 + 1e-6)
            std::cerr << "build_map: AF value " << v << " clamped into [0,1]\n";
        v = std::clamp(v, 0.0, 1.0);
    }
    if (background.empty()) background.assign(want, 0);
    return {grid, std::move(af_values), std::move(background), 100.0, source_id};
}

// ---------------------------------------------------------------------------
// Jet colormap, fixed 5-anchor definition:
//   0.00 (  0,  0,255)   blue
//   0.25 (  0,255,255)   cyan
//   0.50 (  0,255,  0)   green
//   0.75 (255,255,  0)   yellow
//   1.00 (255,  0,  0)   red
// Linear interpolation between anchors, quantized round-half-up.
// ---------------------------------------------------------------------------

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

inline Rgb jet_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    static constexpr double anchor_t[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    static constexpr int anchor_rgb[5][3] = {
        {0, 0, 255}, {0, 255, 255}, {0, 255, 0}, {255, 255, 0}, {255, 0, 0}};
    int hi = 1;
    while (hi < 4 && t > anchor_t[hi]) ++hi;
    const double w = (t - anchor_t[hi - 1]) / (anchor_t[hi] - anchor_t[hi - 1]);
    Rgb c;
    c.r = quantize_u8(anchor_rgb[hi - 1][0] + w * (anchor_rgb[hi][0] - anchor_rgb[hi - 1][0]));
    c.g = quantize_u8(anchor_rgb[hi - 1][1] + w * (anchor_rgb[hi][1] - anchor_rgb[hi - 1][1]));
    c.b = quantize_u8(anchor_rgb[hi - 1][2] + w * (anchor_rgb[hi][2] - anchor_rgb[hi - 1][2]));
    return c;
}

struct RenderOptions {
    double alpha = 1.0;        // heat weight when blending over a base image
    bool smooth = false;       // bilinear smoothing of the M x N field
    bool legend = false;       // append a labeled color bar on the right
};

namespace detail {

// 5x7 digit glyphs for legend labels
inline const char* digit_rows(int d) {
    static const char* glyphs[10] = {
        "01110""10001""10011""10101""11001""10001""01110",  // 0
        "00100""01100""00100""00100""00100""00100""01110",  // 1
        "01110""10001""00001""00010""00100""01000""11111",  // 2
        "01110""10001""00001""00110""00001""10001""01110",  // 3
        "00010""00110""01010""10010""11111""00010""00010",  // 4
        "11111""10000""11110""00001""00001""10001""01110",  // 5
        "00110""01000""10000""11110""10001""10001""01110",  // 6
        "11111""00001""00010""00100""01000""01000""01000",  // 7
        "01110""10001""10001""01110""10001""10001""01110",  // 8
        "01110""10001""10001""01111""00001""00010""01100",  // 9
    };
    return glyphs[d];
}

inline void draw_number(RawImage& img, int y, int x, int value, Rgb color) {
    const std::string text = std::to_string(value);
    for (std::size_t ci = 0; ci < text.size(); ++ci) {
        const char* rows = digit_rows(text[ci] - '0');
        for (int gy = 0; gy < 7; ++gy)
            for (int gx = 0; gx < 5; ++gx) {
                if (rows[gy * 5 + gx] != '1') continue;
                const int py = y + gy, px = x + int(ci) * 6 + gx;
                if (py >= 0 && py < img.height && px >= 0 && px < img.width) {
                    img.at(py, px, 0) = color.r;
                    img.at(py, px, 1) = color.g;
                    img.at(py, px, 2) = color.b;
                }
            }
    }
}

}  // namespace detail

// Renders the AF field as an RGB heat image of the grid's effective
// dimensions. Background tiles render black. With a base image, the output
// is alpha*heat + (1-alpha)*base outside background tiles.
inline RawImage render(const AnomalousFeatureMap& map, const RawImage* base = nullptr,
                       const RenderOptions& opt = {}) {
    const TileGrid& g = map.grid;
    const int H = g.effective_height, W = g.effective_width;
    if (base) {
        if (base->height != H || base->width != W)
            throw InvalidArgument("render: base image " + std::to_string(base->height) + "x" +
                                  std::to_string(base->width) + " does not cover the grid (" +
                                  std::to_string(H) + "x" + std::to_string(W) + ")");
    }
    if (opt.alpha < 0.0 || opt.alpha > 1.0) throw InvalidArgument("render: alpha must be in [0,1]");

    auto af_at = [&](int r, int c) { return map.af[std::size_t(r) * std::size_t(g.cols) + std::size_t(c)]; };
    auto bg_at = [&](int r, int c) {
        return map.background[std::size_t(r) * std::size_t(g.cols) + std::size_t(c)] != 0;
    };

    RawImage out(H, W, 3);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const int r = y / g.side, c = x / g.side;
            Rgb heat;
            if (bg_at(r, c)) {
                heat = {0, 0, 0};
            } else {
                double t;
                if (opt.smooth) {
                    // bilinear over tile centers
                    const double fy = (double(y) + 0.5) / double(g.side) - 0.5;
                    const double fx = (double(x) + 0.5) / double(g.side) - 0.5;
                    const int r0 = std::clamp(int(std::floor(fy)), 0, g.rows - 1);
                    const int c0 = std::clamp(int(std::floor(fx)), 0, g.cols - 1);
                    const int r1 = std::min(r0 + 1, g.rows - 1);
                    const int c1 = std::min(c0 + 1, g.cols - 1);
                    const double wy = std::clamp(fy - r0, 0.0, 1.0);
                    const double wx = std::clamp(fx - c0, 0.0, 1.0);
                    t = (1 - wy) * ((1 - wx) * af_at(r0, c0) + wx * af_at(r0, c1)) +
                        wy * ((1 - wx) * af_at(r1, c0) + wx * af_at(r1, c1));
                } else {
                    t = af_at(r, c);
                }
                heat = jet_color(t);
            }
            if (base && !bg_at(r, c)) {
                if (opt.alpha == 0.0) {
                    for (int ch = 0; ch < 3; ++ch)
                        out.at(y, x, ch) = base->at(y, x, base->channels == 3 ? ch : 0);
                    continue;
                }
                const double ia = 1.0 - opt.alpha;
                const double br = base->at(y, x, 0);
                const double bgc = base->channels == 3 ? base->at(y, x, 1) : br;
                const double bb = base->channels == 3 ? base->at(y, x, 2) : br;
                out.at(y, x, 0) = quantize_u8(opt.alpha * heat.r + ia * br);
                out.at(y, x, 1) = quantize_u8(opt.alpha * heat.g + ia * bgc);
                out.at(y, x, 2) = quantize_u8(opt.alpha * heat.b + ia * bb);
            } else {
                out.at(y, x, 0) = heat.r;
                out.at(y, x, 1) = heat.g;
                out.at(y, x, 2) = heat.b;
            }
        }
    }

    if (!opt.legend) return out;

    // color bar strip with labels at 0, half, full of the display scale
    const int bar_w = 14, label_w = 6 * 4 + 4, strip_w = bar_w + label_w;
    RawImage full(H, W + strip_w, 3);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x)
            for (int ch = 0; ch < 3; ++ch) full.at(y, x, ch) = out.at(y, x, ch);
        const double t = H > 1 ? 1.0 - double(y) / double(H - 1) : 1.0;
        const Rgb c = jet_color(t);
        for (int x = 0; x < bar_w; ++x) {
            full.at(y, W + x, 0) = c.r;
            full.at(y, W + x, 1) = c.g;
            full.at(y, W + x, 2) = c.b;
        }
        for (int x = bar_w; x < strip_w; ++x) {
            full.at(y, W + x, 0) = 255;
            full.at(y, W + x, 1) = 255;
            full.at(y, W + x, 2) = 255;
        }
    }
    const Rgb black{0, 0, 0};
    detail::draw_number(full, 1, W + bar_w + 2, round_half_up(map.display_scale), black);
    detail::draw_number(full, H / 2 - 3, W + bar_w + 2, round_half_up(map.display_scale / 2), black);
    detail::draw_number(full, H - 8, W + bar_w + 2, 0, black);
    return full;
}

// ---------------------------------------------------------------------------
// Score histogram with sign split (negative side = anomalous).
// ---------------------------------------------------------------------------

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    bool anomalous_side = false;  // bins with hi <= 0
};

inline std::vector<HistogramBin> histogram(const std::vector<double>& values, double bin_width) {
    if (!(bin_width > 0.0)) throw InvalidArgument("histogram: bin_width must be > 0");
    for (double v : values)
        if (!std::isfinite(v)) throw InvalidArgument("histogram: values must be finite");
    if (values.empty()) return {};

    auto bin_of = [bin_width](double v) { return int(std::floor(v / bin_width)); };
    int lo_bin = bin_of(values[0]), hi_bin = lo_bin;
    for (double v : values) {
        lo_bin = std::min(lo_bin, bin_of(v));
        hi_bin = std::max(hi_bin, bin_of(v));
    }
    std::vector<HistogramBin> bins;
    for (int b = lo_bin; b <= hi_bin; ++b)
        bins.push_back({b * bin_width, (b + 1) * bin_width, 0, b < 0});
    for (double v : values) ++bins[std::size_t(bin_of(v) - lo_bin)].count;
    return bins;
}

inline std::string histogram_csv(const std::vector<HistogramBin>& bins) {
    std::string out = "bin_low,bin_high,count,side\n";
    char line[128];
    for (const auto& b : bins) {
        std::snprintf(line, sizeof line, "%.9g,%.9g,%zu,%s\n", b.lo, b.hi, b.count,
                      b.anomalous_side ? "anomalous" : "normal");
        out += line;
    }
    return out;
}

// Bar chart: brown bars on the anomalous side, blue on the normal side,
// black zero axis on white.
inline RawImage render_histogram(const std::vector<HistogramBin>& bins, int height = 240,
                                 int bar_width = 6) {
    const int n = std::max<int>(1, int(bins.size()));
    RawImage img(height, n * bar_width + 2, 3, 255);
    std::size_t peak = 1;
    for (const auto& b : bins) peak = std::max(peak, b.count);
    const Rgb brown{150, 75, 0}, blue{30, 80, 220};
    for (int i = 0; i < int(bins.size()); ++i) {
        const auto& b = bins[std::size_t(i)];
        const int h = int(double(height - 12) * double(b.count) / double(peak));
        const Rgb c = b.anomalous_side ? brown : blue;
        for (int y = height - 1 - h; y < height - 1; ++y)
            for (int x = i * bar_width + 1; x < (i + 1) * bar_width; ++x) {
                img.at(y, x, 0) = c.r;
                img.at(y, x, 1) = c.g;
                img.at(y, x, 2) = c.b;
            }
        if (b.lo == 0.0) {  // zero axis
            for (int y = 0; y < height; ++y)
                for (int ch = 0; ch < 3; ++ch) img.at(y, i * bar_width, ch) = 0;
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// Montage of score extremes. Tiles are sorted by norm_score (descending for
// MostAnomalous), ties broken by (source_id, row, col), and laid out
// row-major on a ceil(sqrt(k)) grid.
// ---------------------------------------------------------------------------

enum class MontageOrder { MostAnomalous, MostNormal };

struct ScoredTile {
    UnitImage tile;
    double norm_score = 0.0;
};

inline RawImage montage(std::vector<ScoredTile> tiles, std::size_t k, MontageOrder order, int rows = 0,
                        int cols = 0) {
    if (k == 0) throw InvalidArgument("montage: k must be >= 1");
    if (k > tiles.size())
        throw InvalidArgument("montage: k = " + std::to_string(k) + " exceeds tile count " +
                              std::to_string(tiles.size()));

    std::stable_sort(tiles.begin(), tiles.end(), [order](const ScoredTile& a, const ScoredTile& b) {
        if (a.norm_score != b.norm_score)
            return order == MontageOrder::MostAnomalous ? a.norm_score > b.norm_score
                                                        : a.norm_score < b.norm_score;
        if (a.tile.source_id != b.tile.source_id) return a.tile.source_id < b.tile.source_id;
        if (a.tile.row != b.tile.row) return a.tile.row < b.tile.row;
        return a.tile.col < b.tile.col;
    });

    if (rows <= 0 || cols <= 0) {
        cols = int(std::ceil(std::sqrt(double(k))));
        rows = int((k + std::size_t(cols) - 1) / std::size_t(cols));
    }
    if (std::size_t(rows) * std::size_t(cols) < k)
        throw InvalidArgument("montage: rows*cols smaller than k");

    const int side = tiles[0].tile.side;
    const int channels = tiles[0].tile.channels;
    for (std::size_t i = 0; i < k; ++i)
        if (tiles[i].tile.side != side || tiles[i].tile.channels != channels)
            throw ShapeError("montage: mixed tile geometry");

    RawImage out(rows * side, cols * side, channels);
    for (std::size_t i = 0; i < k; ++i) {
        const int r = int(i) / cols, c = int(i) % cols;
        const UnitImage& u = tiles[i].tile;
        for (int y = 0; y < side; ++y)
            std::memcpy(&out.at(r * side + y, c * side, 0), &u.at(y, 0, 0),
                        std::size_t(side) * std::size_t(channels));
    }
    return out;
}

}  // namespace ferroscope::anomap
