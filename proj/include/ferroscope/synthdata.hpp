// Synthetic brushed-steel corpus: procedural normal/background textures with
// four injected defect families, plus the directory-layout corpus store used
// for real datasets as well.

#pragma once

#include <algorithm>

#include "ferroscope/imgrid.hpp"
#include "ferroscope/nets.hpp"

namespace ferroscope::synthdata {

using imgrid::UnitImage;

enum class DefectKind { RolledScale, Inclusion, Scratch, Patch };

inline DefectKind defect_kind_from_string(const std::string& s) {
    if (s == "rolled_scale") return DefectKind::RolledScale;
    if (s == "inclusion") return DefectKind::Inclusion;
    if (s == "scratch") return DefectKind::Scratch;
    if (s == "patch") return DefectKind::Patch;
    throw InvalidArgument("unknown defect kind: " + s);
}

struct CorpusConfig {
    int tile_side = 32;
    std::uint64_t seed = 1;
    std::vector<int> counts = std::vector<int>(6, 64);  // per steel_six class

    // normal texture: band-limited streaks along the width plus white noise
    int streak_waves_min = 3;
    int streak_waves_max = 6;
    double streak_freq_min = 2.0;   // cycles per tile
    double streak_freq_max = 8.0;
    double streak_amp = 7.0;        // per-sinusoid amplitude ceiling
    double noise_amp = 6.0;
    double base_gray = 128.0;

    // background texture
    double background_gray = 8.0;
    double background_noise = 3.0;

    // defect intensity ranges
    double scratch_contrast_min = 50.0;
    double scratch_contrast_max = 90.0;
    double patch_offset_min = 30.0;
    double patch_offset_max = 60.0;
    double inclusion_dark_min = 60.0;
    double inclusion_dark_max = 110.0;
    double speckle_amp = 45.0;

    void validate() const {
        if (tile_side < 8) throw ConfigError("tile_side must be >= 8");
        if (counts.size() != 6) throw ConfigError("counts must list all 6 classes");
        for (int c : counts)
            if (c < 0) throw ConfigError("class counts must be >= 0");
    }
};

struct LabeledTile {
    UnitImage tile;
    int label = 0;
    std::vector<std::uint8_t> mask;  // per-pixel defect mask; empty for non-defect classes
};

namespace detail {

inline std::uint8_t clamp_gray(double v) { return quantize_u8(v); }

inline UnitImage blank_tile(int side, const std::string& source_id) {
    UnitImage u;
    u.side = side;
    u.channels = 1;
    u.source_id = source_id;
    u.pixels.assign(std::size_t(side) * std::size_t(side), 0);
    return u;
}

}  // namespace detail

// Brushed-metal texture: mid-gray base, 3..6 seeded sinusoids along the
// width, low-amplitude white noise.
inline UnitImage gen_normal_tile(const CorpusConfig& cfg, std::uint64_t tile_seed,
                                 const std::string& source_id) {
    Rng rng(tile_seed);
    const int side = cfg.tile_side;
    UnitImage u = detail::blank_tile(side, source_id);

    const int waves = cfg.streak_waves_min + rng.range_int(cfg.streak_waves_max - cfg.streak_waves_min + 1);
    const auto nwaves = static_cast<std::size_t>(waves);
    std::vector<double> freq(nwaves), phase(nwaves), amp(nwaves);
    for (int j = 0; j < waves; ++j) {
        freq[std::size_t(j)] = rng.uniform(cfg.streak_freq_min, cfg.streak_freq_max);
        phase[std::size_t(j)] = rng.uniform(0.0, 6.283185307179586);
        amp[std::size_t(j)] = rng.uniform(0.4 * cfg.streak_amp, cfg.streak_amp);
    }
    std::vector<double> band(std::size_t(side), 0.0);
    for (int x = 0; x < side; ++x)
        for (int j = 0; j < waves; ++j)
            band[std::size_t(x)] +=
                amp[std::size_t(j)] *
                std::sin(6.283185307179586 * freq[std::size_t(j)] * double(x) / double(side) +
                         phase[std::size_t(j)]);

    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const double noise = rng.uniform(-cfg.noise_amp, cfg.noise_amp);
            u.at(y, x) = detail::clamp_gray(cfg.base_gray + band[std::size_t(x)] + noise);
        }
    return u;
}

inline UnitImage gen_background_tile(const CorpusConfig& cfg, std::uint64_t tile_seed,
                                     const std::string& source_id) {
    Rng rng(tile_seed);
    UnitImage u = detail::blank_tile(cfg.tile_side, source_id);
    for (auto& p : u.pixels)
        p = detail::clamp_gray(cfg.background_gray + rng.uniform(-cfg.background_noise, cfg.background_noise));
    return u;
}

inline std::vector<LabeledTile> gen_normal(const CorpusConfig& cfg, int n) {
    cfg.validate();
    std::vector<LabeledTile> out;
    out.reserve(std::size_t(std::max(0, n)));
    for (int i = 0; i < n; ++i) {
        std::uint64_t s = Rng::mix(cfg.seed, Rng::mix(0, std::uint64_t(i)));
        out.push_back({gen_normal_tile(cfg, s, "normal_" + std::to_string(i)), 0, {}});
    }
    return out;
}

// Injects one defect into a copy of `tile`. The mask marks exactly the pixels
// whose value changed; everything outside is bit-identical to the input.
inline LabeledTile inject_defect(const UnitImage& tile, DefectKind kind, std::uint64_t seed,
                                 const CorpusConfig& cfg = {}) {
    const int side = tile.side;
    if (tile.channels != 1) throw InvalidArgument("inject_defect: expected a grayscale tile");
    Rng rng(Rng::mix(seed, 0xdefec7));

    std::vector<double> delta(std::size_t(side) * std::size_t(side), 0.0);
    auto add = [&](int y, int x, double d) {
        if (y >= 0 && y < side && x >= 0 && x < side) delta[std::size_t(y) * std::size_t(side) + std::size_t(x)] += d;
    };

    switch (kind) {
        case DefectKind::Scratch: {
            // anti-aliased line, length >= 40% of the side, bright or dark
            const double len = rng.uniform(0.40, 0.90) * side;
            const double angle = rng.uniform(0.0, 3.141592653589793);
            const double cx = rng.uniform(0.25, 0.75) * side;
            const double cy = rng.uniform(0.25, 0.75) * side;
            const double dx = std::cos(angle), dy = std::sin(angle);
            const double half = len / 2.0;
            const double thick = rng.uniform(1.0, 2.2);
            const double contrast =
                (rng.range(2) ? 1.0 : -1.0) * rng.uniform(cfg.scratch_contrast_min, cfg.scratch_contrast_max);
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x) {
                    const double px = x + 0.5 - cx, py = y + 0.5 - cy;
                    double t = px * dx + py * dy;
                    t = std::clamp(t, -half, half);
                    const double qx = px - t * dx, qy = py - t * dy;
                    const double dist = std::sqrt(qx * qx + qy * qy);
                    const double cover = std::clamp(thick / 2.0 + 0.5 - dist, 0.0, 1.0);
                    if (cover > 0.02) add(y, x, contrast * cover);
                }
            break;
        }
        case DefectKind::Patch: {
            // elliptical region with an intensity offset >= patch_offset_min
            const double a = rng.uniform(0.12, 0.30) * side;
            const double b = rng.uniform(0.12, 0.30) * side;
            const double theta = rng.uniform(0.0, 3.141592653589793);
            const double cx = rng.uniform(0.3, 0.7) * side;
            const double cy = rng.uniform(0.3, 0.7) * side;
            const double offset =
                (rng.range(2) ? 1.0 : -1.0) * rng.uniform(cfg.patch_offset_min, cfg.patch_offset_max);
            const double ct = std::cos(theta), st = std::sin(theta);
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x) {
                    const double px = x + 0.5 - cx, py = y + 0.5 - cy;
                    const double u = (px * ct + py * st) / a;
                    const double v = (-px * st + py * ct) / b;
                    const double r = u * u + v * v;
                    if (r <= 1.0) add(y, x, offset * std::min(1.0, 2.0 * (1.0 - r) + 0.25));
                }
            break;
        }
        case DefectKind::Inclusion: {
            // 1..3 small dark blobs; grows the set deterministically if the
            // initial draw undershoots the minimum mask area
            const double min_area = std::max(6.0, 0.005 * side * side);
            int blobs = 1 + rng.range_int(3);
            int drawn = 0;
            double area = 0.0;
            while (drawn < blobs || area < min_area) {
                const double r = rng.uniform(0.045, 0.075) * side;  // diameter 9..15% of side
                const double cx = rng.uniform(r, side - r);
                const double cy = rng.uniform(r, side - r);
                const double dark = rng.uniform(cfg.inclusion_dark_min, cfg.inclusion_dark_max);
                for (int y = int(cy - r) - 1; y <= int(cy + r) + 1; ++y)
                    for (int x = int(cx - r) - 1; x <= int(cx + r) + 1; ++x) {
                        const double px = x + 0.5 - cx, py = y + 0.5 - cy;
                        const double d = std::sqrt(px * px + py * py) / r;
                        if (d <= 1.0) add(y, x, -dark * (0.5 + 0.5 * std::cos(d * 3.141592653589793)));
                    }
                ++drawn;
                area = 0.0;
                for (double dv : delta)
                    if (dv != 0.0) area += 1.0;
                if (drawn > 16) break;
            }
            break;
        }
        case DefectKind::RolledScale: {
            // high-frequency speckle over a random sub-rectangle
            const int w = int(rng.uniform(0.20, 0.55) * side);
            const int h = int(rng.uniform(0.20, 0.55) * side);
            const int x0 = rng.range_int(side - w);
            const int y0 = rng.range_int(side - h);
            for (int y = y0; y < y0 + h; ++y)
                for (int x = x0; x < x0 + w; ++x)
                    if (rng.unit() < 0.6)
                        add(y, x, (rng.range(2) ? 1.0 : -1.0) * rng.uniform(0.5 * cfg.speckle_amp, cfg.speckle_amp));
            break;
        }
        default:
            throw InvalidArgument("inject_defect: unknown defect kind");
    }

    LabeledTile out;
    out.tile = tile;
    out.mask.assign(tile.pixels.size(), 0);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const std::size_t i = std::size_t(y) * std::size_t(side) + std::size_t(x);
            if (delta[i] == 0.0) continue;
            const std::uint8_t v = detail::clamp_gray(double(tile.pixels[i]) + delta[i]);
            if (v != tile.pixels[i]) {
                out.tile.pixels[i] = v;
                out.mask[i] = 1;
            }
        }
    return out;
}

// Generates `n` tiles of the given steel_six class index.
inline std::vector<LabeledTile> gen_class(const CorpusConfig& cfg, int class_index, int n) {
    cfg.validate();
    const auto catalog = nets::ClassCatalog::steel_six();
    if (class_index < 0 || class_index >= catalog.size())
        throw InvalidArgument("gen_class: class index out of range");
    const std::string& name = catalog.names[std::size_t(class_index)];
    std::vector<LabeledTile> out;
    out.reserve(std::size_t(std::max(0, n)));
    for (int i = 0; i < n; ++i) {
        const std::uint64_t s = Rng::mix(cfg.seed, Rng::mix(std::uint64_t(class_index), std::uint64_t(i)));
        const std::string id = name + "_" + std::to_string(i);
        if (name == "normal") {
            out.push_back({gen_normal_tile(cfg, s, id), class_index, {}});
        } else if (name == "background") {
            out.push_back({gen_background_tile(cfg, s, id), class_index, {}});
        } else {
            UnitImage base = gen_normal_tile(cfg, s, id);
            LabeledTile lt = inject_defect(base, defect_kind_from_string(name), Rng::mix(s, 1), cfg);
            lt.label = class_index;
            lt.tile.source_id = id;
            out.push_back(std::move(lt));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Corpus store: corpus/<class_name>/<id>.png plus manifest.csv with
// per-file checksums. The same layout loads real datasets unchanged.
// ---------------------------------------------------------------------------

struct Corpus {
    nets::ClassCatalog catalog;
    std::vector<LabeledTile> tiles;
};

inline constexpr char kManifestHeader[] = "path,class,seed,fnv1a64";

inline std::filesystem::path make_corpus(const CorpusConfig& cfg, const std::filesystem::path& root) {
    cfg.validate();
    const auto catalog = nets::ClassCatalog::steel_six();
    std::string manifest = std::string(kManifestHeader) + "\n";
    for (int c = 0; c < catalog.size(); ++c) {
        const std::string& name = catalog.names[std::size_t(c)];
        std::filesystem::create_directories(root / name);
        auto tiles = gen_class(cfg, c, cfg.counts[std::size_t(c)]);
        for (int i = 0; i < int(tiles.size()); ++i) {
            const std::string rel = name + "/" + std::to_string(i) + ".png";
            const std::string bytes = imgrid::encode_png(imgrid::to_image(tiles[std::size_t(i)].tile));
            write_file_atomic(root / rel, bytes);
            const std::uint64_t tile_seed =
                Rng::mix(cfg.seed, Rng::mix(std::uint64_t(c), std::uint64_t(i)));
            char line[512];
            std::snprintf(line, sizeof line, "%s,%s,%llu,%016llx\n", rel.c_str(), name.c_str(),
                          (unsigned long long)tile_seed,
                          (unsigned long long)fnv1a64(bytes.data(), bytes.size()));
            manifest += line;
        }
    }
    const auto manifest_path = root / "manifest.csv";
    write_file_atomic(manifest_path, manifest);
    return manifest_path;
}

inline Corpus load_corpus(const std::filesystem::path& root) {
    const auto manifest_path = root / "manifest.csv";
    if (!std::filesystem::exists(manifest_path))
        throw CorruptCorpusError("corpus manifest not found: " + manifest_path.string());
    const std::string text = read_file(manifest_path);

    Corpus corpus;
    std::size_t pos = 0;
    int lineno = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++lineno;
        if (line.empty()) continue;
        if (lineno == 1) {
            if (line != kManifestHeader)
                throw CorruptCorpusError("corpus manifest: unexpected header '" + line + "'");
            continue;
        }
        std::size_t a = line.find(',');
        std::size_t b = a == std::string::npos ? a : line.find(',', a + 1);
        std::size_t c = b == std::string::npos ? b : line.find(',', b + 1);
        if (c == std::string::npos)
            throw CorruptCorpusError("corpus manifest line " + std::to_string(lineno) + ": expected 4 fields");
        const std::string rel = line.substr(0, a);
        const std::string cls = line.substr(a + 1, b - a - 1);
        const std::string checksum = line.substr(c + 1);

        int label = -1;
        for (int i = 0; i < corpus.catalog.size(); ++i)
            if (corpus.catalog.names[std::size_t(i)] == cls) label = i;
        if (label < 0) {
            corpus.catalog.names.push_back(cls);
            label = corpus.catalog.size() - 1;
        }

        const auto file_path = root / rel;
        if (!std::filesystem::exists(file_path))
            throw CorruptCorpusError("corpus manifest references absent file: " + rel);
        const std::string bytes = read_file(file_path);
        char sumbuf[32];
        std::snprintf(sumbuf, sizeof sumbuf, "%016llx",
                      (unsigned long long)fnv1a64(bytes.data(), bytes.size()));
        if (checksum != sumbuf)
            throw CorruptCorpusError("corpus checksum mismatch for " + rel);

        LabeledTile lt;
        lt.tile = imgrid::from_image(imgrid::decode_png(bytes), rel);
        lt.label = label;
        corpus.tiles.push_back(std::move(lt));
    }

    // canonical six-class catalog gets its anomalous/roi subsets filled in
    const auto steel = nets::ClassCatalog::steel_six();
    if (corpus.catalog.names == steel.names) corpus.catalog = steel;
    return corpus;
}

}  // namespace ferroscope::synthdata
