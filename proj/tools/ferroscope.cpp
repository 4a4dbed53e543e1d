// ferroscope CLI: end-to-end steel anomaly detection pipeline.
// Subcommands: synth | tile | train-cls | train-gan | features | fit-svm |
//              score | map | montage | hist | eval
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical
// failure.

#include <CLI11.hpp>

#include <iostream>

#include "ferroscope/anomap.hpp"
#include "ferroscope/imgrid.hpp"
#include "ferroscope/metrics.hpp"
#include "ferroscope/nets.hpp"
#include "ferroscope/ocsvm.hpp"
#include "ferroscope/synthdata.hpp"
#include "ferroscope/trainer.hpp"

namespace fs = std::filesystem;
using namespace ferroscope;

namespace {

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        auto comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        out.push_back(s.substr(pos, comma - pos));
        pos = comma + 1;
    }
    if (!out.empty() && out.back().empty()) out.pop_back();
    return out;
}

std::string tile_id(const std::string& source, int row, int col) {
    return source + ":r" + std::to_string(row) + ":c" + std::to_string(col);
}

struct CatalogOptions {
    std::string classes = "normal,rolled_scale,scratch,patch,inclusion,background";
    std::string anomalous = "rolled_scale,scratch,patch,inclusion";
    std::string background = "background";

    void attach(CLI::App* cmd) {
        cmd->add_option("--classes", classes, "Ordered class names (training order)")
            ->capture_default_str();
        cmd->add_option("--anomalous-classes", anomalous, "Comma-separated anomalous class names")
            ->capture_default_str();
        cmd->add_option("--background-classes", background, "Comma-separated background class names")
            ->capture_default_str();
    }

    nets::ClassCatalog build() const {
        nets::ClassCatalog cat;
        cat.names = split_csv(classes);
        const auto bg = split_csv(background);
        for (int i = 0; i < cat.size(); ++i) {
            bool is_bg = false;
            for (const auto& b : bg) is_bg |= (cat.names[std::size_t(i)] == b);
            if (!is_bg) cat.roi_set.push_back(i);
        }
        for (const auto& name : split_csv(anomalous)) cat.anomalous_set.push_back(cat.index_of(name));
        cat.validate();
        return cat;
    }
};

struct NetOptions {
    nets::NetConfig cfg = nets::NetConfig::desk();

    void attach(CLI::App* cmd, int default_depth) {
        cfg.encoder_depth = default_depth;
        cmd->add_option("--input-side", cfg.input_side, "Tile side the network consumes")
            ->capture_default_str();
        cmd->add_option("--input-channels", cfg.input_channels, "1 (gray) or 3 (RGB)")
            ->capture_default_str();
        cmd->add_option("--depth", cfg.encoder_depth, "Encoder downsampling stages")
            ->capture_default_str();
        cmd->add_option("--base-channels", cfg.base_channels, "First-stage channel count")
            ->capture_default_str();
        cmd->add_option("--decoder-multiplier", cfg.decoder_multiplier, "Decoder channel expansion")
            ->capture_default_str();
        cmd->add_option("--bridge-blocks", cfg.bridge_blocks, "Bridge conv+PReLU blocks")
            ->capture_default_str();
        cmd->add_option("--dropout", cfg.dropout_rate, "Decoder dropout rate")->capture_default_str();
        cmd->add_option("--disc-downsamplings", cfg.disc_downsamplings, "Discriminator stride-2 stages")
            ->capture_default_str();
        cmd->add_option("--disc-base-channels", cfg.disc_base_channels,
                        "First discriminator stage channels")
            ->capture_default_str();
        cmd->add_option("--disc-feature-channels", cfg.disc_feature_channels,
                        "Channels of the feature convolution")
            ->capture_default_str();
        cmd->add_option("--disc-final-pad", cfg.disc_final_pad, "Padding of the feature convolution")
            ->capture_default_str();
    }
};

struct TrainOptions {
    trainer::TrainConfig cfg;

    void attach(CLI::App* cmd, int default_epochs, int default_batch, double default_lr,
                double default_beta1) {
        cfg.epochs = default_epochs;
        cfg.batch_size = default_batch;
        cfg.learning_rate = default_lr;
        cfg.adam_beta1 = default_beta1;
        cmd->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
        cmd->add_option("--batch-size", cfg.batch_size, "Mini-batch size")->capture_default_str();
        cmd->add_option("--lr", cfg.learning_rate, "Adam learning rate")->capture_default_str();
        cmd->add_option("--beta1", cfg.adam_beta1, "Adam beta1")->capture_default_str();
        cmd->add_option("--beta2", cfg.adam_beta2, "Adam beta2")->capture_default_str();
        cmd->add_option("--split-ratio", cfg.split_ratio, "Training fraction of the corpus")
            ->capture_default_str();
        cmd->add_option("--lambda-adv", cfg.lambda_adv, "Adversarial loss weight")->capture_default_str();
        cmd->add_option("--lambda-rec", cfg.lambda_rec, "Reconstruction loss weight")
            ->capture_default_str();
    }
};

std::uint64_t* add_seed_option(CLI::App* cmd, std::uint64_t& seed) {
    cmd->add_option("--seed", seed, "RNG seed")->envname("FERROSCOPE_SEED")->capture_default_str();
    return &seed;
}

bool* add_dry_run(CLI::App* cmd, bool& flag) {
    cmd->add_flag("--dry-run", flag, "Print the resolved configuration and exit");
    return &flag;
}

void print_resolved(const CLI::App* cmd) {
    std::cout << "subcommand " << cmd->get_name() << "\n";
    for (const auto* opt : cmd->get_options()) {
        if (opt->get_name() == "--dry-run" || opt->get_name() == "--help") continue;
        const auto results = opt->results();
        std::string value;
        if (!results.empty()) {
            for (const auto& r : results) value += (value.empty() ? "" : ",") + r;
        } else {
            value = opt->get_default_str();
        }
        std::cout << "  " << opt->get_name() << " = " << value << "\n";
    }
}

std::vector<synthdata::LabeledTile> filter_class(const synthdata::Corpus& corpus, const std::string& name) {
    const int idx = corpus.catalog.index_of(name);
    std::vector<synthdata::LabeledTile> out;
    for (const auto& t : corpus.tiles)
        if (t.label == idx) out.push_back(t);
    return out;
}

struct ScoreRow {
    std::string id;
    double raw_v, eq1, norm;
};

std::string format_scores(const std::vector<ScoreRow>& rows) {
    std::string out = "tile_id,raw_v,eq1_score,norm_score\n";
    char line[256];
    auto unsign_zero = [](double v) { return v == 0.0 ? 0.0 : v; };
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%s,%.9g,%.9g,%.9g\n", r.id.c_str(), unsign_zero(r.raw_v),
                      unsign_zero(r.eq1), unsign_zero(r.norm));
        out += line;
    }
    return out;
}

std::vector<ScoreRow> parse_scores(const std::string& text) {
    std::vector<ScoreRow> rows;
    std::size_t pos = 0;
    int lineno = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++lineno;
        if (line.empty() || lineno == 1) continue;  // header
        auto c = line.rfind(',');
        auto b = line.rfind(',', c - 1);
        auto a = line.rfind(',', b - 1);
        if (a == std::string::npos) throw FormatError("scores line " + std::to_string(lineno) + ": bad row");
        ScoreRow r;
        r.id = line.substr(0, a);
        r.raw_v = std::stod(line.substr(a + 1, b - a - 1));
        r.eq1 = std::stod(line.substr(b + 1, c - b - 1));
        r.norm = std::stod(line.substr(c + 1));
        rows.push_back(std::move(r));
    }
    return rows;
}

// Tiles referenced by a tile-directory manifest.
std::vector<imgrid::UnitImage> load_tile_dir(const fs::path& dir) {
    const auto records = imgrid::parse_tile_manifest(read_file(dir / "manifest.txt"));
    std::vector<imgrid::UnitImage> tiles;
    tiles.reserve(records.size());
    for (const auto& rec : records) {
        imgrid::RawImage img = imgrid::read_png(dir / rec.relative_path);
        tiles.push_back(imgrid::from_image(img, rec.source_id, rec.row, rec.col));
    }
    return tiles;
}

// The post-policy view of a raw image (what the tiles actually cover).
imgrid::RawImage policy_view(const imgrid::RawImage& img, const imgrid::TileGrid& grid) {
    imgrid::RawImage work = img;
    if (grid.policy == imgrid::TilePolicy::ScaleUp) work = imgrid::scale_to_multiple(img, grid.side);
    if (work.height == grid.effective_height && work.width == grid.effective_width) return work;
    imgrid::RawImage crop(grid.effective_height, grid.effective_width, work.channels);
    for (int y = 0; y < crop.height; ++y)
        for (int x = 0; x < crop.width; ++x)
            for (int c = 0; c < crop.channels; ++c) crop.at(y, x, c) = work.at(y, x, c);
    return crop;
}

// ---------------------------------------------------------------------------
// Subcommand state
// ---------------------------------------------------------------------------

struct SynthCmd {
    std::string out;
    synthdata::CorpusConfig cfg;
    std::string counts = "64,64,64,64,64,64";
    bool dry_run = false;

    int run() {
        auto parts = split_csv(counts);
        if (parts.size() != 6) throw ConfigError("--counts must list 6 values");
        cfg.counts.clear();
        for (const auto& p : parts) cfg.counts.push_back(std::stoi(p));
        cfg.validate();
        if (dry_run) return 0;
        synthdata::make_corpus(cfg, out);
        std::cout << "wrote corpus with manifest " << (fs::path(out) / "manifest.csv").string() << "\n";
        return 0;
    }
};

struct TileCmd {
    std::string image, out, source_id, policy = "scaleup";
    int side = 32;
    bool dry_run = false;

    int run() {
        if (dry_run) return 0;
        imgrid::RawImage img = imgrid::read_png(image);
        const std::string source = source_id.empty() ? fs::path(image).stem().string() : source_id;
        auto [grid, tiles] = imgrid::tile(img, side, imgrid::tile_policy_from_string(policy), source);
        std::vector<imgrid::TileRecord> records;
        for (const auto& t : tiles) {
            const std::string rel =
                source + "_r" + std::to_string(t.row) + "_c" + std::to_string(t.col) + ".png";
            imgrid::write_png(fs::path(out) / rel, imgrid::to_image(t));
            records.push_back({source, t.row, t.col, rel});
        }
        write_file_atomic(fs::path(out) / "manifest.txt", imgrid::format_tile_manifest(records));
        std::cout << "wrote " << tiles.size() << " tiles (" << grid.rows << "x" << grid.cols << ")\n";
        return 0;
    }
};

struct TrainClsCmd {
    std::string corpus, out;
    NetOptions net;
    TrainOptions train;
    std::uint64_t seed = 1;
    bool dry_run = false;

    int run() {
        if (dry_run) return 0;
        train.cfg.seed = seed;
        synthdata::Corpus data = synthdata::load_corpus(corpus);
        nn::Network cls = nets::build_classifier(net.cfg, data.catalog);
        cls.initialize(seed);
        trainer::TrainReport rep = trainer::train_classifier(cls, data.tiles, data.catalog, train.cfg);
        trainer::checkpoint(cls, out + ".ckpt");
        write_file_atomic(out + ".report.txt", trainer::format_report(rep));
        std::cout << "final test accuracy " << rep.final_accuracy << "\n";
        if (rep.aborted_nonfinite) {
            std::cerr << "training aborted on non-finite loss\n";
            return 3;
        }
        return 0;
    }
};

struct TrainGanCmd {
    std::string corpus, out, tile_class = "normal";
    NetOptions net;
    TrainOptions train;
    std::uint64_t seed = 1;
    bool dry_run = false;

    int run() {
        if (dry_run) return 0;
        train.cfg.seed = seed;
        synthdata::Corpus data = synthdata::load_corpus(corpus);
        auto normals = filter_class(data, tile_class);
        nn::Network gen = nets::build_generator(net.cfg);
        nn::Network disc = nets::build_discriminator(net.cfg);
        gen.initialize(Rng::mix(seed, 1));
        disc.initialize(Rng::mix(seed, 2));
        trainer::TrainReport rep = trainer::train_gan(gen, disc, normals, train.cfg);
        trainer::checkpoint(gen, out + ".gen.ckpt");
        trainer::checkpoint(disc, out + ".disc.ckpt");
        write_file_atomic(out + ".report.txt", trainer::format_report(rep));
        for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
        if (rep.aborted_nonfinite) {
            std::cerr << "training aborted on non-finite loss\n";
            return 3;
        }
        std::cout << "trained on " << normals.size() << " tiles; final d_loss "
                  << (rep.d_losses.empty() ? 0.0 : rep.d_losses.back()) << "\n";
        return 0;
    }
};

struct FeaturesCmd {
    std::string model, corpus, tiles, tile_class, out;
    bool dry_run = false;

    int run() {
        if (dry_run) return 0;
        if (corpus.empty() == tiles.empty())
            throw ConfigError("features: exactly one of --corpus or --tiles is required");
        nn::Network disc = trainer::restore(model);

        std::vector<imgrid::UnitImage> units;
        if (!corpus.empty()) {
            synthdata::Corpus data = synthdata::load_corpus(corpus);
            for (const auto& t : data.tiles) {
                if (!tile_class.empty() &&
                    t.label != data.catalog.index_of(tile_class))
                    continue;
                units.push_back(t.tile);
            }
        } else {
            units = load_tile_dir(tiles);
        }
        if (units.empty()) throw DataError("features: no tiles selected");

        std::vector<ocsvm::Feature> rows;
        std::string ids = "tile_id\n";
        for (const auto& u : units) {
            rows.push_back(nets::extract_feature(disc, u));
            ids += tile_id(u.source_id, u.row, u.col) + "\n";
        }
        ocsvm::write_features(out, rows);
        write_file_atomic(out + ".ids.csv", ids);
        std::cout << "wrote " << rows.size() << " features of dimension " << rows[0].size() << "\n";
        return 0;
    }
};

struct FitSvmCmd {
    std::string features, out;
    double nu = 0.1, gamma = 0.0;
    bool no_calibrate = false;
    bool dry_run = false;

    int run() {
        if (dry_run) return 0;
        auto rows = ocsvm::read_features(features);
        ocsvm::OcsvmModel model = ocsvm::fit(rows, nu, gamma);
        if (!model.converged) std::cerr << "warning: solver hit the iteration cap\n";
        if (!no_calibrate) ocsvm::calibrate(model, rows);
        ocsvm::write_model(out, model);
        std::cout << "fit " << model.support_vectors.size() << " support vectors on " << rows.size()
                  << " features (gamma " << model.gamma << ")\n";
        return 0;
    }
};

struct ScoreCmd {
    std::string model, features, out;
    bool recalibrate = false;
    bool dry_run = false;

    int run() {
        if (dry_run) return 0;
        ocsvm::OcsvmModel m = ocsvm::read_model(model);
        auto rows = ocsvm::read_features(features);
        if (recalibrate) ocsvm::calibrate(m, rows);

        std::vector<std::string> ids;
        if (fs::exists(features + ".ids.csv")) {
            const std::string text = read_file(features + ".ids.csv");
            std::size_t pos = 0;
            bool header = true;
            while (pos < text.size()) {
                auto eol = text.find('\n', pos);
                if (eol == std::string::npos) eol = text.size();
                std::string line = text.substr(pos, eol - pos);
                pos = eol + 1;
                if (header) {
                    header = false;
                    continue;
                }
                if (!line.empty()) ids.push_back(line);
            }
        }

        std::vector<ScoreRow> out_rows;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            ocsvm::AnomalyScore s = ocsvm::score(m, rows[i]);
            out_rows.push_back(
                {i < ids.size() ? ids[i] : std::to_string(i), s.raw_v, s.eq1_score, s.norm_score});
        }
        write_file_atomic(out, format_scores(out_rows));
        std::cout << "scored " << out_rows.size() << " tiles\n";
        return 0;
    }
};

struct MapCmd {
    std::string image, classifier, disc, svm, out, policy = "scaleup";
    int side = 32;
    double alpha = 0.6;
    bool smooth = false, legend = false;
    CatalogOptions catalog;
    bool dry_run = false;

    int run() {
        if (dry_run) return 0;
        nets::ClassCatalog cat = catalog.build();
        nn::Network cls = trainer::restore(classifier);
        nn::Network d = trainer::restore(disc);
        ocsvm::OcsvmModel model = ocsvm::read_model(svm);

        imgrid::RawImage raw = imgrid::read_png(image);
        const std::string source = fs::path(image).stem().string();
        auto [grid, tiles] = imgrid::tile(raw, side, imgrid::tile_policy_from_string(policy), source);

        std::vector<double> af(tiles.size());
        std::vector<std::uint8_t> background(tiles.size(), 0);
        std::vector<ScoreRow> score_rows;
        for (std::size_t i = 0; i < tiles.size(); ++i) {
            nets::ClassProbs probs = nets::classify(cls, tiles[i]);
            ocsvm::AnomalyScore s = ocsvm::score(model, nets::extract_feature(d, tiles[i]));
            af[i] = anomap::anomalous_feature(probs, s, cat);
            background[i] = cat.is_background(probs.argmax()) ? 1 : 0;
            score_rows.push_back(
                {tile_id(source, tiles[i].row, tiles[i].col), s.raw_v, s.eq1_score, s.norm_score});
        }

        anomap::AnomalousFeatureMap map = anomap::build_map(grid, af, background, source);
        anomap::RenderOptions opt;
        opt.alpha = 1.0;
        opt.smooth = smooth;
        opt.legend = legend;
        imgrid::RawImage heat = anomap::render(map, nullptr, opt);
        imgrid::write_png(fs::path(out) / ("heat_" + source + ".png"), heat);

        imgrid::RawImage base = policy_view(raw, grid);
        opt.alpha = alpha;
        imgrid::RawImage overlay = anomap::render(map, &base, opt);
        imgrid::write_png(fs::path(out) / ("overlay_" + source + ".png"), overlay);
        write_file_atomic(fs::path(out) / ("scores_" + source + ".csv"), format_scores(score_rows));
        std::cout << "wrote heatmap and overlay for " << grid.rows << "x" << grid.cols << " tiles\n";
        return 0;
    }
};

struct MontageCmd {
    std::string tiles, scores, out, order = "most-anomalous";
    std::size_t k = 100;
    int rows = 0, cols = 0;
    bool dry_run = false;

    int run() {
        if (dry_run) return 0;
        auto units = load_tile_dir(tiles);
        auto score_rows = parse_scores(read_file(scores));
        std::map<std::string, double> norm_by_id;
        for (const auto& r : score_rows) norm_by_id[r.id] = r.norm;

        std::vector<anomap::ScoredTile> scored;
        for (auto& u : units) {
            auto it = norm_by_id.find(tile_id(u.source_id, u.row, u.col));
            if (it == norm_by_id.end())
                throw DataError("montage: no score for tile " + tile_id(u.source_id, u.row, u.col));
            scored.push_back({std::move(u), it->second});
        }
        const auto ord = order == "most-normal" ? anomap::MontageOrder::MostNormal
                                                : anomap::MontageOrder::MostAnomalous;
        imgrid::RawImage img = anomap::montage(std::move(scored), k, ord, rows, cols);
        imgrid::write_png(out, img);
        std::cout << "wrote montage " << img.height << "x" << img.width << "\n";
        return 0;
    }
};

struct HistCmd {
    std::string scores, out, column = "raw";
    double bin_width = 0.05;
    bool dry_run = false;

    int run() {
        if (dry_run) return 0;
        auto rows = parse_scores(read_file(scores));
        std::vector<double> values;
        for (const auto& r : rows)
            values.push_back(column == "eq1" ? r.eq1 : column == "norm" ? r.norm : r.raw_v);
        auto bins = anomap::histogram(values, bin_width);
        write_file_atomic(out + ".csv", anomap::histogram_csv(bins));
        imgrid::write_png(out + ".png", anomap::render_histogram(bins));
        std::cout << "wrote histogram over " << values.size() << " scores in " << bins.size()
                  << " bins\n";
        return 0;
    }
};

struct EvalCmd {
    std::string corpus, model, out;
    double split_ratio = 0.8;
    std::uint64_t seed = 1;
    bool whole_corpus = false;
    bool dry_run = false;

    int run() {
        if (dry_run) return 0;
        synthdata::Corpus data = synthdata::load_corpus(corpus);
        nn::Network cls = trainer::restore(model);

        std::vector<int> labels;
        for (const auto& t : data.tiles) labels.push_back(t.label);
        std::vector<std::size_t> subset;
        if (whole_corpus) {
            subset.resize(data.tiles.size());
            for (std::size_t i = 0; i < subset.size(); ++i) subset[i] = i;
        } else {
            subset = trainer::split_indices_stratified(labels, split_ratio, seed).test;
        }

        std::vector<int> truth, pred;
        for (std::size_t i : subset) {
            truth.push_back(labels[i]);
            pred.push_back(nets::classify(cls, data.tiles[i].tile).argmax());
        }
        metrics::ConfusionMatrix cm = metrics::confusion(truth, pred, data.catalog.size());
        const std::string table = metrics::to_table(cm, data.catalog.names);
        std::cout << table;
        std::cout << "accuracy " << metrics::format_percent(metrics::accuracy(cm)) << "%\n";
        if (!data.catalog.anomalous_set.empty()) {
            try {
                std::cout << "anomalous-class lowest recall "
                          << metrics::format_percent(metrics::key_class_aggregate(
                                 cm, data.catalog.anomalous_set, metrics::Stat::Recall,
                                 metrics::Reduce::Min))
                          << "%\n";
            } catch (const UndefinedStatError&) {
                std::cout << "anomalous-class lowest recall undefined\n";
            }
        }
        if (!out.empty()) {
            write_file_atomic(out + ".csv", metrics::to_csv(cm, data.catalog.names));
            write_file_atomic(out + ".txt", table);
        }
        return 0;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ferroscope: one-class steel surface anomaly detection"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI config file; sections per subcommand");
    app.allow_config_extras(CLI::config_extras_mode::error);

    SynthCmd synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic labeled corpus");
    synth_cmd->add_option("--out", synth.out, "Corpus output directory")->required();
    synth_cmd->add_option("--tile-side", synth.cfg.tile_side, "Tile side in pixels")->capture_default_str();
    synth_cmd->add_option("--counts", synth.counts,
                          "Per-class tile counts: normal,rolled_scale,scratch,patch,inclusion,background")
        ->capture_default_str();
    synth_cmd->add_option("--noise-amp", synth.cfg.noise_amp, "White noise amplitude")
        ->capture_default_str();
    synth_cmd->add_option("--streak-amp", synth.cfg.streak_amp, "Streak sinusoid amplitude")
        ->capture_default_str();
    synth_cmd->add_option("--streak-freq-min", synth.cfg.streak_freq_min, "Lowest streak frequency")
        ->capture_default_str();
    synth_cmd->add_option("--streak-freq-max", synth.cfg.streak_freq_max, "Highest streak frequency")
        ->capture_default_str();
    add_seed_option(synth_cmd, synth.cfg.seed);
    add_dry_run(synth_cmd, synth.dry_run);

    TileCmd tile;
    auto* tile_cmd = app.add_subcommand("tile", "Cut a raw image into unit tiles");
    tile_cmd->add_option("--image", tile.image, "Input PNG")->required();
    tile_cmd->add_option("--out", tile.out, "Tile output directory")->required();
    tile_cmd->add_option("--side", tile.side, "Tile side in pixels")->capture_default_str();
    tile_cmd->add_option("--policy", tile.policy, "scaleup | droppartial")->capture_default_str();
    tile_cmd->add_option("--source-id", tile.source_id, "Source identifier (default: file stem)");
    add_dry_run(tile_cmd, tile.dry_run);

    TrainClsCmd traincls;
    auto* traincls_cmd = app.add_subcommand("train-cls", "Train the tile classifier");
    traincls_cmd->add_option("--corpus", traincls.corpus, "Corpus directory")->required();
    traincls_cmd->add_option("--out", traincls.out, "Checkpoint prefix")->required();
    traincls.net.attach(traincls_cmd, 3);
    traincls.train.attach(traincls_cmd, 10, 16, 1e-3, 0.9);
    add_seed_option(traincls_cmd, traincls.seed);
    add_dry_run(traincls_cmd, traincls.dry_run);

    TrainGanCmd traingan;
    auto* traingan_cmd = app.add_subcommand("train-gan", "Train the generator/discriminator pair");
    traingan_cmd->add_option("--corpus", traingan.corpus, "Corpus directory")->required();
    traingan_cmd->add_option("--out", traingan.out, "Checkpoint prefix")->required();
    traingan_cmd->add_option("--class", traingan.tile_class, "Corpus class to train on")
        ->capture_default_str();
    traingan.net.attach(traingan_cmd, 2);
    traingan.train.attach(traingan_cmd, 8, 4, 2e-4, 0.5);
    add_seed_option(traingan_cmd, traingan.seed);
    add_dry_run(traingan_cmd, traingan.dry_run);

    FeaturesCmd features;
    auto* features_cmd = app.add_subcommand("features", "Extract discriminator features");
    features_cmd->add_option("--model", features.model, "Discriminator checkpoint")->required();
    features_cmd->add_option("--corpus", features.corpus, "Corpus directory source");
    features_cmd->add_option("--tiles", features.tiles, "Tile directory source");
    features_cmd->add_option("--class", features.tile_class, "Restrict corpus source to one class");
    features_cmd->add_option("--out", features.out, "FVEC1 output file")->required();
    add_dry_run(features_cmd, features.dry_run);

    FitSvmCmd fitsvm;
    auto* fitsvm_cmd = app.add_subcommand("fit-svm", "Fit the one-class SVM on features");
    fitsvm_cmd->add_option("--features", fitsvm.features, "FVEC1 training features")->required();
    fitsvm_cmd->add_option("--out", fitsvm.out, "OCSV1 model output")->required();
    fitsvm_cmd->add_option("--nu", fitsvm.nu, "nu parameter in (0,1]")->capture_default_str();
    fitsvm_cmd->add_option("--gamma", fitsvm.gamma, "RBF width (0 = auto)")->capture_default_str();
    fitsvm_cmd->add_flag("--no-calibrate", fitsvm.no_calibrate,
                         "Skip storing min/max decision calibration");
    add_dry_run(fitsvm_cmd, fitsvm.dry_run);

    ScoreCmd score;
    auto* score_cmd = app.add_subcommand("score", "Score features with a fitted model");
    score_cmd->add_option("--model", score.model, "OCSV1 model")->required();
    score_cmd->add_option("--features", score.features, "FVEC1 features to score")->required();
    score_cmd->add_option("--out", score.out, "Scores CSV output")->required();
    score_cmd->add_flag("--recalibrate", score.recalibrate,
                        "Recalibrate min/max on this batch before scoring");
    add_dry_run(score_cmd, score.dry_run);

    MapCmd mapcmd;
    auto* map_cmd = app.add_subcommand("map", "Render anomalous feature maps for a raw image");
    map_cmd->add_option("--image", mapcmd.image, "Raw input PNG")->required();
    map_cmd->add_option("--classifier", mapcmd.classifier, "Classifier checkpoint")->required();
    map_cmd->add_option("--disc", mapcmd.disc, "Discriminator checkpoint")->required();
    map_cmd->add_option("--svm", mapcmd.svm, "OCSV1 model")->required();
    map_cmd->add_option("--out", mapcmd.out, "Output directory")->required();
    map_cmd->add_option("--side", mapcmd.side, "Tile side")->capture_default_str();
    map_cmd->add_option("--policy", mapcmd.policy, "scaleup | droppartial")->capture_default_str();
    map_cmd->add_option("--alpha", mapcmd.alpha, "Overlay heat weight")->capture_default_str();
    map_cmd->add_flag("--smooth", mapcmd.smooth, "Bilinear smoothing of the tile field");
    map_cmd->add_flag("--legend", mapcmd.legend, "Attach a labeled color bar");
    mapcmd.catalog.attach(map_cmd);
    add_dry_run(map_cmd, mapcmd.dry_run);

    MontageCmd montage;
    auto* montage_cmd = app.add_subcommand("montage", "Montage of score extremes");
    montage_cmd->add_option("--tiles", montage.tiles, "Tile directory")->required();
    montage_cmd->add_option("--scores", montage.scores, "Scores CSV")->required();
    montage_cmd->add_option("--out", montage.out, "Output PNG")->required();
    montage_cmd->add_option("--k", montage.k, "Number of tiles")->capture_default_str();
    montage_cmd->add_option("--order", montage.order, "most-anomalous | most-normal")
        ->capture_default_str();
    montage_cmd->add_option("--rows", montage.rows, "Grid rows (0 = auto)")->capture_default_str();
    montage_cmd->add_option("--cols", montage.cols, "Grid cols (0 = auto)")->capture_default_str();
    add_dry_run(montage_cmd, montage.dry_run);

    HistCmd hist;
    auto* hist_cmd = app.add_subcommand("hist", "Histogram of anomaly scores");
    hist_cmd->add_option("--scores", hist.scores, "Scores CSV")->required();
    hist_cmd->add_option("--out", hist.out, "Output prefix (.png and .csv)")->required();
    hist_cmd->add_option("--bin-width", hist.bin_width, "Histogram bin width")->capture_default_str();
    hist_cmd->add_option("--column", hist.column, "raw | eq1 | norm")->capture_default_str();
    add_dry_run(hist_cmd, hist.dry_run);

    EvalCmd eval;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a classifier on a corpus split");
    eval_cmd->add_option("--corpus", eval.corpus, "Corpus directory")->required();
    eval_cmd->add_option("--model", eval.model, "Classifier checkpoint")->required();
    eval_cmd->add_option("--out", eval.out, "Optional output prefix (.csv and .txt)");
    eval_cmd->add_option("--split-ratio", eval.split_ratio, "Training fraction of the split")
        ->capture_default_str();
    eval_cmd->add_flag("--all", eval.whole_corpus, "Evaluate the whole corpus, not the test split");
    add_seed_option(eval_cmd, eval.seed);
    add_dry_run(eval_cmd, eval.dry_run);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        CLI::App* active = app.get_subcommands().front();
        const bool dry = active->count("--dry-run") > 0;
        if (dry) print_resolved(active);
        if (active == synth_cmd) return synth.run();
        if (active == tile_cmd) return tile.run();
        if (active == traincls_cmd) return traincls.run();
        if (active == traingan_cmd) return traingan.run();
        if (active == features_cmd) return features.run();
        if (active == fitsvm_cmd) return fitsvm.run();
        if (active == score_cmd) return score.run();
        if (active == map_cmd) return mapcmd.run();
        if (active == montage_cmd) return montage.run();
        if (active == hist_cmd) return hist.run();
        if (active == eval_cmd) return eval.run();
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const InvalidArgument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
