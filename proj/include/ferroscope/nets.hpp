// Builders for the three pipeline networks: tile classifier, U-Net style
// generator, and the patch discriminator whose final convolution activation
// is the anomaly feature vector.

#pragma once

#include "ferroscope/imgrid.hpp"
#include "ferroscope/network.hpp"

namespace ferroscope::nets {

using imgrid::UnitImage;
using nn::Network;

// ---------------------------------------------------------------------------
// Class catalog: ordered labels, the anomalous subset A, and the
// region-of-interest subset.
// ---------------------------------------------------------------------------

struct ClassCatalog {
    std::vector<std::string> names;
    std::vector<int> anomalous_set;
    std::vector<int> roi_set;

    int size() const { return int(names.size()); }

    int index_of(const std::string& name) const {
        for (int i = 0; i < size(); ++i)
            if (names[std::size_t(i)] == name) return i;
        throw InvalidArgument("unknown class name: " + name);
    }

    bool is_background(int cls) const {
        for (int r : roi_set)
            if (r == cls) return false;
        return true;
    }

    void validate() const {
        if (size() < 2) throw ConfigError("catalog needs at least 2 classes");
        for (int a : anomalous_set) {
            if (a < 0 || a >= size()) throw ConfigError("anomalous class index out of range");
            if (is_background(a)) throw ConfigError("anomalous class '" + names[std::size_t(a)] +
                                                    "' cannot be a background class");
        }
        for (int r : roi_set)
            if (r < 0 || r >= size()) throw ConfigError("roi class index out of range");
    }

    // The six-class strip-steel catalog: normal, four defect families,
    // background.
    static ClassCatalog steel_six() {
        ClassCatalog c;
        c.names = {"normal", "rolled_scale", "scratch", "patch", "inclusion", "background"};
        c.anomalous_set = {1, 2, 3, 4};
        c.roi_set = {0, 1, 2, 3, 4};
        return c;
    }
};

struct ClassProbs {
    std::vector<float> probs;

    int argmax() const {
        int best = 0;
        for (int i = 1; i < int(probs.size()); ++i)
            if (probs[std::size_t(i)] > probs[std::size_t(best)]) best = i;
        return best;
    }
};

using FeatureVector = std::vector<float>;

// ---------------------------------------------------------------------------
// Network configuration and presets
// ---------------------------------------------------------------------------

enum class Preset { Desk, PaperScale };

struct NetConfig {
    int input_side = 32;
    int input_channels = 1;
    int encoder_depth = 2;       // downsampling stages (generator & classifier)
    int base_channels = 8;       // first-stage channel count
    int decoder_multiplier = 4;  // decoder channel expansion
    int bridge_blocks = 3;       // conv+PReLU blocks between encoder and decoder
    double dropout_rate = 0.5;   // before each decoder block

    int disc_downsamplings = 4;     // stride-2 conv blocks
    int disc_base_channels = 4;     // first discriminator stage channels
    int disc_feature_channels = 16; // channels of the final (feature) conv
    int disc_final_pad = 1;         // padding of the final conv

    static NetConfig desk() { return NetConfig{}; }

    static NetConfig paper_scale() {
        NetConfig c;
        c.input_side = 100;
        c.input_channels = 3;
        c.encoder_depth = 2;
        c.base_channels = 64;
        c.decoder_multiplier = 4;
        c.bridge_blocks = 3;
        c.disc_downsamplings = 4;
        c.disc_base_channels = 32;
        c.disc_feature_channels = 256;
        c.disc_final_pad = 0;
        return c;
    }

    static NetConfig preset(Preset p) { return p == Preset::Desk ? desk() : paper_scale(); }

    void validate() const {
        if (encoder_depth < 1) throw ConfigError("encoder_depth must be >= 1");
        if (decoder_multiplier < 1) throw ConfigError("decoder_multiplier must be >= 1");
        if (bridge_blocks < 1) throw ConfigError("bridge_blocks must be >= 1");
        if (base_channels < 1 || disc_base_channels < 1 || disc_feature_channels < 1)
            throw ConfigError("channel counts must be >= 1");
        if (input_channels != 1 && input_channels != 3) throw ConfigError("input_channels must be 1 or 3");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("dropout_rate must be in [0,1)");
    }

    void require_pool_divisibility() const {
        if (input_side % (1 << encoder_depth) != 0)
            throw ConfigError("input_side " + std::to_string(input_side) + " not divisible by 2^" +
                              std::to_string(encoder_depth));
    }

    // Spatial side of the discriminator's feature map.
    int disc_feature_side() const {
        if (input_side < (1 << disc_downsamplings))
            throw ConfigError("input_side must be >= 2^disc_downsamplings");
        int s = input_side;
        for (int i = 0; i < disc_downsamplings; ++i) s = (s + 2 * 1 - 4) / 2 + 1;
        s = s + 2 * disc_final_pad - 3 + 1;
        if (s < 1) throw ConfigError("discriminator configuration collapses the feature map");
        return s;
    }

    int feature_dim() const {
        const int s = disc_feature_side();
        return disc_feature_channels * s * s;
    }
};

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

// encoder_depth blocks of conv3x3 -> ReLU -> MaxPool2, then a dense layer to
// one logit per class and a softmax output.
inline Network build_classifier(const NetConfig& cfg, const ClassCatalog& catalog) {
    cfg.validate();
    catalog.validate();
    cfg.require_pool_divisibility();

    Network net;
    net.param_prefix = "cls";
    net.input_shape = {cfg.input_channels, cfg.input_side, cfg.input_side};
    int prev = -1;
    int ch = cfg.input_channels;
    int side = cfg.input_side;
    for (int s = 0; s < cfg.encoder_depth; ++s) {
        const int out_ch = cfg.base_channels << s;
        prev = net.add(std::make_unique<nn::Conv2d>(ch, out_ch, 3, 1, 1), {prev});
        prev = net.add(std::make_unique<nn::ReLU>(), {prev});
        prev = net.add(std::make_unique<nn::MaxPool2>(), {prev});
        ch = out_ch;
        side /= 2;
    }
    prev = net.add(std::make_unique<nn::Dense>(ch * side * side, catalog.size()), {prev});
    net.set_tap("logits", prev);
    prev = net.add(std::make_unique<nn::Softmax>(), {prev});
    net.set_tap("probs", prev);
    net.set_output(prev);
    return net;
}

// U-Net style generator: VGG-style encoder (stacked conv3x3+ReLU, MaxPool2
// between stages, channels doubling per stage), a bridge of conv+PReLU
// blocks, a decoder mirroring the encoder with channel counts multiplied by
// decoder_multiplier, skip concatenations at matching scales, a dropout
// before each decoder block, and a final conv + sigmoid.
inline Network build_generator(const NetConfig& cfg) {
    cfg.validate();
    cfg.require_pool_divisibility();

    Network net;
    net.param_prefix = "gen";
    net.input_shape = {cfg.input_channels, cfg.input_side, cfg.input_side};
    int prev = -1;
    int ch = cfg.input_channels;
    std::vector<int> skip_nodes;
    std::vector<int> skip_channels;

    for (int s = 0; s < cfg.encoder_depth; ++s) {
        const int out_ch = cfg.base_channels << s;
        prev = net.add(std::make_unique<nn::Conv2d>(ch, out_ch, 3, 1, 1), {prev});
        prev = net.add(std::make_unique<nn::ReLU>(), {prev});
        prev = net.add(std::make_unique<nn::Conv2d>(out_ch, out_ch, 3, 1, 1), {prev});
        prev = net.add(std::make_unique<nn::ReLU>(), {prev});
        skip_nodes.push_back(prev);
        skip_channels.push_back(out_ch);
        prev = net.add(std::make_unique<nn::MaxPool2>(), {prev});
        ch = out_ch;
    }

    const int bridge_ch = cfg.base_channels << cfg.encoder_depth;
    for (int b = 0; b < cfg.bridge_blocks; ++b) {
        prev = net.add(std::make_unique<nn::Conv2d>(b == 0 ? ch : bridge_ch, bridge_ch, 3, 1, 1), {prev});
        prev = net.add(std::make_unique<nn::PReLU>(), {prev});
    }
    ch = bridge_ch;

    for (int s = cfg.encoder_depth - 1; s >= 0; --s) {
        const int dec_ch = cfg.decoder_multiplier * skip_channels[std::size_t(s)];
        prev = net.add(std::make_unique<nn::Dropout>(cfg.dropout_rate), {prev});
        prev = net.add(std::make_unique<nn::Upsample2x>(), {prev});
        prev = net.add(std::make_unique<nn::Conv2d>(ch, dec_ch, 3, 1, 1), {prev});
        prev = net.add(std::make_unique<nn::ReLU>(), {prev});
        prev = net.add(std::make_unique<nn::Concat>(), {prev, skip_nodes[std::size_t(s)]});
        prev = net.add(std::make_unique<nn::Conv2d>(dec_ch + skip_channels[std::size_t(s)], dec_ch, 3, 1, 1),
                       {prev});
        prev = net.add(std::make_unique<nn::ReLU>(), {prev});
        ch = dec_ch;
    }

    prev = net.add(std::make_unique<nn::Conv2d>(ch, cfg.input_channels, 3, 1, 1), {prev});
    prev = net.add(std::make_unique<nn::Sigmoid>(), {prev});
    net.set_output(prev);
    return net;
}

// Patch discriminator: disc_downsamplings stride-2 conv+ELU blocks, a final
// conv+ELU whose flattened activation is the feature vector, then a dense
// layer to a single real/fake probability.
inline Network build_discriminator(const NetConfig& cfg) {
    cfg.validate();
    const int feat_dim = cfg.feature_dim();  // throws ConfigError when degenerate

    Network net;
    net.param_prefix = "disc";
    net.input_shape = {cfg.input_channels, cfg.input_side, cfg.input_side};
    int prev = -1;
    int ch = cfg.input_channels;
    for (int s = 0; s < cfg.disc_downsamplings; ++s) {
        const int out_ch = cfg.disc_base_channels << s;
        prev = net.add(std::make_unique<nn::Conv2d>(ch, out_ch, 4, 2, 1), {prev});
        prev = net.add(std::make_unique<nn::ELU>(), {prev});
        ch = out_ch;
    }
    prev = net.add(std::make_unique<nn::Conv2d>(ch, cfg.disc_feature_channels, 3, 1, cfg.disc_final_pad),
                   {prev});
    prev = net.add(std::make_unique<nn::ELU>(), {prev});
    net.set_tap("feature", prev);
    prev = net.add(std::make_unique<nn::Dense>(feat_dim, 1), {prev});
    prev = net.add(std::make_unique<nn::Sigmoid>(), {prev});
    net.set_output(prev);
    return net;
}

// ---------------------------------------------------------------------------
// Tile <-> tensor conversion and the three inference entry points
// ---------------------------------------------------------------------------

inline nn::Tensor to_tensor(const UnitImage& tile) {
    nn::Tensor t({1, tile.channels, tile.side, tile.side});
    const float inv = 1.0f / 255.0f;
    for (int c = 0; c < tile.channels; ++c)
        for (int y = 0; y < tile.side; ++y)
            for (int x = 0; x < tile.side; ++x) t.at(0, c, y, x) = float(tile.at(y, x, c)) * inv;
    return t;
}

inline nn::Tensor to_tensor_batch(const std::vector<const UnitImage*>& tiles) {
    if (tiles.empty()) throw InvalidArgument("to_tensor_batch: empty batch");
    const UnitImage& first = *tiles[0];
    nn::Tensor t({int(tiles.size()), first.channels, first.side, first.side});
    const float inv = 1.0f / 255.0f;
    for (std::size_t n = 0; n < tiles.size(); ++n) {
        const UnitImage& u = *tiles[n];
        if (u.side != first.side || u.channels != first.channels)
            throw ShapeError("to_tensor_batch: mixed tile geometry");
        for (int c = 0; c < u.channels; ++c)
            for (int y = 0; y < u.side; ++y)
                for (int x = 0; x < u.side; ++x) t.at(int(n), c, y, x) = float(u.at(y, x, c)) * inv;
    }
    return t;
}

// Softmax distribution over the catalog classes for one tile.
inline ClassProbs classify(const Network& classifier, const UnitImage& tile) {
    nn::Tape tape = classifier.forward(to_tensor(tile), nn::Mode::Eval);
    const nn::Tensor& probs = tape.out[std::size_t(classifier.tap("probs"))];
    return ClassProbs{probs.data};
}

// Reconstruction in [0,1], same shape as the input tile.
inline nn::Tensor generate(const Network& generator, const UnitImage& tile) {
    nn::Tape tape = generator.forward(to_tensor(tile), nn::Mode::Eval);
    return generator.output_of(tape);
}

// Flattened final-convolution activation (post-ELU), channel-major order.
inline FeatureVector extract_feature(const Network& discriminator, const UnitImage& tile) {
    nn::Tape tape = discriminator.forward(to_tensor(tile), nn::Mode::Eval);
    const nn::Tensor& feat = tape.out[std::size_t(discriminator.tap("feature"))];
    for (float v : feat.data)
        if (!std::isfinite(v)) throw NumericError("extract_feature: non-finite activation");
    return feat.data;
}

inline imgrid::UnitImage tensor_to_tile(const nn::Tensor& t, const std::string& source_id = "",
                                        int row = 0, int col = 0) {
    if (t.rank() != 4 || t.dim(0) != 1 || t.dim(2) != t.dim(3))
        throw ShapeError("tensor_to_tile: expected [1,C,S,S], got " + t.shape_str());
    imgrid::UnitImage u;
    u.side = t.dim(2);
    u.channels = t.dim(1);
    u.row = row;
    u.col = col;
    u.source_id = source_id;
    u.pixels.resize(std::size_t(u.side) * std::size_t(u.side) * std::size_t(u.channels));
    for (int c = 0; c < u.channels; ++c)
        for (int y = 0; y < u.side; ++y)
            for (int x = 0; x < u.side; ++x) u.at(y, x, c) = quantize_u8(255.0 * double(t.at(0, c, y, x)));
    return u;
}

}  // namespace ferroscope::nets
