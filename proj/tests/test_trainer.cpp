#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "ferroscope/trainer.hpp"

using namespace ferroscope;
using namespace ferroscope::trainer;
using synthdata::LabeledTile;

namespace {

// two trivially separable classes: uniform dark vs uniform bright tiles
std::vector<LabeledTile> toy_two_class(int per_class, int side, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<LabeledTile> tiles;
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < per_class; ++i) {
            imgrid::UnitImage u;
            u.side = side;
            u.channels = 1;
            u.source_id = "toy_" + std::to_string(c) + "_" + std::to_string(i);
            u.pixels.resize(std::size_t(side) * std::size_t(side));
            const int base = c == 0 ? 40 : 210;
            for (auto& p : u.pixels) p = std::uint8_t(base + int(rng.range(20)));
            tiles.push_back({u, c, {}});
        }
    }
    return tiles;
}

nets::ClassCatalog two_class_catalog() {
    nets::ClassCatalog c;
    c.names = {"dark", "bright"};
    c.anomalous_set = {1};
    c.roi_set = {0, 1};
    return c;
}

}  // namespace

TEST_CASE("split sizes follow floor arithmetic") {
    Split s = split_indices(13774, 0.8, 1);
    CHECK(s.train.size() == 11019);
    CHECK(s.test.size() == 2755);
}

TEST_CASE("split is a deterministic partition, different across seeds") {
    Split a = split_indices(10, 0.8, 5);
    Split b = split_indices(10, 0.8, 5);
    Split c = split_indices(10, 0.8, 6);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK(a.train != c.train);
    CHECK(a.train.size() == c.train.size());

    std::set<std::size_t> all(a.train.begin(), a.train.end());
    all.insert(a.test.begin(), a.test.end());
    CHECK(all.size() == 10);
}

TEST_CASE("stratified split forces one per side per class") {
    std::vector<int> labels = {0, 0, 1, 1};
    Split s = split_indices_stratified(labels, 0.5, 7);
    CHECK(s.train.size() == 2);
    CHECK(s.test.size() == 2);
    std::set<int> train_classes, test_classes;
    for (auto i : s.train) train_classes.insert(labels[i]);
    for (auto i : s.test) test_classes.insert(labels[i]);
    CHECK(train_classes == std::set<int>{0, 1});
    CHECK(test_classes == std::set<int>{0, 1});
}

TEST_CASE("stratified split rejects singleton classes") {
    std::vector<int> labels = {0, 0, 1};
    CHECK_THROWS_AS(split_indices_stratified(labels, 0.8, 1), StratificationError);
}

TEST_CASE("classifier reaches full accuracy on separable toy data") {
    auto tiles = toy_two_class(64, 16, 21);
    nets::NetConfig cfg = nets::NetConfig::desk();
    cfg.input_side = 16;
    cfg.encoder_depth = 2;
    cfg.base_channels = 4;
    nn::Network net = nets::build_classifier(cfg, two_class_catalog());
    net.initialize(22);

    TrainConfig tc;
    tc.batch_size = 8;
    tc.epochs = 5;
    tc.learning_rate = 1e-2;
    tc.adam_beta1 = 0.9;
    tc.seed = 23;
    TrainReport rep = train_classifier(net, tiles, two_class_catalog(), tc);
    REQUIRE(rep.losses.size() <= 5);
    CHECK(rep.final_accuracy == 1.0);
}

TEST_CASE("zero-epoch training changes nothing and reports empty losses") {
    auto tiles = toy_two_class(8, 16, 31);
    nets::NetConfig cfg = nets::NetConfig::desk();
    cfg.input_side = 16;
    cfg.base_channels = 4;
    nn::Network net = nets::build_classifier(cfg, two_class_catalog());
    net.initialize(32);
    auto before = net.snapshot_params();

    TrainConfig tc;
    tc.batch_size = 4;
    tc.epochs = 0;
    tc.seed = 33;
    TrainReport rep = train_classifier(net, tiles, two_class_catalog(), tc);
    CHECK(rep.losses.empty());
    auto after = net.snapshot_params();
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i].data == after[i].data);
}

TEST_CASE("diverging classifier run aborts and restores last good parameters") {
    auto tiles = toy_two_class(8, 16, 41);
    nets::NetConfig cfg = nets::NetConfig::desk();
    cfg.input_side = 16;
    cfg.base_channels = 4;
    nn::Network net = nets::build_classifier(cfg, two_class_catalog());
    net.initialize(42);
    auto before = net.snapshot_params();

    TrainConfig tc;
    tc.batch_size = 4;
    tc.epochs = 3;
    tc.learning_rate = 1e18;  // drives logits to inf -> nan loss within the first epoch
    tc.adam_beta1 = 0.9;
    tc.seed = 43;
    TrainReport rep = train_classifier(net, tiles, two_class_catalog(), tc);
    if (rep.aborted_nonfinite) {
        auto after = net.snapshot_params();
        bool matches_some_epoch_snapshot = true;
        // restored parameters are a full epoch-boundary snapshot; at minimum
        // they are finite
        for (auto& t : after)
            for (float v : t.data)
                if (!std::isfinite(v)) matches_some_epoch_snapshot = false;
        CHECK(matches_some_epoch_snapshot);
        CHECK(!rep.warnings.empty());
    } else {
        WARN("loss stayed finite; abort path not exercised");
    }
    (void)before;
}

TEST_CASE("gan step arithmetic matches drop-last batching") {
    CHECK(steps_per_epoch(2070, 4) == 517);
    CHECK(steps_per_epoch(2070, 4) * 8 == 4136);
    CHECK(steps_per_epoch(15, 4) == 3);
}

TEST_CASE("pure autoencoder (lambda_adv = 0) reconstruction improves") {
    synthdata::CorpusConfig ccfg;
    ccfg.tile_side = 16;
    ccfg.seed = 50;
    auto tiles = synthdata::gen_normal(ccfg, 16);

    nets::NetConfig cfg = nets::NetConfig::desk();
    cfg.input_side = 16;
    cfg.base_channels = 4;
    cfg.dropout_rate = 0.0;
    nn::Network gen = nets::build_generator(cfg);
    nn::Network disc = nets::build_discriminator(cfg);
    gen.initialize(51);
    disc.initialize(52);

    TrainConfig tc;
    tc.batch_size = 4;
    tc.epochs = 9;
    tc.learning_rate = 2e-3;
    tc.seed = 53;
    tc.lambda_adv = 0.0;
    tc.lambda_rec = 1.0;
    TrainReport rep = train_gan(gen, disc, tiles, tc);
    REQUIRE(rep.g_rec_losses.size() == 9);

    // smoothed (window 3) reconstruction loss is monotonically non-increasing
    auto smooth = [&](std::size_t i) {
        return (rep.g_rec_losses[i] + rep.g_rec_losses[i + 1] + rep.g_rec_losses[i + 2]) / 3.0;
    };
    for (std::size_t i = 0; i + 3 < rep.g_rec_losses.size() - 1; ++i) {
        INFO("window at " << i);
        CHECK(smooth(i + 1) <= smooth(i) * (1.0 + 1e-9));
    }
    // total = lambda_adv*adv + lambda_rec*rec exactly
    for (std::size_t e = 0; e < rep.g_losses.size(); ++e)
        CHECK(rep.g_losses[e] == tc.lambda_adv * rep.g_adv_losses[e] + tc.lambda_rec * rep.g_rec_losses[e]);
}

TEST_CASE("gan training is bitwise reproducible for a fixed seed") {
    synthdata::CorpusConfig ccfg;
    ccfg.tile_side = 16;
    ccfg.seed = 60;
    auto tiles = synthdata::gen_normal(ccfg, 8);

    auto run = [&](std::uint64_t seed) {
        nets::NetConfig cfg = nets::NetConfig::desk();
        cfg.input_side = 16;
        cfg.base_channels = 4;
        nn::Network gen = nets::build_generator(cfg);
        nn::Network disc = nets::build_discriminator(cfg);
        gen.initialize(61);
        disc.initialize(62);
        TrainConfig tc;
        tc.batch_size = 4;
        tc.epochs = 2;
        tc.seed = seed;
        train_gan(gen, disc, tiles, tc);
        return std::make_pair(nn::serialize_params(gen), nn::serialize_params(disc));
    };
    auto a = run(63);
    auto b = run(63);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
    auto c = run(64);
    CHECK(a.first != c.first);
}

TEST_CASE("gan requires at least one full batch of tiles") {
    synthdata::CorpusConfig ccfg;
    ccfg.tile_side = 16;
    auto tiles = synthdata::gen_normal(ccfg, 2);
    nets::NetConfig cfg = nets::NetConfig::desk();
    cfg.input_side = 16;
    nn::Network gen = nets::build_generator(cfg);
    nn::Network disc = nets::build_discriminator(cfg);
    TrainConfig tc;
    tc.batch_size = 4;
    CHECK_THROWS_AS(train_gan(gen, disc, tiles, tc), InvalidArgument);
}

TEST_CASE("checkpoint round-trip reproduces outputs on random inputs") {
    nets::NetConfig cfg = nets::NetConfig::desk();
    cfg.input_side = 16;
    cfg.base_channels = 4;
    nn::Network gen = nets::build_generator(cfg);
    gen.initialize(70);

    auto dir = std::filesystem::temp_directory_path() / "ferroscope_ckpt_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "gen.ckpt";
    checkpoint(gen, path);
    nn::Network back = restore(path);

    Rng rng(71);
    for (int trial = 0; trial < 10; ++trial) {
        nn::Tensor x({1, 1, 16, 16});
        for (auto& v : x.data) v = rng.unitf();
        CHECK(gen.output_of(gen.forward(x, nn::Mode::Eval)).data ==
              back.output_of(back.forward(x, nn::Mode::Eval)).data);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("corrupted checkpoint magic fails without partial load") {
    nets::NetConfig cfg = nets::NetConfig::desk();
    cfg.input_side = 16;
    nn::Network disc = nets::build_discriminator(cfg);
    disc.initialize(72);

    auto dir = std::filesystem::temp_directory_path() / "ferroscope_ckpt_bad";
    std::filesystem::create_directories(dir);
    const auto path = dir / "disc.ckpt";
    checkpoint(disc, path);

    std::string bytes = read_file(path);
    bytes[0] = 'Z';
    write_file_atomic(path, bytes);
    auto before = disc.snapshot_params();
    CHECK_THROWS_AS(restore_into(disc, path), FormatError);
    auto after = disc.snapshot_params();
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i].data == after[i].data);
    std::filesystem::remove_all(dir);
}

TEST_CASE("restoring into a mismatched shell is a descriptor error") {
    nets::NetConfig cfg = nets::NetConfig::desk();
    cfg.input_side = 16;
    nn::Network gen = nets::build_generator(cfg);
    gen.initialize(73);

    auto dir = std::filesystem::temp_directory_path() / "ferroscope_ckpt_mismatch";
    std::filesystem::create_directories(dir);
    const auto path = dir / "gen.ckpt";
    checkpoint(gen, path);

    nets::NetConfig other = cfg;
    other.base_channels = 6;
    nn::Network shell = nets::build_generator(other);
    CHECK_THROWS_AS(restore_into(shell, path), DescriptorMismatch);
    std::filesystem::remove_all(dir);
}

TEST_CASE("train report text lists one record per epoch") {
    TrainReport r;
    r.seed = 9;
    r.losses = {1.5, 0.8};
    r.test_accuracy = {0.5, 0.75};
    std::string text = format_report(r);
    CHECK(text.find("epoch 0 loss 1.5 test_accuracy 0.5") != std::string::npos);
    CHECK(text.find("epoch 1 loss 0.8 test_accuracy 0.75") != std::string::npos);
    CHECK(text.find("seed 9") != std::string::npos);
}
