// Training loops: supervised classifier training, adversarial
// generator/discriminator training, deterministic splitting, checkpointing.

#pragma once

#include <chrono>

#include "ferroscope/losses.hpp"
#include "ferroscope/metrics.hpp"
#include "ferroscope/nets.hpp"
#include "ferroscope/optim.hpp"
#include "ferroscope/synthdata.hpp"

namespace ferroscope::trainer {

using imgrid::UnitImage;
using nn::Network;
using synthdata::LabeledTile;

struct TrainConfig {
    int batch_size = 4;
    int epochs = 8;
    double learning_rate = 2e-4;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    std::uint64_t seed = 1;
    double split_ratio = 0.8;
    double lambda_adv = 1.0;    // adversarial loss weight
    double lambda_rec = 100.0;  // reconstruction (L1) loss weight

    void validate() const {
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (epochs < 0) throw ConfigError("epochs must be >= 0");
        if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must be in (0,1)");
        if (lambda_adv < 0.0 || lambda_rec < 0.0) throw ConfigError("loss weights must be >= 0");
        if (lambda_adv == 0.0 && lambda_rec == 0.0)
            throw ConfigError("loss weights cannot both be zero");
    }
};

struct TrainReport {
    std::vector<double> losses;        // classifier: per-epoch mean cross-entropy
    std::vector<double> d_losses;      // GAN: per-epoch mean discriminator loss
    std::vector<double> g_losses;      // GAN: per-epoch mean total generator loss
    std::vector<double> g_adv_losses;
    std::vector<double> g_rec_losses;
    std::vector<double> test_accuracy;  // classifier: per-epoch held-out accuracy
    metrics::ConfusionMatrix final_confusion;
    double final_accuracy = 0.0;
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    bool aborted_nonfinite = false;
    std::vector<std::string> warnings;
};

inline int steps_per_epoch(std::size_t n, int batch_size) { return int(n / std::size_t(batch_size)); }

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Deterministic shuffle, train size = floor(ratio * n).
inline Split split_indices(std::size_t n, double ratio, std::uint64_t seed) {
    if (n == 0) throw InvalidArgument("split: empty dataset");
    if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("split: ratio must be in (0,1)");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(Rng::mix(seed, 0x5f117));
    rng.shuffle(idx);
    const std::size_t train_n = std::size_t(ratio * double(n));
    Split s;
    s.train.assign(idx.begin(), idx.begin() + std::ptrdiff_t(train_n));
    s.test.assign(idx.begin() + std::ptrdiff_t(train_n), idx.end());
    return s;
}

// Stratified by label: floor(ratio * n_c) per class, clamped so both sides of
// every class are non-empty. Classes with fewer than 2 examples cannot be
// stratified.
inline Split split_indices_stratified(const std::vector<int>& labels, double ratio, std::uint64_t seed) {
    if (labels.empty()) throw InvalidArgument("split: empty dataset");
    if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("split: ratio must be in (0,1)");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    Split s;
    for (auto& [cls, idx] : by_class) {
        if (idx.size() < 2)
            throw StratificationError("class " + std::to_string(cls) + " has fewer than 2 examples");
        Rng rng(Rng::mix(seed, Rng::mix(0x5f117, std::uint64_t(cls))));
        rng.shuffle(idx);
        std::size_t train_n = std::size_t(ratio * double(idx.size()));
        train_n = std::clamp<std::size_t>(train_n, 1, idx.size() - 1);
        s.train.insert(s.train.end(), idx.begin(), idx.begin() + std::ptrdiff_t(train_n));
        s.test.insert(s.test.end(), idx.begin() + std::ptrdiff_t(train_n), idx.end());
    }
    return s;
}

// ---------------------------------------------------------------------------
// Checkpoint + restore: FSCK1 parameter file with the architecture
// descriptor alongside (<path>.arch).
// ---------------------------------------------------------------------------

inline void checkpoint(Network& net, const std::filesystem::path& path) {
    write_file_atomic(path, nn::serialize_params(net));
    std::filesystem::path arch = path;
    arch += ".arch";
    write_file_atomic(arch, nn::to_descriptor(net));
}

inline Network restore(const std::filesystem::path& path) {
    std::filesystem::path arch = path;
    arch += ".arch";
    Network net = nn::network_from_descriptor(read_file(arch));
    nn::load_params(net, read_file(path));
    return net;
}

// Loads parameters into an existing shell; throws DescriptorMismatch when the
// architectures differ.
inline void restore_into(Network& net, const std::filesystem::path& path) {
    nn::load_params(net, read_file(path));
}

// ---------------------------------------------------------------------------
// Classifier training
// ---------------------------------------------------------------------------

namespace detail {

inline nn::Tensor batch_tensor(const std::vector<LabeledTile>& tiles, const std::vector<std::size_t>& order,
                               std::size_t begin, std::size_t count) {
    std::vector<const UnitImage*> ptrs;
    ptrs.reserve(count);
    for (std::size_t i = 0; i < count; ++i) ptrs.push_back(&tiles[order[begin + i]].tile);
    return nets::to_tensor_batch(ptrs);
}

}  // namespace detail

// Minimizes softmax cross-entropy with Adam; evaluates the held-out split
// each epoch. A non-finite loss aborts the run and restores the last
// end-of-epoch parameters.
inline TrainReport train_classifier(Network& classifier, const std::vector<LabeledTile>& tiles,
                                    const nets::ClassCatalog& catalog, const TrainConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<int> labels;
    labels.reserve(tiles.size());
    int distinct = 0;
    {
        std::vector<char> seen(std::size_t(catalog.size()), 0);
        for (const auto& t : tiles) {
            if (t.label < 0 || t.label >= catalog.size())
                throw InvalidArgument("train_classifier: label out of catalog range");
            labels.push_back(t.label);
            if (!seen[std::size_t(t.label)]) {
                seen[std::size_t(t.label)] = 1;
                ++distinct;
            }
        }
    }
    if (distinct < 2) throw InvalidArgument("train_classifier: need at least 2 classes present");

    Split split = split_indices_stratified(labels, cfg.split_ratio, cfg.seed);

    TrainReport report;
    report.seed = cfg.seed;

    nn::Adam adam(classifier,
                  {.lr = cfg.learning_rate, .beta1 = cfg.adam_beta1, .beta2 = cfg.adam_beta2});

    auto evaluate = [&](metrics::ConfusionMatrix& cm_out) {
        std::vector<int> truth, pred;
        const int bs = cfg.batch_size;
        for (std::size_t at = 0; at < split.test.size(); at += std::size_t(bs)) {
            const std::size_t count = std::min<std::size_t>(std::size_t(bs), split.test.size() - at);
            nn::Tensor x = detail::batch_tensor(tiles, split.test, at, count);
            nn::Tape tape = classifier.forward(x, nn::Mode::Eval);
            const nn::Tensor& probs = tape.out[std::size_t(classifier.tap("probs"))];
            for (std::size_t i = 0; i < count; ++i) {
                int best = 0;
                for (int k = 1; k < probs.dim(1); ++k)
                    if (probs.data[i * std::size_t(probs.dim(1)) + std::size_t(k)] >
                        probs.data[i * std::size_t(probs.dim(1)) + std::size_t(best)])
                        best = k;
                pred.push_back(best);
                truth.push_back(labels[split.test[at + i]]);
            }
        }
        cm_out = metrics::confusion(truth, pred, catalog.size());
        return metrics::accuracy(cm_out);
    };

    std::uint64_t global_step = 0;
    auto snapshot = classifier.snapshot_params();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order = split.train;
        Rng erng(Rng::mix(cfg.seed, 0xe90c + std::uint64_t(epoch)));
        erng.shuffle(order);

        const int steps = steps_per_epoch(order.size(), cfg.batch_size);
        double epoch_loss = 0.0;
        bool bad = false;
        for (int s = 0; s < steps; ++s) {
            nn::Tensor x =
                detail::batch_tensor(tiles, order, std::size_t(s) * std::size_t(cfg.batch_size),
                                     std::size_t(cfg.batch_size));
            std::vector<int> y;
            for (int i = 0; i < cfg.batch_size; ++i)
                y.push_back(labels[order[std::size_t(s) * std::size_t(cfg.batch_size) + std::size_t(i)]]);

            classifier.zero_grad();
            nn::Tape tape = classifier.forward(x, nn::Mode::Train, ++global_step);
            nn::LossResult loss =
                nn::cross_entropy(tape.out[std::size_t(classifier.tap("probs"))], y);
            if (!std::isfinite(loss.value)) {
                bad = true;
                break;
            }
            classifier.backward(tape, loss.grad);
            adam.step(classifier);
            epoch_loss += loss.value;
        }
        if (bad) {
            classifier.restore_params(snapshot);
            report.aborted_nonfinite = true;
            report.warnings.push_back("non-finite loss at epoch " + std::to_string(epoch) +
                                      "; restored last good parameters");
            break;
        }
        report.losses.push_back(steps > 0 ? epoch_loss / steps : 0.0);
        metrics::ConfusionMatrix cm;
        report.test_accuracy.push_back(evaluate(cm));
        snapshot = classifier.snapshot_params();
    }

    report.final_accuracy = evaluate(report.final_confusion);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

// ---------------------------------------------------------------------------
// Adversarial training
// ---------------------------------------------------------------------------

// Per step: the discriminator is updated on BCE(real->1, fake->0); the
// generator on lambda_adv * BCE(D(G(x))->1) + lambda_rec * L1(G(x), x).
// Partial trailing batches are dropped.
inline TrainReport train_gan(Network& generator, Network& discriminator,
                             const std::vector<LabeledTile>& normal_tiles, const TrainConfig& cfg) {
    cfg.validate();
    if (normal_tiles.size() < std::size_t(cfg.batch_size))
        throw InvalidArgument("train_gan: need at least one full batch of tiles");
    const auto t0 = std::chrono::steady_clock::now();

    TrainReport report;
    report.seed = cfg.seed;

    nn::Adam adam_g(generator, {.lr = cfg.learning_rate, .beta1 = cfg.adam_beta1, .beta2 = cfg.adam_beta2});
    nn::Adam adam_d(discriminator,
                    {.lr = cfg.learning_rate, .beta1 = cfg.adam_beta1, .beta2 = cfg.adam_beta2});

    std::vector<std::size_t> order(normal_tiles.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::uint64_t global_step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng erng(Rng::mix(cfg.seed, 0x9a9 + std::uint64_t(epoch)));
        erng.shuffle(order);

        const int steps = steps_per_epoch(order.size(), cfg.batch_size);
        double ep_d = 0.0, ep_g = 0.0, ep_adv = 0.0, ep_rec = 0.0;
        for (int s = 0; s < steps; ++s) {
            ++global_step;
            nn::Tensor x = detail::batch_tensor(normal_tiles, order,
                                                std::size_t(s) * std::size_t(cfg.batch_size),
                                                std::size_t(cfg.batch_size));

            nn::Tape g_tape = generator.forward(x, nn::Mode::Train, global_step);
            const nn::Tensor& fake = generator.output_of(g_tape);

            // discriminator step: real -> 1, detached fake -> 0
            discriminator.zero_grad();
            nn::Tape d_real = discriminator.forward(x, nn::Mode::Train, global_step);
            nn::LossResult real_loss = nn::bce_const_target(discriminator.output_of(d_real), 1.0f);
            for (auto& v : real_loss.grad.data) v *= 0.5f;
            discriminator.backward(d_real, real_loss.grad);

            nn::Tape d_fake = discriminator.forward(fake, nn::Mode::Train, global_step);
            nn::LossResult fake_loss = nn::bce_const_target(discriminator.output_of(d_fake), 0.0f);
            for (auto& v : fake_loss.grad.data) v *= 0.5f;
            discriminator.backward(d_fake, fake_loss.grad);
            const double d_loss = 0.5 * (real_loss.value + fake_loss.value);
            if (!std::isfinite(d_loss)) {
                report.aborted_nonfinite = true;
                report.warnings.push_back("non-finite discriminator loss at step " +
                                          std::to_string(global_step));
                break;
            }
            adam_d.step(discriminator);

            // generator step: fool the discriminator + reconstruct the input
            generator.zero_grad();
            discriminator.zero_grad();
            nn::Tape d_gen = discriminator.forward(fake, nn::Mode::Train, global_step);
            nn::LossResult adv = nn::bce_const_target(discriminator.output_of(d_gen), 1.0f);
            nn::Tensor fake_grad = discriminator.backward(d_gen, adv.grad, /*want_input_grad=*/true);
            nn::LossResult rec = nn::l1(fake, x);
            for (std::size_t i = 0; i < fake_grad.data.size(); ++i)
                fake_grad.data[i] = float(cfg.lambda_adv * double(fake_grad.data[i]) +
                                          cfg.lambda_rec * double(rec.grad.data[i]));
            generator.backward(g_tape, fake_grad);
            discriminator.zero_grad();  // discard critic gradients from the generator pass
            const double g_loss = cfg.lambda_adv * adv.value + cfg.lambda_rec * rec.value;
            if (!std::isfinite(g_loss)) {
                report.aborted_nonfinite = true;
                report.warnings.push_back("non-finite generator loss at step " + std::to_string(global_step));
                break;
            }
            adam_g.step(generator);

            ep_d += d_loss;
            ep_g += g_loss;
            ep_adv += adv.value;
            ep_rec += rec.value;
        }
        if (report.aborted_nonfinite) break;
        report.d_losses.push_back(steps > 0 ? ep_d / steps : 0.0);
        report.g_losses.push_back(steps > 0 ? ep_g / steps : 0.0);
        report.g_adv_losses.push_back(steps > 0 ? ep_adv / steps : 0.0);
        report.g_rec_losses.push_back(steps > 0 ? ep_rec / steps : 0.0);
        if (steps > 0 && report.d_losses.back() < 1e-4)
            report.warnings.push_back("discriminator loss collapsed to ~0 in epoch " +
                                      std::to_string(epoch));
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

// ---------------------------------------------------------------------------
// Train report file: structured text, one record per epoch.
// ---------------------------------------------------------------------------

inline std::string format_report(const TrainReport& r) {
    std::ostringstream os;
    os << "ferroscope-report 1\n";
    os << "seed " << r.seed << "\n";
    os << "wall_seconds " << r.wall_seconds << "\n";
    os << "aborted_nonfinite " << (r.aborted_nonfinite ? 1 : 0) << "\n";
    for (std::size_t e = 0; e < r.losses.size(); ++e) {
        os << "epoch " << e << " loss " << r.losses[e];
        if (e < r.test_accuracy.size()) os << " test_accuracy " << r.test_accuracy[e];
        os << "\n";
    }
    for (std::size_t e = 0; e < r.d_losses.size(); ++e)
        os << "epoch " << e << " d_loss " << r.d_losses[e] << " g_loss " << r.g_losses[e] << " g_adv "
           << r.g_adv_losses[e] << " g_rec " << r.g_rec_losses[e] << "\n";
    if (r.final_confusion.k > 0) os << "final_accuracy " << r.final_accuracy << "\n";
    for (const auto& w : r.warnings) os << "warning " << w << "\n";
    return os.str();
}

}  // namespace ferroscope::trainer
