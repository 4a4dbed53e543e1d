// Training losses: softmax cross-entropy, binary cross-entropy, L1.
// Each returns the scalar loss (mean over the batch) and the gradient with
// respect to the network output it was evaluated on.

#pragma once

#include "ferroscope/tensor.hpp"

namespace ferroscope::nn {

struct LossResult {
    double value = 0.0;
    Tensor grad;
};

// Cross-entropy on softmax probabilities `probs` [N,K] against integer
// labels. Pairs with a Softmax output node: the softmax Jacobian applied to
// this gradient reduces to the stable (p - onehot)/N form.
inline LossResult cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
    if (probs.rank() != 2) throw ShapeError("cross_entropy: expected rank-2 probabilities");
    const int N = probs.dim(0), K = probs.dim(1);
    if (int(labels.size()) != N) throw InvalidArgument("cross_entropy: batch/label count mismatch");

    LossResult res;
    res.grad = Tensor(probs.shape);
    double total = 0.0;
    constexpr float kFloor = 1e-12f;
    for (int n = 0; n < N; ++n) {
        const int y = labels[std::size_t(n)];
        if (y < 0 || y >= K) throw InvalidArgument("cross_entropy: label out of range");
        const float p = std::max(probs.data[std::size_t(n) * std::size_t(K) + std::size_t(y)], kFloor);
        total -= std::log(double(p));
        res.grad.data[std::size_t(n) * std::size_t(K) + std::size_t(y)] = -1.0f / (p * float(N));
    }
    res.value = total / N;
    return res;
}

// Binary cross-entropy of sigmoid outputs against a constant target (all-real
// or all-fake batches). Pairs with a Sigmoid output node for the stable
// (p - t)/N gradient after the sigmoid backward.
inline LossResult bce_const_target(const Tensor& probs, float target) {
    LossResult res;
    res.grad = Tensor(probs.shape);
    double total = 0.0;
    const double n = double(probs.numel());
    constexpr float kEps = 1e-7f;
    for (std::size_t i = 0; i < probs.data.size(); ++i) {
        const float p = std::min(std::max(probs.data[i], kEps), 1.0f - kEps);
        total -= target * std::log(double(p)) + (1.0 - target) * std::log(double(1.0f - p));
        res.grad.data[i] = float((double(p) - double(target)) / (double(p) * double(1.0f - p) * n));
    }
    res.value = total / n;
    return res;
}

// Mean absolute error between `a` and reference `b`; gradient w.r.t. `a`.
inline LossResult l1(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "l1");
    LossResult res;
    res.grad = Tensor(a.shape);
    double total = 0.0;
    const float inv = 1.0f / float(a.numel());
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const float d = a.data[i] - b.data[i];
        total += std::abs(double(d));
        res.grad.data[i] = d > 0.0f ? inv : (d < 0.0f ? -inv : 0.0f);
    }
    res.value = total / double(a.numel());
    return res;
}

}  // namespace ferroscope::nn
