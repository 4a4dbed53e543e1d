// Layer zoo for the reverse-mode engine: convolution, dense, ELU, PReLU,
// ReLU, sigmoid, dropout, nearest 2x upsampling, 2x2 max-pooling, channel
// concatenation, softmax.

#pragma once

#include <map>
#include <memory>
#include <utility>

#include "ferroscope/tensor.hpp"

namespace ferroscope::nn {

enum class Mode { Train, Eval };

struct ForwardEnv {
    Mode mode = Mode::Eval;
    std::uint64_t dropout_tag = 0;  // derives per-node dropout masks; fixed tag -> fixed masks
};

// Per-node state captured during forward and consumed by backward.
struct NodeCtx {
    Tensor saved;
    std::vector<int> indices;
};

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param(std::string n, std::vector<int> shape) : name(std::move(n)), value(shape), grad(shape) {}
};

using AttrMap = std::map<std::string, std::string>;

class Layer {
  public:
    virtual ~Layer() = default;
    virtual std::string kind() const = 0;
    virtual AttrMap attrs() const { return {}; }
    virtual int arity() const { return 1; }

    virtual Tensor forward(const std::vector<const Tensor*>& in, const ForwardEnv& env, int node_index,
                           NodeCtx& ctx) const = 0;
    // Accumulates input gradients into *gin[i] (already zero-initialized) and
    // parameter gradients into params()[j].grad.
    virtual void backward(const std::vector<const Tensor*>& in, const Tensor& out, const Tensor& gout,
                          const NodeCtx& ctx, const std::vector<Tensor*>& gin) = 0;

    virtual void init_params(Rng&) {}
    virtual std::unique_ptr<Layer> clone() const = 0;

    std::vector<Param>& params() { return params_; }
    const std::vector<Param>& params() const { return params_; }

  protected:
    std::vector<Param> params_;
};

namespace detail {

inline int attr_int(const AttrMap& a, const std::string& key) {
    auto it = a.find(key);
    if (it == a.end()) throw FormatError("layer attribute missing: " + key);
    return std::stoi(it->second);
}

inline double attr_double(const AttrMap& a, const std::string& key) {
    auto it = a.find(key);
    if (it == a.end()) throw FormatError("layer attribute missing: " + key);
    return std::stod(it->second);
}

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Conv2d: kernel k, stride s, zero padding p.
// Output spatial size = floor((in + 2p - k)/s) + 1.
// Implemented via im2col + GEMM.
// ---------------------------------------------------------------------------

class Conv2d final : public Layer {
  public:
    Conv2d(int cin, int cout, int k, int stride = 1, int pad = 0)
        : cin_(cin), cout_(cout), k_(k), s_(stride), p_(pad) {
        if (cin < 1 || cout < 1 || k < 1) throw InvalidArgument("conv: channels and kernel must be >= 1");
        if (stride < 1) throw InvalidArgument("conv: stride must be >= 1");
        if (pad < 0) throw InvalidArgument("conv: padding must be >= 0");
        params_.emplace_back("w", std::vector<int>{cout, cin, k, k});
        params_.emplace_back("b", std::vector<int>{cout});
    }

    std::string kind() const override { return "conv"; }
    AttrMap attrs() const override {
        return {{"cin", std::to_string(cin_)}, {"cout", std::to_string(cout_)},
                {"k", std::to_string(k_)},     {"s", std::to_string(s_)},
                {"p", std::to_string(p_)}};
    }

    void init_params(Rng& rng) override {
        const float limit = std::sqrt(6.0f / float(cin_ * k_ * k_));
        for (auto& v : params_[0].value.data) v = rng.uniformf(-limit, limit);
        params_[1].value.zero();
    }

    Tensor forward(const std::vector<const Tensor*>& in, const ForwardEnv&, int, NodeCtx&) const override {
        const Tensor& x = *in[0];
        check_input(x);
        const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
        const int OH = out_dim(H), OW = out_dim(W);
        if (OH < 1 || OW < 1)
            throw ShapeError("conv: input " + x.shape_str() + " too small for k=" + std::to_string(k_) +
                             " s=" + std::to_string(s_) + " p=" + std::to_string(p_));
        Tensor out({N, cout_, OH, OW});
        const int K = cin_ * k_ * k_, P = OH * OW;
        std::vector<float> col(std::size_t(K) * std::size_t(P));
        const float* wmat = params_[0].value.data.data();
        const float* bias = params_[1].value.data.data();
        for (int n = 0; n < N; ++n) {
            im2col(x, n, OH, OW, col.data());
            float* o = &out.at(n, 0, 0, 0);
            for (int oc = 0; oc < cout_; ++oc)
                std::fill(o + std::size_t(oc) * std::size_t(P), o + std::size_t(oc + 1) * std::size_t(P),
                          bias[oc]);
            gemm_nn(cout_, P, K, wmat, col.data(), o);
        }
        return out;
    }

    void backward(const std::vector<const Tensor*>& in, const Tensor&, const Tensor& gout, const NodeCtx&,
                  const std::vector<Tensor*>& gin) override {
        const Tensor& x = *in[0];
        const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
        const int OH = gout.dim(2), OW = gout.dim(3);
        const int K = cin_ * k_ * k_, P = OH * OW;
        std::vector<float> col(std::size_t(K) * std::size_t(P));
        std::vector<float> dcol(std::size_t(K) * std::size_t(P));
        float* dw = params_[0].grad.data.data();
        float* db = params_[1].grad.data.data();
        const float* wmat = params_[0].value.data.data();
        for (int n = 0; n < N; ++n) {
            const float* g = &gout.at(n, 0, 0, 0);
            im2col(x, n, OH, OW, col.data());
            gemm_nt(cout_, K, P, g, col.data(), dw);
            for (int oc = 0; oc < cout_; ++oc) {
                const float* gr = g + std::size_t(oc) * std::size_t(P);
                float acc = 0.0f;
                for (int p = 0; p < P; ++p) acc += gr[p];
                db[oc] += acc;
            }
            if (gin[0]) {
                std::fill(dcol.begin(), dcol.end(), 0.0f);
                gemm_tn(K, P, cout_, wmat, g, dcol.data());
                col2im_add(dcol.data(), n, OH, OW, *gin[0]);
            }
        }
        (void)H;
        (void)W;
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }

    int out_dim(int in) const { return (in + 2 * p_ - k_) / s_ + 1; }

  private:
    void check_input(const Tensor& x) const {
        if (x.rank() != 4) throw ShapeError("conv: expected rank-4 input, got " + x.shape_str());
        if (x.dim(1) != cin_)
            throw ShapeError("conv: expected " + std::to_string(cin_) + " input channels, got " +
                             std::to_string(x.dim(1)));
    }

    void im2col(const Tensor& x, int n, int OH, int OW, float* col) const {
        const int H = x.dim(2), W = x.dim(3);
        for (int ic = 0; ic < cin_; ++ic) {
            for (int ky = 0; ky < k_; ++ky) {
                for (int kx = 0; kx < k_; ++kx) {
                    float* row = col + (std::size_t(ic) * std::size_t(k_) + std::size_t(ky)) *
                                           std::size_t(k_) * std::size_t(OH) * std::size_t(OW) +
                                 std::size_t(kx) * std::size_t(OH) * std::size_t(OW);
                    for (int oy = 0; oy < OH; ++oy) {
                        const int y = oy * s_ - p_ + ky;
                        float* dst = row + std::size_t(oy) * std::size_t(OW);
                        if (y < 0 || y >= H) {
                            std::fill(dst, dst + OW, 0.0f);
                            continue;
                        }
                        for (int ox = 0; ox < OW; ++ox) {
                            const int xx = ox * s_ - p_ + kx;
                            dst[ox] = (xx >= 0 && xx < W) ? x.at(n, ic, y, xx) : 0.0f;
                        }
                    }
                }
            }
        }
    }

    void col2im_add(const float* dcol, int n, int OH, int OW, Tensor& gx) const {
        const int H = gx.dim(2), W = gx.dim(3);
        for (int ic = 0; ic < cin_; ++ic) {
            for (int ky = 0; ky < k_; ++ky) {
                for (int kx = 0; kx < k_; ++kx) {
                    const float* row = dcol + (std::size_t(ic) * std::size_t(k_) + std::size_t(ky)) *
                                                  std::size_t(k_) * std::size_t(OH) * std::size_t(OW) +
                                       std::size_t(kx) * std::size_t(OH) * std::size_t(OW);
                    for (int oy = 0; oy < OH; ++oy) {
                        const int y = oy * s_ - p_ + ky;
                        if (y < 0 || y >= H) continue;
                        const float* src = row + std::size_t(oy) * std::size_t(OW);
                        for (int ox = 0; ox < OW; ++ox) {
                            const int xx = ox * s_ - p_ + kx;
                            if (xx >= 0 && xx < W) gx.at(n, ic, y, xx) += src[ox];
                        }
                    }
                }
            }
        }
    }

    int cin_, cout_, k_, s_, p_;
};

// ---------------------------------------------------------------------------
// Dense: flattens each sample to `cin` features, emits `cout`.
// ---------------------------------------------------------------------------

class Dense final : public Layer {
  public:
    Dense(int cin, int cout) : cin_(cin), cout_(cout) {
        if (cin < 1 || cout < 1) throw InvalidArgument("dense: feature counts must be >= 1");
        params_.emplace_back("w", std::vector<int>{cout, cin});
        params_.emplace_back("b", std::vector<int>{cout});
    }

    std::string kind() const override { return "dense"; }
    AttrMap attrs() const override {
        return {{"cin", std::to_string(cin_)}, {"cout", std::to_string(cout_)}};
    }

    void init_params(Rng& rng) override {
        const float limit = std::sqrt(6.0f / float(cin_));
        for (auto& v : params_[0].value.data) v = rng.uniformf(-limit, limit);
        params_[1].value.zero();
    }

    Tensor forward(const std::vector<const Tensor*>& in, const ForwardEnv&, int, NodeCtx&) const override {
        const Tensor& x = *in[0];
        const int N = x.dim(0);
        if (x.numel() != std::size_t(N) * std::size_t(cin_))
            throw ShapeError("dense: expected " + std::to_string(cin_) + " features per sample, got " +
                             std::to_string(x.numel() / std::size_t(N)));
        Tensor out({N, cout_});
        const float* bias = params_[1].value.data.data();
        for (int n = 0; n < N; ++n)
            std::copy(bias, bias + cout_, out.data.data() + std::size_t(n) * std::size_t(cout_));
        gemm_nt(N, cout_, cin_, x.data.data(), params_[0].value.data.data(), out.data.data());
        return out;
    }

    void backward(const std::vector<const Tensor*>& in, const Tensor&, const Tensor& gout, const NodeCtx&,
                  const std::vector<Tensor*>& gin) override {
        const Tensor& x = *in[0];
        const int N = x.dim(0);
        gemm_tn(cout_, cin_, N, gout.data.data(), x.data.data(), params_[0].grad.data.data());
        float* db = params_[1].grad.data.data();
        for (int n = 0; n < N; ++n) {
            const float* g = gout.data.data() + std::size_t(n) * std::size_t(cout_);
            for (int o = 0; o < cout_; ++o) db[o] += g[o];
        }
        if (gin[0])
            gemm_nn(N, cin_, cout_, gout.data.data(), params_[0].value.data.data(), gin[0]->data.data());
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

  private:
    int cin_, cout_;
};

// ---------------------------------------------------------------------------
// Elementwise activations
// ---------------------------------------------------------------------------

class ReLU final : public Layer {
  public:
    std::string kind() const override { return "relu"; }

    Tensor forward(const std::vector<const Tensor*>& in, const ForwardEnv&, int, NodeCtx&) const override {
        Tensor out = *in[0];
        for (auto& v : out.data) v = v > 0.0f ? v : 0.0f;
        return out;
    }

    void backward(const std::vector<const Tensor*>& in, const Tensor&, const Tensor& gout, const NodeCtx&,
                  const std::vector<Tensor*>& gin) override {
        if (!gin[0]) return;
        const auto& x = in[0]->data;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i] > 0.0f) gin[0]->data[i] += gout.data[i];
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }
};

// alpha fixed at 1
class ELU final : public Layer {
  public:
    std::string kind() const override { return "elu"; }

    Tensor forward(const std::vector<const Tensor*>& in, const ForwardEnv&, int, NodeCtx&) const override {
        Tensor out = *in[0];
        for (auto& v : out.data) v = v > 0.0f ? v : std::expm1(v);
        return out;
    }

    void backward(const std::vector<const Tensor*>& in, const Tensor& out, const Tensor& gout,
                  const NodeCtx&, const std::vector<Tensor*>& gin) override {
        if (!gin[0]) return;
        const auto& x = in[0]->data;
        for (std::size_t i = 0; i < x.size(); ++i)
            gin[0]->data[i] += x[i] > 0.0f ? gout.data[i] : gout.data[i] * (out.data[i] + 1.0f);
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<ELU>(*this); }
};

// Learnable scalar negative slope, one per layer.
class PReLU final : public Layer {
  public:
    explicit PReLU(double slope_init = 0.25) : slope_init_(slope_init) {
        params_.emplace_back("a", std::vector<int>{1});
        params_[0].value.data[0] = float(slope_init);
    }

    std::string kind() const override { return "prelu"; }
    AttrMap attrs() const override { return {{"a0", detail::fmt_double(slope_init_)}}; }

    void init_params(Rng&) override { params_[0].value.data[0] = float(slope_init_); }

    Tensor forward(const std::vector<const Tensor*>& in, const ForwardEnv&, int, NodeCtx&) const override {
        const float a = params_[0].value.data[0];
        Tensor out = *in[0];
        for (auto& v : out.data) v = v > 0.0f ? v : a * v;
        return out;
    }

    void backward(const std::vector<const Tensor*>& in, const Tensor&, const Tensor& gout, const NodeCtx&,
                  const std::vector<Tensor*>& gin) override {
        const float a = params_[0].value.data[0];
        const auto& x = in[0]->data;
        double da = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] > 0.0f) {
                if (gin[0]) gin[0]->data[i] += gout.data[i];
            } else {
                if (gin[0]) gin[0]->data[i] += a * gout.data[i];
                da += double(gout.data[i]) * double(x[i]);
            }
        }
        params_[0].grad.data[0] += float(da);
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<PReLU>(*this); }

  private:
    double slope_init_;
};

class Sigmoid final : public Layer {
  public:
    std::string kind() const override { return "sigmoid"; }

    Tensor forward(const std::vector<const Tensor*>& in, const ForwardEnv&, int, NodeCtx&) const override {
        Tensor out = *in[0];
        for (auto& v : out.data) v = 1.0f / (1.0f + std::exp(-v));
        return out;
    }

    void backward(const std::vector<const Tensor*>&, const Tensor& out, const Tensor& gout, const NodeCtx&,
                  const std::vector<Tensor*>& gin) override {
        if (!gin[0]) return;
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            const float s = out.data[i];
            gin[0]->data[i] += gout.data[i] * s * (1.0f - s);
        }
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<Sigmoid>(*this); }
};

// ---------------------------------------------------------------------------
// Dropout. Inverted scaling (kept values divided by 1-rate). Masks derive
// from (dropout_tag, node_index), so a fixed tag reproduces the mask exactly.
// Identity in Eval mode.
// ---------------------------------------------------------------------------

class Dropout final : public Layer {
  public:
    explicit Dropout(double rate) : rate_(rate) {
        if (rate < 0.0 || rate >= 1.0) throw InvalidArgument("dropout: rate must be in [0,1)");
    }

    std::string kind() const override { return "dropout"; }
    AttrMap attrs() const override { return {{"rate", detail::fmt_double(rate_)}}; }

    Tensor forward(const std::vector<const Tensor*>& in, const ForwardEnv& env, int node_index,
                   NodeCtx& ctx) const override {
        if (env.mode == Mode::Eval || rate_ == 0.0) return *in[0];
        Rng rng(Rng::mix(env.dropout_tag, std::uint64_t(node_index) + 0x5eedULL));
        const float scale = float(1.0 / (1.0 - rate_));
        Tensor out = *in[0];
        ctx.saved = Tensor(out.shape);
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            const float keep = rng.unit() >= rate_ ? scale : 0.0f;
            ctx.saved.data[i] = keep;
            out.data[i] *= keep;
        }
        return out;
    }

    void backward(const std::vector<const Tensor*>&, const Tensor&, const Tensor& gout, const NodeCtx& ctx,
                  const std::vector<Tensor*>& gin) override {
        if (!gin[0]) return;
        if (ctx.saved.data.empty()) {  // eval-mode tape
            for (std::size_t i = 0; i < gout.data.size(); ++i) gin[0]->data[i] += gout.data[i];
            return;
        }
        for (std::size_t i = 0; i < gout.data.size(); ++i)
            gin[0]->data[i] += gout.data[i] * ctx.saved.data[i];
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<Dropout>(*this); }

    double rate() const { return rate_; }

  private:
    double rate_;
};

// ---------------------------------------------------------------------------
// Nearest-neighbor 2x upsampling
// ---------------------------------------------------------------------------

class Upsample2x final : public Layer {
  public:
    std::string kind() const override { return "upsample2x"; }

    Tensor forward(const std::vector<const Tensor*>& in, const ForwardEnv&, int, NodeCtx&) const override {
        const Tensor& x = *in[0];
        if (x.rank() != 4) throw ShapeError("upsample2x: expected rank-4 input, got " + x.shape_str());
        Tensor out({x.dim(0), x.dim(1), x.dim(2) * 2, x.dim(3) * 2});
        for (int n = 0; n < x.dim(0); ++n)
            for (int c = 0; c < x.dim(1); ++c)
                for (int y = 0; y < out.dim(2); ++y)
                    for (int xx = 0; xx < out.dim(3); ++xx)
                        out.at(n, c, y, xx) = x.at(n, c, y / 2, xx / 2);
        return out;
    }

    void backward(const std::vector<const Tensor*>& in, const Tensor&, const Tensor& gout, const NodeCtx&,
                  const std::vector<Tensor*>& gin) override {
        if (!gin[0]) return;
        const Tensor& x = *in[0];
        for (int n = 0; n < x.dim(0); ++n)
            for (int c = 0; c < x.dim(1); ++c)
                for (int y = 0; y < gout.dim(2); ++y)
                    for (int xx = 0; xx < gout.dim(3); ++xx)
                        gin[0]->at(n, c, y / 2, xx / 2) += gout.at(n, c, y, xx);
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<Upsample2x>(*this); }
};

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2. Requires even spatial dims.
// ---------------------------------------------------------------------------

class MaxPool2 final : public Layer {
  public:
    std::string kind() const override { return "maxpool2"; }

    Tensor forward(const std::vector<const Tensor*>& in, const ForwardEnv&, int,
                   NodeCtx& ctx) const override {
        const Tensor& x = *in[0];
        if (x.rank() != 4) throw ShapeError("maxpool2: expected rank-4 input, got " + x.shape_str());
        if (x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0)
            throw ShapeError("maxpool2: spatial dims must be even, got " + x.shape_str());
        Tensor out({x.dim(0), x.dim(1), x.dim(2) / 2, x.dim(3) / 2});
        ctx.indices.resize(out.numel());
        std::size_t oi = 0;
        for (int n = 0; n < x.dim(0); ++n) {
            for (int c = 0; c < x.dim(1); ++c) {
                for (int y = 0; y < out.dim(2); ++y) {
                    for (int xx = 0; xx < out.dim(3); ++xx) {
                        float best = x.at(n, c, 2 * y, 2 * xx);
                        int by = 2 * y, bx = 2 * xx;
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx) {
                                const float v = x.at(n, c, 2 * y + dy, 2 * xx + dx);
                                if (v > best) {
                                    best = v;
                                    by = 2 * y + dy;
                                    bx = 2 * xx + dx;
                                }
                            }
                        out.at(n, c, y, xx) = best;
                        ctx.indices[oi++] = by * x.dim(3) + bx;
                    }
                }
            }
        }
        return out;
    }

    void backward(const std::vector<const Tensor*>& in, const Tensor& out, const Tensor& gout,
                  const NodeCtx& ctx, const std::vector<Tensor*>& gin) override {
        if (!gin[0]) return;
        const Tensor& x = *in[0];
        const int W = x.dim(3);
        std::size_t oi = 0;
        for (int n = 0; n < out.dim(0); ++n)
            for (int c = 0; c < out.dim(1); ++c)
                for (int y = 0; y < out.dim(2); ++y)
                    for (int xx = 0; xx < out.dim(3); ++xx) {
                        const int flat = ctx.indices[oi];
                        gin[0]->at(n, c, flat / W, flat % W) += gout.at(n, c, y, xx);
                        ++oi;
                    }
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2>(*this); }
};

// ---------------------------------------------------------------------------
// Channel-wise concatenation of two rank-4 inputs.
// ---------------------------------------------------------------------------

class Concat final : public Layer {
  public:
    std::string kind() const override { return "concat"; }
    int arity() const override { return 2; }

    Tensor forward(const std::vector<const Tensor*>& in, const ForwardEnv&, int, NodeCtx&) const override {
        const Tensor& a = *in[0];
        const Tensor& b = *in[1];
        if (a.rank() != 4 || b.rank() != 4) throw ShapeError("concat: expected rank-4 inputs");
        if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
            throw ShapeError("concat: incompatible shapes " + a.shape_str() + " vs " + b.shape_str());
        Tensor out({a.dim(0), a.dim(1) + b.dim(1), a.dim(2), a.dim(3)});
        const std::size_t plane = std::size_t(a.dim(2)) * std::size_t(a.dim(3));
        for (int n = 0; n < a.dim(0); ++n) {
            std::memcpy(&out.at(n, 0, 0, 0), &a.at(n, 0, 0, 0),
                        std::size_t(a.dim(1)) * plane * sizeof(float));
            std::memcpy(&out.at(n, a.dim(1), 0, 0), &b.at(n, 0, 0, 0),
                        std::size_t(b.dim(1)) * plane * sizeof(float));
        }
        return out;
    }

    void backward(const std::vector<const Tensor*>& in, const Tensor&, const Tensor& gout, const NodeCtx&,
                  const std::vector<Tensor*>& gin) override {
        const Tensor& a = *in[0];
        const Tensor& b = *in[1];
        const std::size_t plane = std::size_t(a.dim(2)) * std::size_t(a.dim(3));
        for (int n = 0; n < a.dim(0); ++n) {
            if (gin[0]) {
                const float* src = &gout.at(n, 0, 0, 0);
                float* dst = &gin[0]->at(n, 0, 0, 0);
                for (std::size_t i = 0; i < std::size_t(a.dim(1)) * plane; ++i) dst[i] += src[i];
            }
            if (gin[1]) {
                const float* src = &gout.at(n, a.dim(1), 0, 0);
                float* dst = &gin[1]->at(n, 0, 0, 0);
                for (std::size_t i = 0; i < std::size_t(b.dim(1)) * plane; ++i) dst[i] += src[i];
            }
        }
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<Concat>(*this); }
};

// ---------------------------------------------------------------------------
// Row-wise softmax over the last axis of a rank-2 tensor.
// ---------------------------------------------------------------------------

class Softmax final : public Layer {
  public:
    std::string kind() const override { return "softmax"; }

    Tensor forward(const std::vector<const Tensor*>& in, const ForwardEnv&, int, NodeCtx&) const override {
        const Tensor& x = *in[0];
        if (x.rank() != 2) throw ShapeError("softmax: expected rank-2 input, got " + x.shape_str());
        Tensor out = x;
        const int N = x.dim(0), K = x.dim(1);
        for (int n = 0; n < N; ++n) {
            float* row = out.data.data() + std::size_t(n) * std::size_t(K);
            float mx = row[0];
            for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
            double sum = 0.0;
            for (int k = 0; k < K; ++k) {
                row[k] = std::exp(row[k] - mx);
                sum += row[k];
            }
            const float inv = float(1.0 / sum);
            for (int k = 0; k < K; ++k) row[k] *= inv;
        }
        return out;
    }

    void backward(const std::vector<const Tensor*>&, const Tensor& out, const Tensor& gout, const NodeCtx&,
                  const std::vector<Tensor*>& gin) override {
        if (!gin[0]) return;
        const int N = out.dim(0), K = out.dim(1);
        for (int n = 0; n < N; ++n) {
            const float* p = out.data.data() + std::size_t(n) * std::size_t(K);
            const float* g = gout.data.data() + std::size_t(n) * std::size_t(K);
            float* gi = gin[0]->data.data() + std::size_t(n) * std::size_t(K);
            double dot = 0.0;
            for (int k = 0; k < K; ++k) dot += double(g[k]) * double(p[k]);
            for (int k = 0; k < K; ++k) gi[k] += p[k] * (g[k] - float(dot));
        }
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<Softmax>(*this); }
};

// ---------------------------------------------------------------------------
// Factory used by the architecture descriptor parser.
// ---------------------------------------------------------------------------

inline std::unique_ptr<Layer> make_layer(const std::string& kind, const AttrMap& a) {
    if (kind == "conv")
        return std::make_unique<Conv2d>(detail::attr_int(a, "cin"), detail::attr_int(a, "cout"),
                                        detail::attr_int(a, "k"), detail::attr_int(a, "s"),
                                        detail::attr_int(a, "p"));
    if (kind == "dense") return std::make_unique<Dense>(detail::attr_int(a, "cin"), detail::attr_int(a, "cout"));
    if (kind == "relu") return std::make_unique<ReLU>();
    if (kind == "elu") return std::make_unique<ELU>();
    if (kind == "prelu") return std::make_unique<PReLU>(detail::attr_double(a, "a0"));
    if (kind == "sigmoid") return std::make_unique<Sigmoid>();
    if (kind == "dropout") return std::make_unique<Dropout>(detail::attr_double(a, "rate"));
    if (kind == "upsample2x") return std::make_unique<Upsample2x>();
    if (kind == "maxpool2") return std::make_unique<MaxPool2>();
    if (kind == "concat") return std::make_unique<Concat>();
    if (kind == "softmax") return std::make_unique<Softmax>();
    throw FormatError("unknown layer kind: " + kind);
}

}  // namespace ferroscope::nn
