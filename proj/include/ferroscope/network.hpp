// Network: an ordered DAG of layers (sequential chains plus skip
// connections). Forward records a Tape; backward replays it in reverse,
// accumulating parameter gradients and optionally the input gradient.
// Includes the finite-difference gradient checker, the text architecture
// descriptor, and the FSCK1 parameter checkpoint format.

#pragma once

#include <functional>
#include <sstream>

#include "ferroscope/layers.hpp"

namespace ferroscope::nn {

struct Tape {
    Tensor input;
    std::vector<Tensor> out;
    std::vector<NodeCtx> ctx;
    Mode mode = Mode::Eval;

    const Tensor& output(int node) const { return out[std::size_t(node)]; }
};

class Network {
  public:
    struct Node {
        std::unique_ptr<Layer> layer;
        std::vector<int> inputs;  // node ids; -1 refers to the network input

        Node() = default;
        Node(std::unique_ptr<Layer> l, std::vector<int> in) : layer(std::move(l)), inputs(std::move(in)) {}
        Node(const Node& o) : layer(o.layer->clone()), inputs(o.inputs) {}
        Node& operator=(const Node& o) {
            layer = o.layer->clone();
            inputs = o.inputs;
            return *this;
        }
        Node(Node&&) = default;
        Node& operator=(Node&&) = default;
    };

    std::vector<int> input_shape;  // per-sample shape, e.g. {C,H,W}
    std::uint64_t seed = 0;        // seed the parameters were initialized from
    std::string param_prefix;      // distinguishes parameter names across networks

    int add(std::unique_ptr<Layer> layer, std::vector<int> inputs) {
        const int arity = layer->arity();
        if (int(inputs.size()) != arity)
            throw InvalidArgument("node arity mismatch for " + layer->kind());
        for (int i : inputs)
            if (i < -1 || i >= int(nodes_.size())) throw InvalidArgument("node input out of range");
        nodes_.emplace_back(std::move(layer), std::move(inputs));
        output_ = int(nodes_.size()) - 1;
        return output_;
    }

    int size() const { return int(nodes_.size()); }
    int output_node() const { return output_; }
    void set_output(int node) { output_ = node; }

    const Node& node(int i) const { return nodes_[std::size_t(i)]; }
    Layer& layer(int i) { return *nodes_[std::size_t(i)].layer; }
    const Layer& layer(int i) const { return *nodes_[std::size_t(i)].layer; }

    void set_tap(const std::string& name, int node) { taps_[name] = node; }
    int tap(const std::string& name) const {
        auto it = taps_.find(name);
        if (it == taps_.end()) throw StateError("network has no tap named '" + name + "'");
        return it->second;
    }
    bool has_tap(const std::string& name) const { return taps_.count(name) != 0; }
    const std::map<std::string, int>& taps() const { return taps_; }

    void initialize(std::uint64_t init_seed) {
        seed = init_seed;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            Rng rng(Rng::mix(init_seed, i));
            nodes_[i].layer->init_params(rng);
        }
        zero_grad();
    }

    // ------------------------------------------------------------------
    // Forward / backward
    // ------------------------------------------------------------------

    Tape forward(const Tensor& x, Mode mode, std::uint64_t dropout_tag = 0) const {
        check_input(x);
        Tape tape;
        tape.input = x;
        tape.mode = mode;
        tape.out.resize(nodes_.size());
        tape.ctx.resize(nodes_.size());
        ForwardEnv env{mode, dropout_tag};
        std::vector<const Tensor*> ins;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            ins.clear();
            for (int src : nodes_[i].inputs) ins.push_back(src < 0 ? &tape.input : &tape.out[std::size_t(src)]);
            try {
                tape.out[i] = nodes_[i].layer->forward(ins, env, int(i), tape.ctx[i]);
            } catch (const ShapeError& e) {
                throw ShapeError("node " + std::to_string(i) + " (" + nodes_[i].layer->kind() +
                                 "): " + e.what());
            }
        }
        return tape;
    }

    const Tensor& output_of(const Tape& tape) const { return tape.out[std::size_t(output_)]; }

    // Backpropagates d(loss)/d(output) through the tape. Parameter gradients
    // accumulate into each layer's grad buffers (call zero_grad() first).
    // Returns d(loss)/d(input) when want_input_grad is set.
    Tensor backward(const Tape& tape, const Tensor& grad_output, bool want_input_grad = false) {
        if (tape.out.size() != nodes_.size()) throw StateError("backward: tape does not match network");
        check_same_shape(grad_output, tape.out[std::size_t(output_)], "backward");

        std::vector<Tensor> grads(nodes_.size());
        std::vector<char> needed(nodes_.size(), 0);
        // A node's gradient is needed if it feeds the output or any needed node.
        needed[std::size_t(output_)] = 1;
        for (int i = int(nodes_.size()) - 1; i >= 0; --i) {
            if (!needed[std::size_t(i)]) continue;
            for (int src : nodes_[std::size_t(i)].inputs)
                if (src >= 0) needed[std::size_t(src)] = 1;
        }

        grads[std::size_t(output_)] = grad_output;
        Tensor input_grad;
        if (want_input_grad) input_grad = Tensor(tape.input.shape);

        std::vector<const Tensor*> ins;
        std::vector<Tensor*> gins;
        for (int i = int(nodes_.size()) - 1; i >= 0; --i) {
            const std::size_t ui = std::size_t(i);
            if (!needed[ui] || grads[ui].data.empty()) continue;
            ins.clear();
            gins.clear();
            for (int src : nodes_[ui].inputs) {
                if (src < 0) {
                    ins.push_back(&tape.input);
                    gins.push_back(want_input_grad ? &input_grad : nullptr);
                } else {
                    ins.push_back(&tape.out[std::size_t(src)]);
                    if (grads[std::size_t(src)].data.empty())
                        grads[std::size_t(src)] = Tensor(tape.out[std::size_t(src)].shape);
                    gins.push_back(&grads[std::size_t(src)]);
                }
            }
            nodes_[ui].layer->backward(ins, tape.out[ui], grads[ui], tape.ctx[ui], gins);
            grads[ui] = Tensor();  // free as we go
        }
        return input_grad;
    }

    // ------------------------------------------------------------------
    // Parameter access
    // ------------------------------------------------------------------

    struct ParamRef {
        std::string name;
        Tensor* value;
        Tensor* grad;
    };

    std::vector<ParamRef> param_refs() {
        std::vector<ParamRef> refs;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            for (auto& p : nodes_[i].layer->params()) {
                refs.push_back({param_name(int(i), p.name), &p.value, &p.grad});
            }
        }
        return refs;
    }

    std::string param_name(int node, const std::string& pname) const {
        char buf[32];
        std::snprintf(buf, sizeof buf, "n%03d.", node);
        std::string base = buf + nodes_[std::size_t(node)].layer->kind() + "." + pname;
        return param_prefix.empty() ? base : param_prefix + "." + base;
    }

    void zero_grad() {
        for (auto& n : nodes_)
            for (auto& p : n.layer->params()) p.grad.zero();
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (auto& nd : nodes_)
            for (auto& p : nd.layer->params()) n += p.value.numel();
        return n;
    }

    std::vector<Tensor> snapshot_params() {
        std::vector<Tensor> vals;
        for (auto& n : nodes_)
            for (auto& p : n.layer->params()) vals.push_back(p.value);
        return vals;
    }

    void restore_params(const std::vector<Tensor>& vals) {
        std::size_t i = 0;
        for (auto& n : nodes_)
            for (auto& p : n.layer->params()) {
                if (i >= vals.size() || !vals[i].same_shape(p.value))
                    throw StateError("restore_params: snapshot does not match network");
                p.value = vals[i++];
            }
    }

  private:
    void check_input(const Tensor& x) const {
        if (input_shape.empty()) return;
        if (x.rank() != int(input_shape.size()) + 1)
            throw ShapeError("network input: expected rank " + std::to_string(input_shape.size() + 1) +
                             " (batch + " + std::to_string(input_shape.size()) + "), got " + x.shape_str());
        for (std::size_t i = 0; i < input_shape.size(); ++i)
            if (x.dim(int(i) + 1) != input_shape[i])
                throw ShapeError("network input: expected per-sample shape to match, got " + x.shape_str());
    }

    std::vector<Node> nodes_;
    int output_ = -1;
    std::map<std::string, int> taps_;
};

// ---------------------------------------------------------------------------
// Scalar losses for the gradient checker: value computed with double
// accumulation, plus the matching analytic gradient of the output.
// ---------------------------------------------------------------------------

struct ScalarLoss {
    std::function<double(const Tensor&)> value;
    std::function<Tensor(const Tensor&)> grad;

    // sum of all outputs
    static ScalarLoss sum() {
        return {[](const Tensor& t) {
                    double s = 0.0;
                    for (float v : t.data) s += v;
                    return s;
                },
                [](const Tensor& t) {
                    Tensor g(t.shape);
                    std::fill(g.data.begin(), g.data.end(), 1.0f);
                    return g;
                }};
    }

    // fixed random projection, scaled by 1/numel to keep values O(1)
    static ScalarLoss weighted(const Tensor& like, std::uint64_t seed) {
        auto w = std::make_shared<std::vector<float>>(like.numel());
        Rng rng(Rng::mix(seed, 0x10ad));
        const float scale = 1.0f / float(like.numel());
        for (auto& v : *w) v = rng.uniformf(-1.0f, 1.0f) * scale;
        return {[w](const Tensor& t) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < t.data.size(); ++i) s += double(t.data[i]) * double((*w)[i]);
                    return s;
                },
                [w](const Tensor& t) {
                    Tensor g(t.shape);
                    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = (*w)[i];
                    return g;
                }};
    }
};

// Compares every parameter's analytic gradient against central finite
// differences of `loss` and returns the worst relative error. The dropout
// tag is held fixed so stochastic masks are identical across probes.
inline double grad_check(Network& net, const Tensor& input, double epsilon = 1e-3,
                         ScalarLoss loss = ScalarLoss::sum(), std::uint64_t dropout_tag = 7) {
    if (net.param_count() > 10000)
        throw InvalidArgument("grad_check: network too large (" + std::to_string(net.param_count()) +
                              " params, cap 10000)");

    net.zero_grad();
    Tape tape = net.forward(input, Mode::Train, dropout_tag);
    const Tensor& out = net.output_of(tape);
    net.backward(tape, loss.grad(out));

    double worst = 0.0;
    for (auto& ref : net.param_refs()) {
        for (std::size_t i = 0; i < ref.value->data.size(); ++i) {
            const float orig = ref.value->data[i];
            const double eps = epsilon * std::max(1.0, std::abs(double(orig)));
            ref.value->data[i] = float(orig + eps);
            const double fp = loss.value(net.output_of(net.forward(input, Mode::Train, dropout_tag)));
            ref.value->data[i] = float(orig - eps);
            const double fm = loss.value(net.output_of(net.forward(input, Mode::Train, dropout_tag)));
            ref.value->data[i] = orig;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double analytic = double(ref.grad->data[i]);
            const double rel =
                std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Architecture descriptor: structured text that makes checkpoints
// self-describing.
// ---------------------------------------------------------------------------

inline std::string to_descriptor(const Network& net) {
    std::ostringstream os;
    os << "ferroscope-net 1\n";
    os << "seed " << net.seed << "\n";
    if (!net.param_prefix.empty()) os << "prefix " << net.param_prefix << "\n";
    os << "input";
    for (int d : net.input_shape) os << " " << d;
    os << "\n";
    for (int i = 0; i < net.size(); ++i) {
        const auto& nd = net.node(i);
        os << "node " << i << " " << nd.layer->kind() << " in=";
        for (std::size_t j = 0; j < nd.inputs.size(); ++j) {
            if (j) os << ",";
            os << nd.inputs[j];
        }
        for (const auto& [k, v] : nd.layer->attrs()) os << " " << k << "=" << v;
        os << "\n";
    }
    for (const auto& [name, node] : net.taps()) os << "tap " << name << " " << node << "\n";
    os << "output " << net.output_node() << "\n";
    return os.str();
}

inline Network network_from_descriptor(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line.rfind("ferroscope-net 1", 0) != 0)
        throw FormatError("architecture descriptor: bad header");

    Network net;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "seed") {
            ls >> net.seed;
        } else if (word == "prefix") {
            ls >> net.param_prefix;
        } else if (word == "input") {
            int d;
            net.input_shape.clear();
            while (ls >> d) net.input_shape.push_back(d);
        } else if (word == "node") {
            int idx;
            std::string kind;
            ls >> idx >> kind;
            if (idx != net.size()) throw FormatError("architecture descriptor: nodes out of order");
            std::vector<int> inputs;
            AttrMap attrs;
            std::string tok;
            while (ls >> tok) {
                auto eq = tok.find('=');
                if (eq == std::string::npos)
                    throw FormatError("architecture descriptor: bad token '" + tok + "'");
                std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
                if (key == "in") {
                    std::size_t pos = 0;
                    while (pos < val.size()) {
                        auto comma = val.find(',', pos);
                        if (comma == std::string::npos) comma = val.size();
                        inputs.push_back(std::stoi(val.substr(pos, comma - pos)));
                        pos = comma + 1;
                    }
                } else {
                    attrs[key] = val;
                }
            }
            net.add(make_layer(kind, attrs), std::move(inputs));
        } else if (word == "tap") {
            std::string name;
            int node;
            ls >> name >> node;
            net.set_tap(name, node);
        } else if (word == "output") {
            int node;
            ls >> node;
            net.set_output(node);
        } else {
            throw FormatError("architecture descriptor: unknown directive '" + word + "'");
        }
    }
    if (net.output_node() < 0) throw FormatError("architecture descriptor: missing output");
    return net;
}

// ---------------------------------------------------------------------------
// FSCK1 parameter checkpoint: magic, then per-parameter records of
// (name length, name bytes, rank, dims, little-endian float32 payload).
// Round-trips bit-exactly.
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[] = "FSCK1";

inline std::string serialize_params(Network& net) {
    std::string out(kCheckpointMagic, 5);
    for (auto& ref : net.param_refs()) {
        put_u32le(out, std::uint32_t(ref.name.size()));
        out += ref.name;
        put_u32le(out, std::uint32_t(ref.value->rank()));
        for (int d : ref.value->shape) put_u32le(out, std::uint32_t(d));
        put_f32_array(out, ref.value->data.data(), ref.value->numel());
    }
    return out;
}

inline void load_params(Network& net, const std::string& bytes) {
    ByteReader r(bytes, "FSCK1 checkpoint");
    if (r.raw(5) != std::string(kCheckpointMagic, 5))
        throw FormatError("FSCK1 checkpoint: bad magic");
    auto refs = net.param_refs();
    std::size_t next = 0;
    while (!r.at_end()) {
        const std::uint32_t name_len = r.u32();
        const std::string name = r.raw(name_len);
        const std::uint32_t rank = r.u32();
        if (rank > 4) throw FormatError("FSCK1 checkpoint: rank " + std::to_string(rank) + " out of range");
        std::vector<int> dims(rank);
        std::size_t numel = 1;
        for (auto& d : dims) {
            d = int(r.u32());
            if (d <= 0) throw FormatError("FSCK1 checkpoint: non-positive dim");
            numel *= std::size_t(d);
        }
        if (next >= refs.size())
            throw DescriptorMismatch("checkpoint has extra parameter '" + name + "'");
        auto& ref = refs[next++];
        if (ref.name != name)
            throw DescriptorMismatch("checkpoint parameter '" + name + "' does not match architecture ('" +
                                     ref.name + "')");
        if (ref.value->shape != dims)
            throw DescriptorMismatch("checkpoint parameter '" + name + "' has mismatched shape");
        r.f32_array(ref.value->data.data(), numel);
    }
    if (next != refs.size())
        throw DescriptorMismatch("checkpoint is missing " + std::to_string(refs.size() - next) +
                                 " parameter(s)");
}

}  // namespace ferroscope::nn
