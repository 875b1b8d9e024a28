#pragma once

// Minimal differentiable building blocks: dense MLP with manual backprop,
// set max-pooling with argmax routing, sigmoid, L2/BCE losses and SGD/Adam.
// No tensor library; every gradient here is checked against central finite
// differences in the test suite.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "motkit/detection.hpp"

namespace motkit {

using FeatureVec = std::vector<double>;

struct MlpSpec {
    std::vector<int> widths;  // >= 2 entries, hidden layers ReLU, output linear
    std::uint64_t seed = 0;
};

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Dense network; layer k maps widths[k] -> widths[k+1]. Weights row-major.
class Mlp {
public:
    struct Layer {
        std::vector<double> w;  // out x in
        std::vector<double> b;  // out
        int in = 0, out = 0;
    };

    Mlp() = default;

    // Glorot-uniform init: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)),
    // biases zero.
    static Mlp init(const MlpSpec& spec) {
        if (spec.widths.size() < 2) throw std::invalid_argument("Mlp: need >= 2 widths");
        for (int w : spec.widths)
            if (w <= 0) throw std::invalid_argument("Mlp: widths must be positive");
        std::mt19937_64 rng(spec.seed);
        Mlp net;
        net.widths_ = spec.widths;
        for (std::size_t k = 0; k + 1 < spec.widths.size(); ++k) {
            Layer layer;
            layer.in = spec.widths[k];
            layer.out = spec.widths[k + 1];
            const double a = std::sqrt(6.0 / (layer.in + layer.out));
            std::uniform_real_distribution<double> dist(-a, a);
            layer.w.resize(static_cast<std::size_t>(layer.in) * layer.out);
            for (double& v : layer.w) v = dist(rng);
            layer.b.assign(static_cast<std::size_t>(layer.out), 0.0);
            net.layers_.push_back(std::move(layer));
        }
        return net;
    }

    const std::vector<int>& widths() const { return widths_; }
    int input_dim() const { return widths_.front(); }
    int output_dim() const { return widths_.back(); }
    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const Layer& l : layers_) n += l.w.size() + l.b.size();
        return n;
    }

    // acts[0] = input, acts[k+1] = post-activation output of layer k.
    struct Tape {
        std::vector<FeatureVec> acts;
    };

    FeatureVec forward(const FeatureVec& x, Tape* tape = nullptr) const {
        if (static_cast<int>(x.size()) != input_dim())
            throw DimensionMismatch("Mlp::forward: input size mismatch");
        if (tape) {
            tape->acts.clear();
            tape->acts.push_back(x);
        }
        FeatureVec cur = x;
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            const Layer& l = layers_[k];
            FeatureVec next(static_cast<std::size_t>(l.out));
            for (int o = 0; o < l.out; ++o) {
                double s = l.b[static_cast<std::size_t>(o)];
                const double* wrow = &l.w[static_cast<std::size_t>(o) * l.in];
                for (int i = 0; i < l.in; ++i) s += wrow[i] * cur[static_cast<std::size_t>(i)];
                next[static_cast<std::size_t>(o)] = s;
            }
            if (k + 1 < layers_.size())
                for (double& v : next) v = v > 0.0 ? v : 0.0;  // ReLU on hidden layers
            if (tape) tape->acts.push_back(next);
            cur = std::move(next);
        }
        return cur;
    }

private:
    std::vector<int> widths_;
    std::vector<Layer> layers_;
};

// Gradient accumulator with the same shape as an Mlp.
struct MlpGrads {
    std::vector<std::vector<double>> w, b;

    explicit MlpGrads(const Mlp& net) {
        for (const Mlp::Layer& l : net.layers()) {
            w.emplace_back(l.w.size(), 0.0);
            b.emplace_back(l.b.size(), 0.0);
        }
    }
    void zero() {
        for (auto& v : w) std::fill(v.begin(), v.end(), 0.0);
        for (auto& v : b) std::fill(v.begin(), v.end(), 0.0);
    }
    void scale(double s) {
        for (auto& v : w)
            for (double& x : v) x *= s;
        for (auto& v : b)
            for (double& x : v) x *= s;
    }
};

// Accumulates parameter gradients for one recorded forward pass and returns
// the gradient with respect to the input.
inline FeatureVec mlp_backward(const Mlp& net, const Mlp::Tape& tape,
                               const FeatureVec& dout, MlpGrads& grads) {
    const auto& layers = net.layers();
    FeatureVec dy = dout;
    for (std::size_t k = layers.size(); k-- > 0;) {
        const Mlp::Layer& l = layers[k];
        const FeatureVec& x = tape.acts[k];
        const FeatureVec& y = tape.acts[k + 1];
        FeatureVec dpre = dy;
        if (k + 1 < layers.size())
            for (int o = 0; o < l.out; ++o)
                if (y[static_cast<std::size_t>(o)] <= 0.0) dpre[static_cast<std::size_t>(o)] = 0.0;
        FeatureVec dx(static_cast<std::size_t>(l.in), 0.0);
        for (int o = 0; o < l.out; ++o) {
            const double g = dpre[static_cast<std::size_t>(o)];
            grads.b[k][static_cast<std::size_t>(o)] += g;
            double* gw = &grads.w[k][static_cast<std::size_t>(o) * l.in];
            const double* wrow = &l.w[static_cast<std::size_t>(o) * l.in];
            for (int i = 0; i < l.in; ++i) {
                gw[i] += g * x[static_cast<std::size_t>(i)];
                dx[static_cast<std::size_t>(i)] += g * wrow[i];
            }
        }
        dy = std::move(dx);
    }
    return dy;
}

struct EmptySet : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct MaxPoolResult {
    FeatureVec pooled;
    std::vector<int> argmax;  // source vector index per dimension (lowest wins ties)
};

// Elementwise maximum over a non-empty set of equal-length vectors.
inline MaxPoolResult maxpool_set(const std::vector<FeatureVec>& vecs) {
    if (vecs.empty()) throw EmptySet("maxpool_set: empty input set");
    const std::size_t dim = vecs.front().size();
    for (const FeatureVec& v : vecs)
        if (v.size() != dim) throw DimensionMismatch("maxpool_set: ragged input");
    MaxPoolResult r;
    r.pooled = vecs.front();
    r.argmax.assign(dim, 0);
    for (std::size_t i = 1; i < vecs.size(); ++i)
        for (std::size_t d = 0; d < dim; ++d)
            if (vecs[i][d] > r.pooled[d]) {
                r.pooled[d] = vecs[i][d];
                r.argmax[d] = static_cast<int>(i);
            }
    return r;
}

// Routes the pooled gradient back to the contributing (argmax) vectors.
inline void maxpool_backward(const MaxPoolResult& pool, const FeatureVec& dpooled,
                             std::vector<FeatureVec>& dvecs) {
    for (std::size_t d = 0; d < dpooled.size(); ++d)
        dvecs[static_cast<std::size_t>(pool.argmax[d])][d] += dpooled[d];
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double l2_loss(double pred, double target) {
    const double d = pred - target;
    return d * d;
}
inline double l2_loss_grad(double pred, double target) { return 2.0 * (pred - target); }

inline constexpr double kBceClamp = 1e-7;

inline double bce_loss(double pred, double target) {
    const double p = std::clamp(pred, kBceClamp, 1.0 - kBceClamp);
    return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

// BCE of sigmoid(logit) in a numerically stable form; gradient wrt the
// logit is sigmoid(logit) - target.
inline double bce_with_logits(double logit, double target) {
    return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::fabs(logit)));
}
inline double bce_with_logits_grad(double logit, double target) {
    return sigmoid(logit) - target;
}

// ---------------------------------------------------------------------------
// Optimizers. step() consumes already-averaged gradients for a fixed,
// ordered set of networks; Adam keeps flattened state across calls.

struct SgdOptimizer {
    double lr = 1e-3;

    void step(const std::vector<Mlp*>& nets, const std::vector<MlpGrads*>& grads) {
        for (std::size_t n = 0; n < nets.size(); ++n) {
            auto& layers = nets[n]->layers();
            for (std::size_t k = 0; k < layers.size(); ++k) {
                for (std::size_t i = 0; i < layers[k].w.size(); ++i)
                    layers[k].w[i] -= lr * grads[n]->w[k][i];
                for (std::size_t i = 0; i < layers[k].b.size(); ++i)
                    layers[k].b[i] -= lr * grads[n]->b[k][i];
            }
        }
    }
};

struct AdamOptimizer {
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void step(const std::vector<Mlp*>& nets, const std::vector<MlpGrads*>& grads) {
        if (m_.empty()) {
            std::size_t total = 0;
            for (const Mlp* net : nets) total += net->param_count();
            m_.assign(total, 0.0);
            v_.assign(total, 0.0);
        }
        ++t_;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        std::size_t idx = 0;
        auto update = [&](double& p, double g) {
            m_[idx] = beta1 * m_[idx] + (1.0 - beta1) * g;
            v_[idx] = beta2 * v_[idx] + (1.0 - beta2) * g * g;
            p -= lr * (m_[idx] / c1) / (std::sqrt(v_[idx] / c2) + eps);
            ++idx;
        };
        for (std::size_t n = 0; n < nets.size(); ++n) {
            auto& layers = nets[n]->layers();
            for (std::size_t k = 0; k < layers.size(); ++k) {
                for (std::size_t i = 0; i < layers[k].w.size(); ++i)
                    update(layers[k].w[i], grads[n]->w[k][i]);
                for (std::size_t i = 0; i < layers[k].b.size(); ++i)
                    update(layers[k].b[i], grads[n]->b[k][i]);
            }
        }
    }

private:
    long t_ = 0;
    std::vector<double> m_, v_;
};

// ---------------------------------------------------------------------------
// Raw-box feature encoder. The embedding input is the detection tuple
// [x, y, z, l, w, h, sin(theta), cos(theta), s] followed by H zero-padded
// history slots of the same layout and an H-long validity mask.

inline constexpr int kBoxTupleDim = 9;

// Fixed input scaling keeps position, size and score dimensions at
// comparable magnitudes for the encoder.
inline constexpr double kPositionScale = 30.0;
inline constexpr double kSizeScale = 3.0;
inline constexpr double kScoreScale = 5.0;

struct HistoryEntry {
    Box3D box;
    double score = 0.0;
};

inline int encoder_input_dim(int history_len) {
    return kBoxTupleDim * (1 + history_len) + history_len;
}

inline void write_box_tuple(const Box3D& b, double score, double* out) {
    out[0] = b.x / kPositionScale;
    out[1] = b.y / kPositionScale;
    out[2] = b.z / kPositionScale;
    out[3] = b.l / kSizeScale;
    out[4] = b.w / kSizeScale;
    out[5] = b.h / kSizeScale;
    out[6] = std::sin(b.theta);
    out[7] = std::cos(b.theta);
    out[8] = score / kScoreScale;
}

// Most recent history entry first; entries beyond history_len are dropped.
inline FeatureVec encoder_input(const Box3D& box, double score,
                                const std::vector<HistoryEntry>& history, int history_len) {
    FeatureVec in(static_cast<std::size_t>(encoder_input_dim(history_len)), 0.0);
    write_box_tuple(box, score, in.data());
    const int n = std::min<int>(history_len, static_cast<int>(history.size()));
    for (int k = 0; k < n; ++k) {
        write_box_tuple(history[static_cast<std::size_t>(k)].box,
                        history[static_cast<std::size_t>(k)].score,
                        in.data() + kBoxTupleDim * (1 + k));
        in[static_cast<std::size_t>(kBoxTupleDim * (1 + history_len) + k)] = 1.0;
    }
    return in;
}

// Deterministic embedding of a raw detection (plus optional history) to the
// model feature length.
inline FeatureVec encode_detection(const Mlp& encoder, const Detection& det,
                                   const std::vector<HistoryEntry>& history,
                                   int history_len, Mlp::Tape* tape = nullptr) {
    return encoder.forward(encoder_input(det.box, det.score, history, history_len), tape);
}

}  // namespace motkit
