#include "model.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mcam {

void ModelConfig::validate() const {
    if (n_layers < 1) throw std::invalid_argument("n_layers must be >= 1");
    if (n_experts < 1) throw std::invalid_argument("n_experts must be >= 1");
    if (n_shared < 0) throw std::invalid_argument("n_shared must be >= 0");
    if (d_model < 1) throw std::invalid_argument("d_model must be >= 1");
    if (d_ff < 1) throw std::invalid_argument("d_ff must be >= 1");
    if (top_k < 1 || top_k > n_experts) {
        throw std::invalid_argument("top_k must be in [1, n_experts], got " + std::to_string(top_k) +
                                    " with n_experts " + std::to_string(n_experts));
    }
}

void ExpertWeights::validate(int d_model) const {
    if (width < 0) throw std::invalid_argument("expert width must be >= 0");
    if (up.rows != width || up.cols != d_model) {
        throw std::invalid_argument("up shape " + format_shape(up.rows, up.cols) + " expected " +
                                    format_shape(width, d_model));
    }
    if (gate.rows != width || gate.cols != d_model) {
        throw std::invalid_argument("gate shape " + format_shape(gate.rows, gate.cols) + " expected " +
                                    format_shape(width, d_model));
    }
    if (down.rows != d_model || down.cols != width) {
        throw std::invalid_argument("down shape " + format_shape(down.rows, down.cols) + " expected " +
                                    format_shape(d_model, width));
    }
}

int MoELayer::n_micro() const {
    int n = 0;
    for (const auto &e : experts) n += e.width;
    return n;
}

std::vector<int> MoELayer::widths() const {
    std::vector<int> w;
    w.reserve(experts.size());
    for (const auto &e : experts) w.push_back(e.width);
    return w;
}

void MoELayer::validate() const {
    config.validate();
    if ((int)experts.size() != config.total_experts()) {
        throw std::invalid_argument("layer holds " + std::to_string(experts.size()) + " experts, config says " +
                                    std::to_string(config.total_experts()));
    }
    for (const auto &e : experts) e.validate(config.d_model);
    if (router.rows != config.n_experts || router.cols != config.d_model) {
        throw std::invalid_argument("router shape " + format_shape(router.rows, router.cols) + " expected " +
                                    format_shape(config.n_experts, config.d_model));
    }
}

void MoEModel::validate() const {
    config.validate();
    if ((int)layers.size() != config.n_layers) {
        throw std::invalid_argument("model holds " + std::to_string(layers.size()) + " layers, config says " +
                                    std::to_string(config.n_layers));
    }
    for (const auto &l : layers) l.validate();
}

MicroExpertId flat_to_id(const MoELayer &layer, int flat) {
    if (flat < 0) throw std::out_of_range("micro-expert index must be >= 0");
    int remaining = flat;
    for (int e = 0; e < (int)layer.experts.size(); e++) {
        int w = layer.experts[e].width;
        if (remaining < w) return {e, remaining};
        remaining -= w;
    }
    throw std::out_of_range("micro-expert index " + std::to_string(flat) + " out of range (layer has " +
                            std::to_string(layer.n_micro()) + ")");
}

int id_to_flat(const MoELayer &layer, const MicroExpertId &id) {
    if (id.expert < 0 || id.expert >= (int)layer.experts.size()) {
        throw std::out_of_range("expert index " + std::to_string(id.expert) + " out of range");
    }
    if (id.neuron < 0 || id.neuron >= layer.experts[id.expert].width) {
        throw std::out_of_range("neuron index " + std::to_string(id.neuron) + " out of range for expert " +
                                std::to_string(id.expert));
    }
    int base = 0;
    for (int e = 0; e < id.expert; e++) base += layer.experts[e].width;
    return base + id.neuron;
}

double silu(double x) {
    return x / (1.0 + std::exp(-x));
}

std::vector<float> route(const Mat &router, const std::vector<float> &x, const ModelConfig &config) {
    if (router.rows != config.n_experts || router.cols != config.d_model) {
        throw std::invalid_argument("router shape " + format_shape(router.rows, router.cols) + " expected " +
                                    format_shape(config.n_experts, config.d_model));
    }
    if ((int)x.size() != config.d_model) {
        throw std::invalid_argument("routing input length " + std::to_string(x.size()) + " expected " +
                                    std::to_string(config.d_model));
    }
    if (config.top_k > config.n_experts) {
        throw std::invalid_argument("top_k exceeds routed expert count");
    }

    // softmax over all routed logits (max-shifted for stability)
    std::vector<double> logits((size_t)config.n_experts);
    double max_logit = -1e300;
    for (int i = 0; i < config.n_experts; i++) {
        logits[(size_t)i] = dot_f64(router.row(i), x.data(), config.d_model);
        max_logit = std::max(max_logit, logits[(size_t)i]);
    }
    std::vector<double> probs((size_t)config.n_experts);
    double z = 0.0;
    for (int i = 0; i < config.n_experts; i++) {
        probs[(size_t)i] = std::exp(logits[(size_t)i] - max_logit);
        z += probs[(size_t)i];
    }
    for (auto &p : probs) p /= z;

    // top_k by probability, ties keep the lower index
    std::vector<int> order((size_t)config.n_experts);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return probs[(size_t)a] > probs[(size_t)b]; });

    double kept_sum = 0.0;
    for (int r = 0; r < config.top_k; r++) kept_sum += probs[(size_t)order[(size_t)r]];

    std::vector<float> coeff((size_t)config.total_experts(), 0.0f);
    for (int s = 0; s < config.n_shared; s++) coeff[(size_t)s] = 1.0f; // shared experts bypass the router
    for (int r = 0; r < config.top_k; r++) {
        int i = order[(size_t)r];
        coeff[(size_t)(config.n_shared + i)] = (float)(probs[(size_t)i] / kept_sum);
    }
    return coeff;
}

std::vector<float> expert_forward(const ExpertWeights &e, const std::vector<float> &x) {
    int d_model = e.down.rows;
    if ((int)x.size() != d_model) {
        throw std::invalid_argument("expert input length " + std::to_string(x.size()) + " expected " +
                                    std::to_string(d_model));
    }
    // h[j] = silu(gate_j . x) * (up_j . x), then y = down h; all sums in f64
    std::vector<double> h((size_t)e.width);
    for (int j = 0; j < e.width; j++) {
        double g = dot_f64(e.gate.row(j), x.data(), d_model);
        double u = dot_f64(e.up.row(j), x.data(), d_model);
        h[(size_t)j] = silu(g) * u;
    }
    std::vector<float> y((size_t)d_model);
    for (int r = 0; r < d_model; r++) {
        const float *dr = e.down.row(r);
        double acc = 0.0;
        for (int j = 0; j < e.width; j++) {
            acc += (double)dr[j] * h[(size_t)j];
        }
        y[(size_t)r] = (float)acc;
    }
    return y;
}

std::vector<float> moe_forward(const MoELayer &layer, const std::vector<float> &x) {
    std::vector<float> coeff = route(layer.router, x, layer.config);
    std::vector<double> acc((size_t)layer.config.d_model, 0.0);
    for (int e = 0; e < (int)layer.experts.size(); e++) {
        if (coeff[(size_t)e] == 0.0f) continue;
        std::vector<float> y = expert_forward(layer.experts[e], x);
        for (int r = 0; r < layer.config.d_model; r++) {
            acc[(size_t)r] += (double)coeff[(size_t)e] * (double)y[(size_t)r];
        }
    }
    std::vector<float> out((size_t)layer.config.d_model);
    for (int r = 0; r < layer.config.d_model; r++) out[(size_t)r] = (float)acc[(size_t)r];
    return out;
}

std::vector<float> micro_expert_contribution(const MoELayer &layer, const MicroExpertId &id,
                                             const std::vector<float> &x) {
    id_to_flat(layer, id); // bounds check
    const ExpertWeights &e = layer.experts[(size_t)id.expert];
    std::vector<float> coeff = route(layer.router, x, layer.config);
    std::vector<float> out((size_t)layer.config.d_model, 0.0f);
    float a = coeff[(size_t)id.expert];
    if (a == 0.0f) return out;

    double g = dot_f64(e.gate.row(id.neuron), x.data(), layer.config.d_model);
    double u = dot_f64(e.up.row(id.neuron), x.data(), layer.config.d_model);
    double phi = (double)a * silu(g) * u;
    for (int r = 0; r < layer.config.d_model; r++) {
        out[(size_t)r] = (float)(phi * (double)e.down.at(r, id.neuron));
    }
    return out;
}

ExpertWeights permute_micro_experts(const ExpertWeights &e, const std::vector<int> &perm) {
    if ((int)perm.size() != e.width) {
        throw std::invalid_argument("permutation length " + std::to_string(perm.size()) + " expected " +
                                    std::to_string(e.width));
    }
    std::vector<char> seen((size_t)e.width, 0);
    for (int p : perm) {
        if (p < 0 || p >= e.width || seen[(size_t)p]) {
            throw std::invalid_argument("permutation is not a bijection over [0, width)");
        }
        seen[(size_t)p] = 1;
    }
    int d_model = e.down.rows;
    ExpertWeights out;
    out.width = e.width;
    out.up = Mat(e.width, d_model);
    out.gate = Mat(e.width, d_model);
    out.down = Mat(d_model, e.width);
    for (int j = 0; j < e.width; j++) {
        int src = perm[(size_t)j];
        std::copy(e.up.row(src), e.up.row(src) + d_model, out.up.row(j));
        std::copy(e.gate.row(src), e.gate.row(src) + d_model, out.gate.row(j));
        for (int r = 0; r < d_model; r++) {
            out.down.at(r, j) = e.down.at(r, src);
        }
    }
    return out;
}

Mat layer_forward_batch(const MoELayer &layer, const Mat &x) {
    if (x.cols != layer.config.d_model) {
        throw std::invalid_argument("batch width " + std::to_string(x.cols) + " expected d_model " +
                                    std::to_string(layer.config.d_model));
    }
    Mat y(x.rows, x.cols);
    parallel_for(x.rows, [&](int t) {
        std::vector<float> xi(x.row(t), x.row(t) + x.cols);
        std::vector<float> yi = moe_forward(layer, xi);
        std::copy(yi.begin(), yi.end(), y.row(t));
    });
    return y;
}

} // namespace mcam
