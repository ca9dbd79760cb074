#include "toygen.h"

#include <cmath>

namespace mcam {

MoEModel gen_toy_model(const ModelConfig &config, uint64_t seed, double scale) {
    config.validate();
    if (scale < 0.0 || !std::isfinite(scale)) {
        throw std::invalid_argument("scale must be finite and >= 0");
    }
    MoEModel m;
    m.config = config;
    Rng rng(seed);

    double in_std = scale / std::sqrt((double)config.d_model);
    double col_std = scale / std::sqrt((double)config.d_ff);

    // the gate*up product squares the input scale, so raw layers drift
    // doubly-exponentially in depth; each layer's down projection is rescaled
    // against this probe batch so output magnitude tracks input magnitude
    Rng probe_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    Mat probe(64, config.d_model);
    for (auto &v : probe.data) v = (float)(scale * probe_rng.gaussian());
    double target_ss = frob_sq(probe);
    Mat cur = probe;

    for (int l = 0; l < config.n_layers; l++) {
        MoELayer layer;
        layer.config = config;
        layer.router = Mat(config.n_experts, config.d_model);
        for (auto &v : layer.router.data) v = (float)(in_std * rng.gaussian());

        for (int e = 0; e < config.total_experts(); e++) {
            ExpertWeights w;
            w.width = config.d_ff;
            w.up = Mat(config.d_ff, config.d_model);
            w.gate = Mat(config.d_ff, config.d_model);
            w.down = Mat(config.d_model, config.d_ff);
            // heavy-tailed per-neuron importance: the gain scales both the up row
            // and the down column, so a neuron's significance lives in its weights
            // rather than in whichever inputs happen to excite it
            std::vector<double> gain((size_t)config.d_ff);
            for (auto &g : gain) g = std::exp(rng.gaussian());
            for (int j = 0; j < config.d_ff; j++) {
                for (int r = 0; r < config.d_model; r++) {
                    w.up.at(j, r) = (float)(in_std * gain[(size_t)j] * rng.gaussian());
                }
            }
            for (auto &v : w.gate.data) v = (float)(in_std * rng.gaussian());
            for (int j = 0; j < config.d_ff; j++) {
                for (int r = 0; r < config.d_model; r++) {
                    w.down.at(r, j) = (float)(col_std * gain[(size_t)j] * rng.gaussian());
                }
            }
            layer.experts.push_back(std::move(w));
        }

        // output is linear in the down weights, so scaling them scales y
        Mat y = layer_forward_batch(layer, cur);
        double ss = frob_sq(y);
        if (ss > 0.0 && target_ss > 0.0) {
            float g = (float)std::sqrt(target_ss / ss);
            for (auto &e : layer.experts) {
                for (auto &v : e.down.data) v *= g;
            }
            for (auto &v : y.data) v *= g;
        }
        cur = std::move(y);
        m.layers.push_back(std::move(layer));
    }
    return m;
}

} // namespace mcam
