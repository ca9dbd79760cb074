#include "rank.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mcam {

ActivationCoefficients compute_coefficients(const MoELayer &layer, const LayerSamples &samples) {
    layer.validate();
    if (samples.X.cols != layer.config.d_model) {
        throw std::invalid_argument("sample width " + std::to_string(samples.X.cols) + " expected d_model " +
                                    std::to_string(layer.config.d_model));
    }
    int n = samples.X.rows;
    int n_micro = layer.n_micro();

    // routing coefficients per token, computed once
    Mat a(n, layer.config.total_experts());
    parallel_for(n, [&](int t) {
        std::vector<float> x(samples.X.row(t), samples.X.row(t) + samples.X.cols);
        std::vector<float> coeff = route(layer.router, x, layer.config);
        std::copy(coeff.begin(), coeff.end(), a.row(t));
    });

    // column blocks are per-expert, so expert-parallel writes are disjoint
    std::vector<int> base((size_t)layer.experts.size() + 1, 0);
    for (int e = 0; e < (int)layer.experts.size(); e++) {
        base[(size_t)e + 1] = base[(size_t)e] + layer.experts[(size_t)e].width;
    }

    ActivationCoefficients out;
    out.phi = Mat(n, n_micro);
    parallel_for((int)layer.experts.size(), [&](int e) {
        const ExpertWeights &w = layer.experts[(size_t)e];
        for (int t = 0; t < n; t++) {
            float at = a.at(t, e);
            if (at == 0.0f) continue; // phi row stays zero for unrouted experts
            const float *x = samples.X.row(t);
            float *dst = out.phi.row(t) + base[(size_t)e];
            for (int j = 0; j < w.width; j++) {
                double g = dot_f64(w.gate.row(j), x, w.gate.cols);
                double u = dot_f64(w.up.row(j), x, w.up.cols);
                dst[j] = (float)((double)at * silu(g) * u);
            }
        }
    });
    return out;
}

EnergyScores compute_energy(const ActivationCoefficients &coeff, const MoELayer &layer, double alpha) {
    if (alpha < 0.0 || alpha > 1.0 || !std::isfinite(alpha)) {
        throw std::invalid_argument("alpha must be in [0, 1]");
    }
    int n_micro = layer.n_micro();
    if (coeff.phi.cols != n_micro) {
        throw std::invalid_argument("coefficient width " + std::to_string(coeff.phi.cols) +
                                    " does not match micro-expert count " + std::to_string(n_micro));
    }
    std::vector<int> base((size_t)layer.experts.size() + 1, 0);
    for (int e = 0; e < (int)layer.experts.size(); e++) {
        base[(size_t)e + 1] = base[(size_t)e] + layer.experts[(size_t)e].width;
    }

    EnergyScores out;
    out.alpha = alpha;
    out.energy.assign((size_t)n_micro, 0.0);
    int n = coeff.phi.rows;
    parallel_for((int)layer.experts.size(), [&](int e) {
        const ExpertWeights &w = layer.experts[(size_t)e];
        for (int j = 0; j < w.width; j++) {
            int i = base[(size_t)e] + j;
            // column scan, tokens in ascending order
            double sum_sq = 0.0;
            double peak = 0.0;
            for (int t = 0; t < n; t++) {
                double v = (double)coeff.phi.at(t, i);
                sum_sq += v * v;
                peak = std::max(peak, std::fabs(v));
            }
            double w_sq = 0.0;
            for (int r = 0; r < w.down.rows; r++) {
                double d = (double)w.down.at(r, j);
                w_sq += d * d;
            }
            out.energy[(size_t)i] = ((1.0 - alpha) * sum_sq + alpha * peak * peak) * w_sq;
        }
    });
    return out;
}

std::pair<Ranking, EnergyScores> rank_micro_experts(const MoELayer &layer, const LayerSamples &samples,
                                                    double alpha) {
    ActivationCoefficients coeff = compute_coefficients(layer, samples);
    EnergyScores scores = compute_energy(coeff, layer, alpha);
    Ranking r;
    r.order.resize(scores.energy.size());
    std::iota(r.order.begin(), r.order.end(), 0);
    // stable sort on strict descending energy keeps flat-index order among ties
    std::stable_sort(r.order.begin(), r.order.end(),
                     [&](int a, int b) { return scores.energy[(size_t)a] > scores.energy[(size_t)b]; });
    return {std::move(r), std::move(scores)};
}

Mat stack_down_rows(const MoELayer &layer) {
    Mat w(layer.n_micro(), layer.config.d_model);
    int i = 0;
    for (const auto &e : layer.experts) {
        for (int j = 0; j < e.width; j++, i++) {
            for (int r = 0; r < e.down.rows; r++) {
                w.at(i, r) = e.down.at(r, j);
            }
        }
    }
    return w;
}

Mat reconstruct_from(const Mat &phi, const Mat &w, const std::vector<int> &kept) {
    if (phi.cols != w.rows) {
        throw std::invalid_argument("phi cols " + std::to_string(phi.cols) + " must match w rows " +
                                    std::to_string(w.rows));
    }
    for (int i : kept) {
        if (i < 0 || i >= phi.cols) throw std::out_of_range("kept index out of range");
    }
    Mat y(phi.rows, w.cols);
    parallel_for(phi.rows, [&](int t) {
        for (int c = 0; c < w.cols; c++) {
            double acc = 0.0;
            for (int i : kept) {
                acc += (double)phi.at(t, i) * (double)w.at(i, c);
            }
            y.at(t, c) = (float)acc;
        }
    });
    return y;
}

} // namespace mcam
