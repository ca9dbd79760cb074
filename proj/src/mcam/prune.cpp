#include "prune.h"

#include <algorithm>
#include <cmath>

namespace mcam {

RetainSet select_retain_set(const Ranking &ranking, double lambda, const MoELayer &layer,
                            bool protect_shared) {
    if (!(lambda >= 0.0 && lambda < 1.0)) {
        throw std::invalid_argument("lambda must be in [0, 1)");
    }
    int n_e = layer.n_micro();
    if ((int)ranking.order.size() != n_e) {
        throw std::invalid_argument("ranking covers " + std::to_string(ranking.order.size()) +
                                    " micro-experts, layer has " + std::to_string(n_e));
    }
    // round-half-up retain count, at least one micro-expert survives
    int m = (int)std::floor((1.0 - lambda) * (double)n_e + 0.5);
    m = std::max(1, std::min(m, n_e));
    int quota = n_e - m; // how many to remove

    // shared experts occupy the lowest flat indices (stored first)
    int shared_micro = 0;
    for (int e = 0; e < layer.config.n_shared; e++) shared_micro += layer.experts[(size_t)e].width;

    std::vector<char> drop((size_t)n_e, 0);
    int dropped = 0;
    for (int r = n_e - 1; r >= 0 && dropped < quota; r--) {
        int flat = ranking.order[(size_t)r];
        if (protect_shared && flat < shared_micro) continue;
        drop[(size_t)flat] = 1;
        dropped++;
    }

    RetainSet out;
    for (int i = 0; i < n_e; i++) {
        if (drop[(size_t)i]) {
            out.removed.push_back(i);
        } else {
            out.kept.push_back(i);
        }
    }
    out.per_expert.resize(layer.experts.size());
    {
        int base = 0;
        for (int e = 0; e < (int)layer.experts.size(); e++) {
            int w = layer.experts[(size_t)e].width;
            for (int j = 0; j < w; j++) {
                if (!drop[(size_t)(base + j)]) out.per_expert[(size_t)e].push_back(j);
            }
            base += w;
        }
    }
    return out;
}

MoELayer prune_layer(const MoELayer &layer, const RetainSet &retain) {
    if (retain.per_expert.size() != layer.experts.size()) {
        throw std::invalid_argument("retain set covers " + std::to_string(retain.per_expert.size()) +
                                    " experts, layer has " + std::to_string(layer.experts.size()));
    }
    MoELayer out;
    out.config = layer.config;
    out.router = layer.router;
    out.experts.reserve(layer.experts.size());
    for (int e = 0; e < (int)layer.experts.size(); e++) {
        const ExpertWeights &src = layer.experts[(size_t)e];
        const std::vector<int> &keep = retain.per_expert[(size_t)e];
        for (size_t i = 0; i < keep.size(); i++) {
            if (keep[i] < 0 || keep[i] >= src.width || (i > 0 && keep[i] <= keep[i - 1])) {
                throw std::out_of_range("retain list for expert " + std::to_string(e) +
                                        " is not strictly ascending within [0, width)");
            }
        }
        ExpertWeights dst;
        dst.width = (int)keep.size();
        dst.up = Mat(dst.width, layer.config.d_model);
        dst.gate = Mat(dst.width, layer.config.d_model);
        dst.down = Mat(layer.config.d_model, dst.width);
        for (int j = 0; j < dst.width; j++) {
            int s = keep[(size_t)j];
            std::copy(src.up.row(s), src.up.row(s) + src.up.cols, dst.up.row(j));
            std::copy(src.gate.row(s), src.gate.row(s) + src.gate.cols, dst.gate.row(j));
            for (int r = 0; r < layer.config.d_model; r++) {
                dst.down.at(r, j) = src.down.at(r, s);
            }
        }
        out.experts.push_back(std::move(dst));
    }
    return out;
}

MoEModel prune_model(const MoEModel &model, const CalibBatch &batch, const PruneConfig &config,
                     PruneRunStats *stats) {
    model.validate();
    if (batch.X.cols != model.config.d_model) {
        throw std::invalid_argument("calibration width " + std::to_string(batch.X.cols) +
                                    " does not match model d_model " + std::to_string(model.config.d_model));
    }
    MoEModel out;
    out.config = model.config;
    out.layers.reserve(model.layers.size());
    if (stats) stats->layers.clear();

    Mat cur = batch.X;
    for (int l = 0; l < model.config.n_layers; l++) {
        const MoELayer &layer = model.layers[(size_t)l];
        LayerSamples samples;
        samples.X = cur;
        samples.Y = layer_forward_batch(layer, cur);

        auto [ranking, scores] = rank_micro_experts(layer, samples, config.alpha);
        RetainSet retain = select_retain_set(ranking, config.lambda, layer, config.protect_shared);
        MoELayer pruned = prune_layer(layer, retain);
        Mat y_pruned = layer_forward_batch(pruned, cur);

        if (stats) {
            PruneLayerStats ls;
            ls.layer = l;
            ls.n_micro_before = layer.n_micro();
            ls.n_micro_after = pruned.n_micro();
            ls.width_before = layer.widths();
            ls.width_after = pruned.widths();
            double lowest_kept = 0.0;
            bool first = true;
            for (int i : retain.kept) {
                if (first || scores.energy[(size_t)i] < lowest_kept) lowest_kept = scores.energy[(size_t)i];
                first = false;
            }
            ls.boundary_energy = lowest_kept;
            for (int i : retain.removed) ls.removed_energy_sum += scores.energy[(size_t)i];
            ls.realized_error = frob_sq_diff(samples.Y, y_pruned);
            stats->layers.push_back(std::move(ls));
        }

        out.layers.push_back(std::move(pruned));
        cur = std::move(y_pruned); // downstream layers see the pruned output
    }
    return out;
}

} // namespace mcam
