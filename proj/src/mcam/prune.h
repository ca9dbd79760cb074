#pragma once

#include "calibration.h"
#include "rank.h"

namespace mcam {

struct RetainSet {
    std::vector<int> kept;                 // flat indices, ascending
    std::vector<int> removed;              // complement, ascending
    std::vector<std::vector<int>> per_expert; // kept neuron ids per expert, ascending
};

struct PruneConfig {
    double lambda = 0.0;        // overall pruning ratio in [0, 1)
    double alpha = 1.0;         // energy balance coefficient
    bool protect_shared = false; // exempt shared-expert micro-experts from removal
};

// keeps the top m = round((1-lambda) * N_e) ranked micro-experts (never fewer
// than one); with protect_shared, the removal quota falls entirely on
// non-shared micro-experts (shared ones are always kept)
RetainSet select_retain_set(const Ranking &ranking, double lambda, const MoELayer &layer,
                            bool protect_shared = false);

// drops the non-kept rows of up/gate and columns of down per expert; experts
// may shrink to width 0 but stay in the layer so routing semantics never change
MoELayer prune_layer(const MoELayer &layer, const RetainSet &retain);

struct PruneLayerStats {
    int layer = 0;
    int n_micro_before = 0;
    int n_micro_after = 0;
    std::vector<int> width_before;
    std::vector<int> width_after;
    double boundary_energy = 0.0;    // energy of the lowest-ranked kept micro-expert
    double removed_energy_sum = 0.0; // sum of removed energies at the run's alpha
                                     // (equals the paired-sum error bound when alpha = 0)
    double realized_error = 0.0;     // ||Y_orig - Y_pruned||_F^2 on this layer's samples
};

struct PruneRunStats {
    std::vector<PruneLayerStats> layers;
};

// layer-sequential pruning: each layer is ranked on activations that already
// flowed through the pruned earlier layers, then replaced by its pruned
// version before the batch moves on
MoEModel prune_model(const MoEModel &model, const CalibBatch &batch, const PruneConfig &config,
                     PruneRunStats *stats = nullptr);

} // namespace mcam
