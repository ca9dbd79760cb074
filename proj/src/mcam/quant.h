#pragma once

#include "calibration.h"
#include "rank.h"

#include <array>

namespace mcam {

struct QuantizedMatrix {
    std::vector<uint32_t> codes;    // one per value, in [0, 2^bits - 1]
    std::vector<float> scales;      // per group
    std::vector<float> zero_points; // per group (the group minimum)
    int bits = 0;
    int group_size = 0;
    size_t n = 0; // total values

    size_t n_groups() const { return scales.size(); }
};

// asymmetric round-to-nearest affine quantizer: per group of group_size
// consecutive values, scale = (max - min) / (2^bits - 1), zero_point = min,
// code = clamp(round((w - min) / scale)); zero-range groups store scale 0 and
// decode to the constant; the last group may be short
QuantizedMatrix quantize_group_affine(const std::vector<float> &w, int bits, int group_size);
std::vector<float> dequantize(const QuantizedMatrix &q);

struct QuantPlan {
    std::array<double, 3> ratios{}; // fractions of micro-experts per level, sum 1
    std::array<int, 3> bits{};      // descending; level 0 gets the most bits
    int group_size = 0;
    std::array<std::vector<int>, 3> level_sets; // flat ids per level, ranking order
    std::vector<uint8_t> level_of;              // flat id -> level

    int n_micro() const { return (int)level_of.size(); }
};

// splits the descending-energy ranking into three contiguous level sets whose
// sizes follow cumulative rounding of the ratios; the highest-energy set gets
// bits[0] (the widest)
QuantPlan make_quant_plan(const Ranking &ranking, const std::array<double, 3> &ratios,
                          const std::array<int, 3> &bits, int group_size);

// planned average bits per expert weight: sum r_k * b_k (no group overhead)
double average_weight_bits(const QuantPlan &plan);
// planned average including the 16-bit scale + 16-bit zero-point per group
double average_bitwidth(const QuantPlan &plan);

struct QuantSlice {
    int expert = 0;
    std::string matrix; // "up" | "gate" | "down"
    int level = 0;
    int bits = 0;
    std::vector<int> micro; // original flat ids whose weights live in this slice
    size_t n_weights = 0;
    size_t n_groups = 0;
};

struct LayerQuantStats {
    std::vector<QuantSlice> slices;
    std::vector<std::vector<int>> perm; // per expert: new neuron j -> original neuron
    double plan_weight_bits = 0.0;
    double plan_avg_bits = 0.0;
    double actual_avg_bits = 0.0; // (sum n_weights*bits + n_groups*32) / sum n_weights
    size_t total_weights = 0;
    size_t total_groups = 0;
};

// micro-expert-sliced quantization: neurons are first permuted so same-level
// neurons sit contiguously per expert (colocation; function-preserving), then
// for each expert and level the up/gate ROW block and down COLUMN block are
// quantized at that level's width — every weight of a micro-expert shares one
// precision. Weights come back dequantized; codes/groups are recorded in stats.
// Slice `micro` ids refer to the ORIGINAL (pre-permutation) flat indexing.
MoELayer quantize_layer_microexpert(const MoELayer &layer, const QuantPlan &plan,
                                    LayerQuantStats *stats = nullptr);

// degraded variant: down is sliced as above, but up/gate are sliced along the
// INPUT (column) dimension, split proportionally to the expert's level counts —
// each up/gate row (micro-expert) then spans several precisions
MoELayer quantize_layer_columnwise(const MoELayer &layer, const QuantPlan &plan,
                                   LayerQuantStats *stats = nullptr);

struct BitAudit {
    std::vector<std::vector<int>> all;     // per original flat id: sorted unique bit-widths
    std::vector<std::vector<int>> up_gate; // same, restricted to up/gate slices
};

BitAudit audit_bitwidths(const LayerQuantStats &stats, int n_micro);

enum class QuantVariant { micro_expert, columnwise };

struct QuantConfig {
    std::array<int, 3> bits{};
    std::array<double, 3> ratios{};
    int group_size = 128;
    QuantVariant variant = QuantVariant::micro_expert;
    double alpha = 1.0;
};

struct QuantLayerRunStats {
    int layer = 0;
    std::array<int, 3> level_sizes{};
    double plan_weight_bits = 0.0;
    double plan_avg_bits = 0.0;
    double actual_avg_bits = 0.0;
    double realized_error = 0.0; // ||Y_orig - Y_quant||_F^2 on this layer's samples
    bool audit_single_level = false;       // every micro-expert at exactly one width
    bool audit_upgate_multi_level = false; // some up/gate micro-expert spans >= 2
};

struct QuantRunStats {
    std::vector<QuantLayerRunStats> layers;
};

// layer-sequential like pruning: rank on the already-quantized prefix's
// activations, plan, quantize, then advance the batch through the new layer
MoEModel quantize_model(const MoEModel &model, const CalibBatch &batch, const QuantConfig &config,
                        QuantRunStats *stats = nullptr);

} // namespace mcam
