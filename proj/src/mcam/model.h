#pragma once

#include "common.h"

namespace mcam {

struct ModelConfig {
    int n_layers = 1;
    int n_experts = 1; // routed experts (the router scores exactly these)
    int n_shared = 0;  // always-on experts, stored before the routed ones
    int d_model = 1;
    int d_ff = 1;      // nominal expert width; actual widths may differ after pruning
    int top_k = 1;

    int total_experts() const { return n_shared + n_experts; }
    void validate() const;
};

// one expert's three projections; a micro-expert j is the triple
// (up row j, gate row j, down column j) sharing intermediate neuron j
struct ExpertWeights {
    Mat up;   // width x d_model
    Mat gate; // width x d_model
    Mat down; // d_model x width
    int width = 0;

    void validate(int d_model) const;
};

struct MoELayer {
    std::vector<ExpertWeights> experts; // shared first, then routed
    Mat router;                         // n_experts x d_model (routed only)
    ModelConfig config;

    int n_micro() const;              // total micro-experts across all experts
    std::vector<int> widths() const;  // per-expert widths, expert order
    void validate() const;
};

struct MoEModel {
    ModelConfig config;
    std::vector<MoELayer> layers;

    void validate() const;
};

// flat micro-expert index space: experts in storage order, neurons ascending
struct MicroExpertId {
    int expert = 0;
    int neuron = 0;
    bool operator==(const MicroExpertId &o) const { return expert == o.expert && neuron == o.neuron; }
};

MicroExpertId flat_to_id(const MoELayer &layer, int flat);
int id_to_flat(const MoELayer &layer, const MicroExpertId &id);

// x * sigmoid(x), evaluated in f64
double silu(double x);

// per-token mixture coefficients over the full expert list (length total_experts):
// shared experts get fixed 1.0; routed experts get softmax-then-top-k-renormalize,
// non-selected routed experts get exactly 0. Ties keep the lower expert index.
std::vector<float> route(const Mat &router, const std::vector<float> &x, const ModelConfig &config);

// silu(gate x) * (up x) mixed down: y[r] = sum_j down[r][j] * h[j]
std::vector<float> expert_forward(const ExpertWeights &e, const std::vector<float> &x);

// full mixture output for one token
std::vector<float> moe_forward(const MoELayer &layer, const std::vector<float> &x);

// contribution of a single micro-expert to moe_forward (zero if its expert
// is not routed for this token); moe_forward equals the sum of these
std::vector<float> micro_expert_contribution(const MoELayer &layer, const MicroExpertId &id,
                                             const std::vector<float> &x);

// reorder intermediate neurons: row j of the result comes from row perm[j]
// (and down column j from down column perm[j]); function-preserving for any
// bijection perm over [0, width)
ExpertWeights permute_micro_experts(const ExpertWeights &e, const std::vector<int> &perm);

// batch forward through one layer: one row per token
Mat layer_forward_batch(const MoELayer &layer, const Mat &x);

} // namespace mcam
