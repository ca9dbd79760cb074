#pragma once

#include "model.h"

namespace mcam {

// seeded random toy MoE model. Weights are gaussian with 1/sqrt(fan-in)
// scaling, and each intermediate neuron carries a lognormal gain on its up
// row and down column so micro-expert energies are heavy-tailed and the
// ordering is a property of the weights (as in trained mixtures) rather
// than of any particular input batch. Because gate*up products square the
// input scale, each layer's down projection is then rescaled so its output
// matches the layer input's magnitude on a seeded probe batch — a fixed
// gain cannot keep a deep stack bounded. Draw order is fixed: per layer,
// router first, then experts in storage order (gains, up rows, gate rows,
// down columns), then the probe rescale, so (config, seed, scale) pins
// every byte.
MoEModel gen_toy_model(const ModelConfig &config, uint64_t seed, double scale);

} // namespace mcam
