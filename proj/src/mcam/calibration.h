#pragma once

#include "model.h"

namespace mcam {

// calibration batch: one token embedding per row
struct CalibBatch {
    Mat X; // n x d_model
};

// i.i.d. N(0, scale^2) entries from the deterministic generator; the draw
// order is row-major, so (n, d_model, seed, scale) pins every byte
CalibBatch gen_synthetic(int n, int d_model, uint64_t seed, double scale);

void save_calibration(const CalibBatch &batch, const std::string &path);

// expected_d_model < 0 skips the width check; rejects NaN/Inf entries
CalibBatch load_calibration(const std::string &path, int expected_d_model);

// inputs X and outputs Y of one layer, with X produced by chaining the
// model's own earlier layers over the batch (layer 0 sees the batch itself)
struct LayerSamples {
    Mat X; // n x d_model
    Mat Y; // n x d_model
};

LayerSamples capture_layer_samples(const MoEModel &model, const CalibBatch &batch, int layer);

} // namespace mcam
