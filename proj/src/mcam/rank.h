#pragma once

#include "calibration.h"
#include "model.h"

namespace mcam {

// phi[t][i] = routing coefficient of micro-expert i's expert for token t
//           * silu(gate_i . x_t) * (up_i . x_t)
// so the layer output decomposes as Y = Phi W with W the stacked down columns
struct ActivationCoefficients {
    Mat phi; // n_tokens x n_micro
};

struct EnergyScores {
    std::vector<double> energy; // f64: accumulation width is part of the contract
    double alpha = 0.0;
};

// descending energy; equal energies keep ascending flat-index order
struct Ranking {
    std::vector<int> order; // order[r] = flat micro-expert index at rank r
};

ActivationCoefficients compute_coefficients(const MoELayer &layer, const LayerSamples &samples);

// E_i = ((1 - alpha) * ||phi_col_i||_2^2 + alpha * ||phi_col_i||_inf^2) * ||w_down_col_i||_2^2
EnergyScores compute_energy(const ActivationCoefficients &coeff, const MoELayer &layer, double alpha);

std::pair<Ranking, EnergyScores> rank_micro_experts(const MoELayer &layer, const LayerSamples &samples,
                                                    double alpha);

// stacked down columns as rows: W[i] = w_down column of micro-expert i (n_micro x d_model);
// the decomposition identity Y = Phi W uses exactly this orientation
Mat stack_down_rows(const MoELayer &layer);

// Y_hat = Phi[:, kept] W[kept, :] restricted reconstruction
Mat reconstruct_from(const Mat &phi, const Mat &w, const std::vector<int> &kept);

} // namespace mcam
