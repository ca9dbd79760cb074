#pragma once

#include "calibration.h"
#include "prune.h"
#include "rank.h"

#include "json.hpp"

namespace mcam {

// all report tables share one shape: {"kind", "columns", "rows", ...extras};
// rows are emitted in a deterministic order so serialization is byte-stable

// sorted energies (ascending) with the top drop_top removed, plus quantiles
nlohmann::ordered_json energy_distribution(const EnergyScores &scores, int drop_top);

// per expert: quartiles of its micro-experts' global ranks, raw and normalized
// by (N_e - 1) (box-plot data)
nlohmann::ordered_json rank_distribution_per_expert(const Ranking &ranking, const MoELayer &layer);

// per expert: 1 - kept/width (width-0 experts report ratio 1)
nlohmann::ordered_json per_expert_prune_ratio(const RetainSet &retain, const MoELayer &layer);

struct ApproxErrorRecord {
    int layer = 0;
    double l2 = 0.0;     // sum over tokens of per-token L2 distance
    double cosine = 0.0; // mean per-token cosine similarity
};

// feeds BOTH layer variants the original model's (model_a's) upstream hidden
// states so each layer's error is isolated from upstream drift
std::vector<ApproxErrorRecord> approx_error(const MoEModel &model_a, const MoEModel &model_b,
                                            const CalibBatch &batch, const std::vector<int> &layers);

nlohmann::ordered_json approx_error_table(const std::vector<ApproxErrorRecord> &records);

// "columns"/"rows" tables render to CSV with the same column order
std::string table_to_csv(const nlohmann::ordered_json &table);

} // namespace mcam
