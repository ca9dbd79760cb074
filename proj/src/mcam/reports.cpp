#include "reports.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mcam {

namespace {

// type-7 linear interpolation on an ascending sample
double quantile(const std::vector<double> &sorted, double p) {
    if (sorted.empty()) return 0.0;
    if (sorted.size() == 1) return sorted[0];
    double h = (double)(sorted.size() - 1) * p;
    size_t lo = (size_t)std::floor(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    double frac = h - (double)lo;
    return sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac;
}

nlohmann::ordered_json quantile_block(const std::vector<double> &sorted) {
    return {{"min", sorted.empty() ? 0.0 : sorted.front()},
            {"p25", quantile(sorted, 0.25)},
            {"median", quantile(sorted, 0.5)},
            {"p75", quantile(sorted, 0.75)},
            {"max", sorted.empty() ? 0.0 : sorted.back()}};
}

} // namespace

nlohmann::ordered_json energy_distribution(const EnergyScores &scores, int drop_top) {
    int n = (int)scores.energy.size();
    if (drop_top < 0 || drop_top >= n) {
        throw std::invalid_argument("drop_top must be in [0, N_e)");
    }
    std::vector<double> sorted = scores.energy;
    std::sort(sorted.begin(), sorted.end());
    sorted.resize((size_t)(n - drop_top)); // discard the heaviest tail

    nlohmann::ordered_json table;
    table["kind"] = "energy_distribution";
    table["alpha"] = scores.alpha;
    table["n_micro"] = n;
    table["drop_top"] = drop_top;
    table["quantiles"] = quantile_block(sorted);
    table["columns"] = {"index", "energy"};
    auto rows = nlohmann::ordered_json::array();
    for (size_t i = 0; i < sorted.size(); i++) {
        rows.push_back({i, sorted[i]});
    }
    table["rows"] = std::move(rows);
    return table;
}

nlohmann::ordered_json rank_distribution_per_expert(const Ranking &ranking, const MoELayer &layer) {
    int n_e = layer.n_micro();
    if ((int)ranking.order.size() != n_e) {
        throw std::invalid_argument("ranking size does not match layer micro-expert count");
    }
    std::vector<int> rank_of((size_t)n_e, 0);
    for (int r = 0; r < n_e; r++) rank_of[(size_t)ranking.order[(size_t)r]] = r;

    nlohmann::ordered_json table;
    table["kind"] = "rank_distribution_per_expert";
    table["n_micro"] = n_e;
    table["columns"] = {"expert",     "shared",     "width",      "rank_min",   "rank_p25",
                        "rank_median", "rank_p75",  "rank_max",   "norm_min",   "norm_p25",
                        "norm_median", "norm_p75",  "norm_max"};
    auto rows = nlohmann::ordered_json::array();
    double denom = n_e > 1 ? (double)(n_e - 1) : 1.0;
    int base = 0;
    for (int e = 0; e < (int)layer.experts.size(); e++) {
        int w = layer.experts[(size_t)e].width;
        std::vector<double> ranks;
        ranks.reserve((size_t)w);
        for (int j = 0; j < w; j++) ranks.push_back((double)rank_of[(size_t)(base + j)]);
        std::sort(ranks.begin(), ranks.end());
        nlohmann::ordered_json q = quantile_block(ranks);
        rows.push_back({e, e < layer.config.n_shared, w, q["min"], q["p25"], q["median"], q["p75"], q["max"],
                        (double)q["min"] / denom, (double)q["p25"] / denom, (double)q["median"] / denom,
                        (double)q["p75"] / denom, (double)q["max"] / denom});
        base += w;
    }
    table["rows"] = std::move(rows);
    return table;
}

nlohmann::ordered_json per_expert_prune_ratio(const RetainSet &retain, const MoELayer &layer) {
    if (retain.per_expert.size() != layer.experts.size()) {
        throw std::invalid_argument("retain set does not match layer expert count");
    }
    nlohmann::ordered_json table;
    table["kind"] = "per_expert_prune_ratio";
    table["columns"] = {"expert", "shared", "width", "kept", "prune_ratio"};
    auto rows = nlohmann::ordered_json::array();
    for (int e = 0; e < (int)layer.experts.size(); e++) {
        int w = layer.experts[(size_t)e].width;
        int kept = (int)retain.per_expert[(size_t)e].size();
        double ratio = w > 0 ? 1.0 - (double)kept / (double)w : 1.0;
        rows.push_back({e, e < layer.config.n_shared, w, kept, ratio});
    }
    table["rows"] = std::move(rows);
    return table;
}

std::vector<ApproxErrorRecord> approx_error(const MoEModel &model_a, const MoEModel &model_b,
                                            const CalibBatch &batch, const std::vector<int> &layers) {
    model_a.validate();
    model_b.validate();
    if (model_a.config.n_layers != model_b.config.n_layers ||
        model_a.config.d_model != model_b.config.d_model) {
        throw std::invalid_argument("models disagree on layer count or d_model");
    }
    for (int l : layers) {
        if (l < 0 || l >= model_a.config.n_layers) {
            throw std::out_of_range("layer index " + std::to_string(l) + " out of range");
        }
    }

    std::vector<char> wanted((size_t)model_a.config.n_layers, 0);
    for (int l : layers) wanted[(size_t)l] = 1;
    int last_wanted = -1;
    for (int l = 0; l < model_a.config.n_layers; l++) {
        if (wanted[(size_t)l]) last_wanted = l;
    }

    std::vector<ApproxErrorRecord> records;
    Mat cur = batch.X;
    for (int l = 0; l <= last_wanted; l++) {
        Mat y_a = layer_forward_batch(model_a.layers[(size_t)l], cur);
        if (wanted[(size_t)l]) {
            Mat y_b = layer_forward_batch(model_b.layers[(size_t)l], cur);
            ApproxErrorRecord rec;
            rec.layer = l;
            double cos_sum = 0.0;
            for (int t = 0; t < y_a.rows; t++) {
                double d2 = 0.0;
                for (int c = 0; c < y_a.cols; c++) {
                    double d = (double)y_a.at(t, c) - (double)y_b.at(t, c);
                    d2 += d * d;
                }
                rec.l2 += std::sqrt(d2);
                double na = norm2_sq_f64(y_a.row(t), y_a.cols);
                double nb = norm2_sq_f64(y_b.row(t), y_b.cols);
                if (na == 0.0 && nb == 0.0) {
                    cos_sum += 1.0; // both zero: identical directionless outputs
                } else if (na == 0.0 || nb == 0.0) {
                    cos_sum += 0.0;
                } else {
                    cos_sum += dot_f64(y_a.row(t), y_b.row(t), y_a.cols) / std::sqrt(na * nb);
                }
            }
            rec.cosine = cos_sum / (double)y_a.rows;
            records.push_back(rec);
        }
        cur = std::move(y_a); // both variants always see the original upstream states
    }
    return records;
}

nlohmann::ordered_json approx_error_table(const std::vector<ApproxErrorRecord> &records) {
    nlohmann::ordered_json table;
    table["kind"] = "approx_error";
    table["columns"] = {"layer", "l2_sum", "cosine_mean"};
    auto rows = nlohmann::ordered_json::array();
    for (const auto &r : records) rows.push_back({r.layer, r.l2, r.cosine});
    table["rows"] = std::move(rows);
    return table;
}

std::string table_to_csv(const nlohmann::ordered_json &table) {
    if (!table.contains("columns") || !table.contains("rows")) {
        throw std::invalid_argument("not a columns/rows table");
    }
    std::ostringstream out;
    const auto &cols = table["columns"];
    for (size_t i = 0; i < cols.size(); i++) {
        if (i) out << ",";
        out << cols[i].get<std::string>();
    }
    out << "\n";
    for (const auto &row : table["rows"]) {
        for (size_t i = 0; i < row.size(); i++) {
            if (i) out << ",";
            const auto &cell = row[i];
            if (cell.is_string()) {
                out << cell.get<std::string>();
            } else {
                out << cell.dump(); // numbers/bools serialize canonically
            }
        }
        out << "\n";
    }
    return out.str();
}

} // namespace mcam
