#include "quant.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mcam {

QuantizedMatrix quantize_group_affine(const std::vector<float> &w, int bits, int group_size) {
    if (bits < 1 || bits > 24) throw std::invalid_argument("bits must be in [1, 24]");
    if (group_size < 1) throw std::invalid_argument("group_size must be >= 1");
    for (float v : w) {
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite weight");
    }
    QuantizedMatrix q;
    q.bits = bits;
    q.group_size = group_size;
    q.n = w.size();
    q.codes.resize(w.size());
    double levels = (double)((1u << bits) - 1);
    for (size_t g0 = 0; g0 < w.size(); g0 += (size_t)group_size) {
        size_t g1 = std::min(w.size(), g0 + (size_t)group_size);
        float lo = w[g0], hi = w[g0];
        for (size_t i = g0; i < g1; i++) {
            lo = std::min(lo, w[i]);
            hi = std::max(hi, w[i]);
        }
        float scale = (float)(((double)hi - (double)lo) / levels);
        q.scales.push_back(scale);
        q.zero_points.push_back(lo);
        if (scale == 0.0f) {
            for (size_t i = g0; i < g1; i++) q.codes[i] = 0; // constant group
            continue;
        }
        for (size_t i = g0; i < g1; i++) {
            double c = std::round(((double)w[i] - (double)lo) / (double)scale);
            c = std::max(0.0, std::min(levels, c));
            q.codes[i] = (uint32_t)c;
        }
    }
    return q;
}

std::vector<float> dequantize(const QuantizedMatrix &q) {
    std::vector<float> out(q.n);
    for (size_t i = 0; i < q.n; i++) {
        size_t g = i / (size_t)q.group_size;
        out[i] = (float)((double)q.zero_points[g] + (double)q.codes[i] * (double)q.scales[g]);
    }
    return out;
}

QuantPlan make_quant_plan(const Ranking &ranking, const std::array<double, 3> &ratios,
                          const std::array<int, 3> &bits, int group_size) {
    double sum = 0.0;
    for (double r : ratios) {
        if (!(r >= 0.0)) throw std::invalid_argument("ratios must be non-negative");
        sum += r;
    }
    if (std::fabs(sum - 1.0) > 1e-9) throw std::invalid_argument("ratios must sum to 1");
    if (bits[0] < bits[1] || bits[1] < bits[2]) {
        throw std::invalid_argument("bits must be descending (highest precision first)");
    }
    if (bits[2] < 1) throw std::invalid_argument("bits must be >= 1");
    if (group_size < 1) throw std::invalid_argument("group_size must be >= 1");

    int n_e = (int)ranking.order.size();
    QuantPlan plan;
    plan.ratios = ratios;
    plan.bits = bits;
    plan.group_size = group_size;
    plan.level_of.assign((size_t)n_e, 0);

    // cumulative rounding keeps the three sizes summing to N_e exactly
    int c1 = (int)std::floor(ratios[0] * (double)n_e + 0.5);
    int c2 = (int)std::floor((ratios[0] + ratios[1]) * (double)n_e + 0.5);
    c1 = std::max(0, std::min(c1, n_e));
    c2 = std::max(c1, std::min(c2, n_e));
    for (int r = 0; r < n_e; r++) {
        int level = r < c1 ? 0 : (r < c2 ? 1 : 2);
        int flat = ranking.order[(size_t)r];
        plan.level_sets[(size_t)level].push_back(flat);
        plan.level_of[(size_t)flat] = (uint8_t)level;
    }
    return plan;
}

double average_weight_bits(const QuantPlan &plan) {
    return plan.ratios[0] * plan.bits[0] + plan.ratios[1] * plan.bits[1] + plan.ratios[2] * plan.bits[2];
}

double average_bitwidth(const QuantPlan &plan) {
    return average_weight_bits(plan) + 32.0 / (double)plan.group_size;
}

namespace {

// quantize one flattened slice in place and record its accounting entry
void apply_slice(std::vector<float> &values, int bits, int group_size, int expert, const char *matrix,
                 int level, std::vector<int> micro, LayerQuantStats *stats) {
    if (values.empty()) return;
    QuantizedMatrix q = quantize_group_affine(values, bits, group_size);
    values = dequantize(q);
    if (stats) {
        QuantSlice s;
        s.expert = expert;
        s.matrix = matrix;
        s.level = level;
        s.bits = bits;
        s.micro = std::move(micro);
        s.n_weights = q.n;
        s.n_groups = q.n_groups();
        stats->total_weights += q.n;
        stats->total_groups += q.n_groups();
        stats->slices.push_back(std::move(s));
    }
}

std::vector<float> gather_rows(const Mat &m, int row0, int row1) {
    std::vector<float> out;
    out.reserve((size_t)(row1 - row0) * (size_t)m.cols);
    for (int r = row0; r < row1; r++) {
        out.insert(out.end(), m.row(r), m.row(r) + m.cols);
    }
    return out;
}

void scatter_rows(Mat &m, int row0, int row1, const std::vector<float> &v) {
    size_t k = 0;
    for (int r = row0; r < row1; r++) {
        for (int c = 0; c < m.cols; c++) m.at(r, c) = v[k++];
    }
}

// row-major flattening of a column block [col0, col1): fast dimension is the
// block's columns, groups truncate at the block end
std::vector<float> gather_cols(const Mat &m, int col0, int col1) {
    std::vector<float> out;
    out.reserve((size_t)m.rows * (size_t)(col1 - col0));
    for (int r = 0; r < m.rows; r++) {
        const float *row = m.row(r);
        out.insert(out.end(), row + col0, row + col1);
    }
    return out;
}

void scatter_cols(Mat &m, int col0, int col1, const std::vector<float> &v) {
    size_t k = 0;
    for (int r = 0; r < m.rows; r++) {
        for (int c = col0; c < col1; c++) m.at(r, c) = v[k++];
    }
}

struct ColocatedExpert {
    ExpertWeights weights;
    std::vector<int> perm;          // new neuron j -> original neuron
    std::array<int, 3> counts{};    // neurons per level
    std::array<int, 3> starts{};    // row offsets of the level blocks
};

ColocatedExpert colocate(const ExpertWeights &e, const QuantPlan &plan, int flat_base) {
    ColocatedExpert out;
    for (int level = 0; level < 3; level++) {
        for (int j = 0; j < e.width; j++) {
            if (plan.level_of[(size_t)(flat_base + j)] == level) out.perm.push_back(j);
        }
        out.counts[(size_t)level] = (int)out.perm.size();
    }
    // counts accumulated above are prefix sums; unpack into (start, count)
    out.starts[0] = 0;
    out.starts[1] = out.counts[0];
    out.starts[2] = out.counts[1];
    out.counts[2] -= out.counts[1];
    out.counts[1] -= out.counts[0];
    out.weights = e.width > 0 ? permute_micro_experts(e, out.perm) : e;
    return out;
}

void check_plan(const MoELayer &layer, const QuantPlan &plan) {
    if (plan.n_micro() != layer.n_micro()) {
        throw std::invalid_argument("plan covers " + std::to_string(plan.n_micro()) +
                                    " micro-experts, layer has " + std::to_string(layer.n_micro()));
    }
}

void finish_stats(const QuantPlan &plan, LayerQuantStats *stats) {
    if (!stats) return;
    stats->plan_weight_bits = average_weight_bits(plan);
    stats->plan_avg_bits = average_bitwidth(plan);
    if (stats->total_weights > 0) {
        double bit_sum = 0.0;
        for (const auto &s : stats->slices) {
            bit_sum += (double)s.n_weights * (double)s.bits + (double)s.n_groups * 32.0;
        }
        stats->actual_avg_bits = bit_sum / (double)stats->total_weights;
    }
}

} // namespace

MoELayer quantize_layer_microexpert(const MoELayer &layer, const QuantPlan &plan, LayerQuantStats *stats) {
    layer.validate();
    check_plan(layer, plan);
    MoELayer out;
    out.config = layer.config;
    out.router = layer.router; // router stays full precision
    out.experts.resize(layer.experts.size());
    if (stats) stats->perm.resize(layer.experts.size());

    int flat_base = 0;
    for (int e = 0; e < (int)layer.experts.size(); e++) {
        ColocatedExpert co = colocate(layer.experts[(size_t)e], plan, flat_base);
        for (int level = 0; level < 3; level++) {
            int r0 = co.starts[(size_t)level];
            int r1 = r0 + co.counts[(size_t)level];
            if (r0 == r1) continue;
            std::vector<int> micro;
            micro.reserve((size_t)(r1 - r0));
            for (int j = r0; j < r1; j++) micro.push_back(flat_base + co.perm[(size_t)j]);
            int b = plan.bits[(size_t)level];

            std::vector<float> v = gather_rows(co.weights.up, r0, r1);
            apply_slice(v, b, plan.group_size, e, "up", level, micro, stats);
            scatter_rows(co.weights.up, r0, r1, v);

            v = gather_rows(co.weights.gate, r0, r1);
            apply_slice(v, b, plan.group_size, e, "gate", level, micro, stats);
            scatter_rows(co.weights.gate, r0, r1, v);

            v = gather_cols(co.weights.down, r0, r1);
            apply_slice(v, b, plan.group_size, e, "down", level, micro, stats);
            scatter_cols(co.weights.down, r0, r1, v);
        }
        if (stats) stats->perm[(size_t)e] = co.perm;
        out.experts[(size_t)e] = std::move(co.weights);
        flat_base += layer.experts[(size_t)e].width;
    }
    finish_stats(plan, stats);
    return out;
}

MoELayer quantize_layer_columnwise(const MoELayer &layer, const QuantPlan &plan, LayerQuantStats *stats) {
    layer.validate();
    check_plan(layer, plan);
    MoELayer out;
    out.config = layer.config;
    out.router = layer.router;
    out.experts.resize(layer.experts.size());
    if (stats) stats->perm.resize(layer.experts.size());

    int d_model = layer.config.d_model;
    int flat_base = 0;
    for (int e = 0; e < (int)layer.experts.size(); e++) {
        ColocatedExpert co = colocate(layer.experts[(size_t)e], plan, flat_base);
        int width = co.weights.width;

        // every micro-expert of the expert is touched by each nonempty up/gate
        // column block, so the audit sees them all at that block's width
        std::vector<int> all_micro;
        all_micro.reserve((size_t)width);
        for (int j = 0; j < width; j++) all_micro.push_back(flat_base + co.perm[(size_t)j]);

        // input columns split proportionally to the expert's level counts,
        // cumulative rounding as in the plan split
        std::array<int, 4> col_edge{0, 0, 0, 0};
        if (width > 0) {
            int cum = 0;
            for (int level = 0; level < 3; level++) {
                cum += co.counts[(size_t)level];
                col_edge[(size_t)level + 1] =
                    (int)std::floor((double)d_model * (double)cum / (double)width + 0.5);
            }
            col_edge[3] = d_model;
        }

        for (int level = 0; level < 3; level++) {
            int b = plan.bits[(size_t)level];

            int c0 = col_edge[(size_t)level], c1 = col_edge[(size_t)level + 1];
            if (width > 0 && c1 > c0) {
                std::vector<float> v = gather_cols(co.weights.up, c0, c1);
                apply_slice(v, b, plan.group_size, e, "up", level, all_micro, stats);
                scatter_cols(co.weights.up, c0, c1, v);

                v = gather_cols(co.weights.gate, c0, c1);
                apply_slice(v, b, plan.group_size, e, "gate", level, all_micro, stats);
                scatter_cols(co.weights.gate, c0, c1, v);
            }

            // down is sliced by micro-expert exactly like the consistent variant
            int r0 = co.starts[(size_t)level];
            int r1 = r0 + co.counts[(size_t)level];
            if (r1 > r0) {
                std::vector<int> micro;
                micro.reserve((size_t)(r1 - r0));
                for (int j = r0; j < r1; j++) micro.push_back(flat_base + co.perm[(size_t)j]);
                std::vector<float> v = gather_cols(co.weights.down, r0, r1);
                apply_slice(v, b, plan.group_size, e, "down", level, micro, stats);
                scatter_cols(co.weights.down, r0, r1, v);
            }
        }
        if (stats) stats->perm[(size_t)e] = co.perm;
        out.experts[(size_t)e] = std::move(co.weights);
        flat_base += layer.experts[(size_t)e].width;
    }
    finish_stats(plan, stats);
    return out;
}

BitAudit audit_bitwidths(const LayerQuantStats &stats, int n_micro) {
    BitAudit audit;
    audit.all.resize((size_t)n_micro);
    audit.up_gate.resize((size_t)n_micro);
    for (const auto &s : stats.slices) {
        for (int flat : s.micro) {
            if (flat < 0 || flat >= n_micro) throw std::out_of_range("slice micro id out of range");
            audit.all[(size_t)flat].push_back(s.bits);
            if (s.matrix != "down") audit.up_gate[(size_t)flat].push_back(s.bits);
        }
    }
    auto dedupe = [](std::vector<std::vector<int>> &lists) {
        for (auto &l : lists) {
            std::sort(l.begin(), l.end());
            l.erase(std::unique(l.begin(), l.end()), l.end());
        }
    };
    dedupe(audit.all);
    dedupe(audit.up_gate);
    return audit;
}

MoEModel quantize_model(const MoEModel &model, const CalibBatch &batch, const QuantConfig &config,
                        QuantRunStats *stats) {
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
        (void)scores;
        QuantPlan plan = make_quant_plan(ranking, config.ratios, config.bits, config.group_size);

        LayerQuantStats layer_stats;
        MoELayer qlayer = config.variant == QuantVariant::micro_expert
                              ? quantize_layer_microexpert(layer, plan, &layer_stats)
                              : quantize_layer_columnwise(layer, plan, &layer_stats);
        Mat y_quant = layer_forward_batch(qlayer, cur);

        if (stats) {
            QuantLayerRunStats ls;
            ls.layer = l;
            for (int k = 0; k < 3; k++) ls.level_sizes[(size_t)k] = (int)plan.level_sets[(size_t)k].size();
            ls.plan_weight_bits = layer_stats.plan_weight_bits;
            ls.plan_avg_bits = layer_stats.plan_avg_bits;
            ls.actual_avg_bits = layer_stats.actual_avg_bits;
            ls.realized_error = frob_sq_diff(samples.Y, y_quant);
            BitAudit audit = audit_bitwidths(layer_stats, layer.n_micro());
            ls.audit_single_level = true;
            ls.audit_upgate_multi_level = false;
            for (const auto &widths : audit.all) {
                if (widths.size() > 1) ls.audit_single_level = false;
            }
            for (const auto &widths : audit.up_gate) {
                if (widths.size() > 1) ls.audit_upgate_multi_level = true;
            }
            stats->layers.push_back(std::move(ls));
        }

        out.layers.push_back(std::move(qlayer));
        cur = std::move(y_quant);
    }
    return out;
}

} // namespace mcam
