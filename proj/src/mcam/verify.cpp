#include "verify.h"

#include "model.h"
#include "quant.h"
#include "toygen.h"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <numeric>

namespace mcam {

namespace {

std::string fmt(const char *f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

// random k-subset of [0, n), ascending
std::vector<int> random_subset(Rng &rng, int n, int k) {
    std::vector<int> idx((size_t)n);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; i++) {
        int j = rng.uniform_int(i, n - 1);
        std::swap(idx[(size_t)i], idx[(size_t)j]);
    }
    std::vector<int> out(idx.begin(), idx.begin() + k);
    std::sort(out.begin(), out.end());
    return out;
}

// contiguous partition of [0, n) into `parts` non-empty blocks (needs n >= parts)
std::pair<int, int> block_range(int n, int parts, int b) {
    return {(int)((int64_t)n * b / parts), (int)((int64_t)n * (b + 1) / parts)};
}

} // namespace

BoundInstance make_bound_instance(Rng &rng, int family) {
    BoundInstance inst;
    inst.family = family;
    int n_e, n, d;
    switch (family) {
    case 0: { // disjoint token support per coefficient column, dense basis
        n_e = rng.uniform_int(4, 16);
        n = n_e + rng.uniform_int(0, 16);
        d = rng.uniform_int(4, 16);
        inst.phi = Mat(n, n_e);
        inst.w = Mat(n_e, d);
        for (int i = 0; i < n_e; i++) {
            auto [lo, hi] = block_range(n, n_e, i);
            for (int t = lo; t < hi; t++) inst.phi.at(t, i) = (float)rng.gaussian();
        }
        for (auto &v : inst.w.data) v = (float)rng.gaussian();
        inst.removed = random_subset(rng, n_e, rng.uniform_int(1, n_e - 1));
        break;
    }
    case 1: { // dense coefficients, disjoint column support per basis row
        n_e = rng.uniform_int(4, 16);
        n = rng.uniform_int(6, 24);
        d = n_e + rng.uniform_int(0, 8);
        inst.phi = Mat(n, n_e);
        inst.w = Mat(n_e, d);
        for (auto &v : inst.phi.data) v = (float)rng.gaussian();
        for (int i = 0; i < n_e; i++) {
            auto [lo, hi] = block_range(d, n_e, i);
            for (int c = lo; c < hi; c++) inst.w.at(i, c) = (float)rng.gaussian();
        }
        inst.removed = random_subset(rng, n_e, rng.uniform_int(1, n_e - 1));
        break;
    }
    case 2: { // anti-correlated duplicate pairs, one disjoint token block per pair
        int pairs = rng.uniform_int(2, 8);
        n_e = 2 * pairs;
        n = pairs + rng.uniform_int(pairs, 3 * pairs);
        d = rng.uniform_int(4, 16);
        inst.phi = Mat(n, n_e);
        inst.w = Mat(n_e, d);
        for (int p = 0; p < pairs; p++) {
            auto [lo, hi] = block_range(n, pairs, p);
            double c = 0.3 + 1.4 * rng.uniform();
            for (int t = lo; t < hi; t++) {
                double base = rng.gaussian();
                inst.phi.at(t, 2 * p) = (float)base;
                inst.phi.at(t, 2 * p + 1) = (float)(c * base);
            }
            double cp = 0.3 + 1.4 * rng.uniform();
            for (int col = 0; col < d; col++) {
                double base = rng.gaussian();
                inst.w.at(2 * p, col) = (float)base;
                inst.w.at(2 * p + 1, col) = (float)(-cp * base);
            }
        }
        inst.removed = random_subset(rng, n_e, rng.uniform_int(1, n_e - 1));
        break;
    }
    case 3: { // fully dense, single removal (rank-1 error, exact equality)
        n_e = rng.uniform_int(4, 16);
        n = rng.uniform_int(6, 24);
        d = rng.uniform_int(4, 16);
        inst.phi = Mat(n, n_e);
        inst.w = Mat(n_e, d);
        for (auto &v : inst.phi.data) v = (float)rng.gaussian();
        for (auto &v : inst.w.data) v = (float)rng.gaussian();
        inst.removed = {rng.uniform_int(0, n_e - 1)};
        break;
    }
    default:
        throw std::invalid_argument("bound-instance family must be in [0, 3]");
    }
    return inst;
}

VerifyCheck check_decomposition_sweep(uint64_t seed, int trials) {
    Rng rng(seed);
    double worst_rel = 0.0;
    for (int trial = 0; trial < trials; trial++) {
        ModelConfig cfg;
        cfg.n_layers = 1;
        cfg.n_experts = rng.uniform_int(2, 8);
        cfg.n_shared = rng.uniform_int(0, 1) * 2;
        cfg.d_model = rng.uniform_int(8, 64);
        cfg.d_ff = rng.uniform_int(4, 32);
        cfg.top_k = rng.uniform_int(1, cfg.n_experts);
        MoEModel model = gen_toy_model(cfg, rng.next_u64(), 1.0);
        const MoELayer &layer = model.layers[0];

        std::vector<float> x((size_t)cfg.d_model);
        for (auto &v : x) v = (float)rng.gaussian();

        std::vector<float> y = moe_forward(layer, x);
        std::vector<double> acc((size_t)cfg.d_model, 0.0);
        for (int e = 0; e < (int)layer.experts.size(); e++) {
            for (int j = 0; j < layer.experts[(size_t)e].width; j++) {
                std::vector<float> c = micro_expert_contribution(layer, {e, j}, x);
                for (int r = 0; r < cfg.d_model; r++) acc[(size_t)r] += (double)c[(size_t)r];
            }
        }
        double peak = 0.0;
        for (int r = 0; r < cfg.d_model; r++) {
            peak = std::max(peak, std::max(std::fabs((double)y[(size_t)r]), std::fabs(acc[(size_t)r])));
        }
        for (int r = 0; r < cfg.d_model; r++) {
            double a = (double)y[(size_t)r], b = acc[(size_t)r];
            double scale = std::max({std::fabs(a), std::fabs(b), 1e-3 * peak});
            double rel = scale > 0.0 ? std::fabs(a - b) / scale : 0.0;
            worst_rel = std::max(worst_rel, rel);
            if (rel > 1e-4) {
                return {"decomposition_sweep", false,
                        fmt("trial %d dim %d: mixture output %.9g but micro-expert sum %.9g (rel %.3g)",
                            trial, r, a, b, rel)};
            }
        }
    }
    return {"decomposition_sweep", true, fmt("trials=%d worst_rel=%.3g", trials, worst_rel)};
}

VerifyCheck check_lemma_sweep(uint64_t seed, int trials) {
    Rng rng(seed);
    double worst_ratio = 0.0, worst_eq_rel = 0.0;
    int singles = 0;
    for (int trial = 0; trial < trials; trial++) {
        BoundInstance inst = make_bound_instance(rng, trial % 4);
        LemmaResult lem = lemma_bound(inst.phi, inst.w, inst.removed);
        if (!lem.holds) {
            return {"error_bound_sweep", false,
                    fmt("trial %d family %d |removed|=%zu: error %.9g exceeds bound %.9g", trial,
                        inst.family, inst.removed.size(), lem.epsilon, lem.epsilon_sup)};
        }
        if (lem.epsilon_sup > 0.0) worst_ratio = std::max(worst_ratio, lem.epsilon / lem.epsilon_sup);
        if (inst.removed.size() == 1) {
            singles++;
            double rel = lem.epsilon_sup > 0.0
                             ? std::fabs(lem.epsilon - lem.epsilon_sup) / lem.epsilon_sup
                             : std::fabs(lem.epsilon);
            worst_eq_rel = std::max(worst_eq_rel, rel);
            if (rel > 1e-9) {
                return {"error_bound_sweep", false,
                        fmt("trial %d: single-removal error %.12g != bound %.12g (rel %.3g)", trial,
                            lem.epsilon, lem.epsilon_sup, rel)};
            }
        }
    }
    return {"error_bound_sweep", true,
            fmt("trials=%d singles=%d worst_ratio=%.6f single_eq_rel=%.3g", trials, singles,
                worst_ratio, worst_eq_rel)};
}

VerifyCheck check_theorem_sweep(uint64_t seed, int trials) {
    Rng rng(seed);
    double worst_tightness = 0.0, worst_energy_rel = 0.0;
    for (int trial = 0; trial < trials; trial++) {
        BoundInstance inst = make_bound_instance(rng, trial % 3);
        int n_e = inst.phi.cols;
        OracleReport rep = theorem_check(inst.phi, inst.w, n_e / 2);
        if (!rep.theorem_holds) {
            return {"selection_bound_sweep", false,
                    fmt("trial %d family %d N_e=%d: error %.9g exceeds svd %.9g + delta %.9g", trial,
                        inst.family, n_e, rep.epsilon, rep.svd_error, rep.delta)};
        }
        if (!rep.svd_lower_holds) {
            return {"selection_bound_sweep", false,
                    fmt("trial %d family %d: error %.9g below optimal rank-%d error %.9g", trial,
                        inst.family, rep.epsilon, n_e / 2, rep.svd_error)};
        }
        double spec_sq = 0.0;
        for (double s : rep.spectrum) spec_sq += s * s;
        double rel = rep.y_frob_sq > 0.0 ? std::fabs(spec_sq - rep.y_frob_sq) / rep.y_frob_sq
                                         : std::fabs(spec_sq);
        worst_energy_rel = std::max(worst_energy_rel, rel);
        if (rel > 1e-8) {
            return {"selection_bound_sweep", false,
                    fmt("trial %d: spectrum energy %.12g vs ||Y||_F^2 %.12g (rel %.3g)", trial,
                        spec_sq, rep.y_frob_sq, rel)};
        }
        worst_tightness = std::max(worst_tightness, rep.tightness);
    }
    return {"selection_bound_sweep", true,
            fmt("trials=%d worst_tightness=%.6f spectrum_energy_rel=%.3g", trials, worst_tightness,
                worst_energy_rel)};
}

VerifyCheck check_sandwich(uint64_t seed, int trials) {
    Rng rng(seed);
    double worst_gap = 0.0; // greedy error relative to the exhaustive optimum
    for (int trial = 0; trial < trials; trial++) {
        BoundInstance inst = make_bound_instance(rng, trial % 3);
        int n_e = inst.phi.cols;
        if (n_e > 12) { // keep the exhaustive search cheap
            trial--;
            continue;
        }
        int keep = rng.uniform_int(1, n_e - 1);
        OracleReport rep = theorem_check(inst.phi, inst.w, keep);
        CsspResult opt = cssp_bruteforce(inst.phi, inst.w, keep);
        if (opt.best_error > rep.epsilon * (1.0 + 1e-9) + 1e-12) {
            return {"sandwich", false,
                    fmt("trial %d: exhaustive optimum %.9g above greedy error %.9g", trial,
                        opt.best_error, rep.epsilon)};
        }
        if (opt.best_error < rep.svd_error - k_svd_lower_slack) {
            return {"sandwich", false,
                    fmt("trial %d: exhaustive optimum %.9g below rank-%d svd error %.9g", trial,
                        opt.best_error, keep, rep.svd_error)};
        }
        if (!rep.theorem_holds || !rep.svd_lower_holds) {
            return {"sandwich", false,
                    fmt("trial %d: selection bound chain broken (error %.9g svd %.9g delta %.9g)",
                        trial, rep.epsilon, rep.svd_error, rep.delta)};
        }
        if (opt.best_error > 0.0) worst_gap = std::max(worst_gap, rep.epsilon / opt.best_error);
    }
    return {"sandwich", true, fmt("trials=%d worst_greedy_vs_optimal=%.6f", trials, worst_gap)};
}

VerifyCheck check_table5() {
    struct Row {
        int n_experts, n_activated;
        uint64_t num, den;
        const char *rendered;
    };
    // published survival probabilities at 25% expert pruning, exact fractions
    const Row rows[] = {
        {8, 2, 15, 28, "0.5357"},
        {16, 2, 11, 20, "0.5500"},
        {64, 4, 16215, 52948, "0.3062"},
        {128, 8, 71290869, 768657340, "0.0927"},
        {160, 6, 14049021, 81512516, "0.1724"},
    };
    for (const Row &r : rows) {
        PLossless p = p_lossless(r.n_experts, r.n_activated, 0.25);
        if (p.degenerate || p.num != r.num || p.den != r.den) {
            return {"lossless_probability_table", false,
                    fmt("n=%d k=%d: got %llu/%llu, expected %llu/%llu", r.n_experts, r.n_activated,
                        (unsigned long long)p.num, (unsigned long long)p.den,
                        (unsigned long long)r.num, (unsigned long long)r.den)};
        }
        char buf[32];
        snprintf(buf, sizeof(buf), "%.4f", p.p);
        if (std::string(buf) != r.rendered) {
            return {"lossless_probability_table", false,
                    fmt("n=%d k=%d: renders %s, expected %s", r.n_experts, r.n_activated, buf,
                        r.rendered)};
        }
    }
    return {"lossless_probability_table", true, "5 rows exact (fractions and 4-decimal rendering)"};
}

VerifyCheck check_bit_accounting() {
    Ranking ranking;
    ranking.order.resize(40);
    std::iota(ranking.order.begin(), ranking.order.end(), 0);
    const std::array<int, 3> bits{3, 2, 1};
    const std::array<double, 3> a{0.1, 0.8, 0.1}, b{0.2, 0.6, 0.2};
    for (const auto &ratios : {a, b}) {
        QuantPlan plan = make_quant_plan(ranking, ratios, bits, 128);
        double avg = average_bitwidth(plan);
        if (std::fabs(avg - 2.25) > 1e-9) {
            return {"bit_accounting", false,
                    fmt("ratios (%.1f,%.1f,%.1f) x bits (3,2,1) @ group 128: average %.12f != 2.25",
                        ratios[0], ratios[1], ratios[2], avg)};
        }
    }
    // realized split sizes for 40 micro-experts follow cumulative rounding
    QuantPlan plan = make_quant_plan(ranking, a, bits, 128);
    if (plan.level_sets[0].size() != 4 || plan.level_sets[1].size() != 32 ||
        plan.level_sets[2].size() != 4) {
        return {"bit_accounting", false,
                fmt("40 micro-experts at (0.1,0.8,0.1): level sizes %zu/%zu/%zu, expected 4/32/4",
                    plan.level_sets[0].size(), plan.level_sets[1].size(),
                    plan.level_sets[2].size())};
    }
    return {"bit_accounting", true, "both ratio mixes average exactly 2.25 bits at group size 128"};
}

nlohmann::ordered_json dense_bound_telemetry(uint64_t seed, int trials) {
    Rng rng(seed);
    int paired_violations = 0, product_violations = 0;
    double worst_ratio = 0.0;
    for (int trial = 0; trial < trials; trial++) {
        int n_e = rng.uniform_int(6, 16);
        int n = rng.uniform_int(n_e, n_e + 16);
        int d = rng.uniform_int(4, 16);
        Mat phi(n, n_e), w(n_e, d);
        for (auto &v : phi.data) v = (float)rng.gaussian();
        for (auto &v : w.data) v = (float)rng.gaussian();
        std::vector<int> removed = random_subset(rng, n_e, rng.uniform_int(2, n_e - 1));
        LemmaResult lem = lemma_bound(phi, w, removed);
        if (!lem.holds) paired_violations++;
        if (lem.epsilon_sup > 0.0) worst_ratio = std::max(worst_ratio, lem.epsilon / lem.epsilon_sup);
        // product form (sum of column norms) * (sum of row norms): always valid
        double col_sum = 0.0, row_sum = 0.0;
        for (int i : removed) {
            double col_sq = 0.0;
            for (int t = 0; t < n; t++) col_sq += (double)phi.at(t, i) * (double)phi.at(t, i);
            col_sum += col_sq;
            row_sum += norm2_sq_f64(w.row(i), d);
        }
        double product_bound = col_sum * row_sum;
        if (lem.epsilon > product_bound * (1.0 + k_bound_rel_slack) + k_bound_abs_slack) {
            product_violations++;
        }
    }
    nlohmann::ordered_json j;
    j["instances"] = trials;
    j["paired_sum_violation_fraction"] = trials > 0 ? (double)paired_violations / trials : 0.0;
    j["paired_sum_worst_ratio"] = worst_ratio;
    j["product_form_violations"] = product_violations;
    j["note"] = "dense gaussian instances; the paired-sum bound is a structural premise, not a "
                "universal inequality, so these ratios are reported without being asserted";
    return j;
}

bool VerifyResult::all_pass() const {
    for (const auto &c : checks) {
        if (!c.pass) return false;
    }
    return true;
}

nlohmann::ordered_json VerifyResult::to_json() const {
    nlohmann::ordered_json j;
    j["all_pass"] = all_pass();
    j["checks"] = nlohmann::ordered_json::array();
    for (const auto &c : checks) {
        j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    }
    return j;
}

VerifyResult run_verify(uint64_t seed, int trials) {
    if (trials < 1) throw std::invalid_argument("verify trials must be >= 1");
    VerifyResult res;
    res.checks.push_back(check_decomposition_sweep(seed ^ 0x1, std::min(100, trials)));
    res.checks.push_back(check_lemma_sweep(seed ^ 0x2, trials));
    res.checks.push_back(check_theorem_sweep(seed ^ 0x3, trials));
    res.checks.push_back(check_sandwich(seed ^ 0x4, std::min(50, trials)));
    res.checks.push_back(check_table5());
    res.checks.push_back(check_bit_accounting());
    nlohmann::ordered_json telemetry = dense_bound_telemetry(seed ^ 0x5, std::min(200, trials));
    res.checks.push_back({"dense_bound_telemetry", true, telemetry.dump()});
    return res;
}

} // namespace mcam
