#include "mcam/mcam.h"

#include "mcam/calibration.h"
#include "mcam/container.h"
#include "mcam/model.h"
#include "mcam/oracles.h"
#include "mcam/prune.h"
#include "mcam/quant.h"
#include "mcam/rank.h"
#include "mcam/reports.h"
#include "mcam/toygen.h"
#include "mcam/verify.h"

#include "json.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>
#include <vector>

using nlohmann::ordered_json;

struct mcam_model {
    mcam::MoEModel model;
};

struct mcam_calib {
    mcam::CalibBatch batch;
};

namespace {

thread_local std::string g_last_error = "no error";

int invalid(const std::string &msg) {
    g_last_error = msg;
    return MCAM_E_INVALID;
}

// exception -> status code boundary; nothing may throw across the C surface
template <typename Fn> int guarded(Fn &&fn) {
    try {
        return fn();
    } catch (const nlohmann::json::exception &e) {
        g_last_error = e.what();
        return MCAM_E_INVALID;
    } catch (const std::invalid_argument &e) {
        g_last_error = e.what();
        return MCAM_E_INVALID;
    } catch (const std::out_of_range &e) {
        g_last_error = e.what();
        return MCAM_E_INVALID;
    } catch (const std::exception &e) {
        g_last_error = e.what();
        return MCAM_E_RUNTIME;
    } catch (...) {
        g_last_error = "unknown failure";
        return MCAM_E_RUNTIME;
    }
}

char *dup_string(const std::string &s) {
    char *out = static_cast<char *>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void emit(char **out, const ordered_json &j) { *out = dup_string(j.dump(2)); }

const mcam::MoELayer &layer_at(const mcam::MoEModel &m, int layer) {
    if (layer < 0 || layer >= (int)m.layers.size()) {
        throw std::out_of_range("layer index " + std::to_string(layer) + " out of range [0, " +
                                std::to_string(m.layers.size()) + ")");
    }
    return m.layers[(size_t)layer];
}

std::pair<mcam::Ranking, mcam::EnergyScores> rank_layer(const mcam::MoEModel &m,
                                                        const mcam::CalibBatch &b, int layer,
                                                        double alpha) {
    const mcam::MoELayer &lay = layer_at(m, layer);
    mcam::LayerSamples samples = mcam::capture_layer_samples(m, b, layer);
    return mcam::rank_micro_experts(lay, samples, alpha);
}

ordered_json config_json(const mcam::ModelConfig &c) {
    return {{"n_layers", c.n_layers}, {"n_experts", c.n_experts}, {"n_shared", c.n_shared},
            {"d_model", c.d_model},   {"d_ff", c.d_ff},           {"top_k", c.top_k}};
}

ordered_json prune_report_json(const mcam::PruneRunStats &stats, const mcam::PruneConfig &cfg) {
    ordered_json layers = ordered_json::array();
    for (const auto &s : stats.layers) {
        layers.push_back({{"layer", s.layer},
                          {"n_micro_before", s.n_micro_before},
                          {"n_micro_after", s.n_micro_after},
                          {"width_before", s.width_before},
                          {"width_after", s.width_after},
                          {"boundary_energy", s.boundary_energy},
                          {"removed_energy_sum", s.removed_energy_sum},
                          {"realized_error", s.realized_error}});
    }
    return {{"lambda", cfg.lambda},
            {"alpha", cfg.alpha},
            {"protect_shared", cfg.protect_shared},
            {"layers", layers}};
}

ordered_json quant_report_json(const mcam::QuantRunStats &stats, const mcam::QuantConfig &cfg) {
    ordered_json layers = ordered_json::array();
    for (const auto &s : stats.layers) {
        layers.push_back({{"layer", s.layer},
                          {"level_sizes", s.level_sizes},
                          {"plan_weight_bits", s.plan_weight_bits},
                          {"plan_avg_bits", s.plan_avg_bits},
                          {"actual_avg_bits", s.actual_avg_bits},
                          {"realized_error", s.realized_error},
                          {"audit_single_level", s.audit_single_level},
                          {"audit_upgate_multi_level", s.audit_upgate_multi_level}});
    }
    return {{"variant", cfg.variant == mcam::QuantVariant::micro_expert ? "q" : "q-dagger"},
            {"bits", cfg.bits},
            {"ratios", cfg.ratios},
            {"group_size", cfg.group_size},
            {"alpha", cfg.alpha},
            {"layers", layers}};
}

} // namespace

extern "C" {

const char *mcam_version(void) { return "0.1.0"; }

const char *mcam_last_error(void) { return g_last_error.c_str(); }

void mcam_string_free(char *s) { std::free(s); }

int mcam_set_threads(int n) {
    return guarded([&] {
        mcam::set_threads(n);
        return MCAM_OK;
    });
}

/* ---- model lifecycle ------------------------------------------------- */

int mcam_model_generate(const char *config_json_str, uint64_t seed, double scale, mcam_model **out) {
    if (!config_json_str) return invalid("config_json is null");
    if (!out) return invalid("out handle is null");
    *out = nullptr;
    return guarded([&] {
        ordered_json j = ordered_json::parse(config_json_str);
        mcam::ModelConfig cfg;
        cfg.n_layers = j.value("n_layers", cfg.n_layers);
        cfg.n_experts = j.value("n_experts", cfg.n_experts);
        cfg.n_shared = j.value("n_shared", cfg.n_shared);
        cfg.d_model = j.value("d_model", cfg.d_model);
        cfg.d_ff = j.value("d_ff", cfg.d_ff);
        cfg.top_k = j.value("top_k", cfg.top_k);
        auto h = std::make_unique<mcam_model>();
        h->model = mcam::gen_toy_model(cfg, seed, scale);
        *out = h.release();
        return MCAM_OK;
    });
}

int mcam_model_load(const char *path, mcam_model **out) {
    if (!path) return invalid("path is null");
    if (!out) return invalid("out handle is null");
    *out = nullptr;
    return guarded([&] {
        auto h = std::make_unique<mcam_model>();
        h->model = mcam::load_model(path);
        *out = h.release();
        return MCAM_OK;
    });
}

int mcam_model_save(const mcam_model *model, const char *path) {
    if (!model) return invalid("model handle is null");
    if (!path) return invalid("path is null");
    return guarded([&] {
        mcam::save_model(model->model, path);
        return MCAM_OK;
    });
}

int mcam_model_info(const mcam_model *model, char **out_json) {
    if (!model) return invalid("model handle is null");
    if (!out_json) return invalid("out_json is null");
    *out_json = nullptr;
    return guarded([&] {
        ordered_json layers = ordered_json::array();
        for (int i = 0; i < (int)model->model.layers.size(); i++) {
            const mcam::MoELayer &lay = model->model.layers[(size_t)i];
            layers.push_back(
                {{"layer", i}, {"widths", lay.widths()}, {"n_micro", lay.n_micro()}});
        }
        emit(out_json, {{"config", config_json(model->model.config)}, {"layers", layers}});
        return MCAM_OK;
    });
}

void mcam_model_free(mcam_model *model) { delete model; }

/* ---- calibration batches --------------------------------------------- */

int mcam_calib_generate(int32_t n_tokens, int32_t d_model, uint64_t seed, double scale,
                        mcam_calib **out) {
    if (!out) return invalid("out handle is null");
    *out = nullptr;
    return guarded([&] {
        auto h = std::make_unique<mcam_calib>();
        h->batch = mcam::gen_synthetic(n_tokens, d_model, seed, scale);
        *out = h.release();
        return MCAM_OK;
    });
}

int mcam_calib_load(const char *path, mcam_calib **out) {
    if (!path) return invalid("path is null");
    if (!out) return invalid("out handle is null");
    *out = nullptr;
    return guarded([&] {
        auto h = std::make_unique<mcam_calib>();
        h->batch = mcam::load_calibration(path, -1);
        *out = h.release();
        return MCAM_OK;
    });
}

int mcam_calib_save(const mcam_calib *calib, const char *path) {
    if (!calib) return invalid("calib handle is null");
    if (!path) return invalid("path is null");
    return guarded([&] {
        mcam::save_calibration(calib->batch, path);
        return MCAM_OK;
    });
}

int mcam_calib_info(const mcam_calib *calib, char **out_json) {
    if (!calib) return invalid("calib handle is null");
    if (!out_json) return invalid("out_json is null");
    *out_json = nullptr;
    return guarded([&] {
        emit(out_json, {{"tokens", calib->batch.X.rows}, {"d_model", calib->batch.X.cols}});
        return MCAM_OK;
    });
}

void mcam_calib_free(mcam_calib *calib) { delete calib; }

/* ---- pipeline --------------------------------------------------------- */

int mcam_rank(const mcam_model *model, const mcam_calib *calib, int32_t layer, double alpha,
              char **out_json) {
    if (!model) return invalid("model handle is null");
    if (!calib) return invalid("calib handle is null");
    if (!out_json) return invalid("out_json is null");
    *out_json = nullptr;
    return guarded([&] {
        auto [ranking, scores] = rank_layer(model->model, calib->batch, layer, alpha);
        const mcam::MoELayer &lay = model->model.layers[(size_t)layer];
        ordered_json records = ordered_json::array();
        for (int r = 0; r < (int)ranking.order.size(); r++) {
            int flat = ranking.order[(size_t)r];
            mcam::MicroExpertId id = mcam::flat_to_id(lay, flat);
            records.push_back({{"flat_index", flat},
                               {"expert", id.expert},
                               {"neuron", id.neuron},
                               {"energy", scores.energy[(size_t)flat]},
                               {"rank", r}});
        }
        emit(out_json, {{"layer", layer},
                        {"alpha", alpha},
                        {"n_micro", (int)ranking.order.size()},
                        {"records", records}});
        return MCAM_OK;
    });
}

int mcam_prune(const mcam_model *model, const mcam_calib *calib, double lambda, double alpha,
               int protect_shared, mcam_model **out_model, char **out_report_json) {
    if (!model) return invalid("model handle is null");
    if (!calib) return invalid("calib handle is null");
    if (!out_model) return invalid("out_model is null");
    *out_model = nullptr;
    if (out_report_json) *out_report_json = nullptr;
    return guarded([&] {
        mcam::PruneConfig cfg;
        cfg.lambda = lambda;
        cfg.alpha = alpha;
        cfg.protect_shared = protect_shared != 0;
        mcam::PruneRunStats stats;
        auto h = std::make_unique<mcam_model>();
        h->model = mcam::prune_model(model->model, calib->batch, cfg, &stats);
        if (out_report_json) emit(out_report_json, prune_report_json(stats, cfg));
        *out_model = h.release();
        return MCAM_OK;
    });
}

int mcam_quantize(const mcam_model *model, const mcam_calib *calib, const char *variant,
                  const double ratios[3], const int32_t bits[3], int32_t group_size, double alpha,
                  mcam_model **out_model, char **out_report_json) {
    if (!model) return invalid("model handle is null");
    if (!calib) return invalid("calib handle is null");
    if (!variant) return invalid("variant is null");
    if (!ratios) return invalid("ratios is null");
    if (!bits) return invalid("bits is null");
    if (!out_model) return invalid("out_model is null");
    *out_model = nullptr;
    if (out_report_json) *out_report_json = nullptr;
    std::string v = variant;
    if (v != "q" && v != "q-dagger") {
        return invalid("variant must be \"q\" or \"q-dagger\", got \"" + v + "\"");
    }
    return guarded([&] {
        mcam::QuantConfig cfg;
        cfg.bits = {bits[0], bits[1], bits[2]};
        cfg.ratios = {ratios[0], ratios[1], ratios[2]};
        cfg.group_size = group_size;
        cfg.variant = v == "q" ? mcam::QuantVariant::micro_expert : mcam::QuantVariant::columnwise;
        cfg.alpha = alpha;
        mcam::QuantRunStats stats;
        auto h = std::make_unique<mcam_model>();
        h->model = mcam::quantize_model(model->model, calib->batch, cfg, &stats);
        if (out_report_json) emit(out_report_json, quant_report_json(stats, cfg));
        *out_model = h.release();
        return MCAM_OK;
    });
}

/* ---- exact oracles ----------------------------------------------------- */

int mcam_oracle_plossless(int32_t n_experts, int32_t n_activated, double prune_frac,
                          char **out_json) {
    if (!out_json) return invalid("out_json is null");
    *out_json = nullptr;
    return guarded([&] {
        mcam::PLossless p = mcam::p_lossless(n_experts, n_activated, prune_frac);
        emit(out_json, {{"n_experts", n_experts},
                        {"n_activated", n_activated},
                        {"prune_frac", prune_frac},
                        {"p", p.p},
                        {"numerator", p.num},
                        {"denominator", p.den},
                        {"degenerate", p.degenerate}});
        return MCAM_OK;
    });
}

int mcam_oracle_cssp(int32_t n_tokens, int32_t n_micro, int32_t d_model, int32_t keep,
                     uint64_t seed, char **out_json) {
    if (!out_json) return invalid("out_json is null");
    *out_json = nullptr;
    return guarded([&] {
        if (n_tokens < 1 || n_micro < 1 || d_model < 1) {
            throw std::invalid_argument("instance dims must be >= 1");
        }
        mcam::Rng rng(seed);
        mcam::Mat phi(n_tokens, n_micro), w(n_micro, d_model);
        for (auto &v : phi.data) v = (float)rng.gaussian();
        for (auto &v : w.data) v = (float)rng.gaussian();
        mcam::OracleReport rep = mcam::theorem_check(phi, w, keep);
        mcam::CsspResult opt = mcam::cssp_bruteforce(phi, w, keep);
        emit(out_json,
             {{"tokens", n_tokens},
              {"n_micro", n_micro},
              {"d_model", d_model},
              {"keep", keep},
              {"seed", seed},
              {"greedy", {{"error", rep.epsilon}, {"kept", rep.kept}}},
              {"exhaustive", {{"error", opt.best_error}, {"kept", opt.best_set}}},
              {"svd_error", rep.svd_error},
              {"delta", rep.delta},
              {"boundary_energy", rep.boundary_energy},
              {"tightness", rep.tightness},
              {"spectrum", rep.spectrum},
              {"bounds",
               {{"lemma_holds", rep.lemma_holds},
                {"theorem_holds", rep.theorem_holds},
                {"svd_lower_holds", rep.svd_lower_holds}}}});
        return MCAM_OK;
    });
}

int mcam_oracle_bounds(uint64_t seed, int32_t trials, int *out_all_pass, char **out_json) {
    if (!out_all_pass) return invalid("out_all_pass is null");
    if (!out_json) return invalid("out_json is null");
    *out_all_pass = 0;
    *out_json = nullptr;
    return guarded([&] {
        if (trials < 1) throw std::invalid_argument("trials must be >= 1");
        mcam::VerifyResult res;
        res.checks.push_back(mcam::check_lemma_sweep(seed ^ 0x2, trials));
        res.checks.push_back(mcam::check_theorem_sweep(seed ^ 0x3, trials));
        res.checks.push_back(mcam::check_sandwich(seed ^ 0x4, std::min(50, (int)trials)));
        ordered_json telemetry = mcam::dense_bound_telemetry(seed ^ 0x5, std::min(200, (int)trials));
        res.checks.push_back({"dense_bound_telemetry", true, telemetry.dump()});
        *out_all_pass = res.all_pass() ? 1 : 0;
        emit(out_json, res.to_json());
        return MCAM_OK;
    });
}

/* ---- reports ----------------------------------------------------------- */

int mcam_report_energy(const mcam_model *model, const mcam_calib *calib, int32_t layer,
                       double alpha, int32_t drop_top, char **out_json) {
    if (!model) return invalid("model handle is null");
    if (!calib) return invalid("calib handle is null");
    if (!out_json) return invalid("out_json is null");
    *out_json = nullptr;
    return guarded([&] {
        auto [ranking, scores] = rank_layer(model->model, calib->batch, layer, alpha);
        (void)ranking;
        emit(out_json, mcam::energy_distribution(scores, drop_top));
        return MCAM_OK;
    });
}

int mcam_report_ranks(const mcam_model *model, const mcam_calib *calib, int32_t layer, double alpha,
                      char **out_json) {
    if (!model) return invalid("model handle is null");
    if (!calib) return invalid("calib handle is null");
    if (!out_json) return invalid("out_json is null");
    *out_json = nullptr;
    return guarded([&] {
        auto [ranking, scores] = rank_layer(model->model, calib->batch, layer, alpha);
        (void)scores;
        emit(out_json,
             mcam::rank_distribution_per_expert(ranking, model->model.layers[(size_t)layer]));
        return MCAM_OK;
    });
}

int mcam_report_prune_ratio(const mcam_model *model, const mcam_calib *calib, int32_t layer,
                            double lambda, double alpha, int protect_shared, char **out_json) {
    if (!model) return invalid("model handle is null");
    if (!calib) return invalid("calib handle is null");
    if (!out_json) return invalid("out_json is null");
    *out_json = nullptr;
    return guarded([&] {
        auto [ranking, scores] = rank_layer(model->model, calib->batch, layer, alpha);
        (void)scores;
        const mcam::MoELayer &lay = model->model.layers[(size_t)layer];
        mcam::RetainSet retain = mcam::select_retain_set(ranking, lambda, lay, protect_shared != 0);
        emit(out_json, mcam::per_expert_prune_ratio(retain, lay));
        return MCAM_OK;
    });
}

int mcam_report_approx(const mcam_model *model_a, const mcam_model *model_b,
                       const mcam_calib *calib, const int32_t *layers, int32_t n_layers,
                       char **out_json) {
    if (!model_a) return invalid("model_a handle is null");
    if (!model_b) return invalid("model_b handle is null");
    if (!calib) return invalid("calib handle is null");
    if (!out_json) return invalid("out_json is null");
    if (n_layers > 0 && !layers) return invalid("layers is null but n_layers > 0");
    *out_json = nullptr;
    return guarded([&] {
        std::vector<int> idx;
        if (n_layers > 0) {
            idx.assign(layers, layers + n_layers);
        } else {
            idx.resize(model_a->model.layers.size());
            for (int i = 0; i < (int)idx.size(); i++) idx[(size_t)i] = i;
        }
        auto records = mcam::approx_error(model_a->model, model_b->model, calib->batch, idx);
        emit(out_json, mcam::approx_error_table(records));
        return MCAM_OK;
    });
}

int mcam_table_to_csv(const char *table_json, char **out_csv) {
    if (!table_json) return invalid("table_json is null");
    if (!out_csv) return invalid("out_csv is null");
    *out_csv = nullptr;
    return guarded([&] {
        ordered_json table = ordered_json::parse(table_json);
        *out_csv = dup_string(mcam::table_to_csv(table));
        return MCAM_OK;
    });
}

/* ---- property suite ----------------------------------------------------- */

int mcam_verify(uint64_t seed, int32_t trials, int *out_all_pass, char **out_json) {
    if (!out_all_pass) return invalid("out_all_pass is null");
    if (!out_json) return invalid("out_json is null");
    *out_all_pass = 0;
    *out_json = nullptr;
    return guarded([&] {
        mcam::VerifyResult res = mcam::run_verify(seed, trials);
        *out_all_pass = res.all_pass() ? 1 : 0;
        emit(out_json, res.to_json());
        return MCAM_OK;
    });
}

} /* extern "C" */
