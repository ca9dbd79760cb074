// command-line front end; links only the public C interface (mcam/mcam.h)

#include "mcam/mcam.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

using nlohmann::ordered_json;

namespace {

// internal error carrying the process exit code (1 usage, 2 runtime, 3 verification)
struct CliError {
    int code;
    std::string msg;
};

void api(int status) {
    if (status == MCAM_OK) return;
    throw CliError{status == MCAM_E_INVALID ? 1 : 2, mcam_last_error()};
}

// RAII wrappers over the C handles/strings
struct StrBox {
    char *p = nullptr;
    ~StrBox() { mcam_string_free(p); }
    std::string str() const { return p ? p : ""; }
};

struct ModelBox {
    mcam_model *p = nullptr;
    ModelBox() = default;
    ModelBox(const ModelBox &) = delete;
    ModelBox &operator=(const ModelBox &) = delete;
    ~ModelBox() { mcam_model_free(p); }
};

struct CalibBox {
    mcam_calib *p = nullptr;
    CalibBox() = default;
    CalibBox(const CalibBox &) = delete;
    CalibBox &operator=(const CalibBox &) = delete;
    ~CalibBox() { mcam_calib_free(p); }
};

uint64_t fnv1a64_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CliError{2, "cannot read " + path};
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); i++) {
            h ^= (uint8_t)buf[i];
            h *= 0x100000001b3ull;
        }
        if (!in) break;
    }
    return h;
}

std::string hex64(uint64_t v) {
    char buf[32];
    snprintf(buf, sizeof(buf), "0x%016" PRIx64, v);
    return buf;
}

void write_text(const std::string &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CliError{2, "cannot write " + path};
    out << content;
    if (!content.empty() && content.back() != '\n') out << '\n';
    if (!out) throw CliError{2, "write failed for " + path};
}

// every artifact-producing run drops <out>.manifest.json next to its output
struct Manifest {
    std::string subcommand;
    ordered_json params = ordered_json::object();
    ordered_json inputs = ordered_json::array();
    std::vector<std::string> outputs;

    void add_input(const std::string &role, const std::string &path) {
        inputs.push_back({{"role", role}, {"path", path}, {"fnv1a64", hex64(fnv1a64_file(path))}});
    }

    void write(const std::string &primary_out) const {
        ordered_json j{{"tool", "mcam"},
                       {"version", mcam_version()},
                       {"subcommand", subcommand},
                       {"parameters", params},
                       {"inputs", inputs},
                       {"outputs", outputs}};
        write_text(primary_out + ".manifest.json", j.dump(2));
    }
};

// seeds resolve flag -> CAMERA_SEED env (CI override), recorded in the manifest
uint64_t resolve_seed(uint64_t flag_seed, Manifest &mani) {
    const char *env = std::getenv("CAMERA_SEED");
    if (env && *env) {
        char *end = nullptr;
        unsigned long long v = strtoull(env, &end, 10);
        if (!end || *end != '\0') {
            throw CliError{1, std::string("CAMERA_SEED: not an unsigned integer: ") + env};
        }
        mani.params["seed"] = (uint64_t)v;
        mani.params["seed_source"] = "CAMERA_SEED";
        return (uint64_t)v;
    }
    mani.params["seed"] = flag_seed;
    mani.params["seed_source"] = "flag";
    return flag_seed;
}

// --calib <path> | --synthetic n,d,seed,scale (exactly one)
struct CalibSpec {
    std::string path;
    std::string synthetic;
};

void open_calib(const CalibSpec &spec, Manifest &mani, CalibBox &out) {
    bool has_path = !spec.path.empty(), has_syn = !spec.synthetic.empty();
    if (has_path == has_syn) {
        throw CliError{1, "provide exactly one of --calib <path> or --synthetic n,d,seed,scale"};
    }
    if (has_path) {
        api(mcam_calib_load(spec.path.c_str(), &out.p));
        mani.params["calib"] = spec.path;
        mani.add_input("calib", spec.path);
        return;
    }
    std::vector<std::string> parts;
    std::stringstream ss(spec.synthetic);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(item);
    if (parts.size() != 4) {
        throw CliError{1, "--synthetic: expected n,d,seed,scale, got \"" + spec.synthetic + "\""};
    }
    try {
        int n = std::stoi(parts[0]);
        int d = std::stoi(parts[1]);
        uint64_t seed = std::stoull(parts[2]);
        double scale = std::stod(parts[3]);
        api(mcam_calib_generate(n, d, seed, scale, &out.p));
    } catch (const CliError &) {
        throw;
    } catch (const std::exception &) {
        throw CliError{1, "--synthetic: expected n,d,seed,scale, got \"" + spec.synthetic + "\""};
    }
    mani.params["synthetic"] = spec.synthetic;
}

void open_model(const std::string &path, Manifest &mani, ModelBox &out) {
    api(mcam_model_load(path.c_str(), &out.p));
    mani.params["model"] = path;
    mani.add_input("model", path);
}

// λ ∈ [0, 1): pruning must keep at least something
const CLI::Validator unit_half_open(
    [](std::string &s) {
        try {
            double v = std::stod(s);
            if (!(v >= 0.0 && v < 1.0)) return std::string("must be in [0, 1)");
        } catch (const std::exception &) {
            return std::string("not a number");
        }
        return std::string();
    },
    "FLOAT in [0,1)");

const CLI::Validator unit_closed(
    [](std::string &s) {
        try {
            double v = std::stod(s);
            if (!(v >= 0.0 && v <= 1.0)) return std::string("must be in [0, 1]");
        } catch (const std::exception &) {
            return std::string("not a number");
        }
        return std::string();
    },
    "FLOAT in [0,1]");

void print_checks(const ordered_json &result) {
    for (const auto &c : result.at("checks")) {
        printf("%s: %s (%s)\n", c.at("name").get<std::string>().c_str(),
               c.at("pass").get<bool>() ? "PASS" : "FAIL",
               c.at("detail").get<std::string>().c_str());
    }
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"micro-expert MoE compression toolkit (rank / prune / quantize + exact oracles)"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", mcam_version());

    int threads = 0;
    app.add_option("--threads", threads, "worker threads for internal parallelism")
        ->check(CLI::PositiveNumber);
    // runs after flag parsing but before any subcommand callback
    app.parse_complete_callback([&] {
        if (threads > 0) api(mcam_set_threads(threads));
    });

    int exit_code = 0;

    // ---- gen-model ----
    auto *gen_model = app.add_subcommand("gen-model", "generate a seeded random toy MoE model");
    struct {
        int layers = 1, experts = 8, shared = 0, dmodel = 64, dff = 32, topk = 2;
        uint64_t seed = 42;
        double scale = 1.0;
        std::string out;
    } gm;
    gen_model->add_option("--layers", gm.layers)->check(CLI::PositiveNumber);
    gen_model->add_option("--experts", gm.experts)->check(CLI::PositiveNumber);
    gen_model->add_option("--shared", gm.shared)->check(CLI::NonNegativeNumber);
    gen_model->add_option("--dmodel", gm.dmodel)->check(CLI::PositiveNumber);
    gen_model->add_option("--dff", gm.dff)->check(CLI::PositiveNumber);
    gen_model->add_option("--topk", gm.topk)->check(CLI::PositiveNumber);
    gen_model->add_option("--seed", gm.seed);
    gen_model->add_option("--scale", gm.scale)->check(CLI::NonNegativeNumber);
    gen_model->add_option("--out", gm.out)->required();
    gen_model->callback([&] {
        Manifest mani;
        mani.subcommand = "gen-model";
        uint64_t seed = resolve_seed(gm.seed, mani);
        ordered_json cfg{{"n_layers", gm.layers}, {"n_experts", gm.experts},
                         {"n_shared", gm.shared}, {"d_model", gm.dmodel},
                         {"d_ff", gm.dff},        {"top_k", gm.topk}};
        for (auto &[k, v] : cfg.items()) mani.params[k] = v;
        mani.params["scale"] = gm.scale;
        ModelBox model;
        api(mcam_model_generate(cfg.dump().c_str(), seed, gm.scale, &model.p));
        api(mcam_model_save(model.p, gm.out.c_str()));
        mani.outputs.push_back(gm.out);
        mani.write(gm.out);
        printf("wrote %s (layers=%d experts=%d+%d shared, d_model=%d d_ff=%d top_k=%d)\n",
               gm.out.c_str(), gm.layers, gm.experts, gm.shared, gm.dmodel, gm.dff, gm.topk);
    });

    // ---- gen-calib ----
    auto *gen_calib = app.add_subcommand("gen-calib", "generate a synthetic calibration batch");
    struct {
        int tokens = 512, dmodel = 64;
        uint64_t seed = 42;
        double scale = 1.0;
        std::string out;
    } gc;
    gen_calib->add_option("--tokens", gc.tokens)->check(CLI::PositiveNumber);
    gen_calib->add_option("--dmodel", gc.dmodel)->check(CLI::PositiveNumber);
    gen_calib->add_option("--seed", gc.seed);
    gen_calib->add_option("--scale", gc.scale)->check(CLI::NonNegativeNumber);
    gen_calib->add_option("--out", gc.out)->required();
    gen_calib->callback([&] {
        Manifest mani;
        mani.subcommand = "gen-calib";
        uint64_t seed = resolve_seed(gc.seed, mani);
        mani.params["tokens"] = gc.tokens;
        mani.params["dmodel"] = gc.dmodel;
        mani.params["scale"] = gc.scale;
        CalibBox calib;
        api(mcam_calib_generate(gc.tokens, gc.dmodel, seed, gc.scale, &calib.p));
        api(mcam_calib_save(calib.p, gc.out.c_str()));
        mani.outputs.push_back(gc.out);
        mani.write(gc.out);
        printf("wrote %s (%d tokens x %d dims)\n", gc.out.c_str(), gc.tokens, gc.dmodel);
    });

    // ---- rank ----
    auto *rank = app.add_subcommand("rank", "rank one layer's micro-experts by energy");
    struct {
        std::string model;
        CalibSpec calib;
        int layer = 0;
        double alpha = 1.0;
        std::string out;
    } rk;
    rank->add_option("--model", rk.model)->required();
    rank->add_option("--calib", rk.calib.path);
    rank->add_option("--synthetic", rk.calib.synthetic);
    rank->add_option("--layer", rk.layer)->check(CLI::NonNegativeNumber);
    rank->add_option("--alpha", rk.alpha)->check(unit_closed);
    rank->add_option("--out", rk.out)->required();
    rank->callback([&] {
        Manifest mani;
        mani.subcommand = "rank";
        mani.params["layer"] = rk.layer;
        mani.params["alpha"] = rk.alpha;
        ModelBox model;
        open_model(rk.model, mani, model);
        CalibBox calib;
        open_calib(rk.calib, mani, calib);
        StrBox json;
        api(mcam_rank(model.p, calib.p, rk.layer, rk.alpha, &json.p));
        write_text(rk.out, json.str());
        mani.outputs.push_back(rk.out);
        mani.write(rk.out);
        printf("wrote %s\n", rk.out.c_str());
    });

    // ---- prune ----
    auto *prune = app.add_subcommand("prune", "structured micro-expert pruning");
    struct {
        std::string model;
        CalibSpec calib;
        double lambda = 0.2, alpha = 1.0;
        bool protect_shared = false;
        std::string out, report;
    } pr;
    prune->add_option("--model", pr.model)->required();
    prune->add_option("--calib", pr.calib.path);
    prune->add_option("--synthetic", pr.calib.synthetic);
    prune->add_option("--lambda", pr.lambda)->check(unit_half_open);
    prune->add_option("--alpha", pr.alpha)->check(unit_closed);
    prune->add_flag("--protect-shared", pr.protect_shared,
                    "exempt shared-expert micro-experts from removal");
    prune->add_option("--out", pr.out)->required();
    prune->add_option("--report", pr.report);
    prune->callback([&] {
        Manifest mani;
        mani.subcommand = "prune";
        mani.params["lambda"] = pr.lambda;
        mani.params["alpha"] = pr.alpha;
        mani.params["protect_shared"] = pr.protect_shared;
        ModelBox model;
        open_model(pr.model, mani, model);
        CalibBox calib;
        open_calib(pr.calib, mani, calib);
        ModelBox pruned;
        StrBox report;
        api(mcam_prune(model.p, calib.p, pr.lambda, pr.alpha, pr.protect_shared ? 1 : 0, &pruned.p,
                       &report.p));
        api(mcam_model_save(pruned.p, pr.out.c_str()));
        mani.outputs.push_back(pr.out);
        if (!pr.report.empty()) {
            write_text(pr.report, report.str());
            mani.outputs.push_back(pr.report);
        }
        mani.write(pr.out);
        printf("wrote %s%s%s\n", pr.out.c_str(), pr.report.empty() ? "" : " and ",
               pr.report.c_str());
    });

    // ---- quantize ----
    auto *quant = app.add_subcommand("quantize", "mixed-precision micro-expert quantization");
    struct {
        std::string model;
        CalibSpec calib;
        std::vector<int> bits{3, 2, 1};
        std::vector<double> ratios{0.2, 0.6, 0.2};
        int group = 128;
        std::string variant = "q";
        double alpha = 1.0;
        std::string out, report;
    } qt;
    quant->add_option("--model", qt.model)->required();
    quant->add_option("--calib", qt.calib.path);
    quant->add_option("--synthetic", qt.calib.synthetic);
    quant->add_option("--bits", qt.bits, "three descending bit-widths, e.g. 3,2,1")
        ->delimiter(',')
        ->expected(1, 3);
    quant->add_option("--ratios", qt.ratios, "three level fractions summing to 1, e.g. 0.2,0.6,0.2")
        ->delimiter(',')
        ->expected(1, 3);
    quant->add_option("--group", qt.group)->check(CLI::PositiveNumber);
    quant->add_option("--variant", qt.variant)->check(CLI::IsMember({"q", "q-dagger"}));
    quant->add_option("--alpha", qt.alpha)->check(unit_closed);
    quant->add_option("--out", qt.out)->required();
    quant->add_option("--report", qt.report);
    quant->callback([&] {
        if (qt.bits.size() != 3) throw CliError{1, "--bits: expected exactly 3 values"};
        if (qt.ratios.size() != 3) throw CliError{1, "--ratios: expected exactly 3 values"};
        Manifest mani;
        mani.subcommand = "quantize";
        mani.params["bits"] = qt.bits;
        mani.params["ratios"] = qt.ratios;
        mani.params["group"] = qt.group;
        mani.params["variant"] = qt.variant;
        mani.params["alpha"] = qt.alpha;
        ModelBox model;
        open_model(qt.model, mani, model);
        CalibBox calib;
        open_calib(qt.calib, mani, calib);
        double ratios[3] = {qt.ratios[0], qt.ratios[1], qt.ratios[2]};
        int32_t bits[3] = {qt.bits[0], qt.bits[1], qt.bits[2]};
        ModelBox out_model;
        StrBox report;
        api(mcam_quantize(model.p, calib.p, qt.variant.c_str(), ratios, bits, qt.group, qt.alpha,
                          &out_model.p, &report.p));
        api(mcam_model_save(out_model.p, qt.out.c_str()));
        mani.outputs.push_back(qt.out);
        if (!qt.report.empty()) {
            write_text(qt.report, report.str());
            mani.outputs.push_back(qt.report);
        }
        mani.write(qt.out);
        printf("wrote %s%s%s\n", qt.out.c_str(), qt.report.empty() ? "" : " and ",
               qt.report.c_str());
    });

    // ---- oracle ----
    auto *oracle = app.add_subcommand("oracle", "exact reference computations");
    oracle->require_subcommand(1);

    auto *o_pl = oracle->add_subcommand("plossless", "lossless routed-set survival probability");
    struct {
        int experts = 8, activated = 2;
        double prune = 0.25;
        std::string out;
    } pl;
    o_pl->add_option("--experts", pl.experts)->required()->check(CLI::PositiveNumber);
    o_pl->add_option("--activated", pl.activated)->required()->check(CLI::PositiveNumber);
    o_pl->add_option("--prune", pl.prune)->required()->check(unit_half_open);
    o_pl->add_option("--out", pl.out);
    o_pl->callback([&] {
        StrBox json;
        api(mcam_oracle_plossless(pl.experts, pl.activated, pl.prune, &json.p));
        ordered_json j = ordered_json::parse(json.str());
        printf("%.4f\n", j.at("p").get<double>());
        if (!pl.out.empty()) {
            Manifest mani;
            mani.subcommand = "oracle plossless";
            mani.params["experts"] = pl.experts;
            mani.params["activated"] = pl.activated;
            mani.params["prune"] = pl.prune;
            write_text(pl.out, json.str());
            mani.outputs.push_back(pl.out);
            mani.write(pl.out);
        }
    });

    auto *o_cssp = oracle->add_subcommand(
        "cssp", "greedy vs exhaustive vs optimal rank-k on a seeded instance");
    struct {
        int tokens = 64, micro = 10, dmodel = 12, keep = 5;
        uint64_t seed = 42;
        std::string out;
    } cs;
    o_cssp->add_option("--tokens", cs.tokens)->check(CLI::PositiveNumber);
    o_cssp->add_option("--micro", cs.micro)->check(CLI::PositiveNumber);
    o_cssp->add_option("--dmodel", cs.dmodel)->check(CLI::PositiveNumber);
    o_cssp->add_option("--keep", cs.keep)->check(CLI::PositiveNumber);
    o_cssp->add_option("--seed", cs.seed);
    o_cssp->add_option("--out", cs.out);
    o_cssp->callback([&] {
        Manifest mani;
        mani.subcommand = "oracle cssp";
        uint64_t seed = resolve_seed(cs.seed, mani);
        mani.params["tokens"] = cs.tokens;
        mani.params["micro"] = cs.micro;
        mani.params["dmodel"] = cs.dmodel;
        mani.params["keep"] = cs.keep;
        StrBox json;
        api(mcam_oracle_cssp(cs.tokens, cs.micro, cs.dmodel, cs.keep, seed, &json.p));
        if (cs.out.empty()) {
            printf("%s\n", json.str().c_str());
        } else {
            write_text(cs.out, json.str());
            mani.outputs.push_back(cs.out);
            mani.write(cs.out);
            printf("wrote %s\n", cs.out.c_str());
        }
    });

    auto *o_bounds = oracle->add_subcommand("bounds", "error-bound property sweeps");
    struct {
        uint64_t seed = 1;
        int trials = 500;
        std::string out;
    } ob;
    o_bounds->add_option("--seed", ob.seed);
    o_bounds->add_option("--trials", ob.trials)->check(CLI::PositiveNumber);
    o_bounds->add_option("--out", ob.out);
    o_bounds->callback([&] {
        Manifest mani;
        mani.subcommand = "oracle bounds";
        uint64_t seed = resolve_seed(ob.seed, mani);
        mani.params["trials"] = ob.trials;
        int all_pass = 0;
        StrBox json;
        api(mcam_oracle_bounds(seed, ob.trials, &all_pass, &json.p));
        ordered_json j = ordered_json::parse(json.str());
        print_checks(j);
        if (!ob.out.empty()) {
            write_text(ob.out, json.str());
            mani.outputs.push_back(ob.out);
            mani.write(ob.out);
        }
        if (!all_pass) exit_code = 3;
    });

    // ---- report ----
    auto *report = app.add_subcommand("report", "diagnostic tables (JSON or CSV)");
    report->require_subcommand(1);
    struct {
        std::string model, model_b;
        CalibSpec calib;
        int layer = 0;
        double alpha = 1.0, lambda = 0.2;
        int drop_top = 0;
        bool protect_shared = false;
        std::vector<int> layers;
        std::string format = "json", out;
    } rp;

    auto add_common = [&](CLI::App *sub, bool with_layer) {
        sub->add_option("--model", rp.model)->required();
        sub->add_option("--calib", rp.calib.path);
        sub->add_option("--synthetic", rp.calib.synthetic);
        if (with_layer) sub->add_option("--layer", rp.layer)->check(CLI::NonNegativeNumber);
        sub->add_option("--format", rp.format)->check(CLI::IsMember({"json", "csv"}));
        sub->add_option("--out", rp.out);
    };

    auto emit_table = [&](Manifest &mani, const std::string &table_json) {
        std::string payload = table_json;
        if (rp.format == "csv") {
            StrBox csv;
            api(mcam_table_to_csv(table_json.c_str(), &csv.p));
            payload = csv.str();
        }
        mani.params["format"] = rp.format;
        if (rp.out.empty()) {
            printf("%s\n", payload.c_str());
        } else {
            write_text(rp.out, payload);
            mani.outputs.push_back(rp.out);
            mani.write(rp.out);
            printf("wrote %s\n", rp.out.c_str());
        }
    };

    auto *r_energy = report->add_subcommand("energy", "sorted energy distribution with quantiles");
    add_common(r_energy, true);
    r_energy->add_option("--alpha", rp.alpha)->check(unit_closed);
    r_energy->add_option("--drop-top", rp.drop_top)->check(CLI::NonNegativeNumber);
    r_energy->callback([&] {
        Manifest mani;
        mani.subcommand = "report energy";
        mani.params["layer"] = rp.layer;
        mani.params["alpha"] = rp.alpha;
        mani.params["drop_top"] = rp.drop_top;
        ModelBox model;
        open_model(rp.model, mani, model);
        CalibBox calib;
        open_calib(rp.calib, mani, calib);
        StrBox json;
        api(mcam_report_energy(model.p, calib.p, rp.layer, rp.alpha, rp.drop_top, &json.p));
        emit_table(mani, json.str());
    });

    auto *r_ranks = report->add_subcommand("ranks", "per-expert global-rank quartiles");
    add_common(r_ranks, true);
    r_ranks->add_option("--alpha", rp.alpha)->check(unit_closed);
    r_ranks->callback([&] {
        Manifest mani;
        mani.subcommand = "report ranks";
        mani.params["layer"] = rp.layer;
        mani.params["alpha"] = rp.alpha;
        ModelBox model;
        open_model(rp.model, mani, model);
        CalibBox calib;
        open_calib(rp.calib, mani, calib);
        StrBox json;
        api(mcam_report_ranks(model.p, calib.p, rp.layer, rp.alpha, &json.p));
        emit_table(mani, json.str());
    });

    auto *r_ratio = report->add_subcommand("prune-ratio", "per-expert pruning ratios at lambda");
    add_common(r_ratio, true);
    r_ratio->add_option("--alpha", rp.alpha)->check(unit_closed);
    r_ratio->add_option("--lambda", rp.lambda)->check(unit_half_open);
    r_ratio->add_flag("--protect-shared", rp.protect_shared);
    r_ratio->callback([&] {
        Manifest mani;
        mani.subcommand = "report prune-ratio";
        mani.params["layer"] = rp.layer;
        mani.params["alpha"] = rp.alpha;
        mani.params["lambda"] = rp.lambda;
        mani.params["protect_shared"] = rp.protect_shared;
        ModelBox model;
        open_model(rp.model, mani, model);
        CalibBox calib;
        open_calib(rp.calib, mani, calib);
        StrBox json;
        api(mcam_report_prune_ratio(model.p, calib.p, rp.layer, rp.lambda, rp.alpha,
                                    rp.protect_shared ? 1 : 0, &json.p));
        emit_table(mani, json.str());
    });

    auto *r_approx = report->add_subcommand("approx", "layer-output error of model B vs model A");
    add_common(r_approx, false);
    r_approx->add_option("--model-b", rp.model_b)->required();
    r_approx->add_option("--layers", rp.layers, "layer indices (default: all)")->delimiter(',');
    r_approx->callback([&] {
        Manifest mani;
        mani.subcommand = "report approx";
        mani.params["layers"] = rp.layers;
        ModelBox model_a;
        open_model(rp.model, mani, model_a);
        ModelBox model_b;
        api(mcam_model_load(rp.model_b.c_str(), &model_b.p));
        mani.params["model_b"] = rp.model_b;
        mani.add_input("model_b", rp.model_b);
        CalibBox calib;
        open_calib(rp.calib, mani, calib);
        std::vector<int32_t> idx(rp.layers.begin(), rp.layers.end());
        StrBox json;
        api(mcam_report_approx(model_a.p, model_b.p, calib.p, idx.empty() ? nullptr : idx.data(),
                               (int32_t)idx.size(), &json.p));
        emit_table(mani, json.str());
    });

    // ---- verify ----
    auto *verify = app.add_subcommand("verify", "run the full property suite");
    struct {
        uint64_t seed = 1;
        int trials = 500;
        std::string out;
    } vf;
    verify->add_option("--seed", vf.seed);
    verify->add_option("--trials", vf.trials)->check(CLI::PositiveNumber);
    verify->add_option("--out", vf.out);
    verify->callback([&] {
        Manifest mani;
        mani.subcommand = "verify";
        uint64_t seed = resolve_seed(vf.seed, mani);
        mani.params["trials"] = vf.trials;
        int all_pass = 0;
        StrBox json;
        api(mcam_verify(seed, vf.trials, &all_pass, &json.p));
        ordered_json j = ordered_json::parse(json.str());
        print_checks(j);
        printf("verdict: %s\n", all_pass ? "PASS" : "FAIL");
        if (!vf.out.empty()) {
            write_text(vf.out, json.str());
            mani.outputs.push_back(vf.out);
            mani.write(vf.out);
        }
        if (!all_pass) exit_code = 3;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const CliError &e) {
        fprintf(stderr, "error: %s\n", e.msg.c_str());
        return e.code;
    }

    return exit_code;
}
