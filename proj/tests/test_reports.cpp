#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mcam/prune.h"
#include "mcam/reports.h"
#include "mcam/toygen.h"

#include <numeric>

using namespace mcam;
using nlohmann::ordered_json;

namespace {

Ranking identity_ranking(int n) {
    Ranking r;
    r.order.resize((size_t)n);
    std::iota(r.order.begin(), r.order.end(), 0);
    return r;
}

} // namespace

TEST_CASE("energy distribution sorts ascending and trims the heavy tail") {
    EnergyScores scores;
    scores.energy = {5.0, 1.0, 3.0, 2.0, 4.0};
    scores.alpha = 0.5;

    SUBCASE("full distribution") {
        ordered_json t = energy_distribution(scores, 0);
        CHECK(t["kind"] == "energy_distribution");
        CHECK(t["alpha"] == 0.5);
        CHECK(t["n_micro"] == 5);
        REQUIRE(t["rows"].size() == 5);
        CHECK(t["rows"][0][1] == 1.0);
        CHECK(t["rows"][4][1] == 5.0);
        CHECK(t["quantiles"]["min"] == 1.0);
        CHECK(t["quantiles"]["p25"] == 2.0);
        CHECK(t["quantiles"]["median"] == 3.0);
        CHECK(t["quantiles"]["p75"] == 4.0);
        CHECK(t["quantiles"]["max"] == 5.0);
    }
    SUBCASE("drop_top removes the largest entries before quantiles") {
        ordered_json t = energy_distribution(scores, 2);
        REQUIRE(t["rows"].size() == 3);
        CHECK(t["rows"][2][1] == 3.0);
        CHECK(t["quantiles"]["max"] == 3.0);
        CHECK(t["quantiles"]["median"] == 2.0);
        CHECK(t["quantiles"]["p25"] == 1.5);
    }
    SUBCASE("validation") {
        CHECK_THROWS_AS(energy_distribution(scores, -1), std::invalid_argument);
        CHECK_THROWS_AS(energy_distribution(scores, 5), std::invalid_argument);
    }
}

TEST_CASE("per-expert rank distribution") {
    SUBCASE("a lone expert owns every rank") {
        MoEModel m = gen_toy_model({1, 1, 0, 4, 4, 1}, 11, 1.0);
        ordered_json t = rank_distribution_per_expert(identity_ranking(4), m.layers[0]);
        CHECK(t["kind"] == "rank_distribution_per_expert");
        REQUIRE(t["rows"].size() == 1);
        const auto &row = t["rows"][0];
        CHECK(row[0] == 0);          // expert
        CHECK(row[1] == false);      // shared
        CHECK(row[2] == 4);          // width
        CHECK(row[3] == 0.0);        // rank_min
        CHECK(row[5] == 1.5);        // rank_median of {0,1,2,3}
        CHECK(row[7] == 3.0);        // rank_max
        CHECK(row[8] == 0.0);        // norm_min
        CHECK(row[12] == 1.0);       // norm_max = 3 / (4 - 1)
    }
    SUBCASE("an expert ranked last sits at the bottom of the normalized scale") {
        MoEModel m = gen_toy_model({1, 2, 0, 4, 2, 1}, 12, 1.0);
        // identity order: expert 0 holds ranks {0,1}, expert 1 holds {2,3}
        ordered_json t = rank_distribution_per_expert(identity_ranking(4), m.layers[0]);
        REQUIRE(t["rows"].size() == 2);
        CHECK(t["rows"][0][3] == 0.0);
        CHECK(t["rows"][0][7] == 1.0);
        CHECK(t["rows"][1][3] == 2.0);
        CHECK(t["rows"][1][7] == 3.0);
        CHECK((double)t["rows"][1][8] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(t["rows"][1][12] == 1.0);
    }
    SUBCASE("shared experts are flagged") {
        // 1 shared + 3 routed experts, width 2 each -> 8 micro-experts
        MoEModel m = gen_toy_model({1, 3, 1, 4, 2, 1}, 13, 1.0);
        ordered_json t = rank_distribution_per_expert(identity_ranking(8), m.layers[0]);
        REQUIRE(t["rows"].size() == 4);
        CHECK(t["rows"][0][1] == true);
        CHECK(t["rows"][1][1] == false);
        CHECK(t["rows"][3][1] == false);
    }
    SUBCASE("ranking size must match") {
        MoEModel m = gen_toy_model({1, 2, 0, 4, 2, 1}, 14, 1.0);
        CHECK_THROWS_AS(rank_distribution_per_expert(identity_ranking(5), m.layers[0]),
                        std::invalid_argument);
    }
}

TEST_CASE("per-expert prune ratio") {
    MoEModel m = gen_toy_model({1, 3, 0, 8, 2, 1}, 21, 1.0);
    const MoELayer &layer = m.layers[0];

    SUBCASE("keeping everything reports ratio zero everywhere") {
        RetainSet keep_all = select_retain_set(identity_ranking(6), 0.0, layer);
        ordered_json t = per_expert_prune_ratio(keep_all, layer);
        CHECK(t["kind"] == "per_expert_prune_ratio");
        REQUIRE(t["rows"].size() == 3);
        for (const auto &row : t["rows"]) {
            CHECK(row[3] == 2);   // kept
            CHECK(row[4] == 0.0); // prune_ratio
        }
    }
    SUBCASE("partial and total removal") {
        RetainSet retain;
        retain.per_expert = {{0, 1}, {0}, {}};
        ordered_json t = per_expert_prune_ratio(retain, layer);
        CHECK(t["rows"][0][4] == 0.0);
        CHECK(t["rows"][1][4] == 0.5);
        CHECK(t["rows"][2][4] == 1.0);
    }
    SUBCASE("width-zero experts count as fully pruned") {
        MoEModel two = gen_toy_model({1, 2, 0, 8, 2, 1}, 22, 1.0);
        RetainSet keep_first;
        keep_first.per_expert = {{0, 1}, {}};
        keep_first.kept = {0, 1};
        keep_first.removed = {2, 3};
        MoELayer hollowed = prune_layer(two.layers[0], keep_first);
        REQUIRE(hollowed.experts[1].width == 0);
        ordered_json t = per_expert_prune_ratio(keep_first, hollowed);
        CHECK(t["rows"][1][2] == 0);
        CHECK(t["rows"][1][4] == 1.0);
    }
    SUBCASE("expert count must match") {
        RetainSet retain;
        retain.per_expert = {{0}, {1}};
        CHECK_THROWS_AS(per_expert_prune_ratio(retain, layer), std::invalid_argument);
    }
}

TEST_CASE("layer approximation error between two models") {
    MoEModel a = gen_toy_model({3, 3, 0, 8, 4, 2}, 31, 1.0);
    CalibBatch batch = gen_synthetic(16, 8, 5, 1.0);

    SUBCASE("a model against itself is exact") {
        auto recs = approx_error(a, a, batch, {0, 1, 2});
        REQUIRE(recs.size() == 3);
        for (const auto &r : recs) {
            CHECK(r.l2 == 0.0);
            CHECK(r.cosine == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("negating one layer flips its cosine and nothing else") {
        MoEModel b = a;
        for (auto &e : b.layers[1].experts) {
            for (auto &v : e.down.data) v = -v;
        }
        auto recs = approx_error(a, b, batch, {0, 1, 2});
        REQUIRE(recs.size() == 3);
        CHECK(recs[0].l2 == 0.0);
        CHECK(recs[1].cosine == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(recs[1].l2 > 0.0);
        // layer 2 still compares on the ORIGINAL model's hidden states, so the
        // layer-1 damage must not leak downstream
        CHECK(recs[2].l2 == 0.0);
        CHECK(recs[2].cosine == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("layer subsets select rows") {
        auto recs = approx_error(a, a, batch, {2});
        REQUIRE(recs.size() == 1);
        CHECK(recs[0].layer == 2);
        CHECK(approx_error(a, a, batch, {}).empty());
    }
    SUBCASE("validation") {
        CHECK_THROWS_AS(approx_error(a, a, batch, {3}), std::out_of_range);
        CHECK_THROWS_AS(approx_error(a, a, batch, {-1}), std::out_of_range);
        MoEModel narrow = gen_toy_model({3, 3, 0, 4, 4, 2}, 31, 1.0);
        CHECK_THROWS_AS(approx_error(a, narrow, batch, {0}), std::invalid_argument);
    }
}

TEST_CASE("tables render to CSV with a stable column order") {
    SUBCASE("approximation-error table") {
        std::vector<ApproxErrorRecord> recs(1);
        recs[0].layer = 0;
        recs[0].l2 = 1.5;
        recs[0].cosine = 0.25;
        ordered_json t = approx_error_table(recs);
        CHECK(table_to_csv(t) == "layer,l2_sum,cosine_mean\n0,1.5,0.25\n");
    }
    SUBCASE("string cells pass through unquoted") {
        ordered_json t;
        t["columns"] = {"name", "value"};
        t["rows"] = ordered_json::array({ordered_json::array({"x", 2})});
        CHECK(table_to_csv(t) == "name,value\nx,2\n");
    }
    SUBCASE("only columns/rows tables convert") {
        ordered_json t;
        t["quantiles"] = {{"min", 0.0}};
        CHECK_THROWS_AS(table_to_csv(t), std::invalid_argument);
    }
    SUBCASE("serialization is deterministic") {
        MoEModel m = gen_toy_model({1, 2, 0, 4, 2, 1}, 33, 1.0);
        ordered_json t1 = rank_distribution_per_expert(identity_ranking(4), m.layers[0]);
        ordered_json t2 = rank_distribution_per_expert(identity_ranking(4), m.layers[0]);
        CHECK(t1.dump() == t2.dump());
    }
}
