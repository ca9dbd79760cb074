#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mcam/oracles.h"
#include "mcam/verify.h"

#include <cmath>

using namespace mcam;

namespace {

Mat from_rows(std::initializer_list<std::initializer_list<float>> rows) {
    Mat m((int)rows.size(), (int)rows.begin()->size());
    int t = 0;
    for (const auto &row : rows) {
        int c = 0;
        for (float v : row) m.at(t, c++) = v;
        t++;
    }
    return m;
}

} // namespace

TEST_CASE("singular values: shear matrix gives the golden-ratio pair") {
    // [[1,1],[0,1]]: sigma^2 = (3 +- sqrt(5)) / 2, i.e. sigma = phi and 1/phi
    auto s = singular_values(from_rows({{1, 1}, {0, 1}}));
    REQUIRE(s.size() == 2);
    CHECK(s[0] == doctest::Approx(1.618033988749895).epsilon(1e-12));
    CHECK(s[1] == doctest::Approx(0.6180339887498949).epsilon(1e-12));
    // det = 1 is preserved: product of singular values is 1
    CHECK(s[0] * s[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("singular values: diagonal, transpose, zero, and conservation") {
    Mat d = from_rows({{3, 0, 0}, {0, 2, 0}, {0, 0, 1}});
    auto s = singular_values(d);
    REQUIRE(s.size() == 3);
    CHECK(s[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(s[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(s[2] == doctest::Approx(1.0).epsilon(1e-12));

    // spectrum is transpose-invariant (tall vs wide handled internally)
    Rng rng(3);
    Mat y(9, 4);
    for (auto &v : y.data) v = (float)rng.gaussian();
    Mat yt(4, 9);
    for (int r = 0; r < 9; r++) {
        for (int c = 0; c < 4; c++) yt.at(c, r) = y.at(r, c);
    }
    auto a = singular_values(y);
    auto b = singular_values(yt);
    REQUIRE(a.size() == 4);
    REQUIRE(b.size() == 4);
    double frob = frob_sq(y), sum_a = 0.0;
    for (size_t i = 0; i < 4; i++) {
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-10));
        sum_a += a[i] * a[i];
    }
    // rotations preserve the Frobenius norm: sum sigma^2 = ||Y||_F^2
    CHECK(sum_a == doctest::Approx(frob).epsilon(1e-12));

    auto z = singular_values(Mat(3, 2));
    for (double v : z) CHECK(v == 0.0);
}

TEST_CASE("optimal rank-k error on a known spectrum") {
    Mat d = from_rows({{3, 0, 0}, {0, 2, 0}, {0, 0, 1}});
    CHECK(svd_rank_k_error(d, 1).error == doctest::Approx(5.0).epsilon(1e-12)); // 4 + 1
    CHECK(svd_rank_k_error(d, 2).error == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(svd_rank_k_error(d, 3).error == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(svd_rank_k_error(d, 0).error == doctest::Approx(14.0).epsilon(1e-12));
}

TEST_CASE("exhaustive subset search") {
    SUBCASE("beats or ties every explicit subset") {
        Rng rng(11);
        Mat phi(8, 5), w(5, 4);
        for (auto &v : phi.data) v = (float)rng.gaussian();
        for (auto &v : w.data) v = (float)rng.gaussian();
        CsspResult r = cssp_bruteforce(phi, w, 2);
        REQUIRE(r.best_set.size() == 2);
        // check optimality against every C(5,2) subset via the lemma oracle
        for (int a = 0; a < 5; a++) {
            for (int b = a + 1; b < 5; b++) {
                std::vector<int> removed;
                for (int i = 0; i < 5; i++) {
                    if (i != a && i != b) removed.push_back(i);
                }
                double err = lemma_bound(phi, w, removed).epsilon;
                CHECK(r.best_error <= err * (1.0 + 1e-9) + 1e-12);
            }
        }
    }
    SUBCASE("ties resolve to the lexicographically first subset") {
        // columns 0 and 1 are identical: {0,1}, {0,2}, {1,2} all leave error 1
        // (dropping col 2 loses (0,1); dropping a duplicate loses one (1,0))
        Mat phi = from_rows({{1, 1, 0}, {0, 0, 1}});
        Mat w(3, 2);
        w.at(0, 0) = 1.0f;
        w.at(1, 0) = 1.0f;
        w.at(2, 1) = 1.0f;
        CsspResult r = cssp_bruteforce(phi, w, 2);
        CHECK(r.best_error == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.best_set == std::vector<int>{0, 1}); // first of the three-way tie
    }
    SUBCASE("guard refuses oversized enumerations") {
        Mat phi(2, 21), w(21, 2);
        CHECK_THROWS_AS(cssp_bruteforce(phi, w, 3), std::invalid_argument);
    }
    SUBCASE("keep-all has zero error") {
        Rng rng(4);
        Mat phi(4, 3), w(3, 2);
        for (auto &v : phi.data) v = (float)rng.gaussian();
        for (auto &v : w.data) v = (float)rng.gaussian();
        CHECK(cssp_bruteforce(phi, w, 3).best_error == 0.0);
    }
}

TEST_CASE("paired-sum error bound") {
    SUBCASE("single removal is exactly the rank-1 energy") {
        Rng rng(6);
        Mat phi(10, 6), w(6, 5);
        for (auto &v : phi.data) v = (float)rng.gaussian();
        for (auto &v : w.data) v = (float)rng.gaussian();
        for (int i = 0; i < 6; i++) {
            LemmaResult r = lemma_bound(phi, w, {i});
            CHECK(r.holds);
            CHECK(r.epsilon == doctest::Approx(r.epsilon_sup).epsilon(1e-12));
        }
    }
    SUBCASE("disjoint-support columns give exact equality at any size") {
        Rng rng(8);
        BoundInstance inst = make_bound_instance(rng, 0);
        LemmaResult r = lemma_bound(inst.phi, inst.w, inst.removed);
        CHECK(r.holds);
        CHECK(r.epsilon == doctest::Approx(r.epsilon_sup).epsilon(1e-9));
    }
    SUBCASE("identical columns overshoot the paired sum (premise, not identity)") {
        // two copies of the same rank-1 term: true error 4x, paired sum 2x
        Mat phi = from_rows({{1, 1}, {2, 2}});
        Mat w(2, 1);
        w.at(0, 0) = 1.0f;
        w.at(1, 0) = 1.0f;
        LemmaResult r = lemma_bound(phi, w, {0, 1});
        CHECK_FALSE(r.holds);
        CHECK(r.epsilon == doctest::Approx(20.0).epsilon(1e-12));     // ||2*phi0||^2 = 4*5
        CHECK(r.epsilon_sup == doctest::Approx(10.0).epsilon(1e-12)); // 2*5
    }
    SUBCASE("removed index validation") {
        Mat phi(2, 2), w(2, 2);
        CHECK_THROWS_AS(lemma_bound(phi, w, {2}), std::out_of_range);
        CHECK_THROWS_AS(lemma_bound(phi, w, {-1}), std::out_of_range);
    }
}

TEST_CASE("top-energy selection vs optimal rank-k") {
    SUBCASE("keep range is validated") {
        Mat phi(4, 4), w(4, 4);
        CHECK_THROWS_AS(theorem_check(phi, w, 0), std::invalid_argument);
        CHECK_THROWS_AS(theorem_check(phi, w, 4), std::invalid_argument);
    }
    SUBCASE("report is self-consistent on a structured instance") {
        Rng rng(15);
        BoundInstance inst = make_bound_instance(rng, 0);
        int n_e = inst.phi.cols;
        int keep = n_e / 2;
        OracleReport rep = theorem_check(inst.phi, inst.w, keep);
        CHECK(rep.k == n_e - keep);
        CHECK((int)rep.kept.size() == keep);
        CHECK(rep.lemma_holds);
        CHECK(rep.theorem_holds);
        CHECK(rep.svd_lower_holds);
        CHECK(rep.epsilon >= rep.svd_error - 1e-9);
        CHECK(rep.epsilon <= rep.svd_error + rep.delta + 1e-9 +
                                 1e-6 * (rep.svd_error + rep.delta));
        // delta = k * (boundary energy - smallest tail sigma^2), recomputed
        std::vector<double> padded = rep.spectrum;
        if ((int)padded.size() < n_e) padded.resize((size_t)n_e, 0.0);
        double min_tail = padded[(size_t)keep] * padded[(size_t)keep];
        for (int i = keep; i < n_e; i++) {
            min_tail = std::min(min_tail, padded[(size_t)i] * padded[(size_t)i]);
        }
        CHECK(rep.delta ==
              doctest::Approx((double)rep.k * (rep.boundary_energy - min_tail)).epsilon(1e-12));
        double spec_sq = 0.0;
        for (double s : rep.spectrum) spec_sq += s * s;
        CHECK(spec_sq == doctest::Approx(rep.y_frob_sq).epsilon(1e-10));
    }
    SUBCASE("fewer tokens than micro-experts pads the spectrum") {
        Rng rng(23);
        Mat phi(2, 5), w(5, 3); // rank(Y) <= 2 but N_e = 5
        for (auto &v : phi.data) v = (float)rng.gaussian();
        for (auto &v : w.data) v = (float)rng.gaussian();
        OracleReport rep = theorem_check(phi, w, 2);
        // Y is 2x3: spectrum is min(2,3) = 2 long; svd_error beyond keep=2 is 0
        CHECK(rep.svd_error == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(rep.svd_lower_holds);
    }
}

TEST_CASE("lossless routed-set survival probability") {
    SUBCASE("published table, exact reduced fractions") {
        struct Row {
            int n, k;
            uint64_t num, den;
        };
        for (const Row &r : {Row{8, 2, 15, 28}, Row{16, 2, 11, 20}, Row{64, 4, 16215, 52948},
                             Row{128, 8, 71290869, 768657340}, Row{160, 6, 14049021, 81512516}}) {
            PLossless p = p_lossless(r.n, r.k, 0.25);
            CHECK_FALSE(p.degenerate);
            CHECK(p.num == r.num);
            CHECK(p.den == r.den);
            CHECK(p.p == doctest::Approx((double)r.num / (double)r.den).epsilon(1e-15));
        }
    }
    SUBCASE("smaller instance cross-checked by hand") {
        PLossless p = p_lossless(20, 4, 0.25); // C(15,4)/C(20,4) = 91/323
        CHECK(p.num == 91);
        CHECK(p.den == 323);
    }
    SUBCASE("zero pruning keeps every routed set") {
        PLossless p = p_lossless(8, 2, 0.0);
        CHECK(p.num == 1);
        CHECK(p.den == 1);
        CHECK(p.p == 1.0);
    }
    SUBCASE("pruning below the activation count is degenerate") {
        PLossless p = p_lossless(4, 4, 0.25); // 3 remaining < 4 activated
        CHECK(p.degenerate);
        CHECK(p.p == 0.0);
        CHECK(p.num == 0);
    }
    SUBCASE("binary rounding does not lose a whole expert") {
        // (1 - 0.25) * 16 must floor to 12, not 11
        PLossless p = p_lossless(16, 2, 0.25);
        CHECK(p.num == 11);
        CHECK(p.den == 20);
    }
    SUBCASE("argument validation") {
        CHECK_THROWS_AS(p_lossless(0, 1, 0.1), std::invalid_argument);
        CHECK_THROWS_AS(p_lossless(4, 0, 0.1), std::invalid_argument);
        CHECK_THROWS_AS(p_lossless(4, 5, 0.1), std::invalid_argument);
        CHECK_THROWS_AS(p_lossless(4, 2, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(p_lossless(4, 2, -0.1), std::invalid_argument);
    }
}
