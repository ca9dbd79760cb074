#pragma once

#include "common.h"

namespace mcam {

// slack constants shared by every bound check; pinned here, not in test code
inline constexpr double k_bound_rel_slack = 1e-6;
inline constexpr double k_bound_abs_slack = 1e-9;
inline constexpr double k_svd_lower_slack = 1e-9;

// full singular spectrum of y, descending; one-sided Jacobi on an f64 copy,
// relative off-diagonal tolerance 1e-10, hard cap of 10*min(n,d) sweeps
std::vector<double> singular_values(const Mat &y);

struct SvdRankError {
    double error = 0.0;            // sum of sigma_i^2 for i > rank
    std::vector<double> spectrum;  // descending
};

// optimal rank-k Frobenius approximation error (Eckart-Young-Mirsky)
SvdRankError svd_rank_k_error(const Mat &y, int rank);

struct CsspResult {
    std::vector<int> best_set; // ascending indices, lexicographically first optimum
    double best_error = 0.0;
};

// exhaustive column-subset search: minimizes ||Phi W - Phi[:,S] W[S,:]||_F^2
// over all C(N_e, m) subsets; refuses N_e > 20
CsspResult cssp_bruteforce(const Mat &phi, const Mat &w, int m);
inline constexpr int k_cssp_guard = 20;

struct LemmaResult {
    double epsilon = 0.0;     // ||Phi[:,removed] W[removed,:]||_F^2
    double epsilon_sup = 0.0; // sum_i ||Phi_col_i||^2 ||w_row_i||^2 over removed
    bool holds = false;       // epsilon <= epsilon_sup within the pinned slacks
};

// the paired-sum error bound; `holds` is reported, not thrown: the bound is an
// approximation premise (it is exact for |removed| = 1 and for instances with
// orthogonal coefficient columns or basis rows, and can fail off that premise)
LemmaResult lemma_bound(const Mat &phi, const Mat &w, const std::vector<int> &removed);

struct OracleReport {
    double epsilon = 0.0;         // ||Y - Y_hat||_F^2 for the top-energy keep set
    double epsilon_sup = 0.0;     // paired-sum bound over the removed set
    double svd_error = 0.0;       // ||Y - Y*||_F^2, optimal rank-keep error
    double delta = 0.0;           // k * (boundary_energy - min_{keep<i<=N_e} sigma_i^2)
    double boundary_energy = 0.0; // energy of the lowest-ranked retained micro-expert
    int k = 0;                    // removed count
    std::vector<double> spectrum; // descending singular values of Y
    double y_frob_sq = 0.0;       // ||Y||_F^2 (spectrum energy conservation reference)
    std::vector<int> kept;        // top-energy keep set, ranking order
    bool lemma_holds = false;     // epsilon <= epsilon_sup (slacked)
    bool theorem_holds = false;   // epsilon <= svd_error + delta (slacked)
    bool svd_lower_holds = false; // epsilon >= svd_error - 1e-9 (rank lower bound)
    double tightness = 0.0;       // epsilon / (svd_error + delta); report-only
};

// ranks columns by E_i = ||phi_col_i||^2 * ||w_row_i||^2 (ties keep ascending
// index), keeps the top `keep`, and compares the achieved error against the
// optimal rank-keep error plus the boundary-energy delta; 1 <= keep < N_e
OracleReport theorem_check(const Mat &phi, const Mat &w, int keep);

struct PLossless {
    double p = 0.0;
    uint64_t num = 0, den = 1; // reduced exact fraction
    bool degenerate = false;   // remaining experts < activated count
};

// probability that a token's routed expert set survives expert-level pruning:
// C(remaining, n_activated) / C(n_experts, n_activated), exact rational
PLossless p_lossless(int n_experts, int n_activated, double prune_frac);

} // namespace mcam
