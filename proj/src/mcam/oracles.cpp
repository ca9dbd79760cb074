#include "oracles.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mcam {

namespace {

// columns of a as f64, column-major so Jacobi column ops are contiguous
std::vector<double> to_col_major_f64(const Mat &a) {
    std::vector<double> out((size_t)a.rows * (size_t)a.cols);
    for (int r = 0; r < a.rows; r++) {
        for (int c = 0; c < a.cols; c++) {
            out[(size_t)c * (size_t)a.rows + (size_t)r] = (double)a.at(r, c);
        }
    }
    return out;
}

std::vector<double> transpose_col_major(const std::vector<double> &a, int rows, int cols) {
    std::vector<double> out(a.size());
    for (int c = 0; c < cols; c++) {
        for (int r = 0; r < rows; r++) {
            out[(size_t)r * (size_t)cols + (size_t)c] = a[(size_t)c * (size_t)rows + (size_t)r];
        }
    }
    return out;
}

} // namespace

std::vector<double> singular_values(const Mat &y) {
    int rows = y.rows, cols = y.cols;
    std::vector<double> a = to_col_major_f64(y);
    if (cols > rows) {
        // one-sided Jacobi orthogonalizes columns; work on the thin side
        a = transpose_col_major(a, rows, cols);
        std::swap(rows, cols);
    }
    if (cols == 0 || rows == 0) return std::vector<double>((size_t)cols, 0.0);

    const double tol = 1e-10;
    const int max_sweeps = 10 * cols;
    bool converged = (cols == 1);
    for (int sweep = 0; sweep < max_sweeps && !converged; sweep++) {
        converged = true;
        for (int p = 0; p < cols - 1; p++) {
            for (int q = p + 1; q < cols; q++) {
                double *cp = a.data() + (size_t)p * (size_t)rows;
                double *cq = a.data() + (size_t)q * (size_t)rows;
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (int i = 0; i < rows; i++) {
                    app += cp[i] * cp[i];
                    aqq += cq[i] * cq[i];
                    apq += cp[i] * cq[i];
                }
                if (app == 0.0 || aqq == 0.0) continue; // zero column is orthogonal to everything
                if (std::fabs(apq) <= tol * std::sqrt(app * aqq)) continue;
                converged = false;
                double tau = (aqq - app) / (2.0 * apq);
                double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = c * t;
                for (int i = 0; i < rows; i++) {
                    double vp = cp[i], vq = cq[i];
                    cp[i] = c * vp - s * vq;
                    cq[i] = s * vp + c * vq;
                }
            }
        }
    }
    if (!converged) {
        throw std::runtime_error("svd did not converge within " + std::to_string(max_sweeps) + " sweeps");
    }

    std::vector<double> sigma((size_t)cols);
    for (int j = 0; j < cols; j++) {
        const double *cj = a.data() + (size_t)j * (size_t)rows;
        double sq = 0.0;
        for (int i = 0; i < rows; i++) sq += cj[i] * cj[i];
        sigma[(size_t)j] = std::sqrt(sq);
    }
    std::sort(sigma.begin(), sigma.end(), std::greater<double>());
    return sigma;
}

SvdRankError svd_rank_k_error(const Mat &y, int rank) {
    int min_dim = std::min(y.rows, y.cols);
    if (rank < 0 || rank > min_dim) {
        throw std::invalid_argument("rank must be in [0, min(n, d)] = [0, " + std::to_string(min_dim) + "]");
    }
    SvdRankError out;
    out.spectrum = singular_values(y);
    for (size_t i = (size_t)rank; i < out.spectrum.size(); i++) {
        out.error += out.spectrum[i] * out.spectrum[i];
    }
    return out;
}

namespace {

// ||Phi[:,subset] W[subset,:]||_F^2 in f64; by linearity this equals
// ||Phi W - Phi[:,complement] W[complement,:]||_F^2
double removed_error_f64(const Mat &phi, const Mat &w, const std::vector<int> &subset) {
    double total = 0.0;
    for (int t = 0; t < phi.rows; t++) {
        const float *pr = phi.row(t);
        for (int c = 0; c < w.cols; c++) {
            double acc = 0.0;
            for (int i : subset) {
                acc += (double)pr[i] * (double)w.at(i, c);
            }
            total += acc * acc;
        }
    }
    return total;
}

void check_cssp_shapes(const Mat &phi, const Mat &w) {
    if (phi.cols != w.rows) {
        throw std::invalid_argument("phi cols " + std::to_string(phi.cols) + " must match w rows " +
                                    std::to_string(w.rows));
    }
}

} // namespace

CsspResult cssp_bruteforce(const Mat &phi, const Mat &w, int m) {
    check_cssp_shapes(phi, w);
    int n_e = phi.cols;
    if (n_e > k_cssp_guard) {
        throw std::invalid_argument("subset enumeration refuses N_e = " + std::to_string(n_e) + " > " +
                                    std::to_string(k_cssp_guard) + "; use the greedy path");
    }
    if (m < 1 || m > n_e) {
        throw std::invalid_argument("subset size must be in [1, N_e]");
    }

    struct Best {
        double error = 0.0;
        std::vector<int> set;
        bool valid = false;
    };

    // chunk by the first selected index; within a chunk enumeration is
    // lexicographic, chunks merge in ascending order, and only strictly
    // smaller errors replace the incumbent, so the lexicographically first
    // optimum wins regardless of thread count
    int n_first = n_e - m + 1;
    std::vector<Best> chunk_best((size_t)n_first);
    parallel_for(n_first, [&](int first) {
        std::vector<int> sel((size_t)m);
        sel[0] = first;
        for (int i = 1; i < m; i++) sel[(size_t)i] = first + i;
        Best local;
        std::vector<int> complement;
        complement.reserve((size_t)(n_e - m));
        while (true) {
            complement.clear();
            {
                size_t si = 0;
                for (int i = 0; i < n_e; i++) {
                    if (si < sel.size() && sel[si] == i) {
                        si++;
                    } else {
                        complement.push_back(i);
                    }
                }
            }
            double err = removed_error_f64(phi, w, complement);
            if (!local.valid || err < local.error) {
                local.error = err;
                local.set = sel;
                local.valid = true;
            }
            // lexicographic successor with sel[0] fixed
            int j = m - 1;
            while (j >= 1 && sel[(size_t)j] == n_e - m + j) j--;
            if (j < 1) break;
            sel[(size_t)j]++;
            for (int i = j + 1; i < m; i++) sel[(size_t)i] = sel[(size_t)i - 1] + 1;
        }
        chunk_best[(size_t)first] = std::move(local);
    });

    Best best;
    for (const auto &cb : chunk_best) {
        if (!cb.valid) continue;
        if (!best.valid || cb.error < best.error) best = cb;
    }
    return {best.set, best.error};
}

LemmaResult lemma_bound(const Mat &phi, const Mat &w, const std::vector<int> &removed) {
    check_cssp_shapes(phi, w);
    for (int i : removed) {
        if (i < 0 || i >= phi.cols) {
            throw std::out_of_range("removed index " + std::to_string(i) + " out of range [0, " +
                                    std::to_string(phi.cols) + ")");
        }
    }
    LemmaResult out;
    out.epsilon = removed_error_f64(phi, w, removed);
    for (int i : removed) {
        double col_sq = 0.0;
        for (int t = 0; t < phi.rows; t++) {
            double v = (double)phi.at(t, i);
            col_sq += v * v;
        }
        out.epsilon_sup += col_sq * norm2_sq_f64(w.row(i), w.cols);
    }
    out.holds = out.epsilon <= out.epsilon_sup * (1.0 + k_bound_rel_slack) + k_bound_abs_slack;
    return out;
}

OracleReport theorem_check(const Mat &phi, const Mat &w, int keep) {
    check_cssp_shapes(phi, w);
    int n_e = phi.cols;
    if (keep < 1 || keep >= n_e) {
        throw std::invalid_argument("keep must be in [1, N_e)");
    }

    // energies E_i = ||phi col i||^2 * ||w row i||^2, ranked descending,
    // ties keep ascending index
    std::vector<double> energy((size_t)n_e, 0.0);
    for (int i = 0; i < n_e; i++) {
        double col_sq = 0.0;
        for (int t = 0; t < phi.rows; t++) {
            double v = (double)phi.at(t, i);
            col_sq += v * v;
        }
        energy[(size_t)i] = col_sq * norm2_sq_f64(w.row(i), w.cols);
    }
    std::vector<int> order((size_t)n_e);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return energy[(size_t)a] > energy[(size_t)b]; });

    OracleReport rep;
    rep.k = n_e - keep;
    rep.kept.assign(order.begin(), order.begin() + keep);
    std::vector<int> removed(order.begin() + keep, order.end());
    rep.boundary_energy = energy[(size_t)order[(size_t)keep - 1]];

    LemmaResult lem = lemma_bound(phi, w, removed);
    rep.epsilon = lem.epsilon;
    rep.epsilon_sup = lem.epsilon_sup;
    rep.lemma_holds = lem.holds;

    // Y = Phi W in f64, then its spectrum; padded with zeros up to N_e for the
    // delta term (rank(Y) <= N_e regardless of the token count)
    Mat y(phi.rows, w.cols);
    parallel_for(phi.rows, [&](int t) {
        for (int c = 0; c < w.cols; c++) {
            double acc = 0.0;
            for (int i = 0; i < n_e; i++) {
                acc += (double)phi.at(t, i) * (double)w.at(i, c);
            }
            y.at(t, c) = (float)acc;
        }
    });
    rep.spectrum = singular_values(y);
    rep.y_frob_sq = frob_sq(y);

    std::vector<double> padded = rep.spectrum;
    if ((int)padded.size() < n_e) padded.resize((size_t)n_e, 0.0);
    rep.svd_error = 0.0;
    for (size_t i = (size_t)keep; i < padded.size(); i++) rep.svd_error += padded[i] * padded[i];
    double min_tail_sq = padded[(size_t)keep] * padded[(size_t)keep];
    for (int i = keep; i < n_e; i++) min_tail_sq = std::min(min_tail_sq, padded[(size_t)i] * padded[(size_t)i]);
    rep.delta = (double)rep.k * (rep.boundary_energy - min_tail_sq);

    double rhs = rep.svd_error + rep.delta;
    rep.theorem_holds = rep.epsilon <= rhs * (1.0 + k_bound_rel_slack) + k_bound_abs_slack;
    rep.svd_lower_holds = rep.epsilon >= rep.svd_error - k_svd_lower_slack;
    rep.tightness = rhs > 0.0 ? rep.epsilon / rhs : (rep.epsilon == 0.0 ? 1.0 : 0.0);
    return rep;
}

namespace {

unsigned __int128 gcd_u128(unsigned __int128 a, unsigned __int128 b) {
    while (b != 0) {
        unsigned __int128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

} // namespace

PLossless p_lossless(int n_experts, int n_activated, double prune_frac) {
    if (n_experts < 1) throw std::invalid_argument("n_experts must be >= 1");
    if (n_activated < 1 || n_activated > n_experts) {
        throw std::invalid_argument("n_activated must be in [1, n_experts]");
    }
    if (!(prune_frac >= 0.0 && prune_frac < 1.0)) {
        throw std::invalid_argument("prune_frac must be in [0, 1)");
    }
    // epsilon guard so e.g. (1 - 0.25) * 16 floors to 12 under binary rounding
    int remaining = (int)std::floor((1.0 - prune_frac) * (double)n_experts + 1e-9);

    PLossless out;
    if (remaining < n_activated) {
        out.p = 0.0;
        out.num = 0;
        out.den = 1;
        out.degenerate = true;
        return out;
    }
    // C(remaining, k) / C(n, k) = prod_j (remaining - j) / (n - j), kept exact
    // with u128 intermediates and a gcd reduction after every factor
    const unsigned __int128 u128_max = ~(unsigned __int128)0;
    unsigned __int128 num = 1, den = 1;
    for (int j = 0; j < n_activated; j++) {
        unsigned __int128 nf = (unsigned __int128)(uint64_t)(remaining - j);
        unsigned __int128 df = (unsigned __int128)(uint64_t)(n_experts - j);
        if (num > u128_max / nf || den > u128_max / df) {
            throw std::overflow_error("binomial ratio overflows 128-bit intermediate");
        }
        num *= nf;
        den *= df;
        unsigned __int128 g = gcd_u128(num, den);
        num /= g;
        den /= g;
    }
    if (num > (unsigned __int128)UINT64_MAX || den > (unsigned __int128)UINT64_MAX) {
        throw std::overflow_error("reduced binomial ratio exceeds 64 bits");
    }
    out.num = (uint64_t)num;
    out.den = (uint64_t)den;
    out.p = (double)out.num / (double)out.den;
    return out;
}

} // namespace mcam
