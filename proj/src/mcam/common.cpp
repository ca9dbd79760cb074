#include "common.h"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <thread>

namespace mcam {

double dot_f64(const float *a, const float *b, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; i++) {
        acc += (double)a[i] * (double)b[i];
    }
    return acc;
}

double norm2_sq_f64(const float *v, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; i++) {
        acc += (double)v[i] * (double)v[i];
    }
    return acc;
}

double frob_sq(const Mat &m) {
    return norm2_sq_f64(m.data.data(), (int)m.data.size());
}

std::vector<float> matvec(const Mat &m, const std::vector<float> &x) {
    if ((int)x.size() != m.cols) {
        throw std::invalid_argument("matvec: vector length " + std::to_string(x.size()) +
                                    " does not match matrix cols " + std::to_string(m.cols));
    }
    std::vector<float> y((size_t)m.rows);
    for (int r = 0; r < m.rows; r++) {
        y[r] = (float)dot_f64(m.row(r), x.data(), m.cols);
    }
    return y;
}

double frob_sq_diff(const Mat &a, const Mat &b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("frob_sq_diff: shape mismatch " + format_shape(a.rows, a.cols) +
                                    " vs " + format_shape(b.rows, b.cols));
    }
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); i++) {
        double d = (double)a.data[i] - (double)b.data[i];
        acc += d * d;
    }
    return acc;
}

double Rng::gaussian() {
    if (have_spare) {
        have_spare = false;
        return spare;
    }
    // u1 in (0, 1] so the log is finite; u2 in [0, 1)
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare = r * std::sin(theta);
    have_spare = true;
    return r * std::cos(theta);
}

int Rng::uniform_int(int lo, int hi) {
    if (lo > hi) {
        throw std::invalid_argument("uniform_int: empty range");
    }
    uint64_t span = (uint64_t)(hi - lo) + 1;
    return lo + (int)(next_u64() % span);
}

namespace {
int g_threads = (int)std::max(1u, std::thread::hardware_concurrency());
}

void set_threads(int n) {
    if (n < 1) {
        throw std::invalid_argument("thread count must be >= 1");
    }
    g_threads = n;
}

int get_threads() { return g_threads; }

void parallel_for(int n, const std::function<void(int)> &fn) {
    if (n <= 0) {
        return;
    }
    int nt = std::min(g_threads, n);
    if (nt <= 1) {
        for (int i = 0; i < n; i++) {
            fn(i);
        }
        return;
    }
    // static block partition: each index is touched by exactly one worker
    std::vector<std::thread> workers;
    workers.reserve((size_t)nt);
    std::exception_ptr first_error = nullptr;
    std::mutex err_mu;
    for (int t = 0; t < nt; t++) {
        int lo = (int)((int64_t)n * t / nt);
        int hi = (int)((int64_t)n * (t + 1) / nt);
        workers.emplace_back([&, lo, hi]() {
            try {
                for (int i = lo; i < hi; i++) {
                    fn(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) {
                    first_error = std::current_exception();
                }
            }
        });
    }
    for (auto &w : workers) {
        w.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

std::string format_shape(int rows, int cols) {
    return "[" + std::to_string(rows) + ", " + std::to_string(cols) + "]";
}

} // namespace mcam
