#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcam {

// row-major float matrix; all weights and activations are f32 at rest,
// reductions over them run in f64 (see dot_f64 & friends)
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), data((size_t)r * (size_t)c, 0.0f) {
        if (r < 0 || c < 0) {
            throw std::invalid_argument("matrix dims must be non-negative");
        }
    }

    float *row(int r) { return data.data() + (size_t)r * (size_t)cols; }
    const float *row(int r) const { return data.data() + (size_t)r * (size_t)cols; }

    float &at(int r, int c) { return data[(size_t)r * (size_t)cols + (size_t)c]; }
    float at(int r, int c) const { return data[(size_t)r * (size_t)cols + (size_t)c]; }

    size_t size() const { return data.size(); }
    bool same_shape(const Mat &o) const { return rows == o.rows && cols == o.cols; }
};

// left-to-right f64 accumulation; element order is part of the numeric contract
double dot_f64(const float *a, const float *b, int n);
double norm2_sq_f64(const float *v, int n);
double frob_sq(const Mat &m);

// y = M x with f64 accumulation per output element
std::vector<float> matvec(const Mat &m, const std::vector<float> &x);

// ||a - b||_F^2 of two same-shaped matrices, f64
double frob_sq_diff(const Mat &a, const Mat &b);

// deterministic generator: raw mt19937_64 stream + explicit Box-Muller so the
// byte stream is identical across platforms/stdlibs (std distributions are not)
struct Rng {
    explicit Rng(uint64_t seed) : gen(seed) {}

    uint64_t next_u64() { return gen(); }

    // [0, 1) with 53 random bits
    double uniform() { return (double)(gen() >> 11) * 0x1.0p-53; }

    // N(0, 1), Box-Muller (trigonometric form), caches the second variate
    double gaussian();

    // [lo, hi] inclusive
    int uniform_int(int lo, int hi);

private:
    std::mt19937_64 gen;
    bool have_spare = false;
    double spare = 0.0;
};

// worker-pool parallel map over [0, n); callers guarantee disjoint writes so
// results are bit-identical regardless of thread count
void parallel_for(int n, const std::function<void(int)> &fn);
void set_threads(int n);
int get_threads();

std::string format_shape(int rows, int cols);

} // namespace mcam
