#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mcam/calibration.h"
#include "mcam/toygen.h"

#include <cmath>

using namespace mcam;

TEST_CASE("synthetic batches are pinned by (n, d, seed, scale)") {
    CalibBatch a = gen_synthetic(32, 8, 7, 1.0);
    CalibBatch b = gen_synthetic(32, 8, 7, 1.0);
    CalibBatch c = gen_synthetic(32, 8, 8, 1.0);
    CHECK(a.X.rows == 32);
    CHECK(a.X.cols == 8);
    CHECK(a.X.data == b.X.data);
    CHECK(a.X.data != c.X.data);

    // scale multiplies every draw
    CalibBatch d = gen_synthetic(32, 8, 7, 2.0);
    for (size_t i = 0; i < a.X.size(); i++) {
        CHECK(d.X.data[i] == doctest::Approx(2.0f * a.X.data[i]).epsilon(1e-6));
    }

    // empirical moments are sane for a reasonably sized draw
    CalibBatch big = gen_synthetic(2000, 16, 3, 1.0);
    double sum = 0.0, sq = 0.0;
    for (float v : big.X.data) {
        sum += v;
        sq += (double)v * v;
    }
    double n = (double)big.X.size();
    CHECK(std::fabs(sum / n) < 0.05);
    CHECK(sq / n == doctest::Approx(1.0).epsilon(0.05));

    CHECK_THROWS_AS(gen_synthetic(0, 8, 1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(gen_synthetic(8, 0, 1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(gen_synthetic(8, 8, 1, -1.0), std::invalid_argument);
}

TEST_CASE("layer sample capture chains the model's own layers") {
    MoEModel model = gen_toy_model({3, 3, 1, 12, 6, 2}, 19, 1.0);
    CalibBatch batch = gen_synthetic(10, 12, 4, 1.0);

    LayerSamples s0 = capture_layer_samples(model, batch, 0);
    CHECK(s0.X.data == batch.X.data); // layer 0 sees the batch itself
    CHECK(s0.Y.rows == 10);
    CHECK(s0.Y.cols == 12);
    // Y is the layer's own forward on X
    Mat y0 = layer_forward_batch(model.layers[0], batch.X);
    CHECK(s0.Y.data == y0.data);

    // layer 2's input is layer 1's output which saw layer 0's output
    LayerSamples s1 = capture_layer_samples(model, batch, 1);
    CHECK(s1.X.data == s0.Y.data);
    LayerSamples s2 = capture_layer_samples(model, batch, 2);
    CHECK(s2.X.data == s1.Y.data);

    CHECK_THROWS_AS(capture_layer_samples(model, batch, 3), std::out_of_range);
    CHECK_THROWS_AS(capture_layer_samples(model, batch, -1), std::out_of_range);

    CalibBatch wrong = gen_synthetic(10, 8, 4, 1.0);
    CHECK_THROWS_AS(capture_layer_samples(model, wrong, 0), std::invalid_argument);
}
