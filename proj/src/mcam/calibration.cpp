#include "calibration.h"

#include "container.h"

#include <cmath>

namespace mcam {

CalibBatch gen_synthetic(int n, int d_model, uint64_t seed, double scale) {
    if (n < 1) throw std::invalid_argument("calibration size must be >= 1");
    if (d_model < 1) throw std::invalid_argument("d_model must be >= 1");
    if (scale < 0.0 || !std::isfinite(scale)) throw std::invalid_argument("scale must be finite and >= 0");
    CalibBatch b;
    b.X = Mat(n, d_model);
    Rng rng(seed);
    for (size_t i = 0; i < b.X.size(); i++) {
        b.X.data[i] = (float)(scale * rng.gaussian());
    }
    return b;
}

void save_calibration(const CalibBatch &batch, const std::string &path) {
    nlohmann::ordered_json meta;
    meta["kind"] = "calib";
    meta["n"] = batch.X.rows;
    meta["d_model"] = batch.X.cols;
    write_container(path, meta, {{"X", batch.X}});
}

CalibBatch load_calibration(const std::string &path, int expected_d_model) {
    ContainerData c = read_container(path);
    if (!c.meta.contains("kind") || c.meta["kind"] != "calib") {
        throw std::runtime_error("container is not a calibration batch: " + path);
    }
    CalibBatch b;
    b.X = c.require("X");
    if (b.X.rows < 1) throw std::runtime_error("calibration batch is empty: " + path);
    if (expected_d_model >= 0 && b.X.cols != expected_d_model) {
        throw std::runtime_error("calibration width " + std::to_string(b.X.cols) + " does not match model d_model " +
                                 std::to_string(expected_d_model));
    }
    for (float v : b.X.data) {
        if (!std::isfinite(v)) throw std::runtime_error("non-finite calibration value in " + path);
    }
    return b;
}

LayerSamples capture_layer_samples(const MoEModel &model, const CalibBatch &batch, int layer) {
    model.validate();
    if (layer < 0 || layer >= model.config.n_layers) {
        throw std::out_of_range("layer index " + std::to_string(layer) + " out of range (model has " +
                                std::to_string(model.config.n_layers) + ")");
    }
    if (batch.X.cols != model.config.d_model) {
        throw std::invalid_argument("calibration width " + std::to_string(batch.X.cols) +
                                    " does not match model d_model " + std::to_string(model.config.d_model));
    }
    Mat cur = batch.X;
    for (int l = 0; l < layer; l++) {
        cur = layer_forward_batch(model.layers[(size_t)l], cur);
    }
    LayerSamples s;
    s.Y = layer_forward_batch(model.layers[(size_t)layer], cur);
    s.X = std::move(cur);
    return s;
}

} // namespace mcam
