#pragma once

#include <cstdint>
#include <string>

#include "psnet/data.hpp"
#include "psnet/density.hpp"
#include "psnet/model.hpp"

namespace psnet {

// How ground-truth density maps are produced from point annotations.
struct GtConfig {
    std::string mode = "fixed";  // "fixed" | "adaptive"
    double sigma = 2.0;          // fixed-kernel sigma; adaptive fallback for lone points
    std::int64_t k = 3;          // adaptive: neighbours averaged for sigma_i
    double beta = 0.3;           // adaptive: sigma_i = beta * mean distance

    void validate() const;
};

struct RunConfig {
    ModelConfig model;
    AugmentConfig augment;
    double lambda = 1.0;
    double lr = 1e-4;
    std::int64_t batch_size = 8;
    std::int64_t epochs = 50;
    std::uint64_t seed = 1;
    GtConfig gt;

    void validate() const;
};

// Strict JSON parsing: unknown keys are errors, every field falls back to
// its default when absent.
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& run);

DensityMap make_ground_truth(const PointSet& points, const GtConfig& gt);

struct TrainResult {
    std::string final_checkpoint;
    std::int64_t steps = 0;
    double final_l = 0.0;
    double final_l_e = 0.0;
    double final_l_m = 0.0;
};

// End-to-end training from scratch. Writes into out_dir: run_config.json,
// train_log.jsonl (one JSON object per step: step, l_e, l_m, l, wall_ms),
// epoch_NNN.ckpt after each epoch, and final.ckpt. Deterministic per seed.
// Aborts with a diagnostic naming the step if the loss leaves the finite
// range.
TrainResult train(const RunConfig& run, const DatasetManifest& manifest, const std::string& out_dir);

}  // namespace psnet
