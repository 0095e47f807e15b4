#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psnet/data.hpp"
#include "psnet/density.hpp"
#include "psnet/model.hpp"

namespace psnet {

struct EvalImage {
    double predicted = 0.0;
    double ground_truth = 0.0;
};

struct EvalReport {
    double mae = 0.0;
    double rmse = 0.0;
    double mean_variance_loss = 0.0;
    std::vector<EvalImage> per_image;
    // Mean cosine similarity between branch attention vectors, [psm][i][j].
    // Symmetric with a unit diagonal.
    std::vector<std::vector<std::vector<double>>> pairwise_similarity;
};

struct CountMetrics {
    double mae = 0.0;
    double rmse = 0.0;
};

// Mean absolute and root-mean-square error over per-image count pairs.
CountMetrics count_metrics(const std::vector<EvalImage>& per_image);

// Whole-image evaluation: every image is reflect-padded up to a multiple of
// 8, the predicted count is the sum of the density map, and the ground-truth
// count is the number of annotated points.
EvalReport evaluate(const PsnetModel& model, const DatasetManifest& manifest, double epsilon = 1e-6);

std::vector<std::vector<std::vector<double>>> similarity_report(const PsnetModel& model,
                                                                const DatasetManifest& manifest);

struct ScaleGroup {
    std::int64_t size = 0;
    double mean_ground_truth = 0.0;
    double mean_predicted = 0.0;
};

// Images sorted by ground-truth count and split into n_groups contiguous
// groups (division remainder goes to the last group).
std::vector<ScaleGroup> scale_group_report(const EvalReport& report, std::int64_t n_groups);

// Reflect-pads to a multiple of 8, runs the model, returns the predicted
// density map (sized padded/8).
DensityMap predict_density(const PsnetModel& model, const TensorPtr& image);

std::string eval_report_to_json(const EvalReport& report);

}  // namespace psnet
