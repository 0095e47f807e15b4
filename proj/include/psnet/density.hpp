#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psnet/tensor.hpp"

namespace psnet {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

// Head annotations for one image. Coordinates are pixel positions with the
// origin at the top-left pixel center, 0 <= x < width, 0 <= y < height.
struct PointSet {
    std::vector<Point> points;
    std::int64_t width = 0;
    std::int64_t height = 0;

    // Throws naming the first out-of-bounds point.
    void validate() const;
};

// Ground-truth density grid. Values are kept in double so that count
// conservation survives pooling and summation; they are narrowed to float
// only at the file boundary and when entering the network.
struct DensityMap {
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::vector<double> values;  // row-major

    double sum() const;
};

struct KernelOptions {
    double support_sigmas = 4.0;  // truncation radius in units of sigma
};

// Each point contributes an isotropic Gaussian truncated to the image and
// renormalized so its in-image mass is exactly 1.
DensityMap fixed_kernel_density(const PointSet& ps, double sigma, const KernelOptions& opt = {});

// sigma_i = beta * (mean distance from point i to its k nearest other
// points); k is capped at count-1. A lone point gets fallback_sigma.
std::vector<double> adaptive_sigma(const PointSet& ps, std::int64_t k, double beta, double fallback_sigma);

DensityMap adaptive_kernel_density(const PointSet& ps, std::int64_t k, double beta, double fallback_sigma,
                                   const KernelOptions& opt = {});

// Sums factor x factor blocks; totals are preserved exactly (same additions,
// different grouping). height and width must be divisible by factor.
DensityMap sum_pool_downsample(const DensityMap& map, std::int64_t factor);

// Binary density file: "DMAP", uint32-le height, width, then height*width
// float32-le values in row-major order.
void write_dmap(const std::string& path, const DensityMap& map);
DensityMap read_dmap(const std::string& path);

// 8-bit PGM with values scaled to [0,255] by the map maximum.
void write_density_pgm(const std::string& path, const DensityMap& map);

// 1xHxW float tensor view of the map (the regression target).
TensorPtr density_to_tensor(const DensityMap& map);

}  // namespace psnet
