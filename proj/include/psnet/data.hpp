#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "psnet/density.hpp"
#include "psnet/rng.hpp"
#include "psnet/tensor.hpp"

namespace psnet {

// One training/eval unit: an image in [0,1] and its head annotations.
struct Sample {
    TensorPtr image;  // 3xHxW
    PointSet points;
};

struct ManifestEntry {
    std::string image;  // path relative to the manifest's directory
    std::vector<Point> points;
};

struct DatasetManifest {
    std::filesystem::path root;  // directory the image paths resolve against
    std::vector<ManifestEntry> entries;
};

// Manifest JSON schema: [{"image": "relative/path.ppm", "points": [[x, y], ...]}, ...]
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// Decodes the entry's image and validates its points against the decoded
// bounds; errors carry the entry index and offending point.
Sample load_sample(const DatasetManifest& manifest, std::size_t index);

struct AugmentConfig {
    double scale_lo = 0.8;
    double scale_hi = 1.2;
    std::int64_t crop_size = 256;  // must be divisible by 8
    double mirror_prob = 0.5;
    double gamma_lo = 0.5;
    double gamma_hi = 1.5;
    double gamma_prob = 0.3;
    double gray_prob = 0.1;

    void validate() const;
};

// Training-time chain, in order: uniform random scale (points scaled by the
// same factor), reflect-pad up to crop_size when the scaled image is smaller,
// random crop (points translated; points outside the half-open crop window
// dropped), horizontal mirror, gamma transform, grayscale. Output image is
// crop_size x crop_size.
Sample augment(const Sample& sample, const AugmentConfig& cfg, SeededRng& rng);

struct SynthConfig {
    std::int64_t n_images = 0;
    std::int64_t image_size = 96;  // must be divisible by 8
    std::int64_t count_lo = 5;
    std::int64_t count_hi = 30;
    std::uint64_t seed = 0;
};

// Writes n PPM crowd scenes (textured background + one dark disc per person,
// disc radius shrinking with y to vary apparent scale) plus manifest.json
// into out_dir. Deterministic per seed.
DatasetManifest synth_generate(const std::filesystem::path& out_dir, const SynthConfig& cfg);

}  // namespace psnet
