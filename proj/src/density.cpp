#include "psnet/density.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

namespace psnet {

void PointSet::validate() const {
    if (width <= 0 || height <= 0) {
        throw std::invalid_argument("point set has empty image dimensions");
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (!(p.x >= 0.0 && p.x < static_cast<double>(width) && p.y >= 0.0 && p.y < static_cast<double>(height))) {
            throw std::invalid_argument("point " + std::to_string(i) + " at (" + std::to_string(p.x) + ", " +
                                        std::to_string(p.y) + ") lies outside the " + std::to_string(width) + "x" +
                                        std::to_string(height) + " image");
        }
    }
}

double DensityMap::sum() const {
    double acc = 0.0;
    for (double v : values) {
        acc += v;
    }
    return acc;
}

namespace {

// Adds one unit-mass truncated Gaussian centered at (px, py).
void splat_gaussian(DensityMap& map, double px, double py, double sigma, double support_sigmas) {
    const double radius = support_sigmas * sigma;
    std::int64_t x0 = static_cast<std::int64_t>(std::floor(px - radius));
    std::int64_t x1 = static_cast<std::int64_t>(std::ceil(px + radius));
    std::int64_t y0 = static_cast<std::int64_t>(std::floor(py - radius));
    std::int64_t y1 = static_cast<std::int64_t>(std::ceil(py + radius));
    x0 = std::max<std::int64_t>(x0, 0);
    y0 = std::max<std::int64_t>(y0, 0);
    x1 = std::min<std::int64_t>(x1, map.width - 1);
    y1 = std::min<std::int64_t>(y1, map.height - 1);

    // The window always contains the pixel nearest the (in-bounds) point, and
    // the Gaussian is positive everywhere, so mass > 0 and the
    // renormalization below is well defined.
    const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    std::vector<double> weights(static_cast<std::size_t>((y1 - y0 + 1) * (x1 - x0 + 1)));
    double mass = 0.0;
    std::size_t idx = 0;
    for (std::int64_t y = y0; y <= y1; ++y) {
        const double dy = static_cast<double>(y) - py;
        for (std::int64_t x = x0; x <= x1; ++x) {
            const double dx = static_cast<double>(x) - px;
            const double w = std::exp(-(dx * dx + dy * dy) * inv_two_sigma_sq);
            weights[idx++] = w;
            mass += w;
        }
    }
    idx = 0;
    for (std::int64_t y = y0; y <= y1; ++y) {
        for (std::int64_t x = x0; x <= x1; ++x) {
            map.values[static_cast<std::size_t>(y * map.width + x)] += weights[idx++] / mass;
        }
    }
}

}  // namespace

DensityMap fixed_kernel_density(const PointSet& ps, double sigma, const KernelOptions& opt) {
    ps.validate();
    if (sigma <= 0.0) {
        throw std::invalid_argument("fixed_kernel_density: sigma must be positive");
    }
    DensityMap map{ps.height, ps.width,
                   std::vector<double>(static_cast<std::size_t>(ps.height * ps.width), 0.0)};
    for (const auto& p : ps.points) {
        splat_gaussian(map, p.x, p.y, sigma, opt.support_sigmas);
    }
    return map;
}

std::vector<double> adaptive_sigma(const PointSet& ps, std::int64_t k, double beta, double fallback_sigma) {
    ps.validate();
    if (k <= 0) {
        throw std::invalid_argument("adaptive_sigma: k must be positive");
    }
    const std::size_t n = ps.points.size();
    std::vector<double> sigmas(n, fallback_sigma);
    if (n < 2) {
        return sigmas;
    }
    const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), n - 1);
    std::vector<double> dists;
    dists.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        dists.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            const double dx = ps.points[i].x - ps.points[j].x;
            const double dy = ps.points[i].y - ps.points[j].y;
            dists.push_back(std::sqrt(dx * dx + dy * dy));
        }
        std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(kk) - 1, dists.end());
        double mean = 0.0;
        for (std::size_t t = 0; t < kk; ++t) {
            mean += dists[t];
        }
        mean /= static_cast<double>(kk);
        sigmas[i] = beta * mean;
    }
    return sigmas;
}

DensityMap adaptive_kernel_density(const PointSet& ps, std::int64_t k, double beta, double fallback_sigma,
                                   const KernelOptions& opt) {
    const auto sigmas = adaptive_sigma(ps, k, beta, fallback_sigma);
    DensityMap map{ps.height, ps.width,
                   std::vector<double>(static_cast<std::size_t>(ps.height * ps.width), 0.0)};
    for (std::size_t i = 0; i < ps.points.size(); ++i) {
        splat_gaussian(map, ps.points[i].x, ps.points[i].y, sigmas[i], opt.support_sigmas);
    }
    return map;
}

DensityMap sum_pool_downsample(const DensityMap& map, std::int64_t factor) {
    if (factor <= 0) {
        throw std::invalid_argument("sum_pool_downsample: factor must be positive");
    }
    if (map.height % factor != 0 || map.width % factor != 0) {
        throw std::invalid_argument("sum_pool_downsample: " + std::to_string(map.height) + "x" +
                                    std::to_string(map.width) + " not divisible by " + std::to_string(factor));
    }
    const std::int64_t Ho = map.height / factor, Wo = map.width / factor;
    DensityMap out{Ho, Wo, std::vector<double>(static_cast<std::size_t>(Ho * Wo), 0.0)};
    for (std::int64_t y = 0; y < map.height; ++y) {
        const std::int64_t yo = y / factor;
        for (std::int64_t x = 0; x < map.width; ++x) {
            out.values[static_cast<std::size_t>(yo * Wo + x / factor)] +=
                map.values[static_cast<std::size_t>(y * map.width + x)];
        }
    }
    return out;
}

void write_dmap(const std::string& path, const DensityMap& map) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    f.write("DMAP", 4);
    const std::uint32_t h = static_cast<std::uint32_t>(map.height);
    const std::uint32_t w = static_cast<std::uint32_t>(map.width);
    f.write(reinterpret_cast<const char*>(&h), 4);
    f.write(reinterpret_cast<const char*>(&w), 4);
    std::vector<float> row(map.values.size());
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        row[i] = static_cast<float>(map.values[i]);
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!f) {
        throw std::runtime_error("short write to " + path);
    }
}

DensityMap read_dmap(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open " + path);
    }
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "DMAP", 4) != 0) {
        throw std::runtime_error(path + " is not a DMAP file");
    }
    std::uint32_t h = 0, w = 0;
    f.read(reinterpret_cast<char*>(&h), 4);
    f.read(reinterpret_cast<char*>(&w), 4);
    if (!f || h == 0 || w == 0) {
        throw std::runtime_error(path + ": bad DMAP header");
    }
    std::vector<float> raw(static_cast<std::size_t>(h) * w);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (!f) {
        throw std::runtime_error(path + ": truncated DMAP payload");
    }
    DensityMap map{static_cast<std::int64_t>(h), static_cast<std::int64_t>(w),
                   std::vector<double>(raw.begin(), raw.end())};
    return map;
}

void write_density_pgm(const std::string& path, const DensityMap& map) {
    double peak = 0.0;
    for (double v : map.values) {
        peak = std::max(peak, v);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    f << "P5\n" << map.width << " " << map.height << "\n255\n";
    std::vector<unsigned char> bytes(map.values.size(), 0);
    if (peak > 0.0) {
        for (std::size_t i = 0; i < map.values.size(); ++i) {
            bytes[i] = static_cast<unsigned char>(std::lround(255.0 * map.values[i] / peak));
        }
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) {
        throw std::runtime_error("short write to " + path);
    }
}

TensorPtr density_to_tensor(const DensityMap& map) {
    std::vector<float> data(map.values.size());
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        data[i] = static_cast<float>(map.values[i]);
    }
    return Tensor::create({1, map.height, map.width}, std::move(data));
}

}  // namespace psnet
