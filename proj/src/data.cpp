#include "psnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "psnet/image.hpp"

namespace psnet {

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) {
        throw std::runtime_error("cannot open manifest " + path.string());
    }
    nlohmann::json doc;
    try {
        f >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    if (!doc.is_array()) {
        throw std::runtime_error(path.string() + ": manifest must be a JSON array");
    }
    DatasetManifest manifest;
    manifest.root = path.parent_path();
    for (std::size_t i = 0; i < doc.size(); ++i) {
        try {
            const auto& e = doc[i];
            ManifestEntry entry;
            entry.image = e.at("image").get<std::string>();
            for (const auto& p : e.at("points")) {
                if (!p.is_array() || p.size() != 2) {
                    throw std::runtime_error("each point must be a [x, y] pair");
                }
                entry.points.push_back({p[0].get<double>(), p[1].get<double>()});
            }
            manifest.entries.push_back(std::move(entry));
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ": entry " + std::to_string(i) + ": " + e.what());
        }
    }
    return manifest;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& entry : manifest.entries) {
        nlohmann::json points = nlohmann::json::array();
        for (const auto& p : entry.points) {
            points.push_back({p.x, p.y});
        }
        doc.push_back({{"image", entry.image}, {"points", std::move(points)}});
    }
    std::ofstream f(path);
    if (!f) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    f << doc.dump(2) << "\n";
    if (!f) {
        throw std::runtime_error("short write to " + path.string());
    }
}

Sample load_sample(const DatasetManifest& manifest, std::size_t index) {
    if (index >= manifest.entries.size()) {
        throw std::out_of_range("sample index " + std::to_string(index) + " out of range (manifest has " +
                                std::to_string(manifest.entries.size()) + " entries)");
    }
    const auto& entry = manifest.entries[index];
    Sample sample;
    sample.image = read_image((manifest.root / entry.image).string());
    sample.points.points = entry.points;
    sample.points.height = sample.image->shape[1];
    sample.points.width = sample.image->shape[2];
    try {
        sample.points.validate();
    } catch (const std::exception& e) {
        throw std::runtime_error("entry " + std::to_string(index) + " (" + entry.image + "): " + e.what());
    }
    return sample;
}

void AugmentConfig::validate() const {
    if (crop_size <= 0 || crop_size % 8 != 0) {
        throw std::invalid_argument("crop_size must be a positive multiple of 8, got " + std::to_string(crop_size));
    }
    if (!(scale_lo > 0.0) || scale_hi < scale_lo) {
        throw std::invalid_argument("bad scale range");
    }
    if (gamma_hi < gamma_lo || !(gamma_lo > 0.0)) {
        throw std::invalid_argument("bad gamma range");
    }
    for (double p : {mirror_prob, gamma_prob, gray_prob}) {
        if (p < 0.0 || p > 1.0) {
            throw std::invalid_argument("probabilities must lie in [0, 1]");
        }
    }
}

Sample augment(const Sample& sample, const AugmentConfig& cfg, SeededRng& rng) {
    cfg.validate();
    const std::int64_t H = sample.image->shape[1], W = sample.image->shape[2];

    // 1. Uniform random scale. Points move by the realized per-axis factor so
    // they stay aligned with the resampled pixels after rounding.
    const double s = rng.uniform(cfg.scale_lo, cfg.scale_hi);
    std::int64_t Hn = std::max<std::int64_t>(1, std::llround(static_cast<double>(H) * s));
    std::int64_t Wn = std::max<std::int64_t>(1, std::llround(static_cast<double>(W) * s));
    TensorPtr img = (Hn == H && Wn == W) ? sample.image : bilinear_resize(sample.image, Hn, Wn);
    const double fy = static_cast<double>(Hn) / static_cast<double>(H);
    const double fx = static_cast<double>(Wn) / static_cast<double>(W);
    std::vector<Point> pts;
    pts.reserve(sample.points.points.size());
    for (const auto& p : sample.points.points) {
        pts.push_back({p.x * fx, p.y * fy});
    }

    // 2. Reflect-pad when the scaled image is smaller than the crop window.
    if (Hn < cfg.crop_size || Wn < cfg.crop_size) {
        img = reflect_pad(img, 0, std::max<std::int64_t>(0, cfg.crop_size - Hn), 0,
                          std::max<std::int64_t>(0, cfg.crop_size - Wn));
        Hn = std::max(Hn, cfg.crop_size);
        Wn = std::max(Wn, cfg.crop_size);
    }

    // 3. Random crop; points translate, and only points inside the half-open
    // window survive.
    const std::int64_t y0 = rng.uniform_int(0, Hn - cfg.crop_size);
    const std::int64_t x0 = rng.uniform_int(0, Wn - cfg.crop_size);
    img = crop(img, y0, x0, cfg.crop_size, cfg.crop_size);
    std::vector<Point> kept;
    for (const auto& p : pts) {
        const double nx = p.x - static_cast<double>(x0);
        const double ny = p.y - static_cast<double>(y0);
        if (nx >= 0.0 && nx < static_cast<double>(cfg.crop_size) && ny >= 0.0 &&
            ny < static_cast<double>(cfg.crop_size)) {
            kept.push_back({nx, ny});
        }
    }

    const std::int64_t C = img->shape[0], HW = cfg.crop_size * cfg.crop_size;

    // 4. Horizontal mirror.
    if (rng.bernoulli(cfg.mirror_prob)) {
        auto flipped = Tensor::zeros(img->shape);
        for (std::int64_t c = 0; c < C; ++c) {
            for (std::int64_t y = 0; y < cfg.crop_size; ++y) {
                const float* src = img->data.data() + (c * cfg.crop_size + y) * cfg.crop_size;
                float* dst = flipped->data.data() + (c * cfg.crop_size + y) * cfg.crop_size;
                for (std::int64_t x = 0; x < cfg.crop_size; ++x) {
                    dst[x] = src[cfg.crop_size - 1 - x];
                }
            }
        }
        img = flipped;
        for (auto& p : kept) {
            p.x = std::max(0.0, static_cast<double>(cfg.crop_size - 1) - p.x);
        }
    }

    // 5. Gamma transform on the [0,1] values.
    if (rng.bernoulli(cfg.gamma_prob)) {
        const float gamma = static_cast<float>(rng.uniform(cfg.gamma_lo, cfg.gamma_hi));
        auto adjusted = Tensor::zeros(img->shape);
        for (std::size_t i = 0; i < img->data.size(); ++i) {
            adjusted->data[i] = std::pow(img->data[i], gamma);
        }
        img = adjusted;
    }

    // 6. Grayscale: Rec. 601 luminance replicated to all three channels.
    if (rng.bernoulli(cfg.gray_prob)) {
        auto gray = Tensor::zeros(img->shape);
        for (std::int64_t i = 0; i < HW; ++i) {
            const float y = 0.299f * img->data[static_cast<std::size_t>(i)] +
                            0.587f * img->data[static_cast<std::size_t>(HW + i)] +
                            0.114f * img->data[static_cast<std::size_t>(2 * HW + i)];
            gray->data[static_cast<std::size_t>(i)] = y;
            gray->data[static_cast<std::size_t>(HW + i)] = y;
            gray->data[static_cast<std::size_t>(2 * HW + i)] = y;
        }
        img = gray;
    }

    Sample out;
    out.image = img;
    out.points.points = std::move(kept);
    out.points.width = cfg.crop_size;
    out.points.height = cfg.crop_size;
    return out;
}

namespace {

// Low-frequency background: a coarse random grid upsampled bilinearly.
TensorPtr synth_background(SeededRng& rng, std::int64_t size) {
    const std::int64_t g = rng.uniform_int(3, 6);
    auto coarse = Tensor::zeros({3, g, g});
    for (auto& v : coarse->data) {
        v = static_cast<float>(rng.uniform(0.35, 0.75));
    }
    return bilinear_resize(coarse, size, size);
}

void draw_disc(TensorPtr& img, double cx, double cy, double radius, const float color[3]) {
    const std::int64_t size = img->shape[1];
    const std::int64_t x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(cx - radius - 1.0)));
    const std::int64_t x1 = std::min<std::int64_t>(size - 1, static_cast<std::int64_t>(std::ceil(cx + radius + 1.0)));
    const std::int64_t y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(cy - radius - 1.0)));
    const std::int64_t y1 = std::min<std::int64_t>(size - 1, static_cast<std::int64_t>(std::ceil(cy + radius + 1.0)));
    for (std::int64_t y = y0; y <= y1; ++y) {
        for (std::int64_t x = x0; x <= x1; ++x) {
            const double d = std::hypot(static_cast<double>(x) - cx, static_cast<double>(y) - cy);
            const float cov = static_cast<float>(std::clamp(radius + 0.5 - d, 0.0, 1.0));
            if (cov <= 0.0f) {
                continue;
            }
            for (std::int64_t c = 0; c < 3; ++c) {
                float& px = img->data[static_cast<std::size_t>((c * size + y) * size + x)];
                px = px * (1.0f - cov) + color[c] * cov;
            }
        }
    }
}

}  // namespace

DatasetManifest synth_generate(const std::filesystem::path& out_dir, const SynthConfig& cfg) {
    if (cfg.image_size <= 0 || cfg.image_size % 8 != 0) {
        throw std::invalid_argument("image_size must be a positive multiple of 8");
    }
    if (cfg.n_images < 0 || cfg.count_lo < 0 || cfg.count_hi < cfg.count_lo) {
        throw std::invalid_argument("bad synth count configuration");
    }
    std::filesystem::create_directories(out_dir);

    DatasetManifest manifest;
    manifest.root = out_dir;
    SeededRng master(cfg.seed);
    const double size_d = static_cast<double>(cfg.image_size);
    const double r_max = size_d / 16.0;
    const double r_min = 1.5;

    for (std::int64_t i = 0; i < cfg.n_images; ++i) {
        SeededRng rng = master.split(static_cast<std::uint64_t>(i));
        auto img = synth_background(rng, cfg.image_size);

        ManifestEntry entry;
        const std::int64_t count = rng.uniform_int(cfg.count_lo, cfg.count_hi);
        for (std::int64_t p = 0; p < count; ++p) {
            const double x = rng.uniform(1.0, size_d - 2.0);
            const double y = rng.uniform(1.0, size_d - 2.0);
            // Blob radius shrinks with the row index so apparent scale
            // varies systematically across each image.
            const double t = y / (size_d - 1.0);
            const double radius = (r_max - (r_max - r_min) * t) * rng.uniform(0.8, 1.25);
            const float base = static_cast<float>(rng.uniform(0.05, 0.30));
            const float color[3] = {std::max(0.0f, base + static_cast<float>(rng.uniform(-0.03, 0.03))),
                                    std::max(0.0f, base + static_cast<float>(rng.uniform(-0.03, 0.03))),
                                    std::max(0.0f, base + static_cast<float>(rng.uniform(-0.03, 0.03)))};
            draw_disc(img, x, y, radius, color);
            entry.points.push_back({x, y});
        }

        char name[32];
        std::snprintf(name, sizeof(name), "img_%05lld.ppm", static_cast<long long>(i));
        entry.image = name;
        write_ppm((out_dir / name).string(), img);
        manifest.entries.push_back(std::move(entry));
    }

    save_manifest(out_dir / "manifest.json", manifest);
    return manifest;
}

}  // namespace psnet
