#include "psnet/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace psnet {

namespace {

// Next header token, skipping whitespace and '#' comment lines.
std::string pnm_token(std::istream& f, const std::string& path) {
    std::string tok;
    int c = f.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') {
                c = f.get();
            }
        } else if (!std::isspace(c)) {
            break;
        }
        c = f.get();
    }
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(c));
        c = f.get();
    }
    if (tok.empty()) {
        throw std::runtime_error(path + ": truncated header");
    }
    return tok;
}

std::int64_t pnm_int(std::istream& f, const std::string& path, const char* field) {
    const std::string tok = pnm_token(f, path);
    try {
        return std::stoll(tok);
    } catch (const std::exception&) {
        throw std::runtime_error(path + ": bad " + field + " field '" + tok + "'");
    }
}

std::int64_t reflect_index(std::int64_t i, std::int64_t n) {
    if (n == 1) {
        return 0;
    }
    const std::int64_t period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

}  // namespace

TensorPtr read_image(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open image " + path);
    }
    const std::string magic = pnm_token(f, path);
    if (magic != "P6" && magic != "P5") {
        throw std::runtime_error(path + ": unsupported format '" + magic + "' (binary PPM/PGM only)");
    }
    const std::int64_t w = pnm_int(f, path, "width");
    const std::int64_t h = pnm_int(f, path, "height");
    const std::int64_t maxval = pnm_int(f, path, "maxval");
    if (w <= 0 || h <= 0) {
        throw std::runtime_error(path + ": bad dimensions");
    }
    if (maxval != 255) {
        throw std::runtime_error(path + ": only maxval 255 is supported, got " + std::to_string(maxval));
    }
    // The header terminator is the single whitespace byte already consumed by
    // the token reader; the payload starts here.
    const std::int64_t channels = magic == "P6" ? 3 : 1;
    std::vector<unsigned char> raw(static_cast<std::size_t>(w * h * channels));
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!f) {
        throw std::runtime_error(path + ": truncated pixel data");
    }

    auto img = Tensor::zeros({3, h, w});
    if (channels == 3) {
        for (std::int64_t i = 0; i < h * w; ++i) {
            img->data[static_cast<std::size_t>(i)] = static_cast<float>(raw[static_cast<std::size_t>(3 * i)]) / 255.0f;
            img->data[static_cast<std::size_t>(h * w + i)] =
                static_cast<float>(raw[static_cast<std::size_t>(3 * i + 1)]) / 255.0f;
            img->data[static_cast<std::size_t>(2 * h * w + i)] =
                static_cast<float>(raw[static_cast<std::size_t>(3 * i + 2)]) / 255.0f;
        }
    } else {
        for (std::int64_t i = 0; i < h * w; ++i) {
            const float v = static_cast<float>(raw[static_cast<std::size_t>(i)]) / 255.0f;
            img->data[static_cast<std::size_t>(i)] = v;
            img->data[static_cast<std::size_t>(h * w + i)] = v;
            img->data[static_cast<std::size_t>(2 * h * w + i)] = v;
        }
    }
    return img;
}

void write_ppm(const std::string& path, const TensorPtr& image) {
    if (image->shape.size() != 3 || image->shape[0] != 3) {
        throw std::invalid_argument("write_ppm: image must be 3xHxW, got " + shape_str(image->shape));
    }
    const std::int64_t h = image->shape[1], w = image->shape[2];
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    f << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> raw(static_cast<std::size_t>(3 * h * w));
    for (std::int64_t i = 0; i < h * w; ++i) {
        for (std::int64_t c = 0; c < 3; ++c) {
            const float v = std::clamp(image->data[static_cast<std::size_t>(c * h * w + i)], 0.0f, 1.0f);
            raw[static_cast<std::size_t>(3 * i + c)] = static_cast<unsigned char>(std::lround(v * 255.0f));
        }
    }
    f.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!f) {
        throw std::runtime_error("short write to " + path);
    }
}

TensorPtr bilinear_resize(const TensorPtr& image, std::int64_t out_h, std::int64_t out_w) {
    if (image->shape.size() != 3) {
        throw std::invalid_argument("bilinear_resize: input must be CxHxW");
    }
    if (out_h <= 0 || out_w <= 0) {
        throw std::invalid_argument("bilinear_resize: output size must be positive");
    }
    const std::int64_t C = image->shape[0], H = image->shape[1], W = image->shape[2];
    auto out = Tensor::zeros({C, out_h, out_w});
    const double sy = static_cast<double>(H) / static_cast<double>(out_h);
    const double sx = static_cast<double>(W) / static_cast<double>(out_w);
    for (std::int64_t oy = 0; oy < out_h; ++oy) {
        const double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
        const std::int64_t y0 = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(fy)), 0, H - 1);
        const std::int64_t y1 = std::min<std::int64_t>(y0 + 1, H - 1);
        const float wy = static_cast<float>(std::clamp(fy - static_cast<double>(y0), 0.0, 1.0));
        for (std::int64_t ox = 0; ox < out_w; ++ox) {
            const double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
            const std::int64_t x0 = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(fx)), 0, W - 1);
            const std::int64_t x1 = std::min<std::int64_t>(x0 + 1, W - 1);
            const float wx = static_cast<float>(std::clamp(fx - static_cast<double>(x0), 0.0, 1.0));
            for (std::int64_t c = 0; c < C; ++c) {
                const float* plane = image->data.data() + c * H * W;
                const float top = plane[y0 * W + x0] * (1.0f - wx) + plane[y0 * W + x1] * wx;
                const float bot = plane[y1 * W + x0] * (1.0f - wx) + plane[y1 * W + x1] * wx;
                out->data[static_cast<std::size_t>((c * out_h + oy) * out_w + ox)] = top * (1.0f - wy) + bot * wy;
            }
        }
    }
    return out;
}

TensorPtr reflect_pad(const TensorPtr& image, std::int64_t top, std::int64_t bottom, std::int64_t left,
                      std::int64_t right) {
    if (image->shape.size() != 3) {
        throw std::invalid_argument("reflect_pad: input must be CxHxW");
    }
    if (top < 0 || bottom < 0 || left < 0 || right < 0) {
        throw std::invalid_argument("reflect_pad: negative padding");
    }
    const std::int64_t C = image->shape[0], H = image->shape[1], W = image->shape[2];
    const std::int64_t Ho = H + top + bottom, Wo = W + left + right;
    auto out = Tensor::zeros({C, Ho, Wo});
    for (std::int64_t c = 0; c < C; ++c) {
        const float* src = image->data.data() + c * H * W;
        float* dst = out->data.data() + c * Ho * Wo;
        for (std::int64_t y = 0; y < Ho; ++y) {
            const std::int64_t sy = reflect_index(y - top, H);
            for (std::int64_t x = 0; x < Wo; ++x) {
                dst[y * Wo + x] = src[sy * W + reflect_index(x - left, W)];
            }
        }
    }
    return out;
}

TensorPtr crop(const TensorPtr& image, std::int64_t y0, std::int64_t x0, std::int64_t crop_h, std::int64_t crop_w) {
    if (image->shape.size() != 3) {
        throw std::invalid_argument("crop: input must be CxHxW");
    }
    const std::int64_t C = image->shape[0], H = image->shape[1], W = image->shape[2];
    if (y0 < 0 || x0 < 0 || crop_h <= 0 || crop_w <= 0 || y0 + crop_h > H || x0 + crop_w > W) {
        throw std::invalid_argument("crop: window " + std::to_string(crop_h) + "x" + std::to_string(crop_w) + "+" +
                                    std::to_string(y0) + "+" + std::to_string(x0) + " exceeds " + shape_str(image->shape));
    }
    auto out = Tensor::zeros({C, crop_h, crop_w});
    for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t y = 0; y < crop_h; ++y) {
            const float* src = image->data.data() + (c * H + y0 + y) * W + x0;
            std::copy(src, src + crop_w, out->data.begin() + (c * crop_h + y) * crop_w);
        }
    }
    return out;
}

}  // namespace psnet
