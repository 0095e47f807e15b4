#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "psnet/ops.hpp"
#include "psnet/rng.hpp"
#include "psnet/tensor.hpp"

namespace psnet {

// Ablation switches, named after the incremental variants: Baseline
// (false,false), Baseline-FPM (message passing only), Baseline-PSM /
// full model (message passing + attention), with use_dilation swapping the
// large branch kernels for dilated 3x3s of equal receptive field.
struct Variant {
    bool message_passing = true;
    bool gam = true;
    bool use_dilation = false;
};

struct ModelConfig {
    std::int64_t base_width = 64;  // 64 reproduces the full VGG widths
    std::int64_t psm_count = 3;
    std::vector<std::int64_t> branch_kernels = {3, 5, 7, 9};
    std::int64_t reduction_ratio = 16;
    Variant variant;

    // Channels entering a PSM: the backbone's final block is 8x base_width.
    std::int64_t psm_channels() const { return 8 * base_width; }

    void validate() const {
        if (base_width <= 0 || psm_count <= 0 || reduction_ratio <= 0) {
            throw std::invalid_argument("model config: base_width, psm_count, reduction_ratio must be positive");
        }
        if (branch_kernels.size() < 2) {
            throw std::invalid_argument("model config: need at least two branch kernels");
        }
        for (std::size_t i = 0; i < branch_kernels.size(); ++i) {
            if (branch_kernels[i] % 2 == 0 || branch_kernels[i] <= 0) {
                throw std::invalid_argument("model config: branch kernels must be odd and positive");
            }
            if (i > 0 && branch_kernels[i] <= branch_kernels[i - 1]) {
                throw std::invalid_argument("model config: branch kernels must be strictly increasing");
            }
        }
        const std::int64_t c = psm_channels();
        if (c % 4 != 0) {
            throw std::invalid_argument("model config: PSM input channels must be divisible by 4");
        }
        if (c % reduction_ratio != 0) {
            throw std::invalid_argument("model config: PSM input channels (" + std::to_string(c) +
                                        ") must be divisible by reduction_ratio (" +
                                        std::to_string(reduction_ratio) + ")");
        }
    }
};

template <class S>
struct ConvLayerT {
    TensorPtrT<S> weight;  // C_out x C_in x k x k
    TensorPtrT<S> bias;    // C_out
    std::int64_t stride = 1;
    std::int64_t padding = 0;
    std::int64_t dilation = 1;

    TensorPtrT<S> operator()(const TensorPtrT<S>& x) const {
        return conv2d(x, weight, bias, stride, padding, dilation);
    }
};

template <class S>
struct GamT {
    ConvLayerT<S> squeeze;  // 1x1, C -> C/r
    ConvLayerT<S> excite;   // 1x1, C/r -> C
};

template <class S>
struct BranchT {
    ConvLayerT<S> reduce;  // 1x1, C -> C/4
    ConvLayerT<S> conv;    // kxk (or dilated 3x3), C/4 -> C/4
};

template <class S>
struct PsmT {
    GamT<S> gam;                           // used when variant.gam
    std::vector<BranchT<S>> branches;      // one per kernel size
    std::vector<ConvLayerT<S>> message;    // branches-1 convs, used when message_passing
    ConvLayerT<S> fusion;                  // 3x3, B*(C/4) -> C
};

template <class S>
struct PsnetModelT {
    ModelConfig config;
    std::vector<ConvLayerT<S>> backbone;  // 10 convs; pools sit after 2, 4, 7
    std::vector<PsmT<S>> psms;
    std::vector<ConvLayerT<S>> head;      // 3 relu convs + linear 1x1

    std::vector<std::pair<std::string, TensorPtrT<S>>> named_params() const {
        std::vector<std::pair<std::string, TensorPtrT<S>>> out;
        auto add = [&out](const std::string& name, const ConvLayerT<S>& layer) {
            out.emplace_back(name + ".weight", layer.weight);
            out.emplace_back(name + ".bias", layer.bias);
        };
        for (std::size_t i = 0; i < backbone.size(); ++i) {
            add("backbone." + std::to_string(i), backbone[i]);
        }
        for (std::size_t k = 0; k < psms.size(); ++k) {
            const std::string p = "psm." + std::to_string(k);
            if (config.variant.gam) {
                add(p + ".gam.squeeze", psms[k].gam.squeeze);
                add(p + ".gam.excite", psms[k].gam.excite);
            }
            for (std::size_t b = 0; b < psms[k].branches.size(); ++b) {
                add(p + ".branch." + std::to_string(b) + ".reduce", psms[k].branches[b].reduce);
                add(p + ".branch." + std::to_string(b) + ".conv", psms[k].branches[b].conv);
            }
            for (std::size_t m = 0; m < psms[k].message.size(); ++m) {
                add(p + ".message." + std::to_string(m), psms[k].message[m]);
            }
            add(p + ".fusion", psms[k].fusion);
        }
        for (std::size_t i = 0; i < head.size(); ++i) {
            add("head." + std::to_string(i), head[i]);
        }
        return out;
    }

    std::vector<TensorPtrT<S>> params() const {
        std::vector<TensorPtrT<S>> out;
        for (auto& [name, t] : named_params()) {
            out.push_back(t);
        }
        return out;
    }

    std::int64_t param_count() const {
        std::int64_t n = 0;
        for (const auto& t : params()) {
            n += t->numel();
        }
        return n;
    }
};

// All weights are drawn from the rng in declaration order as doubles and then
// narrowed, so float and double instantiations of the same seed describe the
// same network.
template <class S>
PsnetModelT<S> build_model(const ModelConfig& config, SeededRng& rng) {
    config.validate();
    PsnetModelT<S> model;
    model.config = config;

    auto make_conv = [&rng](std::int64_t c_in, std::int64_t c_out, std::int64_t k, std::int64_t dilation,
                            double std_dev) {
        ConvLayerT<S> layer;
        layer.weight = TensorT<S>::zeros({c_out, c_in, k, k}, true);
        for (auto& v : layer.weight->data) {
            v = static_cast<S>(rng.normal(0.0, std_dev));
        }
        layer.bias = TensorT<S>::zeros({c_out}, true);
        layer.dilation = dilation;
        layer.padding = dilation * (k - 1) / 2;  // keeps H and W fixed
        return layer;
    };
    // Backbone convs get fan-in-scaled noise (there is no pretraining here);
    // everything after the backbone uses the narrow 0.01 band.
    auto he_conv = [&](std::int64_t c_in, std::int64_t c_out, std::int64_t k) {
        return make_conv(c_in, c_out, k, 1, std::sqrt(2.0 / static_cast<double>(c_in * k * k)));
    };

    const std::int64_t bw = config.base_width;
    const std::int64_t widths[10] = {bw, bw, 2 * bw, 2 * bw, 4 * bw, 4 * bw, 4 * bw, 8 * bw, 8 * bw, 8 * bw};
    std::int64_t c_in = 3;
    for (std::int64_t i = 0; i < 10; ++i) {
        model.backbone.push_back(he_conv(c_in, widths[i], 3));
        c_in = widths[i];
    }

    const std::int64_t C = config.psm_channels();
    const std::int64_t Cb = C / 4;  // per-branch width
    const std::int64_t B = static_cast<std::int64_t>(config.branch_kernels.size());
    for (std::int64_t k = 0; k < config.psm_count; ++k) {
        PsmT<S> psm;
        if (config.variant.gam) {
            psm.gam.squeeze = make_conv(C, C / config.reduction_ratio, 1, 1, 0.01);
            psm.gam.excite = make_conv(C / config.reduction_ratio, C, 1, 1, 0.01);
        }
        for (std::int64_t b = 0; b < B; ++b) {
            BranchT<S> branch;
            branch.reduce = make_conv(C, Cb, 1, 1, 0.01);
            const std::int64_t kernel = config.branch_kernels[static_cast<std::size_t>(b)];
            if (config.variant.use_dilation && kernel > 3) {
                branch.conv = make_conv(Cb, Cb, 3, (kernel - 1) / 2, 0.01);
            } else {
                branch.conv = make_conv(Cb, Cb, kernel, 1, 0.01);
            }
            psm.branches.push_back(std::move(branch));
        }
        if (config.variant.message_passing) {
            for (std::int64_t b = 1; b < B; ++b) {
                psm.message.push_back(make_conv(2 * Cb, Cb, 3, 1, 0.01));
            }
        }
        psm.fusion = make_conv(B * Cb, C, 3, 1, 0.01);
        model.psms.push_back(std::move(psm));
    }

    model.head.push_back(make_conv(C, 4 * bw, 3, 1, 0.01));
    model.head.push_back(make_conv(4 * bw, 2 * bw, 3, 1, 0.01));
    model.head.push_back(make_conv(2 * bw, bw, 3, 1, 0.01));
    model.head.push_back(make_conv(bw, 1, 1, 1, 0.01));
    return model;
}

// Channel gate from the squeeze-excite pair: pooled context through a
// bottleneck, sigmoid keeps every gate in (0,1).
template <class S>
TensorPtrT<S> gam_forward(const TensorPtrT<S>& f_in, const GamT<S>& gam) {
    auto pooled = global_avg_pool(f_in);
    return sigmoid(gam.excite(relu(gam.squeeze(pooled))));
}

template <class S>
struct FpmResultT {
    TensorPtrT<S> fused;
    std::vector<TensorPtrT<S>> branch_outputs;  // final per-branch outputs
};

template <class S>
FpmResultT<S> fpm_forward(const TensorPtrT<S>& f_in, const PsmT<S>& psm, const Variant& variant) {
    const std::size_t B = psm.branches.size();
    std::vector<TensorPtrT<S>> raw;
    raw.reserve(B);
    for (const auto& branch : psm.branches) {
        raw.push_back(relu(branch.conv(relu(branch.reduce(f_in)))));
    }

    std::vector<TensorPtrT<S>> outs;
    outs.reserve(B);
    if (variant.message_passing) {
        outs.push_back(raw[0]);
        for (std::size_t b = 1; b < B; ++b) {
            outs.push_back(relu(psm.message[b - 1](concat_channels<S>({raw[b], outs[b - 1]}))));
        }
    } else {
        outs = raw;
    }

    FpmResultT<S> result;
    result.fused = relu(psm.fusion(concat_channels<S>(outs)));
    result.branch_outputs = std::move(outs);
    return result;
}

template <class S>
struct PsmResultT {
    TensorPtrT<S> f_out;
    std::vector<TensorPtrT<S>> branch_outputs;
};

template <class S>
PsmResultT<S> psm_forward(const TensorPtrT<S>& f_in, const PsmT<S>& psm, const Variant& variant) {
    auto fpm = fpm_forward(f_in, psm, variant);
    PsmResultT<S> result;
    result.branch_outputs = std::move(fpm.branch_outputs);
    if (variant.gam) {
        result.f_out = mul(fpm.fused, gam_forward(f_in, psm.gam));
    } else {
        result.f_out = fpm.fused;
    }
    return result;
}

template <class S>
struct ForwardResultT {
    TensorPtrT<S> density;                                      // 1 x H/8 x W/8
    std::vector<std::vector<TensorPtrT<S>>> branch_outputs;     // [psm][branch]
};

template <class S>
ForwardResultT<S> psnet_forward(const TensorPtrT<S>& image, const PsnetModelT<S>& model) {
    if (image->shape.size() != 3 || image->shape[0] != 3) {
        throw std::invalid_argument("psnet_forward: input must be 3xHxW, got " + shape_str(image->shape));
    }
    if (image->shape[1] % 8 != 0 || image->shape[2] % 8 != 0) {
        throw std::invalid_argument("psnet_forward: spatial size " + std::to_string(image->shape[1]) + "x" +
                                    std::to_string(image->shape[2]) + " must be divisible by 8");
    }

    auto x = image;
    for (std::size_t i = 0; i < model.backbone.size(); ++i) {
        x = relu(model.backbone[i](x));
        if (i == 1 || i == 3 || i == 6) {
            x = maxpool2(x);
        }
    }

    ForwardResultT<S> result;
    for (const auto& psm : model.psms) {
        auto r = psm_forward(x, psm, model.config.variant);
        x = r.f_out;
        result.branch_outputs.push_back(std::move(r.branch_outputs));
    }

    x = relu(model.head[0](x));
    x = relu(model.head[1](x));
    x = relu(model.head[2](x));
    result.density = model.head[3](x);
    return result;
}

// Number of distinct convolution paths from the PSM input to a branch's
// final output, computed over the module's structural DAG. Nodes: the input,
// each branch's raw conv-chain output, each branch's final output. Edges:
// input -> raw_b (the reduce+conv chain), raw_b -> out_b, and with message
// passing out_{b-1} -> out_b.
inline std::int64_t count_paths(const ModelConfig& config, std::int64_t psm_index, std::int64_t branch_index) {
    config.validate();
    const std::int64_t B = static_cast<std::int64_t>(config.branch_kernels.size());
    if (psm_index < 0 || psm_index >= config.psm_count) {
        throw std::out_of_range("count_paths: psm_index " + std::to_string(psm_index) + " out of range");
    }
    if (branch_index < 0 || branch_index >= B) {
        throw std::out_of_range("count_paths: branch_index " + std::to_string(branch_index) + " out of range");
    }

    const std::int64_t input = 0;
    auto raw_node = [](std::int64_t b) { return 1 + b; };
    auto out_node = [B](std::int64_t b) { return 1 + B + b; };
    std::vector<std::vector<std::int64_t>> preds(static_cast<std::size_t>(1 + 2 * B));
    for (std::int64_t b = 0; b < B; ++b) {
        preds[static_cast<std::size_t>(raw_node(b))] = {input};
        if (config.variant.message_passing && b > 0) {
            preds[static_cast<std::size_t>(out_node(b))] = {raw_node(b), out_node(b - 1)};
        } else {
            preds[static_cast<std::size_t>(out_node(b))] = {raw_node(b)};
        }
    }

    // Path counts accumulate in topological order (raw_b before out_b,
    // out_{b-1} before out_b, which index order already provides).
    std::vector<std::int64_t> paths(preds.size(), 0);
    paths[static_cast<std::size_t>(input)] = 1;
    for (std::size_t n = 1; n < preds.size(); ++n) {
        for (std::int64_t p : preds[n]) {
            paths[n] += paths[static_cast<std::size_t>(p)];
        }
    }
    return paths[static_cast<std::size_t>(out_node(branch_index))];
}

template <class S>
std::int64_t count_paths(const PsnetModelT<S>& model, std::int64_t psm_index, std::int64_t branch_index) {
    return count_paths(model.config, psm_index, branch_index);
}

using PsnetModel = PsnetModelT<float>;
using ForwardResult = ForwardResultT<float>;

}  // namespace psnet
