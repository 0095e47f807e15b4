#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "psnet/ops.hpp"
#include "psnet/tensor.hpp"

namespace psnet {

struct LossWeights {
    double lambda = 1.0;
    double epsilon = 1e-6;

    void validate() const {
        if (!(epsilon > 0.0)) {
            throw std::invalid_argument("loss weights: epsilon must be positive");
        }
        if (lambda < 0.0) {
            throw std::invalid_argument("loss weights: lambda must be non-negative");
        }
    }
};

// Value-level snapshot of the attention vectors of a batch, indexed
// [image][psm][branch]. Vector length is fixed within one image but may
// differ across images (whole-image evaluation feeds variable sizes).
struct AttentionRecord {
    std::vector<std::vector<std::vector<std::vector<double>>>> vectors;

    void validate() const {
        if (vectors.empty()) {
            throw std::invalid_argument("attention record: no images");
        }
        const std::size_t K = vectors[0].size();
        if (K == 0) {
            throw std::invalid_argument("attention record: no attention groups");
        }
        const std::size_t S = vectors[0][0].size();
        if (S < 2) {
            throw std::invalid_argument("attention record: need at least two branches");
        }
        for (std::size_t n = 0; n < vectors.size(); ++n) {
            if (vectors[n].size() != K) {
                throw std::invalid_argument("attention record: image " + std::to_string(n) +
                                            " has inconsistent group count");
            }
            const std::size_t m = vectors[n][0].empty() ? 0 : vectors[n][0][0].size();
            for (std::size_t k = 0; k < K; ++k) {
                if (vectors[n][k].size() != S) {
                    throw std::invalid_argument("attention record: image " + std::to_string(n) +
                                                " has inconsistent branch count");
                }
                for (std::size_t s = 0; s < S; ++s) {
                    const auto& v = vectors[n][k][s];
                    if (v.empty() || v.size() != m) {
                        throw std::invalid_argument("attention record: image " + std::to_string(n) +
                                                    " has inconsistent vector lengths");
                    }
                    for (double e : v) {
                        if (e < 0.0) {
                            throw std::invalid_argument("attention record: image " + std::to_string(n) +
                                                        " holds a negative entry");
                        }
                    }
                }
            }
        }
    }
};

// Spatial signature of one branch output: average over channels, flattened
// row-major. Differentiable.
template <class S>
TensorPtrT<S> attention_vector(const TensorPtrT<S>& branch_output) {
    return flatten(channel_mean(branch_output));
}

template <class S>
TensorPtrT<S> attention_sum(const std::vector<TensorPtrT<S>>& vectors) {
    if (vectors.empty()) {
        throw std::invalid_argument("attention_sum: no vectors");
    }
    for (const auto& v : vectors) {
        if (v->shape != vectors[0]->shape) {
            throw std::invalid_argument("attention_sum: vector length mismatch " + shape_str(v->shape) +
                                        " vs " + shape_str(vectors[0]->shape));
        }
    }
    auto acc = vectors[0];
    for (std::size_t i = 1; i < vectors.size(); ++i) {
        acc = add(acc, vectors[i]);
    }
    return acc;
}

namespace detail {

// cos-style term of the variance loss: <v, m> / max(|v|*|m|, eps). Composed
// from graph ops so gradients flow through both v and the leave-one-out mean.
// A zero vector yields numerator 0 over eps, and max_scalar blocks gradient
// through the guarded denominator, so the term is well-defined everywhere.
template <class S>
TensorPtrT<S> cosine_term(const TensorPtrT<S>& v, const TensorPtrT<S>& m, double epsilon) {
    auto numerator = dot(v, m);
    auto denominator = max_scalar(mul(l2_norm(v), l2_norm(m)), static_cast<S>(epsilon));
    return divide(numerator, denominator);
}

}  // namespace detail

// Multi-column variance loss over attention vectors indexed [image][psm][branch]:
// mean cosine similarity between each branch vector and the mean of the
// remaining branches. Lands in [0, 1] for non-negative vectors; higher means
// the branches are more redundant.
template <class S>
TensorPtrT<S> variance_loss(const std::vector<std::vector<std::vector<TensorPtrT<S>>>>& vectors,
                            double epsilon = 1e-6) {
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("variance_loss: epsilon must be positive");
    }
    if (vectors.empty() || vectors[0].empty()) {
        throw std::invalid_argument("variance_loss: empty record");
    }
    const std::size_t K = vectors[0].size();
    const std::size_t B = vectors[0][0].size();
    if (B < 2) {
        throw std::invalid_argument("variance_loss: need at least two branches");
    }

    TensorPtrT<S> acc;
    for (std::size_t n = 0; n < vectors.size(); ++n) {
        if (vectors[n].size() != K) {
            throw std::invalid_argument("variance_loss: image " + std::to_string(n) +
                                        " has inconsistent group count");
        }
        for (std::size_t k = 0; k < K; ++k) {
            const auto& group = vectors[n][k];
            if (group.size() != B) {
                throw std::invalid_argument("variance_loss: image " + std::to_string(n) +
                                            " has inconsistent branch count");
            }
            auto total = attention_sum(group);
            for (std::size_t s = 0; s < B; ++s) {
                auto rest_mean = mul_scalar(sub(total, group[s]), static_cast<S>(1.0 / static_cast<double>(B - 1)));
                auto term = detail::cosine_term(group[s], rest_mean, epsilon);
                acc = acc ? add(acc, term) : term;
            }
        }
    }
    const double scale = 1.0 / (static_cast<double>(vectors.size()) * static_cast<double>(K) *
                                static_cast<double>(B));
    return mul_scalar(acc, static_cast<S>(scale));
}

// Value-level twin of variance_loss for diagnostics over recorded vectors.
inline double variance_loss_value(const AttentionRecord& record, double epsilon = 1e-6) {
    record.validate();
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("variance_loss_value: epsilon must be positive");
    }
    const std::size_t K = record.vectors[0].size();
    const std::size_t B = record.vectors[0][0].size();
    double acc = 0.0;
    for (const auto& image : record.vectors) {
        for (const auto& group : image) {
            const std::size_t m = group[0].size();
            std::vector<double> total(m, 0.0);
            for (const auto& v : group) {
                for (std::size_t i = 0; i < m; ++i) {
                    total[i] += v[i];
                }
            }
            for (const auto& v : group) {
                double num = 0.0, nv = 0.0, nm = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double rest = (total[i] - v[i]) / static_cast<double>(B - 1);
                    num += v[i] * rest;
                    nv += v[i] * v[i];
                    nm += rest * rest;
                }
                acc += num / std::max(std::sqrt(nv) * std::sqrt(nm), epsilon);
            }
        }
    }
    return acc / (static_cast<double>(record.vectors.size()) * static_cast<double>(K) * static_cast<double>(B));
}

// Sum of squared per-pixel differences for one sample (no per-pixel mean).
template <class S>
TensorPtrT<S> squared_error_sum(const TensorPtrT<S>& pred, const TensorPtrT<S>& gt) {
    if (pred->shape != gt->shape) {
        throw std::invalid_argument("squared_error_sum: shape mismatch " + shape_str(pred->shape) + " vs " +
                                    shape_str(gt->shape));
    }
    auto diff = sub(pred, gt);
    return sum_all(mul(diff, diff));
}

// Pixel-level Euclidean loss: mean over the batch of per-sample squared
// error sums.
template <class S>
TensorPtrT<S> euclidean_loss(const std::vector<TensorPtrT<S>>& preds, const std::vector<TensorPtrT<S>>& gts) {
    if (preds.empty() || preds.size() != gts.size()) {
        throw std::invalid_argument("euclidean_loss: need matching non-empty prediction and target lists");
    }
    TensorPtrT<S> acc;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        auto term = squared_error_sum(preds[i], gts[i]);
        acc = acc ? add(acc, term) : term;
    }
    return mul_scalar(acc, static_cast<S>(1.0 / static_cast<double>(preds.size())));
}

template <class S>
TensorPtrT<S> total_loss(const TensorPtrT<S>& l_e, const TensorPtrT<S>& l_m, double lambda) {
    return add(l_e, mul_scalar(l_m, static_cast<S>(lambda)));
}

}  // namespace psnet
