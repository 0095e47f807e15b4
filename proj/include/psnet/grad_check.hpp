#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "psnet/rng.hpp"
#include "psnet/tensor.hpp"

namespace psnet {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t tensor_index = 0;  // which input tensor held the worst coordinate
    std::size_t coord = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

// Central-difference gradient verification. `build` must construct a fresh
// graph over `inputs` (reading their current data) and return a scalar loss.
// Relative error per coordinate: |a - n| / max(|a|, |n|, 1e-8).
//
// Runs every coordinate of every input; use sampled_grad_check when that is
// too many. Intended for S = double so the difference quotient has headroom.
template <class S, class BuildFn>
GradCheckReport grad_check(const std::vector<TensorPtrT<S>>& inputs, BuildFn&& build, S step = S(1e-3)) {
    for (const auto& t : inputs) {
        t->requires_grad = true;
        t->zero_grad();
    }
    {
        auto loss = build();
        loss->backward();
    }
    std::vector<std::vector<S>> analytic;
    analytic.reserve(inputs.size());
    for (const auto& t : inputs) {
        t->ensure_grad();
        analytic.push_back(t->grad);
    }

    GradCheckReport report;
    NoGradGuard no_grad;
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        auto& t = *inputs[ti];
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            const S saved = t.data[i];
            t.data[i] = saved + step;
            const S f_plus = build()->item();
            t.data[i] = saved - step;
            const S f_minus = build()->item();
            t.data[i] = saved;

            const double numeric = static_cast<double>(f_plus - f_minus) / (2.0 * static_cast<double>(step));
            const double a = static_cast<double>(analytic[ti][i]);
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
            if (rel > report.max_rel_error) {
                report = {rel, ti, i, a, numeric};
            }
        }
    }
    return report;
}

// Same check restricted to n_coords coordinates drawn without replacement
// from the concatenation of all inputs.
template <class S, class BuildFn>
GradCheckReport sampled_grad_check(const std::vector<TensorPtrT<S>>& inputs, BuildFn&& build, SeededRng& rng,
                                   std::int64_t n_coords, S step = S(1e-3)) {
    for (const auto& t : inputs) {
        t->requires_grad = true;
        t->zero_grad();
    }
    {
        auto loss = build();
        loss->backward();
    }
    std::vector<std::vector<S>> analytic;
    analytic.reserve(inputs.size());
    for (const auto& t : inputs) {
        t->ensure_grad();
        analytic.push_back(t->grad);
    }

    std::int64_t total = 0;
    for (const auto& t : inputs) {
        total += t->numel();
    }
    if (n_coords > total) {
        n_coords = total;
    }
    std::vector<std::int64_t> picks(static_cast<std::size_t>(total));
    for (std::int64_t i = 0; i < total; ++i) {
        picks[static_cast<std::size_t>(i)] = i;
    }
    // Partial Fisher-Yates: the first n_coords entries become the sample.
    for (std::int64_t i = 0; i < n_coords; ++i) {
        const std::int64_t j = rng.uniform_int(i, total - 1);
        std::swap(picks[static_cast<std::size_t>(i)], picks[static_cast<std::size_t>(j)]);
    }

    GradCheckReport report;
    NoGradGuard no_grad;
    for (std::int64_t s = 0; s < n_coords; ++s) {
        std::int64_t flat = picks[static_cast<std::size_t>(s)];
        std::size_t ti = 0;
        while (flat >= inputs[ti]->numel()) {
            flat -= inputs[ti]->numel();
            ++ti;
        }
        auto& t = *inputs[ti];
        const std::size_t i = static_cast<std::size_t>(flat);

        const S saved = t.data[i];
        t.data[i] = saved + step;
        const S f_plus = build()->item();
        t.data[i] = saved - step;
        const S f_minus = build()->item();
        t.data[i] = saved;

        const double numeric = static_cast<double>(f_plus - f_minus) / (2.0 * static_cast<double>(step));
        const double a = static_cast<double>(analytic[ti][i]);
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        if (rel > report.max_rel_error) {
            report = {rel, ti, i, a, numeric};
        }
    }
    return report;
}

}  // namespace psnet
