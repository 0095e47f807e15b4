#include "psnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "psnet/image.hpp"
#include "psnet/losses.hpp"

namespace psnet {

namespace {

TensorPtr pad_to_multiple_of_8(const TensorPtr& image) {
    const std::int64_t H = image->shape[1], W = image->shape[2];
    const std::int64_t pb = (8 - H % 8) % 8;
    const std::int64_t pr = (8 - W % 8) % 8;
    if (pb == 0 && pr == 0) {
        return image;
    }
    return reflect_pad(image, 0, pb, 0, pr);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b, double epsilon) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::max(std::sqrt(na) * std::sqrt(nb), epsilon);
}

}  // namespace

CountMetrics count_metrics(const std::vector<EvalImage>& per_image) {
    if (per_image.empty()) {
        throw std::invalid_argument("count_metrics: no images");
    }
    double abs_sum = 0.0, sq_sum = 0.0;
    for (const auto& img : per_image) {
        const double err = img.predicted - img.ground_truth;
        abs_sum += std::abs(err);
        sq_sum += err * err;
    }
    const double n = static_cast<double>(per_image.size());
    return {abs_sum / n, std::sqrt(sq_sum / n)};
}

DensityMap predict_density(const PsnetModel& model, const TensorPtr& image) {
    NoGradGuard no_grad;
    auto out = psnet_forward(pad_to_multiple_of_8(image), model);
    DensityMap map;
    map.height = out.density->shape[1];
    map.width = out.density->shape[2];
    map.values.reserve(out.density->data.size());
    for (float v : out.density->data) {
        map.values.push_back(static_cast<double>(v));
    }
    return map;
}

EvalReport evaluate(const PsnetModel& model, const DatasetManifest& manifest, double epsilon) {
    if (manifest.entries.empty()) {
        throw std::invalid_argument("evaluate: manifest is empty");
    }
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("evaluate: epsilon must be positive");
    }
    NoGradGuard no_grad;

    const std::size_t K = static_cast<std::size_t>(model.config.psm_count);
    const std::size_t S = model.config.branch_kernels.size();

    EvalReport report;
    report.pairwise_similarity.assign(K, std::vector<std::vector<double>>(S, std::vector<double>(S, 0.0)));

    double vl_sum = 0.0;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        auto sample = load_sample(manifest, i);
        auto fwd = psnet_forward(pad_to_multiple_of_8(sample.image), model);

        double count = 0.0;
        for (float v : fwd.density->data) {
            count += static_cast<double>(v);
        }
        const double gt_count = static_cast<double>(sample.points.points.size());
        report.per_image.push_back({count, gt_count});

        // Attention vectors, one group per PSM.
        std::vector<std::vector<std::vector<double>>> groups(K);
        for (std::size_t k = 0; k < K; ++k) {
            for (const auto& branch : fwd.branch_outputs[k]) {
                auto v = attention_vector(branch);
                std::vector<double> values(v->data.begin(), v->data.end());
                groups[k].push_back(std::move(values));
            }
        }
        AttentionRecord record;
        record.vectors = {groups};
        vl_sum += variance_loss_value(record, epsilon);

        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t a = 0; a < S; ++a) {
                report.pairwise_similarity[k][a][a] += 1.0;
                for (std::size_t b = a + 1; b < S; ++b) {
                    const double c = cosine(groups[k][a], groups[k][b], epsilon);
                    report.pairwise_similarity[k][a][b] += c;
                    report.pairwise_similarity[k][b][a] += c;
                }
            }
        }
    }

    const double n = static_cast<double>(manifest.entries.size());
    const auto metrics = count_metrics(report.per_image);
    report.mae = metrics.mae;
    report.rmse = metrics.rmse;
    report.mean_variance_loss = vl_sum / n;
    for (auto& psm : report.pairwise_similarity) {
        for (auto& row : psm) {
            for (auto& v : row) {
                v /= n;
            }
        }
    }
    return report;
}

std::vector<std::vector<std::vector<double>>> similarity_report(const PsnetModel& model,
                                                                const DatasetManifest& manifest) {
    return evaluate(model, manifest).pairwise_similarity;
}

std::vector<ScaleGroup> scale_group_report(const EvalReport& report, std::int64_t n_groups) {
    const std::int64_t n = static_cast<std::int64_t>(report.per_image.size());
    if (n == 0) {
        throw std::invalid_argument("scale_group_report: empty report");
    }
    if (n_groups < 1 || n_groups > n) {
        throw std::invalid_argument("scale_group_report: n_groups must be in [1, " + std::to_string(n) +
                                    "], got " + std::to_string(n_groups));
    }

    std::vector<std::size_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return report.per_image[a].ground_truth < report.per_image[b].ground_truth;
    });

    const std::int64_t base = n / n_groups;  // remainder joins the last group
    std::vector<ScaleGroup> groups;
    std::int64_t cursor = 0;
    for (std::int64_t g = 0; g < n_groups; ++g) {
        const std::int64_t size = (g == n_groups - 1) ? n - cursor : base;
        ScaleGroup group;
        group.size = size;
        for (std::int64_t i = 0; i < size; ++i) {
            const auto& img = report.per_image[idx[static_cast<std::size_t>(cursor + i)]];
            group.mean_ground_truth += img.ground_truth;
            group.mean_predicted += img.predicted;
        }
        group.mean_ground_truth /= static_cast<double>(size);
        group.mean_predicted /= static_cast<double>(size);
        groups.push_back(group);
        cursor += size;
    }
    return groups;
}

std::string eval_report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["mae"] = report.mae;
    j["rmse"] = report.rmse;
    j["mean_variance_loss"] = report.mean_variance_loss;
    auto per_image = nlohmann::json::array();
    for (const auto& img : report.per_image) {
        per_image.push_back({img.predicted, img.ground_truth});
    }
    j["per_image"] = per_image;
    j["pairwise_similarity"] = report.pairwise_similarity;
    return j.dump(2) + "\n";
}

}  // namespace psnet
