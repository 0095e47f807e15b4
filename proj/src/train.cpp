#include "psnet/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "psnet/adam.hpp"
#include "psnet/checkpoint.hpp"
#include "psnet/losses.hpp"

namespace psnet {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& ctx, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) {
        throw std::invalid_argument("run config: " + ctx + " must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* a : allowed) {
            if (key == a) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw std::invalid_argument("run config: unknown key '" + key + "' in " + ctx);
        }
    }
}

std::string epoch_name(std::int64_t epoch) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "epoch_%03lld.ckpt", static_cast<long long>(epoch));
    return buf;
}

}  // namespace

void GtConfig::validate() const {
    if (mode != "fixed" && mode != "adaptive") {
        throw std::invalid_argument("gt config: mode must be 'fixed' or 'adaptive', got '" + mode + "'");
    }
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("gt config: sigma must be positive");
    }
    if (k < 1) {
        throw std::invalid_argument("gt config: k must be at least 1");
    }
    if (!(beta > 0.0)) {
        throw std::invalid_argument("gt config: beta must be positive");
    }
}

void RunConfig::validate() const {
    model.validate();
    augment.validate();
    gt.validate();
    if (lambda < 0.0 || !std::isfinite(lambda)) {
        throw std::invalid_argument("run config: lambda must be non-negative");
    }
    // lr = 0 is allowed: it freezes the parameters, which is useful as a
    // diagnostic baseline.
    if (lr < 0.0 || !std::isfinite(lr)) {
        throw std::invalid_argument("run config: lr must be non-negative");
    }
    if (batch_size < 1) {
        throw std::invalid_argument("run config: batch_size must be positive");
    }
    if (epochs < 1) {
        throw std::invalid_argument("run config: epochs must be positive");
    }
}

DensityMap make_ground_truth(const PointSet& points, const GtConfig& gt) {
    gt.validate();
    if (gt.mode == "fixed") {
        return fixed_kernel_density(points, gt.sigma);
    }
    return adaptive_kernel_density(points, gt.k, gt.beta, gt.sigma);
}

RunConfig run_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("run config: ") + e.what());
    }
    check_keys(j, "top level", {"model", "augment", "lambda", "lr", "batch_size", "epochs", "seed", "gt"});

    RunConfig run;
    try {
        if (j.contains("model")) {
            const auto& m = j["model"];
            check_keys(m, "model", {"base_width", "psm_count", "branch_kernels", "reduction_ratio", "variant"});
            run.model.base_width = m.value("base_width", run.model.base_width);
            run.model.psm_count = m.value("psm_count", run.model.psm_count);
            run.model.reduction_ratio = m.value("reduction_ratio", run.model.reduction_ratio);
            if (m.contains("branch_kernels")) {
                run.model.branch_kernels = m["branch_kernels"].get<std::vector<std::int64_t>>();
            }
            if (m.contains("variant")) {
                const auto& v = m["variant"];
                check_keys(v, "variant", {"message_passing", "gam", "use_dilation"});
                run.model.variant.message_passing = v.value("message_passing", run.model.variant.message_passing);
                run.model.variant.gam = v.value("gam", run.model.variant.gam);
                run.model.variant.use_dilation = v.value("use_dilation", run.model.variant.use_dilation);
            }
        }
        if (j.contains("augment")) {
            const auto& a = j["augment"];
            check_keys(a, "augment", {"scale_lo", "scale_hi", "crop_size", "mirror_prob", "gamma_lo", "gamma_hi",
                                      "gamma_prob", "gray_prob"});
            run.augment.scale_lo = a.value("scale_lo", run.augment.scale_lo);
            run.augment.scale_hi = a.value("scale_hi", run.augment.scale_hi);
            run.augment.crop_size = a.value("crop_size", run.augment.crop_size);
            run.augment.mirror_prob = a.value("mirror_prob", run.augment.mirror_prob);
            run.augment.gamma_lo = a.value("gamma_lo", run.augment.gamma_lo);
            run.augment.gamma_hi = a.value("gamma_hi", run.augment.gamma_hi);
            run.augment.gamma_prob = a.value("gamma_prob", run.augment.gamma_prob);
            run.augment.gray_prob = a.value("gray_prob", run.augment.gray_prob);
        }
        if (j.contains("gt")) {
            const auto& g = j["gt"];
            check_keys(g, "gt", {"mode", "sigma", "k", "beta"});
            run.gt.mode = g.value("mode", run.gt.mode);
            run.gt.sigma = g.value("sigma", run.gt.sigma);
            run.gt.k = g.value("k", run.gt.k);
            run.gt.beta = g.value("beta", run.gt.beta);
        }
        run.lambda = j.value("lambda", run.lambda);
        run.lr = j.value("lr", run.lr);
        run.batch_size = j.value("batch_size", run.batch_size);
        run.epochs = j.value("epochs", run.epochs);
        run.seed = j.value("seed", run.seed);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("run config: ") + e.what());
    }
    run.validate();
    return run;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("run config: cannot open " + path);
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return run_config_from_json(text);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string(e.what()) + " (" + path + ")");
    }
}

std::string run_config_to_json(const RunConfig& run) {
    json j;
    j["model"] = {{"base_width", run.model.base_width},
                  {"psm_count", run.model.psm_count},
                  {"branch_kernels", run.model.branch_kernels},
                  {"reduction_ratio", run.model.reduction_ratio},
                  {"variant",
                   {{"message_passing", run.model.variant.message_passing},
                    {"gam", run.model.variant.gam},
                    {"use_dilation", run.model.variant.use_dilation}}}};
    j["augment"] = {{"scale_lo", run.augment.scale_lo},     {"scale_hi", run.augment.scale_hi},
                    {"crop_size", run.augment.crop_size},   {"mirror_prob", run.augment.mirror_prob},
                    {"gamma_lo", run.augment.gamma_lo},     {"gamma_hi", run.augment.gamma_hi},
                    {"gamma_prob", run.augment.gamma_prob}, {"gray_prob", run.augment.gray_prob}};
    j["gt"] = {{"mode", run.gt.mode}, {"sigma", run.gt.sigma}, {"k", run.gt.k}, {"beta", run.gt.beta}};
    j["lambda"] = run.lambda;
    j["lr"] = run.lr;
    j["batch_size"] = run.batch_size;
    j["epochs"] = run.epochs;
    j["seed"] = run.seed;
    return j.dump(2) + "\n";
}

TrainResult train(const RunConfig& run, const DatasetManifest& manifest, const std::string& out_dir) {
    run.validate();
    if (manifest.entries.empty()) {
        throw std::invalid_argument("train: manifest is empty");
    }

    const std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out);
    {
        std::ofstream cfg(out / "run_config.json");
        cfg << run_config_to_json(run);
    }
    std::ofstream log(out / "train_log.jsonl");
    if (!log) {
        throw std::runtime_error("train: cannot open " + (out / "train_log.jsonl").string());
    }

    SeededRng rng(run.seed);
    auto model = build_model<float>(run.model, rng);
    auto params = model.params();
    AdamConfig adam_cfg;
    adam_cfg.lr = run.lr;
    Adam adam(params, adam_cfg);

    const auto t0 = std::chrono::steady_clock::now();
    const std::int64_t n = static_cast<std::int64_t>(manifest.entries.size());
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    std::uint64_t aug_counter = 0;

    for (std::int64_t epoch = 1; epoch <= run.epochs; ++epoch) {
        // Fisher-Yates over the sample order, driven by the run seed.
        for (std::int64_t i = n - 1; i > 0; --i) {
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(rng.uniform_int(0, i))]);
        }

        for (std::int64_t start = 0; start < n; start += run.batch_size) {
            const std::int64_t bsz = std::min(run.batch_size, n - start);
            ++result.steps;

            std::vector<TensorPtr> preds, gts;
            std::vector<std::vector<std::vector<TensorPtr>>> vectors;
            preds.reserve(static_cast<std::size_t>(bsz));
            for (std::int64_t b = 0; b < bsz; ++b) {
                auto sample = load_sample(manifest, static_cast<std::size_t>(order[static_cast<std::size_t>(start + b)]));
                auto sample_rng = rng.split(aug_counter++);
                auto aug = augment(sample, run.augment, sample_rng);
                auto gt_map = make_ground_truth(aug.points, run.gt);
                gts.push_back(density_to_tensor(sum_pool_downsample(gt_map, 8)));

                auto fwd = psnet_forward(aug.image, model);
                preds.push_back(fwd.density);
                std::vector<std::vector<TensorPtr>> per_image;
                for (const auto& per_psm : fwd.branch_outputs) {
                    std::vector<TensorPtr> group;
                    group.reserve(per_psm.size());
                    for (const auto& branch : per_psm) {
                        group.push_back(attention_vector(branch));
                    }
                    per_image.push_back(std::move(group));
                }
                vectors.push_back(std::move(per_image));
            }

            auto l_e = euclidean_loss(preds, gts);
            auto l_m = variance_loss(vectors);
            auto l = total_loss(l_e, l_m, run.lambda);

            result.final_l = static_cast<double>(l->item());
            result.final_l_e = static_cast<double>(l_e->item());
            result.final_l_m = static_cast<double>(l_m->item());
            if (!std::isfinite(result.final_l)) {
                throw std::runtime_error("train: non-finite loss at step " + std::to_string(result.steps) +
                                         " (l_e=" + std::to_string(result.final_l_e) +
                                         ", l_m=" + std::to_string(result.final_l_m) + ")");
            }

            l->backward();
            adam.step();
            for (auto& p : params) {
                p->zero_grad();
            }

            const auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                     std::chrono::steady_clock::now() - t0)
                                     .count();
            log << json{{"step", result.steps},
                        {"l_e", result.final_l_e},
                        {"l_m", result.final_l_m},
                        {"l", result.final_l},
                        {"wall_ms", wall_ms}}
                       .dump()
                << "\n";
        }
        save_checkpoint(model, (out / epoch_name(epoch)).string());
    }

    result.final_checkpoint = (out / "final.ckpt").string();
    save_checkpoint(model, result.final_checkpoint);
    log.close();
    return result;
}

}  // namespace psnet
