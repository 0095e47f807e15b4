#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "psnet/checkpoint.hpp"
#include "psnet/data.hpp"
#include "psnet/eval.hpp"
#include "psnet/image.hpp"
#include "psnet/train.hpp"

namespace {

void run_synth(const std::string& out, std::int64_t n, std::int64_t size, std::int64_t count_min,
               std::int64_t count_max, std::uint64_t seed) {
    psnet::SynthConfig cfg;
    cfg.n_images = n;
    cfg.image_size = size;
    cfg.count_lo = count_min;
    cfg.count_hi = count_max;
    cfg.seed = seed;
    auto manifest = psnet::synth_generate(out, cfg);
    std::cout << "wrote " << manifest.entries.size() << " images to " << out << "\n";
}

void run_gt(const std::string& manifest_path, const psnet::GtConfig& gt, const std::string& out) {
    auto manifest = psnet::load_manifest(manifest_path);
    std::filesystem::create_directories(out);
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        auto sample = psnet::load_sample(manifest, i);
        auto density = psnet::make_ground_truth(sample.points, gt);
        const auto stem = std::filesystem::path(manifest.entries[i].image).stem().string();
        psnet::write_dmap((std::filesystem::path(out) / (stem + ".dmap")).string(), density);
    }
    std::cout << "wrote " << manifest.entries.size() << " density maps to " << out << "\n";
}

void run_train(const std::string& manifest_path, const std::string& config_path, const std::string& out) {
    auto run = psnet::load_run_config(config_path);
    auto manifest = psnet::load_manifest(manifest_path);
    auto result = psnet::train(run, manifest, out);
    std::cout << "trained " << result.steps << " steps; final l=" << result.final_l
              << " (l_e=" << result.final_l_e << ", l_m=" << result.final_l_m << "); checkpoint "
              << result.final_checkpoint << "\n";
}

void run_eval(const std::string& checkpoint, const std::string& manifest_path, const std::string& report_path) {
    auto model = psnet::load_checkpoint(checkpoint);
    auto manifest = psnet::load_manifest(manifest_path);
    auto report = psnet::evaluate(model, manifest);
    std::printf("mae=%.4f rmse=%.4f mean_variance_loss=%.4f images=%zu\n", report.mae, report.rmse,
                report.mean_variance_loss, report.per_image.size());
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) {
            throw std::runtime_error("cannot open report file " + report_path);
        }
        out << psnet::eval_report_to_json(report);
    }
}

void run_predict(const std::string& checkpoint, const std::string& image_path, const std::string& out_path) {
    auto model = psnet::load_checkpoint(checkpoint);
    auto image = psnet::read_image(image_path);
    auto density = psnet::predict_density(model, image);
    psnet::write_dmap(out_path, density);
    psnet::write_density_pgm(out_path + ".pgm", density);
    std::printf("%.2f\n", density.sum());
}

void run_diagnose(const std::string& checkpoint, const std::string& manifest_path, std::int64_t groups) {
    auto model = psnet::load_checkpoint(checkpoint);
    auto manifest = psnet::load_manifest(manifest_path);
    auto report = psnet::evaluate(model, manifest);

    std::printf("mae=%.4f rmse=%.4f mean_variance_loss=%.4f images=%zu\n", report.mae, report.rmse,
                report.mean_variance_loss, report.per_image.size());
    for (std::size_t k = 0; k < report.pairwise_similarity.size(); ++k) {
        std::printf("psm %zu branch similarity:\n", k);
        for (const auto& row : report.pairwise_similarity[k]) {
            std::string line;
            for (double v : row) {
                char buf[16];
                std::snprintf(buf, sizeof(buf), " %7.4f", v);
                line += buf;
            }
            std::printf("%s\n", line.c_str());
        }
    }

    if (groups <= 0) {
        groups = std::min<std::int64_t>(5, static_cast<std::int64_t>(report.per_image.size()));
    }
    std::printf("scale groups (by ground-truth count):\n");
    std::printf("%8s %10s %10s\n", "size", "mean_gt", "mean_pred");
    for (const auto& g : psnet::scale_group_report(report, groups)) {
        std::printf("%8lld %10.3f %10.3f\n", static_cast<long long>(g.size), g.mean_ground_truth,
                    g.mean_predicted);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PSNet: pyramid-scale crowd density estimation"};
    app.require_subcommand(1);

    std::string synth_out;
    std::int64_t synth_n = 0, synth_size = 96, synth_cmin = 5, synth_cmax = 30;
    std::uint64_t synth_seed = 1;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic crowd dataset");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--n", synth_n, "Number of images")->required();
    synth->add_option("--size", synth_size, "Image side length (multiple of 8)");
    synth->add_option("--count-min", synth_cmin, "Minimum people per image");
    synth->add_option("--count-max", synth_cmax, "Maximum people per image");
    synth->add_option("--seed", synth_seed, "Random seed");

    std::string gt_manifest, gt_out;
    psnet::GtConfig gt_cfg;
    auto* gt = app.add_subcommand("gt", "Write ground-truth density maps for a manifest");
    gt->add_option("--manifest", gt_manifest, "Dataset manifest (JSON)")->required();
    gt->add_option("--mode", gt_cfg.mode, "Kernel mode: fixed|adaptive");
    gt->add_option("--sigma", gt_cfg.sigma, "Fixed kernel sigma / adaptive fallback");
    gt->add_option("--k", gt_cfg.k, "Adaptive: nearest neighbours");
    gt->add_option("--beta", gt_cfg.beta, "Adaptive: sigma scale factor");
    gt->add_option("--out", gt_out, "Output directory")->required();

    std::string train_manifest, train_config, train_out;
    auto* train = app.add_subcommand("train", "Train a model from scratch");
    train->add_option("--manifest", train_manifest, "Dataset manifest (JSON)")->required();
    train->add_option("--config", train_config, "Run config (JSON)")->required();
    train->add_option("--out", train_out, "Output directory")->required();

    std::string eval_checkpoint, eval_manifest, eval_report;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
    eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint manifest path")->required();
    eval->add_option("--manifest", eval_manifest, "Dataset manifest (JSON)")->required();
    eval->add_option("--report", eval_report, "Write the full JSON report here");

    std::string pred_checkpoint, pred_image, pred_out;
    auto* predict = app.add_subcommand("predict", "Predict a density map for one image");
    predict->add_option("--checkpoint", pred_checkpoint, "Checkpoint manifest path")->required();
    predict->add_option("--image", pred_image, "Input image (PPM/PGM)")->required();
    predict->add_option("--out", pred_out, "Output density map (DMAP; a PGM preview is written next to it)")
        ->required();

    std::string diag_checkpoint, diag_manifest;
    std::int64_t diag_groups = 0;
    auto* diagnose = app.add_subcommand("diagnose", "Branch-similarity and scale-group diagnostics");
    diagnose->add_option("--checkpoint", diag_checkpoint, "Checkpoint manifest path")->required();
    diagnose->add_option("--manifest", diag_manifest, "Dataset manifest (JSON)")->required();
    diagnose->add_option("--groups", diag_groups, "Scale group count (default: min(5, images))");

    try {
        app.parse(argc, argv);
        if (synth->parsed()) {
            run_synth(synth_out, synth_n, synth_size, synth_cmin, synth_cmax, synth_seed);
        } else if (gt->parsed()) {
            run_gt(gt_manifest, gt_cfg, gt_out);
        } else if (train->parsed()) {
            run_train(train_manifest, train_config, train_out);
        } else if (eval->parsed()) {
            run_eval(eval_checkpoint, eval_manifest, eval_report);
        } else if (predict->parsed()) {
            run_predict(pred_checkpoint, pred_image, pred_out);
        } else if (diagnose->parsed()) {
            run_diagnose(diag_checkpoint, diag_manifest, diag_groups);
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
