#include "psnet/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "psnet/rng.hpp"

namespace psnet {

namespace {

constexpr const char* kMagic = "psnet-checkpoint 1";

static_assert(sizeof(float) == 4, "checkpoint blob assumes 32-bit floats");

std::string join_i64(const std::vector<std::int64_t>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i > 0) {
            out += ',';
        }
        out += std::to_string(xs[i]);
    }
    return out;
}

std::vector<std::int64_t> split_i64(const std::string& s) {
    std::vector<std::int64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(std::stoll(item));
    }
    return out;
}

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw std::runtime_error("checkpoint " + path + ": " + msg);
}

}  // namespace

void save_checkpoint(const PsnetModel& model, const std::string& path) {
    const std::filesystem::path manifest_path(path);
    if (manifest_path.has_parent_path()) {
        std::filesystem::create_directories(manifest_path.parent_path());
    }
    const std::string blob_name = manifest_path.filename().string() + ".bin";

    const auto named = model.named_params();
    std::ostringstream manifest;
    manifest << kMagic << "\n";
    const auto& c = model.config;
    manifest << "base_width " << c.base_width << "\n";
    manifest << "psm_count " << c.psm_count << "\n";
    manifest << "branch_kernels " << join_i64(c.branch_kernels) << "\n";
    manifest << "reduction_ratio " << c.reduction_ratio << "\n";
    manifest << "message_passing " << (c.variant.message_passing ? 1 : 0) << "\n";
    manifest << "gam " << (c.variant.gam ? 1 : 0) << "\n";
    manifest << "use_dilation " << (c.variant.use_dilation ? 1 : 0) << "\n";
    manifest << "blob " << blob_name << "\n";
    manifest << "params " << named.size() << "\n";

    std::ofstream blob(manifest_path.parent_path() / blob_name, std::ios::binary);
    if (!blob) {
        fail(path, "cannot open blob for writing");
    }
    std::int64_t offset = 0;
    for (const auto& [name, tensor] : named) {
        manifest << "param " << name << " " << join_i64(tensor->shape) << " " << offset << "\n";
        blob.write(reinterpret_cast<const char*>(tensor->data.data()),
                   static_cast<std::streamsize>(tensor->data.size() * sizeof(float)));
        offset += static_cast<std::int64_t>(tensor->data.size() * sizeof(float));
    }
    blob.close();
    if (!blob) {
        fail(path, "blob write failed");
    }

    std::ofstream out(manifest_path);
    if (!out) {
        fail(path, "cannot open manifest for writing");
    }
    out << manifest.str();
    out.close();
    if (!out) {
        fail(path, "manifest write failed");
    }
}

PsnetModel load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        fail(path, "cannot open manifest");
    }
    std::string line;
    if (!std::getline(in, line) || line != kMagic) {
        fail(path, "bad magic line");
    }

    ModelConfig config;
    std::string blob_name;
    std::size_t declared_params = 0;
    struct ParamEntry {
        std::string name;
        std::vector<std::int64_t> shape;
        std::int64_t offset = 0;
    };
    std::vector<ParamEntry> entries;

    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "base_width") {
            ls >> config.base_width;
        } else if (key == "psm_count") {
            ls >> config.psm_count;
        } else if (key == "branch_kernels") {
            std::string v;
            ls >> v;
            config.branch_kernels = split_i64(v);
        } else if (key == "reduction_ratio") {
            ls >> config.reduction_ratio;
        } else if (key == "message_passing") {
            int v = 0;
            ls >> v;
            config.variant.message_passing = (v != 0);
        } else if (key == "gam") {
            int v = 0;
            ls >> v;
            config.variant.gam = (v != 0);
        } else if (key == "use_dilation") {
            int v = 0;
            ls >> v;
            config.variant.use_dilation = (v != 0);
        } else if (key == "blob") {
            ls >> blob_name;
        } else if (key == "params") {
            ls >> declared_params;
        } else if (key == "param") {
            ParamEntry e;
            std::string shape_str_field;
            ls >> e.name >> shape_str_field >> e.offset;
            e.shape = split_i64(shape_str_field);
            entries.push_back(std::move(e));
        } else {
            fail(path, "unknown manifest key '" + key + "'");
        }
        if (ls.fail()) {
            fail(path, "malformed manifest line '" + line + "'");
        }
    }
    if (blob_name.empty()) {
        fail(path, "manifest names no blob");
    }
    if (entries.size() != declared_params) {
        fail(path, "manifest declares " + std::to_string(declared_params) + " params but lists " +
                       std::to_string(entries.size()));
    }

    // Rebuild the structure; every value is then overwritten from the blob.
    SeededRng rng(0);
    PsnetModel model = build_model<float>(config, rng);
    const auto named = model.named_params();
    if (named.size() != entries.size()) {
        fail(path, "model built from config has " + std::to_string(named.size()) + " params, manifest lists " +
                       std::to_string(entries.size()));
    }

    const std::filesystem::path blob_path = std::filesystem::path(path).parent_path() / blob_name;
    std::ifstream blob(blob_path, std::ios::binary);
    if (!blob) {
        fail(path, "cannot open blob " + blob_path.string());
    }
    blob.seekg(0, std::ios::end);
    const std::int64_t blob_size = static_cast<std::int64_t>(blob.tellg());

    std::int64_t expected_offset = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        auto& [name, tensor] = named[i];
        if (e.name != name) {
            fail(path, "param " + std::to_string(i) + " is '" + e.name + "', model expects '" + name + "'");
        }
        if (e.shape != tensor->shape) {
            fail(path, "param '" + name + "' has shape " + join_i64(e.shape) + ", model expects " +
                           join_i64(tensor->shape));
        }
        if (e.offset != expected_offset) {
            fail(path, "param '" + name + "' at offset " + std::to_string(e.offset) + ", expected " +
                           std::to_string(expected_offset));
        }
        const std::int64_t bytes = static_cast<std::int64_t>(tensor->data.size() * sizeof(float));
        blob.seekg(e.offset, std::ios::beg);
        blob.read(reinterpret_cast<char*>(tensor->data.data()), bytes);
        if (blob.gcount() != bytes) {
            fail(path, "blob truncated while reading '" + name + "'");
        }
        expected_offset += bytes;
    }
    if (blob_size != expected_offset) {
        fail(path, "blob holds " + std::to_string(blob_size) + " bytes, manifest accounts for " +
                       std::to_string(expected_offset));
    }
    return model;
}

}  // namespace psnet
