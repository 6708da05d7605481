#include "rose/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "rose/errors.hpp"

namespace rose::checkpoint {

namespace {

constexpr const char* kFormat = "rose-checkpoint-v1";

std::string bin_path_for(const std::string& manifest_path) {
    std::filesystem::path p(manifest_path);
    p.replace_extension(".bin");
    return p.string();
}

void encode_le(const std::vector<double>& values, std::vector<unsigned char>& out) {
    for (double v : values) {
        std::uint64_t u;
        std::memcpy(&u, &v, sizeof(u));
        for (int b = 0; b < 8; ++b) out.push_back(static_cast<unsigned char>(u >> (8 * b)));
    }
}

double decode_le(const unsigned char* p) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    double v;
    std::memcpy(&v, &u, sizeof(v));
    return v;
}

}  // namespace

void save_checkpoint(const std::string& manifest_path, const CheckpointData& data) {
    const std::string bin_path = bin_path_for(manifest_path);

    nlohmann::json manifest;
    manifest["format"] = kFormat;
    manifest["step"] = data.step;
    manifest["config"] = data.config;
    manifest["data_file"] = std::filesystem::path(bin_path).filename().string();

    std::vector<unsigned char> blob;
    nlohmann::json groups = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (std::size_t g = 0; g < data.params.group_count(); ++g) {
        const Tensor& t = data.params.tensors[g];
        nlohmann::json entry;
        entry["name"] = data.params.names[g];
        entry["shape"] = t.shape;
        entry["offset"] = offset;
        entry["count"] = t.numel();
        groups.push_back(std::move(entry));
        encode_le(t.data, blob);
        offset += t.numel() * 8;
    }
    manifest["groups"] = std::move(groups);

    std::ofstream mf(manifest_path, std::ios::binary | std::ios::trunc);
    if (!mf) throw data_error("checkpoint: cannot write " + manifest_path);
    mf << manifest.dump(2) << "\n";
    mf.close();
    if (!mf) throw data_error("checkpoint: write failed for " + manifest_path);

    std::ofstream bf(bin_path, std::ios::binary | std::ios::trunc);
    if (!bf) throw data_error("checkpoint: cannot write " + bin_path);
    bf.write(reinterpret_cast<const char*>(blob.data()),
             static_cast<std::streamsize>(blob.size()));
    bf.close();
    if (!bf) throw data_error("checkpoint: write failed for " + bin_path);
}

CheckpointData load_checkpoint(const std::string& manifest_path) {
    std::ifstream mf(manifest_path, std::ios::binary);
    if (!mf) throw data_error("checkpoint: cannot open " + manifest_path);
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw data_error("checkpoint: manifest parse error in " + manifest_path + ": " +
                         e.what());
    }
    if (!manifest.is_object() || manifest.value("format", "") != kFormat) {
        throw data_error("checkpoint: " + manifest_path + " is not a " + kFormat +
                         " manifest");
    }

    const std::string bin_name = manifest.at("data_file").get<std::string>();
    const std::string bin_path =
        (std::filesystem::path(manifest_path).parent_path() / bin_name).string();
    std::ifstream bf(bin_path, std::ios::binary);
    if (!bf) throw data_error("checkpoint: cannot open " + bin_path);
    std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bf)),
                                    std::istreambuf_iterator<char>());

    CheckpointData out;
    out.config = manifest.value("config", nlohmann::json::object());
    out.step = manifest.at("step").get<std::uint64_t>();

    std::uint64_t expected_end = 0;
    for (const nlohmann::json& entry : manifest.at("groups")) {
        const std::string name = entry.at("name").get<std::string>();
        const std::vector<std::size_t> shape = entry.at("shape").get<std::vector<std::size_t>>();
        const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
        const std::uint64_t count = entry.at("count").get<std::uint64_t>();
        if (count != Tensor::numel_of(shape)) {
            throw data_error("checkpoint: group " + name + " count disagrees with shape");
        }
        if (offset != expected_end) {
            throw data_error("checkpoint: group " + name + " offset " +
                             std::to_string(offset) + " is inconsistent, expected " +
                             std::to_string(expected_end));
        }
        const std::uint64_t end = offset + count * 8;
        if (end > blob.size()) {
            throw data_error("checkpoint: data file truncated at byte offset " +
                             std::to_string(blob.size()) + ", group " + name + " needs " +
                             std::to_string(end));
        }
        Tensor t = Tensor::zeros(shape);
        for (std::uint64_t i = 0; i < count; ++i) {
            t.data[i] = decode_le(blob.data() + offset + i * 8);
        }
        out.params.names.push_back(name);
        out.params.tensors.push_back(std::move(t));
        expected_end = end;
    }
    if (expected_end != blob.size()) {
        throw data_error("checkpoint: data file has " + std::to_string(blob.size()) +
                         " bytes, manifest expects " + std::to_string(expected_end) +
                         "; first inconsistency at byte offset " +
                         std::to_string(expected_end));
    }
    return out;
}

}  // namespace rose::checkpoint
