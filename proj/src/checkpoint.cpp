#include "stainbench/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "stainbench/errors.hpp"

namespace stainbench {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'S', 'B', 'N', 'C', 'K', 'P', 'T', '1'};

void write_floats(std::ofstream& out, const float* data, std::size_t count) {
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(count * sizeof(float)));
}

void read_floats(std::ifstream& in, float* data, std::size_t count,
                 const std::filesystem::path& path) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw IoError("checkpoint truncated: " + path.string());
}

json param_table(const Model<float>& model) {
    json table = json::array();
    for (const auto& p : model.stack.params) {
        table.push_back(json{{"name", p.name},
                             {"out_ch", p.value.weights.n},
                             {"in_ch", p.value.weights.c},
                             {"kernel", p.value.weights.h},
                             {"stride", p.value.stride},
                             {"padding", p.value.padding}});
    }
    return table;
}

}  // namespace

nlohmann::json model_spec_to_json(const ModelSpec& spec) {
    return json{{"kind", to_string(spec.kind)},
                {"base_channels", spec.base_channels},
                {"depth", spec.depth},
                {"pm_widths", spec.pm_widths}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
    ModelSpec spec;
    try {
        spec.kind = model_kind_from_string(j.at("kind").get<std::string>());
        spec.base_channels = j.at("base_channels").get<int>();
        spec.depth = j.at("depth").get<int>();
        spec.pm_widths = j.at("pm_widths").get<std::vector<int>>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model spec parse error: ") + e.what());
    }
    spec.validate();
    return spec;
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
    return json{{"lr0", cfg.lr0},           {"epochs", cfg.epochs},
                {"momentum", cfg.momentum}, {"weight_decay", cfg.weight_decay},
                {"batch_size", cfg.batch_size}, {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    try {
        cfg.lr0 = j.at("lr0").get<double>();
        cfg.epochs = j.at("epochs").get<int>();
        cfg.momentum = j.at("momentum").get<double>();
        cfg.weight_decay = j.at("weight_decay").get<double>();
        cfg.batch_size = j.at("batch_size").get<int>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("train config parse error: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model,
                     const TrainConfig& config, int epoch, const SgdState<float>* velocity) {
    const json header{{"format", 1},
                      {"model_spec", model_spec_to_json(model.spec)},
                      {"train_config", train_config_to_json(config)},
                      {"epoch", epoch},
                      {"has_velocity", velocity != nullptr},
                      {"params", param_table(model)}};
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const std::uint32_t len = static_cast<std::uint32_t>(header_str.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

    for (const auto& p : model.stack.params) {
        write_floats(out, p.value.weights.data.data(), p.value.weights.size());
        write_floats(out, p.value.bias.data(), p.value.bias.size());
    }
    if (velocity) {
        for (std::size_t i = 0; i < model.stack.params.size(); ++i) {
            const auto& v = velocity->velocity[i];
            write_floats(out, v.weights.data.data(), v.weights.size());
            write_floats(out, v.bias.data(), v.bias.size());
        }
    }
    if (!out) throw IoError("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint: " + path.string());

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw IoError("not a stainbench checkpoint: " + path.string());
    }
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in) throw IoError("checkpoint truncated: " + path.string());
    std::string header_str(len, '\0');
    in.read(header_str.data(), len);
    if (!in) throw IoError("checkpoint truncated: " + path.string());

    json header;
    try {
        header = json::parse(header_str);
    } catch (const json::exception& e) {
        throw IoError("checkpoint header corrupt in " + path.string() + ": " + e.what());
    }

    Checkpoint ckpt;
    ckpt.spec = model_spec_from_json(header.at("model_spec"));
    ckpt.config = train_config_from_json(header.at("train_config"));
    ckpt.epoch = header.at("epoch").get<int>();
    ckpt.model = build_model<float>(ckpt.spec);

    const json& table = header.at("params");
    if (table.size() != ckpt.model.stack.params.size()) {
        throw ConfigError("checkpoint parameter table does not match the rebuilt architecture");
    }
    for (std::size_t i = 0; i < ckpt.model.stack.params.size(); ++i) {
        auto& p = ckpt.model.stack.params[i];
        const json& t = table[i];
        if (t.at("name").get<std::string>() != p.name ||
            t.at("out_ch").get<int>() != p.value.weights.n ||
            t.at("in_ch").get<int>() != p.value.weights.c ||
            t.at("kernel").get<int>() != p.value.weights.h) {
            throw ConfigError("checkpoint parameter '" + t.at("name").get<std::string>() +
                              "' does not match the rebuilt architecture");
        }
    }
    for (auto& p : ckpt.model.stack.params) {
        read_floats(in, p.value.weights.data.data(), p.value.weights.size(), path);
        read_floats(in, p.value.bias.data(), p.value.bias.size(), path);
    }
    if (header.at("has_velocity").get<bool>()) {
        SgdState<float> vel = SgdState<float>::zeros_like(ckpt.model.stack);
        for (auto& v : vel.velocity) {
            read_floats(in, v.weights.data.data(), v.weights.size(), path);
            read_floats(in, v.bias.data(), v.bias.size(), path);
        }
        ckpt.velocity = std::move(vel);
    }
    return ckpt;
}

}  // namespace stainbench
