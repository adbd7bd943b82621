#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "stainbench/errors.hpp"

namespace stainbench {

/// Flat dotted-key configuration (e.g. "train.lr0"), merged from the JSON
/// config file with flag overrides on top.
struct CliConfig {
    nlohmann::json values = nlohmann::json::object();

    static CliConfig from_file(const std::filesystem::path& path);

    void set(const std::string& key, nlohmann::json v) { values[key] = std::move(v); }
    bool has(const std::string& key) const { return values.contains(key); }

    template <class T>
    T get(const std::string& key, const T& fallback) const {
        if (!values.contains(key)) return fallback;
        try {
            return values.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config key '" + key + "' has the wrong type");
        }
    }

    template <class T>
    T require(const std::string& key) const {
        if (!values.contains(key)) throw ConfigError("missing required config key '" + key + "'");
        try {
            return values.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config key '" + key + "' has the wrong type");
        }
    }
};

/// One CLI invocation: subcommand inputs resolved, output directory locked,
/// effective configuration echoed for reproducibility.
struct RunContext {
    std::string subcommand;
    CliConfig config;
    std::filesystem::path out_dir;
    std::uint64_t seed = 0;
};

/// Exclusive lock on an output directory for the lifetime of the object.
class DirLock {
  public:
    explicit DirLock(const std::filesystem::path& dir);
    ~DirLock();
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

  private:
    std::filesystem::path lock_path_;
};

void echo_effective_config(const RunContext& ctx);

int cmd_gen_data(const RunContext& ctx);
int cmd_train(const RunContext& ctx);
int cmd_infer(const RunContext& ctx);
int cmd_tile_infer(const RunContext& ctx);
int cmd_eval(const RunContext& ctx);
int cmd_bench(const RunContext& ctx);

/// Dispatches to the cmd_* function and maps exceptions to the documented
/// exit codes (0 ok, 2 config, 3 I/O, 4 numeric).
int run_subcommand(const RunContext& ctx);

}  // namespace stainbench
