#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "trialineq/classifier.hpp"
#include "trialineq/error.hpp"
#include "trialineq/network.hpp"
#include "trialineq/panel.hpp"
#include "trialineq/predictors.hpp"
#include "trialineq/rng.hpp"

namespace trialineq {

inline constexpr const char* config_env_var = "TRIALINEQ_CONFIG";

struct BootstrapBudgets {
    std::size_t cis = 1000;
    std::size_t scenario = 200;
    std::size_t shapley_bootstrap = 100;
    std::size_t shapley_permutations = 100;
    std::size_t shapley_bootstrap_permutations = 50;
    std::size_t trend = 1000;
    std::size_t network_noise = 100;
};

struct RunConfig {
    std::string panel_path;
    std::optional<std::string> predictors_path;
    std::optional<std::string> components_path; // as-expected factor components
    YearRange period{year_min, year_max};
    int bin_width = 2;
    std::uint64_t seed = 42;
    std::string out_dir = "out";
    unsigned threads = 1;
    bool relax_year_bounds = false;
    char delimiter = '\0';
    std::vector<std::string> stages; // empty = all
    ClassificationThresholds thresholds;
    double significance = 0.1;
    double multi_factor = 0.7;
    BootstrapBudgets bootstrap;
    std::vector<double> full_steps{0.25, 0.5, 0.75, 1.0};
    std::vector<double> targeted_steps{0.1, 0.2, 0.3, 0.4};
    double min_edge_weight = 2;
    SensitivityModel sensitivity;
    std::vector<BlockSpec> blocks_part1 = default_part1_blocks();
    std::vector<BlockSpec> blocks_part2 = default_part2_blocks();

    // canonical JSON form, also the basis of the config hash
    nlohmann::json to_json() const;
    std::string config_hash() const;
};

inline const std::vector<std::string>& all_stages() {
    static const std::vector<std::string> stages = {"ingest",   "metrics",  "decompose", "attribute",
                                                    "classify", "simulate", "network"};
    return stages;
}

namespace detail {

inline std::vector<BlockSpec> blocks_from_json(const nlohmann::json& j) {
    std::vector<BlockSpec> out;
    for (const auto& item : j) {
        BlockSpec b;
        b.name = item.at("name").get<std::string>();
        for (const auto& m : item.at("members")) b.members.push_back(m.get<std::string>());
        out.push_back(std::move(b));
    }
    return out;
}

inline nlohmann::json blocks_to_json(const std::vector<BlockSpec>& blocks) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& b : blocks) out.push_back({{"name", b.name}, {"members", b.members}});
    return out;
}

} // namespace detail

inline nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["panel"] = panel_path;
    if (predictors_path) j["predictors"] = *predictors_path;
    if (components_path) j["components"] = *components_path;
    j["period"] = {period.first, period.last};
    j["bin_width"] = bin_width;
    j["seed"] = seed;
    j["out"] = out_dir;
    j["threads"] = threads;
    j["relax_year_bounds"] = relax_year_bounds;
    j["delimiter"] = delimiter == '\0' ? "auto" : (delimiter == '\t' ? "tab" : "comma");
    j["stages"] = stages.empty() ? all_stages() : stages;
    j["thresholds"] = {{"over", thresholds.over},
                       {"band", thresholds.band},
                       {"significance", significance},
                       {"multi_factor", multi_factor}};
    j["bootstrap"] = {{"cis", bootstrap.cis},
                      {"scenario", bootstrap.scenario},
                      {"shapley", bootstrap.shapley_bootstrap},
                      {"shapley_permutations", bootstrap.shapley_permutations},
                      {"shapley_bootstrap_permutations", bootstrap.shapley_bootstrap_permutations},
                      {"trend", bootstrap.trend},
                      {"network", bootstrap.network_noise}};
    j["scenario_steps"] = {{"full", full_steps}, {"targeted", targeted_steps}};
    j["min_edge_weight"] = min_edge_weight;
    j["sensitivity"] = {{"density", sensitivity.density},
                        {"homophily", sensitivity.homophily},
                        {"modularity", sensitivity.modularity},
                        {"avg_path_length", sensitivity.avg_path_length},
                        {"noise_start", sensitivity.noise_start},
                        {"noise_end", sensitivity.noise_end}};
    j["blocks_part1"] = detail::blocks_to_json(blocks_part1);
    j["blocks_part2"] = detail::blocks_to_json(blocks_part2);
    return j;
}

inline std::string RunConfig::config_hash() const {
    const std::string dump = to_json().dump();
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a64(dump)));
    return buf;
}

/// Parses a config file (JSON). Unknown keys are rejected so typos fail fast;
/// referenced input files must exist.
inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }

    static const std::vector<std::string> known = {
        "panel",        "predictors",     "components", "period",     "bin_width",
        "seed",         "out",            "threads",    "relax_year_bounds", "delimiter",
        "stages",       "thresholds",     "bootstrap",  "scenario_steps",    "min_edge_weight",
        "sensitivity",  "blocks_part1",   "blocks_part2"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("unknown config key '" + key + "'");
    }

    RunConfig cfg;
    try {
        if (!j.contains("panel")) throw ConfigError("config missing required key 'panel'");
        cfg.panel_path = j.at("panel").get<std::string>();
        if (j.contains("predictors")) cfg.predictors_path = j["predictors"].get<std::string>();
        if (j.contains("components")) cfg.components_path = j["components"].get<std::string>();
        if (j.contains("period")) {
            cfg.period.first = j["period"].at(0).get<int>();
            cfg.period.last = j["period"].at(1).get<int>();
        }
        if (j.contains("bin_width")) cfg.bin_width = j["bin_width"].get<int>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("out")) cfg.out_dir = j["out"].get<std::string>();
        if (j.contains("threads")) cfg.threads = j["threads"].get<unsigned>();
        if (j.contains("relax_year_bounds")) cfg.relax_year_bounds = j["relax_year_bounds"].get<bool>();
        if (j.contains("delimiter")) {
            const std::string d = j["delimiter"].get<std::string>();
            if (d == "auto") cfg.delimiter = '\0';
            else if (d == "comma") cfg.delimiter = ',';
            else if (d == "tab") cfg.delimiter = '\t';
            else throw ConfigError("delimiter must be auto, comma or tab");
        }
        if (j.contains("stages")) {
            for (const auto& s : j["stages"]) {
                const std::string name = s.get<std::string>();
                if (std::find(all_stages().begin(), all_stages().end(), name) == all_stages().end())
                    throw ConfigError("unknown stage '" + name + "'");
                cfg.stages.push_back(name);
            }
        }
        if (j.contains("thresholds")) {
            const auto& t = j["thresholds"];
            if (t.contains("over")) cfg.thresholds.over = t["over"].get<double>();
            if (t.contains("band")) cfg.thresholds.band = t["band"].get<double>();
            if (t.contains("significance")) cfg.significance = t["significance"].get<double>();
            if (t.contains("multi_factor")) cfg.multi_factor = t["multi_factor"].get<double>();
        }
        if (j.contains("bootstrap")) {
            const auto& b = j["bootstrap"];
            if (b.contains("cis")) cfg.bootstrap.cis = b["cis"].get<std::size_t>();
            if (b.contains("scenario")) cfg.bootstrap.scenario = b["scenario"].get<std::size_t>();
            if (b.contains("shapley")) cfg.bootstrap.shapley_bootstrap = b["shapley"].get<std::size_t>();
            if (b.contains("shapley_permutations"))
                cfg.bootstrap.shapley_permutations = b["shapley_permutations"].get<std::size_t>();
            if (b.contains("shapley_bootstrap_permutations"))
                cfg.bootstrap.shapley_bootstrap_permutations =
                    b["shapley_bootstrap_permutations"].get<std::size_t>();
            if (b.contains("trend")) cfg.bootstrap.trend = b["trend"].get<std::size_t>();
            if (b.contains("network")) cfg.bootstrap.network_noise = b["network"].get<std::size_t>();
        }
        if (j.contains("scenario_steps")) {
            const auto& s = j["scenario_steps"];
            if (s.contains("full")) cfg.full_steps = s["full"].get<std::vector<double>>();
            if (s.contains("targeted")) cfg.targeted_steps = s["targeted"].get<std::vector<double>>();
        }
        if (j.contains("min_edge_weight")) cfg.min_edge_weight = j["min_edge_weight"].get<double>();
        if (j.contains("sensitivity")) {
            const auto& s = j["sensitivity"];
            if (s.contains("density")) cfg.sensitivity.density = s["density"].get<double>();
            if (s.contains("homophily")) cfg.sensitivity.homophily = s["homophily"].get<double>();
            if (s.contains("modularity")) cfg.sensitivity.modularity = s["modularity"].get<double>();
            if (s.contains("avg_path_length"))
                cfg.sensitivity.avg_path_length = s["avg_path_length"].get<double>();
            if (s.contains("noise_start")) cfg.sensitivity.noise_start = s["noise_start"].get<double>();
            if (s.contains("noise_end")) cfg.sensitivity.noise_end = s["noise_end"].get<double>();
        }
        if (j.contains("blocks_part1")) cfg.blocks_part1 = detail::blocks_from_json(j["blocks_part1"]);
        if (j.contains("blocks_part2")) cfg.blocks_part2 = detail::blocks_from_json(j["blocks_part2"]);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config value error: ") + e.what());
    }

    // resolve input paths relative to the config file
    const auto base = std::filesystem::path(path).parent_path();
    auto resolve = [&](std::string& p) {
        if (!p.empty() && !std::filesystem::path(p).is_absolute()) p = (base / p).string();
    };
    resolve(cfg.panel_path);
    if (cfg.predictors_path) resolve(*cfg.predictors_path);
    if (cfg.components_path) resolve(*cfg.components_path);

    if (!std::filesystem::exists(cfg.panel_path))
        throw ConfigError("panel file does not exist: " + cfg.panel_path);
    if (cfg.predictors_path && !std::filesystem::exists(*cfg.predictors_path))
        throw ConfigError("predictors file does not exist: " + *cfg.predictors_path);
    if (cfg.components_path && !std::filesystem::exists(*cfg.components_path))
        throw ConfigError("components file does not exist: " + *cfg.components_path);
    return cfg;
}

} // namespace trialineq
