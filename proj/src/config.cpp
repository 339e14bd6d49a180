#include "lasp/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lasp/errors.hpp"
#include "lasp/numerics.hpp"

namespace lasp {

using nlohmann::json;

bool model_preset(const std::string& name, EncoderShape& shape) {
    if (name == "distilbert") {
        shape = {6, 768, 12};
    } else if (name == "bert-base" || name == "roberta") {
        shape = {12, 768, 12};
    } else if (name == "bert-large") {
        shape = {24, 1024, 16};
    } else {
        return false;
    }
    return true;
}

void ExperimentConfig::validate() const {
    auto bad = [](const std::string& field, const std::string& why) {
        throw ValidationError("config field '" + field + "': " + why);
    };
    if (shape.layers == 0) bad("custom.layers", "must be >= 1");
    if (shape.hidden == 0) bad("custom.hidden", "must be >= 1");
    if (shape.heads == 0) bad("custom.heads", "must be >= 1");
    if (shape.hidden % shape.heads != 0) bad("custom.hidden", "must be divisible by heads");
    if (k == 0) bad("k", "must be >= 1");
    if (!is_supported_bits(bits)) bad("bits", "must be 1, 2, 4 or 8");
    if (budget.compute_units < 1) bad("budget.compute_units", "must be >= 1");
    if (!(budget.clock_hz > 0.0)) bad("budget.clock_hz", "must be positive");
    if (budget.tile_width < 1) bad("budget.tile_width", "must be >= 1");
    if (r_max < 1) bad("r_max", "must be >= 1");
    if (buffer_depth < 1) bad("buffer_depth", "must be >= 1");
    if (batch_size < 1) bad("batch_size", "must be >= 1");
    if (micro_batch < 1) bad("micro_batch", "must be >= 1");
    if (spot_check_n < 1) bad("spot_check_n", "must be >= 1");
    switch (workload.source) {
        case WorkloadSource::File:
            if (workload.path.empty()) bad("workload.path", "required for file source");
            break;
        case WorkloadSource::Uniform:
            if (workload.lo < 1 || workload.hi < workload.lo) bad("workload.lo", "need 1 <= lo <= hi");
            break;
        case WorkloadSource::Stats:
            if (workload.min_length < 1 || workload.min_length > workload.max_length) {
                bad("workload.min", "need 1 <= min <= max");
            }
            if (!(workload.avg < static_cast<double>(workload.max_length))) bad("workload.avg", "must be below max");
            if (!(workload.tail_mass > 0.0 && workload.tail_mass < 0.5)) bad("workload.tail_mass", "must lie in (0, 0.5)");
            break;
    }
}

namespace {

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [key, value] : obj.items()) {
        if (!keys.contains(key)) {
            throw ParseError("unknown key '" + (where.empty() ? key : where + "." + key) + "' in config");
        }
    }
}

template <typename T>
void read(const json& obj, const char* key, const std::string& where, T& out) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    const std::string field = where.empty() ? key : where + "." + key;
    try {
        if constexpr (std::is_unsigned_v<T>) {
            if (it->is_number_integer() && it->template get<std::int64_t>() < 0) {
                throw ValidationError("config field '" + field + "': must be non-negative");
            }
        }
        out = it->template get<T>();
    } catch (const json::exception& e) {
        throw ValidationError("config field '" + field + "': " + e.what());
    }
}

const json& require_object(const json& j, const std::string& field) {
    if (!j.is_object()) throw ValidationError("config field '" + field + "': expected an object");
    return j;
}

std::string source_name(WorkloadSource s) {
    switch (s) {
        case WorkloadSource::File: return "file";
        case WorkloadSource::Stats: return "stats";
        case WorkloadSource::Uniform: return "uniform";
    }
    return "stats";
}

void parse_workload(const json& j, ExperimentConfig& c) {
    require_object(j, "workload");
    reject_unknown(j, "workload", {"source", "dataset", "path", "avg", "max", "min", "tail_mass", "lo", "hi"});
    WorkloadSpec& w = c.workload;
    std::string source = "stats";
    read(j, "source", "workload", source);
    if (source == "file") {
        w.source = WorkloadSource::File;
    } else if (source == "stats") {
        w.source = WorkloadSource::Stats;
    } else if (source == "uniform") {
        w.source = WorkloadSource::Uniform;
    } else {
        throw ValidationError("config field 'workload.source': unknown source '" + source + "'");
    }
    read(j, "dataset", "workload", c.dataset);
    if (!c.dataset.empty()) {
        const auto stats = dataset_stats(c.dataset);
        if (!stats) throw ValidationError("config field 'workload.dataset': unknown dataset '" + c.dataset + "'");
        w.avg = stats->avg;
        w.max_length = stats->max_length;
    }
    read(j, "path", "workload", w.path);
    read(j, "avg", "workload", w.avg);
    read(j, "max", "workload", w.max_length);
    read(j, "min", "workload", w.min_length);
    read(j, "tail_mass", "workload", w.tail_mass);
    read(j, "lo", "workload", w.lo);
    read(j, "hi", "workload", w.hi);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("config must be a JSON object");
    reject_unknown(j, "", {"model", "custom", "k", "bits", "budget", "r_max", "buffer_depth", "batch_size", "workload",
                           "layers_to_simulate", "micro_batch", "fixed_costs", "seed", "spot_check_n",
                           "utilization_window", "output_dir"});

    ExperimentConfig c;
    read(j, "model", "", c.model);
    if (c.model == "custom") {
        auto it = j.find("custom");
        if (it == j.end()) throw ValidationError("config field 'custom': required when model is 'custom'");
        require_object(*it, "custom");
        reject_unknown(*it, "custom", {"layers", "hidden", "heads"});
        c.shape = {0, 0, 0};
        read(*it, "layers", "custom", c.shape.layers);
        read(*it, "hidden", "custom", c.shape.hidden);
        read(*it, "heads", "custom", c.shape.heads);
    } else if (!model_preset(c.model, c.shape)) {
        throw ValidationError("config field 'model': unknown preset '" + c.model + "'");
    } else if (j.contains("custom")) {
        throw ValidationError("config field 'custom': only allowed when model is 'custom'");
    }

    read(j, "k", "", c.k);
    read(j, "bits", "", c.bits);
    if (auto it = j.find("budget"); it != j.end()) {
        require_object(*it, "budget");
        reject_unknown(*it, "budget", {"compute_units", "clock_hz", "tile_width"});
        read(*it, "compute_units", "budget", c.budget.compute_units);
        read(*it, "clock_hz", "budget", c.budget.clock_hz);
        read(*it, "tile_width", "budget", c.budget.tile_width);
    }
    read(j, "r_max", "", c.r_max);
    read(j, "buffer_depth", "", c.buffer_depth);
    read(j, "batch_size", "", c.batch_size);
    if (auto it = j.find("workload"); it != j.end()) parse_workload(*it, c);
    // A lengths file supplies the whole batch.
    c.workload.count = c.workload.source == WorkloadSource::File ? 0 : c.batch_size;
    read(j, "layers_to_simulate", "", c.layers_to_simulate);
    read(j, "micro_batch", "", c.micro_batch);
    read(j, "fixed_costs", "", c.fixed_costs);
    read(j, "seed", "", c.seed);
    read(j, "spot_check_n", "", c.spot_check_n);
    std::string window = "per-stage";
    read(j, "utilization_window", "", window);
    if (window == "per-stage") {
        c.window = UtilizationWindow::PerStage;
    } else if (window == "global") {
        c.window = UtilizationWindow::Global;
    } else {
        throw ValidationError("config field 'utilization_window': expected 'per-stage' or 'global'");
    }
    read(j, "output_dir", "", c.output_dir);
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    auto config = parse_config(ss.str());
    // Relative lengths files are resolved against the config's directory.
    if (config.workload.source == WorkloadSource::File && std::filesystem::path(config.workload.path).is_relative()) {
        config.workload.path = (std::filesystem::path(path).parent_path() / config.workload.path).string();
    }
    return config;
}

std::string serialize_config(const ExperimentConfig& c) {
    json j;
    j["model"] = c.model;
    if (c.model == "custom") j["custom"] = {{"layers", c.shape.layers}, {"hidden", c.shape.hidden}, {"heads", c.shape.heads}};
    j["k"] = c.k;
    j["bits"] = c.bits;
    j["budget"] = {{"compute_units", c.budget.compute_units},
                   {"clock_hz", c.budget.clock_hz},
                   {"tile_width", c.budget.tile_width}};
    j["r_max"] = c.r_max;
    j["buffer_depth"] = c.buffer_depth;
    j["batch_size"] = c.batch_size;
    json w;
    w["source"] = source_name(c.workload.source);
    if (!c.dataset.empty()) w["dataset"] = c.dataset;
    w["path"] = c.workload.path;
    w["avg"] = c.workload.avg;
    w["max"] = c.workload.max_length;
    w["min"] = c.workload.min_length;
    w["tail_mass"] = c.workload.tail_mass;
    w["lo"] = c.workload.lo;
    w["hi"] = c.workload.hi;
    j["workload"] = w;
    j["layers_to_simulate"] = c.layers_to_simulate;
    j["micro_batch"] = c.micro_batch;
    j["fixed_costs"] = c.fixed_costs;
    j["seed"] = c.seed;
    j["spot_check_n"] = c.spot_check_n;
    j["utilization_window"] = c.window == UtilizationWindow::Global ? "global" : "per-stage";
    j["output_dir"] = c.output_dir;
    return j.dump(2) + "\n";
}

}  // namespace lasp
