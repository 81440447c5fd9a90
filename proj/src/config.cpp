#include "lossforge/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lossforge/rng.hpp"

namespace lossforge {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    throw ConfigError("config: " + path + ": " + what);
}

void reject_unknown(const json& obj, const std::string& path,
                    const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) bad(path.empty() ? it.key() : path + "." + it.key(),
                                          "unknown key");
}

template <typename T>
T get_or(const json& obj, const std::string& path, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        bad(path + key, "wrong type");
    }
}

void parse_gp(const json& j, GpConfig& gp) {
    reject_unknown(j, "gp", {"population_size", "generations", "subtree_mutation_rate",
                             "point_mutation_rate", "crossover_rate", "archive_save_prob",
                             "archive_use_prob", "archive_capacity", "min_height", "max_size",
                             "constant_min", "constant_max", "max_retries"});
    gp.population_size = get_or(j, "gp.", "population_size", gp.population_size);
    gp.generations = get_or(j, "gp.", "generations", gp.generations);
    gp.subtree_mutation_rate = get_or(j, "gp.", "subtree_mutation_rate", gp.subtree_mutation_rate);
    gp.point_mutation_rate = get_or(j, "gp.", "point_mutation_rate", gp.point_mutation_rate);
    gp.crossover_rate = get_or(j, "gp.", "crossover_rate", gp.crossover_rate);
    gp.archive_save_prob = get_or(j, "gp.", "archive_save_prob", gp.archive_save_prob);
    gp.archive_use_prob = get_or(j, "gp.", "archive_use_prob", gp.archive_use_prob);
    gp.archive_capacity = get_or(j, "gp.", "archive_capacity", gp.archive_capacity);
    gp.constraints.min_height = get_or(j, "gp.", "min_height", gp.constraints.min_height);
    gp.constraints.max_size = get_or(j, "gp.", "max_size", gp.constraints.max_size);
    gp.constraints.constant_min = get_or(j, "gp.", "constant_min", gp.constraints.constant_min);
    gp.constraints.constant_max = get_or(j, "gp.", "constant_max", gp.constraints.constant_max);
    gp.constraints.max_retries = get_or(j, "gp.", "max_retries", gp.constraints.max_retries);
    try {
        gp.check();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

void parse_trainer(const json& j, TrainConfig& t, std::vector<int>& hidden) {
    reject_unknown(j, "trainer", {"epochs", "batch_size", "lr", "beta1", "beta2", "eps",
                                  "plateau_factor", "plateau_patience", "lr_min", "hidden"});
    t.epochs = get_or(j, "trainer.", "epochs", t.epochs);
    t.batch_size = get_or(j, "trainer.", "batch_size", t.batch_size);
    t.lr = get_or(j, "trainer.", "lr", t.lr);
    t.beta1 = get_or(j, "trainer.", "beta1", t.beta1);
    t.beta2 = get_or(j, "trainer.", "beta2", t.beta2);
    t.eps_opt = get_or(j, "trainer.", "eps", t.eps_opt);
    t.plateau_factor = get_or(j, "trainer.", "plateau_factor", t.plateau_factor);
    t.plateau_patience = get_or(j, "trainer.", "plateau_patience", t.plateau_patience);
    t.lr_min = get_or(j, "trainer.", "lr_min", t.lr_min);
    hidden = get_or(j, "trainer.", "hidden", hidden);
    if (t.epochs < 1) bad("trainer.epochs", "must be >= 1");
    if (t.batch_size < 1) bad("trainer.batch_size", "must be >= 1");
    if (!(t.lr > 0)) bad("trainer.lr", "must be > 0");
    if (!(t.plateau_factor > 0 && t.plateau_factor < 1)) bad("trainer.plateau_factor", "must lie in (0,1)");
    if (t.plateau_patience < 1) bad("trainer.plateau_patience", "must be >= 1");
    for (int h : hidden)
        if (h < 1) bad("trainer.hidden", "layer widths must be positive");
}

void parse_experiment(const json& j, RunConfig& cfg) {
    reject_unknown(j, "experiment", {"mode", "runs_per_dataset"});
    std::string mode = get_or<std::string>(j, "experiment.", "mode", "single-run");
    try {
        cfg.mode = experiment_mode_from_string(mode);
    } catch (const std::invalid_argument& e) {
        bad("experiment.mode", e.what());
    }
    cfg.runs_per_dataset = get_or(j, "experiment.", "runs_per_dataset", cfg.runs_per_dataset);
    if (cfg.runs_per_dataset < 1) bad("experiment.runs_per_dataset", "must be >= 1");
}

void parse_split(const json& j, SplitFractions& f) {
    reject_unknown(j, "split", {"train", "val", "test"});
    f.train = get_or(j, "split.", "train", f.train);
    f.val = get_or(j, "split.", "val", f.val);
    f.test = get_or(j, "split.", "test", f.test);
    if (!(f.train > 0 && f.val > 0 && f.test > 0) ||
        std::fabs(f.train + f.val + f.test - 1.0) > 1e-9)
        bad("split", "fractions must be positive and sum to 1");
}

DatasetEntry parse_dataset(const json& j, const std::string& path) {
    DatasetEntry e;
    e.kind = get_or<std::string>(j, path + ".", "kind", "");
    if (e.kind == "blobs") {
        reject_unknown(j, path, {"name", "kind", "classes", "samples_per_class", "dims",
                                 "spread", "take"});
        e.classes = get_or(j, path + ".", "classes", e.classes);
        e.samples_per_class = get_or(j, path + ".", "samples_per_class", e.samples_per_class);
        e.dims = get_or(j, path + ".", "dims", e.dims);
        e.spread = get_or(j, path + ".", "spread", e.spread);
    } else if (e.kind == "csv") {
        reject_unknown(j, path, {"name", "kind", "path", "delimiter", "has_header",
                                 "label_column", "normalize", "take"});
        e.path = get_or<std::string>(j, path + ".", "path", "");
        if (e.path.empty()) bad(path + ".path", "required for csv datasets");
        e.delimiter = get_or<std::string>(j, path + ".", "delimiter", e.delimiter);
        if (e.delimiter.size() != 1) bad(path + ".delimiter", "must be a single character");
        e.has_header = get_or(j, path + ".", "has_header", e.has_header);
        e.label_column = get_or(j, path + ".", "label_column", e.label_column);
        e.normalize = get_or(j, path + ".", "normalize", e.normalize);
    } else if (e.kind == "idx") {
        reject_unknown(j, path, {"name", "kind", "images", "labels", "take"});
        e.images = get_or<std::string>(j, path + ".", "images", "");
        e.labels = get_or<std::string>(j, path + ".", "labels", "");
        if (e.images.empty() || e.labels.empty())
            bad(path, "idx datasets need 'images' and 'labels'");
    } else {
        bad(path + ".kind", "expected blobs|csv|idx");
    }
    e.name = get_or<std::string>(j, path + ".", "name", e.kind);
    e.take = get_or(j, path + ".", "take", e.take);
    if (e.take < 0) bad(path + ".take", "must be >= 0");
    return e;
}

} // namespace

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    reject_unknown(j, "", {"seed", "output", "gp", "trainer", "experiment", "split", "datasets"});

    RunConfig cfg;
    cfg.seed = get_or<uint64_t>(j, "", "seed", 0);
    cfg.output_dir = get_or<std::string>(j, "", "output", cfg.output_dir);
    if (j.contains("gp")) parse_gp(j.at("gp"), cfg.gp);
    if (j.contains("trainer")) parse_trainer(j.at("trainer"), cfg.trainer, cfg.hidden);
    if (j.contains("experiment")) parse_experiment(j.at("experiment"), cfg);
    if (j.contains("split")) parse_split(j.at("split"), cfg.fractions);
    if (j.contains("datasets")) {
        const json& ds = j.at("datasets");
        if (!ds.is_array() || ds.empty()) throw ConfigError("config: datasets: need a non-empty array");
        for (size_t i = 0; i < ds.size(); ++i)
            cfg.datasets.push_back(parse_dataset(ds[i], "datasets[" + std::to_string(i) + "]"));
    }
    if (cfg.datasets.empty()) {
        DatasetEntry e;
        e.kind = "blobs";
        e.name = "blobs";
        cfg.datasets.push_back(e);
    }
    cfg.gp.seed = cfg.seed;
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

Dataset materialize(const DatasetEntry& e, uint64_t seed) {
    if (e.kind == "blobs") {
        Dataset ds = synth_blobs(e.classes, e.samples_per_class, e.dims, e.spread, seed);
        ds.name = e.name;
        if (e.take > 0 && e.take < ds.samples()) {
            ds.features.resize(static_cast<size_t>(e.take) * ds.dims);
            ds.labels.resize(e.take);
        }
        return ds;
    }
    if (e.kind == "csv") {
        DelimitedSchema schema;
        schema.delimiter = e.delimiter[0];
        schema.has_header = e.has_header;
        schema.label_column = e.label_column;
        schema.normalize = e.normalize;
        schema.take = e.take;
        Dataset ds = load_delimited(e.path, schema);
        ds.name = e.name;
        return ds;
    }
    if (e.kind == "idx") {
        Dataset ds = load_idx(e.images, e.labels, e.take);
        ds.name = e.name;
        return ds;
    }
    throw ConfigError("config: unknown dataset kind '" + e.kind + "'");
}

std::vector<Dataset> materialize_all(const RunConfig& cfg) {
    std::vector<Dataset> out;
    out.reserve(cfg.datasets.size());
    for (size_t i = 0; i < cfg.datasets.size(); ++i)
        out.push_back(materialize(cfg.datasets[i], derive_seed(cfg.seed, 0x64617461, i)));
    return out;
}

} // namespace lossforge
