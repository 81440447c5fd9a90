#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "lossforge/analysis.hpp"
#include "lossforge/config.hpp"
#include "lossforge/gp.hpp"
#include "lossforge/losses.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lossforge;

namespace {

json fitness_json(const FitnessValue& f) {
    json j;
    if (f.shape == FitnessValue::Shape::Scalar) {
        j["shape"] = "scalar";
        j["error"] = f.error;
    } else {
        j["shape"] = "vs_baseline";
        j["wins"] = f.wins;
        j["mean_second"] = f.mean_second;
    }
    return j;
}

json record_json(const GenerationRecord& r) {
    json j;
    j["generation"] = r.generation;
    j["best"] = fitness_json(r.best);
    j["mean"] = r.mean_metric;
    j["best_formula"] = r.best_formula;
    j["rejections"] = r.rejections;
    return j;
}

uint64_t effective_seed(uint64_t config_seed, bool seed_flag_set, uint64_t seed_flag) {
    uint64_t seed = seed_flag_set ? seed_flag : config_seed;
    if (const char* env = std::getenv("LOSSFORGE_SEED")) {
        try {
            seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("LOSSFORGE_SEED must be an unsigned integer");
        }
    }
    return seed;
}

std::string loss_label(const std::string& arg) {
    const auto& names = builtin_names();
    if (std::find(names.begin(), names.end(), arg) != names.end()) return arg;
    std::string stem = fs::path(arg).stem().string();
    for (char& c : stem)
        if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    return stem.empty() ? "formula" : stem;
}

LossFn resolve_loss(const std::string& arg) {
    const auto& names = builtin_names();
    if (std::find(names.begin(), names.end(), arg) != names.end()) return builtin(arg);
    std::ifstream in(arg);
    if (!in) throw std::runtime_error("'" + arg + "' is neither a catalog loss (" +
                                      [&] {
                                          std::string s;
                                          for (const auto& n : names) s += n + "|";
                                          s.pop_back();
                                          return s;
                                      }() + ") nor a readable formula file");
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
    return loss_from_expr(loss_label(arg), parse(text));
}

int cmd_search(const std::string& config_path, bool seed_set, uint64_t seed_flag,
               int workers, const std::string& out_flag) {
    RunConfig cfg = load_config_file(config_path);
    cfg.seed = effective_seed(cfg.seed, seed_set, seed_flag);
    cfg.gp.seed = cfg.seed;
    if (!out_flag.empty()) cfg.output_dir = out_flag;

    std::vector<Dataset> datasets = materialize_all(cfg);
    for (const Dataset& d : datasets)
        std::cerr << "dataset " << d.name << ": " << d.samples() << " samples, "
                  << d.class_count << " classes, " << d.dims << " dims\n";

    ExperimentSpec spec;
    spec.mode = cfg.mode;
    spec.dataset_count = static_cast<int>(datasets.size());
    spec.runs_per_dataset = cfg.runs_per_dataset;
    spec.seed = derive_seed(cfg.seed, 0x657870);

    DatasetTrainerOracle trainer(std::move(datasets), cfg.hidden, cfg.trainer, cfg.fractions);
    if (spec.mode == ExperimentMode::VsBaseline) {
        std::cerr << "computing CE baseline errors...\n";
        spec.baseline_errors = compute_baseline_errors(spec, trainer);
        for (size_t d = 0; d < spec.baseline_errors.size(); ++d)
            std::cerr << "  baseline[" << d << "] = " << spec.baseline_errors[d] << "\n";
    }

    fs::create_directories(cfg.output_dir);
    {
        std::ifstream src(config_path, std::ios::binary);
        std::ofstream dst(fs::path(cfg.output_dir) / "config.json", std::ios::binary);
        dst << src.rdbuf();
    }
    std::ofstream hist(fs::path(cfg.output_dir) / "history.jsonl");
    if (!hist) throw std::runtime_error("cannot write history.jsonl");

    ExperimentFitnessOracle oracle(spec, trainer);
    GpSearch search(cfg.gp, oracle, workers);
    search.initialize();
    hist << record_json(search.history().records.back()).dump() << "\n" << std::flush;
    std::cerr << "gen 0: best " << to_string(search.best().fitness) << "\n";
    for (int g = 0; g < cfg.gp.generations; ++g) {
        search.step();
        const GenerationRecord& rec = search.history().records.back();
        hist << record_json(rec).dump() << "\n" << std::flush;
        std::cerr << "gen " << rec.generation << "/" << cfg.gp.generations << ": best "
                  << to_string(rec.best) << ", rejections " << rec.rejections << "\n";
    }

    const Individual& best = search.best();
    {
        std::ofstream out(fs::path(cfg.output_dir) / "best.loss");
        out << format(best.expr) << "\n";
    }
    json report;
    report["seed"] = cfg.seed;
    report["generations"] = cfg.gp.generations;
    report["population_size"] = cfg.gp.population_size;
    report["best_formula"] = format(best.expr);
    report["best_fitness"] = fitness_json(best.fitness);
    int total_rej = 0;
    for (const auto& r : search.history().records) total_rej += r.rejections;
    report["total_rejections"] = total_rej;
    {
        std::ofstream out(fs::path(cfg.output_dir) / "report.json");
        out << report.dump(2) << "\n";
    }
    std::cerr << "wrote " << cfg.output_dir << "/{config.json,history.jsonl,best.loss,report.json}\n";
    return 0;
}

int cmd_eval(const std::string& loss_arg, const std::string& config_path, bool seed_set,
             uint64_t seed_flag, const std::string& out_flag) {
    RunConfig cfg = load_config_file(config_path);
    cfg.seed = effective_seed(cfg.seed, seed_set, seed_flag);
    if (!out_flag.empty()) cfg.output_dir = out_flag;

    LossFn candidate = resolve_loss(loss_arg);
    std::vector<Dataset> datasets = materialize_all(cfg);
    std::vector<std::string> names;
    for (const auto& d : datasets) names.push_back(d.name);

    ExperimentSpec spec;
    spec.mode = ExperimentMode::SingleRun;
    spec.dataset_count = static_cast<int>(datasets.size());
    spec.runs_per_dataset = cfg.runs_per_dataset;
    spec.seed = derive_seed(cfg.seed, 0x657870);

    DatasetTrainerOracle trainer(std::move(datasets), cfg.hidden, cfg.trainer, cfg.fractions);
    const LossFn& ce = builtin("ce");

    json rows = json::array();
    std::ostringstream table;
    table << "dataset            mean_err   std_err    ce_err     delta_vs_ce%\n";
    for (int d = 0; d < spec.dataset_count; ++d) {
        std::vector<double> errs, ce_errs;
        for (int k = 0; k < spec.runs_per_dataset; ++k) {
            uint64_t s = run_seed(spec, d, k);
            std::cerr << "dataset " << names[d] << " run " << k + 1 << "/"
                      << spec.runs_per_dataset << "\n";
            errs.push_back(trainer.run(candidate, d, s));
            ce_errs.push_back(trainer.run(ce, d, s));
        }
        auto mean = [](const std::vector<double>& v) {
            double s = 0;
            for (double x : v) s += x;
            return s / v.size();
        };
        double m = mean(errs), cm = mean(ce_errs);
        double var = 0;
        for (double x : errs) var += (x - m) * (x - m);
        double sd = std::sqrt(var / errs.size());
        double delta = cm > 0 ? (cm - m) / cm * 100.0 : 0.0;
        json row;
        row["dataset"] = names[d];
        row["mean_error"] = m;
        row["std_error"] = sd;
        row["ce_error"] = cm;
        row["delta_vs_ce_pct"] = delta;
        rows.push_back(row);
        char line[160];
        std::snprintf(line, sizeof(line), "%-18s %-10.4f %-10.4f %-10.4f %+.2f\n",
                      names[d].c_str(), m, sd, cm, delta);
        table << line;
    }

    fs::create_directories(cfg.output_dir);
    std::string label = loss_label(loss_arg);
    json doc;
    doc["loss"] = label;
    doc["runs_per_dataset"] = spec.runs_per_dataset;
    doc["seed"] = cfg.seed;
    doc["rows"] = rows;
    {
        std::ofstream out(fs::path(cfg.output_dir) / ("eval_" + label + ".json"));
        out << doc.dump(2) << "\n";
    }
    {
        std::ofstream out(fs::path(cfg.output_dir) / ("eval_" + label + ".txt"));
        out << table.str();
    }
    std::cout << table.str();
    return 0;
}

int cmd_landscape(const std::string& loss_arg, int y_real, double step,
                  const std::string& out_dir) {
    LossFn loss = resolve_loss(loss_arg);
    LandscapeCurve curve = sample_landscape(loss, y_real, step);
    LandscapeReport report = analyze(curve);

    fs::create_directories(out_dir);
    std::string label = loss_label(loss_arg);
    std::string base = "landscape_" + label + "_r" + std::to_string(y_real);
    fs::path csv_path = fs::path(out_dir) / (base + ".csv");
    fs::path json_path = fs::path(out_dir) / (base + ".json");
    write_curve_csv(curve, csv_path.string());
    {
        std::ofstream out(json_path);
        out << report_to_json(report) << "\n";
    }
    std::cerr << label << " (y_real=" << y_real << "): argmin " << report.argmin << ", shape "
              << shape_name(report.shape) << ", increase-near-1 "
              << (report.increase_near_one ? "yes" : "no") << "\n";
    std::cerr << "wrote " << csv_path.string() << ", " << json_path.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"lossforge: evolves symbolic classification losses with tree-based GP,\n"
                 "scores them by training a small dense classifier, and analyzes their\n"
                 "binary-reduction landscapes"};
    app.require_subcommand(1);

    std::string config_path, loss_arg, out_dir;
    uint64_t seed_flag = 0;
    int workers = static_cast<int>(std::thread::hardware_concurrency());
    int y_real = 1;
    double step = 1e-3;

    auto* search = app.add_subcommand("search", "run the evolutionary loss search");
    search->add_option("--config", config_path, "run configuration (JSON)")->required();
    auto* search_seed = search->add_option("--seed", seed_flag, "master seed override");
    search->add_option("--workers", workers, "parallel fitness workers");
    search->add_option("--out", out_dir, "output directory override");

    auto* eval = app.add_subcommand("eval", "train and score a loss against the CE baseline");
    eval->add_option("loss", loss_arg, "catalog name or formula file")->required();
    eval->add_option("--config", config_path, "run configuration (JSON)")->required();
    auto* eval_seed = eval->add_option("--seed", seed_flag, "master seed override");
    eval->add_option("--out", out_dir, "output directory override");

    auto* land = app.add_subcommand("landscape", "binary-reduction landscape of a loss");
    land->alias("analyze");
    land->add_option("loss", loss_arg, "catalog name or formula file")->required();
    land->add_option("--y-real", y_real, "fixed true label (0 or 1)")
        ->check(CLI::IsMember({0, 1}));
    land->add_option("--step", step, "grid step in (0, 0.5]");
    land->add_option("--out", out_dir, "output directory (default: .)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (search->parsed())
            return cmd_search(config_path, search_seed->count() > 0, seed_flag, workers, out_dir);
        if (eval->parsed())
            return cmd_eval(loss_arg, config_path, eval_seed->count() > 0, seed_flag, out_dir);
        if (land->parsed())
            return cmd_landscape(loss_arg, y_real, step, out_dir.empty() ? "." : out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
