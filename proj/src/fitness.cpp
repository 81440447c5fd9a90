#include "lossforge/fitness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "lossforge/rng.hpp"

namespace lossforge {

int compare(const FitnessValue& a, const FitnessValue& b) {
    if (a.shape != b.shape)
        throw std::invalid_argument("compare: fitness shapes must match within one experiment");
    if (a.shape == FitnessValue::Shape::Scalar) {
        if (a.error < b.error) return -1;
        if (a.error > b.error) return 1;
        return 0;
    }
    if (a.wins != b.wins) return a.wins > b.wins ? -1 : 1;
    if (a.wins > 0) {
        // equal wins: higher mean improvement is better
        if (a.mean_second > b.mean_second) return -1;
        if (a.mean_second < b.mean_second) return 1;
        return 0;
    }
    // no wins on either side: lower mean degradation is better
    if (a.mean_second < b.mean_second) return -1;
    if (a.mean_second > b.mean_second) return 1;
    return 0;
}

std::string to_string(const FitnessValue& f) {
    std::ostringstream os;
    if (f.shape == FitnessValue::Shape::Scalar)
        os << "error=" << f.error;
    else
        os << "wins=" << f.wins << " mean%=" << f.mean_second;
    return os.str();
}

namespace {

std::vector<double> floored_point(std::vector<double> p, double floor_val) {
    double sum = 0.0;
    for (double& x : p) {
        if (x < floor_val) x = floor_val;
        sum += x;
    }
    for (double& x : p) x /= sum;
    return p;
}

void push_probes(std::vector<EvalPoint>& out, const std::vector<double>& y_pred, int n) {
    for (int c = 0; c < n; ++c) {
        std::vector<double> y_real(n, 0.0);
        y_real[c] = 1.0;
        out.emplace_back(y_pred, y_real);
    }
}

} // namespace

std::vector<EvalPoint> range_probes(const RangeCheckSpec& spec) {
    std::vector<EvalPoint> probes;
    for (int n : spec.class_counts) {
        // corners
        for (int i = 0; i < n; ++i) {
            std::vector<double> p(n, 0.0);
            p[i] = 1.0;
            push_probes(probes, floored_point(p, spec.component_floor), n);
        }
        // edges between every vertex pair
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                for (int k = 1; k + 1 < spec.points_per_edge; ++k) {
                    double t = static_cast<double>(k) / (spec.points_per_edge - 1);
                    std::vector<double> p(n, 0.0);
                    p[i] = t;
                    p[j] = 1.0 - t;
                    push_probes(probes, floored_point(p, spec.component_floor), n);
                }
            }
        }
        // interior: barycenter and blends toward each corner
        std::vector<double> bary(n, 1.0 / n);
        push_probes(probes, bary, n);
        for (int i = 0; i < n; ++i) {
            for (double t : {0.25, 0.5, 0.75}) {
                std::vector<double> p(n, (1.0 - t) / n);
                p[i] += t;
                push_probes(probes, floored_point(p, spec.component_floor), n);
            }
        }
    }
    return probes;
}

RangeCheckResult range_check(const LossExpr& expr, const RangeCheckSpec& spec) {
    LossExpr deriv = differentiate(expr);
    const std::vector<EvalPoint> probes = range_probes(spec);

    // the tree is a scalar function of (p, r); cache per distinct pair
    std::map<std::pair<double, double>, std::pair<double, double>> cache;
    auto term = [&](double p, double r) -> const std::pair<double, double>& {
        auto key = std::make_pair(p, r);
        auto it = cache.find(key);
        if (it == cache.end()) {
            double v = eval_scalar(expr.root(), p, r);
            double g = eval_scalar(deriv.root(), p, r);
            it = cache.emplace(key, std::make_pair(v, g)).first;
        }
        return it->second;
    };

    RangeCheckResult res;
    for (const EvalPoint& pt : probes) {
        const int n = static_cast<int>(pt.classes());
        double sum = 0.0;
        bool bad_grad = false;
        bool bad_value = false;
        for (int i = 0; i < n; ++i) {
            const auto& [v, g] = term(pt.y_pred[i], pt.y_real[i]);
            if (!std::isfinite(v)) bad_value = true;
            if (!std::isfinite(g)) bad_grad = true;
            sum += v;
        }
        double mean = sum / n;
        std::ostringstream why;
        if (bad_value || !std::isfinite(mean))
            why << "non-finite value";
        else if (std::fabs(mean) < spec.lower)
            why << "|value| " << std::fabs(mean) << " below " << spec.lower;
        else if (std::fabs(mean) > spec.upper)
            why << "|value| " << std::fabs(mean) << " above " << spec.upper;
        else if (bad_grad)
            why << "non-finite gradient";
        else
            continue;
        res.pass = false;
        res.reason = why.str();
        res.probe_y_pred = pt.y_pred;
        res.probe_y_real = pt.y_real;
        return res;
    }
    res.pass = true;
    return res;
}

ExperimentMode experiment_mode_from_string(const std::string& s) {
    if (s == "single-run") return ExperimentMode::SingleRun;
    if (s == "multi-run") return ExperimentMode::MultiRun;
    if (s == "vs-baseline") return ExperimentMode::VsBaseline;
    throw std::invalid_argument("unknown experiment mode '" + s +
                                "' (expected single-run|multi-run|vs-baseline)");
}

const char* to_string(ExperimentMode m) {
    switch (m) {
        case ExperimentMode::SingleRun: return "single-run";
        case ExperimentMode::MultiRun: return "multi-run";
        case ExperimentMode::VsBaseline: return "vs-baseline";
    }
    return "?";
}

uint64_t run_seed(const ExperimentSpec& spec, int dataset_index, int run_index) {
    return derive_seed(spec.seed, 0x66697474, static_cast<uint64_t>(dataset_index),
                       static_cast<uint64_t>(run_index));
}

namespace {

void check_spec(const ExperimentSpec& spec) {
    if (spec.dataset_count < 1) throw std::invalid_argument("experiment: need a dataset");
    if (spec.runs_per_dataset < 1) throw std::invalid_argument("experiment: runs_per_dataset >= 1");
    if (spec.mode == ExperimentMode::VsBaseline &&
        static_cast<int>(spec.baseline_errors.size()) != spec.dataset_count)
        throw std::invalid_argument(
            "experiment: vs-baseline mode requires one baseline error per dataset");
}

} // namespace

FitnessValue evaluate_fitness(const LossFn& loss, const ExperimentSpec& spec,
                              TrainerOracle& trainer) {
    check_spec(spec);
    std::vector<double> per_dataset(spec.dataset_count, 0.0);
    for (int d = 0; d < spec.dataset_count; ++d) {
        double sum = 0.0;
        for (int k = 0; k < spec.runs_per_dataset; ++k)
            sum += trainer.run(loss, d, run_seed(spec, d, k));
        per_dataset[d] = sum / spec.runs_per_dataset;
    }

    if (spec.mode != ExperimentMode::VsBaseline) {
        double mean = 0.0;
        for (double e : per_dataset) mean += e;
        return FitnessValue::scalar(mean / per_dataset.size());
    }

    // improvement % relative to CE; a win requires strictly lower error
    int wins = 0;
    double win_sum = 0.0, loss_sum = 0.0;
    for (int d = 0; d < spec.dataset_count; ++d) {
        double ce = spec.baseline_errors[d];
        double imp = (ce - per_dataset[d]) / ce * 100.0;
        if (per_dataset[d] < ce) {
            ++wins;
            win_sum += imp;
        }
        loss_sum += -imp;  // degradation
    }
    if (wins > 0) return FitnessValue::vs_baseline(wins, win_sum / wins);
    return FitnessValue::vs_baseline(0, loss_sum / spec.dataset_count);
}

FitnessValue evaluate_fitness(const LossExpr& expr, const ExperimentSpec& spec,
                              TrainerOracle& trainer) {
    return evaluate_fitness(loss_from_expr(format(expr), expr), spec, trainer);
}

std::vector<double> compute_baseline_errors(const ExperimentSpec& spec, TrainerOracle& trainer) {
    const LossFn& ce = builtin("ce");
    std::vector<double> out(spec.dataset_count, 0.0);
    for (int d = 0; d < spec.dataset_count; ++d) {
        double sum = 0.0;
        for (int k = 0; k < spec.runs_per_dataset; ++k)
            sum += trainer.run(ce, d, run_seed(spec, d, k));
        out[d] = sum / spec.runs_per_dataset;
    }
    return out;
}

DatasetTrainerOracle::DatasetTrainerOracle(std::vector<Dataset> datasets,
                                           std::vector<int> hidden_widths,
                                           TrainConfig train_config, SplitFractions fractions)
    : datasets_(std::move(datasets)), hidden_(std::move(hidden_widths)),
      config_(train_config), fractions_(fractions) {
    if (datasets_.empty()) throw std::invalid_argument("trainer oracle: no datasets");
}

double DatasetTrainerOracle::run(const LossFn& loss, int dataset_index, uint64_t seed) {
    const Dataset& ds = datasets_.at(dataset_index);
    DatasetSplit sp = split(ds, fractions_, derive_seed(seed, 0x73706c74));
    ClassifierModel model(ds.dims, hidden_, ds.class_count, derive_seed(seed, 0x6d6f64));
    TrainConfig cfg = config_;
    cfg.seed = derive_seed(seed, 0x747261696e);
    TrainReport rep = train(model, ds, sp, loss, cfg);
    return rep.diverged ? 1.0 : rep.final_val_error;
}

} // namespace lossforge
