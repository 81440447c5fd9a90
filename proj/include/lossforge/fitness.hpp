#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lossforge/expr.hpp"
#include "lossforge/losses.hpp"
#include "lossforge/nn.hpp"

namespace lossforge {

// Either a plain validation error (lower is better) or a
// (wins, mean-percentage) pair from the comparison against the CE baseline.
// The two shapes never mix within one experiment.
struct FitnessValue {
    enum class Shape { Scalar, VsBaseline };

    Shape shape = Shape::Scalar;
    double error = 1.0;        // Scalar
    int wins = 0;              // VsBaseline
    double mean_second = 0.0;  // improvement % over winning datasets, or mean
                               // degradation % when wins == 0

    static FitnessValue scalar(double err) {
        FitnessValue f;
        f.shape = Shape::Scalar;
        f.error = err;
        return f;
    }
    static FitnessValue vs_baseline(int wins, double mean_second) {
        FitnessValue f;
        f.shape = Shape::VsBaseline;
        f.wins = wins;
        f.mean_second = mean_second;
        return f;
    }
};

// Total preorder within each shape; throws std::invalid_argument on mixed
// shapes. Scalar: lower error wins. VsBaseline: more wins beat fewer; equal
// wins > 0 compare by higher mean improvement; zero wins on both sides
// compare by lower mean degradation.
// Returns <0 when a is better, 0 on ties, >0 when b is better.
int compare(const FitnessValue& a, const FitnessValue& b);
inline bool better(const FitnessValue& a, const FitnessValue& b) { return compare(a, b) < 0; }

std::string to_string(const FitnessValue& f);

// Candidate rejection by value range. Probes are a deterministic grid over
// the y_pred simplex (corners, edges, interior blends) crossed with every
// one-hot label; components are floored away from exact zero since softmax
// outputs are strictly positive.
struct RangeCheckSpec {
    double lower = 1e-5;
    double upper = 1e5;
    std::vector<int> class_counts = {2, 3, 10};
    int points_per_edge = 21;
    double component_floor = 1e-3;
};

struct RangeCheckResult {
    bool pass = false;
    std::string reason;                // empty when pass
    std::vector<double> probe_y_pred;  // first violating probe
    std::vector<double> probe_y_real;
};

// Pass iff every probe value is finite with |value| in [lower, upper] and
// the symbolic gradient is finite at every probe.
RangeCheckResult range_check(const LossExpr& expr, const RangeCheckSpec& spec);

// The deterministic probe grid itself (exposed for tests).
std::vector<EvalPoint> range_probes(const RangeCheckSpec& spec);

enum class ExperimentMode { SingleRun, MultiRun, VsBaseline };

ExperimentMode experiment_mode_from_string(const std::string& s);
const char* to_string(ExperimentMode m);

struct ExperimentSpec {
    ExperimentMode mode = ExperimentMode::SingleRun;
    int dataset_count = 1;
    int runs_per_dataset = 1;
    uint64_t seed = 0;                    // shared by every candidate: same
                                          // splits and model seeds for all
    std::vector<double> baseline_errors;  // per dataset; required in
                                          // VsBaseline mode
};

// Scores one (loss, dataset, run) cell: fresh split, fresh model, train,
// return the validation error. Implementations must be re-entrant.
class TrainerOracle {
public:
    virtual ~TrainerOracle() = default;
    virtual double run(const LossFn& loss, int dataset_index, uint64_t run_seed) = 0;
};

// Deterministic per-cell seed, identical across candidates.
uint64_t run_seed(const ExperimentSpec& spec, int dataset_index, int run_index);

// Train/evaluate per dataset and run, then fold into a FitnessValue
// according to the experiment mode. Trainer failures propagate (the search
// layer regenerates the candidate).
FitnessValue evaluate_fitness(const LossExpr& expr, const ExperimentSpec& spec,
                              TrainerOracle& trainer);
FitnessValue evaluate_fitness(const LossFn& loss, const ExperimentSpec& spec,
                              TrainerOracle& trainer);

// CE-baseline errors per dataset with the exact seeds candidates will see.
std::vector<double> compute_baseline_errors(const ExperimentSpec& spec, TrainerOracle& trainer);

// Trainer backed by the dense classifier on in-memory datasets.
class DatasetTrainerOracle : public TrainerOracle {
public:
    DatasetTrainerOracle(std::vector<Dataset> datasets, std::vector<int> hidden_widths,
                         TrainConfig train_config, SplitFractions fractions = {});

    double run(const LossFn& loss, int dataset_index, uint64_t run_seed) override;
    const std::vector<Dataset>& datasets() const { return datasets_; }

private:
    std::vector<Dataset> datasets_;
    std::vector<int> hidden_;
    TrainConfig config_;
    SplitFractions fractions_;
};

} // namespace lossforge
