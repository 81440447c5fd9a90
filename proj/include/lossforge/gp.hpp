#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lossforge/expr.hpp"
#include "lossforge/fitness.hpp"
#include "lossforge/rng.hpp"

namespace lossforge {

struct GpConfig {
    int population_size = 16;
    int generations = 100;
    double subtree_mutation_rate = 0.3;
    double point_mutation_rate = 0.1;
    double crossover_rate = 0.7;
    double archive_save_prob = 0.5;
    double archive_use_prob = 0.5;
    int archive_capacity = 0;  // 0 means equal to population_size
    TreeConstraints constraints;
    RangeCheckSpec range_spec;
    uint64_t seed = 0;

    int capacity() const { return archive_capacity > 0 ? archive_capacity : population_size; }
    void check() const;  // throws std::invalid_argument naming the bad field
};

struct Individual {
    LossExpr expr;
    FitnessValue fitness;
    long id = -1;
    long parent_id = -1;
    long mate_id = -1;
    int size = 0;
};

// Bounded pool of non-selected individuals reused as crossover mates.
struct Archive {
    std::vector<Individual> members;
};

struct GenerationRecord {
    int generation = 0;
    FitnessValue best;
    double mean_metric = 0.0;  // mean error (scalar shape) or mean wins
    std::string best_formula;
    int rejections = 0;  // candidates discarded by the range check
};

struct SearchHistory {
    std::vector<GenerationRecord> records;
};

// Scores a candidate that already passed the range check. Implementations
// must be re-entrant; evaluation may run on worker threads.
class FitnessOracle {
public:
    virtual ~FitnessOracle() = default;
    virtual FitnessValue evaluate(const LossExpr& expr) = 0;
};

// Bridges the search loop to the experiment-driven fitness definition.
class ExperimentFitnessOracle : public FitnessOracle {
public:
    ExperimentFitnessOracle(ExperimentSpec spec, TrainerOracle& trainer)
        : spec_(std::move(spec)), trainer_(trainer) {}
    FitnessValue evaluate(const LossExpr& expr) override {
        return evaluate_fitness(expr, spec_, trainer_);
    }
    const ExperimentSpec& spec() const { return spec_; }

private:
    ExperimentSpec spec_;
    TrainerOracle& trainer_;
};

// --- variation operators ---

// With probability crossover_rate, replaces a uniformly chosen subtree of a
// copy of `parent` with a uniformly chosen subtree of a mate drawn from the
// archive (probability archive_use_prob, when non-empty) or uniformly from
// the population excluding the parent. Otherwise returns a copy of the
// parent. Constraint violations retry the operator, then fall back to the
// parent copy. mate_id_out (optional) reports the mate used, -1 for none.
LossExpr crossover(const Individual& parent, const std::vector<Individual>& population,
                   const Archive& archive, const GpConfig& config, Rng& rng,
                   long* mate_id_out = nullptr);

// Replaces a uniformly chosen node's subtree with a fresh random subtree.
LossExpr mutate_subtree(const LossExpr& expr, const GpConfig& config, Rng& rng);

// Replaces a uniformly chosen node with a different random node of the same
// arity (terminals and constants count as one arity class).
LossExpr mutate_point(const LossExpr& expr, const GpConfig& config, Rng& rng);

// --- search loop ---

class GpSearch {
public:
    GpSearch(GpConfig config, FitnessOracle& oracle, int workers = 1);

    // Population of evaluated, range-checked individuals (generation 0).
    void initialize();
    // One generation: n children, evaluate, elitist select n of 2n, archive.
    void step();
    // initialize() plus `generations` steps.
    void run();

    const std::vector<Individual>& population() const { return population_; }
    const Archive& archive() const { return archive_; }
    const SearchHistory& history() const { return history_; }
    const Individual& best() const;
    int generation() const { return generation_; }

private:
    LossExpr make_accepted_random_tree(int* rejections);
    std::vector<FitnessValue> evaluate_all(const std::vector<LossExpr>& exprs);
    void record_generation(int rejections);

    GpConfig config_;
    FitnessOracle& oracle_;
    int workers_;
    Rng var_rng_;
    long next_id_ = 0;
    int generation_ = 0;
    std::vector<Individual> population_;  // kept in selection order, best first
    Archive archive_;
    SearchHistory history_;
};

} // namespace lossforge
