#include "lossforge/gp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace lossforge {

void GpConfig::check() const {
    auto rate = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument(std::string("gp.") + name + " must lie in [0,1]");
    };
    rate(subtree_mutation_rate, "subtree_mutation_rate");
    rate(point_mutation_rate, "point_mutation_rate");
    rate(crossover_rate, "crossover_rate");
    rate(archive_save_prob, "archive_save_prob");
    rate(archive_use_prob, "archive_use_prob");
    if (population_size < 2) throw std::invalid_argument("gp.population_size must be >= 2");
    if (generations < 0) throw std::invalid_argument("gp.generations must be >= 0");
    if (archive_capacity < 0) throw std::invalid_argument("gp.archive_capacity must be >= 0");
    if (constraints.min_height < 1) throw std::invalid_argument("gp.min_height must be >= 1");
    if (constraints.max_size < 3) throw std::invalid_argument("gp.max_size must be >= 3");
}

namespace {

bool satisfies(const LossExpr& e, const TreeConstraints& c) { return validate(e, c).pass(); }

} // namespace

LossExpr crossover(const Individual& parent, const std::vector<Individual>& population,
                   const Archive& archive, const GpConfig& config, Rng& rng,
                   long* mate_id_out) {
    if (mate_id_out) *mate_id_out = -1;
    if (!rng.bernoulli(config.crossover_rate)) return parent.expr;

    for (int attempt = 0; attempt <= config.constraints.max_retries; ++attempt) {
        const Individual* mate = nullptr;
        if (!archive.members.empty() && rng.bernoulli(config.archive_use_prob)) {
            mate = &archive.members[rng.index(archive.members.size())];
        } else {
            // uniform over the population excluding the parent
            std::vector<const Individual*> pool;
            pool.reserve(population.size());
            for (const Individual& ind : population)
                if (ind.id != parent.id) pool.push_back(&ind);
            if (pool.empty()) return parent.expr;
            mate = pool[rng.index(pool.size())];
        }
        int target = static_cast<int>(rng.index(tree_size(parent.expr.root())));
        int source = static_cast<int>(rng.index(tree_size(mate->expr.root())));
        LossExpr child = replace_subtree(parent.expr, target, *node_at(mate->expr.root(), source));
        if (satisfies(child, config.constraints)) {
            if (mate_id_out) *mate_id_out = mate->id;
            return child;
        }
    }
    return parent.expr;
}

LossExpr mutate_subtree(const LossExpr& expr, const GpConfig& config, Rng& rng) {
    const int size = tree_size(expr.root());
    for (int attempt = 0; attempt <= config.constraints.max_retries; ++attempt) {
        int target = static_cast<int>(rng.index(size));
        int removed = tree_size(*node_at(expr.root(), target));
        int budget = config.constraints.max_size - (size - removed);
        NodePtr fresh = random_subtree(config.constraints, budget, rng);
        LossExpr child = replace_subtree(expr, target, *fresh);
        if (satisfies(child, config.constraints)) return child;
    }
    return expr;
}

LossExpr mutate_point(const LossExpr& expr, const GpConfig& config, Rng& rng) {
    const int size = tree_size(expr.root());
    for (int attempt = 0; attempt <= config.constraints.max_retries; ++attempt) {
        int target = static_cast<int>(rng.index(size));
        const Node* old = node_at(expr.root(), target);
        Node repl;
        switch (old->kind) {
            case NodeKind::Unary: {
                UnaryOp op;
                do {
                    op = kSampledUnaryOps[rng.index(std::size(kSampledUnaryOps))];
                } while (op == old->uop);
                repl.kind = NodeKind::Unary;
                repl.uop = op;
                repl.left = clone(*old->left);
                break;
            }
            case NodeKind::Binary: {
                BinaryOp op;
                do {
                    op = kSampledBinaryOps[rng.index(std::size(kSampledBinaryOps))];
                } while (op == old->bop);
                repl.kind = NodeKind::Binary;
                repl.bop = op;
                repl.left = clone(*old->left);
                repl.right = clone(*old->right);
                break;
            }
            default: {
                // terminal or constant: redraw until the node changes
                do {
                    switch (rng.index(3)) {
                        case 0: repl.kind = NodeKind::Pred; break;
                        case 1: repl.kind = NodeKind::Real; break;
                        default:
                            repl.kind = NodeKind::Constant;
                            repl.value = rng.uniform(config.constraints.constant_min,
                                                     config.constraints.constant_max);
                    }
                } while (repl.kind == old->kind &&
                         (repl.kind != NodeKind::Constant || repl.value == old->value));
                break;
            }
        }
        LossExpr child = replace_subtree(expr, target, repl);
        if (satisfies(child, config.constraints)) return child;
    }
    return expr;
}

GpSearch::GpSearch(GpConfig config, FitnessOracle& oracle, int workers)
    : config_(std::move(config)), oracle_(oracle), workers_(std::max(1, workers)),
      var_rng_(derive_seed(config_.seed, 0x766172)) {
    config_.check();
}

LossExpr GpSearch::make_accepted_random_tree(int* rejections) {
    const int budget = config_.constraints.max_retries * config_.population_size;
    for (int attempt = 0; attempt < budget; ++attempt) {
        LossExpr tree = random_tree(config_.constraints, var_rng_);
        if (range_check(tree, config_.range_spec).pass) return tree;
        ++*rejections;
    }
    throw ConstructionError("could not generate a range-accepted tree within " +
                            std::to_string(budget) + " attempts");
}

std::vector<FitnessValue> GpSearch::evaluate_all(const std::vector<LossExpr>& exprs) {
    std::vector<FitnessValue> out(exprs.size());
    if (workers_ <= 1 || exprs.size() <= 1) {
        for (size_t i = 0; i < exprs.size(); ++i) out[i] = oracle_.evaluate(exprs[i]);
        return out;
    }
    std::vector<std::exception_ptr> errors(exprs.size());
    std::vector<std::thread> threads;
    const int nw = std::min<int>(workers_, static_cast<int>(exprs.size()));
    for (int w = 0; w < nw; ++w) {
        threads.emplace_back([&, w] {
            for (size_t i = w; i < exprs.size(); i += nw) {
                try {
                    out[i] = oracle_.evaluate(exprs[i]);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);  // first by slot order
    return out;
}

void GpSearch::record_generation(int rejections) {
    const Individual& top = population_.front();
    GenerationRecord rec;
    rec.generation = generation_;
    rec.best = top.fitness;
    rec.best_formula = format(top.expr);
    rec.rejections = rejections;
    double sum = 0.0;
    for (const Individual& ind : population_)
        sum += ind.fitness.shape == FitnessValue::Shape::Scalar ? ind.fitness.error
                                                                : ind.fitness.wins;
    rec.mean_metric = sum / population_.size();
    history_.records.push_back(rec);
}

namespace {

// fitness, then parsimony, then id: a deterministic total order
bool selection_less(const Individual& a, const Individual& b) {
    int c = compare(a.fitness, b.fitness);
    if (c != 0) return c < 0;
    if (a.size != b.size) return a.size < b.size;
    return a.id < b.id;
}

} // namespace

void GpSearch::initialize() {
    population_.clear();
    archive_.members.clear();
    history_.records.clear();
    generation_ = 0;
    next_id_ = 0;

    int rejections = 0;
    std::vector<LossExpr> exprs;
    exprs.reserve(config_.population_size);
    for (int i = 0; i < config_.population_size; ++i)
        exprs.push_back(make_accepted_random_tree(&rejections));
    std::vector<FitnessValue> fits = evaluate_all(exprs);

    for (int i = 0; i < config_.population_size; ++i) {
        Individual ind;
        ind.expr = std::move(exprs[i]);
        ind.fitness = fits[i];
        ind.id = next_id_++;
        ind.size = tree_size(ind.expr.root());
        population_.push_back(std::move(ind));
    }
    std::sort(population_.begin(), population_.end(), selection_less);
    record_generation(rejections);
}

void GpSearch::step() {
    if (population_.empty()) throw std::logic_error("step() before initialize()");
    int rejections = 0;

    // variation is sequential so parallel fitness evaluation can never
    // perturb the random sequence
    struct Pending {
        LossExpr expr;
        long parent_id;
        long mate_id;
    };
    std::vector<Pending> children;
    children.reserve(config_.population_size);
    for (int i = 0; i < config_.population_size; ++i) {
        const Individual& parent = population_[i];
        long mate_id = -1;
        LossExpr child = crossover(parent, population_, archive_, config_, var_rng_, &mate_id);
        if (var_rng_.bernoulli(config_.subtree_mutation_rate))
            child = mutate_subtree(child, config_, var_rng_);
        if (var_rng_.bernoulli(config_.point_mutation_rate))
            child = mutate_point(child, config_, var_rng_);
        long parent_id = parent.id;
        if (!range_check(child, config_.range_spec).pass) {
            ++rejections;
            child = make_accepted_random_tree(&rejections);
            parent_id = -1;
            mate_id = -1;
        }
        children.push_back({std::move(child), parent_id, mate_id});
    }

    std::vector<LossExpr> exprs;
    exprs.reserve(children.size());
    for (const auto& c : children) exprs.push_back(c.expr);
    // any oracle failure propagates here, before state changes
    std::vector<FitnessValue> fits = evaluate_all(exprs);

    std::vector<Individual> combined = population_;
    for (size_t i = 0; i < children.size(); ++i) {
        Individual ind;
        ind.expr = std::move(children[i].expr);
        ind.fitness = fits[i];
        ind.id = next_id_++;
        ind.parent_id = children[i].parent_id;
        ind.mate_id = children[i].mate_id;
        ind.size = tree_size(ind.expr.root());
        combined.push_back(std::move(ind));
    }
    std::sort(combined.begin(), combined.end(), selection_less);

    population_.assign(combined.begin(), combined.begin() + config_.population_size);

    // non-selected individuals may enter the archive (id order, so the
    // random sequence does not depend on sort details)
    std::vector<Individual> discarded(combined.begin() + config_.population_size,
                                      combined.end());
    std::sort(discarded.begin(), discarded.end(),
              [](const Individual& a, const Individual& b) { return a.id < b.id; });
    for (Individual& ind : discarded) {
        if (!var_rng_.bernoulli(config_.archive_save_prob)) continue;
        if (static_cast<int>(archive_.members.size()) < config_.capacity())
            archive_.members.push_back(std::move(ind));
        else
            archive_.members[var_rng_.index(archive_.members.size())] = std::move(ind);
    }

    ++generation_;
    record_generation(rejections);
}

void GpSearch::run() {
    initialize();
    for (int g = 0; g < config_.generations; ++g) step();
}

const Individual& GpSearch::best() const {
    if (population_.empty()) throw std::logic_error("best() before initialize()");
    return population_.front();
}

} // namespace lossforge
