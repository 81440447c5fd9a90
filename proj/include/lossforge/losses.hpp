#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lossforge/expr.hpp"

namespace lossforge {

// Constants of the discovered loss formulas; fixed, never configurable.
namespace discovered {
inline constexpr double kAlpha = 2.4092;
inline constexpr double kBeta = 1.5494;
inline constexpr double kGamma = 3.8235;
inline constexpr double kDelta = 3.1868;
inline constexpr double kZeta = 2.4428;
inline constexpr double kEta = 2.6085;
} // namespace discovered

// A classification loss: scalar value plus the gradient with respect to each
// y_pred component (other components held fixed; softmax coupling is applied
// later in the model's backward pass). Entries are immutable and safe to
// share across workers.
struct LossFn {
    std::string name;
    std::optional<LossExpr> tree;  // present for ngl / f1..f5
    std::function<double(const EvalPoint&)> value;
    std::function<std::vector<double>(const EvalPoint&)> grad;
};

// Catalog lookup. Valid names: ce, sce, focal, dice, ngl, f1..f5.
// f5 and ngl resolve to the same object. Throws std::invalid_argument on
// unknown names.
const LossFn& builtin(const std::string& name);
const std::vector<std::string>& builtin_names();

// Baselines with non-default hyperparameters (defaults: focal 2.0, sce 1/1).
LossFn make_focal(double focusing);
LossFn make_sce(double w_ce, double w_rce);

// Wrap an arbitrary formula: value by tree evaluation, gradient by the
// symbolic derivative (differentiated once up front).
LossFn loss_from_expr(std::string name, const LossExpr& expr);

// Expression-tree forms of the discovered losses.
LossExpr ngl_tree();
LossExpr f1_tree();
LossExpr f2_tree();
LossExpr f3_tree();
LossExpr f4_tree();

} // namespace lossforge
