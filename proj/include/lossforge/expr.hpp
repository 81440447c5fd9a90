#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "lossforge/rng.hpp"

namespace lossforge {

// Protected-operator epsilon, fixed globally.
inline constexpr double kEps = 1e-8;

enum class NodeKind : uint8_t { Pred, Real, Constant, Unary, Binary };

// Abs and Sign are internal operators: differentiation emits them, but they
// are never sampled when generating or mutating trees.
enum class UnaryOp : uint8_t { Negate, Sqrt, Log, Exp, Sin, Cos, Abs, Sign };
enum class BinaryOp : uint8_t { Add, Sub, Mul, Div };

inline constexpr UnaryOp kSampledUnaryOps[] = {
    UnaryOp::Negate, UnaryOp::Sqrt, UnaryOp::Log,
    UnaryOp::Exp,    UnaryOp::Sin,  UnaryOp::Cos,
};
inline constexpr BinaryOp kSampledBinaryOps[] = {
    BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div,
};

struct Node {
    NodeKind kind = NodeKind::Constant;
    UnaryOp uop = UnaryOp::Negate;
    BinaryOp bop = BinaryOp::Add;
    double value = 0.0;
    std::unique_ptr<Node> left;   // unary child lives here
    std::unique_ptr<Node> right;
};

using NodePtr = std::unique_ptr<Node>;

NodePtr clone(const Node& n);

NodePtr make_pred();
NodePtr make_real();
NodePtr make_const(double v);
NodePtr make_unary(UnaryOp op, NodePtr child);
NodePtr make_binary(BinaryOp op, NodePtr lhs, NodePtr rhs);

// An immutable symbolic loss formula. Trees are scalar functions of one
// (y_pred, y_real) component pair; evaluation over a point averages the
// per-class values. Copies are deep; all variation operators return new
// trees, so sharing const references across workers is safe.
class LossExpr {
public:
    LossExpr() = default;
    explicit LossExpr(NodePtr root) : root_(std::move(root)) {}
    LossExpr(const LossExpr& other) : root_(other.root_ ? clone(*other.root_) : nullptr) {}
    LossExpr(LossExpr&&) noexcept = default;
    LossExpr& operator=(const LossExpr& other) {
        if (this != &other) root_ = other.root_ ? clone(*other.root_) : nullptr;
        return *this;
    }
    LossExpr& operator=(LossExpr&&) noexcept = default;

    const Node& root() const { return *root_; }
    bool empty() const { return root_ == nullptr; }

private:
    NodePtr root_;
};

struct TreeConstraints {
    int min_height = 2;
    int max_size = 100;
    double constant_min = -5.0;
    double constant_max = 5.0;
    int max_retries = 5;
};

struct ConstructionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Evaluation of a class term produced a non-finite value.
struct EvalError : std::runtime_error {
    EvalError(const std::string& msg, int cls) : std::runtime_error(msg), class_index(cls) {}
    int class_index;
};

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, size_t pos)
        : std::runtime_error(msg + " at position " + std::to_string(pos)), position(pos) {}
    size_t position;
};

// A softmax output paired with a one-hot label.
// y_pred entries in [0,1] summing to 1 (1e-9 tolerance), y_real one-hot.
struct EvalPoint {
    std::vector<double> y_pred;
    std::vector<double> y_real;

    EvalPoint(std::vector<double> pred, std::vector<double> real);
    size_t classes() const { return y_pred.size(); }
};

// --- structure ---
int tree_size(const Node& n);
int tree_height(const Node& n);  // single node has height 1
bool structurally_equal(const Node& a, const Node& b);
inline bool structurally_equal(const LossExpr& a, const LossExpr& b) {
    return structurally_equal(a.root(), b.root());
}

// Pre-order node access; index 0 is the root.
const Node* node_at(const Node& root, int index);
// Returns a copy of `tree` with the subtree rooted at pre-order `index`
// replaced by a copy of `replacement`.
LossExpr replace_subtree(const LossExpr& tree, int index, const Node& replacement);

// --- evaluation ---
// Scalar value of the tree at one (y_pred, y_real) component pair.
// May return non-finite values (exp overflow); callers decide how to react.
double eval_scalar(const Node& n, double y_pred, double y_real);

// Mean over classes of the per-class scalar values. Throws EvalError with
// the offending class index when a term (or the mean) is non-finite.
double evaluate(const LossExpr& expr, const EvalPoint& point);

// --- differentiation ---
// Symbolic partial derivative with respect to the y_pred terminal; y_real
// and constants are held fixed. Protected operators differentiate through
// their protected forms; d|x|/dx at x=0 is taken as 0.
LossExpr differentiate(const LossExpr& expr);

// --- validation ---
struct ValidityReport {
    bool has_pred = false;
    bool has_real = false;
    bool height_ok = false;
    bool size_ok = false;
    bool constants_finite = false;
    int size = 0;
    int height = 0;
    bool pass() const { return has_pred && has_real && height_ok && size_ok && constants_finite; }
    std::string describe() const;
};

ValidityReport validate(const LossExpr& expr, const TreeConstraints& c);

// --- serialization ---
// Prefix notation, e.g. "(sub y_pred y_real)", "(mul (sin y_pred) 2.5)".
std::string format(const LossExpr& expr);
LossExpr parse(const std::string& text);  // throws ParseError

// --- generation ---
// Random tree satisfying the constraints. The terminal-presence rule is
// enforced by regeneration up to max_retries, then by grafting the missing
// terminal onto a random leaf. Throws ConstructionError when the
// constraints cannot hold a valid tree.
LossExpr random_tree(const TreeConstraints& c, Rng& rng);

// Fresh random subtree for mutation; respects a node budget.
NodePtr random_subtree(const TreeConstraints& c, int max_nodes, Rng& rng);

} // namespace lossforge
