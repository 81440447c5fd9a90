#include "lossforge/expr.hpp"

#include <algorithm>
#include <cassert>
#include <charconv>
#include <cmath>
#include <cstring>
#include <sstream>

namespace lossforge {

NodePtr clone(const Node& n) {
    auto out = std::make_unique<Node>();
    out->kind = n.kind;
    out->uop = n.uop;
    out->bop = n.bop;
    out->value = n.value;
    if (n.left) out->left = clone(*n.left);
    if (n.right) out->right = clone(*n.right);
    return out;
}

NodePtr make_pred() {
    auto n = std::make_unique<Node>();
    n->kind = NodeKind::Pred;
    return n;
}

NodePtr make_real() {
    auto n = std::make_unique<Node>();
    n->kind = NodeKind::Real;
    return n;
}

NodePtr make_const(double v) {
    auto n = std::make_unique<Node>();
    n->kind = NodeKind::Constant;
    n->value = v;
    return n;
}

NodePtr make_unary(UnaryOp op, NodePtr child) {
    auto n = std::make_unique<Node>();
    n->kind = NodeKind::Unary;
    n->uop = op;
    n->left = std::move(child);
    return n;
}

NodePtr make_binary(BinaryOp op, NodePtr lhs, NodePtr rhs) {
    auto n = std::make_unique<Node>();
    n->kind = NodeKind::Binary;
    n->bop = op;
    n->left = std::move(lhs);
    n->right = std::move(rhs);
    return n;
}

EvalPoint::EvalPoint(std::vector<double> pred, std::vector<double> real)
    : y_pred(std::move(pred)), y_real(std::move(real)) {
    if (y_pred.size() != y_real.size() || y_pred.empty())
        throw std::invalid_argument("EvalPoint: y_pred and y_real must have equal nonzero length");
    double sum = 0.0;
    for (double p : y_pred) {
        if (!(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument("EvalPoint: y_pred entries must lie in [0,1]");
        sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("EvalPoint: y_pred must sum to 1");
    int ones = 0;
    for (double r : y_real) {
        if (r == 1.0) ++ones;
        else if (r != 0.0)
            throw std::invalid_argument("EvalPoint: y_real entries must be 0 or 1");
    }
    if (ones != 1) throw std::invalid_argument("EvalPoint: y_real must be one-hot");
}

int tree_size(const Node& n) {
    int s = 1;
    if (n.left) s += tree_size(*n.left);
    if (n.right) s += tree_size(*n.right);
    return s;
}

int tree_height(const Node& n) {
    int h = 0;
    if (n.left) h = tree_height(*n.left);
    if (n.right) h = std::max(h, tree_height(*n.right));
    return h + 1;
}

bool structurally_equal(const Node& a, const Node& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case NodeKind::Pred:
        case NodeKind::Real:
            return true;
        case NodeKind::Constant:
            return a.value == b.value;
        case NodeKind::Unary:
            return a.uop == b.uop && structurally_equal(*a.left, *b.left);
        case NodeKind::Binary:
            return a.bop == b.bop && structurally_equal(*a.left, *b.left) &&
                   structurally_equal(*a.right, *b.right);
    }
    return false;
}

namespace {

const Node* node_at_impl(const Node& n, int& index) {
    if (index == 0) return &n;
    --index;
    if (n.left) {
        if (const Node* hit = node_at_impl(*n.left, index)) return hit;
    }
    if (n.right) {
        if (const Node* hit = node_at_impl(*n.right, index)) return hit;
    }
    return nullptr;
}

NodePtr replace_impl(const Node& n, int& index, const Node& replacement) {
    if (index == 0) {
        --index;
        return clone(replacement);
    }
    --index;
    auto out = std::make_unique<Node>();
    out->kind = n.kind;
    out->uop = n.uop;
    out->bop = n.bop;
    out->value = n.value;
    if (n.left) out->left = index >= 0 ? replace_impl(*n.left, index, replacement) : clone(*n.left);
    if (n.right) out->right = index >= 0 ? replace_impl(*n.right, index, replacement) : clone(*n.right);
    return out;
}

} // namespace

const Node* node_at(const Node& root, int index) {
    if (index < 0) return nullptr;
    return node_at_impl(root, index);
}

LossExpr replace_subtree(const LossExpr& tree, int index, const Node& replacement) {
    int idx = index;
    return LossExpr(replace_impl(tree.root(), idx, replacement));
}

double eval_scalar(const Node& n, double y_pred, double y_real) {
    switch (n.kind) {
        case NodeKind::Pred: return y_pred;
        case NodeKind::Real: return y_real;
        case NodeKind::Constant: return n.value;
        case NodeKind::Unary: {
            double x = eval_scalar(*n.left, y_pred, y_real);
            switch (n.uop) {
                case UnaryOp::Negate: return -x;
                case UnaryOp::Sqrt: return std::sqrt(std::fabs(x) + kEps);
                case UnaryOp::Log: return std::log(std::fabs(x) + kEps);
                case UnaryOp::Exp: return std::exp(x);
                case UnaryOp::Sin: return std::sin(x);
                case UnaryOp::Cos: return std::cos(x);
                case UnaryOp::Abs: return std::fabs(x);
                case UnaryOp::Sign: return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
            }
            break;
        }
        case NodeKind::Binary: {
            double a = eval_scalar(*n.left, y_pred, y_real);
            double b = eval_scalar(*n.right, y_pred, y_real);
            switch (n.bop) {
                case BinaryOp::Add: return a + b;
                case BinaryOp::Sub: return a - b;
                case BinaryOp::Mul: return a * b;
                case BinaryOp::Div: return a / (b + kEps);
            }
            break;
        }
    }
    return 0.0;
}

double evaluate(const LossExpr& expr, const EvalPoint& point) {
    const size_t n = point.classes();
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double term = eval_scalar(expr.root(), point.y_pred[i], point.y_real[i]);
        if (!std::isfinite(term))
            throw EvalError("non-finite loss term", static_cast<int>(i));
        sum += term;
    }
    double mean = sum / static_cast<double>(n);
    if (!std::isfinite(mean)) throw EvalError("non-finite loss mean", 0);
    return mean;
}

namespace {

bool is_const(const Node& n, double v) { return n.kind == NodeKind::Constant && n.value == v; }
bool is_const(const Node& n) { return n.kind == NodeKind::Constant; }

// Folding constructors keep derivative trees compact; they only fold
// constants and annihilating/identity constants introduced by the chain
// rule, nothing stronger.
NodePtr fadd(NodePtr a, NodePtr b) {
    if (is_const(*a, 0.0)) return b;
    if (is_const(*b, 0.0)) return a;
    if (is_const(*a) && is_const(*b)) return make_const(a->value + b->value);
    return make_binary(BinaryOp::Add, std::move(a), std::move(b));
}

NodePtr fneg(NodePtr a) {
    if (is_const(*a)) return make_const(-a->value);
    return make_unary(UnaryOp::Negate, std::move(a));
}

NodePtr fsub(NodePtr a, NodePtr b) {
    if (is_const(*b, 0.0)) return a;
    if (is_const(*a, 0.0)) return fneg(std::move(b));
    if (is_const(*a) && is_const(*b)) return make_const(a->value - b->value);
    return make_binary(BinaryOp::Sub, std::move(a), std::move(b));
}

NodePtr fmul(NodePtr a, NodePtr b) {
    if (is_const(*a, 0.0) || is_const(*b, 0.0)) return make_const(0.0);
    if (is_const(*a, 1.0)) return b;
    if (is_const(*b, 1.0)) return a;
    if (is_const(*a) && is_const(*b)) return make_const(a->value * b->value);
    return make_binary(BinaryOp::Mul, std::move(a), std::move(b));
}

NodePtr fdiv(NodePtr a, NodePtr b) {
    if (is_const(*a, 0.0)) return make_const(0.0);
    return make_binary(BinaryOp::Div, std::move(a), std::move(b));
}

NodePtr diff(const Node& n) {
    switch (n.kind) {
        case NodeKind::Pred: return make_const(1.0);
        case NodeKind::Real:
        case NodeKind::Constant: return make_const(0.0);
        case NodeKind::Unary: {
            NodePtr du = diff(*n.left);
            switch (n.uop) {
                case UnaryOp::Negate:
                    return fneg(std::move(du));
                case UnaryOp::Sqrt:
                    // d/dx sqrt(|x|+eps) = sign(x) / (2 sqrt(|x|+eps))
                    return fmul(std::move(du),
                                fdiv(make_unary(UnaryOp::Sign, clone(*n.left)),
                                     fmul(make_const(2.0), make_unary(UnaryOp::Sqrt, clone(*n.left)))));
                case UnaryOp::Log:
                    // d/dx log(|x|+eps) = sign(x) / (|x|+eps)
                    return fmul(std::move(du),
                                fdiv(make_unary(UnaryOp::Sign, clone(*n.left)),
                                     make_unary(UnaryOp::Abs, clone(*n.left))));
                case UnaryOp::Exp:
                    return fmul(std::move(du), make_unary(UnaryOp::Exp, clone(*n.left)));
                case UnaryOp::Sin:
                    return fmul(std::move(du), make_unary(UnaryOp::Cos, clone(*n.left)));
                case UnaryOp::Cos:
                    return fneg(fmul(std::move(du), make_unary(UnaryOp::Sin, clone(*n.left))));
                case UnaryOp::Abs:
                    // subgradient at 0 chosen as 0, carried by sign(0) = 0
                    return fmul(std::move(du), make_unary(UnaryOp::Sign, clone(*n.left)));
                case UnaryOp::Sign:
                    return make_const(0.0);
            }
            break;
        }
        case NodeKind::Binary: {
            switch (n.bop) {
                case BinaryOp::Add: return fadd(diff(*n.left), diff(*n.right));
                case BinaryOp::Sub: return fsub(diff(*n.left), diff(*n.right));
                case BinaryOp::Mul:
                    return fadd(fmul(diff(*n.left), clone(*n.right)),
                                fmul(clone(*n.left), diff(*n.right)));
                case BinaryOp::Div: {
                    // d [x / (y+eps)] = dx/(y+eps) - x*dy/(y+eps)^2
                    NodePtr dx = diff(*n.left);
                    NodePtr dy = diff(*n.right);
                    NodePtr first = fdiv(std::move(dx), clone(*n.right));
                    if (is_const(*dy, 0.0)) return first;
                    NodePtr second = fdiv(fdiv(fmul(clone(*n.left), std::move(dy)), clone(*n.right)),
                                          clone(*n.right));
                    return fsub(std::move(first), std::move(second));
                }
            }
            break;
        }
    }
    return make_const(0.0);
}

} // namespace

LossExpr differentiate(const LossExpr& expr) {
    return LossExpr(diff(expr.root()));
}

namespace {

void check_constants(const Node& n, bool& ok) {
    if (n.kind == NodeKind::Constant && !std::isfinite(n.value)) ok = false;
    if (n.left) check_constants(*n.left, ok);
    if (n.right) check_constants(*n.right, ok);
}

void count_terminals(const Node& n, int& preds, int& reals) {
    if (n.kind == NodeKind::Pred) ++preds;
    if (n.kind == NodeKind::Real) ++reals;
    if (n.left) count_terminals(*n.left, preds, reals);
    if (n.right) count_terminals(*n.right, preds, reals);
}

} // namespace

ValidityReport validate(const LossExpr& expr, const TreeConstraints& c) {
    ValidityReport r;
    int preds = 0, reals = 0;
    count_terminals(expr.root(), preds, reals);
    r.has_pred = preds > 0;
    r.has_real = reals > 0;
    r.size = tree_size(expr.root());
    r.height = tree_height(expr.root());
    r.size_ok = r.size <= c.max_size;
    r.height_ok = r.height >= c.min_height;
    r.constants_finite = true;
    check_constants(expr.root(), r.constants_finite);
    return r;
}

std::string ValidityReport::describe() const {
    std::ostringstream os;
    os << (pass() ? "pass" : "fail") << " [";
    os << "y_pred:" << (has_pred ? "ok" : "missing");
    os << " y_real:" << (has_real ? "ok" : "missing");
    os << " height:" << height << (height_ok ? "" : "(below min)");
    os << " size:" << size << (size_ok ? "" : "(above max)");
    os << " constants:" << (constants_finite ? "finite" : "non-finite");
    os << "]";
    return os.str();
}

namespace {

const char* unary_name(UnaryOp op) {
    switch (op) {
        case UnaryOp::Negate: return "neg";
        case UnaryOp::Sqrt: return "sqrt";
        case UnaryOp::Log: return "log";
        case UnaryOp::Exp: return "exp";
        case UnaryOp::Sin: return "sin";
        case UnaryOp::Cos: return "cos";
        case UnaryOp::Abs: return "abs";
        case UnaryOp::Sign: return "sign";
    }
    return "?";
}

const char* binary_name(BinaryOp op) {
    switch (op) {
        case BinaryOp::Add: return "add";
        case BinaryOp::Sub: return "sub";
        case BinaryOp::Mul: return "mul";
        case BinaryOp::Div: return "div";
    }
    return "?";
}

void format_const(std::string& out, double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

void format_node(const Node& n, std::string& out) {
    switch (n.kind) {
        case NodeKind::Pred: out += "y_pred"; return;
        case NodeKind::Real: out += "y_real"; return;
        case NodeKind::Constant: format_const(out, n.value); return;
        case NodeKind::Unary:
            out += '(';
            out += unary_name(n.uop);
            out += ' ';
            format_node(*n.left, out);
            out += ')';
            return;
        case NodeKind::Binary:
            out += '(';
            out += binary_name(n.bop);
            out += ' ';
            format_node(*n.left, out);
            out += ' ';
            format_node(*n.right, out);
            out += ')';
            return;
    }
}

struct Parser {
    const std::string& text;
    size_t pos = 0;

    explicit Parser(const std::string& t) : text(t) {}

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, pos); }

    std::string token() {
        size_t start = pos;
        while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
               text[pos] != '(' && text[pos] != ')')
            ++pos;
        if (pos == start) fail("expected token");
        return text.substr(start, pos - start);
    }

    NodePtr parse_node() {
        skip_ws();
        if (pos >= text.size()) fail("unexpected end of input");
        if (text[pos] == '(') {
            ++pos;
            skip_ws();
            std::string op = token();
            NodePtr node;
            if (op == "neg" || op == "sqrt" || op == "log" || op == "exp" || op == "sin" ||
                op == "cos" || op == "abs" || op == "sign") {
                UnaryOp u = op == "neg"    ? UnaryOp::Negate
                            : op == "sqrt" ? UnaryOp::Sqrt
                            : op == "log"  ? UnaryOp::Log
                            : op == "exp"  ? UnaryOp::Exp
                            : op == "sin"  ? UnaryOp::Sin
                            : op == "cos"  ? UnaryOp::Cos
                            : op == "abs"  ? UnaryOp::Abs
                                           : UnaryOp::Sign;
                node = make_unary(u, parse_node());
            } else if (op == "add" || op == "sub" || op == "mul" || op == "div") {
                BinaryOp b = op == "add"   ? BinaryOp::Add
                             : op == "sub" ? BinaryOp::Sub
                             : op == "mul" ? BinaryOp::Mul
                                           : BinaryOp::Div;
                NodePtr lhs = parse_node();
                NodePtr rhs = parse_node();
                node = make_binary(b, std::move(lhs), std::move(rhs));
            } else {
                pos -= op.size();
                fail("unknown operator '" + op + "'");
            }
            skip_ws();
            if (pos >= text.size() || text[pos] != ')') fail("expected ')'");
            ++pos;
            return node;
        }
        std::string tok = token();
        if (tok == "y_pred") return make_pred();
        if (tok == "y_real") return make_real();
        double v = 0.0;
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
            pos -= tok.size();
            fail("malformed number '" + tok + "'");
        }
        return make_const(v);
    }
};

} // namespace

std::string format(const LossExpr& expr) {
    std::string out;
    format_node(expr.root(), out);
    return out;
}

LossExpr parse(const std::string& text) {
    Parser p(text);
    NodePtr root = p.parse_node();
    p.skip_ws();
    if (p.pos != text.size()) p.fail("trailing input");
    return LossExpr(std::move(root));
}

namespace {

NodePtr random_terminal(const TreeConstraints& c, Rng& rng) {
    switch (rng.index(3)) {
        case 0: return make_pred();
        case 1: return make_real();
        default: return make_const(rng.uniform(c.constant_min, c.constant_max));
    }
}

// Grow a subtree using at most `budget` nodes; the path through the first
// child is forced deep enough to reach `need_height` more levels.
NodePtr grow(const TreeConstraints& c, int budget, int need_height, Rng& rng) {
    assert(budget >= 1);
    bool can_unary = budget >= 2;
    bool can_binary = budget >= 3;
    bool must_op = need_height > 1;

    if (!can_unary || (!must_op && (budget == 1 || rng.bernoulli(0.35))))
        return random_terminal(c, rng);

    // 6 unary + 4 binary operators, drawn uniformly from whichever are viable
    bool binary = can_binary && rng.index(10) >= 6;
    if (binary) {
        int left_budget = 1 + static_cast<int>(rng.index(static_cast<size_t>(budget - 2)));
        NodePtr lhs = grow(c, left_budget, need_height - 1, rng);
        int used = tree_size(*lhs);
        NodePtr rhs = grow(c, budget - 1 - used, 1, rng);
        auto op = kSampledBinaryOps[rng.index(std::size(kSampledBinaryOps))];
        return make_binary(op, std::move(lhs), std::move(rhs));
    }
    auto op = kSampledUnaryOps[rng.index(std::size(kSampledUnaryOps))];
    return make_unary(op, grow(c, budget - 1, need_height - 1, rng));
}

void collect_leaves(Node& n, std::vector<Node*>& out) {
    if (!n.left && !n.right) {
        out.push_back(&n);
        return;
    }
    if (n.left) collect_leaves(*n.left, out);
    if (n.right) collect_leaves(*n.right, out);
}

// Overwrite a leaf in place with the given terminal kind.
void set_terminal(Node& leaf, NodeKind kind) {
    leaf.kind = kind;
    leaf.value = 0.0;
}

} // namespace

NodePtr random_subtree(const TreeConstraints& c, int max_nodes, Rng& rng) {
    return grow(c, std::max(1, max_nodes), 1, rng);
}

LossExpr random_tree(const TreeConstraints& c, Rng& rng) {
    if (c.min_height < 1 || c.max_size < 2)
        throw ConstructionError("tree constraints infeasible");
    // smallest tree with both terminals is (op y_pred y_real)
    if (c.max_size < 3)
        throw ConstructionError("max_size too small to hold both y_pred and y_real");
    if (c.max_size < (1 << c.min_height) - 1)
        throw ConstructionError("max_size below 2^min_height - 1");
    if (c.constant_min > c.constant_max)
        throw ConstructionError("empty constant range");

    for (int attempt = 0; attempt <= c.max_retries; ++attempt) {
        NodePtr root = grow(c, c.max_size, c.min_height, rng);
        LossExpr tree(std::move(root));
        ValidityReport r = validate(tree, c);
        if (r.pass()) return tree;
        // last attempt: repair terminal presence by grafting
        if (attempt == c.max_retries && r.height_ok && r.size_ok && r.constants_finite) {
            NodePtr fixed = clone(tree.root());
            std::vector<Node*> leaves;
            collect_leaves(*fixed, leaves);
            NodeKind present = r.has_pred ? NodeKind::Pred : NodeKind::Real;
            // leaves we may overwrite without erasing the only copy of a
            // terminal that is already present
            int present_count = 0;
            for (Node* l : leaves)
                if (l->kind == present) ++present_count;
            std::vector<Node*> writable;
            for (Node* l : leaves)
                if (l->kind != present || present_count > 1 || (!r.has_pred && !r.has_real))
                    writable.push_back(l);

            if (!r.has_pred && !r.has_real && writable.size() >= 2) {
                size_t a = rng.index(writable.size());
                size_t b = rng.index(writable.size() - 1);
                if (b >= a) ++b;
                set_terminal(*writable[a], NodeKind::Pred);
                set_terminal(*writable[b], NodeKind::Real);
            } else if (r.has_pred != r.has_real && !writable.empty()) {
                set_terminal(*writable[rng.index(writable.size())],
                             r.has_pred ? NodeKind::Real : NodeKind::Pred);
            } else if (tree_size(*fixed) + 2 <= c.max_size) {
                // single-leaf tree: widen the leaf into (op y_pred y_real)
                Node* l = leaves[rng.index(leaves.size())];
                l->kind = NodeKind::Binary;
                l->bop = kSampledBinaryOps[rng.index(std::size(kSampledBinaryOps))];
                l->value = 0.0;
                l->left = make_pred();
                l->right = make_real();
            } else {
                throw ConstructionError("cannot graft terminals within max_size");
            }
            LossExpr repaired(std::move(fixed));
            if (validate(repaired, c).pass()) return repaired;
            throw ConstructionError("terminal grafting failed to produce a valid tree");
        }
    }
    throw ConstructionError("random_tree exhausted retries");
}

} // namespace lossforge
