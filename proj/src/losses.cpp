#include "lossforge/losses.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>

namespace lossforge {

using discovered::kAlpha;
using discovered::kBeta;
using discovered::kDelta;
using discovered::kEta;
using discovered::kGamma;
using discovered::kZeta;

namespace {

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Protected primitives, shared with the tree evaluator so the native closed
// forms and the expression trees agree to rounding error.
double psqrt(double x) { return std::sqrt(std::fabs(x) + kEps); }
double plog(double x) { return std::log(std::fabs(x) + kEps); }
double pdiv(double x, double y) { return x / (y + kEps); }
// derivative of psqrt as the symbolic differentiator evaluates it
double dpsqrt(double x) { return pdiv(sgn(x), 2.0 * psqrt(x)); }

// Per-class losses: value and d/dp of one (p, r) component pair. The full
// loss is the mean over classes, so the point-level gradient carries a 1/N.
struct Separable {
    std::function<double(double p, double r)> term;
    std::function<double(double p, double r)> dterm;
};

LossFn make_separable(std::string name, Separable s, std::optional<LossExpr> tree) {
    LossFn fn;
    fn.name = std::move(name);
    fn.tree = std::move(tree);
    fn.value = [s](const EvalPoint& pt) {
        const size_t n = pt.classes();
        double sum = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double t = s.term(pt.y_pred[i], pt.y_real[i]);
            if (!std::isfinite(t)) throw EvalError("non-finite loss term", static_cast<int>(i));
            sum += t;
        }
        return sum / static_cast<double>(n);
    };
    fn.grad = [s](const EvalPoint& pt) {
        const size_t n = pt.classes();
        std::vector<double> g(n);
        for (size_t i = 0; i < n; ++i) {
            double d = s.dterm(pt.y_pred[i], pt.y_real[i]) / static_cast<double>(n);
            if (!std::isfinite(d)) throw EvalError("non-finite loss gradient", static_cast<int>(i));
            g[i] = d;
        }
        return g;
    };
    return fn;
}

// --- baselines ---

Separable ce_separable() {
    return {
        [](double p, double r) { return -(r * plog(p)); },
        [](double p, double r) { return -(r * pdiv(sgn(p), std::fabs(p))); },
    };
}

Separable focal_separable(double focusing) {
    return {
        [focusing](double p, double r) { return -(r * std::pow(1.0 - p, focusing) * plog(p)); },
        [focusing](double p, double r) {
            double w = std::pow(1.0 - p, focusing);
            double dw = focusing > 0.0 ? -focusing * std::pow(1.0 - p, focusing - 1.0) : 0.0;
            return -(r * (dw * plog(p) + w * pdiv(sgn(p), std::fabs(p))));
        },
    };
}

Separable sce_separable(double w_ce, double w_rce) {
    return {
        [w_ce, w_rce](double p, double r) {
            return w_ce * -(r * plog(p)) + w_rce * -(p * plog(r));
        },
        [w_ce, w_rce](double p, double r) {
            return w_ce * -(r * pdiv(sgn(p), std::fabs(p))) + w_rce * -plog(r);
        },
    };
}

// Soft dice over the probability vector; a ratio, not a per-class mean.
LossFn make_dice() {
    LossFn fn;
    fn.name = "dice";
    fn.value = [](const EvalPoint& pt) {
        double inter = 0.0, total = 0.0;
        for (size_t i = 0; i < pt.classes(); ++i) {
            inter += pt.y_pred[i] * pt.y_real[i];
            total += pt.y_pred[i] + pt.y_real[i];
        }
        return 1.0 - (2.0 * inter + kEps) / (total + kEps);
    };
    fn.grad = [](const EvalPoint& pt) {
        double inter = 0.0, total = 0.0;
        for (size_t i = 0; i < pt.classes(); ++i) {
            inter += pt.y_pred[i] * pt.y_real[i];
            total += pt.y_pred[i] + pt.y_real[i];
        }
        double num = 2.0 * inter + kEps;
        double den = total + kEps;
        std::vector<double> g(pt.classes());
        for (size_t i = 0; i < pt.classes(); ++i) {
            double d = (num - 2.0 * pt.y_real[i] * den) / (den * den);
            if (!std::isfinite(d)) throw EvalError("non-finite loss gradient", static_cast<int>(i));
            g[i] = d;
        }
        return g;
    };
    return fn;
}

// --- discovered losses ---
// Native forms mirror the expression trees operation for operation
// (including where the protected division contributes its epsilon), so the
// two routes agree to rounding error rather than merely approximately.

Separable ngl_separable() {
    return {
        [](double p, double r) {
            return std::exp((kAlpha - p) - p * r) - std::cos(std::cos(std::sin(p)));
        },
        [](double p, double r) {
            double ge = (-1.0 - r) * std::exp((kAlpha - p) - p * r);
            double gc = std::cos(p) * std::sin(std::sin(p)) * std::sin(std::cos(std::sin(p)));
            return ge - gc;
        },
    };
}

Separable f1_separable() {
    return {
        [](double p, double r) {
            double sinp = std::sin(p);
            double num = std::exp(sinp * sinp);
            double sq = psqrt((kBeta - r) * p);
            return pdiv(num, 2.0 * (sq * sq));
        },
        [](double p, double r) {
            double sinp = std::sin(p), cosp = std::cos(p);
            double num = std::exp(sinp * sinp);
            double dnum = (cosp * sinp + sinp * cosp) * num;
            double bmr = kBeta - r;
            double u = bmr * p;
            double sq = psqrt(u);
            double den = 2.0 * (sq * sq);
            double dsq = bmr * dpsqrt(u);
            double dden = 2.0 * (dsq * sq + sq * dsq);
            return pdiv(dnum, den) - pdiv(pdiv(num * dden, den), den);
        },
    };
}

Separable f2_separable() {
    return {
        [](double p, double r) {
            double t1 = pdiv(std::cos(-r), psqrt(p)) * (p - kGamma);
            double t2 = (p * p) * (p * p);
            double t3 = psqrt(r + p);
            return (t1 + t2) + t3;
        },
        [](double p, double r) {
            double sp = psqrt(p);
            double q = pdiv(std::cos(-r), sp);
            double dq = -pdiv(pdiv(std::cos(-r) * dpsqrt(p), sp), sp);
            double dt1 = dq * (p - kGamma) + q;
            double pp = p * p;
            double dt2 = (p + p) * pp + pp * (p + p);
            double dt3 = dpsqrt(r + p);
            return (dt1 + dt2) + dt3;
        },
    };
}

Separable f3_separable() {
    return {
        [](double p, double r) {
            double w = pdiv(r, std::sin(r)) + pdiv(p - std::exp(kDelta), kZeta);
            return psqrt(w);
        },
        [](double p, double r) {
            double w = pdiv(r, std::sin(r)) + pdiv(p - std::exp(kDelta), kZeta);
            return pdiv(1.0, kZeta) * dpsqrt(w);
        },
    };
}

Separable f4_separable() {
    return {
        [](double p, double r) {
            return std::sin(std::sin(p - kEta) + r * (r * r));
        },
        [](double p, double r) {
            double arg = std::sin(p - kEta) + r * (r * r);
            return std::cos(p - kEta) * std::cos(arg);
        },
    };
}

} // namespace

LossExpr ngl_tree() {
    // exp((alpha - p) - p*r) - cos(cos(sin(p)))
    auto inner = make_binary(BinaryOp::Sub,
                             make_binary(BinaryOp::Sub, make_const(kAlpha), make_pred()),
                             make_binary(BinaryOp::Mul, make_pred(), make_real()));
    auto osc = make_unary(UnaryOp::Cos, make_unary(UnaryOp::Cos, make_unary(UnaryOp::Sin, make_pred())));
    return LossExpr(make_binary(BinaryOp::Sub, make_unary(UnaryOp::Exp, std::move(inner)), std::move(osc)));
}

LossExpr f1_tree() {
    // exp(sin(p)*sin(p)) / (2 * sqrt(|(beta-r)*p|)^2)
    auto num = make_unary(UnaryOp::Exp,
                          make_binary(BinaryOp::Mul, make_unary(UnaryOp::Sin, make_pred()),
                                      make_unary(UnaryOp::Sin, make_pred())));
    auto u = [] {
        return make_binary(BinaryOp::Mul,
                           make_binary(BinaryOp::Sub, make_const(kBeta), make_real()),
                           make_pred());
    };
    auto den = make_binary(BinaryOp::Mul, make_const(2.0),
                           make_binary(BinaryOp::Mul, make_unary(UnaryOp::Sqrt, u()),
                                       make_unary(UnaryOp::Sqrt, u())));
    return LossExpr(make_binary(BinaryOp::Div, std::move(num), std::move(den)));
}

LossExpr f2_tree() {
    // cos(-r)/sqrt(p) * (p - gamma) + p^4 + sqrt(r + p)
    auto t1 = make_binary(
        BinaryOp::Mul,
        make_binary(BinaryOp::Div, make_unary(UnaryOp::Cos, make_unary(UnaryOp::Negate, make_real())),
                    make_unary(UnaryOp::Sqrt, make_pred())),
        make_binary(BinaryOp::Sub, make_pred(), make_const(kGamma)));
    auto p2 = [] { return make_binary(BinaryOp::Mul, make_pred(), make_pred()); };
    auto t2 = make_binary(BinaryOp::Mul, p2(), p2());
    auto t3 = make_unary(UnaryOp::Sqrt, make_binary(BinaryOp::Add, make_real(), make_pred()));
    return LossExpr(make_binary(BinaryOp::Add,
                                make_binary(BinaryOp::Add, std::move(t1), std::move(t2)),
                                std::move(t3)));
}

LossExpr f3_tree() {
    // sqrt(r/sin(r) + (p - exp(delta))/zeta)
    auto a = make_binary(BinaryOp::Div, make_real(), make_unary(UnaryOp::Sin, make_real()));
    auto b = make_binary(BinaryOp::Div,
                         make_binary(BinaryOp::Sub, make_pred(),
                                     make_unary(UnaryOp::Exp, make_const(kDelta))),
                         make_const(kZeta));
    return LossExpr(make_unary(UnaryOp::Sqrt,
                               make_binary(BinaryOp::Add, std::move(a), std::move(b))));
}

LossExpr f4_tree() {
    // sin(sin(p - eta) + r^3)
    auto arg = make_binary(BinaryOp::Add,
                           make_unary(UnaryOp::Sin,
                                      make_binary(BinaryOp::Sub, make_pred(), make_const(kEta))),
                           make_binary(BinaryOp::Mul, make_real(),
                                       make_binary(BinaryOp::Mul, make_real(), make_real())));
    return LossExpr(make_unary(UnaryOp::Sin, std::move(arg)));
}

LossFn make_focal(double focusing) {
    return make_separable("focal", focal_separable(focusing), std::nullopt);
}

LossFn make_sce(double w_ce, double w_rce) {
    return make_separable("sce", sce_separable(w_ce, w_rce), std::nullopt);
}

LossFn loss_from_expr(std::string name, const LossExpr& expr) {
    auto primal = std::make_shared<const LossExpr>(expr);
    auto deriv = std::make_shared<const LossExpr>(differentiate(expr));
    LossFn fn;
    fn.name = std::move(name);
    fn.tree = *primal;
    fn.value = [primal](const EvalPoint& pt) { return evaluate(*primal, pt); };
    fn.grad = [deriv](const EvalPoint& pt) {
        const size_t n = pt.classes();
        std::vector<double> g(n);
        for (size_t i = 0; i < n; ++i) {
            double d = eval_scalar(deriv->root(), pt.y_pred[i], pt.y_real[i]) /
                       static_cast<double>(n);
            if (!std::isfinite(d)) throw EvalError("non-finite loss gradient", static_cast<int>(i));
            g[i] = d;
        }
        return g;
    };
    return fn;
}

namespace {

const std::map<std::string, const LossFn*>& catalog() {
    static const auto* entries = [] {
        auto* m = new std::map<std::string, const LossFn*>;
        auto put = [m](const char* name, LossFn fn) {
            (*m)[name] = new LossFn(std::move(fn));
        };
        put("ce", make_separable("ce", ce_separable(), std::nullopt));
        put("sce", make_sce(1.0, 1.0));
        put("focal", make_focal(2.0));
        put("dice", make_dice());
        put("f1", make_separable("f1", f1_separable(), f1_tree()));
        put("f2", make_separable("f2", f2_separable(), f2_tree()));
        put("f3", make_separable("f3", f3_separable(), f3_tree()));
        put("f4", make_separable("f4", f4_separable(), f4_tree()));
        put("ngl", make_separable("ngl", ngl_separable(), ngl_tree()));
        (*m)["f5"] = (*m)["ngl"];  // same object by design
        return m;
    }();
    return *entries;
}

} // namespace

const LossFn& builtin(const std::string& name) {
    const auto& m = catalog();
    auto it = m.find(name);
    if (it == m.end()) throw std::invalid_argument("unknown loss '" + name + "'");
    return *it->second;
}

const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names = {"ce",  "sce", "focal", "dice", "ngl",
                                                   "f1",  "f2",  "f3",    "f4",   "f5"};
    return names;
}

} // namespace lossforge
