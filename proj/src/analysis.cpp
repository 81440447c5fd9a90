#include "lossforge/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace lossforge {

namespace {

EvalPoint binary_point(double p, int r) {
    return EvalPoint({p, 1.0 - p}, {r == 1 ? 1.0 : 0.0, r == 1 ? 0.0 : 1.0});
}

} // namespace

double binary_reduce(const LossFn& loss, double p, int y_real0) {
    return loss.value(binary_point(p, y_real0));
}

std::function<double(double)> binary_reduce_fn(const LossFn& loss, int y_real0) {
    return [&loss, y_real0](double p) { return binary_reduce(loss, p, y_real0); };
}

double binary_reduce_grad(const LossFn& loss, double p, int y_real0) {
    std::vector<double> g = loss.grad(binary_point(p, y_real0));
    return g[0] - g[1];  // p drives component 0 up and component 1 down
}

LandscapeCurve sample_landscape(const LossFn& loss, int y_real_fixed, double grid_step) {
    if (!(grid_step > 0.0 && grid_step <= 0.5))
        throw std::invalid_argument("sample_landscape: grid_step must lie in (0, 0.5]");
    LandscapeCurve curve;
    curve.y_real_fixed = y_real_fixed;
    const long steps = std::lround(std::floor(1.0 / grid_step));
    for (long k = 0; k <= steps; ++k) {
        double p = std::min(1.0, static_cast<double>(k) * grid_step);
        curve.grid.push_back(p);
    }
    if (curve.grid.back() < 1.0) curve.grid.push_back(1.0);

    curve.values.reserve(curve.grid.size());
    curve.gradient_values.reserve(curve.grid.size());
    for (double p : curve.grid) {
        try {
            curve.values.push_back(binary_reduce(loss, p, y_real_fixed));
            curve.gradient_values.push_back(binary_reduce_grad(loss, p, y_real_fixed));
        } catch (const EvalError& e) {
            std::ostringstream os;
            os << "landscape evaluation failed at y_pred0=" << p << ": " << e.what();
            throw std::runtime_error(os.str());
        }
    }
    curve.evaluator = binary_reduce_fn(loss, y_real_fixed);
    return curve;
}

namespace {

double golden_section(const std::function<double(double)>& f, double a, double b, double tol) {
    const double inv_phi = 0.6180339887498949;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

} // namespace

LandscapeReport analyze(const LandscapeCurve& curve) {
    if (curve.values.size() < 3)
        throw std::invalid_argument("analyze: need at least 3 sampled points");
    constexpr double kDiffTol = 1e-9;

    size_t imin = 0;
    for (size_t i = 1; i < curve.values.size(); ++i)
        if (curve.values[i] < curve.values[imin]) imin = i;

    LandscapeReport rep;
    rep.argmin = curve.grid[imin];
    rep.min_value = curve.values[imin];

    if (curve.evaluator) {
        double lo = curve.grid[imin == 0 ? 0 : imin - 1];
        double hi = curve.grid[std::min(imin + 1, curve.grid.size() - 1)];
        if (hi > lo) {
            double refined = golden_section(curve.evaluator, lo, hi, 1e-6);
            double fv = curve.evaluator(refined);
            if (fv <= rep.min_value) {
                rep.argmin = refined;
                rep.min_value = fv;
            }
        }
    }

    bool has_up = false, has_down = false;
    size_t first_up = curve.values.size(), last_down = 0;
    for (size_t i = 0; i + 1 < curve.values.size(); ++i) {
        double d = curve.values[i + 1] - curve.values[i];
        if (d > kDiffTol) {
            has_up = true;
            first_up = std::min(first_up, i);
        } else if (d < -kDiffTol) {
            has_down = true;
            last_down = i;
        }
    }
    if (has_down && !has_up)
        rep.shape = LandscapeShape::MonotoneDecreasing;
    else if (has_up && !has_down)
        rep.shape = LandscapeShape::MonotoneIncreasing;
    else if (has_up && has_down && last_down < first_up)
        rep.shape = LandscapeShape::InteriorMinimum;
    else
        rep.shape = LandscapeShape::Other;

    rep.increase_near_one = curve.values.back() > rep.min_value + 1e-6;
    return rep;
}

const char* shape_name(LandscapeShape s) {
    switch (s) {
        case LandscapeShape::MonotoneDecreasing: return "monotone-decreasing";
        case LandscapeShape::MonotoneIncreasing: return "monotone-increasing";
        case LandscapeShape::InteriorMinimum: return "interior-minimum";
        case LandscapeShape::Other: return "other";
    }
    return "?";
}

void write_curve_csv(const LandscapeCurve& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "y_pred0,value,gradient\n";
    char buf[64];
    auto emit = [&](double v) {
        auto res = std::to_chars(buf, buf + sizeof(buf), v);
        out.write(buf, res.ptr - buf);
    };
    for (size_t i = 0; i < curve.grid.size(); ++i) {
        emit(curve.grid[i]);
        out << ',';
        emit(curve.values[i]);
        out << ',';
        emit(curve.gradient_values[i]);
        out << '\n';
    }
}

std::string report_to_json(const LandscapeReport& rep) {
    nlohmann::json j;
    j["argmin"] = rep.argmin;
    j["min_value"] = rep.min_value;
    j["shape"] = shape_name(rep.shape);
    j["increase_near_one"] = rep.increase_near_one;
    return j.dump(2);
}

} // namespace lossforge
