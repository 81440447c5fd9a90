#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lossforge/losses.hpp"

namespace lossforge {

// Loss restricted to two classes via y_pred = (p, 1-p), y_real = (r, 1-r):
// a one-variable landscape per fixed label.
double binary_reduce(const LossFn& loss, double p, int y_real0);
std::function<double(double)> binary_reduce_fn(const LossFn& loss, int y_real0);
// total derivative d/dp of the reduced loss (chains through both components)
double binary_reduce_grad(const LossFn& loss, double p, int y_real0);

struct LandscapeCurve {
    int y_real_fixed = 1;
    std::vector<double> grid;             // strictly increasing over [0,1]
    std::vector<double> values;
    std::vector<double> gradient_values;  // d value / d p at each grid point
    std::function<double(double)> evaluator;  // for argmin refinement
};

enum class LandscapeShape { MonotoneDecreasing, MonotoneIncreasing, InteriorMinimum, Other };

const char* shape_name(LandscapeShape s);

struct LandscapeReport {
    double argmin = 0.0;
    double min_value = 0.0;
    LandscapeShape shape = LandscapeShape::Other;
    bool increase_near_one = false;
};

// Values and analytic gradients on the grid p = 0, step, ..., 1.
// Evaluation errors are rethrown annotated with the grid point.
LandscapeCurve sample_landscape(const LossFn& loss, int y_real_fixed, double grid_step);

// Grid-scan argmin refined by golden-section search on the bracketing
// interval; shape classified from the sign pattern of discrete differences
// (tolerance 1e-9); increase-near-1 iff value(1) > min + 1e-6.
LandscapeReport analyze(const LandscapeCurve& curve);

// Plot-ready artifacts: CSV columns y_pred0,value,gradient; report as JSON.
void write_curve_csv(const LandscapeCurve& curve, const std::string& path);
std::string report_to_json(const LandscapeReport& report);

} // namespace lossforge
