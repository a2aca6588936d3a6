#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace skelbench {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0, numeric = 0.0;
};

// Central differences at every coordinate of x against the analytic gradient.
// loss() is re-evaluated with x perturbed in place. The relative-error floor
// keeps near-zero gradients from blowing the ratio up.
template <typename LossFn>
GradCheckResult grad_check(double* x, std::size_t count, const double* analytic,
                           LossFn&& loss, double h = 1e-5) {
    GradCheckResult res;
    for (std::size_t i = 0; i < count; ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double lp = loss();
        x[i] = saved - h;
        const double lm = loss();
        x[i] = saved;
        const double numeric = (lp - lm) / (2.0 * h);
        const double a = analytic[i];
        const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-4});
        const double rel = std::fabs(a - numeric) / denom;
        if (rel > res.max_rel_err) {
            res.max_rel_err = rel;
            res.worst_index = i;
            res.analytic = a;
            res.numeric = numeric;
        }
    }
    return res;
}

} // namespace skelbench
