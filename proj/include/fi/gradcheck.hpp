#pragma once

#include <functional>

#include "fi/tensor.hpp"

namespace fi {

/// Central finite-difference check of an analytic gradient. Perturbs every
/// element of `param` in place, re-evaluates the forward-only `loss`, and
/// compares (loss(x+eps) - loss(x-eps)) / (2 eps) against `analytic`.
/// Returns the worst normalized error |analytic - fd| / max(1, |analytic|).
///
/// The comparison uses only forward evaluations, so it is independent of any
/// backward rule it is checking. Call it with no tape active.
inline double fd_max_rel_error(Tensor param, const real* analytic,
                               const std::function<double()>& loss, double eps = 1e-4) {
    double worst = 0.0;
    for (int i = 0; i < param.size(); ++i) {
        real saved = param.data()[i];
        param.data()[i] = saved + static_cast<real>(eps);
        double up = loss();
        param.data()[i] = saved - static_cast<real>(eps);
        double down = loss();
        param.data()[i] = saved;
        double fd = (up - down) / (2.0 * eps);
        double a = static_cast<double>(analytic[i]);
        double err = std::abs(a - fd) / std::max(1.0, std::abs(a));
        if (err > worst) worst = err;
    }
    return worst;
}

}  // namespace fi
