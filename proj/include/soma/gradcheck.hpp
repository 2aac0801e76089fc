#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace soma {

// Central finite differences against an analytic gradient.
// loss must recompute the scalar objective from the current contents of x.
// Returns max over coordinates of |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline double finite_difference_check(const std::function<double()>& loss,
                                      std::span<double> x,
                                      std::span<const double> analytic,
                                      double epsilon = 1e-5,
                                      double floor = 1e-8) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + epsilon;
        const double fp = loss();
        x[i] = saved - epsilon;
        const double fm = loss();
        x[i] = saved;
        const double numeric = (fp - fm) / (2.0 * epsilon);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

}  // namespace soma
