#pragma once

// Central-difference gradient checking shared by the unit and acceptance
// suites. `forward` must rebuild the computation from scratch on every call.
#include <cmath>
#include <functional>
#include <vector>

#include "core/tensor.hpp"

namespace gradcheck {

inline double rel_err(double a, double b) {
    double denom = std::max({std::fabs(a), std::fabs(b), 1e-8});
    return std::fabs(a - b) / denom;
}

// Max relative error between analytic and finite-difference gradients of
// `forward` (a scalar function of x's current values) w.r.t. every entry of x.
inline double max_grad_err(fts::Tensor& x, const std::function<double()>& forward,
                           const std::function<void()>& backward, double eps = 1e-6) {
    x.set_requires_grad(true);
    x.zero_grad();
    backward();
    std::vector<double> analytic = x.grad();
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double keep = x.data()[i];
        x.data()[i] = keep + eps;
        double up = forward();
        x.data()[i] = keep - eps;
        double dn = forward();
        x.data()[i] = keep;
        double fd = (up - dn) / (2.0 * eps);
        worst = std::max(worst, rel_err(analytic[i], fd));
    }
    return worst;
}

}  // namespace gradcheck
