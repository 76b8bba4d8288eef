#pragma once

// Central finite-difference gradient checker. Double precision only: the
// relative-error tolerances this project runs at (1e-4) are meaningless in
// single precision.

#include <functional>
#include <span>

#include "../core.hpp"

namespace itsc::nn {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::ptrdiff_t failing_coordinate = -1;  // coordinate of the worst error when failing
  double tolerance = 1e-4;

  bool pass() const { return max_relative_error <= tolerance; }
};

// loss() must evaluate the scalar objective at the current contents of
// `params`; the checker perturbs each coordinate in place and restores it.
// `analytic` is the gradient under test, aligned with `params`.
inline GradCheckReport grad_check(const std::function<double()>& loss, std::span<double> params,
                                  std::span<const double> analytic, double tolerance = 1e-4,
                                  double step = 1e-5) {
  require(params.size() == analytic.size(), "grad_check: param/gradient size mismatch");
  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double f_plus = loss();
    params[i] = saved - step;
    const double f_minus = loss();
    params[i] = saved;
    const double numeric = (f_plus - f_minus) / (2.0 * step);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      if (rel > tolerance) report.failing_coordinate = static_cast<std::ptrdiff_t>(i);
    }
  }
  return report;
}

}  // namespace itsc::nn
