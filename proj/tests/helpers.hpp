#pragma once

#include <cmath>
#include <functional>

#include "pam/matrix.hpp"

namespace pam_test {

// central finite difference of a scalar function at x
inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double rel_err(double analytic, double reference) {
  const double denom = std::max({std::abs(analytic), std::abs(reference), 1e-6});
  return std::abs(analytic - reference) / denom;
}

// worst relative error between an analytic gradient and central differences
// over every entry of a parameter block
inline double grad_check(std::function<double()> loss, double* params, const double* analytic, std::size_t n,
                         double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = loss();
    params[i] = saved - h;
    const double down = loss();
    params[i] = saved;
    worst = std::max(worst, rel_err(analytic[i], (up - down) / (2.0 * h)));
  }
  return worst;
}

inline pam::Matrix matrix_from(const std::vector<std::vector<double>>& rows) {
  pam::Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  return m;
}

}  // namespace pam_test
