#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>

#include "vad/nn/optim.hpp"

namespace vad::nn {

// Relative errors use max(|analytic|, |numeric|, kGradCheckFloor) as the
// denominator so that exactly-zero gradient pairs compare as equal.
inline constexpr double kGradCheckFloor = 1e-8;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // entries whose stencil crossed a non-differentiable point
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = true;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / denom;
}

// Central differences (L(theta + h) - L(theta - h)) / 2h against the analytic
// gradient, for every stride-th entry of every parameter tensor. The model's
// loss may return a wider type than double; the difference is taken in it.
// A model that can tell when the last two loss evaluations straddled a kink
// (a ReLU changing sides) exposes `bool crossed_kink()`; such entries have no
// meaningful central difference and are skipped.
template <class Model>
GradCheckReport grad_check(Model& model, const typename Model::Batch& sample, double h, double tol,
                           std::size_t stride = 1) {
  Gradients analytic;
  model.loss_and_gradient(sample, analytic);
  const ParamViews params = model.parameters();
  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k].size(); i += std::max<std::size_t>(1, stride)) {
      double& theta = params[k][i];
      const double saved = theta;
      const double plus = saved + h;
      const double minus = saved - h;
      theta = plus;
      const auto up = model.loss(sample);
      theta = minus;
      const auto down = model.loss(sample);
      theta = saved;
      if constexpr (requires { { model.crossed_kink() } -> std::convertible_to<bool>; }) {
        if (model.crossed_kink()) {
          ++report.skipped;
          continue;
        }
      }
      // Divide by the step actually taken, which rounding can move off 2h.
      const double numeric = static_cast<double>((up - down) / (plus - minus));
      const double a = analytic[k](static_cast<Index>(i));
      const double err = relative_error(a, numeric);
      ++report.checked;
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_tensor = k;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_relative_error <= tol;
  return report;
}

}  // namespace vad::nn
