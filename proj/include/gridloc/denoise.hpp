#pragma once

// Sparsity-promoting denoiser for gradient grids. Each gradient component is
// treated independently: it solves min_x 1/2*||x - y||^2 + lambda*||x||_1
// over the available cells with an accelerated proximal gradient iteration
// (soft-thresholding as the proximal step, Nesterov-style extrapolation).
// Unavailable cells pass through untouched.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "gridloc/grid.hpp"
#include "gridloc/grid_ops.hpp"
#include "gridloc/map_builder.hpp"

namespace gridloc {

/// eta_tau(v): shrink toward zero by tau, exactly zero inside [-tau, tau].
inline double soft_threshold(double v, double tau) {
  if (v > tau) return v - tau;
  if (v < -tau) return v + tau;
  return 0.0;
}

struct DenoiseParams {
  double lambda = 1.0;     ///< sparsity weight (threshold tau = lambda * gamma)
  double gamma = 1.0;      ///< gradient step; the fidelity term has unit curvature
  double rel_tol = 1e-6;   ///< stop when the relative objective change drops below
  std::size_t max_iters = 500;
};

/// Per-iteration objective values (at the extrapolated iterate), for
/// convergence diagnostics. objective[0] is the objective of the input.
struct DenoiseTrace {
  std::vector<double> objective;
  std::size_t iterations = 0;
};

/// Denoise one gradient component. Masked cells keep their mask; available
/// cells are replaced by the iterate reached when the relative objective
/// change falls below rel_tol or max_iters is hit.
inline MaskedGrid denoise_component(const MaskedGrid& y_grid,
                                    const DenoiseParams& p,
                                    DenoiseTrace* trace = nullptr) {
  if (!(p.lambda >= 0.0)) throw std::invalid_argument("denoise: lambda must be >= 0");
  if (!(p.gamma > 0.0)) throw std::invalid_argument("denoise: gamma must be > 0");

  std::vector<std::size_t> idx;
  idx.reserve(y_grid.size());
  for (std::size_t n = 0; n < y_grid.size(); ++n) {
    if (y_grid.available(n)) idx.push_back(n);
  }

  MaskedGrid out = y_grid;
  if (trace != nullptr) {
    trace->objective.clear();
    trace->iterations = 0;
  }
  if (idx.empty()) return out;

  const std::size_t m = idx.size();
  std::vector<double> y(m);
  for (std::size_t k = 0; k < m; ++k) y[k] = y_grid.value(idx[k]);

  const auto objective = [&](const std::vector<double>& v) {
    double f = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double r = v[k] - y[k];
      f += 0.5 * r * r + p.lambda * std::abs(v[k]);
    }
    return f;
  };

  const double tau = p.lambda * p.gamma;
  std::vector<double> s_prev = y;  // s^0 = noisy input
  std::vector<double> s(m);
  std::vector<double> x = y;  // extrapolated output iterate
  double q_prev = 1.0;
  double f_prev = objective(x);
  if (trace != nullptr) trace->objective.push_back(f_prev);

  std::size_t t = 0;
  while (t < p.max_iters) {
    ++t;
    // Gradient step on the fidelity term at s^{t-1}, then shrink.
    for (std::size_t k = 0; k < m; ++k) {
      s[k] = soft_threshold(s_prev[k] - p.gamma * (s_prev[k] - y[k]), tau);
    }
    const double q = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * q_prev * q_prev));
    const double momentum = (q_prev - 1.0) / q;
    for (std::size_t k = 0; k < m; ++k) {
      x[k] = s[k] + momentum * (s[k] - s_prev[k]);
    }
    const double f = objective(x);
    if (trace != nullptr) trace->objective.push_back(f);
    const double denom = std::max(std::abs(f_prev), 1e-300);
    const bool done = std::abs(f - f_prev) / denom < p.rel_tol;
    f_prev = f;
    s_prev.swap(s);
    q_prev = q;
    if (done) break;
  }

  if (trace != nullptr) trace->iterations = t;
  for (std::size_t k = 0; k < m; ++k) out.set(idx[k], x[k]);
  return out;
}

/// Denoise both components of a gradient field independently.
inline GradientField denoise_gradient(const GradientField& g,
                                      const DenoiseParams& p) {
  return GradientField{denoise_component(g.dx, p), denoise_component(g.dy, p)};
}

/// Denoise an edge map: shrink the gradient components, then recompute the
/// edge magnitudes from the denoised components.
inline EdgeMap denoise_edge_map(const EdgeMap& m, const DenoiseParams& p) {
  GradientField g = denoise_gradient(m.grad, p);
  MaskedGrid edge = magnitude(g);
  return EdgeMap{std::move(g), std::move(edge)};
}

}  // namespace gridloc
