#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "gridloc/denoise.hpp"

namespace {

using namespace gridloc;

MaskedGrid random_grid(std::uint64_t seed, std::size_t nx = 10,
                       std::size_t ny = 10, double spread = 30.0) {
  MaskedGrid g(nx, ny, 0.1);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-spread, spread);
  for (std::size_t n = 0; n < g.size(); ++n) g.set(n, u(rng));
  return g;
}

double closed_form_objective(const MaskedGrid& y, double lambda) {
  double f = 0.0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    if (!y.available(n)) continue;
    const double x = soft_threshold(y.value(n), lambda);
    const double r = x - y.value(n);
    f += 0.5 * r * r + lambda * std::abs(x);
  }
  return f;
}

}  // namespace

TEST_CASE("soft threshold shrinks toward zero") {
  CHECK(soft_threshold(5.0, 2.0) == 3.0);
  CHECK(soft_threshold(-5.0, 2.0) == -3.0);
  CHECK(soft_threshold(1.5, 2.0) == 0.0);
  CHECK(soft_threshold(-2.0, 2.0) == 0.0);
  CHECK(soft_threshold(7.0, 0.0) == 7.0);
}

TEST_CASE("unit step solves the problem in one shrink") {
  const MaskedGrid y = random_grid(1);
  DenoiseParams p;
  p.lambda = 4.0;
  p.gamma = 1.0;
  DenoiseTrace trace;
  const MaskedGrid out = denoise_component(y, p, &trace);
  // With a unit step the first iterate is already the exact minimizer.
  for (std::size_t n = 0; n < y.size(); ++n) {
    CHECK(out.value(n) == soft_threshold(y.value(n), p.lambda));
  }
  CHECK(trace.iterations <= 3);
}

TEST_CASE("small steps converge to the per-cell closed form") {
  const MaskedGrid y = random_grid(2);
  for (const double lambda : {0.1, 1.0, 10.0}) {
    DenoiseParams p;
    p.lambda = lambda;
    p.gamma = 0.5;
    p.rel_tol = 1e-14;
    const MaskedGrid out = denoise_component(y, p);
    for (std::size_t n = 0; n < y.size(); ++n) {
      CHECK(std::abs(out.value(n) - soft_threshold(y.value(n), lambda)) < 1e-6);
    }
  }
}

TEST_CASE("objective gap decays inside a quadratic envelope") {
  const MaskedGrid y = random_grid(3);
  DenoiseParams p;
  p.lambda = 2.0;
  p.gamma = 0.5;
  p.rel_tol = 0.0;  // never stop early
  p.max_iters = 60;
  DenoiseTrace trace;
  denoise_component(y, p, &trace);
  REQUIRE(trace.iterations == 60);

  const double f_star = closed_form_objective(y, p.lambda);
  double dist2 = 0.0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    const double d = y.value(n) - soft_threshold(y.value(n), p.lambda);
    dist2 += d * d;
  }
  const double c = 8.0 * dist2 / p.gamma;  // theorem constant with slack
  for (std::size_t t = 1; t < trace.objective.size(); ++t) {
    const double gap = trace.objective[t] - f_star;
    CHECK(gap >= -1e-9 * std::max(1.0, std::abs(f_star)));
    CHECK(gap <= c / static_cast<double>((t + 1) * (t + 1)) + 1e-9);
  }
  // The final gap must be far below the envelope: convergence is linear here.
  CHECK(trace.objective.back() - f_star < 1e-9);
}

TEST_CASE("zero regularization returns the input unchanged") {
  const MaskedGrid y = random_grid(4);
  DenoiseParams p;
  p.lambda = 0.0;
  const MaskedGrid out = denoise_component(y, p);
  CHECK(out.equals(y));
}

TEST_CASE("masked cells pass through the denoiser untouched") {
  MaskedGrid y = random_grid(5);
  y.set_unavailable(7);
  y.set_unavailable(23);
  y.set_raw_value(7, std::numeric_limits<double>::quiet_NaN());
  DenoiseParams p;
  p.lambda = 3.0;
  p.gamma = 0.7;
  const MaskedGrid out = denoise_component(y, p);
  CHECK(out.mask() == y.mask());
  CHECK_FALSE(out.available(7));
  CHECK_FALSE(out.available(23));
  for (std::size_t n = 0; n < out.size(); ++n) {
    if (out.available(n)) CHECK(std::isfinite(out.value(n)));
  }
}

TEST_CASE("weak gradients are zeroed, strong ones survive shrunk") {
  MaskedGrid y(4, 4, 0.1);
  const double lambda = 5.0;
  // Alternate weak (inside the dead zone) and strong cells.
  for (std::size_t n = 0; n < y.size(); ++n) {
    y.set(n, (n % 2 == 0) ? ((n % 4 == 0) ? 2.0 : -3.0)
                          : ((n % 4 == 1) ? 20.0 : -18.0));
  }
  DenoiseParams p;
  p.lambda = lambda;
  p.gamma = 0.5;
  p.rel_tol = 1e-14;
  const MaskedGrid out = denoise_component(y, p);
  for (std::size_t n = 0; n < y.size(); ++n) {
    if (n % 2 == 0) {
      CHECK(out.value(n) == 0.0);  // |y| <= 3 < lambda: exact zero
    } else {
      CHECK(std::abs(out.value(n) - soft_threshold(y.value(n), lambda)) < 1e-6);
      CHECK(out.value(n) * y.value(n) > 0.0);  // sign preserved
    }
  }
}

TEST_CASE("denoising strictly improves the objective of a noisy field") {
  const MaskedGrid y = random_grid(6);
  DenoiseParams p;
  p.lambda = 2.5;
  p.gamma = 0.8;
  DenoiseTrace trace;
  denoise_component(y, p, &trace);
  REQUIRE(trace.objective.size() >= 2);
  CHECK(trace.objective.back() < trace.objective.front());
}

TEST_CASE("gradient fields denoise component-wise") {
  GradientField g{random_grid(7), random_grid(8)};
  g.dx.set_unavailable(3);
  g.dy.set_unavailable(11);
  DenoiseParams p;
  p.lambda = 1.5;
  const GradientField out = denoise_gradient(g, p);
  CHECK(out.dx.equals(denoise_component(g.dx, p)));
  CHECK(out.dy.equals(denoise_component(g.dy, p)));

  EdgeMap m{g, magnitude(g)};
  const EdgeMap dm = denoise_edge_map(m, p);
  CHECK(dm.edge.equals(magnitude(dm.grad)));
  CHECK(dm.grad.dx.equals(out.dx));
}
