#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "gridloc/registration.hpp"

namespace {

using namespace gridloc;

MaskedGrid random_grid(std::uint64_t seed, std::size_t nx, std::size_t ny,
                       double cell = 0.1, double mask_fraction = 0.0) {
  MaskedGrid g(nx, ny, cell);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::uniform_real_distribution<double> m(0.0, 1.0);
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (m(rng) < mask_fraction) continue;
    g.set(n, u(rng));
  }
  return g;
}

HistogramSpec lenient(const MaskedGrid& reference, std::size_t min_overlap = 10) {
  HistogramSpec s = HistogramSpec::shared_range(reference);
  s.min_overlap = min_overlap;
  return s;
}

}  // namespace

TEST_CASE("shared-range binning clamps and quantizes linearly") {
  MaskedGrid g(6, 1, 1.0);
  const double vals[] = {-5.0, 0.0, 3.5, 63.999, 64.0, 200.0};
  for (std::size_t n = 0; n < 6; ++n) g.set(n, vals[n]);
  HistogramSpec s;
  s.bins = 64;
  s.lo = 0.0;
  s.hi = 64.0;
  const auto bins = bin_values(g, s);
  CHECK(bins[0] == 0);
  CHECK(bins[1] == 0);
  CHECK(bins[2] == 3);
  CHECK(bins[3] == 63);
  CHECK(bins[4] == 63);
  CHECK(bins[5] == 63);
}

TEST_CASE("quantile binning sees only the ordering of values") {
  const MaskedGrid g = random_grid(1, 20, 20, 0.1, 0.2);
  const HistogramSpec s = HistogramSpec::quantile_rank();
  const auto base = bin_values(g, s);
  for (const auto relabel : {+[](double v) { return 2.0 * v + 5.0; },
                             +[](double v) { return v * v * v; }}) {
    MaskedGrid t = g;
    for (std::size_t n = 0; n < t.size(); ++n) {
      if (t.available(n)) t.set(n, relabel(t.value(n)));
    }
    CHECK(bin_values(t, s) == base);
  }
}

TEST_CASE("nmi of a grid with itself is exactly two") {
  const MaskedGrid g = random_grid(2, 30, 30, 0.1, 0.1);
  for (const HistogramSpec& s :
       {lenient(g), [] { auto q = HistogramSpec::quantile_rank();
                         q.min_overlap = 10; return q; }()}) {
    const auto r = nmi(g, g, s);
    REQUIRE(r.has_value());
    CHECK(r->value == 2.0);
    CHECK(r->overlap == g.available_count());
  }
}

TEST_CASE("nmi is exactly symmetric in its arguments") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MaskedGrid a = random_grid(100 + seed, 25, 25, 0.1, 0.15);
    const MaskedGrid b = random_grid(200 + seed, 25, 25, 0.1, 0.15);
    HistogramSpec s = lenient(a);
    auto ab = nmi(a, b, s);
    auto ba = nmi(b, a, s);
    REQUIRE(ab.has_value());
    REQUIRE(ba.has_value());
    CHECK(ab->value == ba->value);  // bitwise
    CHECK(ab->overlap == ba->overlap);

    const HistogramSpec q = [] { auto t = HistogramSpec::quantile_rank();
                                 t.min_overlap = 10; return t; }();
    ab = nmi(a, b, q);
    ba = nmi(b, a, q);
    CHECK(ab->value == ba->value);
  }
}

TEST_CASE("nmi stays within its bounds") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const MaskedGrid a = random_grid(300 + seed, 20, 20, 0.1, 0.1);
    const MaskedGrid b = random_grid(400 + seed, 20, 20, 0.1, 0.1);
    const auto r = nmi(a, b, lenient(a));
    REQUIRE(r.has_value());
    CHECK(r->value >= 1.0);
    CHECK(r->value <= 2.0);
  }
}

TEST_CASE("independent grids score near the bottom of the range") {
  const MaskedGrid a = random_grid(5, 100, 100);
  const MaskedGrid b = random_grid(6, 100, 100);
  const auto r = nmi(a, b, lenient(a));
  REQUIRE(r.has_value());
  CHECK(r->value >= 1.0);
  CHECK(r->value < 1.1);
}

TEST_CASE("constant grids hit the exact degenerate scores") {
  MaskedGrid flat(20, 20, 0.1);
  for (std::size_t n = 0; n < flat.size(); ++n) flat.set(n, 7.0);
  const MaskedGrid vary = random_grid(7, 20, 20);

  HistogramSpec s;
  s.lo = 0.0;
  s.hi = 100.0;
  s.min_overlap = 10;
  // One marginal constant: knowing the flat grid tells nothing; joint
  // entropy equals the varying entropy and the score collapses to 1.
  CHECK(nmi(flat, vary, s)->value == 1.0);
  CHECK(nmi(vary, flat, s)->value == 1.0);
  // Both constant: a single joint state, fully dependent by convention.
  CHECK(nmi(flat, flat, s)->value == 2.0);
}

TEST_CASE("too little overlap yields no score") {
  MaskedGrid a = random_grid(8, 12, 12);
  MaskedGrid b = random_grid(9, 12, 12);
  for (std::size_t n = 0; n < a.size(); ++n) {
    if (n >= 50) a.set_unavailable(n);
    if (n < 30 || n >= 120) b.set_unavailable(n);  // overlap = cells 30..49
  }
  HistogramSpec s = lenient(a);
  s.min_overlap = 21;
  CHECK_FALSE(nmi(a, b, s).has_value());
  s.min_overlap = 20;
  CHECK(nmi(a, b, s).has_value());
}

TEST_CASE("search equals resampling plus nmi on every candidate") {
  const MaskedGrid global = random_grid(10, 40, 40, 0.1, 0.05);
  MaskedGrid local(14, 14, 0.1, 1.1, 1.3);
  {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    std::uniform_real_distribution<double> m(0.0, 1.0);
    for (std::size_t n = 0; n < local.size(); ++n) {
      if (m(rng) < 0.1) continue;
      local.set(n, u(rng));
    }
  }
  const Pose2 anchor{1.8, 2.0, 0.35};
  SearchWindow w;
  w.center = Pose2{1.9, 1.85, 0.30};
  w.half_x = 0.4;
  w.half_y = 0.4;
  w.half_h = 0.1;
  w.step_x = 0.2;
  w.step_y = 0.2;
  w.step_h = 0.05;
  HistogramSpec spec = lenient(global, 40);

  const SearchResult r = search(local, global, anchor, w, spec);
  REQUIRE(r.candidates.size() == r.count_x * r.count_y * r.count_h);
  REQUIRE(r.has_measurement);

  std::size_t checked = 0;
  for (const Candidate& c : r.candidates) {
    const CellTransform t = CellTransform::about(
        anchor.x, anchor.y, c.x - anchor.x, c.y - anchor.y, c.h - anchor.h);
    const MaskedGrid res = resample(global, GridShape::of(local), t);
    const auto oracle = nmi(local, res, spec);
    if (!c.valid) {
      CHECK_FALSE(oracle.has_value());
      continue;
    }
    REQUIRE(oracle.has_value());
    CHECK(c.nmi == oracle->value);  // bitwise
    CHECK(c.overlap == oracle->overlap);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("search recovers a planted cell-aligned shift exactly") {
  const MaskedGrid global = random_grid(12, 80, 80, 0.1);
  const Pose2 anchor{4.0, 4.0, 0.0};
  const double dx_true = 2.0 * 0.2;   // +0.4 m
  const double dy_true = -1.0 * 0.2;  // -0.2 m

  // The vehicle believed `anchor` while truly displaced by (dx, dy): each
  // local cell recorded the global value at center + displacement.
  MaskedGrid local(24, 24, 0.1, 2.8, 2.8);
  for (std::size_t i = 0; i < local.nx(); ++i) {
    for (std::size_t j = 0; j < local.ny(); ++j) {
      double cx = 0.0;
      double cy = 0.0;
      local.cell_center(i, j, cx, cy);
      std::size_t gi = 0;
      std::size_t gj = 0;
      REQUIRE(global.world_to_cell(cx + dx_true, cy + dy_true, gi, gj));
      local.set(local.index(i, j), global.value(global.index(gi, gj)));
    }
  }

  SearchWindow w;
  w.center = anchor;
  w.half_x = 0.6;
  w.half_y = 0.6;
  w.half_h = 0.0;
  w.step_x = 0.2;
  w.step_y = 0.2;
  w.step_h = 0.5;
  const HistogramSpec spec = lenient(global, 100);

  const SearchResult r = search(local, global, anchor, w, spec);
  REQUIRE(r.has_measurement);
  const Candidate& best = r.candidates[r.best_index];
  CHECK(best.x == anchor.x + dx_true);
  CHECK(best.y == anchor.y + dy_true);
  CHECK(best.h == anchor.h);
  CHECK(best.nmi == 2.0);
  // Every other candidate scores strictly lower.
  for (std::size_t k = 0; k < r.candidates.size(); ++k) {
    if (k == r.best_index) continue;
    CHECK(r.candidates[k].nmi < 2.0);
  }
}

TEST_CASE("monotone relabels never move the search argmax") {
  const MaskedGrid global = random_grid(13, 60, 60, 0.1);
  MaskedGrid local(20, 20, 0.1, 1.9, 2.1);
  for (std::size_t i = 0; i < local.nx(); ++i) {
    for (std::size_t j = 0; j < local.ny(); ++j) {
      double cx = 0.0;
      double cy = 0.0;
      local.cell_center(i, j, cx, cy);
      std::size_t gi = 0;
      std::size_t gj = 0;
      REQUIRE(global.world_to_cell(cx + 0.2, cy - 0.1, gi, gj));
      local.set(local.index(i, j), global.value(global.index(gi, gj)));
    }
  }
  const Pose2 anchor{3.0, 3.0, 0.0};
  SearchWindow w;
  w.center = anchor;
  w.half_x = 0.4;
  w.half_y = 0.4;
  w.half_h = 0.02;
  w.step_x = 0.1;
  w.step_y = 0.1;
  w.step_h = 0.02;
  HistogramSpec spec = HistogramSpec::quantile_rank();
  spec.min_overlap = 100;

  const SearchResult base = search(local, global, anchor, w, spec);
  REQUIRE(base.has_measurement);

  for (const auto relabel : {+[](double v) { return 2.0 * v + 5.0; },
                             +[](double v) { return std::pow(v + 1.0, 1.7); }}) {
    MaskedGrid g2 = global;
    MaskedGrid l2 = local;
    for (std::size_t n = 0; n < g2.size(); ++n) {
      if (g2.available(n)) g2.set(n, relabel(g2.value(n)));
    }
    for (std::size_t n = 0; n < l2.size(); ++n) {
      if (l2.available(n)) l2.set(n, relabel(l2.value(n)));
    }
    const SearchResult r = search(l2, g2, anchor, w, spec);
    REQUIRE(r.has_measurement);
    CHECK(r.best_index == base.best_index);
    for (std::size_t k = 0; k < r.candidates.size(); ++k) {
      CHECK(r.candidates[k].nmi == base.candidates[k].nmi);  // bitwise
    }
  }
}

TEST_CASE("equal scores break toward the window center then lexicographic") {
  // Global map: two identical value stripes with a dead zone between them.
  // The local stripe matches either side perfectly; the center candidate has
  // no overlap at all. The +/-1 m candidates tie and the smaller x wins.
  MaskedGrid global(40, 40, 0.1);
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (std::size_t j = 0; j < 40; ++j) {
    for (std::size_t i = 0; i < 10; ++i) {
      const double v = u(rng);
      global.set(global.index(i, j), v);
      global.set(global.index(i + 20, j), v);
    }
  }
  MaskedGrid local(10, 40, 0.1, 1.0, 0.0);
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < 40; ++j) {
      local.set(local.index(i, j),
                global.value(global.index(i, j)));  // stripe A content
    }
  }
  const Pose2 anchor{1.5, 2.0, 0.0};
  SearchWindow w;
  w.center = anchor;
  w.half_x = 1.0;
  w.half_y = 0.0;
  w.half_h = 0.0;
  w.step_x = 1.0;
  w.step_y = 0.2;
  w.step_h = 0.5;
  HistogramSpec spec;
  spec.lo = 0.0;
  spec.hi = 100.0;
  spec.min_overlap = 100;

  const SearchResult r = search(local, global, anchor, w, spec);
  REQUIRE(r.count_x == 3);
  REQUIRE(r.has_measurement);
  CHECK_FALSE(r.candidates[1].valid);  // dead zone: overlap 0
  CHECK(r.candidates[0].valid);
  CHECK(r.candidates[2].valid);
  CHECK(r.candidates[0].nmi == r.candidates[2].nmi);
  CHECK(r.best_index == 0);  // lexicographic: -1 m before +1 m
  CHECK(r.candidates[r.best_index].x == anchor.x - 1.0);
}

TEST_CASE("covariance fit matches a hand recomputation") {
  SearchResult r;
  r.count_x = 3;
  r.count_y = 1;
  r.count_h = 1;
  const double xs[] = {-0.2, 0.0, 0.2};
  const double scores[] = {1.2, 2.0, 1.4};
  for (std::size_t k = 0; k < 3; ++k) {
    Candidate c;
    c.x = xs[k];
    c.y = 0.0;
    c.h = 0.0;
    c.nmi = scores[k];
    c.overlap = 500;
    c.valid = true;
    r.candidates.push_back(c);
  }
  r.best_index = 1;
  r.has_measurement = true;

  SearchWindow w;
  w.step_x = 0.2;
  w.step_y = 0.2;
  w.step_h = 0.0087;

  const auto reg = fit_registration(r, w);
  REQUIRE(reg.has_value());
  CHECK(reg->pose.x == 0.0);
  CHECK(reg->nmi == 2.0);
  CHECK_FALSE(reg->on_boundary);

  // Independent recomputation of the weighted x moment.
  const double kappa = std::log(100.0) / (2.0 - 1.2);
  double wsum = 0.0;
  double mean = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double wk = std::exp(kappa * (scores[k] - 2.0));
    wsum += wk;
    mean += wk * xs[k];
  }
  mean /= wsum;
  double var = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double wk = std::exp(kappa * (scores[k] - 2.0));
    var += wk * (xs[k] - mean) * (xs[k] - mean);
  }
  var /= wsum;
  const double expect_xx = std::max(var, 0.25 * w.step_x * w.step_x);
  CHECK(reg->cov[0][0] == Catch::Approx(expect_xx).epsilon(1e-12));
  // Degenerate axes sit exactly on their quantization floors.
  CHECK(reg->cov[1][1] == 0.25 * w.step_y * w.step_y);
  CHECK(reg->cov[2][2] == 0.25 * w.step_h * w.step_h);
}

TEST_CASE("a peak on the window face inflates the covariance") {
  SearchResult r;
  r.count_x = 3;
  r.count_y = 1;
  r.count_h = 1;
  const double xs[] = {-0.2, 0.0, 0.2};
  const double scores[] = {2.0, 1.3, 1.1};
  for (std::size_t k = 0; k < 3; ++k) {
    Candidate c;
    c.x = xs[k];
    c.nmi = scores[k];
    c.overlap = 500;
    c.valid = true;
    r.candidates.push_back(c);
  }
  r.best_index = 0;
  r.has_measurement = true;
  SearchWindow w;
  w.step_x = 0.2;
  w.step_y = 0.2;
  w.step_h = 0.0087;

  const auto interior = fit_registration(
      [&] { SearchResult t = r;
            t.candidates[0].nmi = 1.3;
            t.candidates[1].nmi = 2.0;
            t.candidates[0].valid = t.candidates[1].valid = true;
            t.best_index = 1;
            return t; }(), w);
  const auto edge = fit_registration(r, w);
  REQUIRE(edge.has_value());
  CHECK(edge->on_boundary);
  REQUIRE(interior.has_value());
  CHECK_FALSE(interior->on_boundary);
  // The flagged fit carries the tenfold penalty on every diagonal, applied
  // after the quantization floor.
  CHECK(edge->cov[1][1] == 10.0 * (0.25 * w.step_y * w.step_y));
  CHECK(edge->cov[2][2] == 10.0 * (0.25 * w.step_h * w.step_h));
}

TEST_CASE("a flat plateau reports the lattice spread itself") {
  SearchResult r;
  r.count_x = 3;
  r.count_y = 1;
  r.count_h = 1;
  const double xs[] = {-0.3, 0.0, 0.3};
  for (std::size_t k = 0; k < 3; ++k) {
    Candidate c;
    c.x = xs[k];
    c.nmi = 1.5;
    c.overlap = 500;
    c.valid = true;
    r.candidates.push_back(c);
  }
  r.best_index = 1;  // ties resolved toward the center upstream
  r.has_measurement = true;
  SearchWindow w;
  w.step_x = 0.3;
  w.step_y = 0.2;
  w.step_h = 0.0087;
  const auto reg = fit_registration(r, w);
  REQUIRE(reg.has_value());
  // Uniform weights: variance of {-0.3, 0, 0.3} = 0.06.
  CHECK(reg->cov[0][0] == Catch::Approx(0.06).epsilon(1e-12));
}

TEST_CASE("no valid candidate means no measurement") {
  const MaskedGrid global = random_grid(15, 30, 30, 0.1);
  MaskedGrid local(10, 10, 0.1, 100.0, 100.0);  // far outside the global map
  for (std::size_t n = 0; n < local.size(); ++n) local.set(n, 1.0);
  SearchWindow w;
  w.center = Pose2{100.5, 100.5, 0.0};
  w.half_x = 0.4;
  w.half_y = 0.4;
  w.half_h = 0.0;
  const SearchResult r =
      search(local, global, Pose2{100.5, 100.5, 0.0}, w, lenient(global));
  CHECK_FALSE(r.has_measurement);
  CHECK_FALSE(fit_registration(r, w).has_value());
  for (const Candidate& c : r.candidates) CHECK_FALSE(c.valid);
}
