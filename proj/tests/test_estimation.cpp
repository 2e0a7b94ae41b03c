#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hybridcav/estimation.hpp"

using namespace hybridcav;

namespace {

struct Spread {
  double mean = 0.0;
  double sd = 0.0;
};

Spread spread(const std::vector<double>& v) {
  Spread s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  for (double x : v) s.sd += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(s.sd / (v.size() - 1));
  return s;
}

double rastrigin(const Eigen::VectorXd& x) {
  return 10.0 * x.size() + (x.array().square() - 10.0 * (2 * M_PI * x.array()).cos()).sum();
}

} // namespace

TEST_CASE("noiseless Lorentzian is recovered exactly") {
  std::vector<double> x, y;
  for (int i = 0; i < 201; ++i) {
    x.push_back(-1.2e9 + 1.2e7 * i);
    y.push_back(lorentzian(x.back(), 3e7, 414e6, 2.5, 0.1));
  }
  const FitResult f = fit_lorentzian(x, y);
  CHECK(f.value("center") == doctest::Approx(3e7).epsilon(1e-8));
  CHECK(f.value("fwhm") == doctest::Approx(414e6).epsilon(1e-8));
  CHECK(f.value("amplitude") == doctest::Approx(2.5).epsilon(1e-8));
  CHECK(f.value("offset") == doctest::Approx(0.1).epsilon(1e-8));
  CHECK(f.converged);
  CHECK_FALSE(f.low_confidence);
}

TEST_CASE("Lorentzian width under 2% noise and uncertainty calibration") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.02);
  std::vector<double> widths, errors;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x, y;
    for (int i = 0; i < 200; ++i) {
      x.push_back(-3 * 414e6 + 6 * 414e6 * i / 199.0);
      y.push_back(lorentzian(x.back(), 0.0, 414e6, 1.0, 0.0) + noise(rng));
    }
    const FitResult f = fit_lorentzian(x, y);
    widths.push_back(f.value("fwhm"));
    errors.push_back(f.error("fwhm"));
  }
  const Spread s = spread(widths);
  CHECK(std::abs(s.mean - 414e6) < 3 * s.sd / std::sqrt(100.0));
  CHECK(s.sd < 7e6);
  const double reported = spread(errors).mean;
  CHECK(reported / s.sd > 0.5);
  CHECK(reported / s.sd < 2.0);
}

TEST_CASE("centre uncertainty does not depend on the offset for symmetric data") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<double> x, y0, y5;
  for (int i = -50; i <= 50; ++i) x.push_back(i * 1e7);
  std::vector<double> e(x.size());
  for (std::size_t i = 0; i < x.size() / 2; ++i) e[i] = e[x.size() - 1 - i] = noise(rng);
  for (std::size_t i = 0; i < x.size(); ++i) {
    y0.push_back(lorentzian(x[i], 0.0, 2e8, 1.0, 0.0) + e[i]);
    y5.push_back(lorentzian(x[i], 0.0, 2e8, 1.0, 5.0) + e[i]);
  }
  const FitResult a = fit_lorentzian(x, y0), b = fit_lorentzian(x, y5);
  CHECK(a.error("center") == doctest::Approx(b.error("center")).epsilon(1e-4));
}

TEST_CASE("narrow Lorentzian span is flagged") {
  std::vector<double> x, y;
  for (int i = 0; i < 11; ++i) {
    x.push_back(-0.2 + 0.04 * i);
    y.push_back(lorentzian(x.back(), 0.0, 1.0, 1.0, 0.0));
  }
  CHECK(fit_lorentzian(x, y).low_confidence);
  CHECK_THROWS_AS(fit_lorentzian(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 1}), std::invalid_argument);
}

TEST_CASE("single exponential") {
  std::vector<double> t, y;
  for (int i = 0; i < 50; ++i) {
    t.push_back(i * 1e-4);
    y.push_back(3.0 * std::exp(-1234.0 * t.back()));
  }
  const FitResult f = fit_exponential(t, y);
  CHECK(f.value("amplitude") == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(f.value("rate") == doctest::Approx(1234.0).epsilon(1e-10));
}

TEST_CASE("biexponential flags single-exponential data") {
  std::vector<double> t, y;
  for (int i = 0; i < 100; ++i) {
    t.push_back(i * 2e-5);
    y.push_back(std::exp(-1000.0 * t.back()));
  }
  CHECK(fit_biexponential(t, y).degenerate);
}

TEST_CASE("biexponential round trip at decay-like scales") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.03);
  int good = 0;
  std::vector<double> fast, fast_err;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> t, y;
    for (int i = 0; i < 300; ++i) {
      t.push_back(i * 7e-3 / 299);
      y.push_back(0.7 * std::exp(-t.back() / 0.19e-3) + 0.3 * std::exp(-t.back() / 1.5e-3) + noise(rng) * 0.03);
    }
    const FitResult f = fit_biexponential(t, y);
    const double tf = 1 / f.value("r1"), ts = 1 / f.value("r2");
    good += std::abs(tf / 0.19e-3 - 1) < 0.1 && std::abs(ts / 1.5e-3 - 1) < 0.1;
    fast.push_back(f.value("r1"));
    fast_err.push_back(f.error("r1"));
  }
  CHECK(good == 100);
  const double ratio = spread(fast_err).mean / spread(fast).sd;
  CHECK(ratio > 0.5);
  CHECK(ratio < 2.0);
}

TEST_CASE("biexponential rate order is stable under data permutation") {
  std::vector<double> t, y;
  for (int i = 0; i < 60; ++i) {
    t.push_back(i * 1e-4);
    y.push_back(0.5 * std::exp(-t.back() / 2e-4) + 0.5 * std::exp(-t.back() / 2e-3));
  }
  const FitResult a = fit_biexponential(t, y);
  std::vector<std::size_t> idx(t.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(5);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<double> ts, ys;
  for (auto i : idx) {
    ts.push_back(t[i]);
    ys.push_back(y[i]);
  }
  const FitResult b = fit_biexponential(ts, ys);
  CHECK(a.value("r1") > a.value("r2"));
  CHECK(b.value("r1") == doctest::Approx(a.value("r1")).epsilon(1e-6));
  CHECK(b.value("r2") == doctest::Approx(a.value("r2")).epsilon(1e-6));
}

TEST_CASE("linear fit") {
  const FitResult two = fit_linear(std::vector<double>{1, 3}, std::vector<double>{2, 8});
  CHECK(two.value("slope") == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(two.value("intercept") == doctest::Approx(-1.0).epsilon(1e-15));

  // 1/T2 against power: slope 1 per ms per uW
  std::mt19937_64 rng(6);
  std::normal_distribution<double> noise(0.0, 0.2);
  std::vector<double> slopes, errs;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p, r;
    for (int i = 0; i < 12; ++i) {
      p.push_back(0.5 * i);
      r.push_back(2.0 + 1.0 * p.back() + noise(rng));
    }
    const FitResult f = fit_linear(p, r);
    slopes.push_back(f.value("slope"));
    errs.push_back(f.error("slope"));
    // normal equations: residuals orthogonal to the design columns
    double s0 = 0, s1 = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double e = r[i] - f.value("slope") * p[i] - f.value("intercept");
      s0 += e;
      s1 += e * p[i];
    }
    CHECK(std::abs(s0) < 1e-10);
    CHECK(std::abs(s1) < 1e-10);
  }
  const Spread s = spread(slopes);
  CHECK(std::abs(s.mean - 1.0) < 3 * s.sd / 10);
  CHECK(spread(errs).mean / s.sd == doctest::Approx(1.0).epsilon(0.5));
}

TEST_CASE("bounded least squares respects the box") {
  const ResidualFunction r = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd v(2);
    v << x[0] - 3.0, x[1] + 1.0;
    return v;
  };
  Eigen::VectorXd lo(2), hi(2), x0(2);
  lo << 0, 0;
  hi << 2, 5;
  x0 << 1, 1;
  const LeastSquaresResult res = least_squares(r, x0, lo, hi);
  CHECK(res.x[0] == doctest::Approx(2.0));
  CHECK(res.x[1] == doctest::Approx(0.0));
  CHECK(res.at_bound[0]);
  CHECK(res.at_bound[1]);
}

TEST_CASE("grid_then_local on a convex quadratic") {
  const Objective q = [](const Eigen::VectorXd& x) { return (x.array() - 0.3).square().sum(); };
  const Box box{Eigen::VectorXd::Constant(3, -2.0), Eigen::VectorXd::Constant(3, 2.0)};
  for (int g : {1, 2, 5}) {
    const SearchResult r = grid_then_local(q, box, {g, g, g});
    CHECK(r.value < 1e-10);
    CHECK((r.argmin.array() - 0.3).abs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("grid_then_local finds the Rastrigin global basin") {
  // the grid must resolve basins one unit wide: 8 nodes over 7 units, and 11 over the standard box
  const Box narrow{Eigen::VectorXd::Constant(3, -2.8), Eigen::VectorXd::Constant(3, 4.2)};
  CHECK(grid_then_local(rastrigin, narrow, {8, 8, 8}).value < 1e-6);
  const Box standard{Eigen::VectorXd::Constant(3, -5.12), Eigen::VectorXd::Constant(3, 5.12)};
  CHECK(grid_then_local(rastrigin, standard, {11, 11, 11}).value < 1e-6);
}

TEST_CASE("tighter tolerance never worsens the result") {
  const Box box{Eigen::VectorXd::Constant(3, -5.12), Eigen::VectorXd::Constant(3, 5.12)};
  SimplexOptions opt;
  double prev = std::numeric_limits<double>::infinity();
  for (double tol : {1e-2, 1e-3, 1e-4, 1e-6, 1e-8, 1e-10}) {
    opt.relative_tolerance = tol;
    const SearchResult r = grid_then_local(rastrigin, box, {9, 9, 9}, opt);
    CHECK(r.value <= prev);
    prev = r.value;
  }
}

TEST_CASE("search stays inside the box and is deterministic") {
  // minimum outside the box: must stop on the boundary
  const Objective q = [](const Eigen::VectorXd& x) { return (x.array() - 10.0).square().sum(); };
  const Box box{Eigen::VectorXd::Constant(2, -1.0), Eigen::VectorXd::Constant(2, 1.0)};
  const SearchResult a = grid_then_local(q, box, {5, 5});
  CHECK(box.contains(a.argmin));
  CHECK(a.argmin[0] == doctest::Approx(1.0));
  CHECK(a.at_bound[0]);
  // flat objective: ties resolved to the lexicographically first node every time
  const Objective flat = [](const Eigen::VectorXd&) { return 1.0; };
  const SearchResult f1 = grid_then_local(flat, box, {3, 3}), f2 = grid_then_local(flat, box, {3, 3}, {}, 4);
  CHECK(f1.grid_argmin == f2.grid_argmin);
  CHECK(f1.grid_argmin[0] == -1.0);
  CHECK(f1.grid_argmin[1] == -1.0);
  // worker count does not change anything
  const SearchResult r1 = grid_then_local(rastrigin, Box{Eigen::VectorXd::Constant(3, -5.12),
                                                         Eigen::VectorXd::Constant(3, 5.12)},
                                          {9, 9, 9}, {}, 1);
  const SearchResult r4 = grid_then_local(rastrigin, Box{Eigen::VectorXd::Constant(3, -5.12),
                                                         Eigen::VectorXd::Constant(3, 5.12)},
                                          {9, 9, 9}, {}, 4);
  CHECK(r1.argmin == r4.argmin);
  CHECK(r1.value == r4.value);
}

TEST_CASE("simplex trace is nonincreasing") {
  Eigen::VectorXd start(2), step(2);
  start << 3, -2;
  step << 0.5, 0.5;
  const Box box{Eigen::VectorXd::Constant(2, -5.0), Eigen::VectorXd::Constant(2, 5.0)};
  const SearchResult r = nelder_mead(
      [](const Eigen::VectorXd& x) { return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2); }, start,
      step, box);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1]);
}

TEST_CASE("an objective that is infinite everywhere is an error") {
  const Objective inf = [](const Eigen::VectorXd&) { return std::numeric_limits<double>::infinity(); };
  const Box box{Eigen::VectorXd::Constant(2, -1.0), Eigen::VectorXd::Constant(2, 1.0)};
  CHECK_THROWS_AS(grid_then_local(inf, box, {3, 3}), std::runtime_error);
}

TEST_CASE("fitters are deterministic") {
  std::vector<double> t, y;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (int i = 0; i < 80; ++i) {
    t.push_back(i * 1e-4);
    y.push_back(std::exp(-t.back() / 3e-4) + 0.2 * std::exp(-t.back() / 3e-3) + noise(rng));
  }
  const FitResult a = fit_biexponential(t, y), b = fit_biexponential(t, y);
  CHECK(a.parameters == b.parameters);
  CHECK(a.uncertainties == b.uncertainties);
}

TEST_CASE("covariance of a badly scaled problem keeps every column") {
  // parameters differing by twelve orders of magnitude
  Eigen::MatrixXd j(20, 2);
  for (int i = 0; i < 20; ++i) {
    j(i, 0) = 1e6 * (1 + i);
    j(i, 1) = 1e-6 * std::sin(0.3 * i);
  }
  const Eigen::MatrixXd c = gauss_newton_covariance(j, 18.0);
  const Eigen::MatrixXd exact = (j.transpose() * j).inverse();
  CHECK(c(0, 0) == doctest::Approx(exact(0, 0)).epsilon(1e-6));
  CHECK(c(1, 1) == doctest::Approx(exact(1, 1)).epsilon(1e-6));
}
