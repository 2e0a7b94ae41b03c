#include "hybridcav/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace hybridcav {

std::string to_string(ModelId id) {
  switch (id) {
    case ModelId::lorentzian: return "lorentzian";
    case ModelId::exponential: return "exponential";
    case ModelId::biexponential: return "biexponential";
    case ModelId::linear: return "linear";
    case ModelId::two_pulse_echo: return "two_pulse_echo";
    case ModelId::three_pulse_echo: return "three_pulse_echo";
    case ModelId::joint_diffusion: return "joint_diffusion";
    case ModelId::saturation: return "saturation";
    case ModelId::geometry: return "geometry";
    case ModelId::detuning: return "detuning";
  }
  return "unknown";
}

int FitResult::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("fit result has no parameter '" + name + "'");
  return static_cast<int>(it - names.begin());
}

double FitResult::value(const std::string& name) const { return parameters[index_of(name)]; }
double FitResult::error(const std::string& name) const { return uncertainties[index_of(name)]; }

// ---------------------------------------------------------------------------

namespace {

double clamp_to(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

Eigen::VectorXd clamp_box(Eigen::VectorXd x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = clamp_to(x[j], lo[j], hi[j]);
  return x;
}

Eigen::VectorXd default_scale(const Eigen::VectorXd& x) {
  Eigen::VectorXd s(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) s[j] = x[j] != 0.0 ? std::abs(x[j]) : 1.0;
  return s;
}

Eigen::MatrixXd bounded_jacobian(const ResidualFunction& residual, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& r0, double relative_step, const Eigen::VectorXd& scale,
                                 const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  Eigen::MatrixXd jac(r0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = relative_step * std::max(std::abs(x[j]), scale[j]);
    Eigen::VectorXd xp = x, xm = x;
    const bool up_ok = x[j] + h <= hi[j];
    const bool down_ok = x[j] - h >= lo[j];
    if (up_ok && down_ok) {
      xp[j] += h;
      xm[j] -= h;
      jac.col(j) = (residual(xp) - residual(xm)) / (2.0 * h);
    } else if (up_ok) {
      xp[j] += h;
      jac.col(j) = (residual(xp) - r0) / h;
    } else {
      xm[j] -= h;
      jac.col(j) = (r0 - residual(xm)) / h;
    }
  }
  return jac;
}

} // namespace

Eigen::MatrixXd numeric_jacobian(const ResidualFunction& residual, const Eigen::VectorXd& x,
                                 double relative_step, const Eigen::VectorXd& scale) {
  const Eigen::VectorXd inf = Eigen::VectorXd::Constant(x.size(), std::numeric_limits<double>::infinity());
  return bounded_jacobian(residual, x, residual(x), relative_step, scale, -inf, inf);
}

Eigen::MatrixXd gauss_newton_covariance(const Eigen::MatrixXd& jacobian, double sum_of_squares) {
  const Eigen::Index m = jacobian.rows();
  const Eigen::Index p = jacobian.cols();
  if (m <= p) return Eigen::MatrixXd::Constant(p, p, std::numeric_limits<double>::infinity());
  // equilibrate columns first so that badly scaled parameters are not mistaken for a rank loss
  Eigen::VectorXd d = jacobian.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < p; ++j) d(j) = d(j) > 0.0 ? 1.0 / d(j) : 1.0;
  const Eigen::MatrixXd js = jacobian * d.asDiagonal();
  const Eigen::MatrixXd inverse = (js.transpose() * js).completeOrthogonalDecomposition().pseudoInverse();
  const double s2 = sum_of_squares / static_cast<double>(m - p);
  return s2 * (d.asDiagonal() * inverse * d.asDiagonal());
}

LeastSquaresResult least_squares(const ResidualFunction& residual, Eigen::VectorXd x0,
                                 const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                 const LeastSquaresOptions& options) {
  const Eigen::Index p = x0.size();
  if (lower.size() != p || upper.size() != p) throw std::invalid_argument("least_squares: bound sizes differ");
  const Eigen::VectorXd scale = options.scale.size() == p ? options.scale : default_scale(x0);

  LeastSquaresResult out;
  Eigen::VectorXd x = clamp_box(std::move(x0), lower, upper);
  Eigen::VectorXd r = residual(x);
  double ssr = r.squaredNorm();
  if (!std::isfinite(ssr)) throw std::runtime_error("least_squares: residual not finite at the start point");
  const double ssr0 = ssr;
  double lambda = 1e-3;

  for (out.iterations = 0; out.iterations < options.max_iterations; ++out.iterations) {
    if (ssr == 0.0) break;
    const Eigen::MatrixXd jac = bounded_jacobian(residual, x, r, options.jacobian_step, scale, lower, upper);
    const Eigen::VectorXd grad = jac.transpose() * r;
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    Eigen::VectorXd diag = jtj.diagonal();
    const double floor = std::max(diag.maxCoeff(), 1e-300) * 1e-12;
    for (Eigen::Index j = 0; j < p; ++j) diag[j] = std::max(diag[j], floor);

    bool accepted = false;
    double ssr_new = ssr;
    Eigen::VectorXd x_new, r_new;
    while (lambda < 1e16) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * diag;
      const Eigen::VectorXd step = a.ldlt().solve(-grad);
      x_new = clamp_box(x + step, lower, upper);
      if ((x_new - x).norm() == 0.0) {
        lambda *= 10.0;
        continue;
      }
      r_new = residual(x_new);
      ssr_new = r_new.squaredNorm();
      if (std::isfinite(ssr_new) && ssr_new < ssr) {
        accepted = true;
        lambda = std::max(lambda * 0.1, 1e-12);
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) break;
    const double relative_drop = (ssr - ssr_new) / ssr;
    const double step_size = ((x_new - x).array() / scale.array()).abs().maxCoeff();
    x = x_new;
    r = r_new;
    ssr = ssr_new;
    if (relative_drop < options.relative_tolerance || step_size < 1e-15) {
      ++out.iterations;
      break;
    }
  }

  out.x = x;
  out.residuals = r;
  out.sum_of_squares = ssr;
  const Eigen::MatrixXd jac = bounded_jacobian(residual, x, r, options.covariance_step, scale, lower, upper);
  out.covariance = gauss_newton_covariance(jac, ssr);
  out.at_bound.assign(static_cast<std::size_t>(p), false);

  // Scaled projected gradient: cosine between each Jacobian column and the residual.
  double gnorm = 0.0;
  const Eigen::VectorXd grad = jac.transpose() * r;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double tol = 1e-10 * std::max(std::abs(x[j]), scale[j]);
    const bool at_lo = x[j] - lower[j] <= tol;
    const bool at_hi = upper[j] - x[j] <= tol;
    out.at_bound[static_cast<std::size_t>(j)] = at_lo || at_hi;
    if ((at_lo && grad[j] > 0.0) || (at_hi && grad[j] < 0.0)) continue;
    const double denom = jac.col(j).norm() * std::sqrt(ssr);
    if (denom > 0.0) gnorm = std::max(gnorm, std::abs(grad[j]) / denom);
  }
  out.gradient_norm = gnorm;
  const bool exact = ssr <= 1e-24 * std::max(ssr0, 1e-300) || ssr == 0.0;
  out.converged = exact || gnorm <= 1e-6;
  if (exact) out.gradient_norm = 0.0;
  return out;
}

// ---------------------------------------------------------------------------

double lorentzian(double x, double center, double fwhm, double amplitude, double offset) {
  const double hw = 0.5 * fwhm;
  const double d = x - center;
  return amplitude * hw * hw / (d * d + hw * hw) + offset;
}

namespace {

void require_same_size(std::span<const double> a, std::span<const double> b, const char* who) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(who) + ": x and y differ in length");
}

std::vector<double> sqrt_weights(std::span<const double> weights, std::size_t n, const char* who) {
  std::vector<double> w(n, 1.0);
  if (weights.empty()) return w;
  if (weights.size() != n) throw std::invalid_argument(std::string(who) + ": weights differ in length");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(weights[i] >= 0.0)) throw std::invalid_argument(std::string(who) + ": negative weight");
    w[i] = std::sqrt(weights[i]);
  }
  return w;
}

FitResult pack(ModelId id, std::vector<std::string> names, const LeastSquaresResult& ls, std::size_t n) {
  FitResult fit;
  fit.model_id = id;
  fit.names = std::move(names);
  fit.parameters = ls.x;
  fit.covariance = ls.covariance;
  fit.uncertainties = ls.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.residual_rms = std::sqrt(ls.sum_of_squares / static_cast<double>(n));
  fit.iterations = ls.iterations;
  fit.converged = ls.converged;
  fit.boundary_flags = ls.at_bound;
  return fit;
}

constexpr double inf = std::numeric_limits<double>::infinity();

} // namespace

FitResult fit_lorentzian(std::span<const double> x, std::span<const double> y, std::span<const double> weights) {
  require_same_size(x, y, "fit_lorentzian");
  const std::size_t n = x.size();
  if (n < 5) throw std::invalid_argument("fit_lorentzian: need at least 5 points");
  const auto sw = sqrt_weights(weights, n, "fit_lorentzian");

  const auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
  const double span = *xmax_it - *xmin_it;
  const std::size_t peak = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
  const double c0 = *std::min_element(y.begin(), y.end());
  const double a0 = y[peak] - c0;
  const double half = c0 + 0.5 * a0;

  // half-maximum crossings, assuming x sorted ascending around the peak
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  const std::size_t pk = static_cast<std::size_t>(std::find(order.begin(), order.end(), peak) - order.begin());
  double left = std::numeric_limits<double>::quiet_NaN(), right = left;
  for (std::size_t k = pk; k > 0; --k) {
    const double ya = y[order[k - 1]], yb = y[order[k]];
    if (ya < half) {
      const double f = (half - ya) / (yb - ya);
      left = x[order[k - 1]] + f * (x[order[k]] - x[order[k - 1]]);
      break;
    }
  }
  for (std::size_t k = pk; k + 1 < n; ++k) {
    const double ya = y[order[k]], yb = y[order[k + 1]];
    if (yb < half) {
      const double f = (ya - half) / (ya - yb);
      right = x[order[k]] + f * (x[order[k + 1]] - x[order[k]]);
      break;
    }
  }
  double g0;
  if (std::isfinite(left) && std::isfinite(right)) g0 = right - left;
  else if (std::isfinite(left)) g0 = 2.0 * (x[peak] - left);
  else if (std::isfinite(right)) g0 = 2.0 * (right - x[peak]);
  else g0 = 0.5 * span;
  if (!(g0 > 0.0)) g0 = span / static_cast<double>(n);

  auto residual = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      r[static_cast<Eigen::Index>(i)] = sw[i] * (lorentzian(x[i], p[0], p[1], p[2], p[3]) - y[i]);
    return r;
  };
  // fit the centre relative to the peak sample so steps scale with the line width
  const double x_ref = x[peak];
  auto shifted = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd p = q;
    p[0] += x_ref;
    return residual(p);
  };
  Eigen::VectorXd q0(4);
  q0 << 0.0, g0, a0, c0;
  Eigen::VectorXd lo(4), hi(4);
  lo << -inf, 1e-12 * g0, -inf, -inf;
  hi << inf, inf, inf, inf;
  const double level = std::max(std::abs(a0), std::abs(c0)) > 0.0 ? std::max(std::abs(a0), std::abs(c0)) : 1.0;
  LeastSquaresOptions options;
  options.scale = Eigen::Vector4d(g0, g0, level, level);
  LeastSquaresResult ls = least_squares(shifted, q0, lo, hi, options);
  ls.x[0] += x_ref;
  FitResult fit = pack(ModelId::lorentzian, {"center", "fwhm", "amplitude", "offset"}, ls, n);
  fit.low_confidence = span <= fit.parameters[1];
  if (fit.low_confidence) fit.message = "data span does not exceed one FWHM";
  return fit;
}

FitResult fit_linear(std::span<const double> x, std::span<const double> y) {
  require_same_size(x, y, "fit_linear");
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("fit_linear: need at least 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_linear: all x values identical");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (slope * x[i] + intercept);
    ssr += r * r;
  }
  FitResult fit;
  fit.model_id = ModelId::linear;
  fit.names = {"slope", "intercept"};
  fit.parameters = Eigen::Vector2d(slope, intercept);
  fit.covariance = Eigen::Matrix2d::Constant(inf);
  if (n > 2) {
    const double s2 = ssr / static_cast<double>(n - 2);
    fit.covariance(0, 0) = s2 / sxx;
    fit.covariance(1, 1) = s2 * (1.0 / static_cast<double>(n) + mx * mx / sxx);
    fit.covariance(0, 1) = fit.covariance(1, 0) = -mx * s2 / sxx;
  }
  fit.uncertainties = fit.covariance.diagonal().cwiseSqrt();
  fit.residual_rms = std::sqrt(ssr / static_cast<double>(n));
  fit.converged = true;
  fit.boundary_flags = {false, false};
  return fit;
}

namespace {

// log-linear seed over index range [begin, end) using positive samples only
bool log_linear_seed(std::span<const double> t, std::span<const double> y, std::size_t begin, std::size_t end,
                     double& amplitude, double& rate) {
  std::vector<double> tt, ly;
  for (std::size_t i = begin; i < end; ++i) {
    if (y[i] > 0.0) {
      tt.push_back(t[i]);
      ly.push_back(std::log(y[i]));
    }
  }
  if (tt.size() < 2) return false;
  if (std::all_of(tt.begin(), tt.end(), [&](double v) { return v == tt.front(); })) return false;
  const FitResult lin = fit_linear(tt, ly);
  amplitude = std::exp(lin.parameters[1]);
  rate = -lin.parameters[0];
  return std::isfinite(amplitude) && std::isfinite(rate);
}

} // namespace

FitResult fit_exponential(std::span<const double> t, std::span<const double> y, std::span<const double> weights) {
  require_same_size(t, y, "fit_exponential");
  const std::size_t n = t.size();
  if (n < 3) throw std::invalid_argument("fit_exponential: need at least 3 points");
  const auto sw = sqrt_weights(weights, n, "fit_exponential");
  double a0 = 0.0, r0 = 0.0;
  if (!log_linear_seed(t, y, 0, n, a0, r0))
    throw std::invalid_argument("fit_exponential: need at least two positive samples for seeding");
  auto residual = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      r[static_cast<Eigen::Index>(i)] = sw[i] * (p[0] * std::exp(-p[1] * t[i]) - y[i]);
    return r;
  };
  const Eigen::Vector2d lo(-inf, -inf), hi(inf, inf);
  const LeastSquaresResult ls = least_squares(residual, Eigen::Vector2d(a0, r0), lo, hi);
  return pack(ModelId::exponential, {"amplitude", "rate"}, ls, n);
}

FitResult fit_biexponential(std::span<const double> t, std::span<const double> y, std::span<const double> weights) {
  require_same_size(t, y, "fit_biexponential");
  const std::size_t n = t.size();
  if (n < 6) throw std::invalid_argument("fit_biexponential: need at least 6 points");
  const auto sw = sqrt_weights(weights, n, "fit_biexponential");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });
  std::vector<double> ts(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    ts[i] = t[order[i]];
    ys[i] = y[order[i]];
  }

  // slow component from the last third, fast component from what remains of the first third
  double a2 = 0.0, r2 = 0.0, a1 = 0.0, r1 = 0.0;
  if (!log_linear_seed(ts, ys, n - n / 3, n, a2, r2) && !log_linear_seed(ts, ys, 0, n, a2, r2))
    throw std::invalid_argument("fit_biexponential: need positive samples for seeding");
  std::vector<double> rest(n / 3);
  for (std::size_t i = 0; i < n / 3; ++i) rest[i] = ys[i] - a2 * std::exp(-r2 * ts[i]);
  if (!log_linear_seed(std::span<const double>(ts).first(n / 3), rest, 0, n / 3, a1, r1) || !(r1 > r2)) {
    r1 = 3.0 * std::max(r2, 1e-300);
    a1 = std::max(ys.front() - a2, 0.0);
  }

  auto residual = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      r[static_cast<Eigen::Index>(i)] =
          sw[order[i]] * (p[0] * std::exp(-p[1] * ts[i]) + p[2] * std::exp(-p[3] * ts[i]) - ys[i]);
    return r;
  };
  Eigen::Vector4d p0(a1, r1, a2, r2);
  Eigen::Vector4d lo(-inf, 0.0, -inf, 0.0), hi(inf, inf, inf, inf);
  LeastSquaresResult ls = least_squares(residual, p0, lo, hi);
  if (ls.x[1] < ls.x[3]) {
    std::swap(ls.x[0], ls.x[2]);
    std::swap(ls.x[1], ls.x[3]);
    std::swap(ls.at_bound[0], ls.at_bound[2]);
    std::swap(ls.at_bound[1], ls.at_bound[3]);
    Eigen::PermutationMatrix<4> perm;
    perm.indices() << 2, 3, 0, 1;
    ls.covariance = perm * ls.covariance * perm.transpose();
  }
  FitResult fit = pack(ModelId::biexponential, {"A1", "r1", "A2", "r2"}, ls, n);
  const double ratio = fit.parameters[3] > 0.0 ? fit.parameters[1] / fit.parameters[3] : inf;
  const double minor = std::min(std::abs(fit.parameters[0]), std::abs(fit.parameters[2])) /
                       (std::abs(fit.parameters[0]) + std::abs(fit.parameters[2]));
  fit.degenerate = ratio < 1.5 || minor < 1e-3;
  if (fit.degenerate) fit.message = "rates indistinguishable: effectively single-exponential";
  return fit;
}

// ---------------------------------------------------------------------------

bool Box::contains(const Eigen::VectorXd& x) const {
  return x.size() == lower.size() && (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

Eigen::VectorXd Box::clamp(Eigen::VectorXd x) const { return clamp_box(std::move(x), lower, upper); }

namespace {

double safe_eval(const Objective& f, const Eigen::VectorXd& x) {
  const double v = f(x);
  return std::isnan(v) ? inf : v;
}

} // namespace

namespace {

SearchResult simplex_pass(const Objective& objective, const Eigen::VectorXd& start, const Eigen::VectorXd& step,
                          const Box& box, const SimplexOptions& options) {
  const Eigen::Index dim = start.size();
  std::vector<Eigen::Index> free_axes;
  for (Eigen::Index j = 0; j < dim; ++j)
    if (step[j] != 0.0 && box.upper[j] > box.lower[j]) free_axes.push_back(j);
  const std::size_t k = free_axes.size();

  SearchResult out;
  std::vector<Eigen::VectorXd> vertices;
  std::vector<double> values;
  vertices.push_back(box.clamp(start));
  values.push_back(safe_eval(objective, vertices.back()));
  for (const Eigen::Index j : free_axes) {
    Eigen::VectorXd v = vertices.front();
    double s = step[j];
    if (v[j] + s > box.upper[j]) s = -s;
    if (v[j] + s < box.lower[j]) s = 0.5 * (box.upper[j] - box.lower[j]) - (v[j] - box.lower[j]);
    v[j] += s;
    vertices.push_back(box.clamp(v));
    values.push_back(safe_eval(objective, vertices.back()));
  }

  auto order_simplex = [&]() {
    std::vector<std::size_t> idx(vertices.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<Eigen::VectorXd> v2;
    std::vector<double> f2;
    for (const std::size_t i : idx) {
      v2.push_back(vertices[i]);
      f2.push_back(values[i]);
    }
    vertices.swap(v2);
    values.swap(f2);
  };

  const Eigen::VectorXd width = (box.upper - box.lower).cwiseMax(1e-300);
  order_simplex();
  for (out.iterations = 0; k > 0 && out.iterations < options.max_iterations; ++out.iterations) {
    const double best = values.front(), worst = values.back();
    const double spread = worst - best;
    const double tol = std::max(options.absolute_tolerance, options.relative_tolerance * std::abs(best));
    double extent = 0.0;
    for (std::size_t i = 1; i < vertices.size(); ++i)
      extent = std::max(extent, ((vertices[i] - vertices[0]).array() / width.array()).abs().maxCoeff());
    if ((std::isfinite(spread) && spread <= tol) || extent <= options.size_tolerance) {
      out.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i < k; ++i) centroid += vertices[i];
    centroid /= static_cast<double>(k);
    const Eigen::VectorXd& w = vertices.back();

    // a reflection leaving the box is rejected rather than projected, since
    // projection would flatten the simplex onto the face
    const Eigen::VectorXd xr = centroid + (centroid - w);
    const double fr = box.contains(xr) ? safe_eval(objective, xr) : std::numeric_limits<double>::infinity();
    if (fr < values.front()) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - w);
      const double fe = box.contains(xe) ? safe_eval(objective, xe) : std::numeric_limits<double>::infinity();
      if (fe < fr) {
        vertices.back() = xe;
        values.back() = fe;
      } else {
        vertices.back() = xr;
        values.back() = fr;
      }
    } else if (fr < values[k - 1]) {
      vertices.back() = xr;
      values.back() = fr;
    } else {
      const bool outside = fr < values.back();
      const Eigen::VectorXd xc = outside ? centroid + 0.5 * (xr - centroid) : centroid + 0.5 * (w - centroid);
      const double fc = safe_eval(objective, xc);
      if (fc < (outside ? fr : values.back())) {
        vertices.back() = xc;
        values.back() = fc;
      } else {
        for (std::size_t i = 1; i < vertices.size(); ++i) {
          vertices[i] = box.clamp(vertices[0] + 0.5 * (vertices[i] - vertices[0]));
          values[i] = safe_eval(objective, vertices[i]);
        }
      }
    }
    order_simplex();
    out.trace.push_back(values.front());
  }
  if (k == 0) out.converged = true;
  out.argmin = vertices.front();
  out.value = values.front();
  out.at_bound.resize(static_cast<std::size_t>(dim));
  for (Eigen::Index j = 0; j < dim; ++j) {
    const double tol = 1e-9 * width[j];
    out.at_bound[static_cast<std::size_t>(j)] = box.upper[j] > box.lower[j] &&
        (out.argmin[j] - box.lower[j] <= tol || box.upper[j] - out.argmin[j] <= tol);
  }
  return out;
}

} // namespace

// Clamped reflections can flatten the simplex against a face of the box, so a
// converged pass is restarted from its best vertex until it stops improving.
SearchResult nelder_mead(const Objective& objective, const Eigen::VectorXd& start, const Eigen::VectorXd& step,
                         const Box& box, const SimplexOptions& options) {
  SearchResult out = simplex_pass(objective, start, step, box, options);
  for (int restart = 0; restart < 8; ++restart) {
    SearchResult next = simplex_pass(objective, out.argmin, step, box, options);
    const double tol = std::max(options.absolute_tolerance, options.relative_tolerance * std::abs(out.value));
    const bool improved = next.value < out.value - tol;
    if (next.value < out.value) {
      next.iterations += out.iterations;
      next.trace.insert(next.trace.begin(), out.trace.begin(), out.trace.end());
      for (double& v : next.trace) v = std::min(v, out.value);
      std::swap(out, next);
    }
    if (!improved) break;
  }
  return out;
}

SearchResult grid_then_local(const Objective& objective, const Box& box, const std::vector<int>& grid_counts,
                             const SimplexOptions& options, int workers) {
  const Eigen::Index dim = box.size();
  if (static_cast<Eigen::Index>(grid_counts.size()) != dim)
    throw std::invalid_argument("grid_then_local: one grid count per parameter required");
  for (Eigen::Index j = 0; j < dim; ++j) {
    if (!std::isfinite(box.lower[j]) || !std::isfinite(box.upper[j]) || box.upper[j] < box.lower[j])
      throw std::invalid_argument("grid_then_local: bounds must be finite and ordered");
    if (grid_counts[static_cast<std::size_t>(j)] < 1) throw std::invalid_argument("grid_then_local: grid counts must be >= 1");
  }

  auto node = [&](Eigen::Index axis, int i) {
    const int count = grid_counts[static_cast<std::size_t>(axis)];
    if (count == 1) return 0.5 * (box.lower[axis] + box.upper[axis]);
    return box.lower[axis] + (box.upper[axis] - box.lower[axis]) * i / (count - 1);
  };
  std::size_t total = 1;
  for (const int c : grid_counts) total *= static_cast<std::size_t>(c);

  auto point_at = [&](std::size_t flat) {
    Eigen::VectorXd x(dim);
    for (Eigen::Index j = dim - 1; j >= 0; --j) {
      const auto c = static_cast<std::size_t>(grid_counts[static_cast<std::size_t>(j)]);
      x[j] = node(j, static_cast<int>(flat % c));
      flat /= c;
    }
    return x;
  };

  std::vector<double> values(total);
  auto evaluate_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) values[i] = safe_eval(objective, point_at(i));
  };
  workers = std::max(1, std::min<int>(workers, static_cast<int>(total)));
  if (workers == 1) {
    evaluate_range(0, total);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (total + static_cast<std::size_t>(workers) - 1) / static_cast<std::size_t>(workers);
    for (int w = 0; w < workers; ++w) {
      const std::size_t b = static_cast<std::size_t>(w) * chunk;
      const std::size_t e = std::min(total, b + chunk);
      if (b < e) pool.emplace_back(evaluate_range, b, e);
    }
    for (auto& th : pool) th.join();
  }

  std::size_t best = total;
  for (std::size_t i = 0; i < total; ++i)
    if (std::isfinite(values[i]) && (best == total || values[i] < values[best])) best = i;
  if (best == total) throw std::runtime_error("grid_then_local: objective is not finite anywhere on the grid");

  Eigen::VectorXd step(dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    const int c = grid_counts[static_cast<std::size_t>(j)];
    const double w = box.upper[j] - box.lower[j];
    step[j] = c > 1 ? 0.5 * w / (c - 1) : 0.1 * w;  // stay inside the winning cell
  }
  const Eigen::VectorXd start = point_at(best);
  SearchResult out = nelder_mead(objective, start, step, box, options);
  out.grid_argmin = start;
  out.grid_value = values[best];
  return out;
}

} // namespace hybridcav
