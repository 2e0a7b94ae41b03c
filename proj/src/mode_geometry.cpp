#include "hybridcav/mode_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

#include "hybridcav/estimation.hpp"
#include "hybridcav/random.hpp"

namespace hybridcav {

double effective_length(const CavityAssembly& assembly) {
  return assembly.air_gap + assembly.crystal.thickness / assembly.crystal.refractive_index;
}

double waist(const CavityAssembly& assembly, double wavelength) {
  const double l = effective_length(assembly);
  const double r = assembly.radius_of_curvature;
  if (!std::isfinite(r) || !(r > l) || !(l > 0.0))
    throw std::domain_error("unstable geometry: no confined Gaussian mode for R = " + std::to_string(r) +
                            " m and L_eff = " + std::to_string(l) + " m");
  return std::sqrt(wavelength / pi * std::sqrt(l * (r - l)));
}

double transverse_mode_spacing(const CavityAssembly& assembly) {
  const double l = effective_length(assembly);
  const double r = assembly.radius_of_curvature;
  if (!std::isfinite(r) || !(r > l)) throw std::domain_error("unstable geometry: no transverse mode ladder");
  return assembly.geometric_fsr() / pi * std::acos(std::sqrt(1.0 - l / r));
}

std::string to_string(Polarization p) { return p == Polarization::D1 ? "D1" : "D2"; }

Polarization polarization_from_string(const std::string& s) {
  if (s == "D1" || s == "d1") return Polarization::D1;
  if (s == "D2" || s == "d2") return Polarization::D2;
  throw std::invalid_argument("unknown polarization '" + s + "' (expected D1 or D2)");
}

const std::array<const char*, 5> GeometryParams::names = {"t_c", "t_a", "R", "phase_offset", "phase_slope"};

Eigen::Matrix<double, 5, 1> GeometryParams::vector() const {
  Eigen::Matrix<double, 5, 1> v;
  v << t_c, t_a, R, phase_offset, phase_slope;
  return v;
}

GeometryParams GeometryParams::from_vector(const Eigen::Matrix<double, 5, 1>& v) {
  return {v[0], v[1], v[2], v[3], v[4]};
}

CavityAssembly GeometryParams::apply(CavityAssembly assembly) const {
  assembly.crystal.thickness = t_c;
  assembly.air_gap = t_a;
  assembly.radius_of_curvature = R;
  assembly.phase_correction.offset = phase_offset;
  assembly.phase_correction.slope = phase_slope;
  return assembly;
}

GeometryParams params_of(const CavityAssembly& assembly) {
  return {assembly.crystal.thickness, assembly.air_gap, assembly.radius_of_curvature,
          assembly.phase_correction.offset, assembly.phase_correction.slope};
}

std::vector<ModePrediction> predict_mode_frequencies(const CavityAssembly& templ, const GeometryParams& params,
                                                     double frequency_min, double frequency_max, int max_order,
                                                     double ellipticity, const MirrorTable* table) {
  const CavityAssembly a = params.apply(templ);
  a.validate();
  const double spacing = transverse_mode_spacing(a);
  // longitudinal modes whose transverse ladder can reach the window
  const double lo = frequency_min - max_order * spacing - 0.5 * std::abs(ellipticity);
  std::vector<ModePrediction> out;
  for (const ResonanceRoot& root : resonance_roots(a, lo, frequency_max, table)) {
    const double nu = root.frequency;
    const int q = static_cast<int>(root.order);
    for (int k = 0; k <= max_order; ++k) {
      const double base = nu + k * spacing;
      if (k == 0 || ellipticity == 0.0) {
        if (base >= frequency_min && base <= frequency_max) out.push_back({q, k, 0, base});
      } else {
        for (const int fam : {-1, 1}) {
          const double f = base + fam * 0.5 * ellipticity;
          if (f >= frequency_min && f <= frequency_max) out.push_back({q, k, fam, f});
        }
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const ModePrediction& x, const ModePrediction& y) {
    return std::tie(x.frequency, x.transverse_order, x.family) < std::tie(y.frequency, y.transverse_order, y.family);
  });
  return out;
}

namespace {

bool canonical_less(const ModeObservation& x, const ModeObservation& y) {
  return std::make_tuple(x.frequency, x.transverse_order, static_cast<int>(x.polarization),
                         x.longitudinal_index_hint.value_or(std::numeric_limits<int>::min())) <
         std::make_tuple(y.frequency, y.transverse_order, static_cast<int>(y.polarization),
                         y.longitudinal_index_hint.value_or(std::numeric_limits<int>::min()));
}

struct Window {
  double lo, hi;
  int max_order;
};

Window window_of(const std::vector<ModeObservation>& obs, double fsr) {
  Window w{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), 0};
  for (const auto& o : obs) {
    w.lo = std::min(w.lo, o.frequency);
    w.hi = std::max(w.hi, o.frequency);
    w.max_order = std::max(w.max_order, o.transverse_order);
  }
  w.lo -= 1.5 * fsr;
  w.hi += 1.5 * fsr;
  return w;
}

} // namespace

double geometry_objective(const CavityAssembly& templ, const std::vector<ModeObservation>& observations,
                          const GeometryParams& params, double ellipticity, std::vector<ResidualRow>* rows,
                          const MirrorTable* table) {
  const CavityAssembly a = params.apply(templ);
  std::vector<ModePrediction> preds;
  double fsr = 0.0;
  try {
    a.validate();
    fsr = a.geometric_fsr();
    const Window w = window_of(observations, fsr);
    preds = predict_mode_frequencies(templ, params, w.lo, w.hi, w.max_order, ellipticity, table);
  } catch (const std::exception&) {
    return std::numeric_limits<double>::infinity();
  }
  const double penalty = 0.0625 * fsr * fsr;
  std::set<std::tuple<int, int, int>> used;
  double sum = 0.0;
  if (rows) rows->clear();
  for (const ModeObservation& o : observations) {
    const ModePrediction* best = nullptr;
    for (const ModePrediction& p : preds) {
      if (p.transverse_order != o.transverse_order) continue;
      if (o.longitudinal_index_hint && p.q != *o.longitudinal_index_hint) continue;
      if (!best || std::abs(p.frequency - o.frequency) < std::abs(best->frequency - o.frequency)) best = &p;
    }
    if (!best) return std::numeric_limits<double>::infinity();
    const double r = o.frequency - best->frequency;
    sum += r * r;
    const bool dup = !used.insert({best->q, best->transverse_order, best->family}).second;
    if (dup) sum += penalty;
    if (rows) rows->push_back({o, *best, r, dup});
  }
  return sum;
}

namespace {

int crystal_grid_count(const GeometryFitOptions& options) {
  const double width = options.upper[0] - options.lower[0];
  if (!(width > 0.0)) return 1;
  return static_cast<int>(std::ceil(width / std::max(options.crystal_step, 1e-12))) + 1;
}

// Air gap in [lo, hi] that puts a predicted fundamental line on `anchor`. The
// line positions are far from linear in t_a for a hybrid cavity, so every line
// is tracked by its longitudinal index across a coarse t_a scan and each sign
// change is refined by regula falsi. Returns the root with the lowest
// objective, or NaN when no line crosses the anchor inside the bounds.
template <typename F>
double align_air_gap(const CavityAssembly& templ, GeometryParams p, double anchor, double lo, double hi,
                     const MirrorTable* table, F&& objective) {
  p.t_a = 0.5 * (lo + hi);
  const double fsr = p.apply(templ).geometric_fsr();
  const auto lines = [&](double t_a) {
    p.t_a = t_a;
    std::map<int, double> out;
    try {
      for (const auto& l : predict_mode_frequencies(templ, p, anchor - 2.0 * fsr, anchor + 2.0 * fsr, 0, 0.0, table))
        out.emplace(l.q, l.frequency - anchor);
    } catch (const std::exception&) {
    }
    return out;
  };
  const int steps = std::max(2, static_cast<int>(std::ceil((hi - lo) / 50e-9)));
  std::vector<double> grid(static_cast<std::size_t>(steps) + 1);
  std::vector<std::map<int, double>> scan;
  for (int k = 0; k <= steps; ++k) {
    grid[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / steps;
    scan.push_back(lines(grid[static_cast<std::size_t>(k)]));
  }
  double best_ta = std::numeric_limits<double>::quiet_NaN();
  double best_value = std::numeric_limits<double>::infinity();
  const auto consider = [&](double t_a) {
    const double v = objective(t_a);
    if (v < best_value) {
      best_value = v;
      best_ta = t_a;
    }
  };
  for (std::size_t k = 0; k + 1 < scan.size(); ++k)
    for (const auto& [q, d0] : scan[k]) {
      const auto next = scan[k + 1].find(q);
      if (next == scan[k + 1].end()) continue;
      double a = grid[k], b = grid[k + 1], fa = d0, fb = next->second;
      if (fa == 0.0) {
        consider(a);
        continue;
      }
      if (fa * fb > 0.0) continue;
      for (int it = 0; it < 40 && std::abs(b - a) > 1e-13; ++it) {
        const double c = (a * fb - b * fa) / (fb - fa);
        const auto at = lines(c);
        const auto hit = at.find(q);
        if (hit == at.end()) break;
        const double fc = hit->second;
        if (std::abs(fc) < 1e3) {
          a = b = c;
          break;
        }
        // Illinois variant: halve the stale end so both ends keep moving
        if (fc * fb < 0.0) {
          a = b;
          fa = fb;
        } else {
          fa *= 0.5;
        }
        b = c;
        fb = fc;
      }
      consider(0.5 * (a + b));
    }
  return best_ta;
}

} // namespace

GeometryFitOptions GeometryFitOptions::around(const CavityAssembly& templ) {
  GeometryFitOptions o;
  const GeometryParams p = params_of(templ);
  o.lower << p.t_c - 0.5 * um, p.t_a - 0.5 * um, p.R - 10.0 * um, p.phase_offset, p.phase_slope;
  o.upper << p.t_c + 0.5 * um, p.t_a + 0.5 * um, p.R + 10.0 * um, p.phase_offset, p.phase_slope;
  return o;
}

GeometryEstimate fit_geometry(std::vector<ModeObservation> observations, const CavityAssembly& templ,
                              const GeometryFitOptions& options) {
  if (observations.size() < 6)
    throw std::invalid_argument("under-determined geometry fit: " + std::to_string(observations.size()) +
                                " observations given, at least 6 are required");
  for (const auto& o : observations) {
    if (o.polarization != observations.front().polarization)
      throw std::invalid_argument("fit_geometry expects a single polarization family; use fit_geometry_by_polarization");
    if (!(o.frequency > 0.0) || o.transverse_order < 0)
      throw std::invalid_argument("observations need frequency > 0 and transverse order >= 0");
  }
  std::sort(observations.begin(), observations.end(), canonical_less);

  std::set<int> orders;
  for (const auto& o : observations) orders.insert(o.transverse_order);
  if (orders.size() < 2)
    throw std::invalid_argument("under-determined geometry fit: observations cover only one transverse order, "
                                "at least 2 are required to constrain R");
  const GeometryParams mid = GeometryParams::from_vector(0.5 * (options.lower + options.upper));
  const double fsr_mid = mid.apply(templ).geometric_fsr();
  double widest = 0.0;
  for (const int k : orders) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& o : observations)
      if (o.transverse_order == k) {
        lo = std::min(lo, o.frequency);
        hi = std::max(hi, o.frequency);
      }
    widest = std::max(widest, hi - lo);
  }
  if (widest < 0.5 * fsr_mid)
    throw std::invalid_argument("under-determined geometry fit: no transverse order spans two longitudinal modes");

  Box box{options.lower, options.upper};
  for (int j = 0; j < 5; ++j)
    if (!(options.upper[j] >= options.lower[j])) throw std::invalid_argument("geometry bounds must be ordered");

  // the coatings are fixed during the fit, so tabulate them once over a generous window
  double obs_lo = observations.front().frequency, obs_hi = observations.back().frequency;
  const double fsr_max = GeometryParams::from_vector(options.lower).apply(templ).geometric_fsr();
  const MirrorTable table(templ, obs_lo - 4.0 * fsr_max, obs_hi + 2.0 * fsr_max);
  const Objective objective = [&](const Eigen::VectorXd& x) {
    return geometry_objective(templ, observations, GeometryParams::from_vector(x), options.ellipticity, nullptr,
                              &table);
  };
  SimplexOptions simplex;
  simplex.relative_tolerance = options.relative_tolerance;
  simplex.max_iterations = options.max_iterations;

  std::vector<double> fundamentals;
  for (const auto& o : observations)
    if (o.transverse_order == 0) fundamentals.push_back(o.frequency);
  std::sort(fundamentals.begin(), fundamentals.end());
  const bool air_free = options.upper[1] > options.lower[1];
  const bool profile = options.profile_air_gap && air_free && !fundamentals.empty();

  SearchResult search;
  if (!profile) {
    std::vector<int> counts(options.grid_points.begin(), options.grid_points.end());
    if (counts[0] <= 0) counts[0] = crystal_grid_count(options);
    search = grid_then_local(objective, box, counts, simplex, options.workers);
  } else {
    // The mode pattern pins n t_c + t_a far more tightly than either length, so
    // t_a is solved for at every (t_c, R, ...) node by putting one observed
    // fundamental on a predicted line; the grid then only spans the rest.
    const double anchor = fundamentals[fundamentals.size() / 2];
    std::vector<int> reduced;
    for (int j = 0; j < 5; ++j)
      if (j != 1) reduced.push_back(j);
    const auto expand = [&](const Eigen::VectorXd& xr, double t_a) {
      Eigen::Matrix<double, 5, 1> full;
      for (std::size_t i = 0; i < reduced.size(); ++i) full[reduced[i]] = xr[static_cast<Eigen::Index>(i)];
      full[1] = t_a;
      return full;
    };
    const auto profiled = [&](const Eigen::VectorXd& xr, double* t_a_out) {
      const Eigen::Matrix<double, 5, 1> start = expand(xr, 0.5 * (options.lower[1] + options.upper[1]));
      const double best_ta = align_air_gap(templ, GeometryParams::from_vector(start), anchor, options.lower[1],
                                           options.upper[1], &table, [&](double t_a) {
                                             return objective(expand(xr, t_a));
                                           });
      if (t_a_out) *t_a_out = best_ta;
      return std::isnan(best_ta) ? std::numeric_limits<double>::infinity() : objective(expand(xr, best_ta));
    };
    Box rbox{Eigen::VectorXd(4), Eigen::VectorXd(4)};
    std::vector<int> counts;
    for (std::size_t i = 0; i < reduced.size(); ++i) {
      rbox.lower[static_cast<Eigen::Index>(i)] = options.lower[reduced[i]];
      rbox.upper[static_cast<Eigen::Index>(i)] = options.upper[reduced[i]];
      counts.push_back(options.grid_points[static_cast<std::size_t>(reduced[i])]);
    }
    if (counts[0] <= 0) counts[0] = crystal_grid_count(options);
    const SearchResult coarse =
        grid_then_local([&](const Eigen::VectorXd& xr) { return profiled(xr, nullptr); }, rbox, counts, simplex,
                        options.workers);
    double t_a = 0.0;
    profiled(coarse.argmin, &t_a);
    const Eigen::VectorXd x0 = expand(coarse.argmin, t_a);
    // polish all free parameters together from the profiled optimum
    Eigen::VectorXd step(5);
    const double cs = std::max(options.crystal_step, 1e-12);
    step << 0.5 * cs, cs, 0.0, 0.0, 0.0;
    for (int j = 2; j < 5; ++j) {
      const double width = options.upper[j] - options.lower[j];
      const int c = options.grid_points[static_cast<std::size_t>(j)];
      step[j] = width / std::max(4 * (c > 1 ? c - 1 : 1), 1);
    }
    search = nelder_mead(objective, x0, step, box, simplex);
    if (!(search.value <= coarse.value)) {
      search.argmin = x0;
      search.value = coarse.value;
    }
    search.grid_argmin = expand(coarse.grid_argmin, t_a);
    search.grid_value = coarse.grid_value;
    search.iterations += coarse.iterations;
    std::vector<double> trace = coarse.trace;
    trace.insert(trace.end(), search.trace.begin(), search.trace.end());
    search.trace = std::move(trace);
    search.converged = search.converged || coarse.converged;
  }

  GeometryEstimate est;
  est.params = GeometryParams::from_vector(search.argmin);
  est.polarization = observations.front().polarization;
  est.objective =
      geometry_objective(templ, observations, est.params, options.ellipticity, &est.residuals, &table);
  est.iterations = search.iterations;
  est.converged = search.converged;
  est.trace = search.trace;
  double ssr = 0.0;
  for (const auto& row : est.residuals) ssr += row.residual * row.residual;
  est.residual_rms = std::sqrt(ssr / static_cast<double>(observations.size()));

  for (int j = 0; j < 5; ++j) {
    const double width = options.upper[j] - options.lower[j];
    if (width <= 0.0) continue;
    est.free_parameters.push_back(j);
    const double tol = 1e-6 * width;
    est.boundary_flags[static_cast<std::size_t>(j)] =
        search.argmin[j] - options.lower[j] <= tol || options.upper[j] - search.argmin[j] <= tol;
    est.on_boundary = est.on_boundary || est.boundary_flags[static_cast<std::size_t>(j)];
  }

  // Finite-difference covariance with the mode assignment frozen at the optimum.
  const auto& free = est.free_parameters;
  const auto rows = est.residuals;
  const Window w = window_of(observations, est.params.apply(templ).geometric_fsr());
  const ResidualFunction frozen = [&](const Eigen::VectorXd& xf) {
    Eigen::Matrix<double, 5, 1> full = search.argmin;
    for (std::size_t i = 0; i < free.size(); ++i) full[free[i]] = xf[static_cast<Eigen::Index>(i)];
    Eigen::VectorXd r(static_cast<Eigen::Index>(rows.size()));
    std::vector<ModePrediction> preds;
    try {
      preds = predict_mode_frequencies(templ, GeometryParams::from_vector(full), w.lo, w.hi, w.max_order,
                                       options.ellipticity, &table);
    } catch (const std::exception&) {
      r.setConstant(std::numeric_limits<double>::quiet_NaN());
      return r;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      // follow the assigned line: same order and family, nearest to its frequency at the optimum
      double f = std::numeric_limits<double>::quiet_NaN();
      for (const auto& p : preds)
        if (p.transverse_order == rows[i].assigned.transverse_order && p.family == rows[i].assigned.family &&
            (std::isnan(f) || std::abs(p.frequency - rows[i].assigned.frequency) <
                                  std::abs(f - rows[i].assigned.frequency)))
          f = p.frequency;
      r[static_cast<Eigen::Index>(i)] = rows[i].observation.frequency - f;
    }
    return r;
  };
  if (!free.empty()) {
    Eigen::VectorXd xf(static_cast<Eigen::Index>(free.size())), scale(static_cast<Eigen::Index>(free.size()));
    for (std::size_t i = 0; i < free.size(); ++i) {
      xf[static_cast<Eigen::Index>(i)] = search.argmin[free[i]];
      // phase parameters can sit at zero; give them a natural scale
      const double natural = free[i] == 3 ? 1.0 : free[i] == 4 ? 1e6 : 1e-6;
      scale[static_cast<Eigen::Index>(i)] = std::max(std::abs(search.argmin[free[i]]), natural);
    }
    const Eigen::MatrixXd jac = numeric_jacobian(frozen, xf, 1e-5, scale);
    if (jac.allFinite()) {
      est.covariance = gauss_newton_covariance(jac, ssr);
      for (std::size_t i = 0; i < free.size(); ++i)
        est.uncertainties[free[i]] = std::sqrt(std::max(0.0, est.covariance(static_cast<Eigen::Index>(i),
                                                                            static_cast<Eigen::Index>(i))));
    } else {
      est.covariance = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(free.size()),
                                                 static_cast<Eigen::Index>(free.size()),
                                                 std::numeric_limits<double>::infinity());
      est.uncertainties.setConstant(std::numeric_limits<double>::infinity());
    }
  }
  return est;
}

std::vector<GeometryEstimate> fit_geometry_by_polarization(const std::vector<ModeObservation>& observations,
                                                           const CavityAssembly& templ_d1,
                                                           const CavityAssembly& templ_d2,
                                                           const GeometryFitOptions& options) {
  std::map<Polarization, std::vector<ModeObservation>> groups;
  for (const auto& o : observations) groups[o.polarization].push_back(o);
  std::vector<GeometryEstimate> out;
  for (auto& [pol, obs] : groups)
    out.push_back(fit_geometry(obs, pol == Polarization::D1 ? templ_d1 : templ_d2, options));
  return out;
}

std::vector<ModeObservation> synthesize_observations(const CavityAssembly& truth, double frequency_min,
                                                     double frequency_max, int max_order, double noise_rms,
                                                     std::uint64_t seed, Polarization polarization) {
  const CounterRng rng(seed);
  const auto lines = predict_mode_frequencies(truth, params_of(truth), frequency_min, frequency_max, max_order);
  std::vector<ModeObservation> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    ModeObservation o;
    o.frequency = lines[i].frequency + noise_rms * rng.normal(i, 0);
    o.transverse_order = lines[i].transverse_order;
    o.polarization = polarization;
    out.push_back(o);
  }
  return out;
}

} // namespace hybridcav
