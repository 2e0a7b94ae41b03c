#include "hybridcav/emission.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "hybridcav/quadrature.hpp"
#include "hybridcav/units.hpp"

namespace hybridcav {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

void require_finite(std::span<const double> v, const char* who, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(who) + ": non-finite " + what);
}

// Unnormalised decay integral at one time.
double decay_integral(const PurcellModel& m, double n_cav, double tau, double t, double lower) {
  const auto f = [&](double p) {
    return density_analytic(p, m.p_max) * collection_probability(p) * excitation_probability(p, m, n_cav, tau) *
           std::exp(-(p + 1.0) * t / m.free_space_lifetime);
  };
  return integrate(f, lower, m.p_max, 1e-9).value;
}

std::string waiting_label(double tw) {
  std::ostringstream os;
  os << "A[Tw=" << tw / us << "us]";
  return os.str();
}

} // namespace

void DecayTrace::validate() const {
  if (time.size() != signal.size()) throw std::invalid_argument("decay trace: time and signal differ in length");
  if (time.size() < 2) throw std::invalid_argument("decay trace: need at least two samples");
  require_finite(time, "decay trace", "time");
  require_finite(signal, "decay trace", "signal");
  for (std::size_t i = 1; i < time.size(); ++i)
    if (!(time[i] > time[i - 1])) throw std::invalid_argument("decay trace: times must be strictly increasing");
  for (double y : signal)
    if (y < 0.0) throw std::invalid_argument("decay trace: negative signal");
}

DecayTrace fluorescence_decay(const PurcellModel& model, double n_cav, double tau, std::span<const double> t_grid,
                              double derating, double lower_bound) {
  if (t_grid.empty()) throw std::invalid_argument("fluorescence_decay: empty time grid");
  require_finite(t_grid, "fluorescence_decay", "time");
  const PurcellModel m = derated(model, derating);
  if (!(lower_bound > 0.0 && lower_bound < m.p_max))
    throw std::domain_error("fluorescence_decay: lower bound must lie in (0, P_max)");
  const double i0 = decay_integral(m, n_cav, tau, 0.0, lower_bound);
  if (!(i0 > 0.0)) throw std::domain_error("fluorescence_decay: no excitation (n_cav or tau is zero)");
  DecayTrace out;
  out.time.assign(t_grid.begin(), t_grid.end());
  out.signal.reserve(t_grid.size());
  for (double t : t_grid) out.signal.push_back(decay_integral(m, n_cav, tau, t, lower_bound) / i0);
  out.pulse_duration = tau;
  return out;
}

std::vector<double> linear_grid(double t_max, std::size_t n) {
  if (n < 2 || !(t_max > 0.0)) throw std::invalid_argument("linear_grid: need n >= 2 and t_max > 0");
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = t_max * static_cast<double>(i) / static_cast<double>(n - 1);
  return t;
}

FitResult fit_decay_constants(const DecayTrace& trace, DecayWeighting weighting) {
  trace.validate();
  std::vector<double> w;
  if (weighting == DecayWeighting::poisson) {
    const double peak = *std::max_element(trace.signal.begin(), trace.signal.end());
    const double floor = std::max(1e-3 * peak, std::numeric_limits<double>::min());
    w.reserve(trace.signal.size());
    for (double y : trace.signal) w.push_back(1.0 / std::max(y, floor));
  }
  return fit_biexponential(trace.time, trace.signal, w);
}

DetuningFit fit_detuning_from_trace(const DecayTrace& trace, const PurcellModel& model, double n_cav, double tau,
                                    double lower_bound) {
  trace.validate();
  const double fwhm = 2.0 * model.kappa;
  DetuningFit fit;

  struct Eval {
    double ssr, amplitude;
  };
  const auto evaluate = [&](double dnu) {
    ++fit.evaluations;
    const DecayTrace m = fluorescence_decay(model, n_cav, tau, trace.time, vibration_derating(dnu, fwhm), lower_bound);
    double sy = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < m.signal.size(); ++i) {
      sy += trace.signal[i] * m.signal[i];
      ss += m.signal[i] * m.signal[i];
    }
    const double a = sy / ss;
    double ssr = 0.0;
    for (std::size_t i = 0; i < m.signal.size(); ++i) {
      const double r = trace.signal[i] - a * m.signal[i];
      ssr += r * r;
    }
    return Eval{ssr, a};
  };

  // beyond this detuning the derated P_max falls below the lower cut and the model is empty
  const double reachable = 0.5 * fwhm * std::sqrt(model.p_max / lower_bound - 1.0);
  const double lo = 0.0, hi = std::min(5.0 * fwhm, (1.0 - 1e-6) * reachable);
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  Eval fc = evaluate(c), fd = evaluate(d);
  const Eval f_lo = evaluate(lo), f_hi = evaluate(hi);
  while (b - a > 1e-5 * fwhm) {
    if (fc.ssr <= fd.ssr) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = evaluate(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = evaluate(d);
    }
  }
  double best = 0.5 * (a + b);
  Eval fb = evaluate(best);
  // the interval ends are candidates too; golden section never lands exactly on them
  if (f_lo.ssr <= fb.ssr) {
    best = lo;
    fb = f_lo;
  }
  if (f_hi.ssr < fb.ssr) {
    best = hi;
    fb = f_hi;
  }
  fit.delta_nu_rms = best;
  fit.amplitude = fb.amplitude;
  fit.derating = vibration_derating(best, fwhm);
  fit.objective = fb.ssr;
  fit.residual_rms = std::sqrt(fb.ssr / static_cast<double>(trace.time.size()));
  fit.at_lower_bound = best <= lo + 1e-4 * fwhm;
  fit.at_upper_bound = best >= hi - 1e-4 * fwhm;

  const double spread = std::max({f_lo.ssr, f_hi.ssr, fc.ssr, fd.ssr}) - fb.ssr;
  const double scale = std::max(fb.ssr, 1e-300);
  double signal_power = 0.0;
  for (double y : trace.signal) signal_power += y * y;
  if (spread <= 1e-9 * std::max(scale, 1e-12 * signal_power)) {
    fit.flat_objective = true;
    fit.message = "objective is flat in the detuning; the trace does not constrain it";
  } else if (fit.at_upper_bound) {
    fit.message = "detuning at the upper search bound";
  }
  return fit;
}

// ---------------------------------------------------------------------------

void DiffusionParams::validate() const {
  if (!(T2 > 0.0)) throw std::invalid_argument("diffusion params: T2 must be > 0");
  if (!(T1 > 0.0)) throw std::invalid_argument("diffusion params: T1 must be > 0");
  if (!(gamma_sd >= 0.0)) throw std::invalid_argument("diffusion params: gamma_sd must be >= 0");
  if (!(rate >= 0.0)) throw std::invalid_argument("diffusion params: rate must be >= 0");
}

double two_pulse_echo(double t, double A0, double T2) {
  if (!(T2 > 0.0)) throw std::invalid_argument("two_pulse_echo: T2 must be > 0");
  return A0 * std::exp(-2.0 * t / T2);
}

double effective_linewidth(double t, double T_w, const DiffusionParams& p) {
  return 1.0 / (pi * p.T2) + 0.5 * p.gamma_sd * (0.5 * p.rate * t - std::expm1(-p.rate * T_w));
}

double three_pulse_echo(double t, double T_w, double A0, const DiffusionParams& p) {
  p.validate();
  const double waiting = std::isinf(p.T1) ? 1.0 : std::exp(-2.0 * T_w / p.T1);
  // 2 pi t Gamma_eff expanded so that the diffusion-free case is bitwise the two-pulse form
  const double diffusion = pi * t * p.gamma_sd * (0.5 * p.rate * t - std::expm1(-p.rate * T_w));
  return A0 * waiting * std::exp(-2.0 * t / p.T2 - diffusion);
}

std::string to_string(EchoModel m) {
  switch (m) {
    case EchoModel::two_pulse: return "two_pulse";
    case EchoModel::three_pulse_fixed_Tw: return "three_pulse_fixed_Tw";
    case EchoModel::joint_diffusion: return "joint_diffusion";
  }
  return "?";
}

EchoModel echo_model_from_string(const std::string& s) {
  if (s == "two_pulse") return EchoModel::two_pulse;
  if (s == "three_pulse_fixed_Tw") return EchoModel::three_pulse_fixed_Tw;
  if (s == "joint_diffusion") return EchoModel::joint_diffusion;
  throw std::invalid_argument("unknown echo model '" + s + "' (two_pulse, three_pulse_fixed_Tw, joint_diffusion)");
}

namespace {

void validate_series(const std::vector<EchoPoint>& series) {
  for (const EchoPoint& p : series) {
    if (!std::isfinite(p.t) || !std::isfinite(p.T_w) || !std::isfinite(p.area))
      throw std::invalid_argument("echo series: non-finite value");
    if (p.t < 0.0 || p.T_w < 0.0) throw std::invalid_argument("echo series: negative time");
    if (!(p.area > 0.0)) throw std::invalid_argument("echo series: areas must be > 0 for a log-domain fit");
  }
}

FitResult fit_log_linear(const std::vector<EchoPoint>& series) {
  std::vector<double> t, ly;
  for (const EchoPoint& p : series) {
    t.push_back(p.t);
    ly.push_back(std::log(p.area));
  }
  return fit_linear(t, ly);
}

FitResult fit_two_pulse(const std::vector<EchoPoint>& series) {
  const FitResult lin = fit_log_linear(series);
  const double s = lin.value("slope"), b = lin.value("intercept");
  if (!(s < 0.0)) throw std::domain_error("two-pulse echo: areas do not decay with t");
  FitResult f;
  f.model_id = ModelId::two_pulse_echo;
  f.names = {"A0", "T2"};
  f.parameters.resize(2);
  f.parameters << std::exp(b), -2.0 / s;
  // d(A0)/db = A0, d(T2)/ds = 2 / s^2
  Eigen::Matrix2d jac = Eigen::Matrix2d::Zero();
  const int is = lin.index_of("slope"), ib = lin.index_of("intercept");
  Eigen::Matrix2d cov_lin;
  cov_lin << lin.covariance(ib, ib), lin.covariance(ib, is), lin.covariance(is, ib), lin.covariance(is, is);
  jac(0, 0) = std::exp(b);
  jac(1, 1) = 2.0 / (s * s);
  f.covariance = jac * cov_lin * jac.transpose();
  f.uncertainties = f.covariance.diagonal().cwiseSqrt();
  f.residual_rms = lin.residual_rms;
  f.converged = true;
  f.boundary_flags.assign(2, false);
  return f;
}

FitResult fit_three_fixed(const std::vector<EchoPoint>& series) {
  const double tw = series.front().T_w;
  for (const EchoPoint& p : series)
    if (p.T_w != tw)
      throw std::invalid_argument("three_pulse_fixed_Tw: points span several waiting times; split them or use joint_diffusion");
  const FitResult lin = fit_log_linear(series);
  const double s = lin.value("slope"), b = lin.value("intercept");
  if (!(s < 0.0)) throw std::domain_error("three-pulse echo: areas do not decay with t");
  const double g = -s / two_pi;
  FitResult f;
  f.model_id = ModelId::three_pulse_echo;
  f.names = {"A", "gamma_eff", "T2"};
  f.parameters.resize(3);
  f.parameters << std::exp(b), g, 1.0 / (pi * g);
  const int is = lin.index_of("slope"), ib = lin.index_of("intercept");
  Eigen::Matrix2d cov_lin;
  cov_lin << lin.covariance(ib, ib), lin.covariance(ib, is), lin.covariance(is, ib), lin.covariance(is, is);
  Eigen::Matrix<double, 3, 2> jac = Eigen::Matrix<double, 3, 2>::Zero();
  jac(0, 0) = std::exp(b);
  jac(1, 1) = -1.0 / two_pi;
  jac(2, 1) = 2.0 / (s * s);  // T2 = -2 / s
  f.covariance = jac * cov_lin * jac.transpose();
  f.uncertainties = f.covariance.diagonal().cwiseSqrt();
  f.residual_rms = lin.residual_rms;
  f.converged = true;
  f.boundary_flags.assign(3, false);
  return f;
}

FitResult fit_joint(const std::vector<EchoPoint>& series) {
  std::map<double, std::vector<const EchoPoint*>> groups;
  for (const EchoPoint& p : series) groups[p.T_w].push_back(&p);
  const int k = static_cast<int>(groups.size());
  if (k < 2) throw std::invalid_argument("joint_diffusion: need at least two waiting times");
  const Eigen::Index np = 3 + k;
  if (static_cast<Eigen::Index>(series.size()) <= np)
    throw std::invalid_argument("joint_diffusion: need more points than parameters");

  std::vector<double> waits;
  std::vector<int> group_of(series.size());
  {
    int g = 0;
    for (const auto& [tw, pts] : groups) {
      waits.push_back(tw);
      for (const EchoPoint* p : pts) group_of[static_cast<std::size_t>(p - series.data())] = g;
      ++g;
    }
  }

  // per-group log-linear seeds
  Eigen::VectorXd log_amp(k);
  std::vector<double> widths;
  {
    int g = 0;
    for (const auto& [tw, pts] : groups) {
      std::vector<double> t, ly;
      for (const EchoPoint* p : pts) {
        t.push_back(p->t);
        ly.push_back(std::log(p->area));
      }
      if (t.size() < 4) throw std::invalid_argument("joint_diffusion: need at least four points per waiting time");
      if (*std::max_element(t.begin(), t.end()) > *std::min_element(t.begin(), t.end())) {
        const FitResult lin = fit_linear(t, ly);
        log_amp(g) = lin.value("intercept");
        widths.push_back(std::max(-lin.value("slope") / two_pi, 0.0));
      } else {
        log_amp(g) = ly.front();
        widths.push_back(0.0);
      }
      ++g;
    }
  }
  const double g_min = std::max(widths.front(), 1.0);
  const double g_max = *std::max_element(widths.begin(), widths.end());
  const double t2_0 = 1.0 / (pi * g_min);
  const double sd_0 = std::max(2.0 * (g_max - widths.front()), 1e-3 * g_min);

  const auto residual = [&](const Eigen::VectorXd& x) {
    DiffusionParams p{x(0), inf, x(1), x(2)};
    Eigen::VectorXd r(static_cast<Eigen::Index>(series.size()));
    for (std::size_t i = 0; i < series.size(); ++i) {
      const EchoPoint& e = series[i];
      const double model = x(3 + group_of[i]) - two_pi * e.t * effective_linewidth(e.t, e.T_w, p);
      r(static_cast<Eigen::Index>(i)) = std::log(e.area) - model;
    }
    return r;
  };

  Eigen::VectorXd lower = Eigen::VectorXd::Constant(np, -inf), upper = Eigen::VectorXd::Constant(np, inf);
  lower(0) = 1e-12;
  lower(1) = 0.0;
  lower(2) = 0.0;

  // multi-start over the diffusion rate, which the seeds do not pin down
  std::vector<double> rate_starts = {0.1, 1.0, 10.0, 100.0, 1e3, 1e4};
  for (double tw : waits)
    if (tw > 0.0) rate_starts.push_back(1.0 / tw);
  LeastSquaresResult best;
  best.sum_of_squares = inf;
  for (double r0 : rate_starts) {
    Eigen::VectorXd x0(np);
    x0 << t2_0, sd_0, r0, log_amp;
    LeastSquaresOptions opt;
    opt.max_iterations = 1000;
    opt.scale = Eigen::VectorXd::Ones(np);
    opt.scale(0) = t2_0;
    opt.scale(1) = sd_0;
    opt.scale(2) = r0;
    LeastSquaresResult res = least_squares(residual, x0, lower, upper, opt);
    if (std::isfinite(res.sum_of_squares) && res.sum_of_squares < best.sum_of_squares) best = std::move(res);
  }
  if (!std::isfinite(best.sum_of_squares)) throw std::domain_error("joint_diffusion: fit failed from every start");

  FitResult f;
  f.model_id = ModelId::joint_diffusion;
  f.names = {"T2", "gamma_sd", "rate"};
  for (double tw : waits) f.names.push_back(waiting_label(tw));
  f.parameters = best.x;
  Eigen::VectorXd jac = Eigen::VectorXd::Ones(np);
  for (int g = 0; g < k; ++g) {
    f.parameters(3 + g) = std::exp(best.x(3 + g));
    jac(3 + g) = f.parameters(3 + g);
  }
  f.covariance = jac.asDiagonal() * best.covariance * jac.asDiagonal();
  f.uncertainties = f.covariance.diagonal().cwiseSqrt();
  f.residual_rms = std::sqrt(best.sum_of_squares / static_cast<double>(series.size()));
  f.iterations = best.iterations;
  f.converged = best.converged;
  f.boundary_flags = best.at_bound;
  if (best.at_bound.size() >= 3 && (best.at_bound[1] || best.at_bound[2]))
    f.message = "spectral diffusion parameter at its bound";
  return f;
}

} // namespace

FitResult fit_echo_series(std::vector<EchoPoint> series, EchoModel model) {
  validate_series(series);
  const std::size_t need = 4;
  if (series.size() < need)
    throw std::invalid_argument("echo series: need at least " + std::to_string(need) + " points for " + to_string(model));
  std::sort(series.begin(), series.end(),
            [](const EchoPoint& a, const EchoPoint& b) { return a.T_w != b.T_w ? a.T_w < b.T_w : a.t < b.t; });
  switch (model) {
    case EchoModel::two_pulse: return fit_two_pulse(series);
    case EchoModel::three_pulse_fixed_Tw: return fit_three_fixed(series);
    case EchoModel::joint_diffusion: return fit_joint(series);
  }
  throw std::invalid_argument("fit_echo_series: unknown model");
}

// ---------------------------------------------------------------------------

double saturation_model(double power, double n_sat, double p_sat) {
  if (!(p_sat > 0.0)) throw std::invalid_argument("saturation_model: P_sat must be > 0");
  const double s = power / p_sat;
  return n_sat * s / (1.0 + s);
}

SaturationFit fit_saturation(std::span<const double> power, std::span<const double> counts) {
  const std::size_t n = power.size();
  if (counts.size() != n) throw std::invalid_argument("fit_saturation: power and counts differ in length");
  if (n < 3) throw std::invalid_argument("fit_saturation: need at least three points");
  require_finite(power, "fit_saturation", "power");
  require_finite(counts, "fit_saturation", "count");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return power[a] < power[b]; });
  SaturationFit out;
  for (std::size_t i = 1; i < n; ++i)
    if (counts[order[i]] < counts[order[i - 1]]) out.monotone = false;

  // double-reciprocal seed: 1/N = 1/N_sat + (P_sat / N_sat) / P
  std::vector<double> ix, iy;
  for (std::size_t i = 0; i < n; ++i)
    if (power[i] > 0.0 && counts[i] > 0.0) {
      ix.push_back(1.0 / power[i]);
      iy.push_back(1.0 / counts[i]);
    }
  const double c_max = *std::max_element(counts.begin(), counts.end());
  double n0 = 2.0 * c_max, p0 = power[order[n / 2]];
  if (ix.size() >= 2) {
    const FitResult lin = fit_linear(ix, iy);
    const double a = lin.value("intercept"), b = lin.value("slope");
    if (a > 0.0 && b > 0.0) {
      n0 = 1.0 / a;
      p0 = b / a;
    }
  }
  if (!(p0 > 0.0)) p0 = std::max(power[order[n - 1]], 1e-30);
  if (!(n0 > 0.0)) n0 = 1.0;

  const auto residual = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      r(static_cast<Eigen::Index>(i)) = counts[i] - saturation_model(power[i], x(0), x(1));
    return r;
  };
  Eigen::Vector2d x0(n0, p0), lower(0.0, 1e-12 * p0), upper(inf, inf);
  LeastSquaresOptions opt;
  opt.scale = Eigen::Vector2d(n0, p0);
  const LeastSquaresResult res = least_squares(residual, x0, lower, upper, opt);

  FitResult& f = out.fit;
  f.model_id = ModelId::saturation;
  f.names = {"n_sat", "p_sat"};
  f.parameters = res.x;
  f.covariance = res.covariance;
  f.uncertainties = res.covariance.diagonal().cwiseSqrt();
  f.residual_rms = std::sqrt(res.sum_of_squares / static_cast<double>(n));
  f.iterations = res.iterations;
  f.converged = res.converged;
  f.boundary_flags = res.at_bound;
  if (!out.monotone) f.message = "counts are not monotone in power";
  out.knee = 0.5 * res.x(0);
  return out;
}

SaturationCurve saturation_curve(std::span<const double> power_grid, const PurcellModel& model, double tau,
                                 double calibration, double coupled_dopants, double lower_bound) {
  if (power_grid.size() < 3) throw std::invalid_argument("saturation_curve: need at least three powers");
  if (!(calibration > 0.0)) throw std::invalid_argument("saturation_curve: calibration must be > 0");
  if (!(coupled_dopants > 0.0)) throw std::invalid_argument("saturation_curve: dopant count must be > 0");
  SaturationCurve out;
  out.power.assign(power_grid.begin(), power_grid.end());
  const auto density = [&](double p) { return density_analytic(p, model.p_max); };
  for (double pw : power_grid) {
    if (!(pw >= 0.0)) throw std::invalid_argument("saturation_curve: powers must be >= 0");
    const double n_cav = calibration * pw;
    const double pex = weighted_mean([&](double p) { return excitation_probability(p, model, n_cav, tau); }, density,
                                     lower_bound, model.p_max);
    out.excited.push_back(coupled_dopants * pex);
  }
  out.fit = fit_saturation(out.power, out.excited);
  return out;
}

double average_rabi(const PurcellModel& model, double n_cav, double lower_bound, RabiWeighting weighting,
                    double tau) {
  if (!(n_cav >= 0.0)) throw std::invalid_argument("average_rabi: n_cav must be >= 0");
  if (!(lower_bound > 0.0 && lower_bound < model.p_max))
    throw std::domain_error("average_rabi: lower bound must lie in (0, P_max)");
  const auto rabi = [&](double p) { return std::sqrt(n_cav * p * model.kappa * model.gamma); };
  if (weighting == RabiWeighting::density)
    return weighted_mean(rabi, [&](double p) { return density_analytic(p, model.p_max); }, lower_bound, model.p_max);
  if (!(tau > 0.0)) throw std::invalid_argument("average_rabi: effective weighting needs tau > 0");
  return weighted_mean(
      rabi,
      [&](double p) {
        return density_analytic(p, model.p_max) * collection_probability(p) *
               excitation_probability(p, model, n_cav, tau);
      },
      lower_bound, model.p_max);
}

double boltzmann_fraction(double splitting_energy, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("boltzmann_fraction: temperature must be > 0");
  return 1.0 / (1.0 + std::exp(-splitting_energy / (boltzmann_constant * temperature)));
}

double detection_volume(double waist, double crystal_thickness, double detection_fraction) {
  if (!(waist > 0.0 && crystal_thickness > 0.0)) throw std::invalid_argument("detection_volume: sizes must be > 0");
  if (!(detection_fraction > 0.0 && detection_fraction <= 1.0))
    throw std::invalid_argument("detection_volume: detection fraction must lie in (0, 1]");
  return 0.5 * pi * waist * waist * crystal_thickness / detection_fraction;
}

ConcentrationEstimate estimate_concentration(double peak_spectral_density, double inhomogeneous_fwhm,
                                             double boltzmann, int magnetic_classes, double volume,
                                             double site_density) {
  if (!(peak_spectral_density >= 0.0)) throw std::invalid_argument("estimate_concentration: peak must be >= 0");
  if (!(inhomogeneous_fwhm > 0.0)) throw std::invalid_argument("estimate_concentration: FWHM must be > 0");
  if (!(boltzmann > 0.0 && boltzmann <= 1.0))
    throw std::invalid_argument("estimate_concentration: Boltzmann fraction must lie in (0, 1]");
  if (magnetic_classes < 1) throw std::invalid_argument("estimate_concentration: need at least one class");
  if (!(volume > 0.0)) throw std::invalid_argument("estimate_concentration: volume must be > 0");
  ConcentrationEstimate e;
  e.dopant_count = peak_spectral_density * 0.5 * pi * inhomogeneous_fwhm * magnetic_classes / boltzmann;
  e.number_density = e.dopant_count / volume;
  e.concentration_ppm = concentration_ppm(e.number_density, site_density);
  return e;
}

double concentration_ppm(double number_density, double site_density) {
  if (!(site_density > 0.0)) throw std::invalid_argument("concentration_ppm: site density must be > 0");
  return number_density / site_density * 1e6;
}

} // namespace hybridcav
