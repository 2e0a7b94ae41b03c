#include "hybridcav/regression.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "hybridcav/emission.hpp"
#include "hybridcav/mode_geometry.hpp"
#include "hybridcav/random.hpp"
#include "hybridcav/units.hpp"

namespace hybridcav {

namespace {

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

bool within(double x, double target, double tol) { return std::abs(x - target) <= tol; }

// Time at which the normalised decay has fallen by the given number of decades.
double decades_time(const PurcellModel& m, double n_cav, double tau, double decades, double lower) {
  const double level = std::pow(10.0, -decades);
  const auto at = [&](double t) {
    const double g[] = {t};
    return fluorescence_decay(m, n_cav, tau, g, 1.0, lower).signal[0];
  };
  double lo = 0.0, hi = m.free_space_lifetime;
  while (at(hi) > level) hi *= 2.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (at(mid) > level ? lo : hi) = mid;
  }
  return hi;
}

CheckResult check_finesse(const WorkbenchConfig& cfg) {
  CheckResult c{1, "finesse_budget", false, "", "1.15e5 .. 1.25e5", ""};
  const CavityAssembly& a = cfg.assembly;
  const double tc = a.curved_mirror.perfect ? 0.0 : stack_response(a.curved_mirror, cfg.wavelength).transmittance;
  const double tf = a.flat_mirror.perfect ? 0.0 : stack_response(a.flat_mirror, cfg.wavelength).transmittance;
  const double total = tc + tf + a.scatter_absorb_loss;
  const double finesse = two_pi / total;
  c.measured = fmt("F = %.4g", finesse);
  c.detail = fmt("T_curved %.3g ppm, T_flat %.3g ppm, L %.3g ppm", tc / ppm, tf / ppm, a.scatter_absorb_loss / ppm);
  c.passed = finesse >= 1.15e5 && finesse <= 1.25e5;
  return c;
}

CheckResult check_linewidth(const WorkbenchConfig& cfg) {
  CheckResult c{2, "linewidth", false, "", "22 +/- 3 MHz", ""};
  const double span = 12e-9;
  const auto res = find_resonances(cfg.assembly, cfg.wavelength - span, cfg.wavelength + span);
  if (res.empty()) {
    c.measured = "no resonance";
    return c;
  }
  const Resonance* best = &res.front();
  for (const auto& r : res)
    if (std::abs(r.wavelength() - cfg.wavelength) < std::abs(best->wavelength() - cfg.wavelength)) best = &r;
  c.measured = fmt("FWHM = %.3f MHz", best->fwhm_linewidth / MHz);
  c.detail = fmt("at %.4f nm, outcoupling %.3f", best->wavelength() / nm, best->outcoupling_efficiency);
  c.passed = within(best->fwhm_linewidth, 22.0 * MHz, 3.0 * MHz);
  return c;
}

CheckResult check_geometry(const WorkbenchConfig& cfg, const RegressionOptions& opt) {
  CheckResult c{3, "geometry_round_trip", false, "", ">= 90% within (0.1, 0.2, 3) um", ""};
  const CavityAssembly& truth = cfg.assembly;
  // start the search from a deliberately displaced template
  GeometryParams tp = params_of(truth);
  tp.t_c += 0.13 * um;
  tp.t_a -= 0.17 * um;
  tp.R -= 3.7 * um;
  const CavityAssembly templ = tp.apply(truth);
  const GeometryFitOptions fo = GeometryFitOptions::around(templ);
  const double f_lo = frequency_of(1630e-9), f_hi = frequency_of(1520e-9);
  int good = 0;
  for (int trial = 0; trial < opt.geometry_trials; ++trial) {
    const auto obs = synthesize_observations(truth, f_lo, f_hi, 2, 50.0 * MHz, opt.seed * 7919 + trial);
    try {
      const GeometryEstimate e = fit_geometry(obs, templ, fo);
      if (within(e.params.t_c, truth.crystal.thickness, 0.1 * um) && within(e.params.t_a, truth.air_gap, 0.2 * um) &&
          within(e.params.R, truth.radius_of_curvature, 3.0 * um))
        ++good;
    } catch (const std::exception&) {
    }
  }
  const double share = opt.geometry_trials > 0 ? static_cast<double>(good) / opt.geometry_trials : 0.0;
  c.measured = fmt("%.0f / %.0f trials", good, opt.geometry_trials);
  c.passed = opt.geometry_trials > 0 && share >= 0.9;
  return c;
}

CheckResult check_waist(const WorkbenchConfig& cfg) {
  CheckResult c{4, "waist", false, "", "5.7 um +/- 10%", ""};
  try {
    const double w = waist(cfg.assembly, cfg.wavelength);
    c.measured = fmt("w0 = %.3f um", w / um);
    c.passed = within(w, 5.7 * um, 0.57 * um);
  } catch (const std::exception& e) {
    c.measured = "unstable";
    c.detail = e.what();
  }
  return c;
}

CheckResult check_purcell(const WorkbenchConfig& cfg) {
  CheckResult c{5, "purcell_chain", false, "", "P_TL 530 +/- 15%, P_max+1 = 59 +/- 2, g_max = 67 +/- 3 kHz", ""};
  const PurcellModel& m = cfg.purcell;
  bool ptl_ok = true;
  for (double n : {1.78, m.crystal_index, 1.85}) {
    const double p = purcell_two_level(m.wavelength, m.quality_factor, n, m.mode_volume);
    ptl_ok = ptl_ok && within(p, 530.0, 0.15 * 530.0);
  }
  c.measured = fmt("P_TL %.1f, P_max+1 %.2f, g_max %.2f kHz", m.p_tl, m.p_max + 1.0, m.g_max / kHz);
  c.detail = ptl_ok ? "P_TL within band for n in {1.78, config, 1.85}" : "P_TL outside band for some n in [1.78, 1.85]";
  c.passed = ptl_ok && within(m.p_max + 1.0, 59.0, 2.0) && within(m.g_max, 67.0 * kHz, 3.0 * kHz);
  return c;
}

CheckResult check_distribution(const WorkbenchConfig& cfg, const RegressionOptions& opt) {
  CheckResult c{6, "purcell_distribution", false, "", ">= 95% of 100 bins within 3 sigma; P_avg = 17 +/- 3", ""};
  const PurcellModel& m = cfg.purcell;
  const DynamicsSettings& d = cfg.dynamics;
  const int bins = 100;
  const auto hist = density_histogram(m.p_max, d.lower_bound, bins);
  const SampleSet set = sample_dopants(m, opt.monte_carlo_samples, 4.0, opt.seed);
  std::vector<double> counts(bins, 0.0);
  double n_in = 0.0;
  const double width = (m.p_max - d.lower_bound) / bins;
  for (const auto& s : set.samples) {
    if (s.purcell < d.lower_bound) continue;
    const int b = std::min(bins - 1, static_cast<int>((s.purcell - d.lower_bound) / width));
    counts[static_cast<std::size_t>(b)] += 1.0;
    n_in += 1.0;
  }
  int inside = 0;
  for (int b = 0; b < bins; ++b) {
    const double p = hist[static_cast<std::size_t>(b)].probability;
    const double sigma = std::sqrt(n_in * p * (1.0 - p));
    if (std::abs(counts[static_cast<std::size_t>(b)] - n_in * p) <= 3.0 * sigma) ++inside;
  }
  const double p_avg = effective_average_purcell(m, d.n_cav, d.pulse_duration, d.lower_bound);
  c.measured = fmt("%.0f/100 bins, P_avg %.2f", inside, p_avg);
  c.detail = fmt("%.0f of %.0f samples above the lower bound", n_in, static_cast<double>(set.samples.size()));
  c.passed = inside >= 95 && within(p_avg, 17.0, 3.0);
  return c;
}

CheckResult check_fluorescence(const WorkbenchConfig& cfg) {
  CheckResult c{7, "fluorescence", false, "", "fast 0.19 ms +/- 20%, biexp rms < 2%, constants vary < 10% over n_cav", ""};
  const PurcellModel& m = cfg.purcell;
  const DynamicsSettings& d = cfg.dynamics;
  const auto fit_at = [&](double n_cav) {
    const double t3 = decades_time(m, n_cav, d.pulse_duration, 3.0, d.lower_bound);
    const DecayTrace tr = fluorescence_decay(m, n_cav, d.pulse_duration, linear_grid(t3, 300), 1.0, d.lower_bound);
    return fit_decay_constants(tr);
  };
  const FitResult ref = fit_at(d.n_cav);
  const double fast = 1.0 / ref.value("r1"), slow = 1.0 / ref.value("r2");
  double spread = 0.0;
  for (double n : {0.5, 5.0, 50.0, 500.0}) {
    const FitResult f = fit_at(n);
    spread = std::max({spread, std::abs(1.0 / f.value("r1") / fast - 1.0), std::abs(1.0 / f.value("r2") / slow - 1.0)});
  }
  c.measured = fmt("fast %.3f ms, slow %.3f ms, rms %.2g", fast / ms, slow / ms, ref.residual_rms);
  c.detail = fmt("max change of the constants over n_cav in [0.5, 500]: %.1f%%", 100.0 * spread);
  c.passed = within(fast, 0.19 * ms, 0.2 * 0.19 * ms) && ref.residual_rms < 0.02 && spread < 0.10;
  return c;
}

CheckResult check_detuning(const WorkbenchConfig& cfg, const RegressionOptions& opt) {
  CheckResult c{8, "detuning_inference", false, "", "within 2 MHz at 0, 4, 8, 12 MHz", ""};
  const PurcellModel& m = cfg.purcell;
  const DynamicsSettings& d = cfg.dynamics;
  const double fwhm = 2.0 * m.kappa;
  const double t3 = decades_time(m, d.n_cav, d.pulse_duration, 3.0, d.lower_bound);
  const auto grid = linear_grid(t3, 200);
  const CounterRng rng(opt.seed + 17);
  bool ok = true;
  std::string got;
  std::uint64_t idx = 0;
  for (double dnu : {0.0, 4.0 * MHz, 8.0 * MHz, 12.0 * MHz}) {
    DecayTrace tr = fluorescence_decay(m, d.n_cav, d.pulse_duration, grid, vibration_derating(dnu, fwhm), d.lower_bound);
    for (double& y : tr.signal) y = std::max(0.0, y * (1.0 + 0.01 * rng.normal(idx++, 0)));
    const DetuningFit f = fit_detuning_from_trace(tr, m, d.n_cav, d.pulse_duration, d.lower_bound);
    ok = ok && within(f.delta_nu_rms, dnu, 2.0 * MHz);
    got += (got.empty() ? "" : ", ") + fmt("%.2f", f.delta_nu_rms / MHz);
  }
  c.measured = got + " MHz";
  c.passed = ok;
  return c;
}

CheckResult check_echo(const RegressionOptions& opt) {
  CheckResult c{9, "echo_suite", false, "", "T2 within 0.01 ms; three-pulse constant T_w-independent to 1e-10", ""};
  const CounterRng rng(opt.seed + 29);
  bool ok = true;
  std::string got;
  std::uint64_t idx = 0;
  for (double t2 : {0.14 * ms, 0.54 * ms}) {
    std::vector<EchoPoint> s;
    for (int i = 1; i <= 20; ++i) {
      const double t = 1.5 * t2 * i / 20.0;
      s.push_back({t, 0.0, two_pulse_echo(t, 1.0, t2) * (1.0 + 0.05 * rng.normal(idx++, 0))});
    }
    const FitResult f = fit_echo_series(s, EchoModel::two_pulse);
    ok = ok && within(f.value("T2"), t2, 0.01 * ms);
    got += (got.empty() ? "" : ", ") + fmt("%.4f", f.value("T2") / ms);
  }
  DiffusionParams p{0.54 * ms, 1.0 * ms, 0.0, 0.0};
  double worst = 0.0;
  for (double tw : {4.0 * us, 128.0 * us}) {
    std::vector<EchoPoint> s;
    for (int i = 1; i <= 12; ++i) {
      const double t = 1e-3 * i / 12.0;
      s.push_back({t, tw, three_pulse_echo(t, tw, 1.0, p)});
    }
    const FitResult f = fit_echo_series(s, EchoModel::three_pulse_fixed_Tw);
    worst = std::max(worst, std::abs(f.value("T2") / p.T2 - 1.0));
  }
  c.measured = "T2 " + got + " ms";
  c.detail = fmt("three-pulse T2 relative deviation %.2g", worst);
  c.passed = ok && worst < 1e-10;
  return c;
}

CheckResult check_concentration(const WorkbenchConfig& cfg) {
  CheckResult c{10, "concentration", false, "", "1e7 dopants and 0.28 ppm within x2; 5.2e15/1.8e22 -> 0.289 +/- 0.001 ppm", ""};
  const DynamicsSettings& d = cfg.dynamics;
  const double b = boltzmann_fraction(planck_constant * d.zeeman_splitting, d.temperature);
  const double vol = detection_volume(cfg.purcell.waist, cfg.assembly.crystal.thickness, d.detection_fraction);
  const ConcentrationEstimate e = estimate_concentration(d.peak_spectral_density, d.inhomogeneous_fwhm, b,
                                                         d.magnetic_classes, vol, d.site_density);
  const double sub = concentration_ppm(5.2e15 * 1e6, 1.8e22 * 1e6);
  c.measured = fmt("%.3g dopants, %.3g ppm, sub-step %.4f ppm", e.dopant_count, e.concentration_ppm, sub);
  c.detail = fmt("Boltzmann %.3f, detection volume %.0f um^3", b, vol / 1e-18);
  const auto factor2 = [](double x, double ref) { return x >= 0.5 * ref && x <= 2.0 * ref; };
  c.passed = factor2(e.dopant_count, 1e7) && factor2(e.concentration_ppm, 0.28) && within(sub, 0.289, 0.001);
  return c;
}

CheckResult check_rabi(const WorkbenchConfig& cfg) {
  CheckResult c{11, "average_rabi", false, "", "180 kHz +/- 20%", ""};
  const DynamicsSettings& d = cfg.dynamics;
  const double omega = average_rabi(cfg.purcell, d.n_cav, d.lower_bound, d.rabi_weighting, d.pulse_duration);
  c.measured = fmt("%.1f kHz", omega / kHz);
  c.detail = d.rabi_weighting == RabiWeighting::density ? "density weighting" : "effective weighting";
  c.passed = within(omega, 180.0 * kHz, 36.0 * kHz);
  return c;
}

} // namespace

std::vector<CheckResult> run_regression(const WorkbenchConfig& config, const RegressionOptions& options) {
  std::vector<std::function<CheckResult()>> checks = {
      [&] { return check_finesse(config); },
      [&] { return check_linewidth(config); },
      [&] { return check_geometry(config, options); },
      [&] { return check_waist(config); },
      [&] { return check_purcell(config); },
      [&] { return check_distribution(config, options); },
      [&] { return check_fluorescence(config); },
      [&] { return check_detuning(config, options); },
      [&] { return check_echo(options); },
      [&] { return check_concentration(config); },
      [&] { return check_rabi(config); },
  };
  std::vector<CheckResult> out;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    try {
      out.push_back(checks[i]());
    } catch (const std::exception& e) {
      CheckResult c;
      c.id = static_cast<int>(i) + 1;
      c.name = "check_" + std::to_string(c.id);
      c.measured = "error";
      c.detail = e.what();
      out.push_back(c);
    }
  }
  return out;
}

int regression_exit_code(const std::vector<CheckResult>& results) {
  const auto failed = std::count_if(results.begin(), results.end(), [](const CheckResult& c) { return !c.passed; });
  if (failed == 0) return 0;
  return static_cast<int>(std::min<long>(10 + failed, 125));
}

} // namespace hybridcav
