// hybridcav: command-line front end for the hybrid-cavity workbench.
//
// Exit codes: 0 success, 1 usage, 2 input schema, 3 numerical failure,
// 10 + n for n failed regression checks (capped at 125).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "hybridcav/config.hpp"
#include "hybridcav/csv.hpp"
#include "hybridcav/emission.hpp"
#include "hybridcav/mode_geometry.hpp"
#include "hybridcav/quadrature.hpp"
#include "hybridcav/regression.hpp"
#include "hybridcav/units.hpp"

using namespace hybridcav;

namespace {

enum Exit { ok = 0, usage = 1, schema = 2, numerical = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string config_path(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("HYBRIDCAV_CONFIG")) return env;
  return "hybridcav.json";
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

std::string num(double v, int digits = 8) { return format_number(v, digits); }

// key = value lines: readable as a report and trivially machine-parsed
void kv(std::ostream& os, const std::string& key, double value, const std::string& unit = "", int digits = 8) {
  os << key << " = " << num(value, digits);
  if (!unit.empty()) os << ' ' << unit;
  os << '\n';
}

void kv(std::ostream& os, const std::string& key, const std::string& value) { os << key << " = " << value << '\n'; }

std::string resolve_output(const WorkbenchConfig& cfg, const std::string& flag, const std::string& fallback) {
  if (flag == "-") return flag;
  std::filesystem::path p(flag.empty() ? fallback : flag);
  if (p.is_relative() && flag.empty()) p = std::filesystem::path(cfg.paths.output_dir) / p;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  return p.string();
}

void emit_csv(const std::string& target, const std::vector<std::string>& header,
              const std::vector<std::vector<double>>& columns, int digits = 10) {
  if (target == "-") {
    write_csv(std::cout, header, columns, digits);
    return;
  }
  write_csv(target, header, columns, digits);
  std::cerr << "wrote " << target << '\n';
}

std::string input_or(const std::string& positional, const std::string& from_config, const char* what) {
  if (!positional.empty()) return positional;
  if (!from_config.empty()) return from_config;
  throw UsageError(std::string("no ") + what + " given (argument or paths section of the config)");
}

void print_fit(std::ostream& os, const FitResult& f, const std::string& prefix,
               const std::map<std::string, std::pair<double, std::string>>& units) {
  for (std::size_t i = 0; i < f.names.size(); ++i) {
    const auto u = units.find(f.names[i]);
    const double scale = u == units.end() ? 1.0 : u->second.first;
    const std::string unit = u == units.end() ? "" : u->second.second;
    os << prefix << f.names[i] << " = " << num(f.parameters[static_cast<Eigen::Index>(i)] / scale) << " +/- "
       << num(f.uncertainties[static_cast<Eigen::Index>(i)] / scale, 3) << (unit.empty() ? "" : " " + unit) << '\n';
  }
  kv(os, prefix + "residual_rms", f.residual_rms);
  kv(os, prefix + "converged", f.converged ? "true" : "false");
  if (f.degenerate) kv(os, prefix + "degenerate", "true");
  if (!f.message.empty()) kv(os, prefix + "message", f.message);
}

// ---------------------------------------------------------------------------

struct SpectrumArgs {
  std::optional<double> wl_min_nm, wl_max_nm;
  double resolution_nm = 1e-4;
  std::string output;
};

int cmd_spectrum(const WorkbenchConfig& cfg, const SpectrumArgs& a) {
  const double lo = a.wl_min_nm ? *a.wl_min_nm * nm : cfg.wavelength - 2.0 * nm;
  const double hi = a.wl_max_nm ? *a.wl_max_nm * nm : cfg.wavelength + 2.0 * nm;
  if (!(hi > lo)) throw UsageError("--wl-max must exceed --wl-min");
  if (!(a.resolution_nm > 0.0)) throw UsageError("--resolution must be > 0");
  const Spectrum s = cavity_spectrum(cfg.assembly, lo, hi, a.resolution_nm * nm);
  if (s.resolution_warning)
    warn("wavelength step is coarser than the expected linewidth (" + num(s.expected_fwhm / MHz, 4) +
         " MHz); peaks may be missed");
  if (s.outside_stopband) warn("range extends outside a mirror stopband (reflectance < 0.9)");
  std::vector<double> wl, r, t;
  for (const auto& p : s.points) {
    wl.push_back(p.wavelength / nm);
    r.push_back(p.reflectance);
    t.push_back(p.transmittance);
  }
  emit_csv(resolve_output(cfg, a.output, "spectrum.csv"), {"wavelength_nm", "reflectance", "transmittance"},
           {wl, r, t}, 12);

  const auto res = find_resonances(cfg.assembly, lo, hi);
  if (res.empty()) warn("no resonances found (perfect mirror or no peak in range)");
  std::cout << "# resonances\n"
            << "wavelength_nm,frequency_THz,fwhm_MHz,finesse,kappa_MHz,kappa_crystal_MHz,kappa_air_MHz,"
               "outcoupling,fsr_THz,peak_transmittance\n";
  for (const auto& x : res)
    std::cout << num(x.wavelength() / nm, 10) << ',' << num(x.center_frequency / 1e12, 10) << ','
              << num(x.fwhm_linewidth / MHz, 6) << ',' << num(x.finesse, 6) << ',' << num(x.kappa_total / MHz, 6)
              << ',' << num(x.kappa_crystal_port / MHz, 6) << ',' << num(x.kappa_air_port / MHz, 6) << ','
              << num(x.outcoupling_efficiency, 6) << ',' << num(x.free_spectral_range / 1e12, 6) << ','
              << num(x.peak_transmittance, 6) << '\n';
  return ok;
}

// ---------------------------------------------------------------------------

struct GeometryArgs {
  std::string modes;
  double ellipticity_mhz = 0.0;
  double tc_window_um = 0.5, ta_window_um = 0.5, r_window_um = 10.0;
  bool fit_phase = false;
  int workers = 1;
};

std::vector<ModeObservation> read_modes(const std::string& path) {
  const CsvTable t = read_csv(path);
  t.require({"frequency_GHz", "transverse_order", "polarization"});
  const auto f = t.numbers("frequency_GHz");
  const auto order = t.integers("transverse_order");
  const auto pol = t.strings("polarization");
  std::optional<std::vector<int>> hint;
  if (t.column("longitudinal_index") >= 0) hint = t.integers("longitudinal_index");
  std::vector<ModeObservation> obs;
  for (std::size_t i = 0; i < f.size(); ++i) {
    ModeObservation o;
    o.frequency = f[i] * GHz;
    o.transverse_order = order[i];
    try {
      o.polarization = polarization_from_string(pol[i]);
    } catch (const std::exception& e) {
      throw SchemaError(path + ":" + std::to_string(t.line_numbers[i]) + ": column 'polarization': " + e.what());
    }
    if (hint) o.longitudinal_index_hint = (*hint)[i];
    obs.push_back(o);
  }
  return obs;
}

void report_geometry(std::ostream& os, const GeometryEstimate& e) {
  const std::string p = "geometry." + to_string(e.polarization) + ".";
  const double scales[5] = {um, um, um, 1.0, 1.0 / nm};
  const char* units[5] = {"um", "um", "um", "rad", "rad/nm"};
  for (int j = 0; j < 5; ++j) {
    const bool fixed = std::find(e.free_parameters.begin(), e.free_parameters.end(), j) == e.free_parameters.end();
    os << p << GeometryParams::names[static_cast<std::size_t>(j)] << " = "
       << num(e.params.vector()[j] / scales[j]) << " +/- " << num(e.uncertainties[j] / scales[j], 3) << ' '
       << units[j] << (fixed ? " (fixed)" : "") << (e.boundary_flags[static_cast<std::size_t>(j)] ? " (at bound)" : "")
       << '\n';
  }
  kv(os, p + "residual_rms", e.residual_rms / MHz, "MHz", 6);
  kv(os, p + "objective", e.objective / (MHz * MHz), "MHz^2", 6);
  kv(os, p + "converged", e.converged ? "true" : "false");
  kv(os, p + "on_boundary", e.on_boundary ? "true" : "false");
  os << "# residuals " << to_string(e.polarization) << '\n'
     << "frequency_GHz,transverse_order,assigned_q,family,predicted_GHz,residual_MHz,duplicate\n";
  for (const auto& r : e.residuals)
    os << num(r.observation.frequency / GHz, 12) << ',' << r.observation.transverse_order << ',' << r.assigned.q << ','
       << r.assigned.family << ',' << num(r.assigned.frequency / GHz, 12) << ',' << num(r.residual / MHz, 6) << ','
       << (r.duplicate ? 1 : 0) << '\n';
}

GeometryFitOptions geometry_options(const CavityAssembly& templ, const GeometryArgs& a) {
  GeometryFitOptions o = GeometryFitOptions::around(templ);
  const GeometryParams p = params_of(templ);
  o.lower[0] = p.t_c - a.tc_window_um * um;
  o.upper[0] = p.t_c + a.tc_window_um * um;
  o.lower[1] = p.t_a - a.ta_window_um * um;
  o.upper[1] = p.t_a + a.ta_window_um * um;
  o.lower[2] = p.R - a.r_window_um * um;
  o.upper[2] = p.R + a.r_window_um * um;
  if (a.fit_phase) {
    o.lower[3] = p.phase_offset - pi;
    o.upper[3] = p.phase_offset + pi;
    o.lower[4] = p.phase_slope - 0.05 / nm;
    o.upper[4] = p.phase_slope + 0.05 / nm;
    o.grid_points[3] = 5;
    o.grid_points[4] = 3;
  }
  o.ellipticity = a.ellipticity_mhz * MHz;
  o.workers = std::max(1, a.workers);
  return o;
}

int cmd_fit_geometry(const WorkbenchConfig& cfg, const GeometryArgs& a) {
  const auto obs = read_modes(input_or(a.modes, cfg.paths.modes, "modes file"));
  const CavityAssembly d2 = cfg.assembly_d2();
  // bounds are set per template, so fit each family with its own options
  std::vector<ModeObservation> o1, o2;
  for (const auto& o : obs) (o.polarization == Polarization::D1 ? o1 : o2).push_back(o);
  if (!o1.empty()) report_geometry(std::cout, fit_geometry(o1, cfg.assembly, geometry_options(cfg.assembly, a)));
  if (!o2.empty()) report_geometry(std::cout, fit_geometry(o2, d2, geometry_options(d2, a)));
  return ok;
}

// ---------------------------------------------------------------------------

struct PurcellArgs {
  bool histogram = false;
  int bins = 100;
  std::size_t samples = 0;
  std::uint64_t seed = 1;
  double radial_cutoff = 4.0;
  std::optional<double> n_cav, tau_us;
  std::string output;
};

int cmd_purcell(const WorkbenchConfig& cfg, const PurcellArgs& a) {
  const PurcellModel& m = cfg.purcell;
  const double n_cav = a.n_cav.value_or(cfg.dynamics.n_cav);
  const double tau = a.tau_us ? *a.tau_us * us : cfg.dynamics.pulse_duration;
  const double lower = cfg.dynamics.lower_bound;
  std::ostream& os = std::cout;
  kv(os, "purcell.p_tl", m.p_tl);
  kv(os, "purcell.p_max", m.p_max);
  kv(os, "purcell.p_max_plus_1", m.p_max + 1.0);
  kv(os, "purcell.g_max", m.g_max / kHz, "kHz");
  kv(os, "purcell.gamma", m.gamma, "Hz");
  kv(os, "purcell.kappa", m.kappa / MHz, "MHz");
  kv(os, "purcell.waist", m.waist / um, "um");
  kv(os, "purcell.mode_volume", m.mode_volume / 1e-18, "um^3");
  kv(os, "purcell.p_avg", effective_average_purcell(m, n_cav, tau, lower));
  kv(os, "purcell.n_cav", n_cav);
  kv(os, "purcell.tau", tau / us, "us");
  if (!a.histogram && a.samples == 0) return ok;

  if (a.bins < 1) throw UsageError("--bins must be >= 1");
  const auto hist = density_histogram(m.p_max, lower, a.bins);
  const double mass = density_mass(lower, m.p_max, m.p_max);
  std::vector<double> centre, density, prob, mc;
  for (const auto& b : hist) {
    const double c = 0.5 * (b.lower + b.upper);
    centre.push_back(c);
    density.push_back(density_analytic(c, m.p_max) / mass);
    prob.push_back(b.probability);
  }
  std::vector<std::string> header = {"purcell", "density", "probability"};
  std::vector<std::vector<double>> cols = {centre, density, prob};
  if (a.samples > 0) {
    const SampleSet set = sample_dopants(m, a.samples, a.radial_cutoff, a.seed, n_cav, tau);
    std::vector<double> counts(hist.size(), 0.0);
    double n_in = 0.0;
    const double width = (m.p_max - lower) / a.bins;
    for (const auto& s : set.samples) {
      if (s.purcell < lower) continue;
      const auto b = std::min<std::size_t>(hist.size() - 1, static_cast<std::size_t>((s.purcell - lower) / width));
      counts[b] += 1.0;
      n_in += 1.0;
    }
    for (double& c : counts) c = n_in > 0.0 ? c / n_in : 0.0;
    header.push_back("mc_probability");
    cols.push_back(counts);
    kv(os, "purcell.mc_samples", static_cast<double>(a.samples));
    kv(os, "purcell.mc_coupled", n_in);
    kv(os, "purcell.mc_seed", static_cast<double>(a.seed), "", 20);
  }
  emit_csv(resolve_output(cfg, a.output, "purcell_density.csv"), header, cols);
  return ok;
}

// ---------------------------------------------------------------------------

struct FluorescenceArgs {
  std::string trace;
  std::optional<double> n_cav, tau_us, t_max_ms;
  int points = 300;
  double derating = 1.0;
  bool poisson = false;
  std::string output;
};

DecayTrace read_trace(const std::string& path) {
  const CsvTable t = read_csv(path);
  t.require({"time_us", "counts"});
  DecayTrace tr;
  tr.time = t.numbers("time_us");
  for (double& x : tr.time) x *= us;
  tr.signal = t.numbers("counts");
  try {
    tr.validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(path + ": " + e.what());
  }
  return tr;
}

int cmd_fluorescence(const WorkbenchConfig& cfg, const FluorescenceArgs& a) {
  const PurcellModel& m = cfg.purcell;
  const double n_cav = a.n_cav.value_or(cfg.dynamics.n_cav);
  const double tau = a.tau_us ? *a.tau_us * us : cfg.dynamics.pulse_duration;
  const double lower = cfg.dynamics.lower_bound;
  const std::string trace_path = a.trace.empty() ? cfg.paths.trace : a.trace;
  std::ostream& os = std::cout;
  if (!trace_path.empty()) {
    const DecayTrace tr = read_trace(trace_path);
    const DetuningFit f = fit_detuning_from_trace(tr, m, n_cav, tau, lower);
    kv(os, "detuning.delta_nu_rms", f.delta_nu_rms / MHz, "MHz", 6);
    kv(os, "detuning.derating", f.derating, "", 6);
    kv(os, "detuning.amplitude", f.amplitude);
    kv(os, "detuning.residual_rms", f.residual_rms);
    kv(os, "detuning.evaluations", f.evaluations);
    kv(os, "detuning.at_lower_bound", f.at_lower_bound ? "true" : "false");
    kv(os, "detuning.at_upper_bound", f.at_upper_bound ? "true" : "false");
    kv(os, "detuning.flat_objective", f.flat_objective ? "true" : "false");
    if (!f.message.empty()) warn(f.message);
    const FitResult b = fit_decay_constants(tr, a.poisson ? DecayWeighting::poisson : DecayWeighting::uniform);
    kv(os, "trace.fast_constant", 1.0 / b.value("r1") / ms, "ms", 6);
    kv(os, "trace.slow_constant", 1.0 / b.value("r2") / ms, "ms", 6);
    return ok;
  }
  double t_max = a.t_max_ms ? *a.t_max_ms * ms : 0.0;
  if (!a.t_max_ms) {
    // default span: until the model has decayed by three decades
    t_max = m.free_space_lifetime / 8.0;
    for (;;) {
      const double g[] = {t_max};
      if (fluorescence_decay(m, n_cav, tau, g, a.derating, lower).signal[0] < 1e-3) break;
      t_max *= 1.25;
    }
  }
  if (a.points < 6) throw UsageError("--points must be >= 6");
  const DecayTrace tr = fluorescence_decay(m, n_cav, tau, linear_grid(t_max, static_cast<std::size_t>(a.points)),
                                           a.derating, lower);
  std::vector<double> t_us;
  for (double t : tr.time) t_us.push_back(t / us);
  emit_csv(resolve_output(cfg, a.output, "fluorescence.csv"), {"time_us", "intensity"}, {t_us, tr.signal});
  const FitResult b = fit_decay_constants(tr, a.poisson ? DecayWeighting::poisson : DecayWeighting::uniform);
  kv(os, "model.n_cav", n_cav);
  kv(os, "model.tau", tau / us, "us");
  kv(os, "model.derating", a.derating);
  kv(os, "model.fast_constant", 1.0 / b.value("r1") / ms, "ms", 6);
  kv(os, "model.slow_constant", 1.0 / b.value("r2") / ms, "ms", 6);
  kv(os, "model.fast_amplitude", b.value("A1"), "", 6);
  kv(os, "model.slow_amplitude", b.value("A2"), "", 6);
  kv(os, "model.biexp_residual_rms", b.residual_rms, "", 4);
  return ok;
}

// ---------------------------------------------------------------------------

struct EchoArgs {
  std::string series;
  std::string model = "two";
};

int cmd_echo(const WorkbenchConfig& cfg, const EchoArgs& a) {
  const std::string path = input_or(a.series, cfg.paths.echoes, "echo series");
  const CsvTable t = read_csv(path);
  t.require({"t_us", "area"});
  const auto tt = t.numbers("t_us");
  const auto area = t.numbers("area");
  std::vector<double> tw(tt.size(), 0.0);
  if (t.column("Tw_us") >= 0) tw = t.numbers("Tw_us");
  else if (a.model != "two") throw SchemaError(path + ": missing column 'Tw_us'");
  std::vector<EchoPoint> pts;
  for (std::size_t i = 0; i < tt.size(); ++i) {
    if (tw[i] < 0.0) throw SchemaError(path + ":" + std::to_string(t.line_numbers[i]) + ": column 'Tw_us': negative");
    if (area[i] < 0.0) throw SchemaError(path + ":" + std::to_string(t.line_numbers[i]) + ": column 'area': negative");
    pts.push_back({tt[i] * us, tw[i] * us, area[i]});
  }
  const std::map<std::string, std::pair<double, std::string>> units = {
      {"T2", {ms, "ms"}}, {"gamma_eff", {kHz, "kHz"}}, {"gamma_sd", {kHz, "kHz"}}, {"rate", {1.0, "Hz"}}};
  std::ostream& os = std::cout;
  if (a.model == "two") {
    if (std::any_of(tw.begin(), tw.end(), [](double w) { return w > 0.0; }))
      warn("series has nonzero waiting times; the two-pulse model ignores them");
    print_fit(os, fit_echo_series(pts, EchoModel::two_pulse), "echo.", units);
  } else if (a.model == "three") {
    std::map<double, std::vector<EchoPoint>> groups;
    for (const auto& p : pts) groups[p.T_w].push_back(p);
    for (const auto& [w, g] : groups)
      print_fit(os, fit_echo_series(g, EchoModel::three_pulse_fixed_Tw), "echo.Tw_" + num(w / us, 6) + "us.", units);
  } else if (a.model == "joint") {
    print_fit(os, fit_echo_series(pts, EchoModel::joint_diffusion), "echo.", units);
  } else {
    throw UsageError("--model must be two, three or joint");
  }
  return ok;
}

// ---------------------------------------------------------------------------

struct SaturationArgs {
  std::string data;
  double p_min_uw = 0.01, p_max_uw = 100.0;
  int points = 25;
  std::optional<double> tau_us;
  std::string output;
};

int cmd_saturation(const WorkbenchConfig& cfg, const SaturationArgs& a) {
  std::ostream& os = std::cout;
  const std::map<std::string, std::pair<double, std::string>> units = {{"p_sat", {1e-6, "uW"}}};
  if (!a.data.empty()) {
    const CsvTable t = read_csv(a.data);
    t.require({"power_uW", "excited"});
    auto p = t.numbers("power_uW");
    for (double& x : p) x *= 1e-6;
    const auto n = t.numbers("excited");
    const SaturationFit f = fit_saturation(p, n);
    if (!f.monotone) warn("excited counts are not monotone in power");
    print_fit(os, f.fit, "saturation.", units);
    kv(os, "saturation.knee", f.knee, "dopants", 6);
    return ok;
  }
  const DynamicsSettings& d = cfg.dynamics;
  if (!(d.saturation_calibration > 0.0) || !(d.coupled_dopants > 0.0))
    throw UsageError("model curve needs dynamics.saturation_calibration_per_W and dynamics.coupled_dopants "
                     "(or pass a data file)");
  if (a.points < 3 || !(a.p_min_uw > 0.0) || !(a.p_max_uw > a.p_min_uw))
    throw UsageError("need --points >= 3 and 0 < --p-min < --p-max");
  std::vector<double> grid;
  for (int i = 0; i < a.points; ++i)
    grid.push_back(a.p_min_uw * 1e-6 * std::pow(a.p_max_uw / a.p_min_uw, static_cast<double>(i) / (a.points - 1)));
  const double tau = a.tau_us ? *a.tau_us * us : d.pulse_duration;
  const SaturationCurve c =
      saturation_curve(grid, cfg.purcell, tau, d.saturation_calibration, d.coupled_dopants, d.lower_bound);
  std::vector<double> p_uw;
  for (double x : c.power) p_uw.push_back(x / 1e-6);
  emit_csv(resolve_output(cfg, a.output, "saturation.csv"), {"power_uW", "excited"}, {p_uw, c.excited});
  print_fit(os, c.fit.fit, "saturation.", units);
  kv(os, "saturation.knee", c.fit.knee, "dopants", 6);
  return ok;
}

// ---------------------------------------------------------------------------

struct ConcentrationArgs {
  std::optional<double> peak_per_khz, fwhm_mhz, detection_fraction;
};

int cmd_concentration(const WorkbenchConfig& cfg, const ConcentrationArgs& a) {
  const DynamicsSettings& d = cfg.dynamics;
  const double peak = a.peak_per_khz ? *a.peak_per_khz / kHz : d.peak_spectral_density;
  const double fwhm = a.fwhm_mhz ? *a.fwhm_mhz * MHz : d.inhomogeneous_fwhm;
  const double frac = a.detection_fraction.value_or(d.detection_fraction);
  const double b = boltzmann_fraction(planck_constant * d.zeeman_splitting, d.temperature);
  const double vol = detection_volume(cfg.purcell.waist, cfg.assembly.crystal.thickness, frac);
  const ConcentrationEstimate e = estimate_concentration(peak, fwhm, b, d.magnetic_classes, vol, d.site_density);
  std::ostream& os = std::cout;
  kv(os, "concentration.boltzmann_fraction", b, "", 6);
  kv(os, "concentration.detection_volume", vol / 1e-18, "um^3", 6);
  kv(os, "concentration.dopant_count", e.dopant_count, "", 6);
  kv(os, "concentration.number_density", e.number_density / 1e6, "cm^-3", 6);
  kv(os, "concentration.ppm", e.concentration_ppm, "ppm", 6);
  kv(os, "concentration.average_rabi",
     average_rabi(cfg.purcell, d.n_cav, d.lower_bound, d.rabi_weighting, d.pulse_duration) / kHz, "kHz", 6);
  return ok;
}

// ---------------------------------------------------------------------------

int cmd_regression(const WorkbenchConfig& cfg, const RegressionOptions& opt) {
  const auto results = run_regression(cfg, opt);
  std::cout << "id,check,result,measured,expected,detail\n";
  for (const auto& r : results)
    std::cout << r.id << ',' << r.name << ',' << (r.passed ? "PASS" : "FAIL") << ",\"" << r.measured << "\",\""
              << r.expected << "\",\"" << r.detail << "\"\n";
  const int code = regression_exit_code(results);
  std::cerr << std::count_if(results.begin(), results.end(), [](const CheckResult& r) { return !r.passed; })
            << " of " << results.size() << " checks failed\n";
  return code;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid crystal-air cavity workbench"};
  app.require_subcommand(1);
  std::string config_flag;
  app.add_option("-c,--config", config_flag, "configuration file (default: $HYBRIDCAV_CONFIG, then hybridcav.json)");

  SpectrumArgs sa;
  auto* spectrum = app.add_subcommand("spectrum", "transmission spectrum CSV and resonance table");
  spectrum->add_option("--wl-min", sa.wl_min_nm, "lower wavelength, nm");
  spectrum->add_option("--wl-max", sa.wl_max_nm, "upper wavelength, nm");
  spectrum->add_option("--resolution", sa.resolution_nm, "wavelength step, nm")->capture_default_str();
  spectrum->add_option("-o,--output", sa.output, "CSV path ('-' for stdout)");

  GeometryArgs ga;
  auto* geometry = app.add_subcommand("fit-geometry", "fit t_c, t_a, R from measured mode frequencies");
  geometry->add_option("modes", ga.modes, "CSV with frequency_GHz,transverse_order,polarization");
  geometry->add_option("--ellipticity", ga.ellipticity_mhz, "transverse splitting, MHz")->capture_default_str();
  geometry->add_option("--tc-window", ga.tc_window_um, "half width of the t_c search, um")->capture_default_str();
  geometry->add_option("--ta-window", ga.ta_window_um, "half width of the t_a search, um")->capture_default_str();
  geometry->add_option("--R-window", ga.r_window_um, "half width of the R search, um")->capture_default_str();
  geometry->add_flag("--fit-phase", ga.fit_phase, "also fit the phase correction (a, b)");
  geometry->add_option("--workers", ga.workers, "threads for the grid stage")->capture_default_str();

  PurcellArgs pa;
  auto* purcell = app.add_subcommand("purcell", "Purcell summary and density CSV");
  purcell->add_flag("--histogram", pa.histogram, "write the analytic density CSV");
  purcell->add_option("--bins", pa.bins, "histogram bins")->capture_default_str();
  purcell->add_option("--samples", pa.samples, "Monte Carlo samples (0: analytic only)")->capture_default_str();
  purcell->add_option("--seed", pa.seed, "Monte Carlo seed")->capture_default_str();
  purcell->add_option("--radial-cutoff", pa.radial_cutoff, "sampling radius in waists")->capture_default_str();
  purcell->add_option("--n-cav", pa.n_cav, "intracavity photon number (overrides config)");
  purcell->add_option("--tau", pa.tau_us, "pulse length, us (overrides config)");
  purcell->add_option("-o,--output", pa.output, "CSV path ('-' for stdout)");

  FluorescenceArgs fa;
  auto* fluorescence = app.add_subcommand("fluorescence", "model decay curve, or detuning fit of a measured trace");
  fluorescence->add_option("trace", fa.trace, "CSV with time_us,counts");
  fluorescence->add_option("--n-cav", fa.n_cav, "intracavity photon number (overrides config)");
  fluorescence->add_option("--tau", fa.tau_us, "pulse length, us (overrides config)");
  fluorescence->add_option("--t-max", fa.t_max_ms, "end of the model curve, ms");
  fluorescence->add_option("--points", fa.points, "model curve points")->capture_default_str();
  fluorescence->add_option("--derating", fa.derating, "P_max derating of the model curve")->capture_default_str();
  fluorescence->add_flag("--poisson", fa.poisson, "Poisson weights in the biexponential fit");
  fluorescence->add_option("-o,--output", fa.output, "CSV path ('-' for stdout)");

  EchoArgs ea;
  auto* echo = app.add_subcommand("echo", "fit photon-echo decays");
  echo->add_option("series", ea.series, "CSV with t_us,Tw_us,area");
  echo->add_option("--model", ea.model, "two, three or joint")
      ->check(CLI::IsMember({"two", "three", "joint"}))
      ->capture_default_str();

  SaturationArgs ta;
  auto* saturation = app.add_subcommand("saturation", "saturation curve model or fit");
  saturation->add_option("data", ta.data, "CSV with power_uW,excited");
  saturation->add_option("--p-min", ta.p_min_uw, "lowest power, uW")->capture_default_str();
  saturation->add_option("--p-max", ta.p_max_uw, "highest power, uW")->capture_default_str();
  saturation->add_option("--points", ta.points, "powers on a log grid")->capture_default_str();
  saturation->add_option("--tau", ta.tau_us, "pulse length, us (overrides config)");
  saturation->add_option("-o,--output", ta.output, "CSV path ('-' for stdout)");

  ConcentrationArgs ca;
  auto* concentration = app.add_subcommand("concentration", "dopant count and concentration estimate");
  concentration->add_option("--peak", ca.peak_per_khz, "peak spectral density, dopants per kHz");
  concentration->add_option("--fwhm", ca.fwhm_mhz, "inhomogeneous FWHM, MHz");
  concentration->add_option("--detection-fraction", ca.detection_fraction, "share of dopants detected");

  RegressionOptions ro;
  auto* regression = app.add_subcommand("regression", "reference-number checks; exit 10 + failures");
  regression->add_option("--trials", ro.geometry_trials, "geometry round-trip trials")->capture_default_str();
  regression->add_option("--samples", ro.monte_carlo_samples, "Monte Carlo samples")->capture_default_str();
  regression->add_option("--seed", ro.seed, "seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return usage;
  }

  try {
    const WorkbenchConfig cfg = load_config(config_path(config_flag));
    if (spectrum->parsed()) return cmd_spectrum(cfg, sa);
    if (geometry->parsed()) return cmd_fit_geometry(cfg, ga);
    if (purcell->parsed()) return cmd_purcell(cfg, pa);
    if (fluorescence->parsed()) return cmd_fluorescence(cfg, fa);
    if (echo->parsed()) return cmd_echo(cfg, ea);
    if (saturation->parsed()) return cmd_saturation(cfg, ta);
    if (concentration->parsed()) return cmd_concentration(cfg, ca);
    if (regression->parsed()) return cmd_regression(cfg, ro);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return usage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return schema;
  } catch (const SchemaError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return schema;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return schema;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return numerical;
  }
  return usage;
}
