#ifndef HYBRIDCAV_EMISSION_HPP
#define HYBRIDCAV_EMISSION_HPP

// Time-domain observables of the cavity-coupled ensemble: fluorescence decay,
// two- and three-pulse photon echoes with spectral diffusion, saturation with
// drive power, and the dopant-count / concentration estimate.

#include <span>
#include <string>
#include <vector>

#include "hybridcav/estimation.hpp"
#include "hybridcav/purcell.hpp"

namespace hybridcav {

struct DecayTrace {
  std::vector<double> time;    // s, strictly increasing
  std::vector<double> signal;  // counts or normalised intensity, >= 0
  double excitation_power = 0.0;  // W
  double pulse_duration = 0.0;    // s
  bool feedback = false;

  void validate() const;
};

// I(t) = integral over [lower_bound, P_max] of p(P) p_coll(P) p_ex(P) exp(-(P + 1) t / T0),
// normalised to I(0) = 1. derating multiplies P_max before integrating.
DecayTrace fluorescence_decay(const PurcellModel& model, double n_cav, double tau, std::span<const double> t_grid,
                              double derating = 1.0, double lower_bound = 1.0);

// Uniform time grid helper: n points on [0, t_max].
std::vector<double> linear_grid(double t_max, std::size_t n);

// Biexponential fit of a trace; weights: none (uniform) or Poisson (1 / max(y, floor)).
enum class DecayWeighting { uniform, poisson };
FitResult fit_decay_constants(const DecayTrace& trace, DecayWeighting weighting = DecayWeighting::uniform);

struct DetuningFit {
  double delta_nu_rms = 0.0;  // Hz
  double amplitude = 0.0;     // nuisance scale between model and data
  double derating = 1.0;
  double objective = 0.0;     // sum of squared residuals
  double residual_rms = 0.0;
  int evaluations = 0;
  bool at_lower_bound = false;
  bool at_upper_bound = false;
  bool flat_objective = false;  // trace does not constrain the detuning
  std::string message;
};

// Golden-section search over dnu_rms in [0, 5 FWHM] with FWHM = 2 kappa, cut
// where the derated P_max would drop below lower_bound; the amplitude is
// profiled out in closed form.
DetuningFit fit_detuning_from_trace(const DecayTrace& trace, const PurcellModel& model, double n_cav, double tau,
                                    double lower_bound = 1.0);

// ---------------------------------------------------------------------------
// Photon echoes

struct DiffusionParams {
  double T2 = 0.0;        // s
  double T1 = 0.0;        // s; infinity disables the waiting-time decay
  double gamma_sd = 0.0;  // Hz
  double rate = 0.0;      // Hz

  void validate() const;
};

struct EchoPoint {
  double t = 0.0;     // echo time, s
  double T_w = 0.0;   // waiting time, s (0 for two-pulse)
  double area = 0.0;
};

// A0 exp(-2 t / T2)
double two_pulse_echo(double t, double A0, double T2);

// 1 / (pi T2) + (Gamma_SD / 2) (R t / 2 + 1 - exp(-R T_w))
double effective_linewidth(double t, double T_w, const DiffusionParams& params);

// A0 exp(-2 T_w / T1) exp(-2 pi t Gamma_eff(t, T_w))
double three_pulse_echo(double t, double T_w, double A0, const DiffusionParams& params);

enum class EchoModel { two_pulse, three_pulse_fixed_Tw, joint_diffusion };
std::string to_string(EchoModel m);
EchoModel echo_model_from_string(const std::string& s);

// two_pulse: log-linear fit, parameters A0, T2.
// three_pulse_fixed_Tw: single waiting time, log-linear fit; parameters A, gamma_eff, T2.
// joint_diffusion: bounded least squares on log areas; parameters T2, gamma_sd, rate and
// one amplitude per waiting time (named A[Tw=<us>]).
FitResult fit_echo_series(std::vector<EchoPoint> series, EchoModel model);

// ---------------------------------------------------------------------------
// Saturation and concentration

// N_sat s / (1 + s), s = P_in / P_sat
double saturation_model(double power, double n_sat, double p_sat);

struct SaturationFit {
  FitResult fit;        // parameters n_sat, p_sat
  double knee = 0.0;    // excited count at s = 1, i.e. n_sat / 2
  bool monotone = true; // false when the input counts are not nondecreasing in power
};

SaturationFit fit_saturation(std::span<const double> power, std::span<const double> counts);

struct SaturationCurve {
  std::vector<double> power;    // W
  std::vector<double> excited;  // expected excited dopants
  SaturationFit fit;
};

// Excited dopants vs input power from the Purcell distribution: the coupled
// dopants (P >= lower_bound) times the density-weighted mean of p_ex with
// n_cav = calibration * P_in; then fitted with saturation_model.
SaturationCurve saturation_curve(std::span<const double> power_grid, const PurcellModel& model, double tau,
                                 double calibration, double coupled_dopants, double lower_bound = 1.0);

enum class RabiWeighting { density, effective };

// Mean of sqrt(n_cav P kappa gamma) over [lower_bound, P_max]. density weights by
// p(P) alone; effective uses p(P) p_coll p_ex with the given pulse length.
double average_rabi(const PurcellModel& model, double n_cav, double lower_bound = 1.0,
                    RabiWeighting weighting = RabiWeighting::density, double tau = 0.0);

// Two-level ground-state population 1 / (1 + exp(-dE / kT)) for splitting dE (J).
double boltzmann_fraction(double splitting_energy, double temperature);

// (pi w0^2 / 2) t_c / detection_fraction
double detection_volume(double waist, double crystal_thickness, double detection_fraction);

struct ConcentrationEstimate {
  double dopant_count = 0.0;
  double number_density = 0.0;  // m^-3
  double concentration_ppm = 0.0;
};

// count = peak (pi / 2) FWHM classes / boltzmann; density = count / volume; ppm = density / sites * 1e6.
ConcentrationEstimate estimate_concentration(double peak_spectral_density, double inhomogeneous_fwhm,
                                             double boltzmann, int magnetic_classes, double detection_volume,
                                             double site_density);

// density / site_density * 1e6
double concentration_ppm(double number_density, double site_density);

} // namespace hybridcav

#endif // HYBRIDCAV_EMISSION_HPP
