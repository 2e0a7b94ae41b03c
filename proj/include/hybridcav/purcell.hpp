#ifndef HYBRIDCAV_PURCELL_HPP
#define HYBRIDCAV_PURCELL_HPP

// Purcell factors of emitters spread through the standing-wave Gaussian mode:
// point values, the closed-form distribution, Monte Carlo sampling and the
// excitation / collection weighting of fluorescence experiments.
//
// Rates follow the convention in units.hpp (kappa, gamma, g stored as the
// ordinary frequency X of "2 pi x X"). The Rabi rotation angle is the one
// place where the 2 pi is put back.

#include <cstdint>
#include <functional>
#include <vector>

namespace hybridcav {

// P_TL = 3 lambda^3 Q / (4 pi^2 n^3 V)
double purcell_two_level(double wavelength, double quality_factor, double index, double mode_volume);

struct PurcellModel {
  // inputs
  double wavelength = 1536.4e-9;
  double quality_factor = 0.0;
  double crystal_index = 1.8;
  double mode_volume = 0.0;            // m^3
  double branching_ratio = 1.0;
  double kappa = 0.0;                  // Hz, half width
  double free_space_lifetime = 0.0;    // T0, s
  double waist = 0.0;                  // m
  double derating = 1.0;               // multiplies P_Er,max (cavity vibrations)
  // derived by make_purcell_model
  double gamma = 0.0;  // 1 / (4 pi T0)
  double p_tl = 0.0;
  double p_max = 0.0;  // beta * P_TL * derating
  double g_max = 0.0;  // sqrt(p_max kappa gamma)

  void validate() const;
};

PurcellModel make_purcell_model(double wavelength, double quality_factor, double crystal_index, double mode_volume,
                                double branching_ratio, double kappa, double free_space_lifetime, double waist,
                                double derating = 1.0);

// Same model with a different derating factor (derived quantities refreshed).
PurcellModel derated(const PurcellModel& model, double factor);

struct EmitterCoupling {
  double p_max = 0.0;
  double g_max = 0.0;
};

// P_Er,max = beta P_TL and g_max = sqrt(P_Er,max kappa gamma).
EmitterCoupling purcell_emitter(const PurcellModel& model);

// P(rho, z) = P_max sin^2(2 pi n z / lambda) exp(-2 rho^2 / w0^2), z from a field node.
double purcell_at(const PurcellModel& model, double rho, double z);

// Relative density arctan(sqrt(P_max / P - 1)) / (4 pi P) for 0 < P <= P_max.
double density_analytic(double purcell, double p_max);

// Integral of density_analytic over [lower, upper] (adaptive quadrature).
double density_mass(double lower, double upper, double p_max);

struct PurcellSample {
  double rho = 0.0;
  double z = 0.0;
  double purcell = 0.0;
  double weight_excitation = 0.0;
  double weight_collection = 0.0;
};

struct SampleSet {
  std::vector<PurcellSample> samples;
  double radial_cutoff = 4.0;  // in units of the waist
  std::uint64_t seed = 0;
  double n_cav = 0.0;
  double tau = 0.0;
};

// Uniform emitters in a cylinder of radius cutoff * w0 and one standing-wave
// period lambda / (2 n). Sample i depends only on (seed, i).
SampleSet sample_dopants(const PurcellModel& model, std::size_t count, double radial_cutoff, std::uint64_t seed,
                         double n_cav = 0.0, double tau = 0.0);

// sin^2(sqrt(n_cav) * 2 pi g tau / 2) with g = sqrt(P gamma kappa) in ordinary units.
double excitation_probability(double purcell, const PurcellModel& model, double n_cav, double tau);

// P / (P + 1)
double collection_probability(double purcell);

// Weighted mean of f(P) with weight w(P) over [lower, P_max].
double weighted_mean(const std::function<double(double)>& f, const std::function<double(double)>& weight,
                     double lower, double upper, double rel_tol = 1e-8);

// Mean of P under density * p_coll * p_ex on [lower_bound, P_max].
double effective_average_purcell(const PurcellModel& model, double n_cav, double tau, double lower_bound = 1.0);

// 1 / (1 + (dnu_rms / (fwhm / 2))^2)
double vibration_derating(double delta_nu_rms, double fwhm);

struct DensityBin {
  double lower = 0.0;
  double upper = 0.0;
  double probability = 0.0;  // share of the density mass on [P_lo, P_max]
};

// Quadrature-normalised density integrated over equal-width bins of [lower, P_max].
std::vector<DensityBin> density_histogram(double p_max, double lower, int bins);

} // namespace hybridcav

#endif // HYBRIDCAV_PURCELL_HPP
