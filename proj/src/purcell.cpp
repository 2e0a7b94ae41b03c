#include "hybridcav/purcell.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "hybridcav/quadrature.hpp"
#include "hybridcav/random.hpp"
#include "hybridcav/units.hpp"

namespace hybridcav {

double purcell_two_level(double wavelength, double quality_factor, double index, double mode_volume) {
  if (!(wavelength > 0.0 && index > 0.0 && mode_volume > 0.0) || quality_factor < 0.0)
    throw std::invalid_argument("purcell_two_level needs positive wavelength, index and volume");
  return 3.0 * std::pow(wavelength, 3) * quality_factor / (4.0 * pi * pi * std::pow(index, 3) * mode_volume);
}

void PurcellModel::validate() const {
  if (!(wavelength > 0.0)) throw std::invalid_argument("purcell model: wavelength must be > 0");
  if (!(quality_factor >= 0.0)) throw std::invalid_argument("purcell model: Q must be >= 0");
  if (!(crystal_index >= 1.0)) throw std::invalid_argument("purcell model: crystal index must be >= 1");
  if (!(mode_volume > 0.0)) throw std::invalid_argument("purcell model: mode volume must be > 0");
  if (!(branching_ratio > 0.0 && branching_ratio <= 1.0))
    throw std::invalid_argument("purcell model: branching ratio must lie in (0, 1]");
  if (!(kappa > 0.0)) throw std::invalid_argument("purcell model: kappa must be > 0");
  if (!(free_space_lifetime > 0.0)) throw std::invalid_argument("purcell model: T0 must be > 0");
  if (!(waist > 0.0)) throw std::invalid_argument("purcell model: waist must be > 0");
  if (!(derating > 0.0 && derating <= 1.0)) throw std::invalid_argument("purcell model: derating must lie in (0, 1]");
}

PurcellModel make_purcell_model(double wavelength, double quality_factor, double crystal_index, double mode_volume,
                                double branching_ratio, double kappa, double free_space_lifetime, double waist,
                                double derating) {
  PurcellModel m;
  m.wavelength = wavelength;
  m.quality_factor = quality_factor;
  m.crystal_index = crystal_index;
  m.mode_volume = mode_volume;
  m.branching_ratio = branching_ratio;
  m.kappa = kappa;
  m.free_space_lifetime = free_space_lifetime;
  m.waist = waist;
  m.derating = derating;
  m.validate();
  m.gamma = 1.0 / (4.0 * pi * free_space_lifetime);
  m.p_tl = purcell_two_level(wavelength, quality_factor, crystal_index, mode_volume);
  m.p_max = branching_ratio * m.p_tl * derating;
  m.g_max = std::sqrt(m.p_max * m.kappa * m.gamma);
  return m;
}

PurcellModel derated(const PurcellModel& model, double factor) {
  return make_purcell_model(model.wavelength, model.quality_factor, model.crystal_index, model.mode_volume,
                            model.branching_ratio, model.kappa, model.free_space_lifetime, model.waist, factor);
}

EmitterCoupling purcell_emitter(const PurcellModel& model) { return {model.p_max, model.g_max}; }

double purcell_at(const PurcellModel& model, double rho, double z) {
  const double s = std::sin(two_pi * model.crystal_index * z / model.wavelength);
  return model.p_max * s * s * std::exp(-2.0 * rho * rho / (model.waist * model.waist));
}

double density_analytic(double purcell, double p_max) {
  if (!(purcell > 0.0) || purcell > p_max)
    throw std::domain_error("density_analytic: P = " + std::to_string(purcell) + " outside (0, " +
                            std::to_string(p_max) + "]");
  return std::atan(std::sqrt(std::max(p_max / purcell - 1.0, 0.0))) / (4.0 * pi * purcell);
}

double density_mass(double lower, double upper, double p_max) {
  if (!(lower > 0.0 && upper <= p_max && upper >= lower)) throw std::domain_error("density_mass: invalid interval");
  return integrate([&](double p) { return density_analytic(p, p_max); }, lower, upper, 1e-10).value;
}

SampleSet sample_dopants(const PurcellModel& model, std::size_t count, double radial_cutoff, std::uint64_t seed,
                         double n_cav, double tau) {
  if (count < 1) throw std::invalid_argument("sample_dopants: count must be >= 1");
  if (!(radial_cutoff >= 3.0)) throw std::invalid_argument("sample_dopants: radial cutoff must be >= 3 waists");
  SampleSet set;
  set.radial_cutoff = radial_cutoff;
  set.seed = seed;
  set.n_cav = n_cav;
  set.tau = tau;
  set.samples.resize(count);
  const CounterRng rng(seed);
  const double r_max = radial_cutoff * model.waist;
  const double period = model.wavelength / (2.0 * model.crystal_index);
  for (std::size_t i = 0; i < count; ++i) {
    PurcellSample& s = set.samples[i];
    // uniform in the disc area and along one period
    s.rho = r_max * std::sqrt(rng.uniform(i, 0));
    s.z = period * rng.uniform(i, 1);
    s.purcell = purcell_at(model, s.rho, s.z);
    s.weight_collection = collection_probability(s.purcell);
    s.weight_excitation = tau > 0.0 ? excitation_probability(s.purcell, model, n_cav, tau) : 0.0;
  }
  return set;
}

double excitation_probability(double purcell, const PurcellModel& model, double n_cav, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("excitation_probability: tau must be > 0");
  if (!(n_cav >= 0.0)) throw std::invalid_argument("excitation_probability: n_cav must be >= 0");
  // g in ordinary frequency units; the rotation angle needs the angular rate 2 pi g
  const double g = std::sqrt(std::max(purcell, 0.0) * model.gamma * model.kappa);
  const double s = std::sin(std::sqrt(n_cav) * two_pi * g * tau / 2.0);
  return s * s;
}

double collection_probability(double purcell) {
  if (!(purcell >= 0.0)) throw std::domain_error("collection_probability: P must be >= 0");
  return purcell / (purcell + 1.0);
}

double weighted_mean(const std::function<double(double)>& f, const std::function<double(double)>& weight,
                     double lower, double upper, double rel_tol) {
  const QuadratureResult den = integrate(weight, lower, upper, rel_tol);
  const QuadratureResult num = integrate([&](double p) { return f(p) * weight(p); }, lower, upper, rel_tol);
  if (den.value == 0.0) return 0.0;
  return num.value / den.value;
}

double effective_average_purcell(const PurcellModel& model, double n_cav, double tau, double lower_bound) {
  if (!(lower_bound > 0.0 && lower_bound < model.p_max))
    throw std::domain_error("effective_average_purcell: lower bound must lie in (0, P_max)");
  const auto weight = [&](double p) {
    return density_analytic(p, model.p_max) * collection_probability(p) * excitation_probability(p, model, n_cav, tau);
  };
  return weighted_mean([](double p) { return p; }, weight, lower_bound, model.p_max);
}

double vibration_derating(double delta_nu_rms, double fwhm) {
  if (!(fwhm > 0.0)) throw std::invalid_argument("vibration_derating: fwhm must be > 0");
  const double x = delta_nu_rms / (0.5 * fwhm);
  return 1.0 / (1.0 + x * x);
}

std::vector<DensityBin> density_histogram(double p_max, double lower, int bins) {
  if (bins < 1) throw std::invalid_argument("density_histogram: bins must be >= 1");
  const double total = density_mass(lower, p_max, p_max);
  std::vector<DensityBin> out(static_cast<std::size_t>(bins));
  const double width = (p_max - lower) / bins;
  for (int b = 0; b < bins; ++b) {
    DensityBin& bin = out[static_cast<std::size_t>(b)];
    bin.lower = lower + b * width;
    bin.upper = b + 1 == bins ? p_max : lower + (b + 1) * width;
    bin.probability = density_mass(bin.lower, bin.upper, p_max) / total;
  }
  return out;
}

} // namespace hybridcav
