#ifndef HYBRIDCAV_MODE_GEOMETRY_HPP
#define HYBRIDCAV_MODE_GEOMETRY_HPP

// Transverse Gaussian modes of the plano-concave assembly and inference of
// (t_c, t_a, R) plus the phase correction from measured mode frequencies.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hybridcav/layered_cavity.hpp"

namespace hybridcav {

// Reduced length for transverse diffraction, t_a + t_c / n.
double effective_length(const CavityAssembly& assembly);

// w0^2 = (lambda / pi) sqrt(L_eff (R - L_eff)). Throws std::domain_error for an
// unstable (or planar) geometry.
double waist(const CavityAssembly& assembly, double wavelength);

// Spacing of successive transverse orders, (FSR / pi) arccos(sqrt(1 - L_eff / R)),
// with FSR = c / (2 (n t_c + t_a)).
double transverse_mode_spacing(const CavityAssembly& assembly);

enum class Polarization { D1, D2 };
std::string to_string(Polarization p);
Polarization polarization_from_string(const std::string& s);

struct ModeObservation {
  double frequency = 0.0;  // Hz
  std::optional<int> longitudinal_index_hint;
  int transverse_order = 0;  // m + n
  Polarization polarization = Polarization::D1;
};

// Parameter vector layout used by the fit: t_c, t_a, R, phase offset a, phase slope b.
struct GeometryParams {
  double t_c = 0.0;
  double t_a = 0.0;
  double R = 0.0;
  double phase_offset = 0.0;  // rad
  double phase_slope = 0.0;   // rad / m

  static constexpr int size = 5;
  static const std::array<const char*, 5> names;
  Eigen::Matrix<double, 5, 1> vector() const;
  static GeometryParams from_vector(const Eigen::Matrix<double, 5, 1>& v);
  CavityAssembly apply(CavityAssembly assembly) const;
};

GeometryParams params_of(const CavityAssembly& assembly);

struct ModePrediction {
  int q = 0;               // longitudinal index from the counted round-trip phase
  int transverse_order = 0;
  int family = 0;          // -1 / +1 for the ellipticity-split pair, 0 otherwise
  double frequency = 0.0;  // Hz
};

// Longitudinal resonances from the round-trip phase of the assembly with the
// given geometry, plus the transverse ladder up to max_order. ellipticity
// splits every order >= 1 into two lines at +/- ellipticity / 2.
std::vector<ModePrediction> predict_mode_frequencies(const CavityAssembly& templ, const GeometryParams& params,
                                                     double frequency_min, double frequency_max, int max_order,
                                                     double ellipticity = 0.0, const MirrorTable* table = nullptr);

struct GeometryFitOptions {
  Eigen::Matrix<double, 5, 1> lower;
  Eigen::Matrix<double, 5, 1> upper;
  // Grid nodes per parameter; 0 for t_c means width / crystal_step + 1. With
  // profile_air_gap the t_a count is unused: t_a is solved at every node so
  // that the median observed fundamental sits on a predicted line.
  std::array<int, 5> grid_points{0, 11, 5, 1, 1};
  double crystal_step = 10e-9;  // m; must resolve the ~20 nm wide true basin
  bool profile_air_gap = true;
  double ellipticity = 0.0;
  int max_iterations = 500;
  double relative_tolerance = 1e-10;
  int workers = 1;

  // Bounds of +/- (0.5 um, 0.5 um, 10 um) around the template with the phase fixed.
  static GeometryFitOptions around(const CavityAssembly& templ);
};

struct ResidualRow {
  ModeObservation observation;
  ModePrediction assigned;
  double residual = 0.0;  // observed - predicted, Hz
  bool duplicate = false;
};

struct GeometryEstimate {
  GeometryParams params;
  Eigen::Matrix<double, 5, 1> uncertainties = Eigen::Matrix<double, 5, 1>::Zero();  // zero for fixed parameters
  Eigen::MatrixXd covariance;        // over the free parameters, in the order of free_parameters
  std::vector<int> free_parameters;  // indices into GeometryParams::names
  double residual_rms = 0.0;         // Hz
  double objective = 0.0;            // Hz^2, including duplicate penalties
  std::array<bool, 5> boundary_flags{};
  bool on_boundary = false;
  bool converged = false;
  int iterations = 0;
  Polarization polarization = Polarization::D1;
  std::vector<ResidualRow> residuals;
  std::vector<double> trace;
};

// Sum of squared nearest-prediction residuals plus (FSR/4)^2 per duplicate
// assignment. Exposed for diagnostics and tests.
double geometry_objective(const CavityAssembly& templ, const std::vector<ModeObservation>& observations,
                          const GeometryParams& params, double ellipticity = 0.0,
                          std::vector<ResidualRow>* rows = nullptr, const MirrorTable* table = nullptr);

// Mode list predicted for `truth` with Gaussian frequency noise (deterministic in seed).
std::vector<ModeObservation> synthesize_observations(const CavityAssembly& truth, double frequency_min,
                                                     double frequency_max, int max_order, double noise_rms,
                                                     std::uint64_t seed, Polarization polarization = Polarization::D1);

// Fits one polarization family (all observations must share the tag).
// Throws std::invalid_argument when the input is under-determined.
GeometryEstimate fit_geometry(std::vector<ModeObservation> observations, const CavityAssembly& templ,
                              const GeometryFitOptions& options);

// Splits by polarization and fits each family independently with its own template.
std::vector<GeometryEstimate> fit_geometry_by_polarization(const std::vector<ModeObservation>& observations,
                                                           const CavityAssembly& templ_d1,
                                                           const CavityAssembly& templ_d2,
                                                           const GeometryFitOptions& options);

} // namespace hybridcav

#endif // HYBRIDCAV_MODE_GEOMETRY_HPP
