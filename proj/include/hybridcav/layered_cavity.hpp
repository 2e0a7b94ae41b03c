#ifndef HYBRIDCAV_LAYERED_CAVITY_HPP
#define HYBRIDCAV_LAYERED_CAVITY_HPP

// One-dimensional transfer-matrix model of a mirror / air / crystal / mirror
// resonator at normal incidence.
//
// Characteristic-matrix convention: a layer of index n, thickness d and
// per-pass intensity loss L has phase thickness delta = 2 pi n d / lambda - i a
// with a = -ln(1 - L) / 2, and
//
//   M = [ cos delta        i sin delta / n ]
//       [ i n sin delta    cos delta       ]
//
// so that [E; H] on the entry side equals M [E; H] on the exit side. A stack
// with exit medium n_s has [B; C] = M_1 ... M_k [1; n_s] and
// r = (n_0 B - C) / (n_0 B + C), t = 2 n_0 / (n_0 B + C).

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hybridcav/units.hpp"

namespace hybridcav {

template <typename Scalar>
using Matrix2c = Eigen::Matrix<std::complex<Scalar>, 2, 2>;

template <typename Scalar>
using Vector2c = Eigen::Matrix<std::complex<Scalar>, 2, 1>;

// Phase thickness including absorption as a negative imaginary part.
template <typename Scalar>
std::complex<Scalar> phase_thickness(Scalar index, Scalar thickness, Scalar loss, Scalar wavelength) {
  using std::log;
  const Scalar attenuation = loss > Scalar(0) ? -log(Scalar(1) - loss) / Scalar(2) : Scalar(0);
  return {Scalar(two_pi) * index * thickness / wavelength, -attenuation};
}

template <typename Scalar>
Matrix2c<Scalar> characteristic_matrix(std::complex<Scalar> delta, Scalar index) {
  using C = std::complex<Scalar>;
  Matrix2c<Scalar> m;
  if (delta.imag() == Scalar(0)) {
    // lossless layer: real trigonometry only
    using std::cos;
    using std::sin;
    const Scalar c = cos(delta.real());
    const Scalar s = sin(delta.real());
    m << C(c, 0), C(0, s / index), C(0, index * s), C(c, 0);
    return m;
  }
  const C c = std::cos(delta);
  const C s = std::sin(delta);
  const C i(0, 1);
  m << c, i * s / index, i * index * s, c;
  return m;
}

template <typename Scalar>
Matrix2c<Scalar> characteristic_matrix(Scalar index, Scalar thickness, Scalar loss, Scalar wavelength) {
  return characteristic_matrix(phase_thickness(index, thickness, loss, wavelength), index);
}

// Amplitude reflection and transmission of a product matrix between two media.
template <typename Scalar>
std::pair<std::complex<Scalar>, std::complex<Scalar>> amplitudes(const Matrix2c<Scalar>& m, Scalar n_entry,
                                                                 Scalar n_exit) {
  const Vector2c<Scalar> bc = m * Vector2c<Scalar>(Scalar(1), n_exit);
  const std::complex<Scalar> denom = n_entry * bc[0] + bc[1];
  return {(n_entry * bc[0] - bc[1]) / denom, Scalar(2) * n_entry / denom};
}

// ---------------------------------------------------------------------------

struct Layer {
  double refractive_index = 1.0;
  double thickness = 0.0;
  double absorption_loss = 0.0;  // fractional intensity loss per traversal

  void validate() const;
};

enum class Termination { high_index, low_index };

std::string to_string(Termination t);
Termination termination_from_string(const std::string& s);

struct LayerStack {
  std::vector<Layer> layers;  // ordered from the entry medium towards the exit medium
  double entry_index = 1.0;
  double exit_index = 1.0;
  Termination termination = Termination::high_index;  // index of the last layer
  bool perfect = false;  // ideal reflector: r = -1, t = 0, layers ignored

  LayerStack reversed() const;
  void validate(bool require_layers = false) const;
};

struct StackResponse {
  std::complex<double> r;
  std::complex<double> t;
  double reflectance = 0.0;
  double transmittance = 0.0;
};

Matrix2c<double> stack_matrix(const LayerStack& stack, double wavelength);
StackResponse stack_response(const LayerStack& stack, double wavelength);

// Minimal number of quarter-wave pairs so that the stack transmits at most
// target_transmission (a fraction) at center_wavelength. Layers run from the
// substrate to the exit medium and the termination names the material that
// touches the exit medium. With half_wave_cap the quarter-wave pairs end in the
// other material and a half-wave termination layer is added on top; that layer
// is absent at the centre wavelength but keeps the field node of the
// high-index termination. target 1 gives an empty stack.
LayerStack build_quarter_wave_stack(double center_wavelength, double target_transmission, double n_high,
                                    double n_low, double n_substrate, double n_exit, Termination termination,
                                    bool half_wave_cap = false);

// Fixed pair count variant used by configuration files.
LayerStack quarter_wave_stack(double center_wavelength, int pairs, double n_high, double n_low, double n_substrate,
                              double n_exit, Termination termination, bool half_wave_cap = false);

// Detunes the substrate-side high-index layer (quarter-wave up to half-wave)
// until the stack transmits exactly `target` at `wavelength`. Used to build
// mirrors with a prescribed transmission. Throws if the target is not
// bracketed by the stack with and without that layer.
LayerStack trim_to_transmission(LayerStack stack, double wavelength, double target);

// ---------------------------------------------------------------------------

// Extra round-trip phase phi(lambda) = offset + slope (lambda - reference).
struct PhaseCorrection {
  double offset = 0.0;                       // rad
  double slope = 0.0;                        // rad / m
  double reference_wavelength = 1536.4e-9;   // m
  double operator()(double wavelength) const { return offset + slope * (wavelength - reference_wavelength); }
};

struct CavityAssembly {
  LayerStack curved_mirror;  // substrate -> coating -> air (exit index 1)
  double air_gap = 0.0;
  Layer crystal;
  LayerStack flat_mirror;    // substrate -> coating -> crystal (exit index n)
  double radius_of_curvature = 0.0;
  double scatter_absorb_loss = 0.0;  // lumped round-trip intensity loss at the crystal surface
  PhaseCorrection phase_correction;

  void validate() const;
  // Estimate c / (2 (n t_c + t_a)) ignoring mirror penetration.
  double geometric_fsr() const;
};

struct SpectrumPoint {
  double wavelength = 0.0;
  double reflectance = 0.0;
  double transmittance = 0.0;
  double round_trip_phase = 0.0;  // wrapped to (-pi, pi]; zero on resonance
};

struct Spectrum {
  std::vector<SpectrumPoint> points;
  bool resolution_warning = false;  // step coarser than the expected linewidth
  bool outside_stopband = false;    // a mirror reflects < 90 % somewhere in range
  double expected_fwhm = 0.0;       // Hz, from the round-trip amplitude at mid-range
};

// Round-trip phase of the air-gap mode inside the assembly, including the
// phase correction. Grows with frequency; resonance when it is a multiple of 2 pi.
double round_trip_phase(const CavityAssembly& assembly, double wavelength);

// |round-trip amplitude| including mirror, interface and lumped losses.
double round_trip_amplitude(const CavityAssembly& assembly, double wavelength);

Spectrum cavity_spectrum(const CavityAssembly& assembly, double wavelength_min, double wavelength_max,
                         double resolution);

struct Resonance {
  double center_frequency = 0.0;  // Hz
  double fwhm_linewidth = 0.0;    // Hz
  double finesse = 0.0;
  double kappa_total = 0.0;       // Hz, half width
  double kappa_crystal_port = 0.0;
  double kappa_air_port = 0.0;
  double outcoupling_efficiency = 0.0;
  double free_spectral_range = 0.0;  // local, from the round-trip phase slope
  double peak_transmittance = 0.0;
  double lorentzian_rms = 0.0;       // residual of the local Lorentzian fit, relative to the peak
  double wavelength() const { return wavelength_of(center_frequency); }
};

std::vector<Resonance> find_resonances(const CavityAssembly& assembly, double wavelength_min,
                                       double wavelength_max);

// Mirror responses tabulated on a uniform frequency grid and interpolated
// with Catmull-Rom splines. The coatings do not change during a geometry fit,
// so repeated resonance searches can share one table. Frequencies outside the
// table fall back to the exact transfer-matrix product.
class MirrorTable {
public:
  MirrorTable(const CavityAssembly& assembly, double frequency_min, double frequency_max, double step = 2e9);
  bool covers(double frequency) const;
  std::complex<double> air_side_reflection(double frequency) const;
  Vector2c<double> flat_face(double frequency) const;  // [E; H] at the crystal face of the flat mirror

private:
  double f0_ = 0.0;
  double step_ = 1.0;
  std::vector<std::complex<double>> r_air_;
  std::vector<Vector2c<double>> face_;
};

struct ResonanceRoot {
  long order = 0;  // longitudinal index, consistent within one search
  double frequency = 0.0;
};

// Frequencies where the round-trip phase is a multiple of 2 pi (no linewidth
// fit); the fast path used by mode prediction.
std::vector<ResonanceRoot> resonance_roots(const CavityAssembly& assembly, double frequency_min,
                                           double frequency_max, const MirrorTable* table = nullptr);
std::vector<double> resonance_frequencies(const CavityAssembly& assembly, double frequency_min,
                                          double frequency_max);

// Copy of the assembly with the air gap shifted by the smallest amount that
// puts a resonance exactly at target_wavelength.
CavityAssembly tune_air_gap(CavityAssembly assembly, double target_wavelength);

struct FieldProfile {
  std::vector<double> z;          // m, from the crystal / flat-mirror boundary towards the air gap
  std::vector<double> amplitude;  // |E| normalised to its maximum inside the crystal
  double wavelength = 0.0;
  double step = 0.0;
};

// Standing-wave envelope inside the crystal at the resonance wavelength.
FieldProfile intracavity_field(const CavityAssembly& assembly, const Resonance& resonance);
FieldProfile intracavity_field(const CavityAssembly& assembly, double wavelength);

struct ModeVolume {
  double volume = 0.0;        // m^3
  double crystal_share = 0.0; // fraction of the electric energy in the crystal
  double air_share = 0.0;
  double mirror_share = 0.0;
};

// V = integral of n^2 |E|^2 over the whole assembly, times the Gaussian mode
// area pi w0^2 / 2, divided by the maximum of n^2 |E|^2 inside the crystal.
ModeVolume mode_volume(const CavityAssembly& assembly, double wavelength, double waist);

} // namespace hybridcav

#endif // HYBRIDCAV_LAYERED_CAVITY_HPP
