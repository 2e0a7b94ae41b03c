#include "hybridcav/layered_cavity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hybridcav/estimation.hpp"

namespace hybridcav {

namespace {

using cd = std::complex<double>;

double wrap_phase(double phi) {
  phi = std::remainder(phi, two_pi);
  return phi == -pi ? pi : phi;
}

Vector2c<double> terminal(const LayerStack& stack) {
  // a perfect reflector pins the electric field to zero
  if (stack.perfect) return {cd(0.0), cd(1.0)};
  return {cd(1.0), cd(stack.exit_index)};
}

// Zero-thickness absorbing sheet of the given index: per-pass amplitude factor (1 - L)^(1/4).
Matrix2c<double> loss_sheet(double round_trip_loss, double index) {
  const double a = round_trip_loss > 0.0 ? -std::log(1.0 - round_trip_loss) / 4.0 : 0.0;
  return characteristic_matrix(cd(0.0, -a), index);
}

Matrix2c<double> product(const std::vector<Layer>& layers, double wavelength) {
  Matrix2c<double> m = Matrix2c<double>::Identity();
  for (const Layer& l : layers)
    m = m * characteristic_matrix(l.refractive_index, l.thickness, l.absorption_loss, wavelength);
  return m;
}

// [E; H] at the crystal face of the flat mirror for unit transmitted field,
// walking from the flat substrate back through the coating.
Vector2c<double> flat_face_exact(const CavityAssembly& a, double wavelength) {
  if (a.flat_mirror.perfect) return {cd(0.0), cd(1.0)};
  Vector2c<double> v(cd(1.0), cd(a.flat_mirror.entry_index));
  for (const Layer& l : a.flat_mirror.layers)
    v = characteristic_matrix(l.refractive_index, l.thickness, l.absorption_loss, wavelength) * v;
  return v;
}

cd air_side_exact(const CavityAssembly& a, double wavelength) {
  if (a.curved_mirror.perfect) return cd(-1.0);
  Vector2c<double> v(cd(1.0), cd(a.curved_mirror.entry_index));
  for (const Layer& l : a.curved_mirror.layers)
    v = characteristic_matrix(l.refractive_index, l.thickness, l.absorption_loss, wavelength) * v;
  return (v[0] - v[1]) / (v[0] + v[1]);
}

// Reflection of everything beyond the air gap (lossy sheet, crystal, flat
// mirror, flat substrate) as seen from the air.
cd crystal_side_reflection(const CavityAssembly& a, double wavelength, const Vector2c<double>& face) {
  const Vector2c<double> v =
      loss_sheet(a.scatter_absorb_loss, a.crystal.refractive_index) *
      (characteristic_matrix(a.crystal.refractive_index, a.crystal.thickness, a.crystal.absorption_loss, wavelength) *
       face);
  return (v[0] - v[1]) / (v[0] + v[1]);
}

cd round_trip(const CavityAssembly& a, double wavelength, const MirrorTable* table = nullptr) {
  const double delta = two_pi * a.air_gap / wavelength + 0.5 * a.phase_correction(wavelength);
  const double nu = frequency_of(wavelength);
  const bool tab = table && table->covers(nu);
  const cd r_air = tab ? table->air_side_reflection(nu) : air_side_exact(a, wavelength);
  const Vector2c<double> face = tab ? table->flat_face(nu) : flat_face_exact(a, wavelength);
  return r_air * crystal_side_reflection(a, wavelength, face) * std::exp(cd(0.0, -2.0 * delta));
}

// Full assembly probed from the curved-mirror substrate.
StackResponse composite_response(const CavityAssembly& a, double wavelength) {
  if (a.curved_mirror.perfect || a.flat_mirror.perfect) return {cd(-1.0), cd(0.0), 1.0, 0.0};
  Matrix2c<double> m = product(a.curved_mirror.layers, wavelength);
  m = m * characteristic_matrix(cd(two_pi * a.air_gap / wavelength + 0.5 * a.phase_correction(wavelength), 0.0), 1.0);
  m = m * loss_sheet(a.scatter_absorb_loss, a.crystal.refractive_index);
  m = m * characteristic_matrix(a.crystal.refractive_index, a.crystal.thickness, a.crystal.absorption_loss,
                                wavelength);
  const LayerStack flat = a.flat_mirror.reversed();
  m = m * product(flat.layers, wavelength);
  const auto [r, t] = amplitudes(m, a.curved_mirror.entry_index, flat.exit_index);
  return {r, t, std::norm(r), std::norm(t) * flat.exit_index / a.curved_mirror.entry_index};
}

double phase_at_frequency(const CavityAssembly& a, double nu, const MirrorTable* table = nullptr) {
  return -std::arg(round_trip(a, wavelength_of(nu), table));
}

// Local slope dPhi/dnu by central difference on the wrapped phase.
double phase_slope(const CavityAssembly& a, double nu) {
  const double h = 1e-4 * a.geometric_fsr();
  return wrap_phase(phase_at_frequency(a, nu + h) - phase_at_frequency(a, nu - h)) / (2.0 * h);
}

// Root of wrap(Phi(nu)) inside [lo, hi] by Illinois regula falsi.
double phase_root(const CavityAssembly& a, double lo, double hi, const MirrorTable* table) {
  auto g = [&](double nu) { return wrap_phase(phase_at_frequency(a, nu, table)); };
  double glo = g(lo), ghi = g(hi);
  if (glo == 0.0) return lo;
  if (ghi == 0.0) return hi;
  int side = 0;
  const double tol = std::max(1e-3, 16.0 * std::numeric_limits<double>::epsilon() * hi);
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    double mid = (lo * ghi - hi * glo) / (ghi - glo);
    if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if (gm == 0.0) return mid;
    if ((gm < 0.0) == (glo < 0.0)) {
      lo = mid;
      glo = gm;
      if (side == -1) ghi *= 0.5;
      side = -1;
    } else {
      hi = mid;
      ghi = gm;
      if (side == 1) glo *= 0.5;
      side = 1;
    }
    if (std::abs(gm) < 1e-14) return mid;
  }
  return 0.5 * (lo + hi);
}

} // namespace

// ---------------------------------------------------------------------------

void Layer::validate() const {
  if (!(refractive_index >= 1.0)) throw std::invalid_argument("layer refractive index must be >= 1");
  if (!(thickness > 0.0)) throw std::invalid_argument("layer thickness must be > 0");
  if (!(absorption_loss >= 0.0 && absorption_loss < 1.0))
    throw std::invalid_argument("layer absorption loss must lie in [0, 1)");
}

std::string to_string(Termination t) { return t == Termination::high_index ? "high_index" : "low_index"; }

Termination termination_from_string(const std::string& s) {
  if (s == "high_index" || s == "high" || s == "H") return Termination::high_index;
  if (s == "low_index" || s == "low" || s == "L") return Termination::low_index;
  throw std::invalid_argument("unknown termination '" + s + "' (expected high_index or low_index)");
}

LayerStack LayerStack::reversed() const {
  LayerStack out = *this;
  std::reverse(out.layers.begin(), out.layers.end());
  std::swap(out.entry_index, out.exit_index);
  if (!out.layers.empty()) {
    double lo = out.layers.front().refractive_index, hi = lo;
    for (const Layer& l : out.layers) {
      lo = std::min(lo, l.refractive_index);
      hi = std::max(hi, l.refractive_index);
    }
    out.termination = out.layers.back().refractive_index >= hi && hi > lo ? Termination::high_index
                                                                         : Termination::low_index;
  }
  return out;
}

void LayerStack::validate(bool require_layers) const {
  if (!(entry_index >= 1.0) || !(exit_index >= 1.0)) throw std::invalid_argument("stack media indices must be >= 1");
  if (perfect) return;
  if (require_layers && layers.empty()) throw std::invalid_argument("mirror stack has no layers");
  for (const Layer& l : layers) l.validate();
  if (layers.size() >= 2) {
    double others_max = 0.0, others_min = 1e300;
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
      others_max = std::max(others_max, layers[i].refractive_index);
      others_min = std::min(others_min, layers[i].refractive_index);
    }
    const double last = layers.back().refractive_index;
    const bool is_high = last >= others_max;
    const bool is_low = last <= others_min;
    if ((termination == Termination::high_index && !is_high) || (termination == Termination::low_index && !is_low))
      throw std::invalid_argument("stack termination '" + to_string(termination) +
                                  "' does not match the index of the final layer");
  }
}

Matrix2c<double> stack_matrix(const LayerStack& stack, double wavelength) {
  if (!(wavelength > 0.0)) throw std::invalid_argument("wavelength must be > 0");
  return product(stack.layers, wavelength);
}

StackResponse stack_response(const LayerStack& stack, double wavelength) {
  if (!(wavelength > 0.0)) throw std::invalid_argument("wavelength must be > 0");
  if (stack.perfect) return {cd(-1.0), cd(0.0), 1.0, 0.0};
  const auto [r, t] = amplitudes(product(stack.layers, wavelength), stack.entry_index, stack.exit_index);
  return {r, t, std::norm(r), std::norm(t) * stack.exit_index / stack.entry_index};
}

LayerStack quarter_wave_stack(double center_wavelength, int pairs, double n_high, double n_low, double n_substrate,
                              double n_exit, Termination termination, bool half_wave_cap) {
  if (!(center_wavelength > 0.0)) throw std::invalid_argument("centre wavelength must be > 0");
  if (!(n_low > 1.0 && n_high > n_low))
    throw std::invalid_argument("quarter-wave stack needs 1 < n_low < n_high");
  if (pairs < 0) throw std::invalid_argument("pair count must be >= 0");
  const bool last_high = (termination == Termination::high_index) != half_wave_cap;
  const double n_last = last_high ? n_high : n_low;
  const double n_first = last_high ? n_low : n_high;
  LayerStack s;
  s.entry_index = n_substrate;
  s.exit_index = n_exit;
  s.termination = termination;
  for (int p = 0; p < pairs; ++p) {
    s.layers.push_back({n_first, center_wavelength / (4.0 * n_first), 0.0});
    s.layers.push_back({n_last, center_wavelength / (4.0 * n_last), 0.0});
  }
  if (half_wave_cap && pairs > 0) s.layers.push_back({n_first, center_wavelength / (2.0 * n_first), 0.0});
  return s;
}

LayerStack build_quarter_wave_stack(double center_wavelength, double target_transmission, double n_high,
                                    double n_low, double n_substrate, double n_exit, Termination termination,
                                    bool half_wave_cap) {
  if (!(target_transmission > 0.0 && target_transmission <= 1.0))
    throw std::invalid_argument("target transmission must lie in (0, 1]");
  if (!(n_low > 1.0 && n_high > n_low))
    throw std::invalid_argument("unreachable target: quarter-wave stack needs 1 < n_low < n_high");
  for (int pairs = 0; pairs <= 400; ++pairs) {
    LayerStack s = quarter_wave_stack(center_wavelength, pairs, n_high, n_low, n_substrate, n_exit, termination,
                                      half_wave_cap);
    if (pairs == 0 && target_transmission < 1.0) continue;
    if (stack_response(s, center_wavelength).transmittance <= target_transmission) return s;
  }
  throw std::invalid_argument("unreachable target: more than 400 pairs required");
}

LayerStack trim_to_transmission(LayerStack stack, double wavelength, double target) {
  if (stack.layers.empty()) throw std::invalid_argument("cannot trim an empty stack");
  double n_max = 0.0;
  for (const Layer& l : stack.layers) n_max = std::max(n_max, l.refractive_index);
  std::size_t k = 0;
  while (stack.layers[k].refractive_index < n_max) ++k;
  const double quarter = stack.layers[k].thickness;
  auto t_at = [&](double d) {
    stack.layers[k].thickness = d;
    return stack_response(stack, wavelength).transmittance;
  };
  double lo = quarter, hi = 2.0 * quarter;
  const double t_lo = t_at(lo), t_hi = t_at(hi);
  if (!(target >= t_lo && target <= t_hi))
    throw std::invalid_argument("trim target " + std::to_string(target) + " outside reachable range [" +
                                std::to_string(t_lo) + ", " + std::to_string(t_hi) + "]");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (t_at(mid) < target) lo = mid;
    else hi = mid;
  }
  stack.layers[k].thickness = 0.5 * (lo + hi);
  return stack;
}

// ---------------------------------------------------------------------------

void CavityAssembly::validate() const {
  if (!(air_gap > 0.0)) throw std::invalid_argument("air gap t_a must be > 0");
  crystal.validate();
  if (!(radius_of_curvature > air_gap + crystal.thickness))
    throw std::invalid_argument("radius of curvature must exceed t_a + t_c");
  if (!(scatter_absorb_loss >= 0.0 && scatter_absorb_loss < 1.0))
    throw std::invalid_argument("scatter/absorption loss must lie in [0, 1)");
  curved_mirror.validate(true);
  flat_mirror.validate(true);
  if (!curved_mirror.perfect && std::abs(curved_mirror.exit_index - 1.0) > 1e-12)
    throw std::invalid_argument("curved mirror must exit into air (exit index 1)");
  if (!flat_mirror.perfect && std::abs(flat_mirror.exit_index - crystal.refractive_index) > 1e-12)
    throw std::invalid_argument("flat mirror exit index must equal the crystal index");
}

double CavityAssembly::geometric_fsr() const {
  return speed_of_light / (2.0 * (crystal.refractive_index * crystal.thickness + air_gap));
}

double round_trip_phase(const CavityAssembly& assembly, double wavelength) {
  return -std::arg(round_trip(assembly, wavelength));
}

double round_trip_amplitude(const CavityAssembly& assembly, double wavelength) {
  return std::abs(round_trip(assembly, wavelength));
}

Spectrum cavity_spectrum(const CavityAssembly& assembly, double wavelength_min, double wavelength_max,
                         double resolution) {
  assembly.validate();
  if (!(wavelength_min > 0.0 && wavelength_max >= wavelength_min))
    throw std::invalid_argument("wavelength range must be positive and ordered");
  if (!(resolution > 0.0)) throw std::invalid_argument("resolution must be > 0");
  const auto steps = static_cast<std::size_t>(std::floor((wavelength_max - wavelength_min) / resolution + 0.5));
  Spectrum out;
  out.points.resize(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) {
    const double wl = wavelength_min + static_cast<double>(i) * resolution;
    const StackResponse resp = composite_response(assembly, wl);
    out.points[i] = {wl, resp.reflectance, resp.transmittance, wrap_phase(round_trip_phase(assembly, wl))};
  }
  const double mid = 0.5 * (wavelength_min + wavelength_max);
  const double rho = round_trip_amplitude(assembly, mid);
  const double fsr = two_pi / phase_slope(assembly, frequency_of(mid));
  out.expected_fwhm = rho >= 1.0 ? 0.0 : fsr * (1.0 - rho) / (pi * std::sqrt(rho));
  const double step_hz = speed_of_light * resolution / (mid * mid);
  out.resolution_warning = out.expected_fwhm > 0.0 && step_hz > out.expected_fwhm;
  for (const double wl : {wavelength_min, mid, wavelength_max}) {
    if (stack_response(assembly.curved_mirror, wl).reflectance < 0.9 ||
        stack_response(assembly.flat_mirror, wl).reflectance < 0.9)
      out.outside_stopband = true;
  }
  return out;
}

namespace {

cd catmull_rom(const cd& p0, const cd& p1, const cd& p2, const cd& p3, double t) {
  const double t2 = t * t, t3 = t2 * t;
  return 0.5 * ((2.0 * p1) + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t3);
}

} // namespace

MirrorTable::MirrorTable(const CavityAssembly& assembly, double frequency_min, double frequency_max, double step)
    : f0_(frequency_min - 2.0 * step), step_(step) {
  if (!(frequency_max > frequency_min) || !(step > 0.0)) throw std::invalid_argument("mirror table needs a range");
  const auto n = static_cast<std::size_t>(std::ceil((frequency_max - frequency_min) / step)) + 5;
  r_air_.resize(n);
  face_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double wl = wavelength_of(f0_ + static_cast<double>(i) * step_);
    r_air_[i] = air_side_exact(assembly, wl);
    face_[i] = flat_face_exact(assembly, wl);
  }
}

bool MirrorTable::covers(double frequency) const {
  const double x = (frequency - f0_) / step_;
  return x >= 1.0 && x < static_cast<double>(r_air_.size()) - 2.0;
}

std::complex<double> MirrorTable::air_side_reflection(double frequency) const {
  const double x = (frequency - f0_) / step_;
  const auto i = static_cast<std::size_t>(x);
  return catmull_rom(r_air_[i - 1], r_air_[i], r_air_[i + 1], r_air_[i + 2], x - static_cast<double>(i));
}

Vector2c<double> MirrorTable::flat_face(double frequency) const {
  const double x = (frequency - f0_) / step_;
  const auto i = static_cast<std::size_t>(x);
  const double t = x - static_cast<double>(i);
  return {catmull_rom(face_[i - 1][0], face_[i][0], face_[i + 1][0], face_[i + 2][0], t),
          catmull_rom(face_[i - 1][1], face_[i][1], face_[i + 1][1], face_[i + 2][1], t)};
}

std::vector<ResonanceRoot> resonance_roots(const CavityAssembly& assembly, double frequency_min,
                                           double frequency_max, const MirrorTable* table) {
  std::vector<ResonanceRoot> roots;
  if (!(frequency_max > frequency_min)) return roots;
  const double fsr = assembly.geometric_fsr();
  const auto n = static_cast<std::size_t>(std::ceil((frequency_max - frequency_min) / (fsr / 8.0)));
  const double step = (frequency_max - frequency_min) / static_cast<double>(n);
  // absolute order: geometric estimate at the start, then counted crossings
  const double raw0 = phase_at_frequency(assembly, frequency_min, table);
  const double approx = two_pi * frequency_min / fsr;
  double unwrapped = raw0 + two_pi * std::round((approx - raw0) / two_pi);
  double prev = raw0;
  double prev_nu = frequency_min;
  for (std::size_t i = 1; i <= n; ++i) {
    const double nu = frequency_min + static_cast<double>(i) * step;
    const double raw = phase_at_frequency(assembly, nu, table);
    const double next = unwrapped + wrap_phase(raw - prev);
    const double q = std::floor(unwrapped / two_pi) + 1.0;
    if (q * two_pi <= next) {
      const double root = phase_root(assembly, prev_nu, nu, table);
      if (root >= frequency_min && root <= frequency_max) roots.push_back({static_cast<long>(q), root});
    }
    prev = raw;
    prev_nu = nu;
    unwrapped = next;
  }
  return roots;
}

std::vector<double> resonance_frequencies(const CavityAssembly& assembly, double frequency_min,
                                          double frequency_max) {
  std::vector<double> out;
  for (const auto& r : resonance_roots(assembly, frequency_min, frequency_max)) out.push_back(r.frequency);
  return out;
}

std::vector<Resonance> find_resonances(const CavityAssembly& assembly, double wavelength_min,
                                       double wavelength_max) {
  assembly.validate();
  std::vector<Resonance> out;
  if (!(wavelength_min > 0.0 && wavelength_max > wavelength_min))
    throw std::invalid_argument("wavelength range must be positive and ordered");
  if (assembly.curved_mirror.perfect || assembly.flat_mirror.perfect) return out;

  const std::vector<double> roots =
      resonance_frequencies(assembly, frequency_of(wavelength_max), frequency_of(wavelength_min));
  constexpr int samples = 241;
  for (const double nu0 : roots) {
    const double slope = phase_slope(assembly, nu0);
    const double fsr = two_pi / slope;
    const double rho = round_trip_amplitude(assembly, wavelength_of(nu0));
    if (!(rho < 1.0)) continue;
    const double fwhm_guess = fsr * (1.0 - rho) / (pi * std::sqrt(rho));

    std::vector<double> x(samples), y(samples);
    for (int i = 0; i < samples; ++i) {
      x[static_cast<std::size_t>(i)] = fwhm_guess * (-3.0 + 6.0 * i / (samples - 1));
      y[static_cast<std::size_t>(i)] =
          composite_response(assembly, wavelength_of(nu0 + x[static_cast<std::size_t>(i)])).transmittance;
    }
    const double peak = *std::max_element(y.begin(), y.end());
    const double floor = composite_response(assembly, wavelength_of(nu0 + 0.5 * fsr)).transmittance;
    if (!(peak > 10.0 * floor) || peak <= 0.0) continue;
    for (double& v : y) v /= peak;
    const FitResult fit = fit_lorentzian(x, y);

    Resonance res;
    res.center_frequency = nu0 + fit.value("center");
    res.fwhm_linewidth = fit.value("fwhm");
    res.kappa_total = 0.5 * res.fwhm_linewidth;
    res.free_spectral_range = fsr;
    res.finesse = fsr / res.fwhm_linewidth;
    res.peak_transmittance = peak * (fit.value("amplitude") + fit.value("offset"));
    res.lorentzian_rms = fit.residual_rms;
    const double wl = res.wavelength();
    const double t_air = stack_response(assembly.curved_mirror, wl).transmittance;
    const double t_crystal = stack_response(assembly.flat_mirror, wl).transmittance;
    const double total = t_air + t_crystal + assembly.scatter_absorb_loss;
    res.kappa_air_port = total > 0.0 ? res.kappa_total * t_air / total : 0.0;
    res.kappa_crystal_port = total > 0.0 ? res.kappa_total * t_crystal / total : 0.0;
    res.outcoupling_efficiency = total > 0.0 ? (t_air + t_crystal) / total : 1.0;
    if (wl >= wavelength_min && wl <= wavelength_max) out.push_back(res);
  }
  return out;
}

CavityAssembly tune_air_gap(CavityAssembly assembly, double target_wavelength) {
  const double phi = wrap_phase(round_trip_phase(assembly, target_wavelength));
  assembly.air_gap -= phi * target_wavelength / (4.0 * pi);
  if (!(assembly.air_gap > 0.0)) throw std::invalid_argument("tuning would make the air gap non-positive");
  return assembly;
}

// ---------------------------------------------------------------------------

namespace {

// Fields at distance s in front of the back face of a homogeneous layer.
cd field_inside(double index, double thickness, double loss, double wavelength, double s, const Vector2c<double>& back) {
  const double a = loss > 0.0 ? -std::log(1.0 - loss) / 2.0 : 0.0;
  const cd delta(two_pi * index * s / wavelength, thickness > 0.0 ? -a * s / thickness : 0.0);
  return (characteristic_matrix(delta, index) * back)[0];
}

// Fields at the crystal / flat-mirror boundary for unit transmitted amplitude.
Vector2c<double> crystal_back_face(const CavityAssembly& a, double wavelength) {
  const LayerStack flat = a.flat_mirror.reversed();
  if (a.flat_mirror.perfect) return terminal(flat);
  return product(flat.layers, wavelength) * terminal(flat);
}

struct LayerIntegral {
  double energy = 0.0;     // integral of n^2 |E|^2
  double peak = 0.0;       // max of n^2 |E|^2
  Vector2c<double> front;  // fields at the front face
};

LayerIntegral integrate_layer(const Layer& l, double wavelength, const Vector2c<double>& back, int per_wave) {
  const double step_target = wavelength / (per_wave * l.refractive_index);
  int n = std::max(2, static_cast<int>(std::ceil(l.thickness / step_target)));
  if (n % 2) ++n;
  const double h = l.thickness / n;
  const double eps = l.refractive_index * l.refractive_index;
  LayerIntegral out;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double e2 = eps * std::norm(field_inside(l.refractive_index, l.thickness, l.absorption_loss, wavelength,
                                                   i * h, back));
    out.peak = std::max(out.peak, e2);
    sum += w * e2;
  }
  out.energy = sum * h / 3.0;
  out.front = characteristic_matrix(l.refractive_index, l.thickness, l.absorption_loss, wavelength) * back;
  return out;
}

} // namespace

FieldProfile intracavity_field(const CavityAssembly& assembly, double wavelength) {
  assembly.validate();
  const Vector2c<double> back = crystal_back_face(assembly, wavelength);
  const Layer& c = assembly.crystal;
  const double max_step = wavelength / (40.0 * c.refractive_index);
  const auto n = static_cast<std::size_t>(std::ceil(c.thickness / max_step));
  FieldProfile out;
  out.wavelength = wavelength;
  out.step = c.thickness / static_cast<double>(n);
  out.z.resize(n + 1);
  out.amplitude.resize(n + 1);
  double peak = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const double z = static_cast<double>(i) * out.step;
    out.z[i] = z;
    out.amplitude[i] = std::abs(field_inside(c.refractive_index, c.thickness, c.absorption_loss, wavelength, z, back));
    peak = std::max(peak, out.amplitude[i]);
  }
  for (double& a : out.amplitude) a /= peak;
  return out;
}

FieldProfile intracavity_field(const CavityAssembly& assembly, const Resonance& resonance) {
  return intracavity_field(assembly, resonance.wavelength());
}

ModeVolume mode_volume(const CavityAssembly& assembly, double wavelength, double waist) {
  assembly.validate();
  if (!(waist > 0.0)) throw std::invalid_argument("waist must be > 0");
  constexpr int per_wave = 200;
  double mirrors = 0.0;
  Vector2c<double> v = terminal(assembly.flat_mirror.reversed());
  if (!assembly.flat_mirror.perfect) {
    const LayerStack flat = assembly.flat_mirror.reversed();
    for (auto it = flat.layers.rbegin(); it != flat.layers.rend(); ++it) {
      const LayerIntegral li = integrate_layer(*it, wavelength, v, per_wave);
      mirrors += li.energy;
      v = li.front;
    }
  }
  const LayerIntegral crystal = integrate_layer(assembly.crystal, wavelength, v, per_wave);
  v = loss_sheet(assembly.scatter_absorb_loss, assembly.crystal.refractive_index) * crystal.front;
  const LayerIntegral air = integrate_layer({1.0, assembly.air_gap, 0.0}, wavelength, v, per_wave);
  v = air.front;
  if (!assembly.curved_mirror.perfect) {
    for (auto it = assembly.curved_mirror.layers.rbegin(); it != assembly.curved_mirror.layers.rend(); ++it) {
      const LayerIntegral li = integrate_layer(*it, wavelength, v, per_wave);
      mirrors += li.energy;
      v = li.front;
    }
  }
  const double total = mirrors + crystal.energy + air.energy;
  ModeVolume out;
  out.volume = total / crystal.peak * (pi * waist * waist / 2.0);
  out.crystal_share = crystal.energy / total;
  out.air_share = air.energy / total;
  out.mirror_share = mirrors / total;
  return out;
}

} // namespace hybridcav
