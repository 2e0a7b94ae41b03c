#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hybridcav/layered_cavity.hpp"
#include "hybridcav/mode_geometry.hpp"
#include "support.hpp"

using namespace hybridcav;
using testing::abeles;
using testing::Film;

namespace {

LayerStack random_stack(std::mt19937_64& rng, int layers, double loss = 0.0) {
  std::uniform_real_distribution<double> n(1.3, 2.6), d(50e-9, 600e-9), outer(1.0, 2.0);
  LayerStack s;
  s.entry_index = outer(rng);
  s.exit_index = outer(rng);
  for (int i = 0; i < layers; ++i) s.layers.push_back({n(rng), d(rng), loss});
  s.termination = s.layers.back().refractive_index > s.layers.front().refractive_index ? Termination::high_index
                                                                                         : Termination::low_index;
  return s;
}

// Index-matched assembly: crystal and air share n = 1 so the mirrors are the
// only phase-dispersive elements and the textbook finesse applies.
CavityAssembly matched_cavity(double t1, double t2, double loss) {
  CavityAssembly a;
  const double wl = 1536.4e-9;
  const auto mirror = [&](double t) {
    return trim_to_transmission(build_quarter_wave_stack(wl, t, 2.1, 1.44, 1.44, 1.0, Termination::high_index), wl,
                                t);
  };
  a.curved_mirror = mirror(t1);
  a.flat_mirror = mirror(t2);
  a.crystal = {1.0, 20e-6, 0.0};
  a.air_gap = 30e-6;
  a.radius_of_curvature = 155e-6;
  a.scatter_absorb_loss = loss;
  return tune_air_gap(a, wl);
}

} // namespace

TEST_CASE("bare interface matches the Fresnel formula") {
  LayerStack s;
  s.entry_index = 1.0;
  s.exit_index = 2.0;
  const StackResponse r = stack_response(s, 1.5e-6);
  CHECK(r.r.real() == doctest::Approx(-1.0 / 3.0).epsilon(1e-14));
  CHECK(r.reflectance == doctest::Approx(1.0 / 9.0).epsilon(1e-14));
  CHECK(r.transmittance == doctest::Approx(8.0 / 9.0).epsilon(1e-14));
}

TEST_CASE("quarter-wave layer reflectance") {
  LayerStack s;
  s.layers = {{2.0, 1.0e-6 / 8.0, 0.0}};
  const StackResponse r = stack_response(s, 1.0e-6);
  CHECK(r.reflectance == doctest::Approx(0.36).epsilon(1e-12));
}

TEST_CASE("stack response agrees with an independent Abeles product") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 20; ++k) {
    const LayerStack s = random_stack(rng, 1 + k);
    std::vector<Film> films;
    for (const Layer& l : s.layers) films.push_back({l.refractive_index, l.thickness});
    for (double wl : {0.9e-6, 1.3e-6, 1.5364e-6, 2.0e-6}) {
      const auto [R, T] = abeles(films, s.entry_index, s.exit_index, wl);
      const StackResponse r = stack_response(s, wl);
      CHECK(r.reflectance == doctest::Approx(R).epsilon(1e-10));
      CHECK(r.transmittance == doctest::Approx(T).epsilon(1e-10));
    }
  }
}

TEST_CASE("energy conservation for lossless stacks") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> wl(0.8e-6, 2.2e-6);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const LayerStack s = random_stack(rng, 2 + 3 * k);
    for (int i = 0; i < 1000; ++i) {
      const StackResponse r = stack_response(s, wl(rng));
      worst = std::max(worst, std::abs(r.reflectance + r.transmittance - 1.0));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("five-pair stack conserves energy to 1e-12") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> wl(1.0e-6, 2.0e-6);
  const LayerStack s = quarter_wave_stack(1.5364e-6, 5, 2.1, 1.44, 1.44, 1.0, Termination::high_index);
  for (int i = 0; i < 100; ++i) {
    const StackResponse r = stack_response(s, wl(rng));
    CHECK(std::abs(r.reflectance + r.transmittance - 1.0) < 1e-12);
  }
}

TEST_CASE("reciprocity: transmittance is the same from both sides") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> wl(0.8e-6, 2.2e-6);
  for (double loss : {0.0, 1e-3}) {
    for (int k = 0; k < 10; ++k) {
      const LayerStack s = random_stack(rng, 3 + 2 * k, loss);
      const LayerStack rev = s.reversed();
      for (int i = 0; i < 100; ++i) {
        const double w = wl(rng);
        CHECK(std::abs(stack_response(s, w).transmittance - stack_response(rev, w).transmittance) < 1e-10);
      }
    }
  }
}

TEST_CASE("build_quarter_wave_stack picks the minimal pair count") {
  const double wl = 1536.4e-9, nh = 2.1, nl = 1.44;
  const LayerStack s = build_quarter_wave_stack(wl, 10e-6, nh, nl, 1.44, 1.0, Termination::high_index);
  int oracle = 0;
  for (int n = 1; n <= 30; ++n)
    if (abeles(testing::qw_films(wl, n, nh, nl, true), 1.44, 1.0, wl).second <= 10e-6) {
      oracle = n;
      break;
    }
  REQUIRE(oracle > 0);
  CHECK(static_cast<int>(s.layers.size()) == 2 * oracle);
  const double t = stack_response(s, wl).transmittance;
  CHECK(t <= 10e-6);
  CHECK(t > 10e-6 * std::pow(nl / nh, 2));
}

TEST_CASE("one more pair multiplies the transmission by (n_low/n_high)^2") {
  const double wl = 1536.4e-9, nh = 2.1, nl = 1.44;
  for (int n = 8; n < 14; ++n) {
    const double t0 = abeles(testing::qw_films(wl, n, nh, nl, true), 1.44, 1.0, wl).second;
    const double t1 =
        stack_response(quarter_wave_stack(wl, n + 1, nh, nl, 1.44, 1.0, Termination::high_index), wl).transmittance;
    CHECK(t1 / t0 == doctest::Approx(std::pow(nl / nh, 2)).epsilon(0.02));
  }
}

TEST_CASE("target transmission of one gives an empty stack") {
  const LayerStack s = build_quarter_wave_stack(1.5e-6, 1.0, 2.1, 1.44, 1.5, 1.0, Termination::high_index);
  CHECK(s.layers.empty());
  CHECK(stack_response(s, 1.5e-6).transmittance == doctest::Approx(4 * 1.5 / (2.5 * 2.5)).epsilon(1e-14));
}

TEST_CASE("unreachable targets are parameter errors") {
  CHECK_THROWS_AS(build_quarter_wave_stack(1.5e-6, 1e-6, 1.44, 1.44, 1.5, 1.0, Termination::high_index),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_quarter_wave_stack(1.5e-6, 1.5, 2.1, 1.44, 1.5, 1.0, Termination::high_index),
                  std::invalid_argument);
}

TEST_CASE("trimmed mirror hits its target transmission") {
  const double wl = 1536.4e-9;
  const LayerStack s =
      trim_to_transmission(quarter_wave_stack(wl, 18, 2.1, 1.44, 1.44, 1.0, Termination::high_index), wl, 7e-6);
  CHECK(stack_response(s, wl).transmittance == doctest::Approx(7e-6).epsilon(1e-6));
}

TEST_CASE("perfect mirrors transmit nothing") {
  CavityAssembly a = testing::paper_config().assembly;
  a.curved_mirror.perfect = true;
  a.flat_mirror.perfect = true;
  const Spectrum s = cavity_spectrum(a, 1535e-9, 1538e-9, 1e-11);
  for (const auto& p : s.points) CHECK(p.transmittance == 0.0);
  CHECK(find_resonances(a, 1535e-9, 1538e-9).empty());
}

TEST_CASE("spectrum row count and partition independence") {
  const CavityAssembly& a = testing::paper_config().assembly;
  const double lo = 1536.0e-9, hi = 1536.8e-9, res = 1e-12;
  const Spectrum whole = cavity_spectrum(a, lo, hi, res);
  CHECK(whole.points.size() == static_cast<std::size_t>(std::llround((hi - lo) / res)) + 1);
  const Spectrum left = cavity_spectrum(a, lo, 1536.4e-9, res);
  const Spectrum right = cavity_spectrum(a, 1536.4e-9, hi, res);
  REQUIRE(left.points.size() + right.points.size() == whole.points.size() + 1);
  for (std::size_t i = 0; i < left.points.size(); ++i)
    CHECK(left.points[i].transmittance == doctest::Approx(whole.points[i].transmittance).epsilon(1e-12));
  const std::size_t off = left.points.size() - 1;
  for (std::size_t i = 0; i < right.points.size(); ++i)
    CHECK(right.points[i].transmittance == doctest::Approx(whole.points[off + i].transmittance).epsilon(1e-12));
}

TEST_CASE("coarse resolution raises the warning flag") {
  const CavityAssembly& a = testing::paper_config().assembly;
  CHECK(cavity_spectrum(a, 1536e-9, 1537e-9, 1e-11).resolution_warning);
  CHECK_FALSE(cavity_spectrum(a, 1536.39e-9, 1536.41e-9, 1e-15).resolution_warning);
}

TEST_CASE("resonance invariants") {
  const auto res = find_resonances(testing::paper_config().assembly, 1525e-9, 1560e-9);
  REQUIRE(!res.empty());
  for (const Resonance& r : res) {
    CHECK(r.fwhm_linewidth == doctest::Approx(2.0 * r.kappa_total).epsilon(1e-12));
    CHECK(r.outcoupling_efficiency ==
          doctest::Approx((r.kappa_crystal_port + r.kappa_air_port) / r.kappa_total).epsilon(1e-12));
    CHECK(r.outcoupling_efficiency <= 1.0);
    CHECK(r.finesse == doctest::Approx(r.free_spectral_range / r.fwhm_linewidth).epsilon(1e-9));
  }
}

TEST_CASE("mean resonance spacing follows the optical length") {
  // ideal mirrors: the crystal-air interface only redistributes the lines
  CavityAssembly a = testing::paper_config().assembly;
  a.curved_mirror.perfect = true;
  a.flat_mirror.perfect = true;
  const auto f = resonance_frequencies(a, 150e12, 250e12);
  REQUIRE(f.size() >= 20);
  const double mean = (f.back() - f.front()) / static_cast<double>(f.size() - 1);
  CHECK(mean == doctest::Approx(a.geometric_fsr()).epsilon(0.01));

  // dielectric mirrors add their penetration depth, a few percent of the length
  const CavityAssembly& paper = testing::paper_config().assembly;
  const auto g = resonance_frequencies(paper, frequency_of(1630e-9), frequency_of(1450e-9));
  REQUIRE(g.size() >= 5);
  const double spacing = (g.back() - g.front()) / static_cast<double>(g.size() - 1);
  CHECK(spacing < paper.geometric_fsr());
  CHECK(spacing > 0.9 * paper.geometric_fsr());
}

TEST_CASE("finesse identity on an index-matched cavity") {
  for (auto [t1, t2, l] : {std::tuple{7e-6, 24e-6, 21e-6}, std::tuple{50e-6, 50e-6, 0.0},
                           std::tuple{100e-6, 200e-6, 150e-6}}) {
    const CavityAssembly a = matched_cavity(t1, t2, l);
    const auto res = find_resonances(a, 1536.0e-9, 1536.8e-9);
    REQUIRE(res.size() == 1);
    CHECK(res[0].finesse == doctest::Approx(2.0 * M_PI / (t1 + t2 + l)).epsilon(0.05));
  }
}

TEST_CASE("Lorentzian limit near a resonance") {
  const CavityAssembly& a = testing::paper_config().assembly;
  const auto res = find_resonances(a, 1536.0e-9, 1536.8e-9);
  REQUIRE(res.size() == 1);
  const Resonance& r = res[0];
  const double f0 = r.center_frequency, fw = r.fwhm_linewidth;
  const Spectrum s = cavity_spectrum(a, wavelength_of(f0 + 2 * fw), wavelength_of(f0 - 2 * fw), 1e-16);
  double worst = 0.0, peak = 0.0;
  for (const auto& p : s.points) peak = std::max(peak, p.transmittance);
  for (const auto& p : s.points) {
    const double x = frequency_of(p.wavelength) - f0;
    const double lor = peak / (1.0 + 4.0 * x * x / (fw * fw));
    worst = std::max(worst, std::abs(p.transmittance - lor) / peak);
  }
  CHECK(worst < 0.02);
}

TEST_CASE("paper assembly linewidth and finesse") {
  const auto res = find_resonances(testing::paper_config().assembly, 1536.0e-9, 1536.8e-9);
  REQUIRE(res.size() == 1);
  CHECK(res[0].wavelength() == doctest::Approx(1536.4e-9).epsilon(1e-6));
  CHECK(res[0].fwhm_linewidth == doctest::Approx(22e6).epsilon(3.0 / 22.0));
}

TEST_CASE("standing wave in the crystal") {
  const CavityAssembly& a = testing::paper_config().assembly;
  const auto res = find_resonances(a, 1536.0e-9, 1536.8e-9);
  REQUIRE(res.size() == 1);
  const FieldProfile f = intracavity_field(a, res[0]);
  const double n = a.crystal.refractive_index, wl = f.wavelength;
  CHECK(f.step <= wl / (20 * n) * (1 + 1e-12));
  CHECK(f.amplitude.front() < 1e-4);
  std::vector<double> peaks;
  for (std::size_t i = 1; i + 1 < f.z.size(); ++i)
    if (f.amplitude[i] > f.amplitude[i - 1] && f.amplitude[i] >= f.amplitude[i + 1] && f.amplitude[i] > 0.5)
      peaks.push_back(f.z[i]);
  int oracle = 0;
  while ((oracle + 0.5) * wl / (2 * n) < a.crystal.thickness) ++oracle;
  CHECK(static_cast<int>(peaks.size()) == oracle);
  for (std::size_t i = 1; i < peaks.size(); ++i)
    CHECK(std::abs(peaks[i] - peaks[i - 1] - wl / (2 * n)) <= f.step * (1 + 1e-9));
}

TEST_CASE("mode volume") {
  const CavityAssembly& a = testing::paper_config().assembly;
  const double wl = 1536.4e-9;
  const ModeVolume v = mode_volume(a, wl, 5.7e-6);
  CHECK(v.volume == doctest::Approx(750e-18).epsilon(0.15));
  CHECK(v.crystal_share + v.air_share + v.mirror_share == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(mode_volume(a, wl, 11.4e-6).volume == doctest::Approx(4 * v.volume).epsilon(1e-12));

  // uniform-index cavity between ideal mirrors: pi w0^2 L / 4
  CavityAssembly bare = a;
  bare.curved_mirror.perfect = true;
  bare.flat_mirror.perfect = true;
  bare.crystal.refractive_index = 1.0;
  const double L = bare.crystal.thickness + bare.air_gap;
  const double w0 = 6e-6;
  const double wl_res = 2.0 * L / std::round(2.0 * L / wl);
  CHECK(mode_volume(bare, wl_res, w0).volume == doctest::Approx(M_PI * w0 * w0 * L / 4).epsilon(0.01));
}

TEST_CASE("invalid layers are rejected") {
  CHECK_THROWS_AS((Layer{0.5, 1e-7, 0.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((Layer{1.5, -1e-7, 0.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((Layer{1.5, 1e-7, 1.0}.validate()), std::invalid_argument);
}
