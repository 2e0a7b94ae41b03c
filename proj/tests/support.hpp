#ifndef HYBRIDCAV_TESTS_SUPPORT_HPP
#define HYBRIDCAV_TESTS_SUPPORT_HPP

// Shared fixtures and independent oracles for the test binaries. The oracles
// deliberately avoid the library code they check.

#include <cmath>
#include <complex>
#include <random>
#include <string>
#include <vector>

#include "hybridcav/config.hpp"

namespace testing {

inline const std::string source_dir = HYBRIDCAV_SOURCE_DIR;

inline const hybridcav::WorkbenchConfig& paper_config() {
  static const hybridcav::WorkbenchConfig cfg = hybridcav::load_config(source_dir + "/configs/paper.json");
  return cfg;
}

struct Film {
  double n;
  double d;
};

// Plain Abeles product with std::complex only: intensity transmittance and
// reflectance of films between n_in and n_out at normal incidence.
inline std::pair<double, double> abeles(const std::vector<Film>& films, double n_in, double n_out, double wl) {
  using C = std::complex<double>;
  C m00 = 1, m01 = 0, m10 = 0, m11 = 1;
  for (const Film& f : films) {
    const double delta = 2.0 * M_PI * f.n * f.d / wl;
    const C a = std::cos(delta), b = C(0, std::sin(delta) / f.n), c = C(0, f.n * std::sin(delta));
    const C n00 = m00 * a + m01 * c, n01 = m00 * b + m01 * a;
    const C n10 = m10 * a + m11 * c, n11 = m10 * b + m11 * a;
    m00 = n00, m01 = n01, m10 = n10, m11 = n11;
  }
  const C B = m00 + m01 * n_out, Cc = m10 + m11 * n_out;
  const C r = (n_in * B - Cc) / (n_in * B + Cc);
  const C t = 2.0 * n_in / (n_in * B + Cc);
  return {std::norm(r), std::norm(t) * n_out / n_in};
}

// Quarter-wave pairs from the substrate side, ending in `last_high` material.
inline std::vector<Film> qw_films(double wl, int pairs, double nh, double nl, bool last_high) {
  std::vector<Film> f;
  for (int i = 0; i < pairs; ++i) {
    const double first = last_high ? nl : nh, second = last_high ? nh : nl;
    f.push_back({first, wl / (4 * first)});
    f.push_back({second, wl / (4 * second)});
  }
  return f;
}

} // namespace testing

#endif // HYBRIDCAV_TESTS_SUPPORT_HPP
