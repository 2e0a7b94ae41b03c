#ifndef HYBRIDCAV_UNITS_HPP
#define HYBRIDCAV_UNITS_HPP

// Physical constants and the frequency convention shared by every module.
//
// RATE CONVENTION: every rate that is customarily quoted as "2pi x X"
// (kappa = 2pi x 11 MHz, gamma = 2pi x 7 Hz, g = 2pi x 67 kHz, ...) is stored
// as the ordinary frequency X in Hz. kappa is the field (half-width) decay rate,
// so FWHM = 2 kappa. Where a formula needs angular rates (Rabi rotation angles)
// the factor 2pi is reinstated explicitly at that call site.
//
// Lengths are in metres, times in seconds, frequencies in Hz throughout the
// library. Unit-suffixed quantities (_um, _nm, _MHz, ...) only appear at the
// configuration/CSV boundary.

#include <numbers>

namespace hybridcav {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double speed_of_light = 299792458.0;      // m/s
inline constexpr double boltzmann_constant = 1.380649e-23; // J/K
inline constexpr double planck_constant = 6.62607015e-34;  // J s

inline constexpr double um = 1e-6;
inline constexpr double nm = 1e-9;
inline constexpr double ppm = 1e-6;
inline constexpr double MHz = 1e6;
inline constexpr double kHz = 1e3;
inline constexpr double GHz = 1e9;
inline constexpr double ms = 1e-3;
inline constexpr double us = 1e-6;

inline constexpr double frequency_of(double wavelength) { return speed_of_light / wavelength; }
inline constexpr double wavelength_of(double frequency) { return speed_of_light / frequency; }

} // namespace hybridcav

#endif // HYBRIDCAV_UNITS_HPP
