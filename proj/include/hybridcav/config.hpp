#ifndef HYBRIDCAV_CONFIG_HPP
#define HYBRIDCAV_CONFIG_HPP

// Workbench configuration: one JSON file with assembly, purcell, dynamics and
// paths sections. Dimensional keys carry their unit as a suffix (t_c_um,
// kappa_MHz, ...); a bare or unknown key is rejected with its full key path.

#include <optional>
#include <stdexcept>
#include <string>

#include "hybridcav/emission.hpp"
#include "hybridcav/layered_cavity.hpp"
#include "hybridcav/purcell.hpp"

namespace hybridcav {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct DynamicsSettings {
  double n_cav = 50.0;
  double pulse_duration = 0.5e-6;    // s
  double lower_bound = 1.0;          // lowest Purcell factor counted as coupled
  double detection_fraction = 0.5;
  double zeeman_splitting = 100e9;   // Hz (converted with h for the Boltzmann factor)
  double temperature = 2.0;          // K
  int magnetic_classes = 4;
  double peak_spectral_density = 0.56 / 1e3;  // dopants per Hz
  double inhomogeneous_fwhm = 414e6;          // Hz
  double site_density = 1.8e28;               // m^-3
  RabiWeighting rabi_weighting = RabiWeighting::density;
  double saturation_calibration = 0.0;  // intracavity photons per W of input; 0 disables the model curve
  double coupled_dopants = 0.0;
};

struct PathSettings {
  std::string output_dir = ".";
  std::string modes;   // optional default inputs for the CLI
  std::string trace;
  std::string echoes;
};

struct WorkbenchConfig {
  std::string source;  // file the configuration was read from
  double wavelength = 1536.4e-9;
  CavityAssembly assembly;
  std::optional<double> crystal_index_d2;
  std::optional<double> tuned_wavelength;  // air gap was tuned to a resonance here
  PurcellModel purcell;
  bool waist_from_geometry = false;
  bool volume_from_geometry = false;
  DynamicsSettings dynamics;
  PathSettings paths;

  // Assembly with the crystal index replaced for the D2 family (same as D1 when unset).
  CavityAssembly assembly_d2() const;
};

WorkbenchConfig parse_config(const std::string& text, const std::string& source = "<string>");
WorkbenchConfig load_config(const std::string& path);

} // namespace hybridcav

#endif // HYBRIDCAV_CONFIG_HPP
