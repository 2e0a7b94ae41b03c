// Writes the synthetic example inputs shipped in data/ from a workbench config.
// Usage: make_synthetic <config.json> <output-dir>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>

#include "hybridcav/config.hpp"
#include "hybridcav/csv.hpp"
#include "hybridcav/emission.hpp"
#include "hybridcav/mode_geometry.hpp"
#include "hybridcav/random.hpp"

using namespace hybridcav;

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: make_synthetic <config.json> <output-dir>\n";
    return 1;
  }
  try {
    const WorkbenchConfig cfg = load_config(argv[1]);
    const std::filesystem::path out(argv[2]);
    std::filesystem::create_directories(out);
    const CounterRng rng(2024);

    // mode list: the paper geometry, both polarizations, 50 MHz noise
    GeometryParams truth = params_of(cfg.assembly);
    truth.t_c = 18.2 * um;
    truth.t_a = 29.8 * um;
    truth.R = 155 * um;
    const double f_lo = frequency_of(1630 * nm), f_hi = frequency_of(1520 * nm);
    auto modes = synthesize_observations(truth.apply(cfg.assembly), f_lo, f_hi, 2, 50 * MHz, 11, Polarization::D1);
    const auto d2 = synthesize_observations(truth.apply(cfg.assembly_d2()), f_lo, f_hi, 2, 50 * MHz, 12,
                                            Polarization::D2);
    modes.insert(modes.end(), d2.begin(), d2.end());
    {
      std::ofstream os(out / "modes_synthetic.csv");
      os << "# synthetic: t_c 18.2 um, t_a 29.8 um, R 155 um, 50 MHz rms noise\n"
         << "frequency_GHz,transverse_order,polarization\n";
      for (const auto& m : modes)
        os << format_number(m.frequency / GHz, 12) << ',' << m.transverse_order << ',' << to_string(m.polarization)
           << '\n';
    }

    // fluorescence trace derated by 8 MHz rms cavity jitter, 1 % noise
    const PurcellModel& pm = cfg.purcell;
    const double fwhm = 2.0 * pm.kappa;
    const auto grid = linear_grid(3.0 * pm.free_space_lifetime / 8.0, 200);
    DecayTrace tr = fluorescence_decay(pm, cfg.dynamics.n_cav, cfg.dynamics.pulse_duration, grid,
                                       vibration_derating(8 * MHz, fwhm), cfg.dynamics.lower_bound);
    std::vector<double> t_us, counts;
    for (std::size_t i = 0; i < tr.time.size(); ++i) {
      t_us.push_back(tr.time[i] / us);
      counts.push_back(std::max(0.0, 1000.0 * (tr.signal[i] + 0.01 * rng.normal(i, 0))));
    }
    write_csv((out / "trace_synthetic.csv").string(), {"time_us", "counts"}, {t_us, counts});

    // three-pulse echoes with spectral diffusion, waiting times from 1 us to 1 s;
    // each decay is sampled over about two 1/e times of its own linewidth
    const DiffusionParams dp{0.54 * ms, std::numeric_limits<double>::infinity(), 300 * kHz, 10.0};
    std::vector<double> et, tw, area;
    std::uint64_t k = 1000;
    for (double w : {1 * us, 10 * ms, 100 * ms, 1.0})
      for (int i = 0; i < 10; ++i) {
        const double t = (i + 1) * 0.1 / (pi * effective_linewidth(0.0, w, dp));
        et.push_back(t / us);
        tw.push_back(w / us);
        area.push_back(three_pulse_echo(t, w, 1.0, dp) * (1.0 + 0.02 * rng.normal(k++, 0)));
      }
    write_csv((out / "echoes_synthetic.csv").string(), {"t_us", "Tw_us", "area"}, {et, tw, area});

    // saturation data from the configured calibration, 3 % noise
    std::vector<double> grid_w, p_uw;
    for (int i = 0; i < 20; ++i) grid_w.push_back(0.02e-6 * std::pow(10.0, 3.5 * i / 19.0));
    const auto sat = saturation_curve(grid_w, pm, cfg.dynamics.pulse_duration, cfg.dynamics.saturation_calibration,
                                      cfg.dynamics.coupled_dopants, cfg.dynamics.lower_bound);
    std::vector<double> excited;
    for (std::size_t i = 0; i < grid_w.size(); ++i) {
      p_uw.push_back(grid_w[i] / 1e-6);
      excited.push_back(sat.excited[i] * (1.0 + 0.03 * rng.normal(5000 + i, 0)));
    }
    write_csv((out / "saturation_synthetic.csv").string(), {"power_uW", "excited"}, {p_uw, excited});
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
