#include "hybridcav/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "hybridcav/mode_geometry.hpp"
#include "hybridcav/units.hpp"

namespace hybridcav {

namespace {

using json = nlohmann::json;
using Units = std::initializer_list<std::pair<const char*, double>>;

const Units length_units = {{"_m", 1.0}, {"_mm", 1e-3}, {"_um", um}, {"_nm", nm}};
const Units frequency_units = {{"_Hz", 1.0}, {"_kHz", kHz}, {"_MHz", MHz}, {"_GHz", GHz}, {"_THz", 1e12}};
const Units time_units = {{"_s", 1.0}, {"_ms", ms}, {"_us", us}, {"_ns", 1e-9}};
const Units loss_units = {{"_ppm", ppm}, {"_fraction", 1.0}};
const Units volume_units = {{"_m3", 1.0}, {"_um3", 1e-18}};
const Units number_density_units = {{"_per_m3", 1.0}, {"_per_cm3", 1e6}};
const Units spectral_density_units = {{"_per_Hz", 1.0}, {"_per_kHz", 1e-3}, {"_per_MHz", 1e-6}};
const Units per_power_units = {{"_per_W", 1.0}, {"_per_mW", 1e3}, {"_per_uW", 1e6}};
const Units slope_units = {{"_per_m", 1.0}, {"_per_nm", 1e9}};
const Units temperature_units = {{"_K", 1.0}};

// Object view that remembers which keys were read, so leftovers can be reported.
class Section {
public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return node_.at(key);
  }

  std::optional<double> number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(where(key) + ": not finite");
    return x;
  }

  double number(const std::string& key, double fallback) { return number(key).value_or(fallback); }

  double required_number(const std::string& key) {
    if (auto v = number(key)) return *v;
    throw ConfigError(where(key) + ": missing");
  }

  std::optional<int> integer(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
    return v.get<int>();
  }

  std::optional<bool> boolean(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(where(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::optional<std::string> string(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
    return v.get<std::string>();
  }

  // Looks for base + one of the unit suffixes and returns the value in SI.
  std::optional<double> quantity(const std::string& base, Units units) {
    std::optional<double> out;
    std::string found;
    for (const auto& [suffix, factor] : units) {
      const std::string key = base + suffix;
      if (!has(key)) continue;
      if (out) throw ConfigError(where(key) + ": conflicts with " + where(found));
      out = *number(key) * factor;
      found = key;
    }
    if (!out && has(base)) {
      std::string list;
      for (const auto& u : units) list += (list.empty() ? "" : ", ") + base + u.first;
      throw ConfigError(where(base) + ": needs a unit suffix (" + list + ")");
    }
    return out;
  }

  double required_quantity(const std::string& base, Units units) {
    if (auto v = quantity(base, units)) return *v;
    throw ConfigError(where(base) + ": missing (with unit suffix, e.g. " + base + units.begin()->first + ")");
  }

  std::optional<Section> child(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return Section(raw(key), where(key));
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError(where(it.key()) + ": unknown key");
  }

private:
  const json& node_;
  std::string path_;
  std::set<std::string> used_;
};

double positive(double v, const Section& s, const std::string& key) {
  if (!(v > 0.0)) throw ConfigError(s.where(key) + ": must be > 0");
  return v;
}

LayerStack read_mirror(Section m, double exit_index, double default_center) {
  if (m.boolean("perfect").value_or(false)) {
    LayerStack s;
    s.perfect = true;
    s.exit_index = exit_index;
    m.finish();
    return s;
  }
  const double substrate = m.number("substrate_index", 1.44);
  LayerStack stack;
  if (m.has("layers")) {
    const json& arr = m.raw("layers");
    if (!arr.is_array() || arr.empty()) throw ConfigError(m.where("layers") + ": expected a non-empty array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Section l(arr[i], m.where("layers") + "[" + std::to_string(i) + "]");
      Layer layer;
      layer.refractive_index = l.required_number("n");
      layer.thickness = l.required_quantity("d", length_units);
      layer.absorption_loss = l.quantity("loss", loss_units).value_or(0.0);
      l.finish();
      try {
        layer.validate();
      } catch (const std::exception& e) {
        throw ConfigError(l.where() + ": " + e.what());
      }
      stack.layers.push_back(layer);
    }
    stack.entry_index = substrate;
    stack.exit_index = exit_index;
    const double last = stack.layers.back().refractive_index;
    const double prev = stack.layers.size() > 1 ? stack.layers[stack.layers.size() - 2].refractive_index : substrate;
    stack.termination = last > prev ? Termination::high_index : Termination::low_index;
    m.finish();
    return stack;
  }
  const double center = m.quantity("design", length_units).value_or(default_center);
  const double n_high = m.number("n_high", 2.10);
  const double n_low = m.number("n_low", 1.44);
  Termination term = Termination::high_index;
  try {
    term = termination_from_string(m.string("termination").value_or("high"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(m.where("termination") + ": " + e.what());
  }
  const bool cap = m.boolean("half_wave_cap").value_or(false);
  const auto pairs = m.integer("pairs");
  const auto target = m.quantity("target_T", loss_units);
  const auto trim = m.quantity("trim_T", loss_units);
  if (pairs && target) throw ConfigError(m.where("pairs") + ": give either pairs or target_T, not both");
  try {
    if (pairs)
      stack = quarter_wave_stack(center, *pairs, n_high, n_low, substrate, exit_index, term, cap);
    else if (target)
      stack = build_quarter_wave_stack(center, *target, n_high, n_low, substrate, exit_index, term, cap);
    else
      throw ConfigError(m.where() + ": needs pairs, target_T_ppm, layers or perfect");
    if (trim) stack = trim_to_transmission(stack, center, *trim);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(m.where() + ": " + e.what());
  }
  m.finish();
  return stack;
}

WorkbenchConfig build(const json& doc, const std::string& source) {
  WorkbenchConfig cfg;
  cfg.source = source;
  Section root(doc, "");
  cfg.wavelength = root.quantity("wavelength", length_units).value_or(1536.4e-9);

  // assembly ---------------------------------------------------------------
  {
    auto a = root.child("assembly");
    if (!a) throw ConfigError("assembly: missing section");
    CavityAssembly& asmb = cfg.assembly;
    const double n_c = a->required_number("n_crystal");
    if (!(n_c >= 1.0)) throw ConfigError(a->where("n_crystal") + ": must be >= 1");
    cfg.crystal_index_d2 = a->number("n_crystal_d2");
    asmb.crystal.refractive_index = n_c;
    asmb.crystal.thickness = positive(a->required_quantity("t_c", length_units), *a, "t_c_um");
    asmb.crystal.absorption_loss = a->quantity("crystal_loss", loss_units).value_or(0.0);
    asmb.air_gap = positive(a->required_quantity("t_a", length_units), *a, "t_a_um");
    asmb.radius_of_curvature = positive(a->required_quantity("R", length_units), *a, "R_um");
    asmb.scatter_absorb_loss = a->quantity("loss", loss_units).value_or(0.0);
    if (auto pc = a->child("phase_correction")) {
      asmb.phase_correction.offset = pc->number("a", 0.0);
      asmb.phase_correction.slope = pc->quantity("b", slope_units).value_or(0.0);
      asmb.phase_correction.reference_wavelength = pc->quantity("reference", length_units).value_or(cfg.wavelength);
      pc->finish();
    } else {
      asmb.phase_correction.reference_wavelength = cfg.wavelength;
    }
    auto curved = a->child("curved_mirror");
    auto flat = a->child("flat_mirror");
    if (!curved) throw ConfigError(a->where("curved_mirror") + ": missing");
    if (!flat) throw ConfigError(a->where("flat_mirror") + ": missing");
    asmb.curved_mirror = read_mirror(std::move(*curved), 1.0, cfg.wavelength);
    asmb.flat_mirror = read_mirror(std::move(*flat), n_c, cfg.wavelength);
    cfg.tuned_wavelength = a->quantity("tune_air_gap_to", length_units);
    a->finish();
    try {
      asmb.validate();
      if (cfg.tuned_wavelength) asmb = tune_air_gap(asmb, *cfg.tuned_wavelength);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("assembly: ") + e.what());
    }
  }

  // purcell ----------------------------------------------------------------
  {
    auto p = root.child("purcell");
    if (!p) throw ConfigError("purcell: missing section");
    const double lambda = p->quantity("wavelength", length_units).value_or(cfg.wavelength);
    const double n = p->number("n_crystal", cfg.assembly.crystal.refractive_index);
    const double beta = p->number("beta", 1.0);
    const double t0 = p->required_quantity("T0", time_units);
    auto q = p->number("quality_factor");
    auto kappa = p->quantity("kappa", frequency_units);
    if (!q && !kappa) throw ConfigError(p->where("quality_factor") + ": give quality_factor or kappa_MHz");
    // Q = nu / FWHM with FWHM = 2 kappa
    if (!q) q = frequency_of(lambda) / (2.0 * *kappa);
    if (!kappa) kappa = frequency_of(lambda) / (2.0 * *q);
    auto w0 = p->quantity("waist", length_units);
    auto volume = p->quantity("mode_volume", volume_units);
    const double derating = p->number("derating", 1.0);
    p->finish();
    try {
      if (!w0) {
        w0 = waist(cfg.assembly, lambda);
        cfg.waist_from_geometry = true;
      }
      if (!volume) {
        volume = mode_volume(cfg.assembly, lambda, *w0).volume;
        cfg.volume_from_geometry = true;
      }
      cfg.purcell = make_purcell_model(lambda, *q, n, *volume, beta, *kappa, t0, *w0, derating);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("purcell: ") + e.what());
    }
  }

  // dynamics ---------------------------------------------------------------
  if (auto d = root.child("dynamics")) {
    DynamicsSettings& s = cfg.dynamics;
    s.n_cav = d->number("n_cav", s.n_cav);
    s.pulse_duration = d->quantity("tau", time_units).value_or(s.pulse_duration);
    s.lower_bound = d->number("lower_bound", s.lower_bound);
    s.detection_fraction = d->number("detection_fraction", s.detection_fraction);
    s.zeeman_splitting = d->quantity("zeeman_splitting", frequency_units).value_or(s.zeeman_splitting);
    s.temperature = d->quantity("temperature", temperature_units).value_or(s.temperature);
    s.magnetic_classes = d->integer("magnetic_classes").value_or(s.magnetic_classes);
    s.peak_spectral_density = d->quantity("peak_spectral_density", spectral_density_units).value_or(s.peak_spectral_density);
    s.inhomogeneous_fwhm = d->quantity("inhomogeneous_fwhm", frequency_units).value_or(s.inhomogeneous_fwhm);
    s.site_density = d->quantity("site_density", number_density_units).value_or(s.site_density);
    if (auto w = d->string("rabi_weighting")) {
      if (*w == "density") s.rabi_weighting = RabiWeighting::density;
      else if (*w == "effective") s.rabi_weighting = RabiWeighting::effective;
      else throw ConfigError(d->where("rabi_weighting") + ": expected density or effective");
    }
    s.saturation_calibration = d->quantity("saturation_calibration", per_power_units).value_or(0.0);
    s.coupled_dopants = d->number("coupled_dopants", 0.0);
    d->finish();
    if (!(s.n_cav >= 0.0)) throw ConfigError("dynamics.n_cav: must be >= 0");
    if (!(s.pulse_duration > 0.0)) throw ConfigError("dynamics.tau: must be > 0");
    if (!(s.lower_bound > 0.0 && s.lower_bound < cfg.purcell.p_max))
      throw ConfigError("dynamics.lower_bound: must lie in (0, P_max)");
    if (!(s.detection_fraction > 0.0 && s.detection_fraction <= 1.0))
      throw ConfigError("dynamics.detection_fraction: must lie in (0, 1]");
    if (!(s.temperature > 0.0)) throw ConfigError("dynamics.temperature_K: must be > 0");
    if (s.magnetic_classes < 1) throw ConfigError("dynamics.magnetic_classes: must be >= 1");
  }

  // paths ------------------------------------------------------------------
  if (auto p = root.child("paths")) {
    cfg.paths.output_dir = p->string("output_dir").value_or(cfg.paths.output_dir);
    cfg.paths.modes = p->string("modes").value_or("");
    cfg.paths.trace = p->string("trace").value_or("");
    cfg.paths.echoes = p->string("echoes").value_or("");
    p->finish();
  }
  root.finish();
  return cfg;
}

} // namespace

CavityAssembly WorkbenchConfig::assembly_d2() const {
  CavityAssembly a = assembly;
  if (crystal_index_d2) {
    a.crystal.refractive_index = *crystal_index_d2;
    a.flat_mirror.exit_index = *crystal_index_d2;
  }
  return a;
}

WorkbenchConfig parse_config(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    // translate the byte offset into line:column
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << source << ":" << line << ":" << col << ": JSON syntax error";
    throw ConfigError(os.str());
  }
  try {
    return build(doc, source);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

WorkbenchConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open configuration file");
  std::ostringstream buf;
  buf << in.rdbuf();
  WorkbenchConfig cfg = parse_config(buf.str(), path);
  // input paths are relative to the configuration file and must exist
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  for (auto [key, value] : {std::pair{"paths.modes", &cfg.paths.modes}, std::pair{"paths.trace", &cfg.paths.trace},
                            std::pair{"paths.echoes", &cfg.paths.echoes}}) {
    if (value->empty()) continue;
    std::filesystem::path p(*value);
    if (p.is_relative()) p = base / p;
    if (!std::filesystem::exists(p)) throw ConfigError(path + ": " + key + ": file not found: " + p.string());
    *value = p.string();
  }
  return cfg;
}

} // namespace hybridcav
