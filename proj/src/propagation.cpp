#include "channeldiff/propagation.hpp"

#include <fstream>

#include "json.hpp"

namespace channeldiff::propagation {

using nlohmann::json;

Model select_model(double f_c_hz) {
  if (f_c_hz <= 0) throw ValidationError("f_c must be > 0");
  if (f_c_hz >= 150e6 && f_c_hz <= 1500e6) return Model::HATA_URBAN;
  if (f_c_hz >= 2e9 && f_c_hz <= 6e9) return Model::WINNER2_UMA;
  return Model::FSPM;
}

std::string model_name(Model m) {
  switch (m) {
    case Model::FSPM: return "FSPM";
    case Model::HATA_URBAN: return "HATA_URBAN";
    case Model::WINNER2_UMA: return "WINNER2_UMA";
  }
  return "?";
}

namespace {

double fspm_db(double D, double f_c) {
  return 20.0 * std::log10(D) + 20.0 * std::log10(f_c) +
         20.0 * std::log10(4.0 * kPi / kSpeedOfLight);
}

// Okumura-Hata, urban. f in MHz, distances in km. Coefficients from
// M. Hata, "Empirical formula for propagation loss in land mobile radio
// services", IEEE Trans. Veh. Technol., 1980.
double hata_urban_db(double D, double f_c, double h_t, double h_r, HataCity city) {
  double f_mhz = f_c / 1e6;
  double d_km = D / 1000.0;
  double lf = std::log10(f_mhz);
  double a_hr;
  if (city == HataCity::Large && f_mhz >= 400.0) {
    double t = std::log10(11.75 * h_r);
    a_hr = 3.2 * t * t - 4.97;
  } else if (city == HataCity::Large) {
    double t = std::log10(1.54 * h_r);
    a_hr = 8.29 * t * t - 1.1;
  } else {
    a_hr = (1.1 * lf - 0.7) * h_r - (1.56 * lf - 0.8);
  }
  return 69.55 + 26.16 * lf - 13.82 * std::log10(h_t) - a_hr +
         (44.9 - 6.55 * std::log10(h_t)) * std::log10(d_km);
}

// WINNER II C2 urban macro-cell, LOS branch with breakpoint distance.
// Coefficients from IST-4-027756 WINNER II D1.1.2 part I, Table 4-4.
double winner2_uma_db(double D, double f_c, double h_t, double h_r) {
  double f_ghz = f_c / 1e9;
  double hbs = std::max(h_t - 1.0, 0.1);  // effective antenna heights
  double hms = std::max(h_r - 1.0, 0.1);
  double d_bp = 4.0 * hbs * hms * f_c / kSpeedOfLight;
  if (D < d_bp) {
    return 26.0 * std::log10(D) + 39.0 + 20.0 * std::log10(f_ghz / 5.0);
  }
  return 40.0 * std::log10(D) + 13.47 - 14.0 * std::log10(hbs) -
         14.0 * std::log10(hms) + 6.0 * std::log10(f_ghz / 5.0);
}

}  // namespace

double path_loss(Model model, double D, double f_c, double h_t, double h_r,
                 const PropagationConfig& config) {
  if (D <= 0) throw ValidationError("path_loss: D must be > 0");
  if (f_c <= 0) throw ValidationError("path_loss: f_c must be > 0");
  switch (model) {
    case Model::FSPM:
      return fspm_db(D, f_c);
    case Model::HATA_URBAN:
      if (!(h_t > h_r) || h_r <= 0)
        throw ValidationError("Hata requires h_t > h_r > 0");
      return hata_urban_db(D, f_c, h_t, h_r, config.hata_city_size);
    case Model::WINNER2_UMA:
      if (!(h_t > h_r) || h_r <= 0)
        throw ValidationError("WINNER II requires h_t > h_r > 0");
      return winner2_uma_db(D, f_c, h_t, h_r);
  }
  throw ValidationError("unknown model");
}

std::vector<double> rsrp_calc(const mapio::NetworkParamsSeries& params,
                              const PropagationConfig& config) {
  std::vector<double> out;
  out.reserve(params.length());
  for (const auto& p : params.steps) {
    Model m = config.model_override ? *config.model_override : select_model(p.f_c);
    double pl = path_loss(m, p.D, p.f_c, p.h_t, p.h_r, config);
    out.push_back(p.P_t + config.G_t + config.G_r - pl + config.u);
  }
  return out;
}

PropagationConfig load_prop_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open prop config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  PropagationConfig c;
  c.G_t = j.value("G_t_dBi", 0.0);
  c.G_r = j.value("G_r_dBi", 0.0);
  c.u = j.value("u_dB", 0.0);
  if (j.contains("model_override")) {
    std::string m = j["model_override"].get<std::string>();
    if (m == "FSPM") c.model_override = Model::FSPM;
    else if (m == "HATA_URBAN") c.model_override = Model::HATA_URBAN;
    else if (m == "WINNER2_UMA") c.model_override = Model::WINNER2_UMA;
    else throw ConfigError(path + ": unknown model_override '" + m + "'");
  }
  if (j.value("hata_city_size", std::string("medium")) == "large")
    c.hata_city_size = HataCity::Large;
  return c;
}

}  // namespace channeldiff::propagation
