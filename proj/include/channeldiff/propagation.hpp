#pragma once

#include <optional>
#include <string>
#include <vector>

#include "channeldiff/mapio.hpp"

namespace channeldiff::propagation {

enum class Model { FSPM, HATA_URBAN, WINNER2_UMA };

enum class HataCity { Medium, Large };

struct PropagationConfig {
  double G_t = 0.0;  // dBi
  double G_r = 0.0;  // dBi
  double u = 0.0;    // residual calibration term, dB
  std::optional<Model> model_override;
  HataCity hata_city_size = HataCity::Medium;
};

// Band selection: Hata 150-1500 MHz, WINNER II 2-6 GHz, FSPM elsewhere.
Model select_model(double f_c_hz);

std::string model_name(Model m);

// Path loss in dB. D in meters, f_c in Hz, antenna altitudes in meters.
double path_loss(Model model, double D, double f_c, double h_t, double h_r,
                 const PropagationConfig& config = {});

// Per-timestep P_r = P_t + G_t + G_r - PL + u.
std::vector<double> rsrp_calc(const mapio::NetworkParamsSeries& params,
                              const PropagationConfig& config = {});

PropagationConfig load_prop_config(const std::string& path);

}  // namespace channeldiff::propagation
