#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "channeldiff/diffusion.hpp"
#include "channeldiff/metrics.hpp"
#include "channeldiff/multipath.hpp"
#include "channeldiff/occlusion.hpp"

namespace py = pybind11;
using namespace channeldiff;

namespace {

propagation::Model model_from_name(const std::string& name) {
  if (name == "fspm") return propagation::Model::FSPM;
  if (name == "hata_urban") return propagation::Model::HATA_URBAN;
  if (name == "winner2_uma") return propagation::Model::WINNER2_UMA;
  throw ValidationError("unknown model: " + name);
}

}  // namespace

PYBIND11_MODULE(_channeldiff, m) {
  m.doc() = "Radio-channel physics features and diffusion-model utilities";

  m.def("path_loss",
        [](const std::string& model, double D, double f_c, double h_t, double h_r) {
          return propagation::path_loss(model_from_name(model), D, f_c, h_t, h_r);
        },
        py::arg("model"), py::arg("distance_m"), py::arg("f_c_hz"),
        py::arg("h_t_m"), py::arg("h_r_m"),
        "Path loss in dB for 'fspm', 'hata_urban' or 'winner2_uma'");
  m.def("select_model",
        [](double f_c) { return propagation::model_name(propagation::select_model(f_c)); },
        py::arg("f_c_hz"), "Band-based model selection");

  m.def("knife_edge_loss", &occlusion::knife_edge_loss, py::arg("v"),
        "Knife-edge diffraction loss in dB");
  m.def("fresnel_radius", &geometry::fresnel_radius, py::arg("wavelength_m"),
        py::arg("d_bs_m"), py::arg("d_ue_m"), "First Fresnel zone radius");

  m.def("jsd", &metrics::jsd, py::arg("p_samples"), py::arg("q_samples"),
        py::arg("n_bins") = 64);
  m.def("nrmse", &metrics::nrmse, py::arg("y"), py::arg("yhat"));
  m.def("mae", &metrics::mae, py::arg("y"), py::arg("yhat"));

  py::class_<diffusion::NoiseSchedule>(m, "NoiseSchedule")
      .def_readonly("K", &diffusion::NoiseSchedule::K)
      .def_readonly("beta", &diffusion::NoiseSchedule::beta)
      .def_readonly("alpha", &diffusion::NoiseSchedule::alpha)
      .def("alpha_at", &diffusion::NoiseSchedule::alpha_at)
      .def("b_at", &diffusion::NoiseSchedule::b_at);
  m.def("make_schedule",
        [](int K, double beta_start, double beta_end, const std::string& mode) {
          return diffusion::make_schedule(
              K, beta_start, beta_end,
              mode == "standard" ? diffusion::NoiseCoeffMode::STANDARD
                                 : diffusion::NoiseCoeffMode::LINEAR);
        },
        py::arg("K") = 400, py::arg("beta_start") = 1e-4,
        py::arg("beta_end") = 0.02, py::arg("mode") = "linear");
  m.def("forward_noise", &diffusion::forward_noise, py::arg("x0"), py::arg("k"),
        py::arg("eps"), py::arg("schedule"));
  m.def("prior_noise", &diffusion::prior_noise, py::arg("x0_hat"), py::arg("k"),
        py::arg("schedule"));
  m.def("delta_target", &diffusion::delta_target, py::arg("eps"), py::arg("e_of"),
        py::arg("prior_eps_star"));

  m.def("positional_encoding",
        [](int T, int D) {
          auto t = neural::positional_encoding(T, D);
          std::vector<std::vector<double>> rows(T, std::vector<double>(D));
          for (int i = 0; i < T; ++i)
            for (int j = 0; j < D; ++j)
              rows[i][j] = t->v[static_cast<size_t>(i) * D + j];
          return rows;
        },
        py::arg("T"), py::arg("D_pe") = 64);
}
