// pybind11 bindings exposing the main operations: spin algebra, Wiener paths,
// the double-pass SSE / records, QFI bounds, and the three estimators.

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "spinfilter/estimators.hpp"
#include "spinfilter/fisher.hpp"
#include "spinfilter/qfunction.hpp"
#include "spinfilter/runner.hpp"

namespace py = pybind11;
using namespace spinfilter;

namespace {

PureState make_state(double F, const VectorXc& amplitudes) {
  PureState s;
  s.F = F;
  s.amplitudes = amplitudes;
  if (s.amplitudes.size() != spin_dimension(F)) {
    throw Error("amplitude vector length does not match 2F+1");
  }
  return s;
}

}  // namespace

PYBIND11_MODULE(_spinfilter, m) {
  m.doc() = "double-pass atomic magnetometer simulation toolkit";

  py::register_exception<Error>(m, "SpinfilterError");

  // ----- spin algebra -----
  py::class_<SpinOperators>(m, "SpinOperators")
      .def_readonly("F", &SpinOperators::F)
      .def_readonly("fx", &SpinOperators::fx)
      .def_readonly("fy", &SpinOperators::fy)
      .def_readonly("fz", &SpinOperators::fz)
      .def_readonly("fplus_x", &SpinOperators::fplus_x)
      .def_readonly("fminus_x", &SpinOperators::fminus_x);

  m.def("build_spin_operators", &build_spin_operators, py::arg("F"));
  m.def("spin_dimension", &spin_dimension, py::arg("F"));
  m.def(
      "spin_coherent_state",
      [](double F, double theta, double phi) {
        return spin_coherent_state(F, theta, phi).amplitudes;
      },
      py::arg("F"), py::arg("theta"), py::arg("phi"));
  m.def(
      "rotation_y",
      [](double F, double theta) {
        return rotation_y(build_spin_operators(F), theta);
      },
      py::arg("F"), py::arg("theta"));
  m.def(
      "squeezing_operator",
      [](double F, double xi) {
        return squeezing_operator(build_spin_operators(F), xi);
      },
      py::arg("F"), py::arg("xi"));
  m.def(
      "expectation",
      [](double F, const VectorXc& amplitudes, const MatrixXc& op) {
        return expectation(make_state(F, amplitudes), op);
      },
      py::arg("F"), py::arg("amplitudes"), py::arg("op"));
  m.def(
      "q_function",
      [](double F, const VectorXc& amplitudes, int n_theta, int n_phi) {
        const QGrid grid = QGrid::uniform(n_theta, n_phi);
        const Eigen::MatrixXd values =
            q_function(make_state(F, amplitudes), grid);
        return py::make_tuple(grid.theta, grid.phi, values);
      },
      py::arg("F"), py::arg("amplitudes"), py::arg("n_theta") = 100,
      py::arg("n_phi") = 200);

  // ----- sde engine -----
  m.def(
      "wiener_path",
      [](std::uint64_t seed, std::size_t n_steps, double dt) {
        return sde::wiener_path(seed, n_steps, dt).increments;
      },
      py::arg("seed"), py::arg("n_steps"), py::arg("dt"));

  // ----- dynamics -----
  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init([](double F, double M, double K, double B, double gamma,
                       double dt, double t_final) {
             ModelParams p;
             p.F = F;
             p.M = M;
             p.K = K;
             p.B = B;
             p.gamma = gamma;
             p.dt = dt;
             p.t_final = t_final;
             p.validate();
             return p;
           }),
           py::arg("F"), py::arg("M") = 10.0, py::arg("K") = 0.0,
           py::arg("B") = 0.0, py::arg("gamma") = 1.0, py::arg("dt") = 1e-5,
           py::arg("t_final") = 0.1)
      .def_readwrite("F", &ModelParams::F)
      .def_readwrite("M", &ModelParams::M)
      .def_readwrite("K", &ModelParams::K)
      .def_readwrite("B", &ModelParams::B)
      .def_readwrite("gamma", &ModelParams::gamma)
      .def_readwrite("dt", &ModelParams::dt)
      .def_readwrite("t_final", &ModelParams::t_final)
      .def("n_steps", &ModelParams::n_steps);

  py::class_<MeasurementRecord>(m, "MeasurementRecord")
      .def_readonly("params", &MeasurementRecord::params)
      .def_readonly("seed", &MeasurementRecord::seed)
      .def_readonly("dZ", &MeasurementRecord::dZ)
      .def_readonly("times", &MeasurementRecord::times);

  m.def("generate_record", &generate_record, py::arg("params"), py::arg("seed"));
  m.def("save_record_binary", &save_record_binary, py::arg("record"), py::arg("path"));
  m.def("load_record_binary", &load_record_binary, py::arg("path"));
  m.def("save_record_csv", &save_record_csv, py::arg("record"), py::arg("path"));
  m.def("load_record_csv", &load_record_csv, py::arg("path"));
  m.def("innovations", &innovations, py::arg("dZ"), py::arg("fz_expectation"),
        py::arg("params"));

  py::class_<SseTrajectory>(m, "SseTrajectory")
      .def_readonly("times", &SseTrajectory::times)
      .def_readonly("fx_mean", &SseTrajectory::fx_mean)
      .def_readonly("fy_mean", &SseTrajectory::fy_mean)
      .def_readonly("fz_mean", &SseTrajectory::fz_mean)
      .def_property_readonly("final_state", [](const SseTrajectory& t) {
        return t.final_state.amplitudes;
      });

  m.def("run_sse_trajectory", &run_sse_trajectory, py::arg("params"),
        py::arg("seed"), py::arg("sample_every") = 1);
  m.def(
      "sse_ito_step",
      [](double F, const VectorXc& amplitudes, const ModelParams& params,
         double dW) { return sse_ito_step(make_state(F, amplitudes), params, dW).amplitudes; },
      py::arg("F"), py::arg("amplitudes"), py::arg("params"), py::arg("dW"));

  // ----- fisher bounds -----
  py::class_<QfiSample>(m, "QfiSample")
      .def_readonly("seed", &QfiSample::seed)
      .def_readonly("F", &QfiSample::F)
      .def_readonly("qfi", &QfiSample::qfi)
      .def_readonly("bound", &QfiSample::bound);
  py::class_<ScalingPoint>(m, "ScalingPoint")
      .def_readonly("F", &ScalingPoint::F)
      .def_readonly("mean_bound", &ScalingPoint::mean_bound)
      .def_readonly("std_bound", &ScalingPoint::std_bound)
      .def_readonly("n_trajectories", &ScalingPoint::n_trajectories);
  py::class_<PowerLawFit>(m, "PowerLawFit")
      .def_readonly("exponent", &PowerLawFit::exponent)
      .def_readonly("prefactor", &PowerLawFit::prefactor)
      .def_readonly("residual", &PowerLawFit::residual);

  m.def("qfi_sample", &qfi_sample, py::arg("params"), py::arg("deltaB"),
        py::arg("seed"));
  m.def(
      "bound_sweep",
      [](const std::vector<double>& F_list, const ModelParams& params,
         double deltaB, int n_traj, std::uint64_t base_seed, int workers) {
        return bound_sweep(F_list, params, deltaB, n_traj, base_seed, workers).points;
      },
      py::arg("F_list"), py::arg("params"), py::arg("deltaB") = 5e-4,
      py::arg("n_traj") = 20, py::arg("base_seed") = 0, py::arg("workers") = 1);
  m.def("shotnoise_bound", &shotnoise_bound, py::arg("F"), py::arg("t"),
        py::arg("gamma") = 1.0);
  m.def("heisenberg_bound", &heisenberg_bound, py::arg("F"), py::arg("t"),
        py::arg("gamma") = 1.0, py::arg("alpha") = 1.0);
  m.def("kbody_bound", &kbody_bound, py::arg("F"), py::arg("t"),
        py::arg("gamma") = 1.0, py::arg("k") = 2);
  m.def(
      "power_law_fit",
      [](const std::vector<std::pair<double, double>>& points) {
        return power_law_fit(points);
      },
      py::arg("points"));

  // ----- estimators -----
  py::class_<Estimate>(m, "Estimate")
      .def_readonly("b", &Estimate::b)
      .def_readonly("uncertainty", &Estimate::uncertainty);
  py::class_<PfTrace>(m, "PfTrace")
      .def_readonly("times", &PfTrace::times)
      .def_readonly("b_estimate", &PfTrace::b_estimate)
      .def_readonly("b_uncertainty", &PfTrace::b_uncertainty)
      .def_readonly("n_eff", &PfTrace::n_eff);
  py::class_<PfRunResult>(m, "PfRunResult")
      .def_readonly("final_estimate", &PfRunResult::final_estimate)
      .def_readonly("n_eff_final", &PfRunResult::n_eff_final)
      .def_readonly("clip_events", &PfRunResult::clip_events)
      .def_readonly("trace", &PfRunResult::trace);

  m.def("run_particle_filter", &run_particle_filter, py::arg("record"),
        py::arg("n_particles"), py::arg("prior_mean") = 0.0,
        py::arg("prior_var") = 10.0, py::arg("prior_seed") = 0,
        py::arg("trace_stride") = 0);

  py::class_<GaussianState>(m, "GaussianState")
      .def(py::init([](double theta, double xi) {
             return GaussianState{theta, xi};
           }),
           py::arg("theta") = 0.0, py::arg("xi") = 0.0)
      .def_readwrite("theta", &GaussianState::theta)
      .def_readwrite("xi", &GaussianState::xi);
  m.def("projection_step", &projection_step, py::arg("state"), py::arg("dW"),
        py::arg("params"), py::arg("t"));
  m.def("projection_innovations", &projection_innovations, py::arg("dZ"),
        py::arg("state"), py::arg("params"));
  m.def("xi_closed_form", &xi_closed_form, py::arg("t"), py::arg("F"),
        py::arg("M"));

  py::class_<KalmanTrace>(m, "KalmanTrace")
      .def_readonly("times", &KalmanTrace::times)
      .def_readonly("theta", &KalmanTrace::theta)
      .def_readonly("b_estimate", &KalmanTrace::b_estimate)
      .def_readonly("var_theta", &KalmanTrace::var_theta)
      .def_readonly("cov_theta_b", &KalmanTrace::cov_theta_b)
      .def_readonly("var_b", &KalmanTrace::var_b);
  m.def("run_kalman_filter", &run_kalman_filter, py::arg("record"),
        py::arg("prior_mean") = 0.0, py::arg("prior_var") = 10.0,
        py::arg("trace_stride") = 1);
  m.def("run_kalman_covariance", &run_kalman_covariance, py::arg("params"),
        py::arg("prior_var") = 10.0, py::arg("trace_stride") = 1);
  m.def(
      "kalman_variance_rhs",
      [](const Eigen::Matrix2d& V, double t, double F, double M, double K,
         double gamma) { return kalman_variance_rhs(V, t, F, M, K, gamma); },
      py::arg("V"), py::arg("t"), py::arg("F"), py::arg("M"), py::arg("K") = 0.0,
      py::arg("gamma") = 1.0);

  // ----- runner -----
  m.def("sample_deviation", &sample_deviation, py::arg("estimates"),
        py::arg("trueB"));
  m.def("seed_for", &seed_for, py::arg("base_seed"), py::arg("f_index"),
        py::arg("trajectory"));
  m.def(
      "run_config",
      [](const std::string& config_path) {
        const RunResult result = run(parse_config_file(config_path));
        return py::make_tuple(result.files_written, result.summary_json);
      },
      py::arg("config_path"),
      "Execute a scenario from a flat key=value config file; returns "
      "(files_written, summary_json).");
}
