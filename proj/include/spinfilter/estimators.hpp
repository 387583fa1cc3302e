#pragma once

// Online magnetic-field estimators driven by a measurement record: the
// quantum particle filter (exact per-particle SSE dynamics), the Gaussian
// projection filter in (theta, xi) coordinates, and the small-angle Kalman
// filter with joint (theta, B) state.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spinfilter/dynamics.hpp"

namespace spinfilter {

// ---------------------------------------------------------------------------
// Quantum particle filter

struct ParticleEnsemble {
  double F = 0;
  std::vector<double> weights;   // nonnegative, sum 1
  std::vector<double> b_values;  // fixed at initialization (no resampling)
  std::vector<VectorXc> states;
  long clip_events = 0;  // negative weight excursions clipped to 0

  std::size_t size() const { return weights.size(); }
};

// B_i ~ Normal(prior_mean, prior_var) i.i.d., uniform weights, every state
// |F, +F_x>.
ParticleEnsemble init_ensemble(int N, double prior_mean, double prior_var,
                               double F, std::uint64_t base_seed);

struct Estimate {
  double b = 0;            // weighted mean of B_i
  double uncertainty = 0;  // weighted standard deviation
};

Estimate estimate(const ParticleEnsemble& ensemble);
double effective_sample_size(const ParticleEnsemble& ensemble);

// Two-phase step: the shared innovations
//   dW = dZ - 2 sqrt(M) sum_i p_i <fz>_i dt
// updates the weights dp_i = 2 sqrt(M)(<fz>_i - <fz>_ens) p_i dW (clipped at
// 0, renormalized), then every particle state advances one SSE step at its
// own B_i driven by dW.
class ParticleFilter {
 public:
  ParticleFilter(const ModelParams& params);
  void step(ParticleEnsemble& ensemble, double dZ);

 private:
  ModelParams params_;
  DoublePassStepper stepper_;
  std::vector<double> fz_means_;
};

ParticleEnsemble particle_step(const ParticleEnsemble& ensemble, double dZ,
                               const ModelParams& params);

struct PfTrace {
  std::vector<double> times, b_estimate, b_uncertainty, n_eff;
};

struct PfRunResult {
  Estimate final_estimate;
  double n_eff_final = 0;
  long clip_events = 0;
  PfTrace trace;  // filled at trace_stride > 0
};

// Runs the filter over a full record.  prior_seed seeds the B_i draws.
PfRunResult run_particle_filter(const MeasurementRecord& record, int n_particles,
                                double prior_mean, double prior_var,
                                std::uint64_t prior_seed,
                                std::size_t trace_stride = 0);

// CSV columns t, B_estimate, B_uncertainty, N_eff.
void write_pf_trace_csv(const std::string& path, const PfTrace& trace);

// ---------------------------------------------------------------------------
// Gaussian projection filter

struct GaussianState {
  double theta = 0;  // rotation angle about y
  double xi = 0;     // squeezing parameter
};

// Ito form of the projected filter:
//   dtheta = [B gamma - M/4 e^{-16 F xi} sin(2 theta)
//             + 2 F sqrt(KM) sin(theta)] dt
//            - [sqrt(M) e^{-8 F xi} cos(theta) + sqrt(K)] dW
//   dxi    = M/4 e^{-8 F xi} cos^2(theta) dt
// advanced with the same predictor-corrector as the main engine.  The
// innovations for record-driven use are dW = dZ + 2 F sqrt(M) sin(theta) dt.
GaussianState projection_step(const GaussianState& g, double dW,
                              const ModelParams& params, double t);

struct ProjectionRates {
  double dtheta = 0;
  double dxi = 0;
};
// Instantaneous Ito drift rates and the theta diffusion coefficient.
ProjectionRates projection_drift(const GaussianState& g, const ModelParams& params);
double projection_diffusion(const GaussianState& g, const ModelParams& params);

double projection_innovations(double dZ, const GaussianState& g,
                              const ModelParams& params);

// Small-angle closed form xi_t = ln(1 + 2 F M t) / (8 F).
double xi_closed_form(double t, double F, double M);

// ---------------------------------------------------------------------------
// Small-angle Kalman filter

struct KalmanState {
  Eigen::Vector2d x = Eigen::Vector2d::Zero();  // (theta estimate, B estimate)
  Eigen::Matrix2d V = Eigen::Matrix2d::Zero();  // covariance
  long psd_violations = 0;                      // diagnostic counter
};

KalmanState kalman_initial(double F, double prior_mean, double prior_var);

// One Euler step of the estimate SDE and covariance ODE with the printed
// time-dependent coefficients (innovations dW = dZ + 2 F sqrt(M) theta dt).
KalmanState kalman_step(const KalmanState& k, double dZ,
                        const ModelParams& params, double t);

// Right-hand side of the covariance ODE.  Independent of the second-pass
// rate: the sqrt(KM) terms of the system matrices cancel identically, so K
// does not appear below (the signature keeps it to state that fact).
Eigen::Matrix2d kalman_variance_rhs(const Eigen::Matrix2d& V, double t,
                                    double F, double M, double K,
                                    double gamma = 1.0);

struct KalmanTrace {
  std::vector<double> times, theta, b_estimate, var_theta, cov_theta_b, var_b;
};

// Runs the filter over a full record (estimate + covariance).
KalmanTrace run_kalman_filter(const MeasurementRecord& record, double prior_mean,
                              double prior_var, std::size_t trace_stride = 1);

// Covariance-only integration (no record needed; the covariance ODE is
// autonomous given the initial condition).
KalmanTrace run_kalman_covariance(const ModelParams& params, double prior_var,
                                  std::size_t trace_stride = 1);

// CSV columns t, theta, B_estimate, var_theta, cov_theta_b, var_b.
void write_kalman_trace_csv(const std::string& path, const KalmanTrace& trace);

}  // namespace spinfilter
