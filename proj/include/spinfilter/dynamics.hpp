#pragma once

// The double-pass conditional dynamics in its three forms: pure-state Ito SSE,
// adjoint density-matrix filter, and the explicit Stratonovich drift, plus
// measurement-record generation.
//
// Ito SSE (gamma = gyromagnetic ratio, rates M and K, field B):
//   d|psi> = [ i gamma B fy - M/2 (fz - <fz>)^2
//              + i sqrt(KM) fy (fz + <fz>) - K/2 fy^2 ] |psi> dt
//          + [ sqrt(M) (fz - <fz>) + i sqrt(K) fy ] |psi> dW
// Filters consume records dZ through the innovations
//   dW = dZ - 2 sqrt(M) <fz> dt,
// generators consume noise dW directly and emit dZ = dW + 2 sqrt(M) <fz> dt.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spinfilter/sde.hpp"
#include "spinfilter/spin_ops.hpp"

namespace spinfilter {

struct ModelParams {
  double F = 0.5;
  double M = 0;        // first-pass measurement rate, units of nu
  double K = 0;        // second-pass rate; K = 0 recovers the single-pass model
  double B = 0;        // magnetic field, units of nu/gamma
  double gamma = 1.0;
  double dt = 1e-5;
  double t_final = 0.1;

  std::size_t n_steps() const;
  void validate() const;
};

struct MeasurementRecord {
  ModelParams params;  // with the true B used for generation
  std::uint64_t seed = 0;
  std::vector<double> dZ;
  std::vector<double> times;  // start time of each increment
};

void save_record_binary(const MeasurementRecord& rec, const std::string& path);
MeasurementRecord load_record_binary(const std::string& path);
void save_record_csv(const MeasurementRecord& rec, const std::string& path);
MeasurementRecord load_record_csv(const std::string& path);

// dZ - 2 sqrt(M) <fz> dt
double innovations(double dZ, double fz_expectation, const ModelParams& params);

// One-trajectory stepper with banded operator application.  Holds scratch
// buffers, so each concurrent trajectory needs its own instance; all members
// of ModelParams except B are fixed at construction (B may be overridden per
// step, which is what the particle filter does).
class DoublePassStepper {
 public:
  explicit DoublePassStepper(const ModelParams& params);

  int dim() const { return d_; }
  const ModelParams& params() const { return params_; }

  double fz_mean(const VectorXc& psi) const;       // assumes psi normalized
  double fz_variance(const VectorXc& psi) const;

  // One predictor-corrector step driven by a Wiener increment; renormalizes.
  void step_noise(VectorXc& psi, double dW) { step_noise(psi, dW, params_.B); }
  void step_noise(VectorXc& psi, double dW, double B);

  // Filter form: reconstructs dW = dZ - 2 sqrt(M) <fz> dt at the current
  // state, then advances exactly as step_noise.  Returns the reconstructed dW.
  double step_record(VectorXc& psi, double dZ) {
    return step_record(psi, dZ, params_.B);
  }
  double step_record(VectorXc& psi, double dZ, double B);

  // drift/diffusion of the Ito SSE applied to psi (used by tests and the
  // generic-SDE adapter); e is <fz> of the normalized state.
  void apply_drift(const VectorXc& psi, double e, double B, VectorXc& out) const;
  void apply_diffusion(const VectorXc& psi, double e, VectorXc& out) const;

 private:
  ModelParams params_;
  int d_;
  // real band coefficients; suffixes: _0 main diagonal, _1 first
  // super/subdiagonal pair (upper +w, lower -w), _2 second pair (symmetric)
  Eigen::ArrayXd m_;         // fz eigenvalues F..-F
  Eigen::ArrayXd w_;         // (i fy)(i, i+1),  size d-1
  Eigen::ArrayXd k0_0_, k0_1u_, k0_1l_, k0_2_;  // constant drift bands
  Eigen::ArrayXd k1_0_;                         // <fz>-linear drift diagonal
  double k1_1_ = 0;                             // <fz>-linear off-diag scale
  VectorXc a0_, b0_, pred_, a1_;
};

// Single-step operation wrappers around the stepper.
PureState sse_ito_step(const PureState& state, const ModelParams& params, double dW);

// Explicit Stratonovich drift of the SSE (Ito drift minus the conversion
// term), in closed operator form:
//   [ i gamma B fy - M ((fz - <fz>)^2 - Var fz) - sqrt(KM)/2 fx
//     + 2 i sqrt(KM) <fz> fy + i sqrt(KM) <fz fy> ] |psi>
VectorXc sse_stratonovich_drift(const PureState& state, const ModelParams& params);

// Adjoint (density-matrix) filter.  The step applies the same one-step
// predictor-corrector propagator as the SSE in sandwich form
// rho -> Mop rho Mop^dag / tr(...), which keeps rho positive and reproduces
// the pure-state step exactly on rank-one states.
class AdjointFilter {
 public:
  explicit AdjointFilter(const ModelParams& params);

  // One step driven by a record increment; trace renormalized, Hermiticity
  // enforced by symmetrization.  Returns the reconstructed innovations dW.
  double step_record(MatrixXc& rho, double dZ);
  // Same propagator driven by a given Wiener increment.
  void step_noise(MatrixXc& rho, double dW);

  // Most negative eigenvalue (diagnostic; >= -1e-12 in exact arithmetic).
  static double min_eigenvalue(const MatrixXc& rho);

 private:
  void apply(MatrixXc& rho, double dW);

  ModelParams params_;
  int d_;
  MatrixXc fz_, a_const_, a_lin_, b_const_;
};

DensityOp adjoint_filter_step(const DensityOp& rho, const ModelParams& params, double dZ);

// Integrates the SSE at the true B of params driven by wiener_path(seed, ...)
// and emits dZ_k = dW_k + 2 sqrt(M) <fz>_k dt.
MeasurementRecord generate_record(const ModelParams& params, std::uint64_t seed);

struct SseTrajectory {
  std::vector<double> times;
  std::vector<double> fx_mean, fy_mean, fz_mean;
  PureState final_state;
};

// Runs the noise-driven SSE from |F,+F_x>, sampling expectations every
// sample_every steps.
SseTrajectory run_sse_trajectory(const ModelParams& params, std::uint64_t seed,
                                 std::size_t sample_every = 1);

// The SSE as a generic real SDE system on [Re psi; Im psi] for the sde
// engine; the Stratonovich variant uses the closed-form converted drift.
sde::SdeSystem make_sse_system(const ModelParams& params, sde::Calculus calculus);
std::vector<double> pack_state(const VectorXc& psi);
VectorXc unpack_state(std::span<const double> x);

}  // namespace spinfilter
