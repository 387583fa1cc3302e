#pragma once

// Finite-difference quantum Fisher information and Cramer-Rao lower bounds
// over trajectory ensembles, with the analytic shotnoise / Heisenberg /
// k-body baselines and log-log power-law fits.

#include <cstdint>
#include <string>
#include <vector>

#include "spinfilter/dynamics.hpp"

namespace spinfilter {

struct QfiSample {
  std::uint64_t seed = 0;
  double F = 0;
  double qfi = 0;    // >= 0 by construction
  double bound = 0;  // 1 / sqrt(qfi)
};

// QFI from three co-evolved pure states at B + deltaB, B, B - deltaB:
//   qfi = 4 Tr{ D^2 rho_0 },  D = (rho_{+} - rho_{-}) / (2 deltaB),
// evaluated through overlaps (the factor 4 comes from L = 2 d(rho)/dB).
double qfi_from_states(const VectorXc& psi_plus, const VectorXc& psi_zero,
                       const VectorXc& psi_minus, double deltaB);

// Co-evolves the three trajectories from |F,+F_x> on one noise path (params.B
// is the expansion point) and evaluates the finite difference at t_final.
QfiSample qfi_sample(const ModelParams& params, double deltaB, std::uint64_t seed);

struct ScalingPoint {
  double F = 0;
  double mean_bound = 0;
  double std_bound = 0;
  int n_trajectories = 0;
  std::vector<double> bounds;  // per-trajectory values, in seed order
};

struct SweepFailure {
  double F = 0;
  int trajectory = 0;
  std::string error;
};

struct BoundSweepResult {
  std::vector<ScalingPoint> points;
  std::vector<SweepFailure> failures;
};

// For each F: per-trajectory bounds averaged over n_traj seeds.  Trajectory i
// at F-index j uses seed base_seed + j*1'000'000 + i, so sweeps sharing
// base_seed and F_list co-sample their noise realizations.  A point is
// dropped only if more than 10% of its trajectories fail.
BoundSweepResult bound_sweep(const std::vector<double>& F_list,
                             const ModelParams& params_template, double deltaB,
                             int n_traj, std::uint64_t base_seed,
                             int workers = 1);

double shotnoise_bound(double F, double t, double gamma);
double heisenberg_bound(double F, double t, double gamma, double alpha);
double kbody_bound(double F, double t, double gamma, int k);

struct PowerLawFit {
  double exponent = 0;
  double prefactor = 0;
  double residual = 0;  // Euclidean norm of log-space residuals
};

// Least-squares line fit in log-log coordinates; all inputs must be positive.
PowerLawFit power_law_fit(const std::vector<std::pair<double, double>>& points);

// CSV: F, mean_bound, std_bound, n_traj, shotnoise, heisenberg, kbody2
// (baselines at time t with gamma, alpha = 1, k = 2).
void write_sweep_csv(const std::string& path, const BoundSweepResult& sweep,
                     double t, double gamma);

std::uint64_t seed_for(std::uint64_t base_seed, std::size_t f_index,
                       std::size_t trajectory);

}  // namespace spinfilter
