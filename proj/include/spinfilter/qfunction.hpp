#pragma once

// Husimi Q-function Q(theta, phi) = |<theta,phi|psi>|^2 on a spherical grid,
// plus the grid bookkeeping used for normalization checks, CSV export and
// peak detection.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spinfilter/spin_ops.hpp"

namespace spinfilter {

struct QGrid {
  std::vector<double> theta;  // polar angles in [0, pi]
  std::vector<double> phi;    // azimuthal angles in [0, 2 pi)

  // Midpoint grid: theta_i = (i+1/2) pi/n_theta, phi_j = (j+1/2) 2pi/n_phi.
  static QGrid uniform(int n_theta, int n_phi);
};

// Values are returned row-major over the grid: result(i, j) = Q(theta_i, phi_j).
Eigen::MatrixXd q_function(const PureState& state, const QGrid& grid);

// Quadrature estimate of (2F+1)/(4 pi) * integral Q dOmega with sin(theta)
// weights; equals 1 for a normalized state on a fine uniform midpoint grid.
double q_normalization(const Eigen::MatrixXd& values, const QGrid& grid,
                       double F);

// CSV columns theta, phi, q; row-major over the grid.
void write_q_csv(const std::string& path, const QGrid& grid,
                 const Eigen::MatrixXd& values);

struct GridPeak {
  int i = 0;
  int j = 0;
  double value = 0;
};

// Strict local maxima over the 8-neighborhood, with wraparound in phi and
// clamped edges in theta, keeping peaks above rel_threshold * max(values).
std::vector<GridPeak> find_local_maxima(const Eigen::MatrixXd& values,
                                        double rel_threshold);

// Euclidean distance in grid-index space with phi wraparound.
double peak_separation_cells(const GridPeak& a, const GridPeak& b, int n_phi);

}  // namespace spinfilter
