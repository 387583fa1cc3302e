#pragma once

// Collective spin operators and states for a single ensemble of total spin F.
//
// Basis convention used everywhere: the Fz eigenbasis ordered
// m = F, F-1, ..., -F, so fz is diagonal with decreasing entries and the
// ladder operators are banded.  All matrices are dense complex.

#include <complex>
#include <string>

#include <Eigen/Dense>

#include "spinfilter/error.hpp"

namespace spinfilter {

using Complex = std::complex<double>;
using VectorXc = Eigen::VectorXcd;
using MatrixXc = Eigen::MatrixXcd;

// 2F must be a positive integer (F = 1/2, 1, 3/2, ...).
bool is_valid_spin(double F);
int spin_dimension(double F);  // 2F + 1

struct SpinOperators {
  double F = 0;
  MatrixXc fx, fy, fz;
  MatrixXc fplus_x, fminus_x;  // ladder operators about x: fy +- i fz
};

SpinOperators build_spin_operators(double F);

struct PureState {
  double F = 0;
  VectorXc amplitudes;

  double norm() const { return amplitudes.norm(); }
  void normalize() { amplitudes /= amplitudes.norm(); }
};

struct DensityOp {
  double F = 0;
  MatrixXc matrix;
};

// |m = F> in the Fz eigenbasis.
PureState highest_weight_state(double F);

// The +F eigenstate of sin(theta)cos(phi) fx + sin(theta)sin(phi) fy +
// cos(theta) fz, built as exp(-i phi fz) exp(-i theta fy) |F, F>.
PureState spin_coherent_state(double F, double theta, double phi);

// exp(-i theta fy)
MatrixXc rotation_y(const SpinOperators& ops, double theta);
// exp(-2 i xi (fz fy + fy fz))
MatrixXc squeezing_operator(const SpinOperators& ops, double xi);

Complex expectation(const PureState& state, const MatrixXc& op);
Complex expectation(const DensityOp& rho, const MatrixXc& op);

double variance(const PureState& state, const MatrixXc& op);

DensityOp pure_to_density(const PureState& state);

// 1/2 ||rho - sigma||_1
double trace_distance(const MatrixXc& rho, const MatrixXc& sigma);

// exp(i s H) for Hermitian H, via eigendecomposition; unitary to machine
// precision.
MatrixXc exp_i_hermitian(const MatrixXc& hermitian, double s);

}  // namespace spinfilter
