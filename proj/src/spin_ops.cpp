#include "spinfilter/spin_ops.hpp"

#include <cmath>

namespace spinfilter {

namespace {
constexpr double kHalfIntegerTol = 1e-9;
}

bool is_valid_spin(double F) {
  if (!(F > 0) || !std::isfinite(F)) return false;
  const double twoF = 2.0 * F;
  return std::abs(twoF - std::llround(twoF)) < kHalfIntegerTol &&
         std::llround(twoF) >= 1;
}

int spin_dimension(double F) {
  if (!is_valid_spin(F)) {
    throw Error("invalid total spin F = " + std::to_string(F) +
                "; 2F must be a positive integer");
  }
  return static_cast<int>(std::llround(2.0 * F)) + 1;
}

SpinOperators build_spin_operators(double F) {
  const int d = spin_dimension(F);
  SpinOperators ops;
  ops.F = F;
  ops.fz = MatrixXc::Zero(d, d);

  MatrixXc fplus = MatrixXc::Zero(d, d);   // raising about z
  MatrixXc fminus = MatrixXc::Zero(d, d);  // lowering about z
  for (int i = 0; i < d; ++i) {
    const double m = F - i;
    ops.fz(i, i) = m;
    if (i > 0) {
      // <m+1| F+ |m>, row i-1 holds m+1
      fplus(i - 1, i) = std::sqrt(F * (F + 1) - m * (m + 1));
    }
    if (i < d - 1) {
      fminus(i + 1, i) = std::sqrt(F * (F + 1) - m * (m - 1));
    }
  }
  ops.fx = 0.5 * (fplus + fminus);
  ops.fy = Complex(0, -0.5) * (fplus - fminus);
  ops.fplus_x = ops.fy + Complex(0, 1) * ops.fz;
  ops.fminus_x = ops.fy - Complex(0, 1) * ops.fz;
  return ops;
}

PureState highest_weight_state(double F) {
  const int d = spin_dimension(F);
  PureState s;
  s.F = F;
  s.amplitudes = VectorXc::Zero(d);
  s.amplitudes(0) = 1.0;
  return s;
}

MatrixXc exp_i_hermitian(const MatrixXc& hermitian, double s) {
  Eigen::SelfAdjointEigenSolver<MatrixXc> eig(hermitian);
  if (eig.info() != Eigen::Success) {
    throw Error("eigendecomposition failed in exp_i_hermitian");
  }
  const auto& U = eig.eigenvectors();
  VectorXc phases(eig.eigenvalues().size());
  for (Eigen::Index k = 0; k < phases.size(); ++k) {
    phases(k) = std::polar(1.0, s * eig.eigenvalues()(k));
  }
  return U * phases.asDiagonal() * U.adjoint();
}

MatrixXc rotation_y(const SpinOperators& ops, double theta) {
  return exp_i_hermitian(ops.fy, -theta);
}

MatrixXc squeezing_operator(const SpinOperators& ops, double xi) {
  if (!std::isfinite(xi)) throw Error("squeezing parameter must be finite");
  const MatrixXc gen = ops.fz * ops.fy + ops.fy * ops.fz;
  return exp_i_hermitian(gen, -2.0 * xi);
}

PureState spin_coherent_state(double F, double theta, double phi) {
  const SpinOperators ops = build_spin_operators(F);
  PureState s = highest_weight_state(F);
  s.amplitudes = rotation_y(ops, theta) * s.amplitudes;
  const int d = spin_dimension(F);
  for (int i = 0; i < d; ++i) {
    s.amplitudes(i) *= std::polar(1.0, -phi * (F - i));
  }
  s.normalize();
  return s;
}

Complex expectation(const PureState& state, const MatrixXc& op) {
  if (op.rows() != state.amplitudes.size() ||
      op.cols() != state.amplitudes.size()) {
    throw Error("operator/state dimension mismatch in expectation");
  }
  return state.amplitudes.dot(op * state.amplitudes);
}

Complex expectation(const DensityOp& rho, const MatrixXc& op) {
  if (op.rows() != rho.matrix.rows() || op.cols() != rho.matrix.cols()) {
    throw Error("operator/state dimension mismatch in expectation");
  }
  return (op * rho.matrix).trace();
}

double variance(const PureState& state, const MatrixXc& op) {
  const double m1 = expectation(state, op).real();
  const double m2 = expectation(state, MatrixXc(op * op)).real();
  return m2 - m1 * m1;
}

DensityOp pure_to_density(const PureState& state) {
  DensityOp rho;
  rho.F = state.F;
  rho.matrix = state.amplitudes * state.amplitudes.adjoint();
  return rho;
}

double trace_distance(const MatrixXc& rho, const MatrixXc& sigma) {
  Eigen::SelfAdjointEigenSolver<MatrixXc> eig(rho - sigma);
  return 0.5 * eig.eigenvalues().cwiseAbs().sum();
}

}  // namespace spinfilter
