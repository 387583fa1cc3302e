#include <doctest.h>

#include <cmath>
#include <complex>

#include "spinfilter/qfunction.hpp"
#include "spinfilter/rng.hpp"
#include "spinfilter/spin_ops.hpp"

using namespace spinfilter;

namespace {

double max_abs(const MatrixXc& m) { return m.cwiseAbs().maxCoeff(); }

PureState random_state(double F, std::uint64_t seed) {
  PureState s;
  s.F = F;
  const int d = spin_dimension(F);
  s.amplitudes.resize(d);
  for (int i = 0; i < d; ++i) {
    s.amplitudes(i) =
        Complex(counter_normal(seed, 2 * i), counter_normal(seed, 2 * i + 1));
  }
  s.normalize();
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("spin_ops");

TEST_CASE("spin validation") {
  CHECK(is_valid_spin(0.5));
  CHECK(is_valid_spin(1.0));
  CHECK(is_valid_spin(9.5));
  CHECK_FALSE(is_valid_spin(0.0));
  CHECK_FALSE(is_valid_spin(-1.0));
  CHECK_FALSE(is_valid_spin(0.7));
  CHECK_THROWS_AS(build_spin_operators(0.3), Error);
  CHECK_THROWS_AS(build_spin_operators(-2), Error);
}

TEST_CASE("F=1/2 matrices are the Pauli matrices over 2") {
  const SpinOperators ops = build_spin_operators(0.5);
  CHECK(ops.fz(0, 0) == Complex(0.5, 0));
  CHECK(ops.fz(1, 1) == Complex(-0.5, 0));
  CHECK(std::abs(ops.fy(0, 1) - Complex(0, -0.5)) < 1e-15);
  CHECK(std::abs(ops.fy(1, 0) - Complex(0, 0.5)) < 1e-15);
  CHECK(std::abs(ops.fx(0, 1) - Complex(0.5, 0)) < 1e-15);
}

TEST_CASE("F=1 fz eigenvalues") {
  const SpinOperators ops = build_spin_operators(1.0);
  CHECK(ops.fz(0, 0).real() == doctest::Approx(1.0));
  CHECK(ops.fz(1, 1).real() == doctest::Approx(0.0));
  CHECK(ops.fz(2, 2).real() == doctest::Approx(-1.0));
}

TEST_CASE("algebra invariants for F = 1/2 .. 10") {
  const Complex I(0, 1);
  for (int twoF = 1; twoF <= 20; ++twoF) {
    const double F = 0.5 * twoF;
    const SpinOperators ops = build_spin_operators(F);
    const int d = spin_dimension(F);
    const MatrixXc id = MatrixXc::Identity(d, d);

    CHECK(max_abs(ops.fx - ops.fx.adjoint()) < 1e-10);
    CHECK(max_abs(ops.fy - ops.fy.adjoint()) < 1e-10);
    CHECK(max_abs(ops.fz - ops.fz.adjoint()) < 1e-10);

    CHECK(max_abs(ops.fx * ops.fy - ops.fy * ops.fx - I * ops.fz) < 1e-10);
    CHECK(max_abs(ops.fy * ops.fz - ops.fz * ops.fy - I * ops.fx) < 1e-10);
    CHECK(max_abs(ops.fz * ops.fx - ops.fx * ops.fz - I * ops.fy) < 1e-10);

    const MatrixXc casimir =
        ops.fx * ops.fx + ops.fy * ops.fy + ops.fz * ops.fz;
    CHECK(max_abs(casimir - F * (F + 1) * id) < 1e-10);

    CHECK(max_abs(ops.fminus_x - ops.fplus_x.adjoint()) < 1e-10);
    CHECK(max_abs(ops.fplus_x * ops.fminus_x - ops.fminus_x * ops.fplus_x -
                  2.0 * ops.fx) < 1e-10);

    const MatrixXc rot = rotation_y(ops, 0.7);
    CHECK(max_abs(rot * rot.adjoint() - id) < 1e-10);
    const MatrixXc sq = squeezing_operator(ops, 0.01);
    CHECK(max_abs(sq * sq.adjoint() - id) < 1e-10);
  }
}

TEST_CASE("F=5 Casimir is 30 I") {
  const SpinOperators ops = build_spin_operators(5.0);
  const MatrixXc casimir = ops.fx * ops.fx + ops.fy * ops.fy + ops.fz * ops.fz;
  CHECK(max_abs(casimir - 30.0 * MatrixXc::Identity(11, 11)) < 1e-10);
}

TEST_CASE("x-polarized coherent state") {
  const SpinOperators ops = build_spin_operators(20.0);
  const PureState s = spin_coherent_state(20.0, 0.5 * M_PI, 0.0);
  CHECK(expectation(s, ops.fx).real() == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(std::abs(expectation(s, ops.fy)) < 1e-10);
  CHECK(std::abs(expectation(s, ops.fz)) < 1e-10);
}

TEST_CASE("coherent state at theta=0 is the highest weight state") {
  const PureState s = spin_coherent_state(0.5, 0.0, 0.0);
  CHECK(std::abs(s.amplitudes(0) - Complex(1, 0)) < 1e-12);
  CHECK(std::abs(s.amplitudes(1)) < 1e-12);
}

TEST_CASE("coherent state is the +F eigenstate of n.F") {
  const double F = 2.0, theta = M_PI / 3.0, phi = M_PI / 4.0;
  const SpinOperators ops = build_spin_operators(F);
  const PureState s = spin_coherent_state(F, theta, phi);
  const MatrixXc nf = std::sin(theta) * std::cos(phi) * ops.fx +
                      std::sin(theta) * std::sin(phi) * ops.fy +
                      std::cos(theta) * ops.fz;
  CHECK((nf * s.amplitudes - F * s.amplitudes).norm() < 1e-10);

  // dense eigensolver oracle: overlap with the top eigenvector has modulus 1
  Eigen::SelfAdjointEigenSolver<MatrixXc> eig(nf);
  const VectorXc top = eig.eigenvectors().col(spin_dimension(F) - 1);
  CHECK(std::abs(std::abs(top.dot(s.amplitudes)) - 1.0) < 1e-10);
}

TEST_CASE("rotation conjugation identities") {
  const double F = 3.0, theta = 0.3;
  const SpinOperators ops = build_spin_operators(F);
  const MatrixXc Y = rotation_y(ops, theta);
  CHECK(max_abs(Y.adjoint() * ops.fz * Y -
                (std::cos(theta) * ops.fz - std::sin(theta) * ops.fx)) < 1e-10);
  CHECK(max_abs(Y.adjoint() * ops.fx * Y -
                (std::cos(theta) * ops.fx + std::sin(theta) * ops.fz)) < 1e-10);
  CHECK(max_abs(rotation_y(ops, 0.0) - MatrixXc::Identity(7, 7)) < 1e-14);
}

TEST_CASE("rotation sign convention: <fz> = -F sin(theta) on |F,+F_x>") {
  // frozen from the matrix-exponential oracle; every module inherits it
  const SpinOperators ops = build_spin_operators(1.0);
  PureState s = spin_coherent_state(1.0, 0.5 * M_PI, 0.0);
  s.amplitudes = rotation_y(ops, 0.5 * M_PI) * s.amplitudes;
  CHECK(expectation(s, ops.fz).real() == doctest::Approx(-1.0).epsilon(1e-10));
}

TEST_CASE("rotation composes with coherent states up to global phase") {
  const double F = 4.0, theta = 0.3;
  const SpinOperators ops = build_spin_operators(F);
  const PureState base = spin_coherent_state(F, 0.5 * M_PI, 0.0);
  const VectorXc rotated = rotation_y(ops, theta) * base.amplitudes;
  const PureState target = spin_coherent_state(F, 0.5 * M_PI + theta, 0.0);
  CHECK(std::abs(std::abs(target.amplitudes.dot(rotated)) - 1.0) < 1e-10);
}

TEST_CASE("squeezing reduces Var(fz) and grows Var(fy)") {
  const double F = 10.0, xi = 0.005;
  const SpinOperators ops = build_spin_operators(F);
  PureState s = spin_coherent_state(F, 0.5 * M_PI, 0.0);
  CHECK(variance(s, ops.fz) == doctest::Approx(F / 2).epsilon(1e-10));
  s.amplitudes = squeezing_operator(ops, xi) * s.amplitudes;
  CHECK(variance(s, ops.fz) < F / 2);
  CHECK(variance(s, ops.fy) > F / 2);
  CHECK(max_abs(squeezing_operator(ops, 0.0) -
                MatrixXc::Identity(21, 21)) < 1e-14);
}

TEST_CASE("expectation values and dimension checks") {
  const double F = 3.0;
  const SpinOperators ops = build_spin_operators(F);
  const PureState s = spin_coherent_state(F, 0.5 * M_PI, 0.0);
  CHECK(std::abs(expectation(s, ops.fz)) < 1e-12);
  // projection noise <fz^2> = F/2 on the x-polarized coherent state
  CHECK(expectation(s, MatrixXc(ops.fz * ops.fz)).real() ==
        doctest::Approx(F / 2).epsilon(1e-10));
  const DensityOp rho = pure_to_density(s);
  CHECK(expectation(rho, ops.fx).real() == doctest::Approx(F).epsilon(1e-12));
  CHECK(std::abs(rho.matrix.trace() - Complex(1, 0)) < 1e-12);

  const SpinOperators small = build_spin_operators(0.5);
  CHECK_THROWS_AS(expectation(s, small.fz), Error);
}

TEST_CASE("q function: self overlap, normalization, phase invariance") {
  const double F = 5.0;
  const double theta0 = 1.1, phi0 = 2.3;
  const PureState s = spin_coherent_state(F, theta0, phi0);

  QGrid point;
  point.theta = {theta0};
  point.phi = {phi0};
  const Eigen::MatrixXd self = q_function(s, point);
  CHECK(self(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

  const QGrid grid = QGrid::uniform(100, 200);
  const Eigen::MatrixXd q = q_function(s, grid);
  CHECK(q.minCoeff() >= 0.0);
  CHECK(q.maxCoeff() <= 1.0 + 1e-12);
  CHECK(q_normalization(q, grid, F) == doctest::Approx(1.0).epsilon(1e-3));

  const PureState r = random_state(F, 77);
  const Eigen::MatrixXd qr = q_function(r, grid);
  CHECK(q_normalization(qr, grid, F) == doctest::Approx(1.0).epsilon(1e-3));

  PureState phased = r;
  phased.amplitudes *= std::polar(1.0, 0.9);
  const Eigen::MatrixXd qp = q_function(phased, grid);
  CHECK((qp - qr).cwiseAbs().maxCoeff() < 1e-14);

  QGrid empty;
  CHECK_THROWS_AS(q_function(s, empty), Error);
}

TEST_CASE("q function peak finding") {
  // two coherent lobes -> two well separated maxima (angles chosen off the
  // grid symmetry lines so no neighboring cells tie exactly)
  const double F = 8.0;
  PureState a = spin_coherent_state(F, 1.2, 0.9);
  const PureState b = spin_coherent_state(F, 1.2, 0.9 + M_PI);
  PureState cat;
  cat.F = F;
  cat.amplitudes = (a.amplitudes + b.amplitudes) / std::sqrt(2.0);
  cat.normalize();
  const QGrid grid = QGrid::uniform(60, 120);
  const auto peaks = find_local_maxima(q_function(cat, grid), 0.1);
  REQUIRE(peaks.size() >= 2);
  bool separated = false;
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    for (std::size_t j = i + 1; j < peaks.size(); ++j) {
      if (peak_separation_cells(peaks[i], peaks[j], 120) > 5.0) separated = true;
    }
  }
  CHECK(separated);
  // a single coherent state has one dominant peak
  const auto single = find_local_maxima(q_function(a, grid), 0.1);
  CHECK(single.size() == 1);
}

TEST_SUITE_END();
