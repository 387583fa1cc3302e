#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "spinfilter/sde.hpp"

using namespace spinfilter;
using namespace spinfilter::sde;

TEST_SUITE_BEGIN("sde");

TEST_CASE("wiener path determinism and seed separation") {
  const NoisePath a = wiener_path(42, 1000, 1e-5);
  const NoisePath b = wiener_path(42, 1000, 1e-5);
  CHECK(a.increments == b.increments);

  const NoisePath c = wiener_path(43, 1000, 1e-5);
  bool differs = false;
  for (std::size_t k = 0; k < c.increments.size(); ++k) {
    if (c.increments[k] != a.increments[k]) differs = true;
  }
  CHECK(differs);

  CHECK_THROWS(wiener_path(1, 0, 1e-5));
  CHECK_THROWS(wiener_path(1, 10, -1.0));
}

TEST_CASE("wiener increments have the right moments") {
  const std::size_t n = 1'000'000;
  const double dt = 1e-5;
  const NoisePath path = wiener_path(7, n, dt);
  double mean = 0;
  for (double x : path.increments) mean += x;
  mean /= n;
  CHECK(std::abs(mean) < 4.0 * std::sqrt(dt / n));

  double var = 0;
  for (double x : path.increments) var += (x - mean) * (x - mean);
  var /= n;
  CHECK(var == doctest::Approx(dt).epsilon(0.01));
}

TEST_CASE("coarsen sums blocks") {
  const NoisePath path = wiener_path(3, 8, 0.25);
  const NoisePath half = coarsen(path, 2);
  CHECK(half.increments.size() == 4);
  CHECK(half.dt == doctest::Approx(0.5));
  CHECK(half.increments[0] ==
        doctest::Approx(path.increments[0] + path.increments[1]));
  CHECK_THROWS(coarsen(path, 3));
}

namespace {

SdeSystem constant_system() {
  SdeSystem sys;
  sys.dim = 2;
  sys.drift = [](double, std::span<const double>, std::span<double> out) {
    out[0] = 0;
    out[1] = 0;
  };
  sys.diffusion = sys.drift;
  return sys;
}

SdeSystem gbm_system(double a, double b) {
  SdeSystem sys;
  sys.dim = 1;
  sys.drift = [a](double, std::span<const double> x, std::span<double> out) {
    out[0] = a * x[0];
  };
  sys.diffusion = [b](double, std::span<const double> x, std::span<double> out) {
    out[0] = b * x[0];
  };
  return sys;
}

}  // namespace

TEST_CASE("zero drift and diffusion leave the state constant") {
  const SdeSystem sys = constant_system();
  const std::vector<double> x0 = {1.5, -2.0};
  const Trajectory traj = integrate(sys, x0, wiener_path(1, 100, 1e-3));
  CHECK(traj.back() == x0);
}

TEST_CASE("deterministic ODE limit integrates exp(-t)") {
  SdeSystem sys;
  sys.dim = 1;
  sys.drift = [](double, std::span<const double> x, std::span<double> out) {
    out[0] = -x[0];
  };
  sys.diffusion = [](double, std::span<const double>, std::span<double> out) {
    out[0] = 0;
  };
  const std::vector<double> x0 = {1.0};
  const Trajectory traj = integrate(sys, x0, wiener_path(5, 10'000, 1e-5));
  CHECK(traj.back()[0] == doctest::Approx(std::exp(-0.1)).epsilon(1e-6));
}

TEST_CASE("strong self-refinement on the linear test SDE") {
  // dx = a x dt + b x dW against a dt = 1e-7 reference on the same path
  const SdeSystem sys = gbm_system(1.5, 1.0);
  const std::vector<double> x0 = {1.0};
  double err_coarse = 0, err_fine = 0;
  const int n_paths = 10;
  for (int s = 0; s < n_paths; ++s) {
    const NoisePath base = wiener_path(100 + s, 1'000'000, 1e-7);  // t = 0.1
    const double ref = integrate(sys, x0, base, base.increments.size()).back()[0];
    const double at_1em5 =
        integrate(sys, x0, coarsen(base, 100), 10'000).back()[0];
    const double at_5em6 =
        integrate(sys, x0, coarsen(base, 50), 20'000).back()[0];
    err_coarse += std::abs(at_1em5 - ref);
    err_fine += std::abs(at_5em6 - ref);
  }
  CHECK(err_fine < err_coarse);
}

TEST_CASE("integrator aborts on non-finite states with diagnostics") {
  SdeSystem sys;
  sys.dim = 1;
  sys.drift = [](double, std::span<const double> x, std::span<double> out) {
    out[0] = x[0] * x[0] * 1e300;
  };
  sys.diffusion = [](double, std::span<const double>, std::span<double> out) {
    out[0] = 0;
  };
  const std::vector<double> x0 = {1e20};
  CHECK_THROWS_WITH_AS(integrate(sys, x0, wiener_path(1, 10, 1e-3)),
                       doctest::Contains("non-finite"), Error);
}

TEST_CASE("coevolve matches integrate and couples identical systems") {
  const SdeSystem sys = gbm_system(0.5, 0.8);
  const NoisePath noise = wiener_path(11, 500, 1e-4);
  const std::vector<double> x0 = {2.0};

  const auto trajs = coevolve({sys, sys}, {x0, x0}, noise);
  CHECK(trajs[0].back() == trajs[1].back());

  const Trajectory solo = integrate(sys, x0, noise);
  CHECK(solo.back() == trajs[0].back());
}

TEST_CASE("trajectory csv dump") {
  const SdeSystem sys = gbm_system(0.1, 0.2);
  const Trajectory traj = integrate(sys, std::vector<double>{1.0},
                                    wiener_path(2, 10, 1e-3), 5);
  const std::string path = "/tmp/spinfilter_test_traj.csv";
  write_trajectory_csv(path, traj);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,x0");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);  // initial + steps 5 and 10

  // re/im pairing for packed complex states
  Trajectory c;
  c.times = {0.0};
  c.states = {{1.0, 2.0, 3.0, 4.0}};  // two complex entries
  write_trajectory_csv(path, c, 2);
  std::ifstream in2(path);
  std::getline(in2, line);
  CHECK(line == "t,x0_re,x0_im,x1_re,x1_im");
  std::getline(in2, line);
  CHECK(line == "0,1,3,2,4");
  CHECK_THROWS_AS(write_trajectory_csv(path, c, 3), Error);
  std::remove(path.c_str());
}

TEST_CASE("ito to stratonovich drift conversion") {
  // constant diffusion: unchanged
  SdeSystem sys;
  sys.dim = 2;
  sys.drift = [](double, std::span<const double> x, std::span<double> out) {
    out[0] = 2.0 * x[1];
    out[1] = -x[0];
  };
  sys.diffusion = [](double, std::span<const double>, std::span<double> out) {
    out[0] = 0.3;
    out[1] = -0.7;
  };
  const std::vector<double> x = {0.4, -1.2};
  const auto corrected = ito_to_stratonovich_drift(sys.drift, sys.diffusion, x, 0.0);
  CHECK(corrected[0] == doctest::Approx(2.0 * x[1]).epsilon(1e-10));
  CHECK(corrected[1] == doctest::Approx(-x[0]).epsilon(1e-10));

  // dx = a dt + x dW: corrected drift a - x/2
  const double a = 0.9;
  VectorField drift1 = [a](double, std::span<const double>, std::span<double> out) {
    out[0] = a;
  };
  VectorField diff1 = [](double, std::span<const double> x1, std::span<double> out) {
    out[0] = x1[0];
  };
  const std::vector<double> x1 = {1.7};
  const auto c1 = ito_to_stratonovich_drift(drift1, diff1, x1, 0.0);
  CHECK(c1[0] == doctest::Approx(a - x1[0] / 2).epsilon(1e-9));
}

TEST_SUITE_END();
