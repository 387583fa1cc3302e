#pragma once

// Seedable Wiener increments and predictor-corrector integration of Ito /
// Stratonovich SDE systems on real state vectors.
//
// Scheme (one corrector pass, trapezoidal drift average):
//   predictor  xp = x + a(t,x) dt + b(t,x) dW
//   corrector  x' = x + 1/2 [a(t,x) + a(t+dt,xp)] dt + b* dW
// with b* = b(t,x) for Ito systems and b* = 1/2 [b(t,x) + b(t+dt,xp)] for
// Stratonovich systems (Heun-type midpoint diffusion).

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spinfilter/error.hpp"

namespace spinfilter::sde {

struct NoisePath {
  std::uint64_t seed = 0;
  double dt = 0;
  std::vector<double> increments;  // entry k ~ Normal(0, dt)
};

// Deterministic: identical (seed, n_steps, dt) reproduce the path bit-for-bit.
NoisePath wiener_path(std::uint64_t seed, std::size_t n_steps, double dt);

// Sum adjacent increments in blocks, producing a coarser path on the same
// Brownian motion (n_steps must be divisible by factor).
NoisePath coarsen(const NoisePath& path, std::size_t factor);

enum class Calculus { ito, stratonovich };

using VectorField =
    std::function<void(double t, std::span<const double> x, std::span<double> out)>;
using PostStep = std::function<void(double t, std::span<double> x)>;

struct SdeSystem {
  std::size_t dim = 0;
  VectorField drift;
  VectorField diffusion;
  Calculus interpretation = Calculus::ito;
  PostStep post_step;  // optional projection (e.g. renormalization)
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;  // states[k] at times[k]

  const std::vector<double>& back() const { return states.back(); }
};

// Integrates over all increments of the path; stores the initial state and
// every store_every-th step (the final state is always stored).
Trajectory integrate(const SdeSystem& system, std::span<const double> initial,
                     const NoisePath& noise, std::size_t store_every = 1);

// Every system consumes the identical increment sequence; equivalent to
// calling integrate separately with the same NoisePath.
std::vector<Trajectory> coevolve(const std::vector<SdeSystem>& systems,
                                 const std::vector<std::vector<double>>& initials,
                                 const NoisePath& noise,
                                 std::size_t store_every = 1);

// Stratonovich drift a_bar^j = a^j - 1/2 sum_k b^k d b^j / d x^k, with the
// diffusion Jacobian taken by central differences.
std::vector<double> ito_to_stratonovich_drift(const VectorField& drift,
                                              const VectorField& diffusion,
                                              std::span<const double> x,
                                              double t);

// CSV dump: column t, then the state components.  With complex_dim > 0 the
// state is interpreted as that many packed complex entries ([Re; Im] halves)
// and emitted as x<i>_re, x<i>_im pairs.
void write_trajectory_csv(const std::string& path, const Trajectory& trajectory,
                          std::size_t complex_dim = 0);

}  // namespace spinfilter::sde
