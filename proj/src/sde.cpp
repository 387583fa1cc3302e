#include "spinfilter/sde.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "spinfilter/rng.hpp"

namespace spinfilter::sde {

NoisePath wiener_path(std::uint64_t seed, std::size_t n_steps, double dt) {
  if (n_steps < 1) throw Error("wiener_path: n_steps must be >= 1");
  if (!(dt > 0)) throw Error("wiener_path: dt must be positive");
  NoisePath path;
  path.seed = seed;
  path.dt = dt;
  path.increments.resize(n_steps);
  const double scale = std::sqrt(dt);
  for (std::size_t k = 0; k < n_steps; ++k) {
    path.increments[k] = scale * counter_normal(seed, k);
  }
  return path;
}

NoisePath coarsen(const NoisePath& path, std::size_t factor) {
  if (factor < 1 || path.increments.size() % factor != 0) {
    throw Error("coarsen: step count not divisible by factor");
  }
  NoisePath out;
  out.seed = path.seed;
  out.dt = path.dt * factor;
  out.increments.resize(path.increments.size() / factor);
  for (std::size_t k = 0; k < out.increments.size(); ++k) {
    double sum = 0;
    for (std::size_t j = 0; j < factor; ++j) {
      sum += path.increments[k * factor + j];
    }
    out.increments[k] = sum;
  }
  return out;
}

namespace {

bool all_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

Trajectory integrate(const SdeSystem& system, std::span<const double> initial,
                     const NoisePath& noise, std::size_t store_every) {
  const std::size_t n = system.dim;
  if (initial.size() != n) throw Error("integrate: initial state dimension mismatch");
  if (store_every < 1) store_every = 1;

  std::vector<double> x(initial.begin(), initial.end());
  std::vector<double> a0(n), b0(n), xp(n), a1(n), b1(n);

  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(x);

  const double dt = noise.dt;
  const std::size_t n_steps = noise.increments.size();
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double t = k * dt;
    const double dW = noise.increments[k];

    system.drift(t, x, a0);
    system.diffusion(t, x, b0);
    for (std::size_t i = 0; i < n; ++i) xp[i] = x[i] + a0[i] * dt + b0[i] * dW;

    system.drift(t + dt, xp, a1);
    if (system.interpretation == Calculus::stratonovich) {
      system.diffusion(t + dt, xp, b1);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += 0.5 * (a0[i] + a1[i]) * dt + 0.5 * (b0[i] + b1[i]) * dW;
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += 0.5 * (a0[i] + a1[i]) * dt + b0[i] * dW;
      }
    }
    if (system.post_step) system.post_step(t + dt, x);

    if (!all_finite(x)) {
      throw Error("integrate: non-finite state at step " + std::to_string(k + 1) +
                  ", t = " + std::to_string(t + dt));
    }
    if ((k + 1) % store_every == 0 || k + 1 == n_steps) {
      traj.times.push_back((k + 1) * dt);
      traj.states.push_back(x);
    }
  }
  return traj;
}

std::vector<Trajectory> coevolve(const std::vector<SdeSystem>& systems,
                                 const std::vector<std::vector<double>>& initials,
                                 const NoisePath& noise, std::size_t store_every) {
  if (systems.size() != initials.size()) {
    throw Error("coevolve: systems/initials size mismatch");
  }
  std::vector<Trajectory> out;
  out.reserve(systems.size());
  for (std::size_t s = 0; s < systems.size(); ++s) {
    out.push_back(integrate(systems[s], initials[s], noise, store_every));
  }
  return out;
}

void write_trajectory_csv(const std::string& path, const Trajectory& trajectory,
                          std::size_t complex_dim) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  const std::size_t dim =
      trajectory.states.empty() ? 0 : trajectory.states.front().size();
  if (complex_dim > 0 && complex_dim * 2 != dim) {
    throw Error("write_trajectory_csv: complex_dim does not match state size");
  }
  out << "t";
  if (complex_dim > 0) {
    for (std::size_t i = 0; i < complex_dim; ++i) {
      out << ",x" << i << "_re,x" << i << "_im";
    }
  } else {
    for (std::size_t i = 0; i < dim; ++i) out << ",x" << i;
  }
  out << '\n';
  char buf[64];
  auto put = [&out, &buf](double v) {
    std::snprintf(buf, sizeof(buf), ",%.17g", v);
    out << buf;
  };
  for (std::size_t k = 0; k < trajectory.times.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g", trajectory.times[k]);
    out << buf;
    const auto& x = trajectory.states[k];
    if (complex_dim > 0) {
      for (std::size_t i = 0; i < complex_dim; ++i) {
        put(x[i]);
        put(x[complex_dim + i]);
      }
    } else {
      for (double v : x) put(v);
    }
    out << '\n';
  }
}

std::vector<double> ito_to_stratonovich_drift(const VectorField& drift,
                                              const VectorField& diffusion,
                                              std::span<const double> x,
                                              double t) {
  const std::size_t n = x.size();
  std::vector<double> a(n), b(n), bp(n), bm(n), xk(x.begin(), x.end());
  drift(t, x, a);
  diffusion(t, x, b);

  const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  for (std::size_t k = 0; k < n; ++k) {
    const double h = h0 * std::max(1.0, std::abs(xk[k]));
    const double saved = xk[k];
    if (saved + h == saved) throw Error("ito_to_stratonovich_drift: Jacobian step underflow");
    xk[k] = saved + h;
    diffusion(t, xk, bp);
    xk[k] = saved - h;
    diffusion(t, xk, bm);
    xk[k] = saved;
    const double inv2h = 1.0 / (2.0 * h);
    for (std::size_t j = 0; j < n; ++j) {
      a[j] -= 0.5 * b[k] * (bp[j] - bm[j]) * inv2h;
    }
  }
  return a;
}

}  // namespace spinfilter::sde
