#include "spinfilter/fisher.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <thread>

namespace spinfilter {

std::uint64_t seed_for(std::uint64_t base_seed, std::size_t f_index,
                       std::size_t trajectory) {
  return base_seed + f_index * 1'000'000ull + trajectory;
}

double qfi_from_states(const VectorXc& psi_plus, const VectorXc& psi_zero,
                       const VectorXc& psi_minus, double deltaB) {
  if (!(deltaB > 0)) throw Error("qfi: deltaB must be positive");
  const Complex alpha = psi_plus.dot(psi_zero);   // <psi_+|psi_0>
  const Complex beta = psi_minus.dot(psi_zero);   // <psi_-|psi_0>
  const Complex cross = psi_plus.dot(psi_minus);  // <psi_+|psi_->
  const double t2 = std::norm(alpha) + std::norm(beta) -
                    2.0 * (std::conj(alpha) * beta * cross).real();
  return std::max(t2, 0.0) / (deltaB * deltaB);
}

QfiSample qfi_sample(const ModelParams& params, double deltaB, std::uint64_t seed) {
  if (!(deltaB > 0)) throw Error("qfi_sample: deltaB must be positive");
  params.validate();
  const std::size_t n = params.n_steps();
  const sde::NoisePath noise = sde::wiener_path(seed, n, params.dt);

  const double b_values[3] = {params.B + deltaB, params.B, params.B - deltaB};
  DoublePassStepper steppers[3] = {DoublePassStepper(params),
                                   DoublePassStepper(params),
                                   DoublePassStepper(params)};
  VectorXc psi0 = spin_coherent_state(params.F, 0.5 * M_PI, 0.0).amplitudes;
  VectorXc states[3] = {psi0, psi0, psi0};
  for (std::size_t k = 0; k < n; ++k) {
    for (int s = 0; s < 3; ++s) {
      steppers[s].step_noise(states[s], noise.increments[k], b_values[s]);
    }
  }

  QfiSample sample;
  sample.seed = seed;
  sample.F = params.F;
  sample.qfi = qfi_from_states(states[0], states[1], states[2], deltaB);
  if (sample.qfi < std::numeric_limits<double>::epsilon()) {
    throw Error("qfi_sample: quantum Fisher information below machine epsilon");
  }
  sample.bound = 1.0 / std::sqrt(sample.qfi);
  return sample;
}

BoundSweepResult bound_sweep(const std::vector<double>& F_list,
                             const ModelParams& params_template, double deltaB,
                             int n_traj, std::uint64_t base_seed, int workers) {
  if (n_traj < 2) throw Error("bound_sweep: n_traj must be >= 2");
  if (F_list.empty()) throw Error("bound_sweep: empty F list");
  if (workers < 1) workers = 1;

  struct Slot {
    double bound = 0;
    bool ok = false;
    std::string error;
  };
  const std::size_t n_jobs = F_list.size() * static_cast<std::size_t>(n_traj);
  std::vector<Slot> slots(n_jobs);

  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= n_jobs) return;
      const std::size_t j = idx / n_traj;
      const std::size_t i = idx % n_traj;
      ModelParams p = params_template;
      p.F = F_list[j];
      try {
        slots[idx].bound = qfi_sample(p, deltaB, seed_for(base_seed, j, i)).bound;
        slots[idx].ok = true;
      } catch (const std::exception& ex) {
        slots[idx].error = ex.what();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  BoundSweepResult result;
  for (std::size_t j = 0; j < F_list.size(); ++j) {
    ScalingPoint pt;
    pt.F = F_list[j];
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n_traj; ++i) {
      const Slot& s = slots[j * n_traj + i];
      if (s.ok) {
        sum += s.bound;
        sum2 += s.bound * s.bound;
        pt.bounds.push_back(s.bound);
      } else {
        result.failures.push_back({F_list[j], i, s.error});
      }
    }
    const int ok_count = static_cast<int>(pt.bounds.size());
    if (ok_count < n_traj - n_traj / 10) continue;  // > 10% failed: drop point
    pt.n_trajectories = ok_count;
    pt.mean_bound = sum / ok_count;
    pt.std_bound = std::sqrt(std::max(sum2 / ok_count - pt.mean_bound * pt.mean_bound, 0.0));
    result.points.push_back(pt);
  }
  return result;
}

double shotnoise_bound(double F, double t, double gamma) {
  if (!(F > 0) || !(t > 0)) throw Error("shotnoise_bound: F and t must be positive");
  return 1.0 / (gamma * t * std::sqrt(2.0 * F));
}

double heisenberg_bound(double F, double t, double gamma, double alpha) {
  if (!(F > 0) || !(t > 0)) throw Error("heisenberg_bound: F and t must be positive");
  return alpha / (gamma * t * F);
}

double kbody_bound(double F, double t, double gamma, int k) {
  if (!(F > 0) || !(t > 0) || k < 1) {
    throw Error("kbody_bound: need F > 0, t > 0, k >= 1");
  }
  return 1.0 / (gamma * t * std::pow(F, k));
}

PowerLawFit power_law_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw Error("power_law_fit: need at least 3 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [f, v] : points) {
    if (!(f > 0) || !(v > 0)) {
      throw Error("power_law_fit: all points must be positive");
    }
    const double x = std::log(f), y = std::log(v);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(points.size());
  const double denom = n * sxx - sx * sx;
  if (denom == 0) throw Error("power_law_fit: degenerate abscissae");
  PowerLawFit fit;
  fit.exponent = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - fit.exponent * sx) / n;
  fit.prefactor = std::exp(intercept);
  double r2 = 0;
  for (const auto& [f, v] : points) {
    const double r = std::log(v) - (intercept + fit.exponent * std::log(f));
    r2 += r * r;
  }
  fit.residual = std::sqrt(r2);
  return fit;
}

void write_sweep_csv(const std::string& path, const BoundSweepResult& sweep,
                     double t, double gamma) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "F,mean_bound,std_bound,n_traj,shotnoise,heisenberg,kbody2\n";
  char buf[256];
  for (const ScalingPoint& pt : sweep.points) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%d,%.17g,%.17g,%.17g\n",
                  pt.F, pt.mean_bound, pt.std_bound, pt.n_trajectories,
                  shotnoise_bound(pt.F, t, gamma),
                  heisenberg_bound(pt.F, t, gamma, 1.0),
                  kbody_bound(pt.F, t, gamma, 2));
    out << buf;
  }
}

}  // namespace spinfilter
