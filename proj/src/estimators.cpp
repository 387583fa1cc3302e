#include "spinfilter/estimators.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "spinfilter/rng.hpp"

namespace spinfilter {

// ---------------------------------------------------------------------------
// Particle filter

ParticleEnsemble init_ensemble(int N, double prior_mean, double prior_var,
                               double F, std::uint64_t base_seed) {
  if (N < 1) throw Error("init_ensemble: N must be >= 1");
  if (!(prior_var > 0)) throw Error("init_ensemble: prior_var must be positive");
  ParticleEnsemble ens;
  ens.F = F;
  ens.weights.assign(N, 1.0 / N);
  ens.b_values.resize(N);
  const double sd = std::sqrt(prior_var);
  for (int i = 0; i < N; ++i) {
    ens.b_values[i] = prior_mean + sd * counter_normal(base_seed, i);
  }
  const VectorXc psi0 = spin_coherent_state(F, 0.5 * M_PI, 0.0).amplitudes;
  ens.states.assign(N, psi0);
  return ens;
}

Estimate estimate(const ParticleEnsemble& ensemble) {
  Estimate est;
  double m2 = 0;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    est.b += ensemble.weights[i] * ensemble.b_values[i];
    m2 += ensemble.weights[i] * ensemble.b_values[i] * ensemble.b_values[i];
  }
  est.uncertainty = std::sqrt(std::max(m2 - est.b * est.b, 0.0));
  return est;
}

double effective_sample_size(const ParticleEnsemble& ensemble) {
  double s = 0;
  for (double w : ensemble.weights) s += w * w;
  return 1.0 / s;
}

ParticleFilter::ParticleFilter(const ModelParams& params)
    : params_(params), stepper_(params) {}

void ParticleFilter::step(ParticleEnsemble& ensemble, double dZ) {
  const std::size_t N = ensemble.size();
  if (N == 0) throw Error("particle_step: empty ensemble");
  const double dt = params_.dt;
  const double sM = std::sqrt(params_.M);

  // phase 1: expectations of the current states, shared innovations
  fz_means_.resize(N);
  double ens_fz = 0;
  for (std::size_t i = 0; i < N; ++i) {
    fz_means_[i] = stepper_.fz_mean(ensemble.states[i]);
    ens_fz += ensemble.weights[i] * fz_means_[i];
  }
  const double dW = dZ - 2.0 * sM * ens_fz * dt;

  // weight update, clipped at zero then renormalized
  double wsum = 0;
  for (std::size_t i = 0; i < N; ++i) {
    double w = ensemble.weights[i] *
               (1.0 + 2.0 * sM * (fz_means_[i] - ens_fz) * dW);
    if (w < 0) {
      w = 0;
      ++ensemble.clip_events;
    }
    ensemble.weights[i] = w;
    wsum += w;
  }
  if (!(wsum > 0)) {
    throw Error("particle_step: all weights vanished (N=" + std::to_string(N) +
                ", dW=" + std::to_string(dW) + ")");
  }
  for (double& w : ensemble.weights) w /= wsum;

  // phase 2: advance every particle at its own B with the shared dW
  for (std::size_t i = 0; i < N; ++i) {
    stepper_.step_noise(ensemble.states[i], dW, ensemble.b_values[i]);
  }
}

ParticleEnsemble particle_step(const ParticleEnsemble& ensemble, double dZ,
                               const ModelParams& params) {
  ParticleFilter filter(params);
  ParticleEnsemble out = ensemble;
  filter.step(out, dZ);
  return out;
}

PfRunResult run_particle_filter(const MeasurementRecord& record, int n_particles,
                                double prior_mean, double prior_var,
                                std::uint64_t prior_seed,
                                std::size_t trace_stride) {
  ParticleEnsemble ens = init_ensemble(n_particles, prior_mean, prior_var,
                                       record.params.F, prior_seed);
  ParticleFilter filter(record.params);
  PfRunResult result;
  auto sample = [&](double t) {
    const Estimate est = estimate(ens);
    result.trace.times.push_back(t);
    result.trace.b_estimate.push_back(est.b);
    result.trace.b_uncertainty.push_back(est.uncertainty);
    result.trace.n_eff.push_back(effective_sample_size(ens));
  };
  if (trace_stride > 0) sample(0.0);
  for (std::size_t k = 0; k < record.dZ.size(); ++k) {
    filter.step(ens, record.dZ[k]);
    if (trace_stride > 0 &&
        ((k + 1) % trace_stride == 0 || k + 1 == record.dZ.size())) {
      sample((k + 1) * record.params.dt);
    }
  }
  result.final_estimate = estimate(ens);
  result.n_eff_final = effective_sample_size(ens);
  result.clip_events = ens.clip_events;
  return result;
}

void write_pf_trace_csv(const std::string& path, const PfTrace& trace) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "t,B_estimate,B_uncertainty,N_eff\n";
  char buf[256];
  for (std::size_t k = 0; k < trace.times.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", trace.times[k],
                  trace.b_estimate[k], trace.b_uncertainty[k], trace.n_eff[k]);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Projection filter

ProjectionRates projection_drift(const GaussianState& g, const ModelParams& p) {
  const double F = p.F, M = p.M;
  const double e8 = std::exp(-8.0 * F * g.xi);
  ProjectionRates r;
  r.dtheta = p.B * p.gamma - 0.25 * M * e8 * e8 * std::sin(2.0 * g.theta) +
             2.0 * F * std::sqrt(p.K * M) * std::sin(g.theta);
  r.dxi = 0.25 * M * e8 * std::cos(g.theta) * std::cos(g.theta);
  return r;
}

double projection_diffusion(const GaussianState& g, const ModelParams& p) {
  const double e8 = std::exp(-8.0 * p.F * g.xi);
  return -(std::sqrt(p.M) * e8 * std::cos(g.theta) + std::sqrt(p.K));
}

GaussianState projection_step(const GaussianState& g, double dW,
                              const ModelParams& params, double /*t*/) {
  if (!std::isfinite(g.theta) || !std::isfinite(g.xi)) {
    throw Error("projection_step: non-finite state");
  }
  const double dt = params.dt;
  const ProjectionRates a0 = projection_drift(g, params);
  const double b0 = projection_diffusion(g, params);

  GaussianState pred{g.theta + a0.dtheta * dt + b0 * dW, g.xi + a0.dxi * dt};
  const ProjectionRates a1 = projection_drift(pred, params);

  GaussianState out;
  out.theta = g.theta + 0.5 * dt * (a0.dtheta + a1.dtheta) + b0 * dW;
  out.xi = g.xi + 0.5 * dt * (a0.dxi + a1.dxi);
  return out;
}

double projection_innovations(double dZ, const GaussianState& g,
                              const ModelParams& params) {
  return dZ + 2.0 * params.F * std::sqrt(params.M) * std::sin(g.theta) * params.dt;
}

double xi_closed_form(double t, double F, double M) {
  if (t < 0) throw Error("xi_closed_form: t must be nonnegative");
  return std::log1p(2.0 * F * M * t) / (8.0 * F);
}

// ---------------------------------------------------------------------------
// Kalman filter

KalmanState kalman_initial(double F, double prior_mean, double prior_var) {
  KalmanState k;
  k.x << 0.0, prior_mean;
  // coherent-state angular projection noise Var(fz)/F^2 = 1/(2F)
  k.V << 1.0 / (2.0 * F), 0.0, 0.0, prior_var;
  return k;
}

Eigen::Matrix2d kalman_variance_rhs(const Eigen::Matrix2d& V, double t,
                                    double F, double M, double /*K*/,
                                    double gamma) {
  const double tau = 1.0 + 2.0 * F * M * t;
  const double common = M * (1.0 + 4.0 * F + 8.0 * F * F * M * t) /
                        (2.0 * tau * tau);
  const double P = V(0, 0), Q = V(0, 1), R = V(1, 1);
  const double dP = -2.0 * common * P - 4.0 * F * F * M * P * P + 2.0 * gamma * Q;
  const double dQ = gamma * R - common * Q - 4.0 * F * F * M * P * Q;
  const double dR = -4.0 * F * F * M * Q * Q;
  Eigen::Matrix2d out;
  out << dP, dQ, dQ, dR;
  return out;
}

KalmanState kalman_step(const KalmanState& k, double dZ,
                        const ModelParams& params, double t) {
  const double F = params.F, M = params.M, K = params.K;
  const double dt = params.dt;
  const double tau = 1.0 + 2.0 * F * M * t;

  Eigen::Matrix2d A;
  A << 2.0 * F * std::sqrt(K * M) - M / (2.0 * tau * tau), params.gamma, 0.0, 0.0;
  Eigen::Vector2d Bv(-std::sqrt(M) / tau - std::sqrt(K), 0.0);
  Eigen::Vector2d Ct(-2.0 * std::sqrt(M) * F, 0.0);

  const double dW = dZ + 2.0 * F * std::sqrt(M) * k.x(0) * dt;

  KalmanState out = k;
  out.x = k.x + A * k.x * dt + (Bv + k.V * Ct) * dW;
  out.V = k.V + kalman_variance_rhs(k.V, t, F, M, K, params.gamma) * dt;
  out.V(1, 0) = out.V(0, 1);

  const double det = out.V(0, 0) * out.V(1, 1) - out.V(0, 1) * out.V(0, 1);
  if (out.V(0, 0) < -1e-12 || out.V(1, 1) < -1e-12 || det < -1e-12) {
    ++out.psd_violations;
  }
  return out;
}

namespace {

KalmanTrace run_kalman(const ModelParams& params, double prior_mean,
                       double prior_var, const std::vector<double>* dZ,
                       std::size_t trace_stride) {
  params.validate();
  if (trace_stride < 1) trace_stride = 1;
  const std::size_t n = dZ ? dZ->size() : params.n_steps();
  KalmanState k = kalman_initial(params.F, prior_mean, prior_var);
  KalmanTrace trace;
  auto sample = [&](double t) {
    trace.times.push_back(t);
    trace.theta.push_back(k.x(0));
    trace.b_estimate.push_back(k.x(1));
    trace.var_theta.push_back(k.V(0, 0));
    trace.cov_theta_b.push_back(k.V(0, 1));
    trace.var_b.push_back(k.V(1, 1));
  };
  sample(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = i * params.dt;
    k = kalman_step(k, dZ ? (*dZ)[i] : 0.0, params, t);
    if ((i + 1) % trace_stride == 0 || i + 1 == n) sample((i + 1) * params.dt);
  }
  return trace;
}

}  // namespace

KalmanTrace run_kalman_filter(const MeasurementRecord& record, double prior_mean,
                              double prior_var, std::size_t trace_stride) {
  return run_kalman(record.params, prior_mean, prior_var, &record.dZ, trace_stride);
}

KalmanTrace run_kalman_covariance(const ModelParams& params, double prior_var,
                                  std::size_t trace_stride) {
  return run_kalman(params, 0.0, prior_var, nullptr, trace_stride);
}

void write_kalman_trace_csv(const std::string& path, const KalmanTrace& trace) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "t,theta,B_estimate,var_theta,cov_theta_b,var_b\n";
  char buf[256];
  for (std::size_t k = 0; k < trace.times.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  trace.times[k], trace.theta[k], trace.b_estimate[k],
                  trace.var_theta[k], trace.cov_theta_b[k], trace.var_b[k]);
    out << buf;
  }
}

}  // namespace spinfilter
