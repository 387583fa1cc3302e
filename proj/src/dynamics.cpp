#include "spinfilter/dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "spinfilter/rng.hpp"

namespace spinfilter {

std::size_t ModelParams::n_steps() const {
  return static_cast<std::size_t>(std::llround(t_final / dt));
}

void ModelParams::validate() const {
  if (!is_valid_spin(F)) throw Error("ModelParams: invalid F");
  if (M < 0 || K < 0) throw Error("ModelParams: rates must be nonnegative");
  if (!(dt > 0)) throw Error("ModelParams: dt must be positive");
  if (!(t_final > 0)) throw Error("ModelParams: t_final must be positive");
  if (!std::isfinite(B) || !std::isfinite(gamma)) {
    throw Error("ModelParams: B and gamma must be finite");
  }
}

double innovations(double dZ, double fz_expectation, const ModelParams& params) {
  return dZ - 2.0 * std::sqrt(params.M) * fz_expectation * params.dt;
}

// ---------------------------------------------------------------------------
// DoublePassStepper

DoublePassStepper::DoublePassStepper(const ModelParams& params)
    : params_(params), d_(spin_dimension(params.F)) {
  params_.validate();
  const double F = params_.F;
  const double M = params_.M;
  const double K = params_.K;
  const double skm = std::sqrt(K * M);

  m_.resize(d_);
  for (int i = 0; i < d_; ++i) m_[i] = F - i;

  w_.resize(std::max(d_ - 1, 0));
  for (int i = 0; i + 1 < d_; ++i) {
    const double mu = m_[i + 1];  // (i fy)(i, i+1) couples |m+1><m|
    w_[i] = 0.5 * std::sqrt(F * (F + 1) - mu * (mu + 1));
  }

  // A(e, B) = gamma B (i fy) - M/2 (fz - e)^2 + sqrt(KM) (i fy)(fz + e)
  //           - K/2 fy^2, split into constant, e-linear and e^2 parts.
  k0_0_.resize(d_);
  k1_0_.resize(d_);
  for (int i = 0; i < d_; ++i) {
    const double wl = (i > 0) ? w_[i - 1] : 0.0;
    const double wr = (i + 1 < d_) ? w_[i] : 0.0;
    const double fy2_diag = wl * wl + wr * wr;
    k0_0_[i] = -0.5 * M * m_[i] * m_[i] - 0.5 * K * fy2_diag;
    k1_0_[i] = M * m_[i];
  }
  k0_1u_.resize(std::max(d_ - 1, 0));
  k0_1l_.resize(std::max(d_ - 1, 0));
  for (int i = 0; i + 1 < d_; ++i) {
    k0_1u_[i] = skm * w_[i] * m_[i + 1];
    k0_1l_[i] = -skm * w_[i] * m_[i];
  }
  k0_2_.resize(std::max(d_ - 2, 0));
  for (int i = 0; i + 2 < d_; ++i) {
    // fy^2(i, i+2) = -w_i w_{i+1}; drift carries -K/2 fy^2
    k0_2_[i] = 0.5 * K * w_[i] * w_[i + 1];
  }
  k1_1_ = skm;

  a0_.resize(d_);
  b0_.resize(d_);
  pred_.resize(d_);
  a1_.resize(d_);
}

double DoublePassStepper::fz_mean(const VectorXc& psi) const {
  double e = 0;
  for (int i = 0; i < d_; ++i) e += m_[i] * std::norm(psi(i));
  return e;
}

double DoublePassStepper::fz_variance(const VectorXc& psi) const {
  double e = 0, e2 = 0;
  for (int i = 0; i < d_; ++i) {
    const double p = std::norm(psi(i));
    e += m_[i] * p;
    e2 += m_[i] * m_[i] * p;
  }
  return e2 - e * e;
}

void DoublePassStepper::apply_drift(const VectorXc& psi, double e, double B,
                                    VectorXc& out) const {
  const double gB = params_.gamma * B;
  const double off = k1_1_ * e + gB;  // common scale of the (i fy) band
  const double e2term = -0.5 * params_.M * e * e;
  for (int i = 0; i < d_; ++i) {
    Complex acc = (k0_0_[i] + e * k1_0_[i] + e2term) * psi(i);
    if (i + 1 < d_) acc += (k0_1u_[i] + off * w_[i]) * psi(i + 1);
    if (i > 0) acc += (k0_1l_[i - 1] - off * w_[i - 1]) * psi(i - 1);
    if (i + 2 < d_) acc += k0_2_[i] * psi(i + 2);
    if (i >= 2) acc += k0_2_[i - 2] * psi(i - 2);
    out(i) = acc;
  }
}

void DoublePassStepper::apply_diffusion(const VectorXc& psi, double e,
                                        VectorXc& out) const {
  const double sM = std::sqrt(params_.M);
  const double sK = std::sqrt(params_.K);
  for (int i = 0; i < d_; ++i) {
    Complex acc = sM * (m_[i] - e) * psi(i);
    if (i + 1 < d_) acc += sK * w_[i] * psi(i + 1);
    if (i > 0) acc -= sK * w_[i - 1] * psi(i - 1);
    out(i) = acc;
  }
}

void DoublePassStepper::step_noise(VectorXc& psi, double dW, double B) {
  const double dt = params_.dt;
  const double e0 = fz_mean(psi);
  apply_drift(psi, e0, B, a0_);
  apply_diffusion(psi, e0, b0_);

  double pred_norm2 = 0, pred_fz = 0;
  for (int i = 0; i < d_; ++i) {
    pred_(i) = psi(i) + a0_(i) * dt + b0_(i) * dW;
    const double p = std::norm(pred_(i));
    pred_norm2 += p;
    pred_fz += m_[i] * p;
  }
  const double ep = pred_fz / pred_norm2;
  apply_drift(pred_, ep, B, a1_);

  double norm2 = 0;
  for (int i = 0; i < d_; ++i) {
    psi(i) += 0.5 * dt * (a0_(i) + a1_(i)) + dW * b0_(i);
    norm2 += std::norm(psi(i));
  }
  if (!std::isfinite(norm2) || norm2 <= 0) {
    throw Error("DoublePassStepper: non-finite state (F=" +
                std::to_string(params_.F) + ", dW=" + std::to_string(dW) + ")");
  }
  psi /= std::sqrt(norm2);
}

double DoublePassStepper::step_record(VectorXc& psi, double dZ, double B) {
  const double dW =
      dZ - 2.0 * std::sqrt(params_.M) * fz_mean(psi) * params_.dt;
  step_noise(psi, dW, B);
  return dW;
}

PureState sse_ito_step(const PureState& state, const ModelParams& params,
                       double dW) {
  DoublePassStepper stepper(params);
  PureState out = state;
  stepper.step_noise(out.amplitudes, dW);
  return out;
}

VectorXc sse_stratonovich_drift(const PureState& state, const ModelParams& params) {
  const int d = spin_dimension(params.F);
  if (state.amplitudes.size() != d) {
    throw Error("sse_stratonovich_drift: state dimension mismatch");
  }
  const SpinOperators ops = build_spin_operators(params.F);
  const VectorXc& psi = state.amplitudes;
  const double norm2 = psi.squaredNorm();

  const VectorXc fz_psi = ops.fz * psi;
  const VectorXc fy_psi = ops.fy * psi;
  const double e = psi.dot(fz_psi).real() / norm2;
  const double e2 = fz_psi.squaredNorm() / norm2;  // <fz^2>, fz Hermitian
  const double var = e2 - e * e;
  const Complex czy = psi.dot(ops.fz * fy_psi) / norm2;  // <fz fy>

  const double M = params.M;
  const double skm = std::sqrt(params.K * M);
  const Complex I(0, 1);

  VectorXc out = I * (params.gamma * params.B) * fy_psi;
  out -= M * (ops.fz * fz_psi - 2.0 * e * fz_psi +
              (e * e - var) * psi);  // (fz - e)^2 - Var fz
  out -= 0.5 * skm * (ops.fx * psi);
  out += I * skm * (2.0 * e * fy_psi + czy * psi);
  return out;
}

// ---------------------------------------------------------------------------
// AdjointFilter

AdjointFilter::AdjointFilter(const ModelParams& params)
    : params_(params), d_(spin_dimension(params.F)) {
  params_.validate();
  const SpinOperators ops = build_spin_operators(params_.F);
  const double M = params_.M;
  const double K = params_.K;
  const double skm = std::sqrt(K * M);
  const Complex I(0, 1);
  fz_ = ops.fz;
  a_const_ = I * (params_.gamma * params_.B) * ops.fy - 0.5 * M * ops.fz * ops.fz +
             I * skm * ops.fy * ops.fz - 0.5 * K * ops.fy * ops.fy;
  a_lin_ = M * ops.fz + I * skm * ops.fy;
  b_const_ = std::sqrt(M) * ops.fz + I * std::sqrt(K) * ops.fy;
}

void AdjointFilter::apply(MatrixXc& rho, double dW) {
  const double dt = params_.dt;
  const double e = (fz_ * rho).trace().real();
  const MatrixXc id = MatrixXc::Identity(d_, d_);
  const MatrixXc a_left = a_const_ + e * a_lin_ - 0.5 * params_.M * e * e * id;
  const MatrixXc b_left = b_const_ - std::sqrt(params_.M) * e * id;
  const MatrixXc pred_op = id + a_left * dt + b_left * dW;

  const MatrixXc rho_pred = pred_op * rho * pred_op.adjoint();
  const double tr_pred = rho_pred.trace().real();
  const double e_pred = (fz_ * rho_pred).trace().real() / tr_pred;

  const MatrixXc a_pred =
      a_const_ + e_pred * a_lin_ - 0.5 * params_.M * e_pred * e_pred * id;
  const MatrixXc mop = id + 0.5 * dt * (a_left + a_pred * pred_op) + b_left * dW;

  rho = mop * rho * mop.adjoint();
  const double tr = rho.trace().real();
  if (!std::isfinite(tr) || tr <= 0) {
    throw Error("AdjointFilter: non-finite density matrix");
  }
  rho /= tr;
  rho = 0.5 * (rho + rho.adjoint()).eval();
}

double AdjointFilter::step_record(MatrixXc& rho, double dZ) {
  const double e = (fz_ * rho).trace().real();
  const double dW = dZ - 2.0 * std::sqrt(params_.M) * e * params_.dt;
  apply(rho, dW);
  return dW;
}

void AdjointFilter::step_noise(MatrixXc& rho, double dW) { apply(rho, dW); }

double AdjointFilter::min_eigenvalue(const MatrixXc& rho) {
  Eigen::SelfAdjointEigenSolver<MatrixXc> eig(rho);
  return eig.eigenvalues().minCoeff();
}

DensityOp adjoint_filter_step(const DensityOp& rho, const ModelParams& params,
                              double dZ) {
  AdjointFilter filter(params);
  DensityOp out = rho;
  filter.step_record(out.matrix, dZ);
  return out;
}

// ---------------------------------------------------------------------------
// Record generation and trajectories

MeasurementRecord generate_record(const ModelParams& params, std::uint64_t seed) {
  params.validate();
  const std::size_t n = params.n_steps();
  const sde::NoisePath noise = sde::wiener_path(seed, n, params.dt);
  DoublePassStepper stepper(params);
  VectorXc psi = spin_coherent_state(params.F, 0.5 * M_PI, 0.0).amplitudes;
  MeasurementRecord rec;
  rec.params = params;
  rec.seed = seed;
  rec.dZ.resize(n);
  rec.times.resize(n);
  const double signal_scale = 2.0 * std::sqrt(params.M) * params.dt;
  for (std::size_t k = 0; k < n; ++k) {
    rec.times[k] = k * params.dt;
    rec.dZ[k] = noise.increments[k] + signal_scale * stepper.fz_mean(psi);
    stepper.step_noise(psi, noise.increments[k]);
  }
  return rec;
}

SseTrajectory run_sse_trajectory(const ModelParams& params, std::uint64_t seed,
                                 std::size_t sample_every) {
  params.validate();
  if (sample_every < 1) sample_every = 1;
  const std::size_t n = params.n_steps();
  const sde::NoisePath noise = sde::wiener_path(seed, n, params.dt);
  const SpinOperators ops = build_spin_operators(params.F);
  DoublePassStepper stepper(params);

  PureState state = spin_coherent_state(params.F, 0.5 * M_PI, 0.0);
  SseTrajectory traj;
  auto sample = [&](double t) {
    traj.times.push_back(t);
    traj.fx_mean.push_back(expectation(state, ops.fx).real());
    traj.fy_mean.push_back(expectation(state, ops.fy).real());
    traj.fz_mean.push_back(expectation(state, ops.fz).real());
  };
  sample(0.0);
  for (std::size_t k = 0; k < n; ++k) {
    stepper.step_noise(state.amplitudes, noise.increments[k]);
    if ((k + 1) % sample_every == 0 || k + 1 == n) sample((k + 1) * params.dt);
  }
  traj.final_state = state;
  return traj;
}

// ---------------------------------------------------------------------------
// Generic-SDE adapter

std::vector<double> pack_state(const VectorXc& psi) {
  std::vector<double> x(2 * psi.size());
  for (Eigen::Index i = 0; i < psi.size(); ++i) {
    x[i] = psi(i).real();
    x[psi.size() + i] = psi(i).imag();
  }
  return x;
}

VectorXc unpack_state(std::span<const double> x) {
  const std::size_t d = x.size() / 2;
  VectorXc psi(d);
  for (std::size_t i = 0; i < d; ++i) psi(i) = Complex(x[i], x[d + i]);
  return psi;
}

sde::SdeSystem make_sse_system(const ModelParams& params, sde::Calculus calculus) {
  auto stepper = std::make_shared<const DoublePassStepper>(params);
  const int d = stepper->dim();
  const ModelParams p = params;

  sde::SdeSystem sys;
  sys.dim = 2 * static_cast<std::size_t>(d);
  sys.interpretation = calculus;

  auto unpack = [d](std::span<const double> x) {
    VectorXc psi(d);
    for (int i = 0; i < d; ++i) psi(i) = Complex(x[i], x[d + i]);
    return psi;
  };
  auto pack = [d](const VectorXc& v, std::span<double> out) {
    for (int i = 0; i < d; ++i) {
      out[i] = v(i).real();
      out[d + i] = v(i).imag();
    }
  };

  if (calculus == sde::Calculus::ito) {
    sys.drift = [stepper, p, d, unpack, pack](double, std::span<const double> x,
                                              std::span<double> out) {
      const VectorXc psi = unpack(x);
      const double e = stepper->fz_mean(psi) / psi.squaredNorm();
      VectorXc dv(d);
      stepper->apply_drift(psi, e, p.B, dv);
      pack(dv, out);
    };
  } else {
    sys.drift = [p, unpack, pack](double, std::span<const double> x,
                                  std::span<double> out) {
      PureState s;
      s.F = p.F;
      s.amplitudes = unpack(x);
      pack(sse_stratonovich_drift(s, p), out);
    };
  }
  sys.diffusion = [stepper, d, unpack, pack](double, std::span<const double> x,
                                             std::span<double> out) {
    const VectorXc psi = unpack(x);
    const double e = stepper->fz_mean(psi) / psi.squaredNorm();
    VectorXc dv(d);
    stepper->apply_diffusion(psi, e, dv);
    pack(dv, out);
  };
  sys.post_step = [](double, std::span<double> x) {
    double norm2 = 0;
    for (double v : x) norm2 += v * v;
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : x) v *= inv;
  };
  return sys;
}

// ---------------------------------------------------------------------------
// Record serialization

namespace {
constexpr char kMagic[5] = "SPFR";
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_record_binary(const MeasurementRecord& rec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out.write(kMagic, 4);
  auto put = [&out](const auto& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  put(kVersion);
  put(rec.params.F);
  put(rec.params.M);
  put(rec.params.K);
  put(rec.params.B);
  put(rec.params.gamma);
  put(rec.params.dt);
  put(rec.params.t_final);
  put(rec.seed);
  const std::uint64_t n = rec.dZ.size();
  put(n);
  out.write(reinterpret_cast<const char*>(rec.dZ.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
}

MeasurementRecord load_record_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(path + ": not a record file");
  auto get = [&in, &path](auto& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw Error(path + ": truncated record file");
  };
  std::uint32_t version = 0;
  get(version);
  if (version != kVersion) throw Error(path + ": unsupported record version");
  MeasurementRecord rec;
  get(rec.params.F);
  get(rec.params.M);
  get(rec.params.K);
  get(rec.params.B);
  get(rec.params.gamma);
  get(rec.params.dt);
  get(rec.params.t_final);
  get(rec.seed);
  std::uint64_t n = 0;
  get(n);
  rec.dZ.resize(n);
  in.read(reinterpret_cast<char*>(rec.dZ.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw Error(path + ": truncated record file");
  rec.times.resize(n);
  for (std::uint64_t k = 0; k < n; ++k) rec.times[k] = k * rec.params.dt;
  return rec;
}

void save_record_csv(const MeasurementRecord& rec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  char buf[256];
  out << "F,M,K,B,gamma,dt,seed\n";
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%llu\n",
                rec.params.F, rec.params.M, rec.params.K, rec.params.B,
                rec.params.gamma, rec.params.dt,
                static_cast<unsigned long long>(rec.seed));
  out << buf << "dZ\n";
  for (double v : rec.dZ) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", v);
    out << buf;
  }
}

MeasurementRecord load_record_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "F,M,K,B,gamma,dt,seed") {
    throw Error(path + ": bad record CSV header");
  }
  if (!std::getline(in, line)) throw Error(path + ": missing parameter row");
  MeasurementRecord rec;
  {
    std::istringstream ss(line);
    std::string tok;
    double* fields[6] = {&rec.params.F, &rec.params.M, &rec.params.K,
                         &rec.params.B, &rec.params.gamma, &rec.params.dt};
    for (double* f : fields) {
      if (!std::getline(ss, tok, ',')) throw Error(path + ": bad parameter row");
      *f = std::stod(tok);
    }
    if (!std::getline(ss, tok, ',')) throw Error(path + ": bad parameter row");
    rec.seed = std::stoull(tok);
  }
  if (!std::getline(in, line) || line != "dZ") {
    throw Error(path + ": missing dZ marker");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rec.dZ.push_back(std::stod(line));
  }
  rec.params.t_final = rec.dZ.size() * rec.params.dt;
  rec.times.resize(rec.dZ.size());
  for (std::size_t k = 0; k < rec.dZ.size(); ++k) {
    rec.times[k] = k * rec.params.dt;
  }
  return rec;
}

}  // namespace spinfilter
