#include "spinfilter/qfunction.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace spinfilter {

QGrid QGrid::uniform(int n_theta, int n_phi) {
  if (n_theta < 1 || n_phi < 1) throw Error("grid sizes must be positive");
  QGrid g;
  const double dtheta = M_PI / n_theta;
  const double dphi = 2.0 * M_PI / n_phi;
  g.theta.resize(n_theta);
  g.phi.resize(n_phi);
  for (int i = 0; i < n_theta; ++i) g.theta[i] = (i + 0.5) * dtheta;
  for (int j = 0; j < n_phi; ++j) g.phi[j] = (j + 0.5) * dphi;
  return g;
}

Eigen::MatrixXd q_function(const PureState& state, const QGrid& grid) {
  if (grid.theta.empty() || grid.phi.empty()) {
    throw Error("q_function: empty grid");
  }
  const int d = spin_dimension(state.F);
  if (state.amplitudes.size() != d) {
    throw Error("q_function: state dimension mismatch");
  }
  const SpinOperators ops = build_spin_operators(state.F);
  Eigen::SelfAdjointEigenSolver<MatrixXc> eig(ops.fy);

  // <theta,phi|psi> = <F,F| exp(+i theta fy) exp(+i phi fz) |psi>; only the
  // m = F row of the rotation is needed per theta:
  //   r_n(theta) = sum_k U(0,k) e^{i theta lam_k} conj(U(n,k))
  const MatrixXc& U = eig.eigenvectors();
  const Eigen::VectorXd& lam = eig.eigenvalues();
  const VectorXc row0 = U.row(0).transpose();

  Eigen::MatrixXd values(grid.theta.size(), grid.phi.size());
  VectorXc c(d), row(d);
  for (std::size_t ti = 0; ti < grid.theta.size(); ++ti) {
    for (int k = 0; k < d; ++k) {
      c(k) = row0(k) * std::polar(1.0, grid.theta[ti] * lam(k));
    }
    row = U.conjugate() * c;
    for (std::size_t pj = 0; pj < grid.phi.size(); ++pj) {
      Complex overlap(0, 0);
      for (int n = 0; n < d; ++n) {
        const Complex amp =
            state.amplitudes(n) * std::polar(1.0, grid.phi[pj] * (state.F - n));
        overlap += row(n) * amp;
      }
      values(ti, pj) = std::norm(overlap);
    }
  }
  return values;
}

double q_normalization(const Eigen::MatrixXd& values, const QGrid& grid,
                       double F) {
  if (grid.theta.size() < 2 || grid.phi.size() < 2) {
    throw Error("q_normalization needs a 2-d grid");
  }
  const double dtheta = grid.theta[1] - grid.theta[0];
  const double dphi = grid.phi[1] - grid.phi[0];
  double integral = 0;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    double row_sum = 0;
    for (Eigen::Index j = 0; j < values.cols(); ++j) row_sum += values(i, j);
    integral += row_sum * std::sin(grid.theta[i]);
  }
  integral *= dtheta * dphi;
  return integral * (2.0 * F + 1.0) / (4.0 * M_PI);
}

void write_q_csv(const std::string& path, const QGrid& grid,
                 const Eigen::MatrixXd& values) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "theta,phi,q\n";
  char buf[128];
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", grid.theta[i],
                    grid.phi[j], values(i, j));
      out << buf;
    }
  }
}

std::vector<GridPeak> find_local_maxima(const Eigen::MatrixXd& values,
                                        double rel_threshold) {
  // A cell is a candidate if no neighbor strictly exceeds it.  Exact ties
  // happen in practice: real-amplitude states give Q(theta, phi) =
  // Q(theta, -phi), so a lobe centered on the mirror line straddles two
  // equal cells.  Plateaus keep only their lexicographically first cell.
  std::vector<GridPeak> peaks;
  const Eigen::Index nt = values.rows(), np = values.cols();
  const double cutoff = rel_threshold * values.maxCoeff();
  for (Eigen::Index i = 0; i < nt; ++i) {
    for (Eigen::Index j = 0; j < np; ++j) {
      const double v = values(i, j);
      if (v < cutoff) continue;
      bool keep = true;
      for (int di = -1; di <= 1 && keep; ++di) {
        const Eigen::Index ii = i + di;
        if (ii < 0 || ii >= nt) continue;  // theta edges are clamped
        for (int dj = -1; dj <= 1; ++dj) {
          if (di == 0 && dj == 0) continue;
          const Eigen::Index jj = (j + dj + np) % np;  // phi wraps
          const double w = values(ii, jj);
          if (w > v ||
              (w == v && (ii < i || (ii == i && jj < j)))) {
            keep = false;
            break;
          }
        }
      }
      if (keep) {
        peaks.push_back({static_cast<int>(i), static_cast<int>(j), v});
      }
    }
  }
  return peaks;
}

double peak_separation_cells(const GridPeak& a, const GridPeak& b, int n_phi) {
  const double di = a.i - b.i;
  double dj = std::abs(a.j - b.j);
  dj = std::min(dj, n_phi - dj);
  return std::sqrt(di * di + dj * dj);
}

}  // namespace spinfilter
