#include "riskplan/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace riskplan {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// One constraint's entries grouped by block, with both symmetric orientations
// listed so inner loops need no branching.
struct ExpandedEntry {
  int row;
  int col;
  double value;
};

struct BlockSlice {
  std::vector<std::vector<ExpandedEntry>> per_block;  // indexed by block
};

std::vector<ExpandedEntry> expand(const std::vector<BlockEntry>& entries, int block,
                                  int n_blocks_unused) {
  (void)n_blocks_unused;
  std::vector<ExpandedEntry> out;
  for (const auto& e : entries) {
    if (e.block != block) continue;
    out.push_back({e.row, e.col, e.value});
    if (e.row != e.col) out.push_back({e.col, e.row, e.value});
  }
  return out;
}

double inner(const std::vector<ExpandedEntry>& a, const MatrixXd& w) {
  double s = 0.0;
  for (const auto& e : a) s += e.value * w(e.row, e.col);
  return s;
}

// Largest alpha with P + alpha*D >= 0, via eigenvalues of L^{-1} D L^{-T}.
double max_step(const Eigen::LLT<MatrixXd>& llt_p, const MatrixXd& d) {
  const MatrixXd& l = llt_p.matrixL();
  MatrixXd w = l.triangularView<Eigen::Lower>().solve(d);
  w = l.triangularView<Eigen::Lower>().solve(w.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (w + w.transpose()),
                                             Eigen::EigenvaluesOnly);
  const double lambda_min = es.eigenvalues().minCoeff();
  if (lambda_min >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lambda_min;
}

struct State {
  std::vector<MatrixXd> X, Z;
  VectorXd y;
};

}  // namespace

SdpSolution solve_sdp(const SdpProblem& problem, const SdpOptions& options) {
  const int n_blocks = static_cast<int>(problem.block_sizes.size());
  const int m = static_cast<int>(problem.constraints.size());
  if (problem.b.size() != m) throw std::invalid_argument("solve_sdp: b size mismatch");

  int n_total = 0;
  for (int s : problem.block_sizes) n_total += s;

  // Per-constraint expanded entries, grouped by block.
  std::vector<BlockSlice> a(m);
  for (int i = 0; i < m; ++i) {
    a[i].per_block.resize(n_blocks);
    for (int k = 0; k < n_blocks; ++k) {
      a[i].per_block[k] = expand(problem.constraints[i], k, n_blocks);
    }
  }
  BlockSlice c;
  c.per_block.resize(n_blocks);
  for (int k = 0; k < n_blocks; ++k) c.per_block[k] = expand(problem.objective, k, n_blocks);

  // Constraints touching each block, so Schur assembly can skip empty pairs.
  std::vector<std::vector<int>> block_constraints(n_blocks);
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < n_blocks; ++k) {
      if (!a[i].per_block[k].empty()) block_constraints[k].push_back(i);
    }
  }

  State st;
  st.X.resize(n_blocks);
  st.Z.resize(n_blocks);
  for (int k = 0; k < n_blocks; ++k) {
    st.X[k] = options.init_scale * MatrixXd::Identity(problem.block_sizes[k],
                                                      problem.block_sizes[k]);
    st.Z[k] = st.X[k];
  }
  st.y = VectorXd::Zero(m);

  const double b_norm = 1.0 + problem.b.lpNorm<Eigen::Infinity>();
  double c_norm = 1.0;
  for (const auto& e : problem.objective) c_norm = std::max(c_norm, 1.0 + std::abs(e.value));

  SdpSolution sol;
  std::vector<MatrixXd> zinv(n_blocks), rd(n_blocks), dx(n_blocks), dz(n_blocks);
  std::vector<MatrixXd> dx_aff(n_blocks), dz_aff(n_blocks);
  std::vector<Eigen::LLT<MatrixXd>> llt_x(n_blocks), llt_z(n_blocks);
  MatrixXd schur(m, m);
  VectorXd rp(m), rhs(m), dy(m), dy_aff(m);

  // Best iterate so far: interior-point runs on degenerate certificates can
  // dither near the optimum without ever meeting the tight tolerances.
  State best = st;
  SdpSolution best_metrics;
  double best_score = std::numeric_limits<double>::infinity();
  int since_improvement = 0;

  auto fill_dual_residual = [&](std::vector<MatrixXd>& out) {
    for (int k = 0; k < n_blocks; ++k) {
      out[k] = -st.Z[k];
      for (const auto& e : c.per_block[k]) out[k](e.row, e.col) += e.value;
      for (int i : block_constraints[k]) {
        const double yi = st.y(i);
        if (yi == 0.0) continue;
        for (const auto& e : a[i].per_block[k]) out[k](e.row, e.col) -= yi * e.value;
      }
    }
  };

  int it = 0;
  for (; it < options.max_iterations; ++it) {
    // Residuals and complementarity.
    for (int i = 0; i < m; ++i) {
      double ax = 0.0;
      for (int k = 0; k < n_blocks; ++k) ax += inner(a[i].per_block[k], st.X[k]);
      rp(i) = problem.b(i) - ax;
    }
    fill_dual_residual(rd);

    double gap = 0.0;
    for (int k = 0; k < n_blocks; ++k) gap += (st.X[k].array() * st.Z[k].array()).sum();
    const double mu = gap / n_total;

    double pobj = 0.0;
    for (int k = 0; k < n_blocks; ++k) pobj += inner(c.per_block[k], st.X[k]);
    const double dobj = problem.b.dot(st.y);

    double rd_norm = 0.0;
    for (int k = 0; k < n_blocks; ++k) {
      if (rd[k].size() > 0) rd_norm = std::max(rd_norm, rd[k].cwiseAbs().maxCoeff());
    }
    const double p_res = rp.lpNorm<Eigen::Infinity>() / b_norm;
    const double d_res = rd_norm / c_norm;
    const double rel_gap = std::abs(gap) / (1.0 + std::abs(pobj) + std::abs(dobj));

    sol.primal_objective = pobj;
    sol.dual_objective = dobj;
    sol.rel_gap = rel_gap;
    sol.primal_residual = p_res;
    sol.dual_residual = d_res;

    const double score = std::max({p_res, d_res, rel_gap});
    if (score < best_score) {
      best_score = score;
      best = st;
      best_metrics = sol;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }

    if (options.verbose) {
      std::printf("sdp it %3d  pobj % .6e  dobj % .6e  gap %.2e  rp %.2e  rd %.2e\n", it,
                  pobj, dobj, rel_gap, p_res, d_res);
    }

    if (p_res < options.tol_feasibility && d_res < options.tol_feasibility &&
        rel_gap < options.tol_gap) {
      sol.status = SdpSolution::Status::Optimal;
      break;
    }
    if (since_improvement >= options.stall_iterations) break;

    // Factor both cone variables.
    bool factor_ok = true;
    for (int k = 0; k < n_blocks; ++k) {
      llt_z[k].compute(st.Z[k]);
      llt_x[k].compute(st.X[k]);
      if (llt_z[k].info() != Eigen::Success || llt_x[k].info() != Eigen::Success) {
        factor_ok = false;
        break;
      }
      const int n = problem.block_sizes[k];
      zinv[k] = llt_z[k].solve(MatrixXd::Identity(n, n));
    }
    if (!factor_ok) break;  // fall back to the best iterate

    // Schur complement M_ij = sum_k tr(A_ik X_k A_jk Zinv_k), built per block
    // from rank-one pieces of X A_j Zinv.
    schur.setZero();
    MatrixXd t;
    for (int k = 0; k < n_blocks; ++k) {
      const auto& touching = block_constraints[k];
      if (touching.empty()) continue;
      const int n = problem.block_sizes[k];
      t.resize(n, n);
      for (int j : touching) {
        t.setZero();
        for (const auto& e : a[j].per_block[k]) {
          t.noalias() += e.value * st.X[k].col(e.row) * zinv[k].row(e.col);
        }
        for (int i : touching) {
          if (i < j) continue;  // fill lower triangle, mirror afterwards
          double s = 0.0;
          for (const auto& e : a[i].per_block[k]) s += e.value * t(e.col, e.row);
          schur(i, j) += s;
        }
      }
    }
    schur = schur.selfadjointView<Eigen::Lower>();

    Eigen::LDLT<MatrixXd> schur_ldlt(schur);
    double jitter = 0.0;
    if (schur_ldlt.info() != Eigen::Success || !schur_ldlt.isPositive()) {
      const double scale = std::max(1.0, schur.diagonal().cwiseAbs().maxCoeff());
      jitter = 1e-13 * scale;
      for (int attempt = 0; attempt < 6; ++attempt, jitter *= 100.0) {
        MatrixXd regularized = schur + jitter * MatrixXd::Identity(m, m);
        schur_ldlt.compute(regularized);
        if (schur_ldlt.info() == Eigen::Success && schur_ldlt.isPositive()) break;
      }
    }

    // Shared pieces of the right-hand side:
    // M dy = rp - sigma*mu*A(Zinv) + A(X) + A(X Rd Zinv) [+ A(dXaff dZaff Zinv)].
    std::vector<MatrixXd> x_rd_zinv(n_blocks);
    for (int k = 0; k < n_blocks; ++k) {
      x_rd_zinv[k].noalias() = st.X[k] * rd[k] * zinv[k];
    }
    auto build_rhs = [&](double sigma_mu, const std::vector<MatrixXd>* cross) {
      for (int i = 0; i < m; ++i) {
        double v = rp(i);
        for (int k = 0; k < n_blocks; ++k) {
          const auto& entries = a[i].per_block[k];
          if (entries.empty()) continue;
          v -= sigma_mu * inner(entries, zinv[k]);
          v += inner(entries, st.X[k]);
          v += inner(entries, x_rd_zinv[k]);
          if (cross) v += inner(entries, (*cross)[k]);
        }
        rhs(i) = v;
      }
    };
    auto recover_direction = [&](const VectorXd& dy_in, double sigma_mu,
                                 const std::vector<MatrixXd>* cross,
                                 std::vector<MatrixXd>& dx_out,
                                 std::vector<MatrixXd>& dz_out) {
      for (int k = 0; k < n_blocks; ++k) {
        dz_out[k] = rd[k];
        for (int i : block_constraints[k]) {
          const double dyi = dy_in(i);
          if (dyi == 0.0) continue;
          for (const auto& e : a[i].per_block[k]) dz_out[k](e.row, e.col) -= dyi * e.value;
        }
        dx_out[k].noalias() = -(st.X[k] * dz_out[k] * zinv[k]);
        dx_out[k] += sigma_mu * zinv[k] - st.X[k];
        if (cross) dx_out[k] -= (*cross)[k];
        dx_out[k] = 0.5 * (dx_out[k] + dx_out[k].transpose()).eval();
      }
    };

    // Predictor (affine scaling).
    build_rhs(0.0, nullptr);
    dy_aff = schur_ldlt.solve(rhs);
    recover_direction(dy_aff, 0.0, nullptr, dx_aff, dz_aff);

    double ap_aff = 1.0, ad_aff = 1.0;
    for (int k = 0; k < n_blocks; ++k) {
      ap_aff = std::min(ap_aff, options.step_fraction * max_step(llt_x[k], dx_aff[k]));
      ad_aff = std::min(ad_aff, options.step_fraction * max_step(llt_z[k], dz_aff[k]));
    }
    double gap_aff = 0.0;
    for (int k = 0; k < n_blocks; ++k) {
      gap_aff += ((st.X[k] + ap_aff * dx_aff[k]).array() *
                  (st.Z[k] + ad_aff * dz_aff[k]).array())
                     .sum();
    }
    gap_aff = std::max(gap_aff, 0.0);
    double sigma = std::pow(gap_aff / std::max(gap, 1e-300), 3.0);
    sigma = std::clamp(sigma, 1e-8, 1.0);

    // Corrector with Mehrotra cross term dXaff dZaff Zinv.
    std::vector<MatrixXd> cross(n_blocks);
    for (int k = 0; k < n_blocks; ++k) {
      cross[k].noalias() = dx_aff[k] * dz_aff[k] * zinv[k];
    }
    build_rhs(sigma * mu, &cross);
    dy = schur_ldlt.solve(rhs);
    recover_direction(dy, sigma * mu, &cross, dx, dz);

    double ap = 1.0, ad = 1.0;
    for (int k = 0; k < n_blocks; ++k) {
      ap = std::min(ap, options.step_fraction * max_step(llt_x[k], dx[k]));
      ad = std::min(ad, options.step_fraction * max_step(llt_z[k], dz[k]));
    }
    if (!std::isfinite(ap) || !std::isfinite(ad)) {
      ap = std::min(ap, 1.0);
      ad = std::min(ad, 1.0);
    }
    ap = std::min(ap, 1.0);
    ad = std::min(ad, 1.0);
    if (ap < 1e-10 && ad < 1e-10) break;  // stalled; fall back to the best iterate

    for (int k = 0; k < n_blocks; ++k) {
      st.X[k] += ap * dx[k];
      st.Z[k] += ad * dz[k];
    }
    st.y += ad * dy;
  }

  if (sol.status == SdpSolution::Status::Optimal) {
    sol.iterations = it;
    sol.X = st.X;
    sol.Z = st.Z;
    sol.y = st.y;
    return sol;
  }

  // Tight tolerances unreachable: hand back the best iterate if it is good
  // enough to act on, otherwise report the failure mode.
  best_metrics.iterations = it;
  best_metrics.X = best.X;
  best_metrics.Z = best.Z;
  best_metrics.y = best.y;
  if (best_metrics.primal_residual < options.loose_feasibility &&
      best_metrics.dual_residual < options.loose_feasibility &&
      best_metrics.rel_gap < options.loose_gap) {
    best_metrics.status = SdpSolution::Status::Optimal;
  } else if (it >= options.max_iterations) {
    best_metrics.status = SdpSolution::Status::IterationLimit;
  } else {
    best_metrics.status = SdpSolution::Status::NumericalFailure;
  }
  return best_metrics;
}

}  // namespace riskplan
