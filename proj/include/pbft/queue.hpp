#pragma once

// Matrix-geometric analysis of the batch-arrival batch-service transaction
// pool: Poisson(lambda) single arrivals, Poisson(r2) returns of b orphaned
// transactions, and exponential(r1) removal of b transactions by a block
// whenever at least b transactions are pooled.

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "pbft/generator.hpp"

namespace pbft {

struct QueueParams {
  double lambda = 1.0;  // transaction arrival rate
  int b = 1;            // transactions per package
  double r1 = 1.0;      // block-pegging rate
  double r2 = 0.0;      // rollback rate (batches of b)

  void validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw domain_error("lambda must be positive");
    if (b < 1) throw domain_error("b must be at least 1");
    if (!(r1 > 0.0) || !std::isfinite(r1)) throw domain_error("r1 must be positive");
    if (!(r2 >= 0.0) || !std::isfinite(r2)) throw domain_error("r2 must be non-negative");
  }

  QueueBlocks blocks() const { return build_queue_blocks(lambda, b, r1, r2); }
  double up_drift() const noexcept { return lambda + r2 * b; }
  double down_drift() const noexcept { return r1 * b; }
};

enum class Stability { Stable, Unstable };

// Positive recurrent iff lambda + r2 b < r1 b.
inline Stability stability_check(const QueueParams& qp) {
  qp.validate();
  return qp.up_drift() < qp.down_drift() ? Stability::Stable : Stability::Unstable;
}

inline std::string describe_stability(const QueueParams& qp) {
  std::ostringstream os;
  os.precision(12);
  const bool stable = qp.up_drift() < qp.down_drift();
  os << "lambda + r2*b = " << qp.lambda << " + " << qp.r2 << "*" << qp.b << " = " << qp.up_drift()
     << (stable ? " < " : " >= ") << "r1*b = " << qp.r1 << "*" << qp.b << " = "
     << qp.down_drift();
  return os.str();
}

// Stationary vector of the phase generator A2 + A1 + A0; uniform 1/b for
// this queue.
inline RowVector mean_drift_witness(const QueueBlocks& qb) {
  const Matrix a = qb.A0 + qb.A1 + qb.A2;
  const Eigen::Index n = a.rows();
  Matrix m = a.transpose();
  m.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  return Eigen::FullPivLU<Matrix>(m).solve(rhs).transpose();
}

struct RateIterationOptions {
  double epsilon = 1e-12;
  std::size_t max_iter = 1'000'000;
};

struct RateMatrix {
  Matrix R;
  std::size_t iterations = 0;
  double last_delta = 0.0;  // max-entry norm of the final step
};

inline double max_entry_norm(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

// R_0 = 0, R_{n+1} = (R_n^2 A2 + A0)(-A1^{-1}); stops once
// ||R_{n+1} - R_n||_max < epsilon. observe(R_n) is called on every iterate
// from R_1 on. No stability check here.
template <typename Observer>
RateMatrix iterate_rate_matrix(const QueueBlocks& qb, const RateIterationOptions& opts,
                               Observer&& observe) {
  if (!(opts.epsilon > 0.0)) throw domain_error("epsilon must be positive");
  const Eigen::Index n = qb.phases();
  const Eigen::PartialPivLU<Matrix> lu(-qb.A1);
  const Matrix neg_a1_inv = lu.inverse();  // A1 is strictly diagonally dominant

  Matrix r = Matrix::Zero(n, n);
  Matrix next(n, n);
  double delta = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    next.noalias() = (r * r * qb.A2 + qb.A0) * neg_a1_inv;
    delta = max_entry_norm(next - r);
    r.swap(next);
    observe(static_cast<const Matrix&>(r));
    if (delta < opts.epsilon) return {std::move(r), it, delta};
  }
  throw convergence_error(opts.max_iter, delta);
}

inline RateMatrix iterate_rate_matrix(const QueueBlocks& qb, const RateIterationOptions& opts = {}) {
  return iterate_rate_matrix(qb, opts, [](const Matrix&) {});
}

inline RateMatrix iterate_rate_matrix(const QueueParams& qp, const RateIterationOptions& opts = {}) {
  if (stability_check(qp) == Stability::Unstable)
    throw stability_error("queue is not positive recurrent: " + describe_stability(qp));
  return iterate_rate_matrix(qp.blocks(), opts);
}

// ||R^2 A2 + R A1 + A0||_max
inline double rate_matrix_residual(const QueueBlocks& qb, const Matrix& r) {
  return max_entry_norm(r * r * qb.A2 + r * qb.A1 + qb.A0);
}

inline double spectral_radius(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  const Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

struct QueueSolution {
  QueueParams params;
  Matrix R;
  RowVector omega0;  // pool sizes 0 .. b-1
  RowVector omega1;  // pool sizes b .. 2b-1
  double eta1 = 0.0;  // no package in the system
  double eta2 = 0.0;  // a package is being voted on
  double Re1 = 0.0;   // block-pegging rate
  double Re2 = 0.0;   // orphan return rate
  double TH = 0.0;    // transactions committed per unit time
  double mean_pool_size = 0.0;
  std::size_t iterations = 0;
  double last_delta = 0.0;

  // omega_k = omega1 R^{k-1} for k >= 1.
  RowVector omega(std::size_t k) const {
    if (k == 0) return omega0;
    RowVector w = omega1;
    for (std::size_t i = 1; i < k; ++i) w = w * R;
    return w;
  }

  // First level whose total mass drops below threshold.
  std::size_t tail_level(double threshold = 1e-12, std::size_t limit = 100'000'000) const {
    RowVector w = omega1;
    for (std::size_t k = 1; k < limit; ++k) {
      if (w.sum() < threshold) return k;
      w = w * R;
    }
    return limit;
  }
};

// Boundary vectors from
//   omega0 B1_0 + omega1 A2 = 0
//   omega0 A0 + omega1 (A1 + R A2) = 0
//   omega0 e + omega1 (I - R)^{-1} e = 1
// plus the pool-level measures built on them.
inline QueueSolution queue_stationary(const QueueParams& qp, const RateMatrix& rate) {
  qp.validate();
  const QueueBlocks qb = qp.blocks();
  const Eigen::Index n = qb.phases();
  const Matrix& r = rate.R;
  if (r.rows() != n || r.cols() != n) throw domain_error("rate matrix has the wrong dimension");

  const Matrix i_minus_r = Matrix::Identity(n, n) - r;
  const Eigen::PartialPivLU<Matrix> ir_lu(i_minus_r);
  const Vector tail_ones = ir_lu.solve(Vector::Ones(n));  // (I-R)^{-1} e

  Matrix m(2 * n, 2 * n);
  m.topLeftCorner(n, n) = qb.B1_0;
  m.topRightCorner(n, n) = qb.A0;
  m.bottomLeftCorner(n, n) = qb.A2;
  m.bottomRightCorner(n, n) = qb.A1 + r * qb.A2;
  m.col(2 * n - 1).head(n).setOnes();
  m.col(2 * n - 1).tail(n) = tail_ones;

  Vector rhs = Vector::Zero(2 * n);
  rhs(2 * n - 1) = 1.0;
  const Eigen::PartialPivLU<Matrix> lu(m.transpose());
  if (!(lu.rcond() > 1e-15))
    throw solver_error("boundary system is singular (unstable queue or unconverged R)");
  const Vector x = lu.solve(rhs);

  QueueSolution sol;
  sol.params = qp;
  sol.R = r;
  sol.omega0 = x.head(n).transpose();
  sol.omega1 = x.tail(n).transpose();
  sol.iterations = rate.iterations;
  sol.last_delta = rate.last_delta;

  sol.eta1 = sol.omega0.sum();
  sol.eta2 = 1.0 - sol.eta1;
  sol.Re1 = sol.eta2 * qp.r1;
  sol.Re2 = sol.eta2 * qp.r2;
  sol.TH = sol.Re1 * qp.b;

  // E[I] = omega0 j + b omega1 (I-R)^{-2} e + omega1 (I-R)^{-1} j, where
  // j = (0, 1, ..., b-1)^T is the within-level offset.
  const Vector offsets = Vector::LinSpaced(n, 0.0, static_cast<double>(n - 1));
  sol.mean_pool_size = sol.omega0.dot(offsets) +
                       static_cast<double>(qp.b) * sol.omega1.dot(ir_lu.solve(tail_ones)) +
                       sol.omega1.dot(ir_lu.solve(offsets));
  return sol;
}

// Stability check, R-iteration and boundary solve in one call.
inline QueueSolution solve_queue(const QueueParams& qp, const RateIterationOptions& opts = {}) {
  return queue_stationary(qp, iterate_rate_matrix(qp, opts));
}

// TH = Re1 b. In steady state the pool level has zero drift, so TH must also
// equal lambda + b r2; a mismatch means the solution is not stationary.
inline double throughput(const QueueParams& qp, const QueueSolution& sol, double tolerance = 1e-8) {
  const double th = sol.Re1 * qp.b;
  const double inflow = qp.lambda + qp.b * qp.r2;
  // Relative once the flow exceeds 1: R is only accurate to its stopping
  // tolerance, amplified by 1 / (1 - sp(R)) near the stability boundary.
  if (!(std::abs(th - inflow) <= tolerance * std::max(1.0, inflow)))
    throw consistency_error("throughput " + std::to_string(th) +
                            " violates flow balance lambda + b*r2 = " + std::to_string(inflow));
  return th;
}

inline constexpr const char* kQueueCsvHeader = "lambda,b,r1,r2,stable,iterations,eta1,eta2,Re1,Re2,TH";

inline void write_queue_csv_row(std::ostream& os, const QueueParams& qp, const QueueSolution* sol) {
  char buf[512];
  if (sol) {
    std::snprintf(buf, sizeof buf, "%.10g,%d,%.15g,%.15g,1,%zu,%.15g,%.15g,%.15g,%.15g,%.15g\n",
                  qp.lambda, qp.b, qp.r1, qp.r2, sol->iterations, sol->eta1, sol->eta2, sol->Re1,
                  sol->Re2, sol->TH);
  } else {
    std::snprintf(buf, sizeof buf, "%.10g,%d,%.15g,%.15g,0,0,,,,,\n", qp.lambda, qp.b, qp.r1, qp.r2);
  }
  os << buf;
}

}  // namespace pbft
