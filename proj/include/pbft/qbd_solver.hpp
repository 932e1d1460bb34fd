#pragma once

// Stationary distribution of the finite level-dependent QBD via the UL-type
// RG-factorization, plus a dense direct solve used as an independent check.

#include <Eigen/LU>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "pbft/generator.hpp"

namespace pbft {

struct RgOptions {
  // Reciprocal condition estimate below which a U block counts as singular.
  double min_rcond = 1e-13;
};

// U, R and G measures indexed by level position (see StateSpace::levels()).
//   R[j] maps level j to level j+1 (j < last); G[j] maps level j to j-1
//   (j >= 1; G[0] is empty).
struct RGFactors {
  std::vector<Matrix> U;
  std::vector<Matrix> R;
  std::vector<Matrix> G;
};

namespace detail {

inline std::string level_name(const StateSpace& space, std::size_t j) {
  const Level& lv = space.levels()[j];
  return lv.is_boundary() ? std::string("boundary") : "l=" + std::to_string(lv.nodes);
}

}  // namespace detail

inline RGFactors compute_rg_factors(const BlockGenerator& gen, const RgOptions& opts = {}) {
  const std::size_t levels = gen.level_count();
  const std::size_t last = levels - 1;
  RGFactors f;
  f.U.resize(levels);
  f.R.resize(last);
  f.G.resize(levels);

  f.U[last] = gen.local_block(last);
  for (std::size_t j = last; j-- > 0;) {
    const Eigen::PartialPivLU<Matrix> lu(-f.U[j + 1]);
    const double rc = lu.rcond();
    if (!(rc > opts.min_rcond))
      throw solver_error("U block singular at level " + detail::level_name(gen.space(), j + 1) +
                         " (rcond " + std::to_string(rc) + ")");
    f.G[j + 1] = lu.solve(gen.down_block(j + 1));
    // R (-U) = Q0  <=>  (-U)^T R^T = Q0^T
    const Eigen::PartialPivLU<Matrix> lu_t(-f.U[j + 1].transpose());
    f.R[j] = lu_t.solve(gen.up_block(j).transpose()).transpose();
    f.U[j] = gen.local_block(j) + gen.up_block(j) * f.G[j + 1];
  }
  return f;
}

class StationaryVotingDistribution {
 public:
  StationaryVotingDistribution(std::vector<Level> levels, RowVector pi)
      : levels_(std::move(levels)), pi_(std::move(pi)) {}

  const RowVector& values() const noexcept { return pi_; }
  double operator[](std::size_t i) const { return pi_(static_cast<Eigen::Index>(i)); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(pi_.size()); }

  RowVector level(std::size_t j) const {
    const Level& lv = levels_.at(j);
    return pi_.segment(static_cast<Eigen::Index>(lv.offset), static_cast<Eigen::Index>(lv.size));
  }
  const std::vector<Level>& levels() const noexcept { return levels_; }

 private:
  std::vector<Level> levels_;
  RowVector pi_;
};

// v0 U0 = 0, v0 e = 1. The null space of an irreducible conservative
// generator is one-dimensional, so replacing one balance column by the
// normalization leaves a nonsingular system.
inline RowVector censored_stationary_vector(const Matrix& u0) {
  const Eigen::Index n = u0.rows();
  Matrix a = u0.transpose();
  a.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  const Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw solver_error("censored boundary generator has a degenerate null space");
  return lu.solve(rhs).transpose();
}

inline StationaryVotingDistribution stationary_distribution(const BlockGenerator& gen,
                                                            const RGFactors& factors) {
  const std::size_t levels = gen.level_count();
  if (factors.U.size() != levels || factors.R.size() + 1 != levels)
    throw domain_error("RG factors do not match the generator's level structure");

  RowVector pi(static_cast<Eigen::Index>(gen.size()));
  RowVector x = censored_stationary_vector(factors.U[0]);
  const auto& lv = gen.space().levels();
  pi.segment(static_cast<Eigen::Index>(lv[0].offset), x.size()) = x;
  for (std::size_t j = 0; j + 1 < levels; ++j) {
    x = x * factors.R[j];
    pi.segment(static_cast<Eigen::Index>(lv[j + 1].offset), x.size()) = x;
  }
  const double mass = pi.sum();
  if (!(mass > 0.0) || !std::isfinite(mass)) throw solver_error("stationary vector has no mass");
  pi /= mass;
  return StationaryVotingDistribution(lv, std::move(pi));
}

inline StationaryVotingDistribution stationary_distribution(const BlockGenerator& gen) {
  return stationary_distribution(gen, compute_rg_factors(gen));
}

inline constexpr std::size_t kDenseOracleCap = 20'000;

// Direct solve of pi Q = 0, pi e = 1 with the last balance equation replaced
// by the normalization row.
inline StationaryVotingDistribution dense_oracle(const Matrix& q, std::vector<Level> levels) {
  const Eigen::Index n = q.rows();
  if (static_cast<std::size_t>(n) > kDenseOracleCap)
    throw size_limit_error(static_cast<std::size_t>(n), kDenseOracleCap);
  Matrix a = q.transpose();
  a.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  const Eigen::PartialPivLU<Matrix> lu(a);
  if (!(lu.rcond() > 1e-15)) throw solver_error("dense balance system is singular");
  return StationaryVotingDistribution(std::move(levels), lu.solve(rhs).transpose());
}

inline StationaryVotingDistribution dense_oracle(const BlockGenerator& gen) {
  if (gen.size() > kDenseOracleCap) throw size_limit_error(gen.size(), kDenseOracleCap);
  return dense_oracle(gen.dense(), gen.space().levels());
}

// ||pi Q||_inf
inline double balance_residual(const BlockGenerator& gen, const StationaryVotingDistribution& pi) {
  const RowVector r = pi.values() * gen.matrix();
  return r.cwiseAbs().maxCoeff();
}

inline void write_pi_csv(std::ostream& os, const StateSpace& space,
                         const StationaryVotingDistribution& pi) {
  os << "n,m,k,class,pi\n";
  char buf[160];
  for (std::size_t i = 0; i < space.size(); ++i) {
    const VotingState& s = space[i];
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%s,%.17g\n", s.n, s.m, s.k,
                  to_string(space.decision(i)), pi[i]);
    os << buf;
  }
}

}  // namespace pbft
