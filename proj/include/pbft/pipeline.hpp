#pragma once

// End-to-end computations: stationary block/orphan rates of the voting
// process, then throughput of the transaction pool fed by those rates.

#include <optional>

#include "pbft/queue.hpp"
#include "pbft/voting_measures.hpp"

namespace pbft {

struct VotingResult {
  StationaryVotingDistribution pi;
  VotingMeasures measures;
  double residual = 0.0;  // ||pi Q||_inf
};

inline VotingResult solve_voting(const BlockGenerator& gen, const RgOptions& opts = {}) {
  const RGFactors factors = compute_rg_factors(gen, opts);
  StationaryVotingDistribution pi = stationary_distribution(gen, factors);
  const double residual = balance_residual(gen, pi);
  VotingMeasures vm = voting_measures(gen.space(), pi, gen.space().params());
  return {std::move(pi), vm, residual};
}

inline VotingResult solve_voting(const ModelParams& params, std::size_t cap = kDefaultStateCap) {
  return solve_voting(build_voting_generator(params, cap));
}

struct ThroughputResult {
  VotingMeasures measures;
  QueueParams queue;
  Stability stability = Stability::Unstable;
  std::optional<QueueSolution> solution;  // empty when unstable
};

inline ThroughputResult solve_throughput(const QueueParams& qp,
                                         const RateIterationOptions& opts = {}) {
  ThroughputResult out;
  out.queue = qp;
  out.stability = stability_check(qp);
  if (out.stability == Stability::Stable) {
    QueueSolution sol = solve_queue(qp, opts);
    throughput(qp, sol);
    out.solution = std::move(sol);
  }
  return out;
}

inline ThroughputResult solve_throughput(const ModelParams& params, double lambda, int b,
                                         const RateIterationOptions& opts = {},
                                         std::size_t cap = kDefaultStateCap) {
  const VotingResult voting = solve_voting(params, cap);
  ThroughputResult out =
      solve_throughput(QueueParams{lambda, b, voting.measures.r1, voting.measures.r2}, opts);
  out.measures = voting.measures;
  return out;
}

}  // namespace pbft
