#pragma once

#include <cstdio>
#include <ostream>

#include "pbft/qbd_solver.hpp"

namespace pbft {

struct VotingMeasures {
  double zeta1 = 0.0;  // package has become a block
  double zeta2 = 0.0;  // package has become an orphan
  double A = 0.0;      // voting completed
  double B = 0.0;      // too few nodes to vote
  double C = 0.0;      // voting in progress
  double r1 = 0.0;     // block-pegging rate
  double r2 = 0.0;     // rollback rate
};

// Class sums reuse classify(), so the decision rule lives in one place.
inline VotingMeasures voting_measures(const StateSpace& space, const RowVector& pi,
                                      const ModelParams& params) {
  if (static_cast<std::size_t>(pi.size()) != space.size())
    throw domain_error("distribution size does not match the state space");
  VotingMeasures vm;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const double w = pi(static_cast<Eigen::Index>(i));
    switch (classify(space[i], params)) {
      case Decision::BlockDecided: vm.zeta1 += w; break;
      case Decision::OrphanDecided: vm.zeta2 += w; break;
      case Decision::BelowThreshold: vm.B += w; break;
      case Decision::Undecided: break;
    }
  }
  vm.A = vm.zeta1 + vm.zeta2;
  vm.C = 1.0 - vm.A - vm.B;
  vm.r1 = params.beta * vm.zeta1;
  vm.r2 = params.beta * vm.zeta2;
  return vm;
}

inline VotingMeasures voting_measures(const StateSpace& space,
                                      const StationaryVotingDistribution& pi,
                                      const ModelParams& params) {
  return voting_measures(space, pi.values(), params);
}

inline constexpr const char* kVotingCsvHeader =
    "mu,theta,gamma,beta,p,L,N,zeta1,zeta2,A,B,C,r1,r2";

inline void write_voting_csv_row(std::ostream& os, const ModelParams& mp, const VotingMeasures& vm) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%.10g,%.10g,%.10g,%.10g,%.10g,%d,%d,%.15g,%.15g,%.15g,%.15g,%.15g,%.15g,%.15g\n",
                mp.mu, mp.theta, mp.gamma, mp.beta, mp.p, mp.L, mp.N, vm.zeta1, vm.zeta2, vm.A,
                vm.B, vm.C, vm.r1, vm.r2);
  os << buf;
}

}  // namespace pbft
