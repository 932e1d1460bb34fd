#pragma once

// Parameters, states and decision rules of the dynamic PBFT voting process.
//
// A state (n, m, k) records the number of valid voting nodes n, approvals m
// and refusals k. Voting only happens once at least 3L nodes are present, and
// the network never grows beyond 3N+2 nodes.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pbft/errors.hpp"

namespace pbft {

struct ModelParams {
  double mu = 1.0;     // node entry rate
  double theta = 1.0;  // node departure rate
  double gamma = 1.0;  // vote rate
  double beta = 1.0;   // settlement rate (block-pegging and rolling-back)
  double p = 0.5;      // approval probability of a single vote
  int L = 1;           // voting floor is 3L nodes
  int N = 1;           // network ceiling is 3N+2 nodes

  double q() const noexcept { return 1.0 - p; }
  int min_voting_nodes() const noexcept { return 3 * L; }
  int max_nodes() const noexcept { return 3 * N + 2; }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw domain_error(std::string(name) + " must be a positive finite rate");
    };
    positive(mu, "mu");
    positive(theta, "theta");
    positive(gamma, "gamma");
    positive(beta, "beta");
    if (!(p > 0.0 && p < 1.0)) throw domain_error("p must lie strictly inside (0, 1)");
    if (L < 1) throw domain_error("L must be at least 1");
    if (N < L) throw domain_error("N must be at least L");
  }
};

struct VotingState {
  int n = 0;  // valid voting nodes
  int m = 0;  // approvals
  int k = 0;  // refusals

  friend bool operator==(const VotingState&, const VotingState&) = default;
};

struct Thresholds {
  int m_l = 0;  // approvals needed for a block
  int k_l = 0;  // refusals that make the package an orphan
};

enum class Decision { BelowThreshold, Undecided, BlockDecided, OrphanDecided };

inline const char* to_string(Decision d) noexcept {
  switch (d) {
    case Decision::BelowThreshold: return "below-threshold";
    case Decision::Undecided: return "undecided";
    case Decision::BlockDecided: return "block";
    case Decision::OrphanDecided: return "orphan";
  }
  return "?";
}

// Decision thresholds at node count n, written as n = 3k + r:
//   m_l = 2k+1 for r in {0,1}, 2k+2 for r = 2
//   k_l = k    for r = 0,      k+1  for r in {1,2}
// so that m_l + k_l = n + 1.
inline Thresholds thresholds(int n, int L) {
  if (n < 3 * L)
    throw domain_error("no voting below " + std::to_string(3 * L) + " nodes (n = " +
                       std::to_string(n) + ")");
  const int k = n / 3;
  const int r = n % 3;
  return {r == 2 ? 2 * k + 2 : 2 * k + 1, r == 0 ? k : k + 1};
}

inline Thresholds thresholds(int n, const ModelParams& params) {
  return thresholds(n, params.L);
}

inline bool is_valid_state(const VotingState& s, const ModelParams& params) noexcept {
  if (s.n < 0 || s.n > params.max_nodes() || s.m < 0 || s.k < 0) return false;
  if (s.n < params.min_voting_nodes()) return s.m == 0 && s.k == 0;
  return s.m + s.k <= s.n;
}

inline Decision classify(const VotingState& s, const ModelParams& params) {
  if (!is_valid_state(s, params))
    throw domain_error("invalid voting state (" + std::to_string(s.n) + "," +
                       std::to_string(s.m) + "," + std::to_string(s.k) + ")");
  if (s.n < params.min_voting_nodes()) return Decision::BelowThreshold;
  const Thresholds t = thresholds(s.n, params.L);
  if (s.m >= t.m_l) return Decision::BlockDecided;
  if (s.k >= t.k_l) return Decision::OrphanDecided;
  return Decision::Undecided;
}

inline bool is_decided(Decision d) noexcept {
  return d == Decision::BlockDecided || d == Decision::OrphanDecided;
}

// One QBD level. Level 0 holds the boundary states (i,0,0), i < 3L; every
// other level holds all (l, m, k) with a fixed node count l.
struct Level {
  int nodes = 0;  // node count l; -1 for the boundary level
  std::size_t offset = 0;
  std::size_t size = 0;

  bool is_boundary() const noexcept { return nodes < 0; }
};

inline std::size_t voting_level_size(int l) noexcept {
  return static_cast<std::size_t>(l + 1) * static_cast<std::size_t>(l + 2) / 2;
}

inline std::size_t state_count(const ModelParams& params) noexcept {
  std::size_t total = static_cast<std::size_t>(params.min_voting_nodes());
  for (int l = params.min_voting_nodes(); l <= params.max_nodes(); ++l)
    total += voting_level_size(l);
  return total;
}

inline constexpr std::size_t kDefaultStateCap = 200'000;

// Ordered enumeration of the state space: boundary states by node count,
// then each voting level in ascending l with m ascending and k ascending
// within m.
class StateSpace {
 public:
  StateSpace(const ModelParams& params, std::size_t cap = kDefaultStateCap)
      : params_(params) {
    params_.validate();
    const std::size_t total = state_count(params_);
    if (total > cap) throw size_limit_error(total, cap);

    states_.reserve(total);
    const int floor = params_.min_voting_nodes();
    levels_.push_back({-1, 0, static_cast<std::size_t>(floor)});
    for (int i = 0; i < floor; ++i) states_.push_back({i, 0, 0});
    for (int l = floor; l <= params_.max_nodes(); ++l) {
      levels_.push_back({l, states_.size(), voting_level_size(l)});
      for (int m = 0; m <= l; ++m)
        for (int k = 0; m + k <= l; ++k) states_.push_back({l, m, k});
    }
  }

  const ModelParams& params() const noexcept { return params_; }
  std::size_t size() const noexcept { return states_.size(); }
  const VotingState& operator[](std::size_t i) const { return states_[i]; }
  const std::vector<VotingState>& states() const noexcept { return states_; }

  const std::vector<Level>& levels() const noexcept { return levels_; }
  std::size_t level_count() const noexcept { return levels_.size(); }

  // Position of node count n in levels(); boundary states map to 0.
  std::size_t level_of(int n) const noexcept {
    const int floor = params_.min_voting_nodes();
    return n < floor ? 0 : static_cast<std::size_t>(n - floor + 1);
  }

  bool contains(const VotingState& s) const noexcept { return is_valid_state(s, params_); }

  std::size_t index(const VotingState& s) const {
    if (!contains(s)) throw domain_error("state is not in the state space");
    if (s.n < params_.min_voting_nodes()) return static_cast<std::size_t>(s.n);
    const Level& lv = levels_[level_of(s.n)];
    // Rows m' < m hold (l - m' + 1) states each.
    const std::size_t m = static_cast<std::size_t>(s.m);
    const std::size_t l = static_cast<std::size_t>(s.n);
    return lv.offset + m * (l + 1) - m * (m - 1) / 2 + static_cast<std::size_t>(s.k);
  }

  Decision decision(std::size_t i) const { return classify(states_[i], params_); }

 private:
  ModelParams params_;
  std::vector<VotingState> states_;
  std::vector<Level> levels_;
};

inline StateSpace enumerate_states(const ModelParams& params,
                                   std::size_t cap = kDefaultStateCap) {
  return StateSpace(params, cap);
}

}  // namespace pbft
