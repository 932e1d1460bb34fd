#pragma once

// Generators of the voting CTMC and of the transaction-pool QBD.

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "pbft/model.hpp"

namespace pbft {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class Event { Entry, Departure, Approve, Refuse, Settle };

struct Transition {
  VotingState target;
  double rate = 0.0;
  Event event = Event::Entry;
};

// Outgoing transitions of s. Rates are event rates: theta and gamma do not
// scale with the number of nodes present.
inline std::vector<Transition> transition_rules(const VotingState& s, const ModelParams& params) {
  const Decision d = classify(s, params);  // throws on invalid states
  const int floor = params.min_voting_nodes();
  const int ceiling = params.max_nodes();
  std::vector<Transition> out;
  out.reserve(5);

  if (d == Decision::BelowThreshold) {
    out.push_back({{s.n + 1, 0, 0}, params.mu, Event::Entry});
    if (s.n >= 1) out.push_back({{s.n - 1, 0, 0}, params.theta, Event::Departure});
    return out;
  }

  const bool pending_votes = s.m + s.k <= s.n - 1;
  if (s.n < ceiling) out.push_back({{s.n + 1, s.m, s.k}, params.mu, Event::Entry});
  if (s.n == floor) {
    // The quorum floor can only be left before any vote has been cast.
    if (s.m == 0 && s.k == 0) out.push_back({{s.n - 1, 0, 0}, params.theta, Event::Departure});
  } else if (pending_votes) {
    out.push_back({{s.n - 1, s.m, s.k}, params.theta, Event::Departure});
  }
  if (pending_votes) {
    out.push_back({{s.n, s.m + 1, s.k}, params.gamma * params.p, Event::Approve});
    out.push_back({{s.n, s.m, s.k + 1}, params.gamma * params.q(), Event::Refuse});
  }
  if (is_decided(d)) out.push_back({{s.n, 0, 0}, params.beta, Event::Settle});
  return out;
}

// Sparse generator Q over a StateSpace, with per-level block access.
// Levels are addressed by their position in StateSpace::levels(); the level
// after position j is j+1.
class BlockGenerator {
 public:
  BlockGenerator(StateSpace space, SparseMatrix q) : space_(std::move(space)), q_(std::move(q)) {}

  const StateSpace& space() const noexcept { return space_; }
  const SparseMatrix& matrix() const noexcept { return q_; }
  std::size_t size() const noexcept { return space_.size(); }
  std::size_t level_count() const noexcept { return space_.level_count(); }

  Matrix block(std::size_t from_level, std::size_t to_level) const {
    const Level& a = space_.levels().at(from_level);
    const Level& b = space_.levels().at(to_level);
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(a.size), static_cast<Eigen::Index>(b.size));
    for (std::size_t i = 0; i < a.size; ++i) {
      const auto row = static_cast<Eigen::Index>(a.offset + i);
      for (SparseMatrix::InnerIterator it(q_, row); it; ++it) {
        const auto col = static_cast<std::size_t>(it.col());
        if (col >= b.offset && col < b.offset + b.size)
          out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col - b.offset)) = it.value();
      }
    }
    return out;
  }

  // Q1^(j): transitions within level j.
  Matrix local_block(std::size_t j) const { return block(j, j); }
  // Q0^(j): transitions from level j to level j+1.
  Matrix up_block(std::size_t j) const { return block(j, j + 1); }
  // Q2^(j): transitions from level j to level j-1.
  Matrix down_block(std::size_t j) const { return block(j, j - 1); }

  Matrix dense() const { return Matrix(q_); }

  // Plain-text sparse triplets, one "row col value" line per nonzero.
  void write_triplets(std::ostream& os) const {
    os << "# rows=" << q_.rows() << " cols=" << q_.cols() << " nnz=" << q_.nonZeros() << '\n';
    char buf[96];
    for (Eigen::Index r = 0; r < q_.outerSize(); ++r)
      for (SparseMatrix::InnerIterator it(q_, r); it; ++it) {
        std::snprintf(buf, sizeof buf, "%td %td %.17g\n", static_cast<std::ptrdiff_t>(it.row()),
                      static_cast<std::ptrdiff_t>(it.col()), it.value());
        os << buf;
      }
  }

 private:
  StateSpace space_;
  SparseMatrix q_;
};

inline BlockGenerator build_voting_generator(const ModelParams& params,
                                             std::size_t cap = kDefaultStateCap) {
  StateSpace space(params, cap);
  const auto n = static_cast<Eigen::Index>(space.size());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(space.size() * 6);
  for (std::size_t i = 0; i < space.size(); ++i) {
    double exit_rate = 0.0;
    for (const Transition& t : transition_rules(space[i], params)) {
      triplets.emplace_back(static_cast<Eigen::Index>(i),
                            static_cast<Eigen::Index>(space.index(t.target)), t.rate);
      exit_rate += t.rate;
    }
    triplets.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i), -exit_rate);
  }
  SparseMatrix q(n, n);
  q.setFromTriplets(triplets.begin(), triplets.end());
  q.makeCompressed();
  return BlockGenerator(std::move(space), std::move(q));
}

// Blocks of the level-independent QBD for the transaction pool. Level k
// holds pool sizes kb .. kb+b-1.
struct QueueBlocks {
  Matrix B1_0;  // within the idle boundary level
  Matrix A0;    // one level up
  Matrix A1;    // within a busy level
  Matrix A2;    // one level down

  Eigen::Index phases() const noexcept { return A1.rows(); }
};

inline QueueBlocks build_queue_blocks(double lambda, int b, double r1, double r2) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw domain_error("lambda must be positive");
  if (!(r1 > 0.0) || !std::isfinite(r1)) throw domain_error("r1 must be positive");
  if (!(r2 >= 0.0) || !std::isfinite(r2)) throw domain_error("r2 must be non-negative");
  if (b < 1) throw domain_error("batch size b must be at least 1");

  const Eigen::Index n = b;
  QueueBlocks qb{Matrix::Zero(n, n), Matrix::Zero(n, n), Matrix::Zero(n, n), Matrix::Zero(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    qb.B1_0(i, i) = -(lambda + r2);
    qb.A1(i, i) = -(lambda + r2 + r1);
    qb.A0(i, i) = r2;
    qb.A2(i, i) = r1;
    if (i + 1 < n) {
      qb.B1_0(i, i + 1) = lambda;
      qb.A1(i, i + 1) = lambda;
    }
  }
  // The last phase of a level moves to the first phase of the next one.
  qb.A0(n - 1, 0) += lambda;
  return qb;
}

}  // namespace pbft
