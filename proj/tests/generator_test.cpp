#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "oracles.hpp"
#include "pbft/generator.hpp"

namespace pbft {
namespace {

ModelParams reference_params(int L, int N) {
  ModelParams p;
  p.mu = 2.0;
  p.theta = 2.0;
  p.gamma = 10.0;
  p.beta = 2.0;
  p.p = 0.7;
  p.L = L;
  p.N = N;
  return p;
}

// Distinct rates so every sum in a diagonal identifies its terms.
ModelParams distinct_rates(int L, int N) {
  ModelParams p;
  p.mu = 1.0;
  p.theta = 10.0;
  p.gamma = 100.0;
  p.beta = 1000.0;
  p.p = 0.3;
  p.L = L;
  p.N = N;
  return p;
}

bool has(const std::vector<Transition>& ts, VotingState target, double rate) {
  return std::any_of(ts.begin(), ts.end(), [&](const Transition& t) {
    return t.target == target && std::abs(t.rate - rate) < 1e-15;
  });
}

TEST(TransitionRules, BoundaryTop) {
  const ModelParams p = reference_params(1, 1);
  const auto ts = transition_rules({2, 0, 0}, p);
  ASSERT_EQ(ts.size(), 2u);
  EXPECT_TRUE(has(ts, {3, 0, 0}, p.mu));
  EXPECT_TRUE(has(ts, {1, 0, 0}, p.theta));
}

TEST(TransitionRules, EmptyNetworkOnlyGrows) {
  const ModelParams p = reference_params(1, 1);
  const auto ts = transition_rules({0, 0, 0}, p);
  ASSERT_EQ(ts.size(), 1u);
  EXPECT_TRUE(has(ts, {1, 0, 0}, p.mu));
}

TEST(TransitionRules, DecidedStateAtCeiling) {
  const ModelParams p = reference_params(1, 1);
  const auto ts = transition_rules({5, 4, 0}, p);
  ASSERT_EQ(ts.size(), 4u);
  EXPECT_TRUE(has(ts, {4, 4, 0}, p.theta));
  EXPECT_TRUE(has(ts, {5, 5, 0}, p.gamma * p.p));
  EXPECT_TRUE(has(ts, {5, 4, 1}, p.gamma * p.q()));
  EXPECT_TRUE(has(ts, {5, 0, 0}, p.beta));
  double exit = 0.0;
  for (const auto& t : ts) exit += t.rate;
  EXPECT_NEAR(exit, p.gamma + p.theta + p.beta, 1e-14);
}

TEST(TransitionRules, FullyVotedAtFloor) {
  const ModelParams p = reference_params(1, 1);
  const auto ts = transition_rules({3, 3, 0}, p);
  ASSERT_EQ(ts.size(), 2u);
  EXPECT_TRUE(has(ts, {4, 3, 0}, p.mu));
  EXPECT_TRUE(has(ts, {3, 0, 0}, p.beta));
}

TEST(TransitionRules, FloorDepartureOnlyBeforeVoting) {
  const ModelParams p = reference_params(1, 2);
  EXPECT_TRUE(has(transition_rules({3, 0, 0}, p), {2, 0, 0}, p.theta));
  for (const auto& t : transition_rules({3, 1, 0}, p)) EXPECT_NE(t.event, Event::Departure);
  for (const auto& t : transition_rules({3, 0, 1}, p)) EXPECT_NE(t.event, Event::Departure);
}

TEST(TransitionRules, RejectsInvalidState) {
  EXPECT_THROW(transition_rules({4, 3, 2}, reference_params(1, 1)), domain_error);
}

TEST(Generator, SmallInstanceShapeAndRowSums) {
  const BlockGenerator g = build_voting_generator(reference_params(1, 1));
  ASSERT_EQ(g.size(), 49u);
  const Matrix q = g.dense();
  EXPECT_EQ(q.rows(), 49);
  EXPECT_LE(q.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Generator, Integrity) {
  for (auto [L, N] : {std::pair{1, 1}, {1, 2}, {1, 3}, {2, 3}}) {
    const BlockGenerator g = build_voting_generator(reference_params(L, N));
    const Matrix q = g.dense();
    EXPECT_LE(q.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      EXPECT_LT(q(i, i), 0.0);
      for (Eigen::Index j = 0; j < q.cols(); ++j)
        if (i != j) {
          EXPECT_GE(q(i, j), 0.0);
        }
    }
    EXPECT_TRUE(oracle::strongly_connected(q)) << "L=" << L << " N=" << N;
  }
}

TEST(Generator, BlockTridiagonal) {
  const BlockGenerator g = build_voting_generator(reference_params(1, 2));
  for (std::size_t a = 0; a < g.level_count(); ++a)
    for (std::size_t b = 0; b < g.level_count(); ++b) {
      const std::size_t gap = a > b ? a - b : b - a;
      if (gap >= 2) {
        EXPECT_EQ(g.block(a, b).cwiseAbs().maxCoeff(), 0.0) << a << "," << b;
      }
    }
}

TEST(Generator, BlocksReassembleTheMatrix) {
  const BlockGenerator g = build_voting_generator(reference_params(1, 2));
  const Matrix q = g.dense();
  Matrix rebuilt = Matrix::Zero(q.rows(), q.cols());
  const auto& lv = g.space().levels();
  for (std::size_t j = 0; j < g.level_count(); ++j) {
    const auto o = static_cast<Eigen::Index>(lv[j].offset);
    const auto n = static_cast<Eigen::Index>(lv[j].size);
    rebuilt.block(o, o, n, n) = g.local_block(j);
    if (j + 1 < g.level_count())
      rebuilt.block(o, static_cast<Eigen::Index>(lv[j + 1].offset), n,
                    static_cast<Eigen::Index>(lv[j + 1].size)) = g.up_block(j);
    if (j > 0)
      rebuilt.block(o, static_cast<Eigen::Index>(lv[j - 1].offset), n,
                    static_cast<Eigen::Index>(lv[j - 1].size)) = g.down_block(j);
  }
  EXPECT_EQ((rebuilt - q).cwiseAbs().maxCoeff(), 0.0);
  // Boundary up-block: only (3L-1,0,0) -> (3L,0,0) at mu.
  const Matrix up0 = g.up_block(0);
  EXPECT_EQ(up0.sum(), g.space().params().mu);
  EXPECT_EQ(up0(2, 0), g.space().params().mu);
}

TEST(Generator, DiagonalCasesExhaustive) {
  for (auto [L, N] : {std::pair{1, 2}, {2, 3}}) {
    const ModelParams p = distinct_rates(L, N);
    const BlockGenerator g = build_voting_generator(p);
    const SparseMatrix& q = g.matrix();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const VotingState& s = g.space()[i];
      EXPECT_DOUBLE_EQ(q.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)),
                       oracle::voting_diagonal(s, p))
          << s.n << "," << s.m << "," << s.k;
    }
  }
}

TEST(Generator, NamedDiagonals) {
  const ModelParams p = distinct_rates(1, 1);
  const BlockGenerator g = build_voting_generator(p);
  auto diag = [&](VotingState s) {
    const auto i = static_cast<Eigen::Index>(g.space().index(s));
    return g.matrix().coeff(i, i);
  };
  EXPECT_DOUBLE_EQ(diag({4, 1, 1}), -(p.gamma + p.mu + p.theta));
  EXPECT_DOUBLE_EQ(diag({5, 4, 1}), -p.beta);
  EXPECT_DOUBLE_EQ(diag({5, 0, 5}), -p.beta);
}

TEST(Generator, TripletDump) {
  const BlockGenerator g = build_voting_generator(reference_params(1, 1));
  std::ostringstream os;
  g.write_triplets(os);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "# rows=49 cols=49 nnz=" + std::to_string(g.matrix().nonZeros()));
  Matrix back = Matrix::Zero(49, 49);
  long r, c;
  double v;
  long lines = 0;
  while (is >> r >> c >> v) {
    back(r, c) = v;
    ++lines;
  }
  EXPECT_EQ(lines, g.matrix().nonZeros());
  EXPECT_EQ((back - g.dense()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Generator, SizeCap) {
  EXPECT_THROW(build_voting_generator(reference_params(1, 2), 100), size_limit_error);
}

TEST(QueueBlocks, TwoPhaseExample) {
  const QueueBlocks qb = build_queue_blocks(1.0, 2, 0.7, 0.1);
  Matrix a0(2, 2);
  a0 << 0.1, 0.0, 1.0, 0.1;
  EXPECT_EQ((qb.A0 - a0).cwiseAbs().maxCoeff(), 0.0);
  Matrix a1(2, 2);
  a1 << -1.8, 1.0, 0.0, -1.8;
  EXPECT_LE((qb.A1 - a1).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ((qb.A2 - 0.7 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.0);
  Matrix b10(2, 2);
  b10 << -1.1, 1.0, 0.0, -1.1;
  EXPECT_LE((qb.B1_0 - b10).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(QueueBlocks, SinglePhase) {
  const double lambda = 0.2, r1 = 0.7, r2 = 0.1;
  const QueueBlocks qb = build_queue_blocks(lambda, 1, r1, r2);
  ASSERT_EQ(qb.phases(), 1);
  EXPECT_DOUBLE_EQ(qb.B1_0(0, 0), -(lambda + r2));
  EXPECT_DOUBLE_EQ(qb.A0(0, 0), lambda + r2);
  EXPECT_DOUBLE_EQ(qb.A1(0, 0), -(lambda + r1 + r2));
  EXPECT_DOUBLE_EQ(qb.A2(0, 0), r1);
}

TEST(QueueBlocks, Conservation) {
  for (int b : {1, 2, 3, 7, 50}) {
    const QueueBlocks qb = build_queue_blocks(1.3, b, 0.7, 0.1);
    EXPECT_LE((qb.A0 + qb.A1 + qb.A2).rowwise().sum().cwiseAbs().maxCoeff(), 1e-14) << b;
    EXPECT_LE((qb.B1_0 + qb.A0).rowwise().sum().cwiseAbs().maxCoeff(), 1e-14) << b;
  }
}

TEST(QueueBlocks, RejectsBadInputs) {
  EXPECT_THROW(build_queue_blocks(0.0, 2, 0.7, 0.1), domain_error);
  EXPECT_THROW(build_queue_blocks(1.0, 0, 0.7, 0.1), domain_error);
  EXPECT_THROW(build_queue_blocks(1.0, 2, 0.0, 0.1), domain_error);
  EXPECT_THROW(build_queue_blocks(1.0, 2, 0.7, -0.1), domain_error);
}

}  // namespace
}  // namespace pbft
