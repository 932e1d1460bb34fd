#pragma once

// Seeded Monte Carlo oracles for the analytical results.
//
// Each replication owns an std::mt19937_64 engine whose seed is derived from
// (seed, replication) with SplitMix64, so results do not depend on how
// replications are scheduled across threads. Uniform variates use the top
// 53 bits of each draw; exponential variates use inversion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <random>
#include <thread>
#include <vector>

#include "pbft/generator.hpp"
#include "pbft/queue.hpp"

namespace pbft {

struct SimConfig {
  std::uint64_t seed = 1;
  double horizon = 1e5;  // simulated time, measurement window ends here
  double warmup = 0.0;   // statistics start here
  int replications = 20;
  unsigned threads = 0;  // 0 = hardware concurrency

  void validate() const {
    if (!(warmup >= 0.0) || !std::isfinite(warmup)) throw domain_error("warmup must be non-negative");
    if (!(horizon > warmup) || !std::isfinite(horizon))
      throw domain_error("horizon must exceed warmup (empty measurement window)");
    if (replications < 1) throw domain_error("replications must be at least 1");
  }
  double window() const noexcept { return horizon - warmup; }
};

struct SimEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int replications = 0;

  bool within(double target, double n_se) const noexcept {
    return std::abs(mean - target) <= n_se * std_error;
  }
};

inline SimEstimate summarize(const std::vector<double>& xs) {
  SimEstimate e;
  e.replications = static_cast<int>(xs.size());
  if (xs.empty()) return e;
  double sum = 0.0;
  for (double x : xs) sum += x;
  e.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - e.mean) * (x - e.mean);
    e.std_error = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  }
  return e;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream)
      : engine_(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL))) {}

  // Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double exponential(double rate) noexcept { return -std::log1p(-uniform()) / rate; }

 private:
  std::mt19937_64 engine_;
};

// Runs body(r) for r in [0, count) and returns the results in index order.
template <typename Fn>
auto run_replications(int count, unsigned threads, Fn body) {
  using Result = decltype(body(0));
  std::vector<Result> out(static_cast<std::size_t>(count));
  unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(count));
  if (workers <= 1) {
    for (int r = 0; r < count; ++r) out[static_cast<std::size_t>(r)] = body(r);
    return out;
  }
  std::vector<std::future<void>> jobs;
  for (unsigned w = 0; w < workers; ++w)
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (int r = static_cast<int>(w); r < count; r += static_cast<int>(workers))
        out[static_cast<std::size_t>(r)] = body(r);
    }));
  for (auto& j : jobs) j.get();
  return out;
}

// Outgoing transitions of every state, as target indices with cumulative
// rates, precomputed from transition_rules.
struct TransitionTable {
  struct Entry {
    std::size_t target;
    double rate;
    Event event;
  };
  std::vector<std::size_t> begin;  // size() + 1 offsets into entries
  std::vector<Entry> entries;
  std::vector<double> total;
  std::vector<Decision> decision;

  TransitionTable(const StateSpace& space, bool votes_enabled) {
    const ModelParams& params = space.params();
    begin.reserve(space.size() + 1);
    for (std::size_t i = 0; i < space.size(); ++i) {
      begin.push_back(entries.size());
      double sum = 0.0;
      for (const Transition& t : transition_rules(space[i], params)) {
        if (!votes_enabled && t.event != Event::Entry && t.event != Event::Departure) continue;
        entries.push_back({space.index(t.target), t.rate, t.event});
        sum += t.rate;
      }
      total.push_back(sum);
      decision.push_back(space.decision(i));
    }
    begin.push_back(entries.size());
  }

  // Picks an outgoing transition of state i given u uniform on [0, 1).
  const Entry& pick(std::size_t i, double u) const noexcept {
    double target = u * total[i];
    const std::size_t last = begin[i + 1] - 1;
    for (std::size_t e = begin[i]; e < last; ++e) {
      if (target < entries[e].rate) return entries[e];
      target -= entries[e].rate;
    }
    return entries[last];
  }
};

}  // namespace detail

struct VotingSample {
  double zeta1 = 0.0;
  double zeta2 = 0.0;
  double B = 0.0;
  double C = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  std::vector<double> occupancy;  // time fraction per state
};

struct VotingSimResult {
  SimEstimate zeta1, zeta2, B, C, r1, r2;
  std::vector<double> occupancy;  // averaged over replications
  std::vector<VotingSample> samples;
};

inline VotingSample simulate_voting_replication(const StateSpace& space,
                                                const detail::TransitionTable& table,
                                                const SimConfig& cfg, int replication) {
  detail::Rng rng(cfg.seed, static_cast<std::uint64_t>(replication));
  std::vector<double> time_in(space.size(), 0.0);
  double block_settles = 0.0, orphan_settles = 0.0;

  std::size_t state = 0;
  double t = 0.0;
  while (true) {
    const double dt = rng.exponential(table.total[state]);
    // Portion of [t, t+dt) inside the measurement window.
    const double lo = std::max(t, cfg.warmup);
    const double hi = std::min(t + dt, cfg.horizon);
    if (hi > lo) time_in[state] += hi - lo;
    t += dt;
    if (t >= cfg.horizon) break;
    const auto& e = table.pick(state, rng.uniform());
    if (e.event == Event::Settle && t >= cfg.warmup) {
      if (table.decision[state] == Decision::BlockDecided)
        block_settles += 1.0;
      else
        orphan_settles += 1.0;
    }
    state = e.target;
  }

  VotingSample s;
  const double w = cfg.window();
  for (std::size_t i = 0; i < space.size(); ++i) {
    const double frac = time_in[i] / w;
    switch (table.decision[i]) {
      case Decision::BlockDecided: s.zeta1 += frac; break;
      case Decision::OrphanDecided: s.zeta2 += frac; break;
      case Decision::BelowThreshold: s.B += frac; break;
      case Decision::Undecided: s.C += frac; break;
    }
    time_in[i] = frac;
  }
  s.occupancy = std::move(time_in);
  s.r1 = block_settles / w;
  s.r2 = orphan_settles / w;
  return s;
}

// Gillespie simulation of the voting CTMC. Time fractions in each decision
// class estimate zeta1, zeta2, B and C; settlement counts per unit time
// estimate r1 and r2.
inline VotingSimResult simulate_voting(const ModelParams& params, const SimConfig& cfg,
                                       std::size_t cap = kDefaultStateCap) {
  cfg.validate();
  const StateSpace space(params, cap);
  const detail::TransitionTable table(space, true);
  auto samples = detail::run_replications(cfg.replications, cfg.threads, [&](int r) {
    return simulate_voting_replication(space, table, cfg, r);
  });

  VotingSimResult out;
  auto collect = [&](auto field) {
    std::vector<double> xs;
    for (const auto& s : samples) xs.push_back(field(s));
    return summarize(xs);
  };
  out.zeta1 = collect([](const VotingSample& s) { return s.zeta1; });
  out.zeta2 = collect([](const VotingSample& s) { return s.zeta2; });
  out.B = collect([](const VotingSample& s) { return s.B; });
  out.C = collect([](const VotingSample& s) { return s.C; });
  out.r1 = collect([](const VotingSample& s) { return s.r1; });
  out.r2 = collect([](const VotingSample& s) { return s.r2; });
  out.occupancy.assign(space.size(), 0.0);
  for (const auto& s : samples)
    for (std::size_t i = 0; i < space.size(); ++i)
      out.occupancy[i] += s.occupancy[i] / static_cast<double>(samples.size());
  out.samples = std::move(samples);
  return out;
}

// How a package is served in the system simulation.
enum class ServiceModel {
  // The package runs the full voting CTMC; a block removes its b
  // transactions, an orphan leaves them in the pool.
  VotingChain,
  // The pool generator of the analytical queue itself: block removals at
  // rate r1 while at least b transactions are pooled, and batches of b
  // returned orphan transactions at rate r2 in every pool state.
  Exponential,
};

struct SystemSimOptions {
  ServiceModel service = ServiceModel::VotingChain;
  double r1 = 0.0;  // Exponential service only
  double r2 = 0.0;  // Exponential service only
  double runaway_threshold = 1e5;  // pool size at the horizon flagged as divergence
  int checkpoints = 4;             // pool snapshots across the measurement window
};

struct SystemSample {
  double eta1 = 0.0;
  double eta2 = 0.0;
  double TH = 0.0;
  double mean_pool = 0.0;
  double final_pool = 0.0;
  double blocks = 0.0;
  double orphans = 0.0;
  std::vector<double> pool_at;  // pool size at evenly spaced checkpoints
};

struct SystemSimResult {
  SimEstimate eta1, eta2, TH, mean_pool;
  std::vector<double> pool_at;  // checkpoint pool sizes averaged over replications
  bool diverged = false;
  std::vector<SystemSample> samples;
};

namespace detail {

class SystemRun {
 public:
  SystemRun(const SimConfig& cfg, const SystemSimOptions& opts, int replication)
      : cfg_(cfg), opts_(opts), rng_(cfg.seed, static_cast<std::uint64_t>(replication)) {
    const int n = std::max(1, opts_.checkpoints);
    for (int c = 1; c <= n; ++c)
      checkpoint_times_.push_back(cfg_.warmup + cfg_.window() * c / n);
  }

  // Accounts for [t, t + dt) spent with the given pool size and busy flag.
  void hold(double dt, std::int64_t pool, bool busy) {
    const double lo = std::max(t_, cfg_.warmup);
    const double hi = std::min(t_ + dt, cfg_.horizon);
    if (hi > lo) {
      if (busy) busy_time_ += hi - lo;
      pool_time_ += static_cast<double>(pool) * (hi - lo);
    }
    while (next_checkpoint_ < checkpoint_times_.size() &&
           checkpoint_times_[next_checkpoint_] <= t_ + dt) {
      sample_.pool_at.push_back(static_cast<double>(pool));
      ++next_checkpoint_;
    }
    t_ += dt;
  }

  bool done() const noexcept { return t_ >= cfg_.horizon; }
  bool measuring() const noexcept { return t_ >= cfg_.warmup; }
  Rng& rng() noexcept { return rng_; }

  SystemSample finish(std::int64_t pool, double b) {
    const double w = cfg_.window();
    sample_.eta2 = busy_time_ / w;
    sample_.eta1 = 1.0 - sample_.eta2;
    sample_.TH = sample_.blocks * b / w;
    sample_.mean_pool = pool_time_ / w;
    sample_.final_pool = static_cast<double>(pool);
    return std::move(sample_);
  }

  SystemSample& sample() noexcept { return sample_; }

 private:
  const SimConfig& cfg_;
  const SystemSimOptions& opts_;
  Rng rng_;
  double t_ = 0.0;
  double busy_time_ = 0.0;
  double pool_time_ = 0.0;
  std::vector<double> checkpoint_times_;
  std::size_t next_checkpoint_ = 0;
  SystemSample sample_;
};

inline SystemSample simulate_exponential_pool(double lambda, int b, const SimConfig& cfg,
                                              const SystemSimOptions& opts, int replication) {
  SystemRun run(cfg, opts, replication);
  std::int64_t pool = 0;
  while (true) {
    const bool busy = pool >= b;
    const double total = lambda + opts.r2 + (busy ? opts.r1 : 0.0);
    run.hold(run.rng().exponential(total), pool, busy);
    if (run.done()) break;
    const double u = run.rng().uniform() * total;
    if (u < lambda) {
      pool += 1;
    } else if (u < lambda + opts.r2) {
      pool += b;
      if (run.measuring()) run.sample().orphans += 1.0;
    } else {
      pool -= b;
      if (run.measuring()) run.sample().blocks += 1.0;
    }
  }
  return run.finish(pool, b);
}

inline SystemSample simulate_voting_pool(const TransitionTable& voting, const TransitionTable& idle,
                                         double lambda, int b,
                                         const SimConfig& cfg, const SystemSimOptions& opts,
                                         int replication) {
  SystemRun run(cfg, opts, replication);
  std::int64_t pool = 0;
  bool busy = false;  // a package is in flight
  std::size_t state = 0;
  while (true) {
    const TransitionTable& table = busy ? voting : idle;
    const double total = lambda + table.total[state];
    run.hold(run.rng().exponential(total), pool, busy);
    if (run.done()) break;
    const double u = run.rng().uniform() * total;
    if (u < lambda) {
      pool += 1;
    } else {
      const auto& e = table.pick(state, (u - lambda) / table.total[state]);
      if (e.event == Event::Settle) {
        if (table.decision[state] == Decision::BlockDecided) {
          pool -= b;
          if (run.measuring()) run.sample().blocks += 1.0;
        } else if (run.measuring()) {
          run.sample().orphans += 1.0;
        }
        busy = false;
      }
      state = e.target;
    }
    if (!busy && pool >= b) busy = true;
  }
  return run.finish(pool, b);
}

}  // namespace detail

// Discrete-event simulation of the transaction pool served by one package at
// a time. Long-run busy fraction estimates eta2; committed transactions per
// unit time estimate TH.
inline SystemSimResult simulate_system(const ModelParams& params, double lambda, int b,
                                       const SimConfig& cfg, const SystemSimOptions& opts = {},
                                       std::size_t cap = kDefaultStateCap) {
  cfg.validate();
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw domain_error("lambda must be positive");
  if (b < 1) throw domain_error("b must be at least 1");

  std::vector<SystemSample> samples;
  if (opts.service == ServiceModel::Exponential) {
    QueueParams{lambda, b, opts.r1, opts.r2}.validate();
    samples = detail::run_replications(cfg.replications, cfg.threads, [&](int r) {
      return detail::simulate_exponential_pool(lambda, b, cfg, opts, r);
    });
  } else {
    const StateSpace space(params, cap);
    const detail::TransitionTable voting(space, true);
    const detail::TransitionTable idle(space, false);
    samples = detail::run_replications(cfg.replications, cfg.threads, [&](int r) {
      return detail::simulate_voting_pool(voting, idle, lambda, b, cfg, opts, r);
    });
  }

  SystemSimResult out;
  auto collect = [&](auto field) {
    std::vector<double> xs;
    for (const auto& s : samples) xs.push_back(field(s));
    return summarize(xs);
  };
  out.eta1 = collect([](const SystemSample& s) { return s.eta1; });
  out.eta2 = collect([](const SystemSample& s) { return s.eta2; });
  out.TH = collect([](const SystemSample& s) { return s.TH; });
  out.mean_pool = collect([](const SystemSample& s) { return s.mean_pool; });
  const std::size_t cps = samples.front().pool_at.size();
  out.pool_at.assign(cps, 0.0);
  double final_pool = 0.0;
  for (const auto& s : samples) {
    for (std::size_t c = 0; c < cps && c < s.pool_at.size(); ++c)
      out.pool_at[c] += s.pool_at[c] / static_cast<double>(samples.size());
    final_pool += s.final_pool / static_cast<double>(samples.size());
  }
  out.diverged = final_pool > opts.runaway_threshold;
  out.samples = std::move(samples);
  return out;
}

inline SystemSimResult simulate_system(double lambda, int b, double r1, double r2,
                                       const SimConfig& cfg, SystemSimOptions opts = {}) {
  opts.service = ServiceModel::Exponential;
  opts.r1 = r1;
  opts.r2 = r2;
  return simulate_system(ModelParams{}, lambda, b, cfg, opts);
}

}  // namespace pbft
