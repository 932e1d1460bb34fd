// pbftperf: stationary voting rates, pool throughput, parameter sweeps and
// simulation cross-checks for the dynamic PBFT model.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pbft/pipeline.hpp"
#include "pbft/simulator.hpp"
#include "run_config.hpp"

namespace {

using pbftperf::RunConfig;

constexpr int kOk = 0;
constexpr int kSolverFailure = 1;
constexpr int kUsage = 2;
constexpr int kUnstable = 3;

constexpr const char* kVotingPrefixHeader = "mu,theta,gamma,beta,p,L,N,zeta1,zeta2,A,B,C,";
constexpr const char* kSimulateHeader =
    "scope,replication,quantity,estimate,std_error,analytic,delta,diverged";

struct Paths {
  std::string dump_pi;
  std::string dump_q;
};

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw pbft::domain_error("cannot write " + path);
  return f;
}

void write_voting_prefix(std::ostream& os, const pbft::ModelParams& mp, const pbft::VotingMeasures& vm) {
  char buf[384];
  std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g,%.10g,%d,%d,%.15g,%.15g,%.15g,%.15g,%.15g,",
                mp.mu, mp.theta, mp.gamma, mp.beta, mp.p, mp.L, mp.N, vm.zeta1, vm.zeta2, vm.A, vm.B,
                vm.C);
  os << buf;
}

pbft::VotingResult run_voting(const pbft::ModelParams& mp, const RunConfig& cfg, const Paths& paths) {
  const pbft::BlockGenerator gen = pbft::build_voting_generator(mp, cfg.cap());
  if (!paths.dump_q.empty()) {
    auto f = open_output(paths.dump_q);
    gen.write_triplets(f);
  }
  pbft::VotingResult r = pbft::solve_voting(gen);
  if (!paths.dump_pi.empty()) {
    auto f = open_output(paths.dump_pi);
    pbft::write_pi_csv(f, gen.space(), r.pi);
  }
  return r;
}

// Queue inputs either given directly (r1, r2) or derived from the voting model.
struct QueueInputs {
  pbft::QueueParams qp;
  std::optional<pbft::ModelParams> model;
  std::optional<pbft::VotingMeasures> measures;
};

QueueInputs queue_inputs(const RunConfig& cfg, const Paths& paths) {
  QueueInputs in;
  in.qp.lambda = cfg.lambda();
  in.qp.b = cfg.batch();
  if (cfg.has_direct_rates()) {
    in.qp.r1 = cfg.real("r1");
    in.qp.r2 = cfg.real("r2");
  } else {
    in.model = cfg.model();
    in.measures = run_voting(*in.model, cfg, paths).measures;
    in.qp.r1 = in.measures->r1;
    in.qp.r2 = in.measures->r2;
  }
  in.qp.validate();
  return in;
}

std::string queue_header(bool derived) {
  return derived ? std::string(kVotingPrefixHeader) + pbft::kQueueCsvHeader : pbft::kQueueCsvHeader;
}

// Writes one row; returns the solution when the point is stable.
std::optional<pbft::QueueSolution> queue_row(std::ostream& os, const QueueInputs& in,
                                             const pbft::RateIterationOptions& opts) {
  std::optional<pbft::QueueSolution> sol;
  if (pbft::stability_check(in.qp) == pbft::Stability::Stable) {
    sol = pbft::solve_queue(in.qp, opts);
    pbft::throughput(in.qp, *sol);
  }
  if (in.model) write_voting_prefix(os, *in.model, *in.measures);
  pbft::write_queue_csv_row(os, in.qp, sol ? &*sol : nullptr);
  return sol;
}

int cmd_voting(const RunConfig& cfg, const Paths& paths, std::ostream& out) {
  const pbft::ModelParams mp = cfg.model();
  const pbft::VotingResult r = run_voting(mp, cfg, paths);
  out << pbft::kVotingCsvHeader << '\n';
  pbft::write_voting_csv_row(out, mp, r.measures);
  return kOk;
}

int cmd_queue(const RunConfig& cfg, const Paths& paths, std::ostream& out) {
  const pbft::RateIterationOptions opts = cfg.rate_options();
  const QueueInputs in = queue_inputs(cfg, paths);
  out << queue_header(in.model.has_value()) << '\n';
  const auto sol = queue_row(out, in, opts);
  if (!sol) {
    std::cerr << "pbftperf: unstable: " << pbft::describe_stability(in.qp) << '\n';
    return kUnstable;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "pbftperf: R converged in %zu iterations (delta %.3g)\n",
                sol->iterations, sol->last_delta);
  std::cerr << buf;
  return kOk;
}

bool is_queue_key(const std::string& k) { return k == "lambda" || k == "b" || k == "r1" || k == "r2"; }

int cmd_sweep(const RunConfig& base, const std::vector<std::string>& specs, std::ostream& out) {
  if (specs.empty() || specs.size() > 2)
    throw pbft::domain_error("sweep: expected one or two --sweep axes");
  std::vector<pbftperf::SweepAxis> axes;
  for (const auto& s : specs) axes.push_back(pbftperf::parse_sweep(s));
  if (axes.size() == 2 && axes[0].name == axes[1].name)
    throw pbft::domain_error("sweep: axis '" + axes[0].name + "' given twice");

  // Grid in row-major order: the first axis varies slowest.
  std::vector<RunConfig> grid;
  const std::size_t inner = axes.size() == 2 ? axes[1].values.size() : 1;
  for (const auto& v0 : axes[0].values)
    for (std::size_t j = 0; j < inner; ++j) {
      RunConfig c = base;
      c.set(axes[0].name, v0);
      if (axes.size() == 2) c.set(axes[1].name, axes[1].values[j]);
      grid.push_back(std::move(c));
    }

  bool queue_mode = base.has("lambda") || base.has("b") || base.has_direct_rates();
  for (const auto& a : axes) queue_mode = queue_mode || is_queue_key(a.name);
  const int count = static_cast<int>(grid.size());
  const unsigned threads = base.threads();

  if (!queue_mode) {
    const auto rows = pbft::detail::run_replications(count, threads, [&](int i) {
      const RunConfig& c = grid[static_cast<std::size_t>(i)];
      const pbft::ModelParams mp = c.model();
      std::ostringstream os;
      pbft::write_voting_csv_row(os, mp, pbft::solve_voting(mp, c.cap()).measures);
      return os.str();
    });
    out << pbft::kVotingCsvHeader << '\n';
    for (const auto& r : rows) out << r;
    return kOk;
  }

  const pbft::RateIterationOptions opts = base.rate_options();
  const bool derived = !base.has_direct_rates();
  std::vector<QueueInputs> inputs(grid.size());
  if (derived) {
    // The voting stage does not depend on lambda or b: solve each distinct
    // model once.
    std::map<std::string, std::size_t> key_of;
    std::vector<std::size_t> first;
    std::vector<std::size_t> slot(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      std::string key;
      for (const char* k : {"mu", "theta", "gamma", "beta", "p", "L", "N"}) key += grid[i].require(k) + "|";
      auto [it, fresh] = key_of.emplace(key, first.size());
      if (fresh) first.push_back(i);
      slot[i] = it->second;
    }
    const auto solved = pbft::detail::run_replications(static_cast<int>(first.size()), threads, [&](int u) {
      const RunConfig& c = grid[first[static_cast<std::size_t>(u)]];
      const pbft::ModelParams mp = c.model();
      return std::pair{mp, pbft::solve_voting(mp, c.cap()).measures};
    });
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto& [mp, vm] = solved[slot[i]];
      inputs[i].model = mp;
      inputs[i].measures = vm;
      inputs[i].qp = {grid[i].lambda(), grid[i].batch(), vm.r1, vm.r2};
      inputs[i].qp.validate();
    }
  } else {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      inputs[i].qp = {grid[i].lambda(), grid[i].batch(), grid[i].real("r1"), grid[i].real("r2")};
      inputs[i].qp.validate();
    }
  }

  struct Row {
    std::string text;
    bool stable = false;
  };
  const auto rows = pbft::detail::run_replications(count, threads, [&](int i) {
    std::ostringstream os;
    const bool stable = queue_row(os, inputs[static_cast<std::size_t>(i)], opts).has_value();
    return Row{os.str(), stable};
  });
  out << queue_header(derived) << '\n';
  std::size_t unstable = 0;
  for (const auto& r : rows) {
    out << r.text;
    unstable += r.stable ? 0 : 1;
  }
  if (unstable) std::cerr << "pbftperf: " << unstable << " of " << rows.size() << " grid points unstable\n";
  return kOk;
}

pbft::SimConfig sim_config(const RunConfig& cfg) {
  pbft::SimConfig sc;
  sc.seed = static_cast<std::uint64_t>(cfg.integer("seed", static_cast<std::int64_t>(sc.seed)));
  sc.horizon = cfg.real("horizon", sc.horizon);
  sc.warmup = cfg.real("warmup", sc.warmup);
  sc.replications = static_cast<int>(cfg.integer("reps", sc.replications));
  sc.threads = cfg.threads();
  sc.validate();
  return sc;
}

class SimWriter {
 public:
  explicit SimWriter(std::ostream& os) : os_(os) { os_ << kSimulateHeader << '\n'; }

  void pooled(const char* name, const pbft::SimEstimate& e, std::optional<double> analytic, bool diverged) {
    char buf[320];
    std::snprintf(buf, sizeof buf, "pooled,,%s,%.15g,%.15g,", name, e.mean, e.std_error);
    os_ << buf << tail(e.mean, analytic, diverged);
  }
  void replication(int r, const char* name, double value, std::optional<double> analytic, bool diverged) {
    char buf[320];
    std::snprintf(buf, sizeof buf, "replication,%d,%s,%.15g,,", r, name, value);
    os_ << buf << tail(value, analytic, diverged);
  }

 private:
  static std::string tail(double value, std::optional<double> analytic, bool diverged) {
    char buf[160];
    if (analytic)
      std::snprintf(buf, sizeof buf, "%.15g,%.15g,%d\n", *analytic, std::fabs(value - *analytic), diverged ? 1 : 0);
    else
      std::snprintf(buf, sizeof buf, ",,%d\n", diverged ? 1 : 0);
    return buf;
  }
  std::ostream& os_;
};

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  const pbft::SimConfig sc = sim_config(cfg);

  if (!cfg.has("lambda") && !cfg.has("b")) {
    const pbft::ModelParams mp = cfg.model();
    const pbft::VotingMeasures exact = pbft::solve_voting(mp, cfg.cap()).measures;
    const pbft::VotingSimResult sim = pbft::simulate_voting(mp, sc, cfg.cap());
    SimWriter w(out);
    const std::pair<const char*, double pbft::VotingMeasures::*> fields[] = {
        {"zeta1", &pbft::VotingMeasures::zeta1}, {"zeta2", &pbft::VotingMeasures::zeta2},
        {"B", &pbft::VotingMeasures::B},         {"C", &pbft::VotingMeasures::C},
        {"r1", &pbft::VotingMeasures::r1},       {"r2", &pbft::VotingMeasures::r2}};
    const pbft::SimEstimate* pooled[] = {&sim.zeta1, &sim.zeta2, &sim.B, &sim.C, &sim.r1, &sim.r2};
    const double pbft::VotingSample::*sample[] = {&pbft::VotingSample::zeta1, &pbft::VotingSample::zeta2,
                                                  &pbft::VotingSample::B,     &pbft::VotingSample::C,
                                                  &pbft::VotingSample::r1,    &pbft::VotingSample::r2};
    for (std::size_t q = 0; q < 6; ++q) w.pooled(fields[q].first, *pooled[q], exact.*fields[q].second, false);
    for (std::size_t r = 0; r < sim.samples.size(); ++r)
      for (std::size_t q = 0; q < 6; ++q)
        w.replication(static_cast<int>(r), fields[q].first, sim.samples[r].*sample[q], exact.*fields[q].second,
                      false);
    return kOk;
  }

  const double lambda = cfg.lambda();
  const int b = cfg.batch();
  pbft::SystemSimOptions opts;
  opts.runaway_threshold = cfg.real("runaway", opts.runaway_threshold);
  const std::string service = cfg.has("service") ? cfg.require("service")
                              : cfg.has_direct_rates() ? "exponential"
                                                       : "voting";
  if (service != "voting" && service != "exponential")
    throw pbft::domain_error("service: expected 'voting' or 'exponential', got '" + service + "'");

  pbft::QueueParams qp{lambda, b, 0.0, 0.0};
  std::optional<pbft::ModelParams> mp;
  if (service == "voting") mp = cfg.model();
  if (cfg.has_direct_rates()) {
    qp.r1 = cfg.real("r1");
    qp.r2 = cfg.real("r2");
  } else {
    if (!mp) mp = cfg.model();
    const pbft::VotingMeasures vm = pbft::solve_voting(*mp, cfg.cap()).measures;
    qp.r1 = vm.r1;
    qp.r2 = vm.r2;
  }
  qp.validate();

  std::optional<pbft::QueueSolution> exact;
  if (pbft::stability_check(qp) == pbft::Stability::Stable) exact = pbft::solve_queue(qp, cfg.rate_options());

  const pbft::SystemSimResult sim = service == "voting"
                                        ? pbft::simulate_system(*mp, lambda, b, sc, opts, cfg.cap())
                                        : pbft::simulate_system(lambda, b, qp.r1, qp.r2, sc, opts);

  auto analytic = [&](const double pbft::QueueSolution::*field) -> std::optional<double> {
    if (!exact) return std::nullopt;
    return (*exact).*field;
  };
  const char* names[] = {"eta1", "eta2", "TH", "mean_pool"};
  const pbft::SimEstimate* pooled[] = {&sim.eta1, &sim.eta2, &sim.TH, &sim.mean_pool};
  const double pbft::SystemSample::*sample[] = {&pbft::SystemSample::eta1, &pbft::SystemSample::eta2,
                                                &pbft::SystemSample::TH, &pbft::SystemSample::mean_pool};
  const double pbft::QueueSolution::*solution[] = {&pbft::QueueSolution::eta1, &pbft::QueueSolution::eta2,
                                                   &pbft::QueueSolution::TH,
                                                   &pbft::QueueSolution::mean_pool_size};
  std::vector<double> finals;
  for (const auto& s : sim.samples) finals.push_back(s.final_pool);

  SimWriter w(out);
  for (std::size_t q = 0; q < 4; ++q) w.pooled(names[q], *pooled[q], analytic(solution[q]), sim.diverged);
  w.pooled("final_pool", pbft::summarize(finals), std::nullopt, sim.diverged);
  for (std::size_t r = 0; r < sim.samples.size(); ++r) {
    const pbft::SystemSample& s = sim.samples[r];
    const bool diverged = s.final_pool > opts.runaway_threshold;
    for (std::size_t q = 0; q < 4; ++q)
      w.replication(static_cast<int>(r), names[q], s.*sample[q], analytic(solution[q]), diverged);
    w.replication(static_cast<int>(r), "final_pool", s.final_pool, std::nullopt, diverged);
  }
  if (sim.diverged) std::cerr << "pbftperf: pool diverged: " << pbft::describe_stability(qp) << '\n';
  return kOk;
}

const char* describe_key(const std::string& key) {
  static const std::map<std::string, const char*> text = {
      {"mu", "Node entry rate"},
      {"theta", "Node departure rate"},
      {"gamma", "Per-node voting rate"},
      {"beta", "Settlement rate of a decided package"},
      {"p", "Probability that a vote approves, in (0, 1)"},
      {"L", "Voting needs at least 3L nodes"},
      {"N", "At most 3N+2 nodes"},
      {"lambda", "Transaction arrival rate"},
      {"b", "Transactions per package"},
      {"r1", "Block rate (skips the voting model; needs r2)"},
      {"r2", "Orphan rate (skips the voting model; needs r1)"},
      {"epsilon", "R-iteration tolerance (default 1e-12)"},
      {"max_iter", "R-iteration cap (default 1000000)"},
      {"seed", "Simulation seed (default 1)"},
      {"horizon", "Simulated time per replication (default 1e5)"},
      {"warmup", "Simulated time excluded from statistics (default 0)"},
      {"reps", "Simulation replications (default 20)"},
      {"threads", "Worker threads, 0 = all cores; output does not depend on it"},
      {"runaway", "Pool size at the horizon flagged as divergence (default 1e5)"},
      {"service", "Pool simulation service: voting or exponential"},
      {"cap", "Largest voting state space to build (default 200000)"},
  };
  const auto it = text.find(key);
  return it == text.end() ? "" : it->second;
}

std::string flag_name(const std::string& key) {
  std::string f = "--" + key;
  for (char& c : f)
    if (c == '_') c = '-';
  return f;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Performance analysis of dynamic PBFT voting and transaction throughput"};
  app.require_subcommand(1);
  app.fallthrough();
  // A later occurrence of a flag overrides an earlier one.
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::string config_path, out_path;
  Paths paths;
  std::vector<std::string> sweeps;
  std::map<std::string, std::string> raw;
  std::map<std::string, CLI::Option*> flags;

  app.add_option("--config", config_path, "Flat key = value file; flags override it");
  app.add_option("--out", out_path, "Write CSV here instead of stdout");
  app.add_option("--dump-pi", paths.dump_pi, "Write the stationary distribution (n,m,k,class,pi)");
  app.add_option("--dump-q", paths.dump_q, "Write the voting generator as sparse triplets");
  app.add_option("--sweep", sweeps, "NAME=START:STOP:STEP or NAME=v1,v2,...; at most twice")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  for (const auto& key : pbftperf::known_keys())
    flags[key] = app.add_option(flag_name(key), raw[key], describe_key(key));

  app.add_subcommand("voting", "Stationary voting measures (one CSV row)");
  app.add_subcommand("queue", "Pool throughput via the matrix-geometric solution");
  app.add_subcommand("sweep", "Voting or queue measures over a one- or two-axis grid");
  app.add_subcommand("simulate", "Monte Carlo estimates beside the analytic values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  std::ostringstream body;
  int rc = kOk;
  try {
    RunConfig cfg(config_path.empty() ? std::map<std::string, std::string>{}
                                      : pbftperf::read_config_file(config_path));
    for (const auto& [key, opt] : flags)
      if (opt->count() > 0) cfg.set(key, raw[key]);
    if (command != "sweep" && !sweeps.empty())
      throw pbft::domain_error("--sweep is only valid with the sweep subcommand");

    if (command == "voting")
      rc = cmd_voting(cfg, paths, body);
    else if (command == "queue")
      rc = cmd_queue(cfg, paths, body);
    else if (command == "sweep")
      rc = cmd_sweep(cfg, sweeps, body);
    else
      rc = cmd_simulate(cfg, body);
  } catch (const pbft::stability_error& e) {
    std::cerr << "pbftperf: unstable: " << e.what() << '\n';
    return kUnstable;
  } catch (const std::invalid_argument& e) {
    std::cerr << "pbftperf: " << e.what() << '\n';
    return kUsage;
  } catch (const std::length_error& e) {
    std::cerr << "pbftperf: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "pbftperf: " << command << " failed: " << e.what() << '\n';
    return kSolverFailure;
  }

  if (out_path.empty()) {
    std::cout << body.str();
  } else {
    std::ofstream f(out_path);
    if (!f || !(f << body.str())) {
      std::cerr << "pbftperf: cannot write " << out_path << '\n';
      return kSolverFailure;
    }
  }
  return rc;
}
