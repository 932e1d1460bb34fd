#pragma once

// Flat key=value run configuration shared by every pbftperf subcommand.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pbft/errors.hpp"
#include "pbft/model.hpp"
#include "pbft/queue.hpp"

namespace pbftperf {

// Every key accepted in a config file or as a --KEY flag.
inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "mu",       "theta", "gamma",  "beta",    "p",       "L",       "N",
      "lambda",   "b",     "r1",     "r2",      "epsilon", "max_iter", "seed",
      "horizon",  "warmup", "reps",  "threads", "runaway", "service", "cap"};
  return keys;
}

inline bool is_known_key(std::string_view k) {
  for (const auto& key : known_keys())
    if (key == k) return true;
  return false;
}

// Keys a sweep may vary.
inline bool is_sweepable(std::string_view k) {
  for (std::string_view s : {"mu", "theta", "gamma", "beta", "p", "L", "N", "lambda", "b", "r1", "r2"})
    if (s == k) return true;
  return false;
}

inline bool is_integer_key(std::string_view k) {
  for (std::string_view s : {"L", "N", "b", "max_iter", "seed", "reps", "threads", "cap"})
    if (s == k) return true;
  return false;
}

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

// Reads "key = value" lines; '#' starts a comment.
inline std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw pbft::domain_error("config: cannot open " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw pbft::domain_error("config: " + path + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (!is_known_key(key))
      throw pbft::domain_error("config: " + path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    out[key] = value;
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v))
    throw pbft::domain_error(key + ": expected a finite number, got '" + text + "'");
  return v;
}

inline std::int64_t parse_int(const std::string& key, const std::string& text) {
  std::int64_t v = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec == std::errc() && ptr == end) return v;
  // Accept integral values written as reals, e.g. b = 150.0 from a sweep.
  const double d = parse_double(key, text);
  if (d != std::floor(d) || std::fabs(d) > 9.0e15)
    throw pbft::domain_error(key + ": expected an integer, got '" + text + "'");
  return static_cast<std::int64_t>(d);
}

class RunConfig {
 public:
  RunConfig() = default;
  explicit RunConfig(std::map<std::string, std::string> values) : values_(std::move(values)) {}

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  std::string require(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw pbft::domain_error("missing required key: " + key);
    return it->second;
  }
  double real(const std::string& key) const { return parse_double(key, require(key)); }
  double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }
  std::int64_t integer(const std::string& key) const { return parse_int(key, require(key)); }
  std::int64_t integer(const std::string& key, std::int64_t fallback) const {
    return has(key) ? integer(key) : fallback;
  }
  int small_int(const std::string& key) const {
    const std::int64_t v = integer(key);
    if (v < -1'000'000'000 || v > 1'000'000'000) throw pbft::domain_error(key + ": out of range");
    return static_cast<int>(v);
  }

  bool has_voting_keys() const {
    for (const char* k : {"mu", "theta", "gamma", "beta", "p", "L", "N"})
      if (!has(k)) return false;
    return true;
  }
  bool has_direct_rates() const { return has("r1") || has("r2"); }

  pbft::ModelParams model() const {
    pbft::ModelParams mp;
    mp.mu = real("mu");
    mp.theta = real("theta");
    mp.gamma = real("gamma");
    mp.beta = real("beta");
    mp.p = real("p");
    mp.L = small_int("L");
    mp.N = small_int("N");
    mp.validate();
    return mp;
  }

  double lambda() const { return real("lambda"); }
  int batch() const { return small_int("b"); }

  std::size_t cap() const {
    const std::int64_t c = integer("cap", static_cast<std::int64_t>(pbft::kDefaultStateCap));
    if (c < 1) throw pbft::domain_error("cap must be positive");
    return static_cast<std::size_t>(c);
  }

  pbft::RateIterationOptions rate_options() const {
    pbft::RateIterationOptions o;
    o.epsilon = real("epsilon", o.epsilon);
    if (!(o.epsilon > 0.0)) throw pbft::domain_error("epsilon must be positive");
    const std::int64_t it = integer("max_iter", static_cast<std::int64_t>(o.max_iter));
    if (it < 1) throw pbft::domain_error("max_iter must be at least 1");
    o.max_iter = static_cast<std::size_t>(it);
    return o;
  }

  unsigned threads() const {
    const std::int64_t t = integer("threads", 0);
    if (t < 0) throw pbft::domain_error("threads must be non-negative");
    return static_cast<unsigned>(t);
  }

 private:
  std::map<std::string, std::string> values_;
};

// One swept axis: either START:STOP:STEP or an explicit list v1,v2,...
struct SweepAxis {
  std::string name;
  std::vector<std::string> values;  // formatted so they round-trip through RunConfig
};

inline std::string format_grid_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline SweepAxis parse_sweep(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) throw pbft::domain_error("sweep: expected NAME=START:STOP:STEP, got '" + spec + "'");
  SweepAxis axis;
  axis.name = trim(std::string_view(spec).substr(0, eq));
  if (!is_sweepable(axis.name)) throw pbft::domain_error("sweep: '" + axis.name + "' cannot be swept");
  const std::string range = trim(std::string_view(spec).substr(eq + 1));
  const std::string key = "sweep " + axis.name;

  if (range.find(':') == std::string::npos) {
    std::size_t pos = 0;
    while (pos <= range.size()) {
      const auto comma = range.find(',', pos);
      const std::string item = trim(std::string_view(range).substr(pos, comma - pos));
      axis.values.push_back(format_grid_value(parse_double(key, item)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return axis;
  }

  const auto c1 = range.find(':');
  const auto c2 = range.find(':', c1 + 1);
  if (c2 == std::string::npos || range.find(':', c2 + 1) != std::string::npos)
    throw pbft::domain_error("sweep: expected NAME=START:STOP:STEP, got '" + spec + "'");
  const double start = parse_double(key + " start", range.substr(0, c1));
  const double stop = parse_double(key + " stop", range.substr(c1 + 1, c2 - c1 - 1));
  const double step = parse_double(key + " step", range.substr(c2 + 1));
  if (!(step > 0.0)) throw pbft::domain_error(key + ": step must be positive");
  if (stop < start) throw pbft::domain_error(key + ": stop must not be below start");
  // Tolerate rounding so that 0.4:0.7:0.05 includes 0.7.
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  if (count > 1'000'000) throw pbft::domain_error(key + ": too many grid points");
  for (std::size_t i = 0; i < count; ++i)
    axis.values.push_back(format_grid_value(start + static_cast<double>(i) * step));
  return axis;
}

}  // namespace pbftperf
