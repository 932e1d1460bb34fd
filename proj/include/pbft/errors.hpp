#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pbft {

// Invalid parameters, states or inputs outside an operation's domain.
class domain_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A build would exceed a configured state-count cap.
class size_limit_error : public std::length_error {
 public:
  size_limit_error(std::size_t requested, std::size_t cap)
      : std::length_error("state count " + std::to_string(requested) +
                          " exceeds cap " + std::to_string(cap)),
        requested_(requested),
        cap_(cap) {}

  std::size_t requested() const noexcept { return requested_; }
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t requested_;
  std::size_t cap_;
};

// Numerical failure inside a solver (singular block, null-space failure).
class solver_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The R-iteration hit its iteration cap.
class convergence_error : public solver_error {
 public:
  convergence_error(std::size_t iterations, double last_delta)
      : solver_error("rate-matrix iteration did not converge after " +
                     std::to_string(iterations) + " iterations (last delta " +
                     std::to_string(last_delta) + ")"),
        iterations_(iterations),
        last_delta_(last_delta) {}

  std::size_t iterations() const noexcept { return iterations_; }
  double last_delta() const noexcept { return last_delta_; }

 private:
  std::size_t iterations_;
  double last_delta_;
};

// Queue parameters violate the positive-recurrence condition.
class stability_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A computed solution failed an exact identity it must satisfy.
class consistency_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pbft
