#pragma once

#include <stdexcept>
#include <string>

namespace psilab {

enum class Errc {
  config,
  not_irreducible,
  not_aperiodic,
  horizon_too_large,
  alphabet_too_large,
  cap_exceeded,
  zero_probability_prefix,
  inconsistent_lambda,
  length_mismatch,
  not_converged,
  d_infeasible,
  zero_distortion_ambiguous,
  infeasible_parameters,
  bad_interval,
  config_mismatch,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

/// Process exit code for a library error: 2 config, 3 infeasible/cap, 4 non-convergence.
inline int exit_code_for(Errc code) noexcept {
  switch (code) {
    case Errc::config:
    case Errc::length_mismatch:
    case Errc::config_mismatch:
    case Errc::bad_interval:
      return 2;
    case Errc::not_converged:
      return 4;
    default:
      return 3;
  }
}

}  // namespace psilab
