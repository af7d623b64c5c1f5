#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nfship/ad/tape.hpp"

namespace nfship::ad {

struct GradCheckOptions {
  double step = 1e-5;       // central-difference step h
  double tolerance = 1e-4;  // max allowed relative error
  // Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  // Entries checked per parameter; 0 checks all. Sampled entries are drawn
  // with `seed`.
  std::size_t max_entries = 0;
  std::uint64_t seed = 0;
};

struct ParamGradReport {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<ParamGradReport> params;
  double max_rel_error = 0.0;
  bool passed = true;

  std::string summary() const;
};

// Builds a scalar loss on the given tape from parameters of the store. Must
// be deterministic: identical parameter values give an identical loss.
using LossClosure = std::function<Var(Tape<double>&)>;

double relative_error(double analytic, double numeric, double floor);

// Compares tape gradients of every trainable parameter against central finite
// differences of `loss`.
GradCheckReport grad_check(ParamStore<double>& store, const LossClosure& loss,
                           const GradCheckOptions& options = {});

}  // namespace nfship::ad
