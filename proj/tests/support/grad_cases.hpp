#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nfship/ad/grad_check.hpp"

namespace nfship::testing {

// A differentiable unit under test: `run(seed)` draws a random configuration
// (shapes, values, hyper-parameters) from `seed` and returns the finite
// difference report of a random linear read-out of its output.
struct GradCase {
  std::string name;
  std::function<ad::GradCheckReport(std::uint64_t seed)> run;
};

// One case per differentiable primitive of the engine.
std::vector<GradCase> primitive_grad_cases();

// Full model losses: neuro-fuzzy with per-sample slopes, with global slopes,
// and the bilinear baseline, each at a small random size.
std::vector<GradCase> model_grad_cases();

// Square op recorded through Tape::record whose backward rule returns x
// instead of 2x. Its gradient check must fail.
ad::GradCheckReport corrupted_backward_check(std::uint64_t seed);

}  // namespace nfship::testing
