#include "nfship/ad/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace nfship::ad {
namespace {

double eval_loss(const LossClosure& loss) {
  Tape<double> tape;
  return tape.value(loss(tape))[0];
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL") << " max_rel_error=" << max_rel_error;
  for (const auto& p : params) {
    os << "\n  " << p.name << ": checked=" << p.checked << " max_rel_error=" << p.max_rel_error;
    if (!p.passed) {
      os << " worst[" << p.worst_index << "] analytic=" << p.worst_analytic
         << " numeric=" << p.worst_numeric;
    }
  }
  return os.str();
}

GradCheckReport grad_check(ParamStore<double>& store, const LossClosure& loss,
                           const GradCheckOptions& options) {
  store.zero_grad();
  {
    Tape<double> tape;
    tape.backward(loss(tape));
  }
  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  for (auto& p : store.params()) {
    if (!p.trainable) continue;
    ParamGradReport pr;
    pr.name = p.name;
    std::vector<std::size_t> entries(p.value.size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (options.max_entries > 0 && entries.size() > options.max_entries) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries);
      std::sort(entries.begin(), entries.end());
    }
    for (std::size_t idx : entries) {
      const double saved = p.value[idx];
      p.value[idx] = saved + options.step;
      const double up = eval_loss(loss);
      p.value[idx] = saved - options.step;
      const double down = eval_loss(loss);
      p.value[idx] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double analytic = p.grad[idx];
      const double err = relative_error(analytic, numeric, options.floor);
      ++pr.checked;
      if (err > pr.max_rel_error || !std::isfinite(err)) {
        pr.max_rel_error = std::isfinite(err) ? err : INFINITY;
        pr.worst_index = idx;
        pr.worst_analytic = analytic;
        pr.worst_numeric = numeric;
      }
    }
    pr.passed = pr.max_rel_error <= options.tolerance;
    report.max_rel_error = std::max(report.max_rel_error, pr.max_rel_error);
    report.passed = report.passed && pr.passed;
    report.params.push_back(std::move(pr));
  }
  return report;
}

}  // namespace nfship::ad
