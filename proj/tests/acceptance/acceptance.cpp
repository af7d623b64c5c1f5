// Acceptance checks for the classifier. Prints one PASS/FAIL line per
// criterion and exits non-zero when any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "grad_cases.hpp"
#include "json.hpp"
#include "nfship/ablation.hpp"
#include "nfship/cart.hpp"
#include "nfship/classical.hpp"
#include "nfship/cli.hpp"
#include "nfship/fuzzy.hpp"
#include "nfship/log.hpp"
#include "nfship/neurofuzzy.hpp"
#include "nfship/synthetic.hpp"

namespace nfship::acceptance {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Tolerances and sizes, pinned.
constexpr double kWemTolerance = 1e-6;
constexpr double kMembershipTolerance = 1e-12;
constexpr std::size_t kWemRandomInputs = 10000;
constexpr std::size_t kMembershipRandomInputs = 1000;
constexpr std::size_t kOracleRandomInputs = 10000;
constexpr std::size_t kOracleGridPoints = 5;
constexpr double kCrispSlope = 200.0;
constexpr double kCrispOrness = 50.0;
constexpr double kCrispMargin = 0.1;
constexpr double kCrispAgreement = 0.99;
constexpr std::size_t kGradConfigs = 100;
constexpr double kGradTolerance = 1e-4;
constexpr std::size_t kSimplexSteps = 1000;
constexpr double kSimplexTolerance = 1e-6;
constexpr double kE2eMinMacroF1 = 0.90;
constexpr double kE2eMaxSeconds = 600.0;

struct Outcome {
  bool passed = false;
  std::string detail;
};

using Check = std::function<Outcome()>;

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

class Scratch {
 public:
  Scratch() : path_(fs::temp_directory_path() / "nfship_acceptance") {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~Scratch() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs the command-line tool in process; throws with its stderr on failure.
json cli_json(std::vector<std::string> args) {
  args.insert(args.begin(), "--json");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != cli::kExitOk) {
    std::string joined;
    for (const auto& a : args) joined += " " + a;
    throw std::runtime_error("nfship" + joined + " exited " + std::to_string(code) + ": " + err.str());
  }
  return json::parse(out.str());
}

// ---- WEM point values ------------------------------------------------------

// Closed form for two inputs {0, 1} and weights {1/2, 1/2}, in long double:
// (1/r) ln((1 + e^r) / 2).
double wem_pair_oracle(long double r) {
  return static_cast<double>(std::log((1.0L + std::exp(r)) / 2.0L) / r);
}

Outcome check_wem() {
  const double c[2] = {0.0, 1.0};
  const double w[2] = {0.5, 0.5};
  struct Point {
    const char* name;
    double got;
    double oracle;
    double published;
    double published_tolerance;  // half a unit in the last printed digit
  };
  const Point points[] = {
      {"and(-14)", fuzzy::wem_and(c, -14.0), wem_pair_oracle(-14.0L), 0.0495105, 5e-8},
      {"and(-5.4)", fuzzy::wem_and(c, -5.4), wem_pair_oracle(-5.4L), 0.1275261, 5e-8},
      // Printed with four digits, truncated rather than rounded.
      {"or(5.4)", fuzzy::wem_or(c, w, 5.4), wem_pair_oracle(5.4L), 0.8724, 1e-4},
  };
  bool ok = true;
  std::ostringstream detail;
  for (const auto& p : points) {
    const double err = std::abs(p.got - p.oracle);
    ok = ok && err <= kWemTolerance && std::abs(p.oracle - p.published) <= p.published_tolerance;
    detail << p.name << "=" << fmt(p.got, 8) << " (|d oracle|=" << fmt(err, 2) << ") ";
  }

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> level(0.5, 60.0);
  std::uniform_int_distribution<int> count(1, 12);
  std::size_t bad_bounds = 0, bad_idem = 0;
  for (std::size_t t = 0; t < kWemRandomInputs; ++t) {
    const auto n = static_cast<std::size_t>(count(rng));
    std::vector<double> v(n), wt(n);
    double wsum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = unit(rng);
      wt[i] = unit(rng) + 1e-3;
      wsum += wt[i];
    }
    for (auto& x : wt) x /= wsum;
    const double r = level(rng);
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double a = fuzzy::wem_and(v, -r);
    const double o = fuzzy::wem_or(v, wt, r);
    const double eps = 1e-12;
    if (a < *lo - eps || a > *hi + eps || o < *lo - eps || o > *hi + eps) ++bad_bounds;
    const std::vector<double> same(n, v[0]);
    if (std::abs(fuzzy::wem_and(same, -r) - v[0]) > 1e-12 ||
        std::abs(fuzzy::wem_or(same, wt, r) - v[0]) > 1e-12) {
      ++bad_idem;
    }
  }
  ok = ok && bad_bounds == 0 && bad_idem == 0;
  detail << "random=" << kWemRandomInputs << " bound_violations=" << bad_bounds
         << " idempotence_violations=" << bad_idem;
  return {ok, detail.str()};
}

// ---- membership identities ------------------------------------------------

Outcome check_membership() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> x(-300.0, 300.0), s(-250.0, 250.0);
  double worst = 0.0;
  std::size_t centre_misses = 0;
  for (std::size_t t = 0; t < kMembershipRandomInputs; ++t) {
    const double xv = x(rng), sv = s(rng), vv = x(rng);
    worst = std::max(worst, std::abs(fuzzy::membership_le(xv, sv, vv) + fuzzy::membership_gt(xv, sv, vv) - 1.0));
    if (fuzzy::membership_gt(vv, sv, vv) != 0.5 || fuzzy::membership_le(vv, sv, vv) != 0.5) ++centre_misses;
  }
  return {worst <= kMembershipTolerance && centre_misses == 0,
          "max|f<= + f> - 1|=" + fmt(worst, 3) + " centre_misses=" + std::to_string(centre_misses) +
              " n=" + std::to_string(kMembershipRandomInputs)};
}

// ---- rule-tree oracle -----------------------------------------------------

data::Dataset noisy_dataset(std::size_t vessels, std::uint64_t seed, double noise) {
  synthetic::SyntheticOptions o;
  o.vessels = vessels;
  o.seed = seed;
  o.noise = noise;
  o.shape = {2, 3, 3};
  o.max_images = 1;
  const auto gen = synthetic::generate(o);
  return data::build_vessel_centred(gen.images, gen.ais, o.shape);
}

std::pair<AisVector, AisVector> bounds(const data::Dataset& ds) {
  AisVector lo, hi;
  lo.fill(1e300);
  hi.fill(-1e300);
  for (const auto& r : ds.rows) {
    for (std::size_t f = 0; f < kAisFieldCount; ++f) {
      lo[f] = std::min(lo[f], r.ais[f]);
      hi[f] = std::max(hi[f], r.ais[f]);
    }
  }
  return {lo, hi};
}

Outcome check_rule_tree_oracle() {
  const auto ds = noisy_dataset(1500, 11, 0.7);
  const auto [lo, hi] = bounds(ds);
  std::mt19937_64 rng(99);
  std::vector<AisVector> random_points(kOracleRandomInputs);
  for (auto& p : random_points) {
    for (std::size_t f = 0; f < kAisFieldCount; ++f) {
      const double pad = 0.1 * (hi[f] - lo[f]);
      p[f] = std::uniform_real_distribution<double>(lo[f] - pad, hi[f] + pad)(rng);
    }
  }
  std::size_t checks = 0, mismatches = 0;
  std::ostringstream detail;
  for (std::size_t depth : {4, 6, 8, 10}) {
    cart::CartParams params;
    params.max_depth = depth;
    params.min_samples_leaf = 1;
    const auto fit = pipeline::fit_rules(ds, params);
    auto agree = [&](const AisVector& x) {
      for (std::size_t c = 0; c < fit.trees.size(); ++c) {
        ++checks;
        if (fuzzy::eval_rule_crisp(fit.rules.rules[c], x) != cart::predict_tree(fit.trees[c], x).positive) {
          ++mismatches;
        }
      }
    };
    for (const auto& p : random_points) agree(p);
    // Exhaustive grid, kOracleGridPoints values per axis across the data range.
    std::vector<std::size_t> idx(kAisFieldCount, 0);
    while (true) {
      AisVector x;
      for (std::size_t f = 0; f < kAisFieldCount; ++f) {
        x[f] = lo[f] + (hi[f] - lo[f]) * static_cast<double>(idx[f]) / (kOracleGridPoints - 1);
      }
      agree(x);
      std::size_t f = 0;
      while (f < kAisFieldCount && ++idx[f] == kOracleGridPoints) idx[f++] = 0;
      if (f == kAisFieldCount) break;
    }
    // Training rows themselves sit on both sides of every threshold.
    for (const auto& r : ds.rows) agree(r.ais);
    detail << "D=" << depth << ":" << fit.rules.comparison_count() << "cmp ";
  }
  detail << "checks=" << checks << " mismatches=" << mismatches;
  return {mismatches == 0, detail.str()};
}

// ---- crisp limit -----------------------------------------------------------

Outcome check_crisp_limit() {
  const auto train = noisy_dataset(1000, 21, 0.5);
  cart::CartParams params;
  params.max_depth = 6;
  const auto fit = pipeline::fit_rules(train, params);
  const auto layout = fuzzy::RuleLayout::from(fit.rules);

  // Candidate points: a fresh synthetic draw plus uniform points over its range.
  auto points = noisy_dataset(2000, 22, 0.5);
  const auto [lo, hi] = bounds(points);
  std::mt19937_64 rng(23);
  for (std::size_t t = 0; t < 20000; ++t) {
    data::DatasetRow row;
    for (std::size_t f = 0; f < kAisFieldCount; ++f) {
      row.ais[f] = std::uniform_real_distribution<double>(lo[f], hi[f])(rng);
    }
    points.rows.push_back(row);
  }

  data::Dataset eligible = points;
  eligible.rows.clear();
  std::vector<int> crisp_label;
  std::size_t low_margin = 0, ambiguous = 0;
  for (const auto& row : points.rows) {
    bool margin_ok = true;
    for (std::size_t k = 0; k < layout.comparison_count(); ++k) {
      margin_ok = margin_ok && std::abs(row.ais[layout.feature[k]] - layout.threshold[k]) >= kCrispMargin;
    }
    if (!margin_ok) {
      ++low_margin;
      continue;
    }
    int fired = -1, n_fired = 0;
    for (std::size_t c = 0; c < fit.rules.rules.size(); ++c) {
      if (fuzzy::eval_rule_crisp(fit.rules.rules[c], row.ais)) {
        fired = static_cast<int>(c);
        ++n_fired;
      }
    }
    // Crisp DNF classification is defined where exactly one rule fires.
    if (n_fired != 1) {
      ++ambiguous;
      continue;
    }
    eligible.rows.push_back(row);
    crisp_label.push_back(fired);
  }

  model::NeuroFuzzyConfig cfg;
  cfg.slope_override = kCrispSlope;
  cfg.r_and = -kCrispOrness;
  cfg.r_or = kCrispOrness;
  model::NeuroFuzzyModelT<double> m(fit.rules, cfg);
  const auto fuzzy_label = m.classify(eligible);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < crisp_label.size(); ++i) agree += fuzzy_label[i] == crisp_label[i];
  const double rate = crisp_label.empty() ? 0.0 : static_cast<double>(agree) / crisp_label.size();
  return {rate >= kCrispAgreement && crisp_label.size() >= 1000,
          "agreement=" + fmt(100.0 * rate, 5) + "% on " + std::to_string(crisp_label.size()) +
              " points (excluded: margin<0.1 " + std::to_string(low_margin) + ", not exactly one rule " +
              std::to_string(ambiguous) + ")"};
}

// ---- gradient fidelity ----------------------------------------------------

Outcome check_gradients() {
  auto cases = testing::primitive_grad_cases();
  for (auto& c : testing::model_grad_cases()) cases.push_back(std::move(c));
  std::size_t runs = 0;
  double worst = 0.0;
  std::string worst_case;
  std::vector<std::string> failures;
  for (const auto& c : cases) {
    for (std::uint64_t seed = 0; seed < kGradConfigs; ++seed) {
      const auto report = c.run(seed);
      ++runs;
      if (report.max_rel_error > worst) {
        worst = report.max_rel_error;
        worst_case = c.name;
      }
      if (!report.passed || report.max_rel_error > kGradTolerance) {
        failures.push_back(c.name + "#" + std::to_string(seed));
      }
    }
  }
  std::size_t control_caught = 0;
  for (std::uint64_t seed = 0; seed < kGradConfigs; ++seed) {
    control_caught += !testing::corrupted_backward_check(seed).passed;
  }
  std::ostringstream detail;
  detail << cases.size() << " cases x " << kGradConfigs << " configs, max_rel_error=" << fmt(worst, 3)
         << " (" << worst_case << "), failures=" << failures.size();
  for (std::size_t i = 0; i < std::min<std::size_t>(failures.size(), 5); ++i) detail << " " << failures[i];
  detail << "; negative control caught " << control_caught << "/" << kGradConfigs;
  return {failures.empty() && control_caught == kGradConfigs, detail.str()};
}

// ---- simplex invariant ----------------------------------------------------

Outcome check_simplex() {
  const auto ds = noisy_dataset(600, 31, 0.5);
  cart::CartParams params;
  params.max_depth = 8;
  const auto fit = pipeline::fit_rules(ds, params);
  model::NeuroFuzzyConfig cfg;
  cfg.branch.feature_shape = ds.shape;
  cfg.branch.conv1 = {4, 3, 1};
  cfg.branch.conv2 = {4, 3, 1};
  cfg.branch.a1_width = 32;
  cfg.a2_width = 16;
  cfg.train.learning_rate = 1e-2;
  cfg.train.batch_size = 32;
  cfg.train.epochs = (kSimplexSteps + 17) / 18;  // 600 rows give 18 or 19 batches per epoch
  model::NeuroFuzzyModel m(fit.rules, cfg);
  std::uint64_t steps = 0;
  double worst_sum = 0.0, min_weight = 1.0;
  m.train(ds, [&](const model::StepInfo& info) {
    steps = info.step;
    for (const auto& w : m.disjunction_weights()) {
      double sum = 0.0;
      for (double v : w) {
        sum += v;
        min_weight = std::min(min_weight, v);
      }
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    }
  });
  // Published weights are four-decimal numbers; their exact sum is taken in
  // ten-thousandths.
  const std::vector<double> published{0.1799, 0.1035, 0.1089, 0.2242, 0.3835};
  long ten_thousandths = 0;
  for (double v : published) ten_thousandths += std::lround(v * 1e4);
  bool accepted = true;
  try {
    fuzzy::validate_simplex(published);
  } catch (const std::exception&) {
    accepted = false;
  }
  const bool ok = steps >= kSimplexSteps && worst_sum <= kSimplexTolerance && min_weight >= 0.0 &&
                  ten_thousandths == 10000 && accepted;
  return {ok, "steps=" + std::to_string(steps) + " max|sum-1|=" + fmt(worst_sum, 3) +
                  " min_w=" + fmt(min_weight, 3) + "; published weights sum=" +
                  std::to_string(ten_thousandths) + "/10000 accepted=" + (accepted ? "yes" : "no")};
}

// ---- synthetic end-to-end ---------------------------------------------------

Outcome check_end_to_end(const Scratch& dir) {
  const auto start = std::chrono::steady_clock::now();
  const std::string raw = (dir / "e2e_raw").string(), data = (dir / "e2e_data").string();
  cli_json({"gen-synthetic", "--out", raw, "--vessels", "3403", "--profile", "table3", "--noise", "0.5",
            "--seed", "1", "--shape", "32,7,7"});
  cli_json({"build-dataset", "--ais", raw + "/ais.csv", "--features", raw + "/features.nff", "--out", data,
            "--seed", "1", "--min-vessels", "20"});
  const std::string rules = (dir / "e2e_rules.json").string();
  cli_json({"extract-rules", "--data", data, "--depth", "6", "--out", rules});
  const std::string ckpt = (dir / "e2e_nf.ckpt").string();
  cli_json({"train", "--data", data, "--rules", rules, "--epochs", "100", "--seed", "1", "--conv1", "16",
            "--conv2", "8", "--a1-width", "512", "--hidden-width", "256", "--out", ckpt});
  const auto eval = cli_json({"evaluate", "--data", data, "--checkpoint", ckpt, "--model", "crisp",
                              "--rules", rules});
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double nf = eval.at("reports").at(0).at("macro_f1").get<double>();
  const double crisp = eval.at("reports").at(1).at("macro_f1").get<double>();
  const std::size_t classes = eval.at("reports").at(0).at("classes").size();
  const bool ok = classes == 5 && nf >= kE2eMinMacroF1 && nf > crisp && seconds <= kE2eMaxSeconds;
  return {ok, "classes=" + std::to_string(classes) + " neuro-fuzzy macro-F1=" + fmt(nf, 4) +
                  " crisp=" + fmt(crisp, 4) + " time=" + fmt(seconds, 4) + "s"};
}

// ---- ablation grid --------------------------------------------------------

Outcome check_ablation(const Scratch& dir) {
  const std::string raw = (dir / "abl_raw").string(), data = (dir / "abl_data").string();
  cli_json({"gen-synthetic", "--out", raw, "--vessels", "1500", "--noise", "0.7", "--seed", "3",
            "--shape", "4,3,3", "--max-images", "1"});
  cli_json({"build-dataset", "--ais", raw + "/ais.csv", "--features", raw + "/features.nff", "--out", data,
            "--seed", "3"});
  const auto doc = cli_json({"ablate", "--data", data, "--min-leaf", "1", "--epochs", "2", "--conv1", "4",
                             "--conv2", "2", "--a1-width", "16", "--hidden-width", "8", "--lr", "1e-3"});
  const auto& cells = doc.at("cells");
  bool ok = cells.size() == 12;
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> counts;  // depth -> (comparisons, conditions)
  std::size_t failed = 0;
  for (const auto& c : cells) {
    failed += !c.at("error").get<std::string>().empty() || c.at("macro_f1").is_null();
    counts[c.at("depth").get<std::size_t>()] = {c.at("comparisons"), c.at("conditions")};
  }
  ok = ok && failed == 0 && counts.size() == 4;
  std::ostringstream detail;
  detail << "cells=" << cells.size() << " failed=" << failed << " comparisons:";
  std::size_t prev_cmp = 0, prev_cond = 0;
  for (const auto& [d, cc] : counts) {
    ok = ok && cc.first >= prev_cmp && cc.second >= prev_cond;
    prev_cmp = cc.first;
    prev_cond = cc.second;
    detail << " D" << d << "=" << cc.first << "/" << cc.second;
  }
  ok = ok && counts.rbegin()->second.first > counts.begin()->second.first;
  detail << " (comparisons/conditions)";
  return {ok, detail.str()};
}

// ---- determinism ----------------------------------------------------------

Outcome check_determinism(const Scratch& dir) {
  const std::string raw = (dir / "det_raw").string();
  std::vector<std::string> artifacts[2];
  for (int run = 0; run < 2; ++run) {
    const std::string data = (dir / "det_data").string();
    const std::string ckpt = (dir / "det.ckpt").string();
    const std::string report = (dir / "det_eval.json").string();
    cli_json({"gen-synthetic", "--out", raw, "--vessels", "300", "--noise", "0.4", "--seed", "8", "--shape",
              "4,3,3"});
    cli_json({"build-dataset", "--ais", raw + "/ais.csv", "--features", raw + "/features.nff", "--out", data,
              "--seed", "8"});
    cli_json({"train", "--data", data, "--epochs", "3", "--seed", "8", "--conv1", "4", "--conv2", "2",
              "--a1-width", "16", "--hidden-width", "8", "--lr", "1e-3", "--out", ckpt});
    cli_json({"evaluate", "--data", data, "--checkpoint", ckpt, "--model", "knn", "--out", report});
    for (const char* f : {"det_raw/ais.csv", "det_raw/features.nff", "det_data/vc.json", "det_data/vc.nff",
                          "det_data/ic.json", "det.ckpt", "det.ckpt.loss.csv", "det_eval.json"}) {
      artifacts[run].push_back(read_file(dir / f));
    }
  }
  const char* names[] = {"ais", "features", "vc split", "vc blob", "ic split", "checkpoint", "losses", "report"};
  std::string differing;
  for (std::size_t i = 0; i < artifacts[0].size(); ++i) {
    if (artifacts[0][i] != artifacts[1][i] || artifacts[0][i].empty()) differing += std::string(" ") + names[i];
  }
  return {differing.empty(), differing.empty() ? "8 artifacts byte-identical across two runs"
                                               : "differing:" + differing};
}

}  // namespace
}  // namespace nfship::acceptance

int main() {
  using namespace nfship::acceptance;
  nfship::log::set_threshold(nfship::log::Level::kError);
  Scratch dir;
  const std::vector<std::pair<std::string, Check>> checks = {
      {"wem_point_values", check_wem},
      {"membership_identities", check_membership},
      {"rule_tree_oracle", check_rule_tree_oracle},
      {"crisp_limit", check_crisp_limit},
      {"gradient_fidelity", check_gradients},
      {"simplex_invariant", check_simplex},
      {"synthetic_end_to_end", [&] { return check_end_to_end(dir); }},
      {"ablation_grid", [&] { return check_ablation(dir); }},
      {"determinism", [&] { return check_determinism(dir); }},
  };
  int failed = 0;
  for (const auto& [name, check] : checks) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.passed ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failed += !o.passed;
  }
  return failed == 0 ? 0 : 1;
}
