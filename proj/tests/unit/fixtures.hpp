#pragma once

#include <cstdint>

#include "nfship/ablation.hpp"
#include "nfship/data_model.hpp"
#include "nfship/neurofuzzy.hpp"
#include "nfship/synthetic.hpp"

namespace nfship::testing {

inline constexpr data::FeatureShape kSmallShape{4, 3, 3};

// Vessel-centred dataset drawn from the synthetic generator.
inline data::Dataset synthetic_vc(std::size_t vessels, std::uint64_t seed, double noise = 0.0,
                                  synthetic::Profile profile = synthetic::Profile::kUniform) {
  synthetic::SyntheticOptions o;
  o.vessels = vessels;
  o.seed = seed;
  o.noise = noise;
  o.profile = profile;
  o.shape = kSmallShape;
  o.max_images = 2;
  const auto gen = synthetic::generate(o);
  return data::build_vessel_centred(gen.images, gen.ais, kSmallShape);
}

// Small per-sample neuro-fuzzy configuration for kSmallShape features.
inline model::NeuroFuzzyConfig small_config(std::uint64_t seed = 0) {
  model::NeuroFuzzyConfig cfg;
  cfg.branch.feature_shape = kSmallShape;
  cfg.branch.conv1 = {4, 3, 1};
  cfg.branch.conv2 = {2, 3, 1};
  cfg.branch.a1_width = 16;
  cfg.a2_width = 8;
  cfg.train.seed = seed;
  cfg.train.epochs = 3;
  cfg.train.batch_size = 8;
  cfg.train.learning_rate = 1e-3;
  return cfg;
}

inline pipeline::RuleFit small_rules(const data::Dataset& ds, std::size_t depth = 4) {
  cart::CartParams p;
  p.max_depth = depth;
  p.min_samples_leaf = 1;
  return pipeline::fit_rules(ds, p);
}

}  // namespace nfship::testing
