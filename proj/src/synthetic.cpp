#include "nfship/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace nfship::synthetic {
namespace {

struct Range {
  double lo;
  double hi;
};

struct ClassTemplate {
  Range length;
  Range beam_ratio;  // length / beam
  Range draught;
};

// Boxes leave gaps of at least 4 m in length or 0.4 m in draught between
// classes that share the other axis.
ClassTemplate class_template(std::size_t c) {
  switch (c) {
    case 0: return {{140, 230}, {6.5, 7.5}, {8.0, 11.8}};   // Cargo
    case 1: return {{140, 250}, {5.5, 6.2}, {12.2, 16.0}};  // Tanker
    case 2: return {{38, 90}, {3.5, 5.0}, {1.5, 3.3}};      // Other
    case 3: return {{60, 134}, {5.5, 7.0}, {4.0, 6.8}};     // Passenger
    case 4: return {{15, 33}, {2.5, 3.5}, {3.7, 6.0}};      // Tug
    default: {
      const double base = 260.0 + 30.0 * static_cast<double>(c - 5);
      return {{base, base + 24.0}, {5.0, 8.0}, {6.0, 14.0}};
    }
  }
}

constexpr double kTable3[5] = {2412, 864, 53, 42, 32};

double uniform(std::mt19937_64& rng, Range r) {
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

}  // namespace

std::string to_string(Profile p) { return p == Profile::kUniform ? "uniform" : "table3"; }

Profile parse_profile(const std::string& text) {
  if (text == "uniform") return Profile::kUniform;
  if (text == "table3") return Profile::kTable3;
  throw std::invalid_argument("unknown profile '" + text + "' (expected uniform or table3)");
}

void SyntheticOptions::validate() const {
  if (classes < 2) throw std::invalid_argument("synthetic data needs at least 2 classes");
  if (vessels < classes) throw std::invalid_argument("need at least one vessel per class");
  if (!(noise >= 0.0 && noise <= 1.0)) throw std::invalid_argument("noise must lie in [0, 1]");
  if (min_images == 0 || min_images > max_images) {
    throw std::invalid_argument("image counts must satisfy 1 <= min <= max");
  }
  if (shape.size() == 0) throw std::invalid_argument("feature shape must be non-empty");
  if (!(feature_noise >= 0.0)) throw std::invalid_argument("feature noise must be non-negative");
}

nlohmann::json to_json(const SyntheticOptions& o) {
  return {{"vessels", o.vessels},
          {"classes", o.classes},
          {"noise", o.noise},
          {"seed", o.seed},
          {"profile", to_string(o.profile)},
          {"feature_shape", {o.shape.channels, o.shape.height, o.shape.width}},
          {"min_images", o.min_images},
          {"max_images", o.max_images},
          {"feature_noise", o.feature_noise},
          {"first_mmsi", o.first_mmsi},
          {"jitter_scale", kJitterScale}};
}

std::vector<std::string> class_names(std::size_t classes) {
  static const char* kNames[5] = {"Cargo", "Tanker", "Other", "Passenger", "Tug"};
  std::vector<std::string> out;
  for (std::size_t c = 0; c < classes; ++c) {
    out.push_back(c < 5 ? kNames[c] : "Class" + std::to_string(c + 1));
  }
  return out;
}

std::vector<std::size_t> class_counts(const SyntheticOptions& o) {
  o.validate();
  std::vector<double> weight(o.classes, 1.0);
  if (o.profile == Profile::kTable3) {
    for (std::size_t c = 0; c < o.classes; ++c) weight[c] = kTable3[std::min<std::size_t>(c, 4)];
  }
  const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
  std::vector<std::size_t> counts(o.classes);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < o.classes; ++c) {
    const double exact = static_cast<double>(o.vessels) * weight[c] / total;
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < o.vessels; ++i, ++assigned) ++counts[remainders[i].second];
  for (auto& c : counts) c = std::max<std::size_t>(c, 1);
  return counts;
}

SyntheticData generate(const SyntheticOptions& o) {
  o.validate();
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto names = class_names(o.classes);
  const auto counts = class_counts(o);
  const std::size_t fs = o.shape.size();

  std::vector<std::vector<float>> templates(o.classes, std::vector<float>(fs));
  for (auto& t : templates)
    for (auto& v : t) v = static_cast<float>(normal(rng));

  std::vector<std::size_t> vessel_class;
  for (std::size_t c = 0; c < o.classes; ++c) vessel_class.insert(vessel_class.end(), counts[c], c);
  std::shuffle(vessel_class.begin(), vessel_class.end(), rng);

  SyntheticData out;
  out.ais.labels = names;
  nlohmann::json vessels = nlohmann::json::array();
  std::uniform_int_distribution<std::size_t> n_images(o.min_images, o.max_images);
  std::uniform_real_distribution<double> confidence(0.7, 1.0);
  const double jitter = o.noise * kJitterScale;

  for (std::size_t i = 0; i < vessel_class.size(); ++i) {
    const std::size_t c = vessel_class[i];
    const auto tpl = class_template(c);
    const double length = uniform(rng, tpl.length);
    const double beam = length / uniform(rng, tpl.beam_ratio);
    const double draught = uniform(rng, tpl.draught);
    const double bow = length * uniform(rng, {0.55, 0.85});
    const double starboard = beam * uniform(rng, {0.35, 0.65});
    double raw[5] = {bow, length - bow, starboard, beam - starboard, draught};
    auto to_fields = [](const double (&r)[5]) {
      AisVector f{};
      f[0] = std::max(1.0, std::round(r[0]));
      f[1] = std::max(1.0, std::round(r[1]));
      f[2] = std::max(1.0, std::round(r[2]));
      f[3] = std::max(1.0, std::round(r[3]));
      f[4] = f[2] + f[3];
      f[5] = f[0] + f[1];
      f[6] = std::max(0.1, std::round(r[4] * 10.0) / 10.0);
      return f;
    };
    out.clean_ais.push_back(to_fields(raw));
    // Drawn at every noise level so the rest of the stream, and with it the
    // vessels and images, does not depend on the noise setting.
    for (double& v : raw) {
      const double z = normal(rng);
      if (jitter > 0.0) v *= std::max(0.05, 1.0 + jitter * z);
    }
    data::AisStaticRecord rec;
    rec.mmsi = o.first_mmsi + i;
    rec.fields = to_fields(raw);
    rec.ship_type = names[c];
    out.ais.records.push_back(rec);

    std::vector<float> vessel_feature(fs);
    for (std::size_t k = 0; k < fs; ++k) {
      vessel_feature[k] = templates[c][k] + static_cast<float>(o.feature_noise * normal(rng));
    }
    const std::size_t images = n_images(rng);
    for (std::size_t k = 0; k < images; ++k) {
      data::ImageFeatureRecord img;
      img.image_id = "img_" + std::to_string(rec.mmsi) + "_" + std::to_string(k + 1);
      img.mmsi = rec.mmsi;
      img.confidence = static_cast<float>(confidence(rng));
      img.feature.resize(fs);
      for (std::size_t e = 0; e < fs; ++e) {
        img.feature[e] = vessel_feature[e] + static_cast<float>(0.5 * o.feature_noise * normal(rng));
      }
      out.images.push_back(std::move(img));
    }
    vessels.push_back({{"mmsi", rec.mmsi}, {"class", names[c]}, {"images", images}});
  }
  const auto opts = to_json(o);
  out.truth = {{"format", "nfship-synthetic-truth"},
               {"version", 1},
               {"options", opts},
               {"seed", o.seed},
               {"config_hash", hex64(fnv1a64(opts.dump()))},
               {"labels", names},
               {"class_counts", counts},
               {"images", out.images.size()},
               {"vessels", vessels}};
  return out;
}

WrittenFiles write(const SyntheticData& data, const data::FeatureShape& shape,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  WrittenFiles files{dir / "ais.csv", dir / "features.nff", dir / "truth.json"};
  data::write_ais_csv(files.ais_csv, data.ais.records);
  data::NffWriter writer(files.features, shape);
  for (const auto& img : data.images) writer.write(img);
  writer.finish();
  std::ofstream t(files.truth, std::ios::trunc);
  t << data.truth.dump(2) << '\n';
  return files;
}

}  // namespace nfship::synthetic
