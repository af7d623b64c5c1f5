#include "nfship/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "nfship/ablation.hpp"
#include "nfship/ad/checkpoint.hpp"
#include "nfship/baseline.hpp"
#include "nfship/cart.hpp"
#include "nfship/classical.hpp"
#include "nfship/common.hpp"
#include "nfship/data_model.hpp"
#include "nfship/evaluation.hpp"
#include "nfship/log.hpp"
#include "nfship/neurofuzzy.hpp"
#include "nfship/synthetic.hpp"
#include "nfship/training.hpp"

namespace nfship::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Bad input supplied on the command line (missing file, inconsistent flags).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Output {
  json summary = json::object();
  std::string text;
};

void require_file(const fs::path& path, const std::string& what, const std::string& hint) {
  if (!fs::exists(path)) {
    throw InputError(what + " not found: '" + path.string() + "'" + (hint.empty() ? "" : "; " + hint));
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path, const std::string& what, const std::string& hint) {
  require_file(path, what, hint);
  std::ifstream in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(what + " '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

std::string hash_of(const json& j) { return hex64(fnv1a64(j.dump())); }

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

data::FeatureShape parse_shape(const std::string& text) {
  std::vector<std::uint32_t> dims;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      const long v = std::stol(part);
      if (v <= 0) throw std::invalid_argument("non-positive");
      dims.push_back(static_cast<std::uint32_t>(v));
    } catch (const std::exception&) {
      throw InputError("--shape expects C,H,W with positive integers, got '" + text + "'");
    }
  }
  if (dims.size() != 3) throw InputError("--shape expects C,H,W, got '" + text + "'");
  return {dims[0], dims[1], dims[2]};
}

// ---- dataset access ----------------------------------------------------

struct DataSource {
  std::string dir;
  std::string variant = "vc";
};

void add_data_options(CLI::App* sub, DataSource& src) {
  sub->add_option("--data", src.dir, "Directory written by build-dataset")->required();
  sub->add_option("--dataset", src.variant, "Dataset variant")
      ->check(CLI::IsMember({"ic", "vc"}));
}

fs::path manifest_path(const DataSource& src) { return fs::path(src.dir) / (src.variant + ".json"); }

data::StoredDataset load_stored(const DataSource& src) {
  const auto path = manifest_path(src);
  require_file(path, "dataset manifest", "run 'nfship build-dataset --out " + src.dir + "' first");
  return data::load_dataset(path);
}

data::SplitResult partition(const data::StoredDataset& stored) {
  if (stored.in_train.empty()) {
    throw InputError("dataset has no recorded train/test split; rebuild it with build-dataset");
  }
  return data::apply_partition(stored.data, stored.in_train);
}

const data::Dataset& pick_split(const data::StoredDataset& stored, const data::SplitResult& parts,
                                const std::string& which) {
  if (which == "train") return parts.train;
  if (which == "test") return parts.test;
  return stored.data;
}

json dataset_ref(const DataSource& src, const data::StoredDataset& stored) {
  return {{"variant", src.variant},
          {"config_hash", stored.config_hash},
          {"split_seed", stored.split.seed}};
}

// ---- rules files --------------------------------------------------------

constexpr int kRulesVersion = 1;

struct RulesFile {
  pipeline::RuleFit fit;
  std::string config_hash;
};

RulesFile load_rules(const fs::path& path) {
  const auto j = read_json(path, "rules file", "create it with 'nfship extract-rules'");
  if (j.value("format", "") != "nfship-rules") {
    throw FormatError("'" + path.string() + "' is not an nfship rules file");
  }
  const int version = j.value("version", -1);
  if (version != kRulesVersion) {
    throw VersionError("rules file version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kRulesVersion) + "); regenerate it with extract-rules");
  }
  return {pipeline::rule_fit_from_json(j), j.value("config_hash", "")};
}

json rule_counts(const cart::RuleSet& rules) {
  json per_class = json::array();
  for (const auto& r : rules.rules) {
    per_class.push_back({{"label", r.label},
                         {"conditions", r.conditions.size()},
                         {"comparisons", r.comparison_count()}});
  }
  return {{"conditions", rules.condition_count()},
          {"comparisons", rules.comparison_count()},
          {"per_class", per_class}};
}

void check_labels(const std::vector<std::string>& model_labels, const data::Dataset& ds,
                  const std::string& what) {
  if (model_labels != ds.label_names) {
    throw InputError(what + " was trained on labels that differ from the dataset's; use the dataset "
                            "the model was trained on");
  }
}

// ---- model options ------------------------------------------------------

struct ModelFlags {
  std::string model = "neurofuzzy";
  std::optional<std::string> rules;
  std::size_t depth = 6;
  std::size_t min_leaf = 5;
  double r = fuzzy::kDefaultOrness;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  std::size_t batch = 32;
  double lr = 1e-4;
  bool no_dropout = false;
  std::string slope_activation = "leaky-relu";
  std::size_t conv1 = 64;
  std::size_t conv2 = 32;
  std::size_t a1 = 512;
  std::size_t hidden = 256;
};

void add_training_options(CLI::App* sub, ModelFlags& f) {
  sub->add_option("--epochs", f.epochs, "Training epochs")->check(CLI::PositiveNumber);
  sub->add_option("--seed", f.seed, "Seed for initialisation and batch order");
  sub->add_option("--batch", f.batch, "Mini-batch size")->check(CLI::Range(2, 1 << 20));
  sub->add_option("--lr", f.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  sub->add_flag("--no-dropout", f.no_dropout, "Disable dropout during training");
  sub->add_option("--slope-activation", f.slope_activation, "Slope head output activation")
      ->check(CLI::IsMember({"leaky-relu", "softplus"}));
  sub->add_option("--conv1", f.conv1, "conv1 output channels")->check(CLI::PositiveNumber);
  sub->add_option("--conv2", f.conv2, "conv2 output channels")->check(CLI::PositiveNumber);
  sub->add_option("--a1-width", f.a1, "Width of the a1 layer")->check(CLI::PositiveNumber);
  sub->add_option("--hidden-width", f.hidden,
                  "Width of a2 and of the baseline's AIS and bilinear layers")
      ->check(CLI::PositiveNumber);
}

model::TrainOptions train_options(const ModelFlags& f) {
  model::TrainOptions t;
  t.epochs = f.epochs;
  t.batch_size = f.batch;
  t.learning_rate = f.lr;
  t.seed = f.seed;
  t.dropout = !f.no_dropout;
  return t;
}

model::BranchConfig branch_config(const ModelFlags& f, const data::FeatureShape& shape) {
  model::BranchConfig b;
  b.feature_shape = shape;
  b.conv1.out_channels = f.conv1;
  b.conv2.out_channels = f.conv2;
  b.a1_width = f.a1;
  return b;
}

model::NeuroFuzzyConfig neurofuzzy_config(const ModelFlags& f, const data::FeatureShape& shape) {
  model::NeuroFuzzyConfig c;
  c.branch = branch_config(f, shape);
  c.a2_width = f.hidden;
  c.r_and = -f.r;
  c.r_or = f.r;
  c.slope_mode = f.model == "global-slopes" ? model::SlopeMode::kGlobal : model::SlopeMode::kPerSample;
  c.slope_activation = f.slope_activation == "softplus" ? model::SlopeActivation::kSoftplus
                                                        : model::SlopeActivation::kLeakyRelu;
  c.train = train_options(f);
  return c;
}

model::BaselineConfig baseline_config(const ModelFlags& f, const data::FeatureShape& shape) {
  model::BaselineConfig c;
  c.branch = branch_config(f, shape);
  c.b1_width = c.b2_width = c.b3_width = c.bilinear_width = f.hidden;
  c.train = train_options(f);
  return c;
}

model::StepCallback progress_logger(std::size_t batches_hint) {
  return [batches_hint](const model::StepInfo& s) {
    if (s.batch + 1 == batches_hint || s.batch == 0) {
      log::debug("epoch " + std::to_string(s.epoch) + " batch " + std::to_string(s.batch) +
                 " loss " + fixed(s.loss, 6));
    }
  };
}

// ---- checkpoints --------------------------------------------------------

struct LoadedModel {
  std::string kind;
  std::string scalar;
  json manifest;
};

LoadedModel inspect_checkpoint(const fs::path& path) {
  require_file(path, "checkpoint", "create it with 'nfship train'");
  const auto m = ad::read_checkpoint_manifest(path);
  if (m.value("format", "") != "nfship-model") {
    throw FormatError("'" + path.string() + "' is not an nfship model checkpoint");
  }
  return {m.value("model", ""), m.value("scalar", "f32"), m};
}

struct Scored {
  std::vector<int> predicted;
  std::vector<std::vector<double>> scores;
};

std::vector<int> argmax_rows(const std::vector<std::vector<double>>& scores) {
  std::vector<int> out;
  out.reserve(scores.size());
  for (const auto& row : scores) {
    out.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return out;
}

template <typename Model>
Scored score_model(Model& model, const data::Dataset& ds) {
  const auto rows = model::all_rows(ds);
  Scored s;
  s.scores = model.probabilities(ds, rows);
  s.predicted = argmax_rows(s.scores);
  return s;
}

template <typename Model>
std::vector<std::string> model_labels(const Model& m) {
  if constexpr (requires { m.labels(); }) {
    return m.labels();
  } else {
    std::vector<std::string> out;
    for (const auto& r : m.rules().rules) out.push_back(r.label);
    return out;
  }
}

// Calls `fn` with the loaded model of the right class and scalar type.
template <typename Fn>
void with_model(const fs::path& path, Fn&& fn) {
  const auto info = inspect_checkpoint(path);
  const bool f64 = info.scalar == "f64";
  if (info.kind == "neurofuzzy" || info.kind == "global-slopes") {
    if (f64) {
      auto m = model::NeuroFuzzyModelT<double>::load(path);
      fn(m, info);
    } else {
      auto m = model::NeuroFuzzyModelT<float>::load(path);
      fn(m, info);
    }
  } else if (info.kind == "baseline") {
    if (f64) {
      auto m = model::BaselineModelT<double>::load(path);
      fn(m, info);
    } else {
      auto m = model::BaselineModelT<float>::load(path);
      fn(m, info);
    }
  } else {
    throw FormatError("checkpoint '" + path.string() + "' holds an unknown model kind '" + info.kind +
                      "'");
  }
}

// ---- subcommands --------------------------------------------------------

struct GenFlags {
  std::string out;
  std::size_t vessels = 500;
  std::size_t classes = 5;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string profile = "uniform";
  std::string shape = "256,7,7";
  double feature_noise = 1.0;
  std::size_t min_images = 1;
  std::size_t max_images = 5;
};

Output gen_synthetic(const GenFlags& f) {
  synthetic::SyntheticOptions o;
  o.vessels = f.vessels;
  o.classes = f.classes;
  o.noise = f.noise;
  o.seed = f.seed;
  o.profile = synthetic::parse_profile(f.profile);
  o.shape = parse_shape(f.shape);
  o.feature_noise = f.feature_noise;
  o.min_images = f.min_images;
  o.max_images = f.max_images;
  try {
    o.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  const auto data = synthetic::generate(o);
  const auto files = synthetic::write(data, o.shape, f.out);
  Output r;
  r.summary = {{"command", "gen-synthetic"},
               {"ais_csv", files.ais_csv.string()},
               {"features", files.features.string()},
               {"truth", files.truth.string()},
               {"vessels", data.ais.records.size()},
               {"images", data.images.size()},
               {"labels", data.truth.at("labels")},
               {"class_counts", data.truth.at("class_counts")},
               {"seed", o.seed},
               {"config_hash", data.truth.at("config_hash")}};
  std::ostringstream t;
  t << "wrote " << data.ais.records.size() << " vessels and " << data.images.size()
    << " images to " << f.out << "\n";
  const auto labels = data.truth.at("labels");
  const auto counts = data.truth.at("class_counts");
  for (std::size_t c = 0; c < labels.size(); ++c) {
    t << "  " << labels[c].get<std::string>() << ": " << counts[c].get<std::size_t>() << "\n";
  }
  r.text = t.str();
  return r;
}

struct BuildFlags {
  std::string ais;
  std::string features;
  std::string out;
  double train_fraction = 0.75;
  std::uint64_t seed = 0;
  std::size_t min_vessels = 20;
  std::optional<double> min_confidence;
};

Output build_dataset(const BuildFlags& f) {
  require_file(f.ais, "AIS CSV", "");
  require_file(f.features, "feature file", "export one with the feature exporter or gen-synthetic");
  const auto ais = data::load_ais_csv(f.ais);
  if (ais.dropped_incomplete > 0 || ais.parse_errors > 0 || ais.duplicates > 0) {
    log::warn("AIS table: dropped " + std::to_string(ais.dropped_incomplete) + " incomplete rows, " +
              std::to_string(ais.parse_errors) + " unparsable rows, " +
              std::to_string(ais.duplicates) + " duplicate MMSIs");
  }
  data::NffReadOptions read_options;
  if (f.min_confidence) read_options.min_confidence = static_cast<float>(*f.min_confidence);
  const auto nff = data::read_nff(f.features, read_options);

  std::ifstream csv(f.ais, std::ios::binary);
  std::ostringstream csv_bytes;
  csv_bytes << csv.rdbuf();
  const json build_config = {{"train_fraction", f.train_fraction},
                             {"seed", f.seed},
                             {"min_vessels", f.min_vessels},
                             {"min_confidence", f.min_confidence ? json(*f.min_confidence) : json()},
                             {"feature_shape", data::to_string(nff.shape)},
                             {"feature_records", nff.records.size()},
                             {"ais_fnv1a64", hex64(fnv1a64(csv_bytes.str()))}};
  const auto hash = hash_of(build_config);

  data::SplitSpec spec{f.train_fraction, f.seed, true};
  data::BuildStats vc_stats;
  data::BuildStats ic_stats;
  auto vc = data::filter_rare_classes(
      data::build_vessel_centred(nff.records, ais, nff.shape, &vc_stats), f.min_vessels);
  auto ic = data::filter_rare_classes(
      data::build_image_centred(nff.records, ais, nff.shape, &ic_stats), f.min_vessels);

  // Both variants share one vessel-level split.
  const auto vc_split = data::split(vc, spec);
  for (const auto& w : vc_split.warnings) log::warn(w);
  std::set<std::uint64_t> train_vessels;
  for (const auto& row : vc_split.train.rows) train_vessels.insert(row.mmsi);
  std::vector<bool> ic_in_train;
  for (const auto& row : ic.rows) ic_in_train.push_back(train_vessels.count(row.mmsi) > 0);

  fs::create_directories(f.out);
  const fs::path out(f.out);
  data::save_dataset(out / "vc.json", {vc, vc_split.in_train, spec, hash});
  data::save_dataset(out / "ic.json", {ic, ic_in_train, spec, hash});

  auto describe = [](const data::Dataset& ds, const std::vector<bool>& in_train) {
    json per_class = json::array();
    std::vector<std::size_t> train(ds.num_classes(), 0);
    std::vector<std::size_t> test(ds.num_classes(), 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      (in_train[i] ? train : test)[static_cast<std::size_t>(ds.rows[i].label)]++;
    }
    for (std::size_t c = 0; c < ds.num_classes(); ++c) {
      per_class.push_back({{"label", ds.label_names[c]}, {"train", train[c]}, {"test", test[c]}});
    }
    return json{{"rows", ds.size()}, {"per_class", per_class}};
  };
  Output r;
  r.summary = {{"command", "build-dataset"},
               {"out", f.out},
               {"vc", describe(vc, vc_split.in_train)},
               {"ic", describe(ic, ic_in_train)},
               {"excluded_images", ic_stats.excluded_images},
               {"warnings", vc_split.warnings},
               {"seed", f.seed},
               {"config_hash", hash}};
  std::ostringstream t;
  t << "wrote " << (out / "vc.json").string() << " (" << vc.size() << " vessels) and "
    << (out / "ic.json").string() << " (" << ic.size() << " images)\n";
  t << std::left << std::setw(12) << "class" << std::right << std::setw(10) << "vc train"
    << std::setw(10) << "vc test" << std::setw(10) << "ic train" << std::setw(10) << "ic test" << "\n";
  for (std::size_t c = 0; c < vc.num_classes(); ++c) {
    const auto& v = r.summary["vc"]["per_class"][c];
    const auto& i = r.summary["ic"]["per_class"][c];
    t << std::left << std::setw(12) << vc.label_names[c] << std::right << std::setw(10)
      << v["train"].get<std::size_t>() << std::setw(10) << v["test"].get<std::size_t>()
      << std::setw(10) << i["train"].get<std::size_t>() << std::setw(10)
      << i["test"].get<std::size_t>() << "\n";
  }
  r.text = t.str();
  return r;
}

struct RulesFlags {
  DataSource src;
  std::size_t depth = 6;
  std::size_t min_leaf = 5;
  std::size_t min_split = 2;
  std::string out;
};

json rules_document(const pipeline::RuleFit& fit, const cart::CartParams& params,
                    const DataSource& src, const data::StoredDataset& stored) {
  auto j = pipeline::to_json(fit, params);
  const json provenance = {{"cart", j.at("cart")}, {"dataset", dataset_ref(src, stored)}};
  j["format"] = "nfship-rules";
  j["version"] = kRulesVersion;
  j["dataset"] = dataset_ref(src, stored);
  j["seed"] = stored.split.seed;
  j["config_hash"] = hash_of(provenance);
  return j;
}

Output extract_rules(const RulesFlags& f) {
  const auto stored = load_stored(f.src);
  const auto parts = partition(stored);
  const cart::CartParams params{f.depth, f.min_split, f.min_leaf};
  try {
    params.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  const auto fit = pipeline::fit_rules(parts.train, params);
  for (const auto& w : fit.warnings) log::warn(w);
  const auto doc = rules_document(fit, params, f.src, stored);
  write_json(f.out, doc);

  Output r;
  r.summary = {{"command", "extract-rules"},
               {"out", f.out},
               {"depth", f.depth},
               {"min_leaf", f.min_leaf},
               {"counts", rule_counts(fit.rules)},
               {"warnings", fit.warnings},
               {"seed", doc.at("seed")},
               {"config_hash", doc.at("config_hash")}};
  std::ostringstream t;
  const auto symbols = cart::ais_feature_symbols();
  for (const auto& rule : fit.rules.rules) {
    t << rule.label << " (" << rule.conditions.size() << " conditions, " << rule.comparison_count()
      << " comparisons)\n  " << cart::render_rule(rule, symbols) << "\n";
  }
  t << "total: " << fit.rules.condition_count() << " conditions, " << fit.rules.comparison_count()
    << " comparisons\n";
  r.text = t.str();
  return r;
}

struct TrainFlags {
  DataSource src;
  ModelFlags model;
  std::string out;
  std::optional<std::string> losses;
};

Output train(const TrainFlags& f) {
  const auto& mf = f.model;
  const auto stored = load_stored(f.src);
  const auto parts = partition(stored);
  const auto& ds = parts.train;
  const fs::path out(f.out);
  const fs::path loss_path = f.losses ? fs::path(*f.losses) : fs::path(f.out + ".loss.csv");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());

  json extra = {{"dataset", dataset_ref(f.src, stored)}};
  model::TrainResult result;
  std::string config_hash;
  std::string rules_text;
  if (mf.model == "baseline") {
    model::BaselineModel m(ds.label_names, baseline_config(mf, ds.shape));
    result = m.train(ds, progress_logger(0));
    extra["epoch_loss"] = result.epoch_loss;
    extra["loss_csv"] = loss_path.filename().string();
    m.save(out, extra);
    config_hash = m.manifest().at("config_hash");
  } else {
    pipeline::RuleFit fit;
    if (mf.rules) {
      auto file = load_rules(*mf.rules);
      fit = std::move(file.fit);
      extra["rules_hash"] = file.config_hash;
    } else {
      const cart::CartParams params{mf.depth, 2, mf.min_leaf};
      fit = pipeline::fit_rules(ds, params);
      for (const auto& w : fit.warnings) log::warn(w);
      extra["rules_hash"] = rules_document(fit, params, f.src, stored).at("config_hash");
    }
    std::vector<std::string> rule_labels;
    for (const auto& r : fit.rules.rules) rule_labels.push_back(r.label);
    if (rule_labels != ds.label_names) {
      throw InputError("rules file labels do not match the dataset's; extract rules from this dataset");
    }
    model::NeuroFuzzyModel m(fit.rules, neurofuzzy_config(mf, ds.shape));
    result = m.train(ds, progress_logger(0));
    extra["epoch_loss"] = result.epoch_loss;
    extra["loss_csv"] = loss_path.filename().string();
    m.save(out, extra);
    config_hash = m.manifest().at("config_hash");
  }
  model::write_loss_csv(loss_path, result.epoch_loss);

  Output r;
  r.summary = {{"command", "train"},
               {"model", mf.model},
               {"checkpoint", f.out},
               {"losses", loss_path.string()},
               {"epochs", result.epoch_loss.size()},
               {"steps", result.steps},
               {"final_loss", result.epoch_loss.empty() ? json() : json(result.epoch_loss.back())},
               {"seed", mf.seed},
               {"config_hash", config_hash}};
  std::ostringstream t;
  t << "trained " << mf.model << " for " << result.epoch_loss.size() << " epochs ("
    << result.steps << " steps)";
  if (!result.epoch_loss.empty()) t << ", final loss " << fixed(result.epoch_loss.back(), 6);
  t << "\ncheckpoint: " << f.out << "\nlosses: " << loss_path.string() << "\n";
  r.text = t.str();
  return r;
}

struct EvalFlags {
  DataSource src;
  std::vector<std::string> checkpoints;
  std::vector<std::string> models;  // rules-only and classical baselines
  std::optional<std::string> rules;
  std::string split = "test";
  std::size_t k = 5;
  std::optional<std::string> out;
};

eval::EvalReport evaluate_classical(const std::string& name, const EvalFlags& f,
                                    const data::StoredDataset& stored, const data::SplitResult& parts,
                                    const data::Dataset& target) {
  std::vector<AisVector> X;
  std::vector<int> y;
  for (const auto& row : parts.train.rows) {
    X.push_back(row.ais);
    y.push_back(row.label);
  }
  const std::size_t m = target.num_classes();
  std::function<std::vector<double>(const AisVector&)> score;
  json config = {{"model", name}, {"dataset", dataset_ref(f.src, stored)}};
  std::optional<classical::KnnClassifier> knn;
  std::optional<classical::GaussianNb> nb;
  std::optional<classical::LogisticRegression> logistic;
  std::optional<classical::CrispRuleClassifier> crisp;
  if (name == "crisp") {
    if (!f.rules) throw InputError("--model crisp needs --rules (from extract-rules)");
    auto file = load_rules(*f.rules);
    if (file.fit.trees.empty()) throw InputError("rules file has no trees; regenerate it with extract-rules");
    std::vector<std::string> labels;
    for (const auto& r : file.fit.rules.rules) labels.push_back(r.label);
    if (labels != target.label_names) {
      throw InputError("rules file labels do not match the dataset's; extract rules from this dataset");
    }
    config["rules_hash"] = file.config_hash;
    crisp.emplace(file.fit.rules, file.fit.trees);
    score = [&](const AisVector& x) { return crisp->scores(x); };
  } else if (name == "knn") {
    config["k"] = f.k;
    knn.emplace(X, y, m, f.k);
    score = [&](const AisVector& x) { return knn->scores(x); };
  } else if (name == "naive-bayes") {
    nb.emplace(X, y, m);
    score = [&](const AisVector& x) { return nb->scores(x); };
  } else {
    logistic.emplace(X, y, m);
    score = [&](const AisVector& x) { return logistic->scores(x); };
  }
  std::vector<std::vector<double>> scores;
  std::vector<int> truth;
  for (const auto& row : target.rows) {
    scores.push_back(score(row.ais));
    truth.push_back(row.label);
  }
  std::vector<int> predicted;
  if (crisp) {
    for (const auto& row : target.rows) predicted.push_back(crisp->predict(row.ais));
  } else {
    predicted = argmax_rows(scores);
  }
  auto report = eval::make_report(name, f.src.variant, target.label_names, truth, predicted, scores);
  report.seed = stored.split.seed;
  report.config_hash = hash_of(config);
  return report;
}

Output evaluate(const EvalFlags& f) {
  if (f.checkpoints.empty() && f.models.empty()) {
    throw InputError("nothing to evaluate: pass --checkpoint and/or --model");
  }
  const auto stored = load_stored(f.src);
  const auto parts = partition(stored);
  const auto& target = pick_split(stored, parts, f.split);
  if (target.empty()) throw EmptyDatasetError("the " + f.split + " split is empty");
  std::vector<int> truth;
  for (const auto& row : target.rows) truth.push_back(row.label);

  std::vector<eval::EvalReport> reports;
  for (const auto& path : f.checkpoints) {
    with_model(path, [&](auto& m, const LoadedModel& info) {
      check_labels(model_labels(m), target, "checkpoint '" + path + "'");
      const auto s = score_model(m, target);
      auto report = eval::make_report(info.kind, f.src.variant, target.label_names, truth,
                                      s.predicted, s.scores);
      report.seed = info.manifest.value("seed", std::uint64_t{0});
      report.config_hash = info.manifest.value("config_hash", "");
      reports.push_back(std::move(report));
    });
  }
  for (const auto& name : f.models) reports.push_back(evaluate_classical(name, f, stored, parts, target));

  json jr = json::array();
  for (const auto& rep : reports) jr.push_back(rep.to_json());
  const json doc = {{"format", "nfship-eval"},
                    {"version", 1},
                    {"split", f.split},
                    {"dataset", dataset_ref(f.src, stored)},
                    {"reports", jr}};
  if (f.out) write_json(*f.out, doc);

  Output r;
  r.summary = doc;
  r.summary["command"] = "evaluate";
  std::ostringstream t;
  for (const auto& rep : reports) t << rep.render() << "\n";
  if (reports.size() > 1) t << eval::render_comparison(reports);
  r.text = t.str();
  return r;
}

struct PredictFlags {
  DataSource src;
  std::string checkpoint;
  std::optional<std::size_t> row;
  std::optional<std::uint64_t> mmsi;
  std::optional<std::string> image_id;
  bool explain = false;
};

std::size_t find_row(const data::Dataset& ds, const PredictFlags& f) {
  const int selectors = (f.row ? 1 : 0) + (f.mmsi ? 1 : 0) + (f.image_id ? 1 : 0);
  if (selectors != 1) throw InputError("pass exactly one of --row, --mmsi, --image-id");
  if (f.row) {
    if (*f.row >= ds.size()) {
      throw InputError("--row " + std::to_string(*f.row) + " is out of range (dataset has " +
                       std::to_string(ds.size()) + " rows)");
    }
    return *f.row;
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (f.mmsi && ds.rows[i].mmsi == *f.mmsi) return i;
    if (f.image_id && ds.rows[i].image_id == *f.image_id) return i;
  }
  throw InputError(f.mmsi ? "MMSI " + std::to_string(*f.mmsi) + " is not in the dataset"
                          : "image id '" + *f.image_id + "' is not in the dataset");
}

Output predict(const PredictFlags& f) {
  const auto stored = load_stored(f.src);
  const auto& ds = stored.data;
  const std::size_t row = find_row(ds, f);
  Output r;
  with_model(f.checkpoint, [&](auto& m, const LoadedModel& info) {
    check_labels(model_labels(m), ds, "checkpoint '" + f.checkpoint + "'");
    const auto& dr = ds.rows[row];
    json j = {{"command", "predict"},
              {"row", row},
              {"mmsi", dr.mmsi},
              {"image_id", dr.image_id},
              {"truth", ds.label_names[static_cast<std::size_t>(dr.label)]},
              {"seed", info.manifest.value("seed", std::uint64_t{0})},
              {"config_hash", info.manifest.value("config_hash", "")}};
    std::ostringstream t;
    t << "row " << row << " (mmsi " << dr.mmsi;
    if (!dr.image_id.empty()) t << ", image " << dr.image_id;
    t << ", true class " << ds.label_names[static_cast<std::size_t>(dr.label)] << ")\n";
    if constexpr (requires { m.predict(ds, row); }) {
      const auto p = m.predict(ds, row);
      j["label"] = ds.label_names[static_cast<std::size_t>(p.label)];
      j["probabilities"] = p.probabilities;
      j["scores"] = p.scores;
      if (f.explain) j["explanation"] = p.explanation.to_json();
      t << "predicted " << j["label"].get<std::string>() << " (p = "
        << fixed(p.probabilities[static_cast<std::size_t>(p.label)], 4) << ")\n";
      if (f.explain) t << p.explanation.render();
    } else {
      if (f.explain) {
        throw InputError("--explain needs a neuro-fuzzy checkpoint; '" + f.checkpoint +
                         "' holds a " + info.kind + " model");
      }
      const std::size_t rows[1] = {row};
      const auto probs = m.probabilities(ds, rows).front();
      const auto label = static_cast<std::size_t>(argmax_rows({probs}).front());
      j["label"] = ds.label_names[label];
      j["probabilities"] = probs;
      t << "predicted " << ds.label_names[label] << " (p = " << fixed(probs[label], 4) << ")\n";
    }
    r.summary = j;
    r.text = t.str();
  });
  return r;
}

struct AblateFlags {
  DataSource src;
  ModelFlags model;
  std::vector<std::size_t> depths{4, 6, 8, 10};
  std::vector<double> orness{14.0, 5.4, 2.14};
  std::optional<std::string> out;
};

Output ablate(const AblateFlags& f) {
  const auto stored = load_stored(f.src);
  const auto parts = partition(stored);
  pipeline::AblationOptions o;
  o.depths = f.depths;
  o.orness = f.orness;
  o.cart.min_samples_leaf = f.model.min_leaf;
  o.model = neurofuzzy_config(f.model, parts.train.shape);
  const auto report = pipeline::ablation_sweep(parts.train, parts.test, o);
  auto doc = report.to_json();
  doc["format"] = "nfship-ablation";
  doc["version"] = 1;
  doc["dataset"] = dataset_ref(f.src, stored);
  if (f.out) write_json(*f.out, doc);
  Output r;
  r.summary = doc;
  r.summary["command"] = "ablate";
  r.text = report.render();
  return r;
}

struct LossFlags {
  std::vector<std::string> inputs;
  std::vector<std::string> names;
  std::string out;
};

Output export_losses(const LossFlags& f) {
  if (!f.names.empty() && f.names.size() != f.inputs.size()) {
    throw InputError("--name must be given once per --in (got " + std::to_string(f.names.size()) +
                     " names for " + std::to_string(f.inputs.size()) + " inputs)");
  }
  std::vector<std::vector<double>> curves;
  std::vector<std::string> names;
  std::size_t epochs = 0;
  for (std::size_t i = 0; i < f.inputs.size(); ++i) {
    require_file(f.inputs[i], "loss CSV", "it is written next to the checkpoint by 'nfship train'");
    curves.push_back(model::read_loss_csv(f.inputs[i]));
    epochs = std::max(epochs, curves.back().size());
    names.push_back(f.names.empty() ? fs::path(f.inputs[i]).stem().string() : f.names[i]);
  }
  const fs::path out(f.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream csv(out, std::ios::trunc);
  if (!csv) throw InputError("cannot open '" + f.out + "' for writing");
  csv << "epoch";
  for (const auto& n : names) csv << ',' << n;
  csv << '\n' << std::setprecision(17);
  for (std::size_t e = 0; e < epochs; ++e) {
    csv << e + 1;
    for (const auto& c : curves) {
      csv << ',';
      if (e < c.size()) csv << c[e];
    }
    csv << '\n';
  }
  Output r;
  r.summary = {{"command", "export-losses"}, {"out", f.out}, {"series", names}, {"epochs", epochs}};
  r.text = "wrote " + std::to_string(names.size()) + " loss series over " + std::to_string(epochs) +
           " epochs to " + f.out + "\n";
  return r;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neuro-fuzzy ship-type classification toolkit", "nfship"};
  app.require_subcommand(1);
  app.fallthrough();
  bool as_json = false;
  app.add_flag("--json", as_json, "Print a machine-readable JSON summary to stdout");

  std::function<Output()> action;

  GenFlags gen;
  auto* sub = app.add_subcommand("gen-synthetic", "Generate a synthetic AIS + feature corpus");
  sub->add_option("--out", gen.out, "Output directory")->required();
  sub->add_option("--vessels", gen.vessels, "Number of vessels");
  sub->add_option("--classes", gen.classes, "Number of ship types (>= 2)");
  sub->add_option("--noise", gen.noise, "AIS noise level in [0, 1]");
  sub->add_option("--seed", gen.seed, "Random seed");
  sub->add_option("--profile", gen.profile, "Class balance")->check(CLI::IsMember({"uniform", "table3"}));
  sub->add_option("--shape", gen.shape, "Feature shape C,H,W");
  sub->add_option("--feature-noise", gen.feature_noise, "Std of feature noise around class templates");
  sub->add_option("--min-images", gen.min_images, "Fewest images per vessel");
  sub->add_option("--max-images", gen.max_images, "Most images per vessel");
  sub->callback([&] { action = [&] { return gen_synthetic(gen); }; });

  BuildFlags build;
  sub = app.add_subcommand("build-dataset", "Join AIS CSV and NFF1 features into IC/VC datasets");
  sub->add_option("--ais", build.ais, "AIS static-data CSV")->required();
  sub->add_option("--features", build.features, "NFF1 feature file")->required();
  sub->add_option("--out", build.out, "Output directory")->required();
  sub->add_option("--train-fraction", build.train_fraction, "Share of vessels used for training")
      ->check(CLI::Range(0.0, 1.0));
  sub->add_option("--seed", build.seed, "Split seed");
  sub->add_option("--min-vessels", build.min_vessels, "Drop classes with at most this many vessels");
  sub->add_option("--min-confidence", build.min_confidence, "Reject feature records below this confidence");
  sub->callback([&] { action = [&] { return build_dataset(build); }; });

  RulesFlags rules;
  sub = app.add_subcommand("extract-rules", "Fit one-vs-all CART trees and extract DNF rules");
  add_data_options(sub, rules.src);
  sub->add_option("--depth", rules.depth, "Maximum tree depth")->check(CLI::PositiveNumber);
  sub->add_option("--min-leaf", rules.min_leaf, "Minimum samples per leaf")->check(CLI::PositiveNumber);
  sub->add_option("--min-split", rules.min_split, "Minimum samples to split a node");
  sub->add_option("--out", rules.out, "Rules JSON path")->required();
  sub->callback([&] { action = [&] { return extract_rules(rules); }; });

  TrainFlags tr;
  sub = app.add_subcommand("train", "Train a neuro-fuzzy or baseline model");
  add_data_options(sub, tr.src);
  sub->add_option("--model", tr.model.model, "Model kind")
      ->check(CLI::IsMember({"neurofuzzy", "baseline", "global-slopes"}));
  sub->add_option("--rules", tr.model.rules, "Rules JSON from extract-rules (fitted on the fly if absent)");
  sub->add_option("--depth", tr.model.depth, "Tree depth when fitting rules on the fly")
      ->check(CLI::PositiveNumber);
  sub->add_option("--min-leaf", tr.model.min_leaf, "Minimum leaf size when fitting rules on the fly")
      ->check(CLI::PositiveNumber);
  sub->add_option("--r", tr.model.r, "Orness level: r_or = r, r_and = -r")->check(CLI::PositiveNumber);
  add_training_options(sub, tr.model);
  sub->add_option("--out", tr.out, "Checkpoint path")->required();
  sub->add_option("--losses", tr.losses, "Loss CSV path (default <out>.loss.csv)");
  sub->callback([&] { action = [&] { return train(tr); }; });

  EvalFlags ev;
  sub = app.add_subcommand("evaluate", "Score models on a dataset split");
  add_data_options(sub, ev.src);
  sub->add_option("--checkpoint", ev.checkpoints, "Model checkpoint (repeatable)");
  sub->add_option("--model", ev.models, "Non-neural model (repeatable)")
      ->check(CLI::IsMember({"crisp", "knn", "naive-bayes", "logistic"}));
  sub->add_option("--rules", ev.rules, "Rules JSON for --model crisp");
  sub->add_option("--split", ev.split, "Rows to score")->check(CLI::IsMember({"test", "train", "all"}));
  sub->add_option("--k", ev.k, "Neighbours for --model knn")->check(CLI::PositiveNumber);
  sub->add_option("--out", ev.out, "Report JSON path");
  sub->callback([&] { action = [&] { return evaluate(ev); }; });

  PredictFlags pr;
  sub = app.add_subcommand("predict", "Classify one dataset row");
  add_data_options(sub, pr.src);
  sub->add_option("--checkpoint", pr.checkpoint, "Model checkpoint")->required();
  sub->add_option("--row", pr.row, "Row index in the dataset");
  sub->add_option("--mmsi", pr.mmsi, "Vessel MMSI");
  sub->add_option("--image-id", pr.image_id, "Image id (image-centred data)");
  sub->add_flag("--explain", pr.explain, "Show how the winning rule fired");
  sub->callback([&] { action = [&] { return predict(pr); }; });

  AblateFlags ab;
  sub = app.add_subcommand("ablate", "Sweep tree depth and orness level");
  add_data_options(sub, ab.src);
  sub->add_option("--depths", ab.depths, "Tree depths")->delimiter(',');
  sub->add_option("--orness", ab.orness, "Orness levels r")->delimiter(',');
  sub->add_option("--min-leaf", ab.model.min_leaf, "Minimum samples per leaf")->check(CLI::PositiveNumber);
  add_training_options(sub, ab.model);
  sub->add_option("--out", ab.out, "Report JSON path");
  sub->callback([&] { action = [&] { return ablate(ab); }; });

  LossFlags lf;
  sub = app.add_subcommand("export-losses", "Merge loss CSVs into one plot-ready table");
  sub->add_option("--in", lf.inputs, "Loss CSV from train (repeatable)")->required();
  sub->add_option("--name", lf.names, "Column name per input (default: file stem)");
  sub->add_option("--out", lf.out, "Output CSV")->required();
  sub->callback([&] { action = [&] { return export_losses(lf); }; });

  std::vector<const char*> argv{"nfship"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "error: " << e.what() << "\nrun 'nfship --help' or 'nfship <command> --help' for usage\n";
    return kExitUsage;
  }

  try {
    const Output result = action();
    if (as_json) {
      out << result.summary.dump(2) << '\n';
    } else {
      out << result.text;
    }
    return kExitOk;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const VersionError& e) {
    err << "error: version mismatch: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace nfship::cli
