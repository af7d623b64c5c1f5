#include "nfship/neurofuzzy.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "nfship/ad/checkpoint.hpp"
#include "nfship/ad/ops.hpp"
#include "nfship/common.hpp"
#include "nfship/log.hpp"

namespace nfship::model {
namespace {

constexpr std::size_t kEvalChunk = 64;

void check_finite(const char* stage, const ad::Tensor<float>& t) {
  if (!t.all_finite()) throw NumericError(std::string(stage) + " produced non-finite values");
}
void check_finite(const char* stage, const ad::Tensor<double>& t) {
  if (!t.all_finite()) throw NumericError(std::string(stage) + " produced non-finite values");
}

std::string condition_tag(std::size_t j) {
  if (j < 26) return std::string("(") + static_cast<char>('a' + j) + ")";
  return "(c" + std::to_string(j + 1) + ")";
}

std::string activation_name(SlopeActivation a) {
  return a == SlopeActivation::kLeakyRelu ? "leaky_relu" : "softplus";
}

SlopeActivation parse_activation(const std::string& s) {
  if (s == "leaky_relu") return SlopeActivation::kLeakyRelu;
  if (s == "softplus") return SlopeActivation::kSoftplus;
  throw std::invalid_argument("unknown slope activation '" + s + "'");
}

}  // namespace

std::string to_string(SlopeMode mode) {
  return mode == SlopeMode::kPerSample ? "per-sample" : "global";
}

SlopeMode parse_slope_mode(const std::string& text) {
  if (text == "per-sample") return SlopeMode::kPerSample;
  if (text == "global") return SlopeMode::kGlobal;
  throw std::invalid_argument("unknown slope mode '" + text + "' (expected per-sample or global)");
}

void NeuroFuzzyConfig::validate() const {
  if (slope_mode == SlopeMode::kPerSample && !slope_override) {
    branch.validate();
    if (a2_width == 0) throw std::invalid_argument("a2 width must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (!(r_and < 0.0)) throw std::invalid_argument("andness level r_and must be negative");
  if (!(r_or > 0.0)) throw std::invalid_argument("orness level r_or must be positive");
  if (slope_override && !std::isfinite(*slope_override)) {
    throw std::invalid_argument("slope override must be finite");
  }
  train.validate();
}

nlohmann::json to_json(const NeuroFuzzyConfig& cfg) {
  return {{"branch", to_json(cfg.branch)},
          {"a2_width", cfg.a2_width},
          {"o1_width", cfg.o1_width},
          {"dropout", cfg.dropout},
          {"leaky_slope", cfg.leaky_slope},
          {"r_and", cfg.r_and},
          {"r_or", cfg.r_or},
          {"slope_mode", to_string(cfg.slope_mode)},
          {"slope_activation", activation_name(cfg.slope_activation)},
          {"initial_slope", cfg.initial_slope},
          {"slope_override", cfg.slope_override ? nlohmann::json(*cfg.slope_override) : nlohmann::json()},
          {"train", to_json(cfg.train)}};
}

NeuroFuzzyConfig neurofuzzy_config_from_json(const nlohmann::json& j) {
  NeuroFuzzyConfig cfg;
  cfg.branch = branch_config_from_json(j.at("branch"));
  cfg.a2_width = j.at("a2_width").get<std::size_t>();
  cfg.o1_width = j.at("o1_width").get<std::size_t>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.leaky_slope = j.at("leaky_slope").get<double>();
  cfg.r_and = j.at("r_and").get<double>();
  cfg.r_or = j.at("r_or").get<double>();
  cfg.slope_mode = parse_slope_mode(j.at("slope_mode").get<std::string>());
  cfg.slope_activation = parse_activation(j.at("slope_activation").get<std::string>());
  cfg.initial_slope = j.at("initial_slope").get<double>();
  if (!j.at("slope_override").is_null()) cfg.slope_override = j.at("slope_override").get<double>();
  cfg.train = train_options_from_json(j.at("train"));
  return cfg;
}

std::string config_hash(const nlohmann::json& config) { return hex64(fnv1a64(config.dump())); }

std::string Explanation::render() const {
  std::ostringstream os;
  os << "class " << label << "  R = " << std::fixed << std::setprecision(4) << score << '\n';
  for (const auto& c : conditions) {
    os << "  " << c.tag << " weight " << c.weight << "  degree " << c.degree << '\n';
    for (const auto& cmp : c.comparisons) {
      os << "      " << (cmp.op == cart::Op::kGreater ? "f>(" : "f<=(") << cmp.feature << "; s="
         << cmp.slope << ", " << cmp.threshold << ")  x=" << cmp.value << "  ->  " << cmp.membership
         << '\n';
    }
  }
  return os.str();
}

nlohmann::json Explanation::to_json() const {
  nlohmann::json conds = nlohmann::json::array();
  for (const auto& c : conditions) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& cmp : c.comparisons) {
      comps.push_back({{"feature", cmp.feature},
                       {"op", cart::to_string(cmp.op)},
                       {"threshold", cmp.threshold},
                       {"value", cmp.value},
                       {"slope", cmp.slope},
                       {"membership", cmp.membership}});
    }
    conds.push_back(
        {{"tag", c.tag}, {"weight", c.weight}, {"degree", c.degree}, {"comparisons", comps}});
  }
  return {{"class", label}, {"score", score}, {"conditions", conds}};
}

template <typename T>
NeuroFuzzyModelT<T>::NeuroFuzzyModelT(cart::RuleSet rules, NeuroFuzzyConfig cfg)
    : rules_(std::move(rules)), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (rules_.rules.size() < 2) throw ContractViolation("the model needs rules for at least 2 classes");
  bool any = false;
  for (const auto& r : rules_.rules) {
    if (r.conditions.empty()) {
      log::warn("class '" + r.label + "' has no conditions; its rule score is the constant 0");
    } else {
      any = true;
    }
  }
  if (!any) throw ContractViolation("every rule is empty; the rule set is degenerate");
  layout_ = fuzzy::RuleLayout::from(rules_);
  const std::size_t K = layout_.comparison_count();
  if (cfg_.o1_width != 0 && cfg_.o1_width != K) {
    throw ContractViolation("slope head width " + std::to_string(cfg_.o1_width) +
                            " does not match the rule set's " + std::to_string(K) +
                            " comparisons");
  }
  cfg_.o1_width = K;

  std::mt19937_64 rng(cfg_.train.seed);
  if (needs_features()) {
    add_branch(store_, cfg_.branch, rng);
    add_dense(store_, "a2", cfg_.branch.a1_width, cfg_.a2_width, rng);
    add_batch_norm(store_, "a2.bn", cfg_.a2_width);
    add_dense(store_, "o1", cfg_.a2_width, K, rng);
  } else if (cfg_.slope_mode == SlopeMode::kGlobal && !cfg_.slope_override) {
    store_.add("slopes", ad::Tensor<T>({K}, static_cast<T>(cfg_.initial_slope)));
  }
  store_.add("disjunction.logits", ad::Tensor<T>({layout_.condition_count()}, T(0)));
}

template <typename T>
bool NeuroFuzzyModelT<T>::needs_features() const {
  return cfg_.slope_mode == SlopeMode::kPerSample && !cfg_.slope_override &&
         layout_.comparison_count() > 0;
}

template <typename T>
std::string NeuroFuzzyModelT<T>::kind() const {
  return cfg_.slope_mode == SlopeMode::kPerSample ? "neurofuzzy" : "global-slopes";
}

template <typename T>
ad::Var NeuroFuzzyModelT<T>::slopes(ad::Tape<T>& tape, const Batch<T>& batch,
                                    const ad::Mode& mode) {
  const std::size_t K = layout_.comparison_count();
  if (cfg_.slope_override || K == 0) {
    return tape.constant(ad::Tensor<T>({K}, static_cast<T>(cfg_.slope_override.value_or(1.0))));
  }
  if (cfg_.slope_mode == SlopeMode::kGlobal) {
    ad::Var s = tape.param(store_.at("slopes"));
    return cfg_.slope_activation == SlopeActivation::kSoftplus ? ad::softplus(tape, s) : s;
  }
  const auto& shape = cfg_.branch.feature_shape;
  if (batch.features.shape() !=
      ad::Shape{batch.labels.size(), shape.channels, shape.height, shape.width}) {
    throw ad::ShapeError("feature batch " + ad::shape_string(batch.features.shape()) +
                         " does not match the configured feature shape " + to_string(shape));
  }
  ad::Var h = branch_forward(tape, store_, cfg_.branch, tape.constant(batch.features));
  h = hidden_block(tape, store_, "a2", h, static_cast<T>(cfg_.dropout), mode);
  h = dense_layer(tape, store_, "o1", h);
  if (cfg_.slope_activation == SlopeActivation::kSoftplus) return ad::softplus(tape, h);
  return ad::leaky_relu(tape, h, static_cast<T>(cfg_.leaky_slope));
}

template <typename T>
typename NeuroFuzzyModelT<T>::Outputs NeuroFuzzyModelT<T>::forward(ad::Tape<T>& tape,
                                                                    const Batch<T>& batch,
                                                                    const ad::Mode& mode) {
  Outputs out;
  out.slopes = slopes(tape, batch, mode);
  check_finite("slope head", tape.value(out.slopes));
  out.conditions = ad::fuzzy_conditions(tape, tape.constant(batch.ais), out.slopes, layout_,
                                        static_cast<T>(cfg_.r_and));
  check_finite("fuzzy conditions", tape.value(out.conditions));
  const T r_or = static_cast<T>(cfg_.r_or);
  ad::Var e = ad::exp(tape, ad::scale(tape, out.conditions, r_or));
  ad::Var s = ad::simplex_segment_sum(tape, e, tape.param(store_.at("disjunction.logits")),
                                      std::span<const fuzzy::RuleLayout::Range>(layout_.rule));
  out.scores = ad::scale(tape, ad::log(tape, s), T(1) / r_or);
  check_finite("disjunction", tape.value(out.scores));
  return out;
}

template <typename T>
ad::Var NeuroFuzzyModelT<T>::loss(ad::Tape<T>& tape, const Batch<T>& batch, const ad::Mode& mode) {
  const Outputs out = forward(tape, batch, mode);
  return ad::softmax_cross_entropy(tape, out.scores, std::span<const int>(batch.labels));
}

template <typename T>
std::vector<std::vector<double>> NeuroFuzzyModelT<T>::disjunction_weights() const {
  const auto& logits = store_.at("disjunction.logits").value;
  const auto w = ad::segment_softmax<T>(logits.values(), layout_.rule);
  std::vector<std::vector<double>> out;
  for (const auto& rr : layout_.rule) out.emplace_back(w.begin() + rr.begin, w.begin() + rr.end);
  return out;
}

template <typename T>
std::vector<std::vector<double>> NeuroFuzzyModelT<T>::scores(const data::Dataset& ds,
                                                             std::span<const std::size_t> rows) {
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  const std::size_t m = num_classes();
  for (std::size_t i = 0; i < rows.size(); i += kEvalChunk) {
    const auto chunk = rows.subspan(i, std::min(kEvalChunk, rows.size() - i));
    const auto batch = make_batch<T>(ds, chunk, needs_features());
    ad::Tape<T> tape;
    const auto r = tape.value(forward(tape, batch, ad::Mode{}).scores);
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      out.emplace_back(r.data() + b * m, r.data() + (b + 1) * m);
    }
  }
  return out;
}

template <typename T>
std::vector<std::vector<double>> NeuroFuzzyModelT<T>::probabilities(
    const data::Dataset& ds, std::span<const std::size_t> rows) {
  auto out = scores(ds, rows);
  for (auto& row : out) {
    const double peak = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (auto& v : row) sum += (v = std::exp(v - peak));
    for (auto& v : row) v /= sum;
  }
  return out;
}

template <typename T>
std::vector<int> NeuroFuzzyModelT<T>::classify(const data::Dataset& ds) {
  const auto rows = all_rows(ds);
  const auto s = scores(ds, rows);
  std::vector<int> out;
  out.reserve(s.size());
  for (const auto& r : s) {
    out.push_back(static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin()));
  }
  return out;
}

template <typename T>
Prediction NeuroFuzzyModelT<T>::predict(const data::Dataset& ds, std::size_t row) {
  const std::size_t idx[1] = {row};
  const auto batch = make_batch<T>(ds, idx, needs_features());
  ad::Tape<T> tape;
  const Outputs out = forward(tape, batch, ad::Mode{});
  const auto& r = tape.value(out.scores);
  const auto& sv = tape.value(out.slopes);
  const auto& cv = tape.value(out.conditions);

  Prediction p;
  p.scores.assign(r.data(), r.data() + num_classes());
  const double peak = *std::max_element(p.scores.begin(), p.scores.end());
  double sum = 0.0;
  for (double s : p.scores) p.probabilities.push_back(std::exp(s - peak));
  for (double v : p.probabilities) sum += v;
  for (double& v : p.probabilities) v /= sum;
  p.label = static_cast<int>(std::max_element(p.scores.begin(), p.scores.end()) - p.scores.begin());

  const auto weights = disjunction_weights();
  const auto& rule = rules_.rules[static_cast<std::size_t>(p.label)];
  const auto rr = layout_.rule[static_cast<std::size_t>(p.label)];
  p.explanation.label = rule.label;
  p.explanation.score = p.scores[static_cast<std::size_t>(p.label)];
  const auto& ais = ds.rows.at(row).ais;
  for (std::size_t c = rr.begin; c < rr.end; ++c) {
    ConditionTrace ct;
    ct.tag = condition_tag(c - rr.begin);
    ct.weight = weights[static_cast<std::size_t>(p.label)][c - rr.begin];
    ct.degree = cv[c];
    const auto range = layout_.condition[c];
    for (std::size_t k = range.begin; k < range.end; ++k) {
      ComparisonTrace t;
      const std::size_t f = layout_.feature[k];
      t.feature = f < rules_.feature_names.size() ? rules_.feature_names[f] : "x" + std::to_string(f);
      t.op = layout_.op[k];
      t.threshold = layout_.threshold[k];
      t.value = ais[f];
      t.slope = sv[k];  // one row, so [1, K] and [K] index alike
      t.membership = fuzzy::membership(t.op, t.value, t.slope, t.threshold);
      ct.comparisons.push_back(t);
    }
    p.explanation.conditions.push_back(std::move(ct));
  }
  return p;
}

template <typename T>
TrainResult NeuroFuzzyModelT<T>::train(const data::Dataset& ds, const StepCallback& on_step) {
  if (ds.num_classes() != num_classes()) {
    throw ContractViolation("dataset has " + std::to_string(ds.num_classes()) +
                            " classes but the rule set has " + std::to_string(num_classes()));
  }
  return train_loop(*this, ds, cfg_.train, on_step);
}

template <typename T>
nlohmann::json NeuroFuzzyModelT<T>::manifest() const {
  const auto cfg = to_json(cfg_);
  nlohmann::json labels = nlohmann::json::array();
  for (const auto& r : rules_.rules) labels.push_back(r.label);
  return {{"format", "nfship-model"},
          {"model", kind()},
          {"scalar", sizeof(T) == 4 ? "f32" : "f64"},
          {"labels", labels},
          {"config", cfg},
          {"seed", cfg_.train.seed},
          {"config_hash", config_hash(cfg)},
          {"rules", cart::to_json(rules_)}};
}

template <typename T>
void NeuroFuzzyModelT<T>::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  auto m = manifest();
  if (extra.is_object()) {
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  }
  ad::save_checkpoint(path, m, store_);
}

template <typename T>
NeuroFuzzyModelT<T> NeuroFuzzyModelT<T>::load(const std::filesystem::path& path) {
  const auto m = ad::read_checkpoint_manifest(path);
  if (m.value("format", "") != "nfship-model") {
    throw FormatError(path.string() + " is not a model checkpoint");
  }
  const auto kind = m.value("model", "");
  if (kind != "neurofuzzy" && kind != "global-slopes") {
    throw FormatError(path.string() + " holds a '" + kind + "' model, not a neuro-fuzzy one");
  }
  NeuroFuzzyModelT model(cart::rules_from_json(m.at("rules")),
                         neurofuzzy_config_from_json(m.at("config")));
  ad::load_checkpoint(path, model.store_);
  return model;
}

template class NeuroFuzzyModelT<float>;
template class NeuroFuzzyModelT<double>;

}  // namespace nfship::model
