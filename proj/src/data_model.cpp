#include "nfship/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "nfship/log.hpp"

namespace nfship::data {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 5> kKnownLabels = {"Cargo", "Tanker", "Other",
                                                          "Passenger", "Tug"};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// RFC 4180-ish: commas separate, double quotes group, "" escapes a quote.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e && std::isfinite(out);
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e;
}

Dataset empty_like(const Dataset& ds) {
  Dataset out;
  out.variant = ds.variant;
  out.label_names = ds.label_names;
  out.shape = ds.shape;
  return out;
}

}  // namespace

int AisTable::label_index(const std::string& ship_type) const {
  auto it = std::find(labels.begin(), labels.end(), ship_type);
  return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
}

std::vector<std::string> canonical_label_order(std::vector<std::string> labels) {
  std::set<std::string> unique(labels.begin(), labels.end());
  std::vector<std::string> out;
  for (auto known : kKnownLabels) {
    if (auto it = unique.find(std::string(known)); it != unique.end()) {
      out.push_back(*it);
      unique.erase(it);
    }
  }
  out.insert(out.end(), unique.begin(), unique.end());
  return out;
}

AisTable parse_ais_csv(std::istream& in) {
  AisTable table;
  std::string line;
  if (!std::getline(in, line)) return table;
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);
  }
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column.emplace(lower(header[i]), i);

  auto require = [&](std::string_view name) {
    auto it = column.find(std::string(name));
    if (it == column.end()) {
      throw FormatError("AIS CSV header is missing required column '" + std::string(name) + "'");
    }
    return it->second;
  };
  const std::size_t mmsi_col = require("mmsi");
  std::array<std::size_t, kAisFieldCount> field_cols{};
  for (std::size_t f = 0; f < kAisFieldCount; ++f) field_cols[f] = require(kAisFieldNames[f]);
  const std::size_t type_col = require("ship_type");

  std::unordered_set<std::uint64_t> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    auto cell = [&](std::size_t idx) -> std::string {
      return idx < cells.size() ? cells[idx] : std::string();
    };

    bool incomplete = cell(mmsi_col).empty() || cell(type_col).empty();
    for (auto c : field_cols) incomplete = incomplete || cell(c).empty();
    if (incomplete) {
      ++table.dropped_incomplete;
      continue;
    }

    AisStaticRecord rec;
    bool ok = parse_u64(cell(mmsi_col), rec.mmsi);
    for (std::size_t f = 0; ok && f < kAisFieldCount; ++f) {
      ok = parse_double(cell(field_cols[f]), rec.fields[f]) && rec.fields[f] >= 0.0;
    }
    if (!ok) {
      ++table.parse_errors;
      log::debug("AIS CSV line " + std::to_string(line_no) + ": unparseable or negative field");
      continue;
    }
    rec.ship_type = cell(type_col);
    if (!seen.insert(rec.mmsi).second) {
      ++table.duplicates;
      log::warn("AIS CSV: duplicate mmsi " + std::to_string(rec.mmsi) + " on line " +
                std::to_string(line_no) + ", keeping first");
      continue;
    }
    table.records.push_back(std::move(rec));
  }
  if (table.parse_errors > 0) {
    log::warn("AIS CSV: " + std::to_string(table.parse_errors) + " rows failed to parse");
  }

  std::vector<std::string> types;
  types.reserve(table.records.size());
  for (const auto& r : table.records) types.push_back(r.ship_type);
  table.labels = canonical_label_order(std::move(types));
  return table;
}

AisTable load_ais_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open AIS CSV '" + path.string() + "'");
  return parse_ais_csv(in);
}

void write_ais_csv(const std::filesystem::path& path, std::span<const AisStaticRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "mmsi";
  for (auto name : kAisFieldNames) out << ',' << name;
  out << ",ship_type\n";
  char buf[64];
  for (const auto& r : records) {
    out << r.mmsi;
    for (double v : r.fields) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      (void)ec;
      out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << ',' << r.ship_type << '\n';
  }
}

std::string to_string(DatasetVariant variant) {
  return variant == DatasetVariant::kImageCentred ? "ic" : "vc";
}

DatasetVariant parse_variant(const std::string& text) {
  if (text == "ic") return DatasetVariant::kImageCentred;
  if (text == "vc") return DatasetVariant::kVesselCentred;
  throw std::invalid_argument("unknown dataset variant '" + text + "' (expected ic or vc)");
}

Dataset build_image_centred(std::span<const ImageFeatureRecord> images, const AisTable& ais,
                            FeatureShape shape, BuildStats* stats) {
  std::unordered_map<std::uint64_t, const AisStaticRecord*> by_mmsi;
  for (const auto& r : ais.records) by_mmsi.emplace(r.mmsi, &r);

  Dataset ds;
  ds.variant = DatasetVariant::kImageCentred;
  ds.label_names = ais.labels;
  ds.shape = shape;
  std::size_t excluded = 0;
  for (const auto& img : images) {
    auto it = by_mmsi.find(img.mmsi);
    if (it == by_mmsi.end()) {
      ++excluded;
      continue;
    }
    if (img.feature.size() != shape.size()) {
      throw FormatError("image '" + img.image_id + "' feature size does not match " +
                        to_string(shape));
    }
    DatasetRow row;
    row.mmsi = img.mmsi;
    row.image_id = img.image_id;
    row.ais = it->second->fields;
    row.label = ais.label_index(it->second->ship_type);
    row.confidence = img.confidence;
    row.feature = img.feature;
    ds.rows.push_back(std::move(row));
  }
  if (stats) stats->excluded_images = excluded;
  if (excluded > 0) log::info(std::to_string(excluded) + " images had no AIS match");
  return ds;
}

Dataset build_vessel_centred(std::span<const ImageFeatureRecord> images, const AisTable& ais,
                             FeatureShape shape, BuildStats* stats) {
  std::unordered_map<std::uint64_t, const AisStaticRecord*> by_mmsi;
  for (const auto& r : ais.records) by_mmsi.emplace(r.mmsi, &r);

  std::map<std::uint64_t, std::vector<const ImageFeatureRecord*>> groups;
  std::size_t excluded = 0;
  for (const auto& img : images) {
    if (!by_mmsi.contains(img.mmsi)) {
      ++excluded;
      continue;
    }
    if (img.feature.size() != shape.size()) {
      throw FormatError("image '" + img.image_id + "' feature size does not match " +
                        to_string(shape));
    }
    groups[img.mmsi].push_back(&img);
  }

  Dataset ds;
  ds.variant = DatasetVariant::kVesselCentred;
  ds.label_names = ais.labels;
  ds.shape = shape;
  std::vector<double> acc(shape.size());
  for (auto& [mmsi, group] : groups) {
    // Fixed summation order makes the mean independent of input order.
    std::stable_sort(group.begin(), group.end(),
                     [](const ImageFeatureRecord* a, const ImageFeatureRecord* b) {
                       if (a->image_id != b->image_id) return a->image_id < b->image_id;
                       return std::lexicographical_compare(a->feature.begin(), a->feature.end(),
                                                           b->feature.begin(), b->feature.end());
                     });
    std::fill(acc.begin(), acc.end(), 0.0);
    double conf = 0.0;
    for (const auto* img : group) {
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += img->feature[i];
      conf += img->confidence;
    }
    const double n = static_cast<double>(group.size());
    const auto* rec = by_mmsi.at(mmsi);
    DatasetRow row;
    row.mmsi = mmsi;
    row.image_id = "vessel-" + std::to_string(mmsi);
    row.ais = rec->fields;
    row.label = ais.label_index(rec->ship_type);
    row.confidence = static_cast<float>(conf / n);
    row.feature.resize(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) row.feature[i] = static_cast<float>(acc[i] / n);
    ds.rows.push_back(std::move(row));
  }
  if (stats) stats->excluded_images = excluded;
  return ds;
}

std::vector<std::size_t> vessels_per_class(const Dataset& ds) {
  std::vector<std::unordered_set<std::uint64_t>> sets(ds.num_classes());
  for (const auto& r : ds.rows) sets.at(static_cast<std::size_t>(r.label)).insert(r.mmsi);
  std::vector<std::size_t> counts;
  counts.reserve(sets.size());
  for (const auto& s : sets) counts.push_back(s.size());
  return counts;
}

Dataset filter_rare_classes(const Dataset& ds, std::size_t min_vessels) {
  if (min_vessels < 1) throw std::invalid_argument("min_vessels must be >= 1");
  const auto counts = vessels_per_class(ds);
  std::vector<int> remap(counts.size(), -1);
  Dataset out = empty_like(ds);
  out.label_names.clear();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > min_vessels) {
      remap[c] = static_cast<int>(out.label_names.size());
      out.label_names.push_back(ds.label_names[c]);
    } else {
      log::info("dropping class '" + ds.label_names[c] + "' with " + std::to_string(counts[c]) +
                " vessels");
    }
  }
  if (out.label_names.empty()) {
    throw EmptyDatasetError("every class has at most " + std::to_string(min_vessels) +
                            " vessels; nothing left after filtering");
  }
  for (const auto& r : ds.rows) {
    int mapped = remap[static_cast<std::size_t>(r.label)];
    if (mapped < 0) continue;
    DatasetRow row = r;
    row.label = mapped;
    out.rows.push_back(std::move(row));
  }
  return out;
}

SplitResult apply_partition(const Dataset& ds, const std::vector<bool>& in_train) {
  if (in_train.size() != ds.rows.size()) {
    throw std::invalid_argument("partition size does not match dataset rows");
  }
  SplitResult res;
  res.train = empty_like(ds);
  res.test = empty_like(ds);
  res.in_train = in_train;
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    (in_train[i] ? res.train : res.test).rows.push_back(ds.rows[i]);
  }
  return res;
}

SplitResult split(const Dataset& ds, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must lie strictly between 0 and 1");
  }
  if (ds.empty()) throw EmptyDatasetError("cannot split an empty dataset");

  // Units: vessels (by mmsi) or individual rows, each carrying a label.
  std::vector<std::uint64_t> unit_key;
  std::vector<int> unit_label;
  std::vector<std::size_t> row_unit(ds.rows.size());
  if (spec.by_mmsi) {
    std::unordered_map<std::uint64_t, std::size_t> index;
    for (std::size_t i = 0; i < ds.rows.size(); ++i) {
      auto [it, fresh] = index.emplace(ds.rows[i].mmsi, unit_key.size());
      if (fresh) {
        unit_key.push_back(ds.rows[i].mmsi);
        unit_label.push_back(ds.rows[i].label);
      }
      row_unit[i] = it->second;
    }
  } else {
    for (std::size_t i = 0; i < ds.rows.size(); ++i) {
      unit_key.push_back(i);
      unit_label.push_back(ds.rows[i].label);
      row_unit[i] = i;
    }
  }

  const std::size_t m = ds.num_classes();
  std::vector<std::vector<std::size_t>> members(m);
  for (std::size_t u = 0; u < unit_key.size(); ++u) {
    members.at(static_cast<std::size_t>(unit_label[u])).push_back(u);
  }

  SplitResult res;
  const std::size_t total = unit_key.size();
  const auto target = static_cast<std::size_t>(std::llround(spec.train_fraction * total));

  std::vector<std::size_t> quota(m, 0);
  std::vector<double> remainder(m, 0.0);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < m; ++c) {
    const std::size_t n = members[c].size();
    if (n == 0) continue;
    if (n == 1) {
      quota[c] = 1;
      res.warnings.push_back("class '" + ds.label_names[c] +
                             "' has a single unit; assigned to train");
      log::warn(res.warnings.back());
    } else {
      const double exact = spec.train_fraction * static_cast<double>(n);
      quota[c] = static_cast<std::size_t>(std::floor(exact));
      remainder[c] = exact - std::floor(exact);
    }
    assigned += quota[c];
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < target && k < order.size(); ++k) {
    const std::size_t c = order[k];
    if (members[c].size() > 1 && quota[c] < members[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }

  std::mt19937_64 rng(spec.seed);
  std::vector<bool> unit_train(total, false);
  for (std::size_t c = 0; c < m; ++c) {
    auto units = members[c];
    std::shuffle(units.begin(), units.end(), rng);
    for (std::size_t k = 0; k < quota[c] && k < units.size(); ++k) unit_train[units[k]] = true;
  }

  std::vector<bool> in_train(ds.rows.size());
  for (std::size_t i = 0; i < ds.rows.size(); ++i) in_train[i] = unit_train[row_unit[i]];
  auto warnings = std::move(res.warnings);
  res = apply_partition(ds, in_train);
  res.warnings = std::move(warnings);
  return res;
}

VesselTable distinct_vessels(const Dataset& ds) {
  VesselTable t;
  std::unordered_set<std::uint64_t> seen;
  for (const auto& r : ds.rows) {
    if (!seen.insert(r.mmsi).second) continue;
    t.mmsi.push_back(r.mmsi);
    t.ais.push_back(r.ais);
    t.labels.push_back(r.label);
  }
  return t;
}

void save_dataset(const std::filesystem::path& manifest, const StoredDataset& stored) {
  const Dataset& ds = stored.data;
  auto blob = manifest;
  blob.replace_extension(".nff");

  NffWriter writer(blob, ds.shape);
  json rows = json::array();
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    const auto& r = ds.rows[i];
    ImageFeatureRecord rec{r.image_id, r.mmsi, r.confidence, r.feature};
    writer.write(rec);
    json row = {{"mmsi", r.mmsi},
                {"image_id", r.image_id},
                {"label", r.label},
                {"ais", std::vector<double>(r.ais.begin(), r.ais.end())}};
    if (!stored.in_train.empty()) row["partition"] = stored.in_train[i] ? "train" : "test";
    rows.push_back(std::move(row));
  }
  writer.finish();

  json j = {
      {"format", "nfship-dataset"},
      {"version", kDatasetManifestVersion},
      {"variant", to_string(ds.variant)},
      {"labels", ds.label_names},
      {"feature_shape", {ds.shape.channels, ds.shape.height, ds.shape.width}},
      {"ais_fields", std::vector<std::string>(kAisFieldNames.begin(), kAisFieldNames.end())},
      {"blob", blob.filename().string()},
      {"split",
       {{"seed", stored.split.seed},
        {"train_fraction", stored.split.train_fraction},
        {"by_mmsi", stored.split.by_mmsi},
        {"recorded", !stored.in_train.empty()}}},
      {"provenance", {{"seed", stored.split.seed}, {"config_hash", stored.config_hash}}},
      {"rows", std::move(rows)},
  };
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + manifest.string() + "' for writing");
  out << j.dump(1) << '\n';
}

StoredDataset load_dataset(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw std::runtime_error("cannot open dataset manifest '" + manifest.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("dataset manifest '" + manifest.string() + "' is not valid JSON: " +
                      e.what());
  }
  if (j.value("format", "") != "nfship-dataset") {
    throw FormatError("'" + manifest.string() + "' is not an nfship dataset manifest");
  }
  const int version = j.value("version", -1);
  if (version != kDatasetManifestVersion) {
    throw VersionError("dataset manifest version " + std::to_string(version) +
                       " is not supported (expected " +
                       std::to_string(kDatasetManifestVersion) + "); rebuild it with build-dataset");
  }

  StoredDataset stored;
  Dataset& ds = stored.data;
  ds.variant = parse_variant(j.at("variant").get<std::string>());
  ds.label_names = j.at("labels").get<std::vector<std::string>>();
  const auto dims = j.at("feature_shape").get<std::vector<std::uint32_t>>();
  if (dims.size() != 3) throw FormatError("feature_shape must have three dims");
  ds.shape = {dims[0], dims[1], dims[2]};
  stored.split.seed = j.at("split").value("seed", std::uint64_t{0});
  stored.split.train_fraction = j.at("split").value("train_fraction", 0.75);
  stored.split.by_mmsi = j.at("split").value("by_mmsi", true);
  stored.config_hash = j.at("provenance").value("config_hash", "");
  const bool recorded = j.at("split").value("recorded", false);

  const auto blob = manifest.parent_path() / j.at("blob").get<std::string>();
  auto file = read_nff(blob);
  if (!(file.shape == ds.shape)) {
    throw FormatError("feature blob shape " + to_string(file.shape) +
                      " does not match manifest " + to_string(ds.shape));
  }
  const auto& rows = j.at("rows");
  if (rows.size() != file.records.size()) {
    throw FormatError("manifest lists " + std::to_string(rows.size()) + " rows but blob holds " +
                      std::to_string(file.records.size()));
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& jr = rows[i];
    auto& rec = file.records[i];
    DatasetRow row;
    row.mmsi = jr.at("mmsi").get<std::uint64_t>();
    row.image_id = jr.at("image_id").get<std::string>();
    if (row.mmsi != rec.mmsi || row.image_id != rec.image_id) {
      throw FormatError("manifest row " + std::to_string(i) + " does not match blob record");
    }
    row.label = jr.at("label").get<int>();
    if (row.label < 0 || static_cast<std::size_t>(row.label) >= ds.label_names.size()) {
      throw FormatError("manifest row " + std::to_string(i) + " has out-of-range label");
    }
    const auto ais = jr.at("ais").get<std::vector<double>>();
    if (ais.size() != kAisFieldCount) throw FormatError("AIS vector must have 7 values");
    std::copy(ais.begin(), ais.end(), row.ais.begin());
    row.confidence = rec.confidence;
    row.feature = std::move(rec.feature);
    if (recorded) stored.in_train.push_back(jr.at("partition").get<std::string>() == "train");
    ds.rows.push_back(std::move(row));
  }
  return stored;
}

}  // namespace nfship::data
