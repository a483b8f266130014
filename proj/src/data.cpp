#include "mwld/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mwld/random.hpp"

namespace mwld {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool is_missing(std::string_view cell) {
  const auto t = trim(cell);
  return t.empty() || t == "?" || t == "NA" || t == "NaN";
}

std::optional<double> parse_number(std::string_view cell) {
  auto t = trim(cell);
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kind_name(FeatureKind k) { return k == FeatureKind::Numeric ? "numeric" : "categorical"; }

FeatureKind parse_kind(const std::string& s) {
  if (s == "numeric") return FeatureKind::Numeric;
  if (s == "categorical") return FeatureKind::Categorical;
  throw DataError("unknown feature kind '" + s + "'");
}

json discretizer_to_json(const Discretizer& d) {
  switch (d.kind()) {
    case Discretizer::Kind::ThresholdLowHigh:
      return {{"kind", "threshold_low_high"},
              {"cut", d.cut()},
              {"low", d.levels()[0]},
              {"high", d.levels()[1]}};
    case Discretizer::Kind::Bins:
      return {{"kind", "bins"},
              {"edges", std::vector<double>(d.edges().begin(), d.edges().end())},
              {"labels", std::vector<std::string>(d.levels().begin(), d.levels().end())}};
    case Discretizer::Kind::Passthrough: {
      json j = {{"kind", "passthrough"}};
      if (!d.levels().empty())
        j["levels"] = std::vector<std::string>(d.levels().begin(), d.levels().end());
      if (!d.fallback().empty()) j["fallback"] = d.fallback();
      return j;
    }
  }
  return {};
}

Discretizer discretizer_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "threshold_low_high")
    return Discretizer::threshold_low_high(j.at("cut").get<double>(), j.value("low", "Low"),
                                           j.value("high", "High"));
  if (kind == "bins")
    return Discretizer::bins(j.at("edges").get<std::vector<double>>(),
                             j.at("labels").get<std::vector<std::string>>());
  if (kind == "passthrough")
    return Discretizer::passthrough(j.value("levels", std::vector<std::string>{}),
                                    j.value("fallback", std::string{}));
  throw DataError("unknown discretizer kind '" + kind + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// CSV

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

CsvTable parse_csv(std::string_view text) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started && !field.empty())
          throw DataError("malformed CSV: stray quote on line " + std::to_string(line));
        quoted = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        [[fallthrough]];
      case '\n':
        end_record();
        ++line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (quoted) throw DataError("malformed CSV: unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) end_record();

  if (records.empty()) throw DataError("CSV has no header row");
  CsvTable table;
  table.header = std::move(records.front());
  for (auto& h : table.header) h = std::string(trim(h));
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw DataError("malformed CSV: record " + std::to_string(r) + " has " +
                      std::to_string(records[r].size()) + " fields, header has " +
                      std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_file(path)); }

void write_csv(const CsvTable& table, std::ostream& out) {
  auto emit = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      const auto& c = cells[i];
      if (c.find_first_of(",\"\r\n") != std::string::npos) {
        out << '"';
        for (char ch : c) {
          if (ch == '"') out << '"';
          out << ch;
        }
        out << '"';
      } else {
        out << c;
      }
    }
    out << '\n';
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
}

void write_csv(const CsvTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write_csv(table, out);
}

// ---------------------------------------------------------------------------
// Discretizer

Discretizer Discretizer::threshold_low_high(double cut, std::string low, std::string high) {
  require(std::isfinite(cut), "threshold cut must be finite");
  Discretizer d;
  d.kind_ = Kind::ThresholdLowHigh;
  d.cut_ = cut;
  d.levels_ = {std::move(low), std::move(high)};
  return d;
}

Discretizer Discretizer::bins(std::vector<double> edges, std::vector<std::string> labels) {
  require(!edges.empty(), "bins need at least one edge");
  for (std::size_t i = 1; i < edges.size(); ++i)
    require(edges[i - 1] < edges[i], "bin edges must be strictly ascending");
  require(labels.size() == edges.size() + 1, "bins need one label more than edges");
  Discretizer d;
  d.kind_ = Kind::Bins;
  d.edges_ = std::move(edges);
  d.levels_ = std::move(labels);
  return d;
}

Discretizer Discretizer::passthrough(std::vector<std::string> levels, std::string fallback) {
  require(fallback.empty() || std::find(levels.begin(), levels.end(), fallback) != levels.end(),
          "passthrough fallback must be one of the declared levels");
  Discretizer d;
  d.kind_ = Kind::Passthrough;
  d.levels_ = std::move(levels);
  d.fallback_ = std::move(fallback);
  return d;
}

std::size_t Discretizer::cardinality() const { return levels_.size(); }

std::string Discretizer::apply(std::string_view raw) const {
  const auto cell = trim(raw);
  switch (kind_) {
    case Kind::ThresholdLowHigh: {
      const auto v = parse_number(cell);
      if (!v) throw DataError("sensitive value '" + std::string(cell) + "' is not numeric");
      return *v < cut_ ? levels_[0] : levels_[1];
    }
    case Kind::Bins: {
      const auto v = parse_number(cell);
      if (!v) throw DataError("sensitive value '" + std::string(cell) + "' is not numeric");
      const auto bin = std::upper_bound(edges_.begin(), edges_.end(), *v) - edges_.begin();
      return levels_[static_cast<std::size_t>(bin)];
    }
    case Kind::Passthrough: {
      std::string level(cell);
      if (levels_.empty() || std::find(levels_.begin(), levels_.end(), level) != levels_.end())
        return level;
      if (!fallback_.empty()) return fallback_;
      throw DataError("sensitive value '" + level + "' is not a declared level");
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Schema

std::size_t DatasetSchema::predicted_settings() const {
  std::size_t product = 1;
  for (const auto& s : sensitive_columns) {
    const auto c = s.discretizer.cardinality();
    if (c == 0) return 0;
    product *= c;
  }
  return product;
}

void DatasetSchema::validate() const {
  require(!target.column.empty(), "schema needs a target column");
  require(target.top_fraction.has_value() != !target.positive_values.empty(),
          "target needs exactly one of positive_values or top_fraction");
  if (target.top_fraction)
    require(*target.top_fraction > 0.0 && *target.top_fraction < 1.0,
            "target top_fraction must lie in (0, 1)");
  for (const auto& f : feature_columns)
    require(f.name != target.column, "target column '" + target.column + "' listed as a feature");
  for (const auto& s : sensitive_columns)
    require(s.name != target.column, "target column cannot be sensitive");
  require(!sensitive_columns.empty(), "schema needs at least one sensitive column");
  require(!feature_columns.empty() || remaining_columns.has_value(),
          "schema declares no feature columns");
}

DatasetSchema DatasetSchema::parse(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed schema document: ") + e.what());
  }
  try {
    const int version = j.value("schema_version", kSchemaVersion);
    if (version != kSchemaVersion)
      throw DataError("unsupported schema_version " + std::to_string(version));
    DatasetSchema s;
    s.name = j.value("name", std::string{});
    const auto& t = j.at("target");
    s.target.column = t.at("column").get<std::string>();
    s.target.positive_values = t.value("positive_values", std::vector<std::string>{});
    s.target.negative_values = t.value("negative_values", std::vector<std::string>{});
    if (t.contains("top_fraction")) s.target.top_fraction = t.at("top_fraction").get<double>();
    for (const auto& c : j.value("sensitive_columns", json::array()))
      s.sensitive_columns.push_back(
          {c.at("name").get<std::string>(), discretizer_from_json(c.at("discretizer"))});
    for (const auto& c : j.value("feature_columns", json::array()))
      s.feature_columns.push_back(
          {c.at("name").get<std::string>(), parse_kind(c.at("kind").get<std::string>())});
    if (j.contains("remaining_columns"))
      s.remaining_columns = parse_kind(j.at("remaining_columns").get<std::string>());
    s.drop_columns = j.value("drop_columns", std::vector<std::string>{});
    if (j.contains("expected")) {
      const auto& e = j.at("expected");
      if (e.contains("records")) s.expected_records = e.at("records").get<std::size_t>();
      if (e.contains("attributes")) s.expected_attributes = e.at("attributes").get<std::size_t>();
      if (e.contains("settings")) s.expected_settings = e.at("settings").get<std::size_t>();
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid schema document: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("invalid schema document: ") + e.what());
  }
}

DatasetSchema DatasetSchema::load(const std::string& path) { return parse(read_file(path)); }

std::string DatasetSchema::dump() const {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = name;
  json t = {{"column", target.column}};
  if (!target.positive_values.empty()) t["positive_values"] = target.positive_values;
  if (!target.negative_values.empty()) t["negative_values"] = target.negative_values;
  if (target.top_fraction) t["top_fraction"] = *target.top_fraction;
  j["target"] = t;
  j["sensitive_columns"] = json::array();
  for (const auto& s : sensitive_columns)
    j["sensitive_columns"].push_back({{"name", s.name}, {"discretizer", discretizer_to_json(s.discretizer)}});
  j["feature_columns"] = json::array();
  for (const auto& f : feature_columns)
    j["feature_columns"].push_back({{"name", f.name}, {"kind", kind_name(f.kind)}});
  if (remaining_columns) j["remaining_columns"] = kind_name(*remaining_columns);
  j["drop_columns"] = drop_columns;
  json e = json::object();
  if (expected_records) e["records"] = *expected_records;
  if (expected_attributes) e["attributes"] = *expected_attributes;
  if (expected_settings) e["settings"] = *expected_settings;
  if (!e.empty()) j["expected"] = e;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Manifest

std::size_t FeatureManifest::width() const {
  std::size_t w = 0;
  for (const auto& c : columns) w += c.kind == FeatureKind::Numeric ? 1 : c.levels.size();
  return w;
}

std::vector<std::string> FeatureManifest::feature_names() const {
  std::vector<std::string> out;
  for (const auto& c : columns) {
    if (c.kind == FeatureKind::Numeric) {
      out.push_back(c.name);
    } else {
      for (const auto& l : c.levels) out.push_back(c.name + "=" + l);
    }
  }
  return out;
}

std::string FeatureManifest::dump() const {
  json j;
  j["columns"] = json::array();
  for (const auto& c : columns) {
    json e = {{"name", c.name}, {"kind", kind_name(c.kind)}};
    if (c.kind == FeatureKind::Numeric) {
      e["mean"] = c.mean;
      e["scale"] = c.scale;
    } else {
      e["levels"] = c.levels;
    }
    j["columns"].push_back(e);
  }
  if (target_threshold) j["target_threshold"] = *target_threshold;
  return j.dump(2);
}

FeatureManifest FeatureManifest::parse(std::string_view json_text) {
  try {
    const auto j = json::parse(json_text);
    FeatureManifest m;
    for (const auto& e : j.at("columns")) {
      EncodedColumn c;
      c.name = e.at("name").get<std::string>();
      c.kind = parse_kind(e.at("kind").get<std::string>());
      if (c.kind == FeatureKind::Numeric) {
        c.mean = e.at("mean").get<double>();
        c.scale = e.at("scale").get<double>();
      } else {
        c.levels = e.at("levels").get<std::vector<std::string>>();
      }
      m.columns.push_back(std::move(c));
    }
    if (j.contains("target_threshold")) m.target_threshold = j.at("target_threshold").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed feature manifest: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Encoding

namespace {

std::size_t require_column(const CsvTable& table, const std::string& name, const char* role) {
  const auto c = table.column(name);
  if (!c) throw DataError(std::string(role) + " column '" + name + "' not found in CSV header");
  return *c;
}

}  // namespace

TabularDataset encode_table(const CsvTable& table, const DatasetSchema& schema,
                            const FeatureManifest* manifest) {
  schema.validate();
  TabularDataset ds;
  ds.summary.rows_read = table.rows.size();
  ds.summary.raw_attribute_count = table.header.size() - (table.column(schema.target.column) ? 1 : 0);

  const std::size_t target_col = require_column(table, schema.target.column, "target");
  std::vector<std::size_t> sensitive_cols;
  for (const auto& s : schema.sensitive_columns)
    sensitive_cols.push_back(require_column(table, s.name, "sensitive"));

  // Resolve feature columns: explicit list first, then the remaining header columns.
  const std::set<std::string> dropped(schema.drop_columns.begin(), schema.drop_columns.end());
  for (const auto& d : schema.drop_columns)
    if (!table.column(d)) ds.summary.warnings.push_back("drop column '" + d + "' not present");
  std::vector<FeatureColumn> features;
  std::set<std::string> listed;
  for (const auto& f : schema.feature_columns) {
    require_column(table, f.name, "feature");
    if (dropped.count(f.name)) continue;
    features.push_back(f);
    listed.insert(f.name);
  }
  if (schema.remaining_columns) {
    for (const auto& h : table.header) {
      if (h == schema.target.column || dropped.count(h) || listed.count(h)) continue;
      features.push_back({h, *schema.remaining_columns});
      listed.insert(h);
    }
  }
  if (features.empty()) throw DataError("schema selects no feature columns");
  if (manifest) {
    if (manifest->columns.size() != features.size())
      throw DataError("feature manifest does not match the schema's feature columns");
    for (std::size_t j = 0; j < features.size(); ++j)
      if (manifest->columns[j].name != features[j].name || manifest->columns[j].kind != features[j].kind)
        throw DataError("feature manifest column '" + manifest->columns[j].name +
                        "' does not match schema column '" + features[j].name + "'");
  }
  std::vector<std::size_t> feature_cols;
  for (const auto& f : features) feature_cols.push_back(*table.column(f.name));
  ds.summary.used_attribute_count = features.size();

  // Labels and row filtering.
  std::optional<double> threshold;
  if (schema.target.top_fraction) {
    if (manifest && manifest->target_threshold) {
      threshold = manifest->target_threshold;
    } else {
      std::vector<double> values;
      for (const auto& r : table.rows)
        if (auto v = parse_number(r[target_col])) values.push_back(*v);
      if (values.empty()) throw DataError("target column has no numeric values");
      std::sort(values.begin(), values.end());
      const auto idx = static_cast<std::size_t>(
          std::floor((1.0 - *schema.target.top_fraction) * static_cast<double>(values.size())));
      threshold = values[std::min(idx, values.size() - 1)];
    }
  }
  const std::set<std::string> positives(schema.target.positive_values.begin(),
                                        schema.target.positive_values.end());
  const std::set<std::string> negatives(schema.target.negative_values.begin(),
                                        schema.target.negative_values.end());

  std::vector<std::size_t> kept;
  std::vector<int> labels;
  std::vector<SensitiveKeyVector::Key> keys;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto cell = trim(row[target_col]);
    int label;
    if (is_missing(cell)) {
      ++ds.summary.dropped_missing_target;
      continue;
    }
    if (threshold) {
      const auto v = parse_number(cell);
      if (!v) {
        ++ds.summary.dropped_missing_target;
        continue;
      }
      label = *v >= *threshold ? 1 : 0;
    } else {
      const std::string value(cell);
      if (positives.count(value)) {
        label = 1;
      } else if (negatives.empty() || negatives.count(value)) {
        label = 0;
      } else {
        ++ds.summary.dropped_missing_target;
        continue;
      }
    }
    SensitiveKeyVector::Key key;
    bool missing_sensitive = false;
    for (std::size_t s = 0; s < sensitive_cols.size(); ++s) {
      const auto& raw = row[sensitive_cols[s]];
      if (is_missing(raw)) {
        missing_sensitive = true;
        break;
      }
      key.push_back(schema.sensitive_columns[s].discretizer.apply(raw));
    }
    if (missing_sensitive) {
      ++ds.summary.dropped_missing_sensitive;
      continue;
    }
    kept.push_back(r);
    labels.push_back(label);
    keys.push_back(std::move(key));
  }
  if (ds.summary.dropped_missing_target)
    ds.summary.warnings.push_back("dropped " + std::to_string(ds.summary.dropped_missing_target) +
                                  " rows with a missing or unparseable target");
  if (ds.summary.dropped_missing_sensitive)
    ds.summary.warnings.push_back("dropped " + std::to_string(ds.summary.dropped_missing_sensitive) +
                                  " rows with a missing sensitive attribute");
  if (kept.empty()) throw DataError("no usable rows after filtering");

  // Fit or reuse the encoder.
  FeatureManifest fitted;
  fitted.target_threshold = threshold;
  std::size_t unparseable = 0;
  for (std::size_t j = 0; j < features.size(); ++j) {
    EncodedColumn col{features[j].name, features[j].kind, 0.0, 1.0, {}};
    if (manifest) {
      col = manifest->columns[j];
    } else if (col.kind == FeatureKind::Numeric) {
      CompensatedSum sum;
      std::vector<double> present;
      for (std::size_t r : kept)
        if (auto v = parse_number(table.rows[r][feature_cols[j]])) {
          present.push_back(*v);
          sum.add(*v);
        }
      if (!present.empty()) {
        col.mean = sum.value() / static_cast<double>(present.size());
        CompensatedSum sq;
        for (double v : present) sq.add((v - col.mean) * (v - col.mean));
        const double sd = std::sqrt(sq.value() / static_cast<double>(present.size()));
        col.scale = sd > 0.0 ? sd : 1.0;
      }
    } else {
      std::set<std::string> levels;
      for (std::size_t r : kept) {
        const auto& raw = table.rows[r][feature_cols[j]];
        levels.insert(is_missing(raw) ? std::string(kUnknownLevel) : std::string(trim(raw)));
      }
      col.levels.assign(levels.begin(), levels.end());
    }
    fitted.columns.push_back(std::move(col));
  }
  if (manifest) fitted.columns = manifest->columns;

  ds.rows = kept.size();
  ds.cols = fitted.width();
  ds.features.assign(ds.rows * ds.cols, 0.0);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const auto& row = table.rows[kept[i]];
    double* out = ds.features.data() + i * ds.cols;
    std::size_t offset = 0;
    for (std::size_t j = 0; j < fitted.columns.size(); ++j) {
      const auto& col = fitted.columns[j];
      const auto& raw = row[feature_cols[j]];
      if (col.kind == FeatureKind::Numeric) {
        auto v = parse_number(raw);
        if (!v && !is_missing(raw)) ++unparseable;
        out[offset++] = ((v ? *v : col.mean) - col.mean) / col.scale;
      } else {
        const std::string level = is_missing(raw) ? std::string(kUnknownLevel) : std::string(trim(raw));
        auto it = std::find(col.levels.begin(), col.levels.end(), level);
        if (it == col.levels.end())
          it = std::find(col.levels.begin(), col.levels.end(), kUnknownLevel);
        if (it != col.levels.end()) out[offset + static_cast<std::size_t>(it - col.levels.begin())] = 1.0;
        offset += col.levels.size();
      }
    }
  }
  if (unparseable)
    ds.summary.warnings.push_back(std::to_string(unparseable) +
                                  " numeric cells were unparseable and mean-imputed");

  // Source cells for re-emission: features, then sensitive columns not already
  // present, then the target.
  std::vector<std::size_t> emit = feature_cols;
  for (std::size_t c : sensitive_cols)
    if (std::find(emit.begin(), emit.end(), c) == emit.end()) emit.push_back(c);
  emit.push_back(target_col);
  for (std::size_t c : emit) ds.raw.header.push_back(table.header[c]);
  for (std::size_t r : kept) {
    std::vector<std::string> cells;
    cells.reserve(emit.size());
    for (std::size_t c : emit) cells.push_back(table.rows[r][c]);
    ds.raw.rows.push_back(std::move(cells));
  }

  ds.labels = LabelVector(std::move(labels));
  ds.keys = SensitiveKeyVector(keys);
  ds.manifest = std::move(fitted);
  return ds;
}

TabularDataset load_csv(const std::string& path, const DatasetSchema& schema,
                        const FeatureManifest* manifest) {
  return encode_table(read_csv(path), schema, manifest);
}

void write_dataset_csv(const TabularDataset& dataset, const std::string& path) {
  write_csv(dataset.raw, path);
}

TabularDataset TabularDataset::subset(std::span<const std::size_t> indices) const {
  TabularDataset out;
  out.rows = indices.size();
  out.cols = cols;
  out.features.reserve(indices.size() * cols);
  std::vector<int> ys;
  ys.reserve(indices.size());
  for (std::size_t i : indices) {
    require(i < rows, "subset row index out of range");
    const auto r = row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    ys.push_back(labels[i]);
    if (!raw.rows.empty()) out.raw.rows.push_back(raw.rows[i]);
  }
  out.raw.header = raw.header;
  out.labels = LabelVector(std::move(ys));
  out.keys = keys.subset(indices);
  out.manifest = manifest;
  out.summary = summary;
  out.summary.rows_read = indices.size();
  return out;
}

// ---------------------------------------------------------------------------
// Splits

SplitIndices split_indices(std::size_t n, double test_fraction, std::uint64_t seed) {
  require(test_fraction > 0.0 && test_fraction < 1.0, "test fraction must lie in (0, 1)");
  const auto train_size =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - test_fraction)));
  require(train_size >= 1 && train_size < n,
          "split of " + std::to_string(n) + " rows leaves an empty side");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_size));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(train_size), order.end());
  return out;
}

std::pair<TabularDataset, TabularDataset> split_train_test(const TabularDataset& dataset,
                                                           double test_fraction,
                                                           std::uint64_t seed) {
  const auto idx = split_indices(dataset.rows, test_fraction, seed);
  return {dataset.subset(idx.train), dataset.subset(idx.test)};
}

std::vector<double> average_over_splits(
    const TabularDataset& dataset, double test_fraction, std::uint64_t seed, std::size_t repeats,
    const std::function<std::vector<double>(const TabularDataset&, const TabularDataset&)>&
        metrics) {
  require(repeats >= 1, "need at least one split");
  std::vector<double> sum;
  for (std::size_t k = 0; k < repeats; ++k) {
    const auto [train, test] = split_train_test(dataset, test_fraction, derive_seed(seed, k));
    const auto m = metrics(train, test);
    if (sum.empty()) sum.assign(m.size(), 0.0);
    require(m.size() == sum.size(), "metric vectors must have a fixed length");
    for (std::size_t i = 0; i < m.size(); ++i) sum[i] += m[i];
  }
  for (double& s : sum) s /= static_cast<double>(repeats);
  return sum;
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {
constexpr double kBaseFlipRate = 0.05;
constexpr double kClassSeparation = 1.5;
}  // namespace

TabularDataset synth_two_group(std::size_t n, double minority_fraction, double noise_gap,
                               std::uint64_t seed) {
  require(n >= 100, "synthetic dataset needs n >= 100");
  require(minority_fraction > 0.0 && minority_fraction < 0.5, "minority fraction must lie in (0, 0.5)");
  require(noise_gap >= 0.0 && kBaseFlipRate + noise_gap <= 0.5, "noise gap must lie in [0, 0.45]");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  TabularDataset ds;
  ds.rows = n;
  ds.cols = 3;
  ds.features.reserve(n * 3);
  ds.raw.header = {"x1", "x2", "minority", "y"};
  std::vector<int> labels;
  std::vector<std::string> groups;
  for (std::size_t i = 0; i < n; ++i) {
    const bool minority = unit(rng) < minority_fraction;
    const int clean = unit(rng) < 0.5 ? 1 : 0;
    // Group-dependent feature centers; the first coordinate carries the signal.
    const double x1 = normal(rng) + (minority ? 0.5 : -0.5) + (clean ? kClassSeparation : -kClassSeparation);
    const double x2 = normal(rng) + (minority ? 1.0 : 0.0);
    const double flip_rate = kBaseFlipRate + (minority ? noise_gap : 0.0);
    const int y = unit(rng) < flip_rate ? 1 - clean : clean;
    const double g = minority ? 1.0 : 0.0;
    ds.features.insert(ds.features.end(), {x1, x2, g});
    labels.push_back(y);
    groups.push_back(minority ? "1" : "0");
    ds.raw.rows.push_back({format_double(x1), format_double(x2), groups.back(), y ? "1" : "0"});
  }
  ds.labels = LabelVector(std::move(labels));
  ds.keys = SensitiveKeyVector::from_strings(groups);
  ds.manifest.columns = {{"x1", FeatureKind::Numeric, 0.0, 1.0, {}},
                         {"x2", FeatureKind::Numeric, 0.0, 1.0, {}},
                         {"minority", FeatureKind::Numeric, 0.0, 1.0, {}}};
  ds.summary.rows_read = n;
  ds.summary.raw_attribute_count = 3;
  ds.summary.used_attribute_count = 3;
  return ds;
}

DatasetSchema two_group_schema() {
  DatasetSchema s;
  s.name = "two_group";
  s.target.column = "y";
  s.target.positive_values = {"1"};
  s.target.negative_values = {"0"};
  s.sensitive_columns = {{"minority", Discretizer::passthrough({"0", "1"})}};
  s.feature_columns = {{"x1", FeatureKind::Numeric},
                       {"x2", FeatureKind::Numeric},
                       {"minority", FeatureKind::Numeric}};
  return s;
}

namespace {
void check_atoms(std::span<const LossAtom> atoms) {
  require(!atoms.empty() && atoms.size() <= 12, "atom distribution needs 1 to 12 atoms");
  CompensatedSum total;
  for (const auto& a : atoms) {
    require(std::isfinite(a.value) && a.value >= 0.0, "atom losses must be finite and nonnegative");
    require(a.probability >= 0.0, "atom probabilities must be nonnegative");
    total.add(a.probability);
  }
  require(std::abs(total.value() - 1.0) <= 1e-12, "atom probabilities must sum to 1");
}

double atom_bound(std::span<const LossAtom> atoms) {
  double b = 1.0;
  for (const auto& a : atoms) b = std::max(b, a.value);
  return b;
}
}  // namespace

LossVector synth_discrete_loss_population(std::span<const LossAtom> atoms, std::size_t n,
                                          std::uint64_t seed) {
  check_atoms(atoms);
  require(n >= 1, "sample size must be positive");
  std::vector<double> cumulative;
  double c = 0.0;
  for (const auto& a : atoms) cumulative.push_back(c += a.probability);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> values(n);
  for (auto& v : values) {
    const double u = unit(rng) * c;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    v = atoms[static_cast<std::size_t>(it - cumulative.begin())].value;
  }
  return LossVector(std::move(values), atom_bound(atoms));
}

LossVector atom_population(std::span<const LossAtom> atoms) {
  check_atoms(atoms);
  std::vector<double> values;
  std::vector<double> weights;
  for (const auto& a : atoms) {
    values.push_back(a.value);
    weights.push_back(a.probability);
  }
  return LossVector(std::move(values), std::move(weights), atom_bound(atoms));
}

}  // namespace mwld
