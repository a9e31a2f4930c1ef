#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

namespace synthmetric {

enum class ColumnKind { numeric, categorical };
enum class DatasetRole { original, synthetic };

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::vector<std::string> levels;  // categorical only; code i <-> levels[i]
};

// Which columns of a dataset were replaced by synthetic draws, and how many
// replicates the synthesis produced. An empty column set is only valid as
// "not yet specified"; use complete_mask() for full synthesis.
struct SynthesisMask {
  std::vector<std::string> synthesized_columns;
  int m = 1;  // number of synthetic replicates the mask describes

  bool contains(const std::string& name) const {
    return std::find(synthesized_columns.begin(), synthesized_columns.end(), name) !=
           synthesized_columns.end();
  }
};

// Column-major table with a typed schema. Numeric columns store doubles,
// categorical columns store integer codes into the schema's level list.
class Dataset {
 public:
  Dataset() = default;

  explicit Dataset(std::vector<ColumnSchema> schema, std::size_t n_rows = 0)
      : schema_(std::move(schema)), n_rows_(n_rows) {
    validate_schema(schema_);
    numeric_.resize(schema_.size());
    codes_.resize(schema_.size());
    for (std::size_t j = 0; j < schema_.size(); ++j) {
      if (schema_[j].kind == ColumnKind::numeric)
        numeric_[j].assign(n_rows, 0.0);
      else
        codes_[j].assign(n_rows, 0);
    }
  }

  const std::vector<ColumnSchema>& schema() const { return schema_; }
  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return schema_.size(); }
  DatasetRole role() const { return role_; }
  void set_role(DatasetRole r) { role_ = r; }

  int column_index(const std::string& name) const {
    for (std::size_t j = 0; j < schema_.size(); ++j)
      if (schema_[j].name == name) return static_cast<int>(j);
    return -1;
  }

  std::size_t require_column(const std::string& name) const {
    const int j = column_index(name);
    if (j < 0) throw std::invalid_argument("unknown column: " + name);
    return static_cast<std::size_t>(j);
  }

  bool is_numeric(std::size_t j) const { return schema_.at(j).kind == ColumnKind::numeric; }

  std::vector<double>& numeric(std::size_t j) {
    check_kind(j, ColumnKind::numeric);
    return numeric_[j];
  }
  const std::vector<double>& numeric(std::size_t j) const {
    check_kind(j, ColumnKind::numeric);
    return numeric_[j];
  }
  std::vector<std::int32_t>& codes(std::size_t j) {
    check_kind(j, ColumnKind::categorical);
    return codes_[j];
  }
  const std::vector<std::int32_t>& codes(std::size_t j) const {
    check_kind(j, ColumnKind::categorical);
    return codes_[j];
  }

  // Replaces a categorical column's level list with `levels` (a superset of the
  // current levels) and remaps the stored codes accordingly.
  void relevel(std::size_t j, const std::vector<std::string>& levels) {
    check_kind(j, ColumnKind::categorical);
    std::unordered_map<std::string, std::int32_t> index;
    for (std::size_t i = 0; i < levels.size(); ++i)
      index.emplace(levels[i], static_cast<std::int32_t>(i));
    std::vector<std::int32_t> remap(schema_[j].levels.size());
    for (std::size_t i = 0; i < schema_[j].levels.size(); ++i) {
      const auto it = index.find(schema_[j].levels[i]);
      if (it == index.end())
        throw std::invalid_argument("relevel: new level list drops level '" +
                                    schema_[j].levels[i] + "' of column " + schema_[j].name);
      remap[i] = it->second;
    }
    for (auto& c : codes_[j]) c = remap[static_cast<std::size_t>(c)];
    schema_[j].levels = levels;
  }

  static void validate_schema(const std::vector<ColumnSchema>& schema) {
    std::unordered_set<std::string> seen;
    for (const auto& col : schema) {
      if (col.name.empty()) throw std::invalid_argument("schema: empty column name");
      if (!seen.insert(col.name).second)
        throw std::invalid_argument("schema: duplicate column name '" + col.name + "'");
      if (col.kind == ColumnKind::categorical) {
        if (col.levels.empty())
          throw std::invalid_argument("schema: categorical column '" + col.name +
                                      "' must declare its levels");
        std::unordered_set<std::string> lv;
        for (const auto& l : col.levels)
          if (!lv.insert(l).second)
            throw std::invalid_argument("schema: duplicate level '" + l + "' in column '" +
                                        col.name + "'");
      } else if (!col.levels.empty()) {
        throw std::invalid_argument("schema: numeric column '" + col.name +
                                    "' must not declare levels");
      }
    }
  }

 private:
  void check_kind(std::size_t j, ColumnKind want) const {
    if (j >= schema_.size()) throw std::out_of_range("column index out of range");
    if (schema_[j].kind != want)
      throw std::invalid_argument("column '" + schema_[j].name + "' has the wrong kind");
  }

  std::vector<ColumnSchema> schema_;
  std::size_t n_rows_ = 0;
  DatasetRole role_ = DatasetRole::original;
  std::vector<std::vector<double>> numeric_;
  std::vector<std::vector<std::int32_t>> codes_;
};

inline SynthesisMask complete_mask(const Dataset& ds) {
  SynthesisMask mask;
  for (const auto& col : ds.schema()) mask.synthesized_columns.push_back(col.name);
  return mask;
}

inline bool is_complete(const SynthesisMask& mask, const std::vector<ColumnSchema>& schema) {
  for (const auto& col : schema)
    if (!mask.contains(col.name)) return false;
  return true;
}

inline void validate_mask(const SynthesisMask& mask, const std::vector<ColumnSchema>& schema) {
  if (mask.synthesized_columns.empty())
    throw std::invalid_argument("synthesis mask: no synthesized columns");
  if (mask.m < 1) throw std::invalid_argument("synthesis mask: m must be >= 1");
  std::unordered_set<std::string> names;
  for (const auto& col : schema) names.insert(col.name);
  std::unordered_set<std::string> seen;
  for (const auto& c : mask.synthesized_columns) {
    if (!names.count(c))
      throw std::invalid_argument("synthesis mask names unknown column: " + c);
    if (!seen.insert(c).second)
      throw std::invalid_argument("synthesis mask repeats column: " + c);
  }
}

// ---------------------------------------------------------------------------
// schema JSON: [{"name": ..., "kind": "numeric"|"categorical", "levels": [...]}]
// ---------------------------------------------------------------------------

inline nlohmann::json schema_to_json(const std::vector<ColumnSchema>& schema) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& col : schema) {
    nlohmann::json j;
    j["name"] = col.name;
    j["kind"] = (col.kind == ColumnKind::numeric) ? "numeric" : "categorical";
    if (col.kind == ColumnKind::categorical) j["levels"] = col.levels;
    out.push_back(std::move(j));
  }
  return out;
}

inline std::vector<ColumnSchema> schema_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("schema JSON: expected a top-level array");
  std::vector<ColumnSchema> schema;
  for (const auto& e : j) {
    ColumnSchema col;
    col.name = e.at("name").get<std::string>();
    const std::string kind = e.at("kind").get<std::string>();
    if (kind == "numeric") {
      col.kind = ColumnKind::numeric;
    } else if (kind == "categorical") {
      col.kind = ColumnKind::categorical;
      col.levels = e.at("levels").get<std::vector<std::string>>();
    } else {
      throw std::invalid_argument("schema JSON: unknown kind '" + kind + "' for column '" +
                                  col.name + "'");
    }
    schema.push_back(std::move(col));
  }
  Dataset::validate_schema(schema);
  return schema;
}

inline std::vector<ColumnSchema> load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schema file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("schema JSON parse error in " + path + ": " + e.what());
  }
  return schema_from_json(j);
}

// ---------------------------------------------------------------------------
// CSV I/O. RFC-4180 quoting; the header row must contain exactly the schema's
// column names (any order). Numeric fields must parse fully; categorical
// fields must be declared levels. Errors carry 1-based row/column positions.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_record(const std::string& line, std::size_t row_no) {
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(ch);
    }
  }
  if (in_quotes)
    throw std::invalid_argument("CSV row " + std::to_string(row_no) + ": unterminated quote");
  fields.push_back(std::move(field));
  return fields;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += "\"\"";
    else out.push_back(ch);
  }
  out += "\"";
  return out;
}

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline Dataset load_csv(const std::string& path, const std::vector<ColumnSchema>& schema) {
  Dataset::validate_schema(schema);
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open data file: " + path);

  std::string header;
  if (!std::getline(in, header)) throw std::invalid_argument("CSV " + path + ": empty file");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const auto names = detail::split_csv_record(header, 1);

  // Map schema column -> position in the file.
  std::vector<std::size_t> file_pos(schema.size());
  {
    std::unordered_map<std::string, std::size_t> by_name;
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (!by_name.emplace(names[i], i).second)
        throw std::invalid_argument("CSV " + path + ": duplicate header column '" + names[i] + "'");
    }
    if (names.size() != schema.size())
      throw std::invalid_argument("CSV " + path + ": header has " + std::to_string(names.size()) +
                                  " columns, schema declares " + std::to_string(schema.size()));
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const auto it = by_name.find(schema[j].name);
      if (it == by_name.end())
        throw std::invalid_argument("CSV " + path + ": missing column '" + schema[j].name + "'");
      file_pos[j] = it->second;
    }
  }

  std::vector<std::unordered_map<std::string, std::int32_t>> level_index(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j)
    if (schema[j].kind == ColumnKind::categorical)
      for (std::size_t i = 0; i < schema[j].levels.size(); ++i)
        level_index[j].emplace(schema[j].levels[i], static_cast<std::int32_t>(i));

  Dataset ds(schema, 0);
  std::vector<std::vector<double>> num(schema.size());
  std::vector<std::vector<std::int32_t>> cat(schema.size());

  std::string line;
  std::size_t row_no = 1;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv_record(line, row_no);
    if (fields.size() != names.size())
      throw std::invalid_argument("CSV " + path + " row " + std::to_string(row_no) + ": expected " +
                                  std::to_string(names.size()) + " fields, found " +
                                  std::to_string(fields.size()));
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const std::string& f = fields[file_pos[j]];
      if (schema[j].kind == ColumnKind::numeric) {
        double v = 0.0;
        const char* first = f.data();
        const char* last = f.data() + f.size();
        const auto res = std::from_chars(first, last, v);
        if (res.ec != std::errc{} || res.ptr != last)
          throw std::invalid_argument("CSV " + path + " row " + std::to_string(row_no) +
                                      ", column '" + schema[j].name + "': cannot parse numeric value '" +
                                      f + "'");
        num[j].push_back(v);
      } else {
        const auto it = level_index[j].find(f);
        if (it == level_index[j].end())
          throw std::invalid_argument("CSV " + path + " row " + std::to_string(row_no) +
                                      ", column '" + schema[j].name + "': level '" + f +
                                      "' is not declared in the schema");
        cat[j].push_back(it->second);
      }
    }
    ++n;
  }

  Dataset out(schema, n);
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (schema[j].kind == ColumnKind::numeric)
      out.numeric(j) = std::move(num[j]);
    else
      out.codes(j) = std::move(cat[j]);
  }
  return out;
}

// Writes shortest round-trip numeric representations, so load(write(ds)) == ds.
inline void write_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write data file: " + path);
  const auto& schema = ds.schema();
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (j) out << ',';
    out << detail::csv_escape(schema[j].name);
  }
  out << '\n';
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
      if (j) out << ',';
      if (schema[j].kind == ColumnKind::numeric)
        out << detail::format_double(ds.numeric(j)[i]);
      else
        out << detail::csv_escape(schema[j].levels[static_cast<std::size_t>(ds.codes(j)[i])]);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Level harmonization: after this call both datasets carry, per categorical
// column, the union of their level lists (first dataset's order first, then
// any levels only the second declares). Idempotent; the resulting level *sets*
// do not depend on argument order.
// ---------------------------------------------------------------------------

inline void harmonize_levels(Dataset& a, Dataset& b) {
  if (a.n_cols() != b.n_cols())
    throw std::invalid_argument("harmonize_levels: datasets have different column counts");
  for (std::size_t j = 0; j < a.n_cols(); ++j) {
    const auto& ca = a.schema()[j];
    const auto& cb = b.schema()[j];
    if (ca.name != cb.name || ca.kind != cb.kind)
      throw std::invalid_argument("harmonize_levels: column " + std::to_string(j) +
                                  " differs between datasets ('" + ca.name + "' vs '" + cb.name +
                                  "')");
    if (ca.kind != ColumnKind::categorical) continue;
    std::vector<std::string> merged = ca.levels;
    std::unordered_set<std::string> seen(merged.begin(), merged.end());
    for (const auto& l : cb.levels)
      if (seen.insert(l).second) merged.push_back(l);
    a.relevel(j, merged);
    b.relevel(j, merged);
  }
}

// FNV-1a 64-bit hash; used to fingerprint schemas in synthesis manifests.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace synthmetric
