#include "usar/dataset_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "usar/error.hpp"
#include "usar/serialization.hpp"

namespace usar {

namespace {

constexpr std::string_view kHeaderTag = "#usar-catalog";

struct Header {
  std::string extractor;
  std::vector<std::string> vocabulary;
};

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void parse_error(const std::string& source, std::size_t line, const std::string& what) {
  throw Error(ErrorCode::data, source + ":" + std::to_string(line) + ": " + what);
}

Header parse_header(const std::string& line, const std::string& source, std::size_t line_no) {
  Header header;
  std::string_view rest(line);
  rest.remove_prefix(kHeaderTag.size());
  const auto attr_pos = rest.find("attributes=");
  std::string_view attrs;
  if (attr_pos != std::string_view::npos) {
    attrs = rest.substr(attr_pos + 11);
    rest = rest.substr(0, attr_pos);
  }
  std::istringstream words{std::string(rest)};
  std::string word;
  bool versioned = false;
  while (words >> word) {
    if (word == "v1") {
      versioned = true;
    } else if (word.rfind("extractor=", 0) == 0) {
      header.extractor = word.substr(10);
    } else {
      parse_error(source, line_no, "unrecognized catalog header field '" + word + "'");
    }
  }
  if (!versioned) parse_error(source, line_no, "catalog header must declare version v1");
  if (!attrs.empty()) {
    for (auto& name : split(trim(attrs), ';')) {
      name = trim(name);
      if (name.empty()) parse_error(source, line_no, "empty attribute name in header");
      header.vocabulary.push_back(std::move(name));
    }
  }
  return header;
}

std::string format_header(const Catalog& catalog) {
  std::string line(kHeaderTag);
  line += " v1";
  if (!catalog.extractor().empty()) line += " extractor=" + catalog.extractor();
  line += " attributes=";
  for (std::size_t i = 0; i < catalog.attribute_vocabulary().size(); ++i) {
    if (i) line += ';';
    line += catalog.attribute_vocabulary()[i];
  }
  return line;
}

ItemRecord parse_jsonl_record(const std::string& line, const std::string& source, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    parse_error(source, line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) parse_error(source, line_no, "record must be a JSON object");
  ItemRecord item;
  try {
    if (!j.contains("id") || !j["id"].is_string()) parse_error(source, line_no, "missing string field 'id'");
    item.id = j["id"].get<std::string>();
    if (!j.contains("features") || !j["features"].is_array()) {
      parse_error(source, line_no, "missing array field 'features'");
    }
    for (const auto& v : j["features"]) {
      if (!v.is_number()) parse_error(source, line_no, "features must be numbers");
      item.features.push_back(v.get<double>());
    }
    if (j.contains("attributes") && !j["attributes"].is_null()) {
      item.attribute_labels = j["attributes"].get<std::vector<std::string>>();
    }
    if (j.contains("media_path") && !j["media_path"].is_null()) {
      item.media_path = j["media_path"].get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    parse_error(source, line_no, std::string("bad field type: ") + e.what());
  }
  return item;
}

double parse_number(const std::string& field, const std::string& source, std::size_t line_no) {
  const auto text = trim(field);
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    parse_error(source, line_no, "'" + text + "' is not a number");
  }
  return value;
}

std::vector<ItemRecord> read_csv(std::istream& in, const std::string& source, Header& header) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> columns;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (line.rfind(kHeaderTag, 0) == 0) {
      header = parse_header(line, source, line_no);
      continue;
    }
    columns = split(trim(line), ',');
    break;
  }
  if (columns.empty()) parse_error(source, line_no, "missing CSV header");
  for (auto& c : columns) c = trim(c);
  if (columns[0] != "id") parse_error(source, line_no, "CSV header must start with 'id'");

  std::size_t n_features = 0;
  while (1 + n_features < columns.size() && columns[1 + n_features] == "f" + std::to_string(n_features)) {
    ++n_features;
  }
  int attributes_col = -1;
  int media_col = -1;
  for (std::size_t c = 1 + n_features; c < columns.size(); ++c) {
    if (columns[c] == "attributes" && attributes_col < 0) {
      attributes_col = static_cast<int>(c);
    } else if (columns[c] == "media_path" && media_col < 0) {
      media_col = static_cast<int>(c);
    } else {
      parse_error(source, line_no, "unexpected CSV column '" + columns[c] + "'");
    }
  }
  if (n_features == 0) parse_error(source, line_no, "CSV header declares no feature columns f0..fn");

  std::vector<ItemRecord> items;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != columns.size()) {
      parse_error(source, line_no, "expected " + std::to_string(columns.size()) + " fields, found " +
                                       std::to_string(fields.size()));
    }
    ItemRecord item;
    item.id = trim(fields[0]);
    for (std::size_t d = 0; d < n_features; ++d) {
      item.features.push_back(parse_number(fields[1 + d], source, line_no));
    }
    if (attributes_col >= 0) {
      const auto cell = trim(fields[static_cast<std::size_t>(attributes_col)]);
      if (!cell.empty()) {
        for (auto& label : split(cell, ';')) {
          label = trim(label);
          if (!label.empty()) item.attribute_labels.push_back(std::move(label));
        }
      }
    }
    if (media_col >= 0) {
      auto cell = trim(fields[static_cast<std::size_t>(media_col)]);
      if (!cell.empty()) item.media_path = std::move(cell);
    }
    items.push_back(std::move(item));
  }
  return items;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const char* to_string(CatalogFormat format) noexcept {
  return format == CatalogFormat::csv ? "csv" : "jsonl";
}

CatalogFormat parse_catalog_format(const std::string& name) {
  if (name == "jsonl") return CatalogFormat::jsonl;
  if (name == "csv") return CatalogFormat::csv;
  throw Error(ErrorCode::invalid_argument, "unknown catalog format '" + name + "' (expected jsonl or csv)");
}

CatalogFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? CatalogFormat::csv : CatalogFormat::jsonl;
}

Catalog parse_catalog(std::istream& in, CatalogFormat format, const std::string& source) {
  Header header;
  std::vector<ItemRecord> items;
  if (format == CatalogFormat::csv) {
    items = read_csv(in, source, header);
  } else {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      if (line.rfind(kHeaderTag, 0) == 0) {
        if (!items.empty()) parse_error(source, line_no, "catalog header must precede records");
        header = parse_header(line, source, line_no);
        continue;
      }
      items.push_back(parse_jsonl_record(line, source, line_no));
    }
  }
  if (items.empty()) throw Error(ErrorCode::data, source + ": catalog has no items");
  return Catalog::validate(std::move(items), std::move(header.vocabulary), std::move(header.extractor));
}

Catalog load_catalog(const std::filesystem::path& path, CatalogFormat format) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "file not found: " + path.string());
  auto catalog = parse_catalog(in, format, path.string());
  // Relative media paths are resolved against the catalog's directory.
  bool has_relative_media = false;
  for (const auto& item : catalog.items()) {
    if (item.media_path && std::filesystem::path(*item.media_path).is_relative()) has_relative_media = true;
  }
  if (!has_relative_media) return catalog;
  auto raw = catalog.raw_items();
  for (auto& item : raw) {
    if (item.media_path && std::filesystem::path(*item.media_path).is_relative()) {
      item.media_path = (path.parent_path() / *item.media_path).lexically_normal().string();
    }
  }
  return Catalog::validate(std::move(raw), catalog.attribute_vocabulary(), catalog.extractor());
}

Catalog load_catalog(const std::filesystem::path& path) {
  return load_catalog(path, format_from_path(path));
}

void write_catalog(std::ostream& out, const Catalog& catalog, CatalogFormat format) {
  out << format_header(catalog) << '\n';
  if (format == CatalogFormat::jsonl) {
    for (std::size_t i = 0; i < catalog.size(); ++i) {
      const auto& item = catalog.item(i);
      const auto raw = catalog.raw_features(i);
      nlohmann::json j{{"id", item.id},
                       {"features", std::vector<double>(raw.begin(), raw.end())},
                       {"attributes", item.attribute_labels}};
      if (item.media_path) j["media_path"] = *item.media_path;
      out << j.dump() << '\n';
    }
    return;
  }

  bool any_media = false;
  for (const auto& item : catalog.items()) any_media = any_media || item.media_path.has_value();
  out << "id";
  for (std::size_t d = 0; d < catalog.dim(); ++d) out << ",f" << d;
  out << ",attributes";
  if (any_media) out << ",media_path";
  out << '\n';
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const auto& item = catalog.item(i);
    if (item.id.find_first_of(",\n") != std::string::npos) {
      throw Error(ErrorCode::invalid_argument, "id '" + item.id + "' cannot be written as CSV");
    }
    out << item.id;
    for (const double v : catalog.raw_features(i)) out << ',' << format_double(v);
    out << ',';
    for (std::size_t a = 0; a < item.attribute_labels.size(); ++a) {
      out << (a ? ";" : "") << item.attribute_labels[a];
    }
    if (any_media) out << ',' << item.media_path.value_or("");
    out << '\n';
  }
}

void save_catalog(const std::filesystem::path& path, const Catalog& catalog, CatalogFormat format) {
  std::ostringstream out;
  write_catalog(out, catalog, format);
  write_file_atomic(path, out.str());
}

}  // namespace usar
