#include "usar/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "usar/error.hpp"

namespace usar {

const std::vector<std::string>& default_attribute_vocabulary() {
  static const std::vector<std::string> names = {
      "Rule of Thirds",       "Center composition", "HROT",
      "Sharpness",            "Pattern",            "Complementary Colors",
      "Subordinate Colors",   "Cooperate Colors",   "Complexity feature",
      "Tone",                 "Use of light",       "Saturation",
      "Image size",           "Edge Composition",   "Global Texture",
      "SDE",                  "Hue count",          "Depth of field",
  };
  return names;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

namespace {

std::vector<std::string> infer_vocabulary(const std::vector<ItemRecord>& items) {
  std::vector<std::string> seen;
  std::unordered_set<std::string> seen_set;
  for (const auto& item : items) {
    for (const auto& label : item.attribute_labels) {
      if (seen_set.insert(label).second) seen.push_back(label);
    }
  }
  if (seen.empty()) return default_attribute_vocabulary();

  std::vector<std::string> vocab;
  for (const auto& name : default_attribute_vocabulary()) {
    if (seen_set.count(name)) vocab.push_back(name);
  }
  const std::unordered_set<std::string> defaults(
      default_attribute_vocabulary().begin(), default_attribute_vocabulary().end());
  for (const auto& name : seen) {
    if (!defaults.count(name)) vocab.push_back(name);
  }
  return vocab;
}

void standardize(std::vector<ItemRecord>& items, std::size_t dim) {
  const auto n = static_cast<double>(items.size());
  for (std::size_t d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (const auto& item : items) mean += item.features[d];
    mean /= n;
    double ss = 0.0;
    for (const auto& item : items) {
      const double c = item.features[d] - mean;
      ss += c * c;
    }
    const double sd = items.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    // Spread below this is floating-point residue of a constant column.
    const bool constant = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
    for (auto& item : items) {
      item.features[d] = constant ? 0.0 : (item.features[d] - mean) / sd;
    }
  }
}

}  // namespace

Catalog Catalog::validate(std::vector<ItemRecord> raw,
                          std::vector<std::string> vocabulary,
                          std::string extractor) {
  if (raw.empty()) {
    throw Error(ErrorCode::invalid_argument, "catalog has no items");
  }
  const std::size_t dim = raw.front().features.size();
  if (dim == 0) {
    throw Error(ErrorCode::data,
                "item '" + raw.front().id + "' has an empty feature vector");
  }

  Catalog catalog;
  catalog.index_.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& item = raw[i];
    if (item.id.empty()) {
      throw Error(ErrorCode::data, "item at position " + std::to_string(i) + " has an empty id");
    }
    if (item.features.size() != dim) {
      throw Error(ErrorCode::data,
                  "dimension mismatch: item '" + item.id + "' has " +
                      std::to_string(item.features.size()) + " features, expected " +
                      std::to_string(dim));
    }
    for (std::size_t d = 0; d < dim; ++d) {
      if (!std::isfinite(item.features[d])) {
        throw Error(ErrorCode::data, "item '" + item.id + "' has a non-finite feature at index " +
                                         std::to_string(d));
      }
    }
    auto [it, inserted] = catalog.index_.emplace(item.id, i);
    if (!inserted) {
      throw Error(ErrorCode::data, "duplicate id '" + item.id + "' at positions " +
                                       std::to_string(it->second) + " and " + std::to_string(i));
    }
  }

  if (vocabulary.empty()) vocabulary = infer_vocabulary(raw);
  if (vocabulary.size() < 2) {
    throw Error(ErrorCode::data, "attribute vocabulary needs at least 2 names");
  }
  std::unordered_set<std::string> vocab_set;
  for (const auto& name : vocabulary) {
    if (!vocab_set.insert(name).second) {
      throw Error(ErrorCode::data, "duplicate attribute name '" + name + "'");
    }
  }
  for (auto& item : raw) {
    for (const auto& label : item.attribute_labels) {
      if (!vocab_set.count(label)) {
        throw Error(ErrorCode::data,
                    "item '" + item.id + "' has unknown attribute '" + label + "'");
      }
    }
    std::sort(item.attribute_labels.begin(), item.attribute_labels.end());
    item.attribute_labels.erase(
        std::unique(item.attribute_labels.begin(), item.attribute_labels.end()),
        item.attribute_labels.end());
  }

  catalog.raw_.reserve(raw.size());
  for (const auto& item : raw) catalog.raw_.push_back(item.features);
  standardize(raw, dim);
  catalog.items_ = std::move(raw);
  catalog.vocabulary_ = std::move(vocabulary);
  catalog.extractor_ = std::move(extractor);
  catalog.dim_ = dim;
  return catalog;
}

std::vector<ItemRecord> Catalog::raw_items() const {
  std::vector<ItemRecord> out = items_;
  for (std::size_t i = 0; i < out.size(); ++i) out[i].features = raw_[i];
  return out;
}

std::size_t Catalog::index_of(const ItemId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw Error(ErrorCode::not_found, "unknown item id '" + id + "'");
  }
  return it->second;
}

std::optional<std::size_t> Catalog::find(const ItemId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Catalog::attribute_index(const std::string& name) const {
  auto it = std::find(vocabulary_.begin(), vocabulary_.end(), name);
  if (it == vocabulary_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - vocabulary_.begin());
}

}  // namespace usar
