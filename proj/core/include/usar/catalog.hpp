#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace usar {

using ItemId = std::string;

struct ItemRecord {
  ItemId id;
  std::vector<double> features;
  std::vector<std::string> attribute_labels;
  std::optional<std::string> media_path;

  bool operator==(const ItemRecord&) const = default;
};

/// The 18 aesthetic attributes used when a catalog does not name its own.
const std::vector<std::string>& default_attribute_vocabulary();

/// Immutable, validated item collection. Features are z-score standardized
/// per dimension at construction; dimensions with zero spread become 0.
class Catalog {
 public:
  /// Validates and standardizes `raw`. An empty `vocabulary` is inferred:
  /// the default names when no item carries labels, otherwise the labels in
  /// use (default-vocabulary order first, then first appearance).
  static Catalog validate(std::vector<ItemRecord> raw,
                          std::vector<std::string> vocabulary = {},
                          std::string extractor = {});

  std::size_t size() const noexcept { return items_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const ItemRecord> items() const noexcept { return items_; }
  const ItemRecord& item(std::size_t index) const { return items_.at(index); }
  std::span<const double> features(std::size_t index) const {
    return items_.at(index).features;
  }

  /// Position of `id`; throws Error(not_found).
  std::size_t index_of(const ItemId& id) const;
  std::optional<std::size_t> find(const ItemId& id) const;
  /// Features as supplied, before standardization.
  std::span<const double> raw_features(std::size_t index) const { return raw_.at(index); }
  /// Items with their supplied features, suitable for re-validation.
  std::vector<ItemRecord> raw_items() const;
  bool contains(const ItemId& id) const { return index_.count(id) != 0; }

  const std::vector<std::string>& attribute_vocabulary() const noexcept {
    return vocabulary_;
  }
  std::optional<std::size_t> attribute_index(const std::string& name) const;

  /// Feature provenance, e.g. "synthetic", "toy-v1", "alexnet-fc7".
  const std::string& extractor() const noexcept { return extractor_; }

 private:
  Catalog() = default;

  std::vector<ItemRecord> items_;
  std::vector<std::vector<double>> raw_;
  std::unordered_map<ItemId, std::size_t> index_;
  std::vector<std::string> vocabulary_;
  std::string extractor_;
  std::size_t dim_ = 0;
};

inline Catalog validate_catalog(std::vector<ItemRecord> raw_items) {
  return Catalog::validate(std::move(raw_items));
}

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace usar
