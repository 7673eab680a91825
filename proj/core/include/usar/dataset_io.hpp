#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "usar/catalog.hpp"

namespace usar {

enum class CatalogFormat { jsonl, csv };

const char* to_string(CatalogFormat format) noexcept;
CatalogFormat parse_catalog_format(const std::string& name);
/// Guesses from the extension; anything but ".csv" reads as JSONL.
CatalogFormat format_from_path(const std::filesystem::path& path);

/// Reads a catalog. JSONL files may start with a
/// `#usar-catalog v1 extractor=<name> [attributes=<a;b;...>]` line, which
/// fixes feature provenance and the attribute vocabulary. Parse errors name
/// the 1-based line number.
Catalog parse_catalog(std::istream& in, CatalogFormat format, const std::string& source = "<stream>");
Catalog load_catalog(const std::filesystem::path& path, CatalogFormat format);
Catalog load_catalog(const std::filesystem::path& path);

/// Writes the catalog's supplied (unstandardized) features, header included.
void write_catalog(std::ostream& out, const Catalog& catalog, CatalogFormat format);
void save_catalog(const std::filesystem::path& path, const Catalog& catalog, CatalogFormat format);

}  // namespace usar
