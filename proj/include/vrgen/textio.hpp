#pragma once

// Shared versioned text format for persisted models.
//
//   # format = vrgen-<kind> <version>
//   # <key> = <value>
//   @matrix <name> <rows> <cols>
//   <cols decimals per line, rows lines>
//   @strings <name> <count>
//   <one string per line>
//
// Decimals are written in shortest round-trip form so load(save(x)) == x.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vrgen/linalg.hpp"

namespace vrgen {

std::string format_double(double value);
double parse_double(std::string_view text);
long long parse_int(std::string_view text);
std::string_view trim(std::string_view text);
std::vector<std::string> split(std::string_view text, char sep);
std::vector<std::string> split_whitespace(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Ordered key/value pairs. Later duplicates override earlier ones on lookup.
class KeyValues {
 public:
  void set(std::string key, std::string value);
  bool contains(std::string_view key) const;
  std::optional<std::string> find(std::string_view key) const;
  std::string get(std::string_view key) const;  // throws ConfigError when absent
  std::string get_or(std::string_view key, std::string fallback) const;
  long long get_int(std::string_view key) const;
  double get_double(std::string_view key) const;
  const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

// `key = value` lines; `#` starts a comment line; blank lines ignored.
KeyValues parse_key_values(std::string_view text);

class ModelWriter {
 public:
  ModelWriter(std::string_view kind, int version);
  void header(std::string_view key, std::string_view value);
  void matrix(std::string_view name, const Matrix& m);
  void vector(std::string_view name, const Vector& v);
  void strings(std::string_view name, const std::vector<std::string>& values);
  const std::string& str() const { return out_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::string out_;
};

class ModelReader {
 public:
  // Throws FormatVersionMismatch when the kind/version line does not match and
  // MalformedRecord on truncated or unparsable sections.
  ModelReader(std::string_view text, std::string_view kind, int version);
  static ModelReader load(const std::filesystem::path& path, std::string_view kind, int version);

  const KeyValues& header() const { return header_; }
  const Matrix& matrix(std::string_view name) const;
  Vector vector(std::string_view name) const;
  const std::vector<std::string>& strings(std::string_view name) const;
  bool has_matrix(std::string_view name) const;

 private:
  KeyValues header_;
  std::map<std::string, Matrix, std::less<>> matrices_;
  std::map<std::string, std::vector<std::string>, std::less<>> strings_;
};

}  // namespace vrgen
