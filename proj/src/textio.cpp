#include "vrgen/textio.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "vrgen/error.hpp"

namespace vrgen {

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error(ErrorCode::InvalidArgument, "cannot format number");
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  text = trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw Error(ErrorCode::MalformedRecord, "not a number: '" + std::string(text) + "'");
  }
  return value;
}

long long parse_int(std::string_view text) {
  text = trim(text);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw Error(ErrorCode::MalformedRecord, "not an integer: '" + std::string(text) + "'");
  }
  return value;
}

std::string_view trim(std::string_view text) {
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
  return text.substr(b, e - b);
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == sep) {
      out.emplace_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnreadableFile, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
  out << contents;
}

void KeyValues::set(std::string key, std::string value) {
  items_.emplace_back(std::move(key), std::move(value));
}

bool KeyValues::contains(std::string_view key) const { return find(key).has_value(); }

std::optional<std::string> KeyValues::find(std::string_view key) const {
  for (auto it = items_.rbegin(); it != items_.rend(); ++it) {
    if (it->first == key) return it->second;
  }
  return std::nullopt;
}

std::string KeyValues::get(std::string_view key) const {
  auto v = find(key);
  if (!v) throw Error(ErrorCode::ConfigError, "missing key '" + std::string(key) + "'");
  return *v;
}

std::string KeyValues::get_or(std::string_view key, std::string fallback) const {
  auto v = find(key);
  return v ? *v : std::move(fallback);
}

long long KeyValues::get_int(std::string_view key) const {
  try {
    return parse_int(get(key));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, "key '" + std::string(key) + "' is not an integer");
  }
}

double KeyValues::get_double(std::string_view key) const {
  try {
    return parse_double(get(key));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, "key '" + std::string(key) + "' is not a number");
  }
}

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::size_t lineno = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++lineno;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": expected key = value");
    }
    kv.set(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }
  return kv;
}

ModelWriter::ModelWriter(std::string_view kind, int version) {
  out_ += "# format = vrgen-";
  out_ += kind;
  out_ += ' ';
  out_ += std::to_string(version);
  out_ += '\n';
}

void ModelWriter::header(std::string_view key, std::string_view value) {
  out_ += "# ";
  out_ += key;
  out_ += " = ";
  out_ += value;
  out_ += '\n';
}

void ModelWriter::matrix(std::string_view name, const Matrix& m) {
  out_ += "@matrix ";
  out_ += name;
  out_ += ' ' + std::to_string(m.rows) + ' ' + std::to_string(m.cols) + '\n';
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      if (c) out_ += ' ';
      out_ += format_double(m(r, c));
    }
    out_ += '\n';
  }
}

void ModelWriter::vector(std::string_view name, const Vector& v) {
  Matrix m(1, v.size());
  m.data = v;
  matrix(name, m);
}

void ModelWriter::strings(std::string_view name, const std::vector<std::string>& values) {
  out_ += "@strings ";
  out_ += name;
  out_ += ' ' + std::to_string(values.size()) + '\n';
  for (const auto& s : values) {
    out_ += s;
    out_ += '\n';
  }
}

void ModelWriter::save(const std::filesystem::path& path) const { write_file(path, out_); }

ModelReader::ModelReader(std::string_view text, std::string_view kind, int version) {
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  const std::string expected = "vrgen-" + std::string(kind) + " " + std::to_string(version);
  std::size_t i = 0;
  bool seen_format = false;
  for (; i < lines.size() && !lines[i].empty() && lines[i][0] == '#'; ++i) {
    std::string_view body = trim(std::string_view(lines[i]).substr(1));
    auto eq = body.find('=');
    if (eq == std::string_view::npos) continue;
    std::string key(trim(body.substr(0, eq)));
    std::string value(trim(body.substr(eq + 1)));
    if (key == "format") {
      if (value != expected) {
        throw Error(ErrorCode::FormatVersionMismatch, "expected " + expected + ", found " + value);
      }
      seen_format = true;
    } else {
      header_.set(std::move(key), std::move(value));
    }
  }
  if (!seen_format) throw Error(ErrorCode::FormatVersionMismatch, "missing format line for " + expected);

  while (i < lines.size()) {
    auto fields = split_whitespace(lines[i]);
    ++i;
    if (fields.empty()) continue;
    if (fields[0] == "@matrix" && fields.size() == 4) {
      Matrix m(static_cast<std::size_t>(parse_int(fields[2])), static_cast<std::size_t>(parse_int(fields[3])));
      for (std::size_t r = 0; r < m.rows; ++r, ++i) {
        if (i >= lines.size()) throw Error(ErrorCode::MalformedRecord, "truncated matrix " + fields[1]);
        auto values = split_whitespace(lines[i]);
        if (values.size() != m.cols) {
          throw Error(ErrorCode::MalformedRecord,
                      "matrix " + fields[1] + " row " + std::to_string(r) + " has wrong width");
        }
        for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = parse_double(values[c]);
      }
      matrices_.emplace(fields[1], std::move(m));
    } else if (fields[0] == "@strings" && fields.size() == 3) {
      auto count = static_cast<std::size_t>(parse_int(fields[2]));
      std::vector<std::string> values;
      for (std::size_t k = 0; k < count; ++k, ++i) {
        if (i >= lines.size()) throw Error(ErrorCode::MalformedRecord, "truncated strings " + fields[1]);
        values.push_back(lines[i]);
      }
      strings_.emplace(fields[1], std::move(values));
    } else {
      throw Error(ErrorCode::MalformedRecord, "unexpected line " + std::to_string(i) + ": " + lines[i - 1]);
    }
  }
}

ModelReader ModelReader::load(const std::filesystem::path& path, std::string_view kind, int version) {
  return ModelReader(read_file(path), kind, version);
}

const Matrix& ModelReader::matrix(std::string_view name) const {
  auto it = matrices_.find(name);
  if (it == matrices_.end()) throw Error(ErrorCode::MalformedRecord, "missing matrix " + std::string(name));
  return it->second;
}

Vector ModelReader::vector(std::string_view name) const { return matrix(name).data; }

const std::vector<std::string>& ModelReader::strings(std::string_view name) const {
  auto it = strings_.find(name);
  if (it == strings_.end()) throw Error(ErrorCode::MalformedRecord, "missing strings " + std::string(name));
  return it->second;
}

bool ModelReader::has_matrix(std::string_view name) const { return matrices_.find(name) != matrices_.end(); }

}  // namespace vrgen
