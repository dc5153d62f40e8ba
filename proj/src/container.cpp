#include "deepadc/container.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <sstream>

#include "deepadc/error.hpp"

namespace deepadc::io {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U r = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      r = static_cast<U>((r << 8) | ((v >> (8 * i)) & 0xFF));
    }
    return r;
  }
  return v;
}

std::filesystem::path temp_path_for(const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".partial";
  return tmp;
}

void commit(const std::filesystem::path& tmp, const std::filesystem::path& path) {
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw DataError("cannot move " + tmp.string() + " to " + path.string());
  }
}

}  // namespace

void Header::set(std::string key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

void Header::set(std::string key, double value) { set(std::move(key), format_double(value)); }
void Header::set(std::string key, std::int64_t value) { set(std::move(key), std::to_string(value)); }
void Header::set(std::string key, std::uint64_t value) { set(std::move(key), std::to_string(value)); }

bool Header::contains(std::string_view key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
}

const std::string& Header::get(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw DataError("header key missing: " + std::string(key));
}

double Header::get_double(std::string_view key) const {
  const auto& s = get(key);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    // from_chars does not accept "inf"
    if (s == "inf") return std::numeric_limits<double>::infinity();
    throw DataError("header value is not a number: " + std::string(key) + " = " + s);
  }
  return v;
}

std::int64_t Header::get_int(std::string_view key) const {
  const auto& s = get(key);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw DataError("header value is not an integer: " + std::string(key) + " = " + s);
  }
  return v;
}

std::uint64_t Header::get_uint(std::string_view key) const {
  const auto& s = get(key);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw DataError("header value is not an unsigned integer: " + std::string(key) + " = " + s);
  }
  return v;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_container(const std::filesystem::path& path, const Header& header,
                     std::span<const std::byte> payload) {
  const auto tmp = temp_path_for(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    for (const auto& [k, v] : header.entries()) {
      out << k << " = " << v << '\n';
    }
    out << '\n';
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw DataError("write failed: " + path.string());
    }
  }
  commit(tmp, path);
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  Container c;
  std::string line;
  bool terminated = false;
  while (std::getline(in, line)) {
    if (trim(line).empty()) {
      terminated = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("malformed header line in " + path.string() + ": " + line);
    c.header.set(trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)));
  }
  if (!terminated) throw DataError("header not terminated by a blank line: " + path.string());
  std::ostringstream rest;
  rest << in.rdbuf();
  const std::string bytes = rest.str();
  c.payload.resize(bytes.size());
  std::transform(bytes.begin(), bytes.end(), c.payload.begin(), [](char ch) { return static_cast<std::byte>(ch); });
  return c;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  const auto tmp = temp_path_for(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw DataError("write failed: " + path.string());
  }
  commit(tmp, path);
}

void append_f32(std::vector<std::byte>& out, float v) {
  const auto bits = to_little(std::bit_cast<std::uint32_t>(v));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((bits >> (8 * i)) & 0xFF));
}

void append_i16(std::vector<std::byte>& out, std::int16_t v) {
  const auto bits = static_cast<std::uint16_t>(v);
  out.push_back(static_cast<std::byte>(bits & 0xFF));
  out.push_back(static_cast<std::byte>((bits >> 8) & 0xFF));
}

float read_f32(std::span<const std::byte> in, std::size_t offset) {
  if (offset + 4 > in.size()) throw DataError("payload truncated");
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

std::int16_t read_i16(std::span<const std::byte> in, std::size_t offset) {
  if (offset + 2 > in.size()) throw DataError("payload truncated");
  const auto bits = static_cast<std::uint16_t>(static_cast<std::uint16_t>(in[offset]) |
                                               (static_cast<std::uint16_t>(in[offset + 1]) << 8));
  return static_cast<std::int16_t>(bits);
}

std::string join_ints(std::span<const int> values) {
  std::string s;
  s.reserve(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s.push_back(',');
    s += std::to_string(values[i]);
  }
  return s;
}

std::vector<int> split_ints(std::string_view text) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto tok = trim(text.substr(pos, end - pos));
    if (!tok.empty()) {
      int v = 0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc{} || ptr != tok.data() + tok.size()) throw DataError("bad integer list entry: " + tok);
      out.push_back(v);
    }
    pos = end + 1;
  }
  return out;
}

}  // namespace deepadc::io
