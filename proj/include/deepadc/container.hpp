#pragma once

// Shared on-disk container: a UTF-8 text header of "key = value" lines,
// terminated by a blank line, followed by a little-endian binary payload.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace deepadc::io {

class Header {
 public:
  void set(std::string key, std::string value);
  void set(std::string key, double value);
  void set(std::string key, std::int64_t value);
  void set(std::string key, int value) { set(std::move(key), static_cast<std::int64_t>(value)); }
  void set(std::string key, std::uint64_t value);

  bool contains(std::string_view key) const;
  /// Throws DataError if the key is missing.
  const std::string& get(std::string_view key) const;
  double get_double(std::string_view key) const;
  std::int64_t get_int(std::string_view key) const;
  std::uint64_t get_uint(std::string_view key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Shortest text that parses back to exactly the same double.
std::string format_double(double v);

struct Container {
  Header header;
  std::vector<std::byte> payload;
};

/// Writes via a temporary file and rename, so a failed write never leaves a partial file.
void write_container(const std::filesystem::path& path, const Header& header,
                     std::span<const std::byte> payload);
Container read_container(const std::filesystem::path& path);

/// Same as write_container but for arbitrary text (CSV, manifests).
void write_text_file(const std::filesystem::path& path, std::string_view text);

// Little-endian payload helpers.
void append_f32(std::vector<std::byte>& out, float v);
void append_i16(std::vector<std::byte>& out, std::int16_t v);
float read_f32(std::span<const std::byte> in, std::size_t offset);
std::int16_t read_i16(std::span<const std::byte> in, std::size_t offset);

/// Comma-separated integer lists, used for symbol-index header lines.
std::string join_ints(std::span<const int> values);
std::vector<int> split_ints(std::string_view text);

}  // namespace deepadc::io
