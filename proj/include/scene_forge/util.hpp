#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace scene_forge {

// ---- strings ---------------------------------------------------------------

std::string_view trim_view(std::string_view s);
std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);

/// Case-insensitive (ASCII) search. Returns the byte offset of the first match.
std::optional<std::size_t> ifind(std::string_view haystack, std::string_view needle);

std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_lines(std::string_view s);

/// Splits on any of `seps`, ignoring separators nested inside parentheses.
/// Pieces are trimmed and empty pieces are dropped.
std::vector<std::string> split_top_level(std::string_view s, std::string_view seps);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Left-aligned columns separated by two spaces; widths count code points.
std::string render_table(const std::vector<std::vector<std::string>>& rows);

// ---- UTF-8 ---------------------------------------------------------------

std::size_t utf8_length(std::string_view s);

/// Byte offset of code point `index`; `index == utf8_length(s)` maps to s.size().
std::optional<std::size_t> utf8_byte_offset(std::string_view s, std::size_t index);

/// Code-point index of the byte offset `byte` (which must sit on a boundary).
std::size_t utf8_index_of_byte(std::string_view s, std::size_t byte);

// ---- hashing -------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view s);
std::uint64_t splitmix64(std::uint64_t x);
std::string sha256_hex(std::string_view data);

// ---- randomness ------------------------------------------------------------

/// mt19937_64 with distribution code written here, so draws are identical
/// across standard library implementations.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// ---- files -----------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void atomic_write_file(const std::filesystem::path& path, std::string_view contents);

/// Maps an identifier to something safe to use as a file name.
std::string safe_file_stem(std::string_view id);

// ---- time ------------------------------------------------------------------

std::string utc_timestamp_now();

// ---- concurrency -------------------------------------------------------------

/// Runs fn(i) for i in [0, n) on at most `max_in_flight` threads. The first
/// exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t n, std::size_t max_in_flight,
                  const std::function<void(std::size_t)>& fn);

}  // namespace scene_forge
