#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace coldrec {

using Date = std::chrono::year_month_day;
using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

/// Strict `YYYY-MM-DD`; rejects calendar-invalid dates such as 2025-02-30.
std::optional<Date> parse_date(std::string_view text);
std::string format_date(Date date);

/// `YYYY-MM-DDTHH:MM:SS[.fff]Z`. Only the UTC designator is accepted.
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp ts);

std::string_view trim(std::string_view text);
std::vector<std::string> split(std::string_view text, char sep);
std::string join(std::span<const std::string> parts, std::string_view sep);

/// One CSV record split into fields. Double-quoted fields may contain the
/// separator and doubled quotes; records never span lines.
std::optional<std::vector<std::string>> parse_csv_line(std::string_view line);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t splitmix64(std::uint64_t x);
std::string hex64(std::uint64_t value);

/// Per-user generator seed derived from the run seed; stable across
/// platforms and standard library implementations.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view key);

/// Portable seeded generator. std::mt19937_64 output is fixed by the
/// standard but the std distributions are not, so bounded draws and
/// shuffles are done here.
class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform double in [0, 1).
  double unit();

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  /// `count` elements drawn uniformly without replacement; the result keeps
  /// draw order.
  template <typename T>
  std::vector<T> sample(std::vector<T> pool, std::size_t count) {
    std::vector<T> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count && i < pool.size(); ++i) {
      const auto j = i + static_cast<std::size_t>(below(pool.size() - i));
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }

 private:
  std::mt19937_64 engine_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace coldrec
