#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace bladekit::util {

/// FNV-1a 64-bit hash, used for content hashes in run logs and for the
/// lexical embedder's token buckets. Stable across platforms.
std::uint64_t fnv1a64(std::string_view data);

/// Hash rendered as 16 lowercase hex digits.
std::string fnv1a64_hex(std::string_view data);

/// Fixed-point rendering with half-up rounding, e.g. (91.25, 1) -> "91.3".
/// Values are expected non-negative.
std::string format_fixed(double value, int decimals);

/// Shortest round-trip decimal rendering of a double ("0.71", "1", "0").
std::string format_shortest(double value);

std::string to_lower(std::string_view text);

// lowercased ASCII [a-z0-9]+ runs; everything else is a delimiter
std::vector<std::string> tokenize(std::string_view text);

std::string trim(std::string_view text);

std::string read_text_file(const std::string& path);

void write_text_file(const std::string& path, std::string_view content);

/// Invokes fn(0), ..., fn(count-1) from at most max_in_flight worker threads.
/// fn must not throw; order of invocation across workers is unspecified.
void parallel_indexed(std::size_t count, int max_in_flight, const std::function<void(std::size_t)>& fn);

}  // namespace bladekit::util
