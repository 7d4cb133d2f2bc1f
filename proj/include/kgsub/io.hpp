#ifndef KGSUB_IO_HPP
#define KGSUB_IO_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace kgsub::io {

namespace fs = std::filesystem;

/// Write a file by streaming into `<path>.tmp` and renaming over `path`.
void write_atomic(const fs::path& path, const std::function<void(std::ostream&)>& writer);
void write_atomic(const fs::path& path, std::string_view contents);

std::string read_file(const fs::path& path);

/// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_checksum(const fs::path& path);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

/// Split on `sep` keeping empty fields.
std::vector<std::string_view> split(std::string_view line, char sep);

/// Shortest decimal form that round-trips a double (`%.17g` trimmed).
std::string format_double(double value);

/// Fixed-point formatting used where byte-stable output matters.
std::string format_fixed(double value, int decimals);

}

#endif
