#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace fracmin {

// 64-bit FNV-1a over raw bytes. Every artifact embeds the hash of the
// canonical config serialization so results can be traced back to the exact
// configuration that produced them.
std::uint64_t fnv1a(std::string_view bytes);
std::string fnv1a_hex(std::string_view bytes);

// Shortest decimal that round-trips the value. Same bytes on every run, so
// artifacts diff clean.
std::string format_double(double value);

// One CSV field under RFC 4180 quoting: fields containing commas, quotes, or
// line breaks are wrapped in quotes with embedded quotes doubled, everything
// else passes through unchanged.
std::string csv_field(std::string_view raw);

// Joins fields into a finished line, trailing newline included.
std::string csv_line(const std::vector<std::string>& fields);

// Writes through a temporary file in the target directory followed by a
// rename, so a reader never observes a partial artifact. Missing directories
// are created. Failures surface as ConfigInvalid (the path is part of the
// request, not of the computation).
void write_file_atomic(const std::string& path, std::string_view content);

}  // namespace fracmin
