#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace medlink::text {

std::vector<std::string_view> split(std::string_view s, char sep);

std::string_view trim(std::string_view s);

std::string to_lower_ascii(std::string_view s);

// Collapses runs of ASCII whitespace into a single space and trims the ends.
std::string collapse_whitespace(std::string_view s);

// Byte offsets of every UTF-8 code point start, plus a final entry equal to
// s.size(). Stray continuation bytes are counted as their own code point.
std::vector<std::size_t> codepoint_offsets(std::string_view s);

std::size_t codepoint_length(std::string_view s);

// Replaces TAB, CR and LF with a single space so a value fits in one TSV cell.
std::string tsv_cell(std::string_view s);

std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(std::string_view s);

std::string read_file(const std::filesystem::path& path);

// Writes through a sibling temporary file and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace medlink::text
