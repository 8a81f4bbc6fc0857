#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace scriptboard {

std::string_view trim(std::string_view s);
std::string_view trim_left(std::string_view s);
bool is_blank(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
std::string ascii_lower(std::string_view s);
std::string ascii_upper(std::string_view s);

/// Runs of whitespace (including newlines) become a single space; ends trimmed.
std::string collapse_whitespace(std::string_view s);

/// CRLF and lone CR become LF.
std::string normalize_newlines(std::string_view s);

struct LineSpan {
    std::size_t begin = 0; ///< byte offset of first char
    std::size_t end = 0;   ///< byte offset one past the last char, excluding the terminator
    std::string_view text;
};

/// Splits on '\n'; a trailing '\r' is excluded from the line text.
std::vector<LineSpan> split_lines(std::string_view text);

/// Decodes UTF-8 to code points; invalid bytes map to U+FFFD.
std::vector<char32_t> utf8_decode(std::string_view s);
void utf8_append(std::string& out, char32_t cp);

/// Latin-1 / Latin Extended-A letters to their ASCII base; "" for unmapped code points.
std::string_view ascii_transliteration(char32_t cp);

/// Lowercase ASCII word tokens after transliteration; drops tokens shorter than 2
/// characters and a small stop-word list.
std::vector<std::string> content_tokens(std::string_view text);

/// Truncates to at most max_bytes without splitting a UTF-8 sequence.
std::string utf8_truncate(std::string_view s, std::size_t max_bytes);

std::string read_text_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename; creates parent directories.
void write_file(const std::filesystem::path& path, std::string_view contents);

} // namespace scriptboard
