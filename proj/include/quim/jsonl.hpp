#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace quim {

using json = nlohmann::json;

/// A JSON-lines file whose first line is {"format":<name>,"version":<n>}.
struct JsonlRecord {
    std::size_t line = 0;  // 1-based; the header is line 1
    json value;
};

/// Writes header + records to a sibling temp file and renames it into place.
void write_jsonl(const std::filesystem::path& path, std::string_view format, int version,
                 const std::vector<json>& records);

/// Throws IoError if unreadable, FormatError (naming the line) on malformed
/// lines or a wrong format tag, VersionMismatch on a version other than
/// `version`.
std::vector<JsonlRecord> read_jsonl(const std::filesystem::path& path, std::string_view format,
                                    int version);

/// Writes bytes to `path` via temp file + rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// Field accessors that raise FormatError with the line number on mismatch.
std::string get_string(const JsonlRecord& rec, const char* key);
long long get_int(const JsonlRecord& rec, const char* key);

}  // namespace quim
