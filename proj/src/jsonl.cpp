#include "quim/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "quim/error.hpp"

namespace quim {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, std::string_view bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::IoError, "cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw Error(Errc::IoError, "write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error(Errc::IoError, "rename to " + path.string() + " failed: " + ec.message());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw Error(Errc::IoError, "read failed for " + path.string());
    return ss.str();
}

void write_jsonl(const fs::path& path, std::string_view format, int version,
                 const std::vector<json>& records) {
    std::string out;
    out += json{{"format", format}, {"version", version}}.dump();
    out += '\n';
    for (const auto& r : records) {
        out += r.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

std::vector<JsonlRecord> read_jsonl(const fs::path& path, std::string_view format, int version) {
    const std::string data = read_file(path);
    std::vector<JsonlRecord> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool saw_header = false;
    const auto where = [&] { return path.string() + " line " + std::to_string(line_no); };

    while (pos < data.size()) {
        std::size_t nl = data.find('\n', pos);
        std::string_view line(data.data() + pos, (nl == std::string::npos ? data.size() : nl) - pos);
        pos = nl == std::string::npos ? data.size() : nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;

        json value = json::parse(line, nullptr, false);
        if (value.is_discarded() || !value.is_object()) {
            throw Error(Errc::FormatError, where() + ": malformed JSON record");
        }
        if (!saw_header) {
            if (value.value("format", "") != format) {
                throw Error(Errc::FormatError,
                            where() + ": expected header with format \"" + std::string(format) + "\"");
            }
            if (!value.contains("version") || !value["version"].is_number_integer()) {
                throw Error(Errc::FormatError, where() + ": header lacks integer version");
            }
            if (value["version"].get<int>() != version) {
                throw Error(Errc::VersionMismatch, where() + ": unsupported version " +
                                                       value["version"].dump());
            }
            saw_header = true;
            continue;
        }
        out.push_back({line_no, std::move(value)});
    }
    if (!saw_header) throw Error(Errc::FormatError, path.string() + ": missing header line");
    return out;
}

std::string get_string(const JsonlRecord& rec, const char* key) {
    auto it = rec.value.find(key);
    if (it == rec.value.end() || !it->is_string()) {
        throw Error(Errc::FormatError,
                    "line " + std::to_string(rec.line) + ": missing string field \"" + key + "\"");
    }
    return it->get<std::string>();
}

long long get_int(const JsonlRecord& rec, const char* key) {
    auto it = rec.value.find(key);
    if (it == rec.value.end() || !it->is_number_integer()) {
        throw Error(Errc::FormatError,
                    "line " + std::to_string(rec.line) + ": missing integer field \"" + key + "\"");
    }
    return it->get<long long>();
}

}  // namespace quim
