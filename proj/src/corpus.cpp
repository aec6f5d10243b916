#include "quim/corpus.hpp"

#include <algorithm>
#include <regex>

#include "quim/error.hpp"
#include "quim/html.hpp"
#include "quim/jsonl.hpp"

namespace quim {

std::string_view to_string(ReviewFlag f) noexcept {
    switch (f) {
        case ReviewFlag::Unreviewed: return "unreviewed";
        case ReviewFlag::Accepted: return "accepted";
        case ReviewFlag::Reprocess: return "reprocess";
    }
    return "unreviewed";
}

ReviewFlag review_flag_from_string(std::string_view s) {
    if (s == "unreviewed") return ReviewFlag::Unreviewed;
    if (s == "accepted") return ReviewFlag::Accepted;
    if (s == "reprocess") return ReviewFlag::Reprocess;
    throw Error(Errc::FormatError, "unknown review_flag \"" + std::string(s) + "\"");
}

void ChunkingConfig::validate() const {
    if (chunk_size_tokens <= 0) throw Error(Errc::ConfigError, "chunk_size_tokens must be > 0");
    if (overlap_chars < 0) throw Error(Errc::ConfigError, "overlap_chars must be >= 0");
    if (min_doc_chars < 0) throw Error(Errc::ConfigError, "min_doc_chars must be >= 0");
}

bool is_valid_url(std::string_view url) {
    static const std::regex kUrl(R"(^[A-Za-z][A-Za-z0-9+.\-]*://([^\s/?#]*)([/?#][^\s]*)?$)");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_match(url.begin(), url.end(), m, kUrl)) return false;
    bool is_file = iequals(url.substr(0, 5), "file:");
    return is_file ? m[2].length() > 0 : m[1].length() > 0;
}

std::string make_doc_id(std::string_view url) { return "d" + hex64(fnv1a64(url)); }

std::string make_chunk_id(std::string_view url, int seq) {
    return "c" + hex64(fnv1a64(std::string(url) + "#" + std::to_string(seq)));
}

std::size_t utf8_length(std::string_view s) noexcept {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
}

Document clean_html(const RawPage& page) {
    if (!is_valid_url(page.url)) throw Error(Errc::MalformedUrl, "\"" + page.url + "\"");
    Document doc;
    doc.url = page.url;
    doc.doc_id = make_doc_id(page.url);
    doc.title = page.title.empty() ? html::title(page.html) : collapse_whitespace(page.title);
    doc.text = html::visible_text(page.html);
    return doc;
}

std::vector<Document> filter_documents(const std::vector<Document>& docs, const ChunkingConfig& cfg) {
    std::vector<Document> out;
    for (const auto& d : docs) {
        if (utf8_length(d.text) < static_cast<std::size_t>(cfg.min_doc_chars)) continue;
        if (iequals(trim(d.title), "404 page not found")) continue;
        out.push_back(d);
    }
    return out;
}

namespace {

// Byte offset reached by stepping `chars` code points back from `from`.
std::size_t step_back_chars(std::string_view s, std::size_t from, int chars) {
    std::size_t pos = from;
    while (chars > 0 && pos > 0) {
        --pos;
        while (pos > 0 && (static_cast<unsigned char>(s[pos]) & 0xC0) == 0x80) --pos;
        --chars;
    }
    return pos;
}

}  // namespace

std::vector<Chunk> chunk_document(const Document& doc, const ChunkingConfig& cfg,
                                  const TokenizerProvider& tokenizer) {
    cfg.validate();
    const auto tokens = tokenizer.tokenize(doc.text);
    if (tokens.empty()) throw Error(Errc::EmptyDocument, "document " + doc.doc_id + " has no text");

    const std::size_t n = tokens.size();
    const auto window = static_cast<std::size_t>(cfg.chunk_size_tokens);
    std::vector<Chunk> chunks;
    std::size_t first = 0;
    while (true) {
        const std::size_t last = std::min(first + window, n);  // exclusive
        const bool is_last = last == n;

        Chunk c;
        c.seq = static_cast<int>(chunks.size());
        c.doc_id = doc.doc_id;
        c.source_url = doc.url;
        c.chunk_id = make_chunk_id(doc.url, c.seq);
        c.token_count = static_cast<int>(last - first);
        // With no overlap the whitespace gap goes to the later chunk so spans still tile the text.
        c.char_span.start = first == 0 ? 0 : std::min(tokens[first].start, chunks.back().char_span.end);
        c.char_span.end = is_last ? doc.text.size() : tokens[last - 1].end;
        c.text = doc.text.substr(c.char_span.start, c.char_span.end - c.char_span.start);
        chunks.push_back(std::move(c));
        if (is_last) break;

        const std::size_t target = step_back_chars(doc.text, tokens[last - 1].end, cfg.overlap_chars);
        // Token containing the target offset, or the one after the gap it falls in.
        auto it = std::upper_bound(tokens.begin(), tokens.end(), target,
                                   [](std::size_t off, const TokenSpan& t) { return off < t.start; });
        auto next = static_cast<std::size_t>(std::distance(tokens.begin(), it)) - 1;
        if (it != tokens.begin() && target >= tokens[next].end) ++next;
        if (it == tokens.begin() || next <= first) {
            throw Error(Errc::ConfigError, "overlap of " + std::to_string(cfg.overlap_chars) +
                                               " chars covers a whole " + std::to_string(window) +
                                               "-token window");
        }
        first = next;
    }
    return chunks;
}

CorpusManifest write_corpus(const std::vector<Document>& docs, const std::vector<Chunk>& chunks,
                            const std::filesystem::path& path) {
    std::vector<json> records;
    records.reserve(docs.size() + chunks.size());
    for (const auto& d : docs) {
        records.push_back({{"kind", "doc"},
                           {"doc_id", d.doc_id},
                           {"url", d.url},
                           {"title", d.title},
                           {"text", d.text}});
    }
    for (const auto& c : chunks) {
        records.push_back({{"kind", "chunk"},
                           {"chunk_id", c.chunk_id},
                           {"doc_id", c.doc_id},
                           {"seq", c.seq},
                           {"text", c.text},
                           {"token_count", c.token_count},
                           {"char_span", {c.char_span.start, c.char_span.end}},
                           {"source_url", c.source_url},
                           {"review_flag", to_string(c.review_flag)}});
    }
    write_jsonl(path, kCorpusFormat, kCorpusVersion, records);
    return {path, docs.size(), chunks.size()};
}

Corpus read_corpus(const std::filesystem::path& path) {
    Corpus corpus;
    for (const auto& rec : read_jsonl(path, kCorpusFormat, kCorpusVersion)) {
        const std::string kind = get_string(rec, "kind");
        if (kind == "doc") {
            Document d;
            d.doc_id = get_string(rec, "doc_id");
            d.url = get_string(rec, "url");
            d.title = get_string(rec, "title");
            d.text = get_string(rec, "text");
            corpus.documents.push_back(std::move(d));
        } else if (kind == "chunk") {
            Chunk c;
            c.chunk_id = get_string(rec, "chunk_id");
            c.doc_id = get_string(rec, "doc_id");
            c.seq = static_cast<int>(get_int(rec, "seq"));
            c.text = get_string(rec, "text");
            c.token_count = static_cast<int>(get_int(rec, "token_count"));
            const auto& span = rec.value.find("char_span");
            if (span == rec.value.end() || !span->is_array() || span->size() != 2 ||
                !(*span)[0].is_number_unsigned() || !(*span)[1].is_number_unsigned()) {
                throw Error(Errc::FormatError,
                            "line " + std::to_string(rec.line) + ": char_span must be [start, end]");
            }
            c.char_span = {(*span)[0].get<std::size_t>(), (*span)[1].get<std::size_t>()};
            c.source_url = get_string(rec, "source_url");
            try {
                c.review_flag = review_flag_from_string(get_string(rec, "review_flag"));
            } catch (const Error& e) {
                throw Error(Errc::FormatError, "line " + std::to_string(rec.line) + ": " + e.what());
            }
            corpus.chunks.push_back(std::move(c));
        } else {
            throw Error(Errc::FormatError,
                        "line " + std::to_string(rec.line) + ": unknown record kind \"" + kind + "\"");
        }
    }
    return corpus;
}

}  // namespace quim
