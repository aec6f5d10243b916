#include "quim/qindex.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <set>

#include <zlib.h>

#include "quim/error.hpp"
#include "quim/jsonl.hpp"

namespace quim {

InvertedIndex::InvertedIndex(IndexHeader header, PrototypeSet prototypes, std::vector<std::vector<Posting>> buckets,
                             std::vector<ChunkVector> chunk_vectors)
    : header_(std::move(header)),
      prototypes_(std::move(prototypes)),
      buckets_(std::move(buckets)),
      chunk_vectors_(std::move(chunk_vectors)) {
    if (buckets_.size() != prototypes_.prototypes.size()) {
        throw Error(Errc::InvalidArgument, "bucket count does not match prototype count");
    }
}

std::span<const Posting> InvertedIndex::lookup(int proto_id) const {
    if (proto_id < 0 || static_cast<std::size_t>(proto_id) >= buckets_.size()) {
        throw Error(Errc::UnknownPrototype, "prototype " + std::to_string(proto_id) + " not in [0, " +
                                                std::to_string(buckets_.size()) + ")");
    }
    return buckets_[static_cast<std::size_t>(proto_id)];
}

std::size_t InvertedIndex::num_questions() const noexcept {
    std::size_t n = 0;
    for (const auto& b : buckets_) n += b.size();
    return n;
}

std::string build_timestamp() {
    std::time_t t = 0;
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
        t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
    } else {
        t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

InvertedIndex build_index(const std::vector<Chunk>& chunks, const std::vector<GeneratedQuestion>& questions,
                          const EmbedderProvider& provider, const BuildOptions& opts) {
    check_question_refs(questions, chunks);
    {
        std::set<std::string> ids;
        for (const auto& q : questions) {
            if (!ids.insert(q.question_id).second) {
                throw Error(Errc::ReferentialIntegrity, "duplicate question id " + q.question_id);
            }
        }
    }
    if (questions.empty()) throw Error(Errc::EmptyIndex, "no questions to index");

    std::vector<std::string> texts;
    texts.reserve(questions.size());
    for (const auto& q : questions) texts.push_back(q.text);
    std::vector<EmbeddingVector> vectors = embed_all(texts, provider, opts.embed_batch);

    PrototypeSet ps;
    if (opts.prototypes) {
        ps = *opts.prototypes;
        if (!ps.embedder_id.empty() && ps.embedder_id != provider.embedder_id()) {
            throw Error(Errc::EmbedderMismatch, "prototypes from " + ps.embedder_id + ", provider is " +
                                                    provider.embedder_id());
        }
        if (ps.dim() != provider.dim()) throw Error(Errc::DimMismatch, "prototype dim does not match embedder");
    } else {
        const int k = opts.k_p > 0 ? opts.k_p : default_prototype_count(vectors.size());
        ps = learn_prototypes(vectors, k, opts.seed, opts.max_iters);
    }
    ps.embedder_id = provider.embedder_id();

    std::vector<std::vector<Posting>> buckets(static_cast<std::size_t>(ps.k_p()));
    for (std::size_t i = 0; i < questions.size(); ++i) {
        const int pid = quantize(vectors[i], ps);
        if (opts.assignment_log) opts.assignment_log->emplace_back(questions[i].question_id, pid);
        buckets[static_cast<std::size_t>(pid)].push_back(
            {questions[i].question_id, questions[i].chunk_id, questions[i].text, std::move(vectors[i])});
    }
    for (auto& b : buckets) {
        std::sort(b.begin(), b.end(), [](const Posting& a, const Posting& c) { return a.question_id < c.question_id; });
    }

    std::vector<ChunkVector> chunk_vectors;
    if (opts.embed_chunks && !chunks.empty()) {
        std::vector<std::string> chunk_texts;
        chunk_texts.reserve(chunks.size());
        for (const auto& c : chunks) chunk_texts.push_back(c.text);
        auto cv = embed_all(chunk_texts, provider, opts.embed_batch);
        for (std::size_t i = 0; i < chunks.size(); ++i) chunk_vectors.push_back({chunks[i].chunk_id, std::move(cv[i])});
    }

    IndexHeader header;
    header.version = kIndexVersion;
    header.dim = provider.dim();
    header.k_p = ps.k_p();
    header.embedder_id = provider.embedder_id();
    header.built_at = opts.built_at.empty() ? build_timestamp() : opts.built_at;
    header.corpus_path = opts.corpus_path;
    return InvertedIndex(std::move(header), std::move(ps), std::move(buckets), std::move(chunk_vectors));
}

namespace {

constexpr std::size_t kTrailerSize = 15;  // "crc32 " + 8 hex + '\n'

void put_floats(std::string& out, std::span<const float> values) {
    for (float f : values) {
        const auto bits = std::bit_cast<std::uint32_t>(f);
        out.push_back(static_cast<char>(bits & 0xFF));
        out.push_back(static_cast<char>((bits >> 8) & 0xFF));
        out.push_back(static_cast<char>((bits >> 16) & 0xFF));
        out.push_back(static_cast<char>((bits >> 24) & 0xFF));
    }
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::string_view line() {
        auto nl = bytes_.find('\n', pos_);
        if (nl == std::string_view::npos) throw Error(Errc::FormatError, "index: missing line terminator");
        auto out = bytes_.substr(pos_, nl - pos_);
        pos_ = nl + 1;
        return out;
    }

    std::vector<float> floats(std::size_t count) {
        if (count > (bytes_.size() - pos_) / 4) throw Error(Errc::FormatError, "index: vector block truncated");
        std::vector<float> out(count);
        for (std::size_t i = 0; i < count; ++i) {
            std::uint32_t bits = 0;
            for (int b = 3; b >= 0; --b) {
                bits = (bits << 8) | static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(b)]);
            }
            out[i] = std::bit_cast<float>(bits);
            pos_ += 4;
        }
        return out;
    }

    std::vector<EmbeddingVector> vectors(std::size_t count, std::size_t dim) {
        std::vector<EmbeddingVector> out;
        out.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            try {
                out.push_back(EmbeddingVector::from_unit(floats(dim)));
            } catch (const Error& e) {
                if (e.code() != Errc::InvalidVector) throw;
                throw Error(Errc::FormatError, std::string("index: ") + e.what());
            }
        }
        return out;
    }

    std::size_t pos() const noexcept { return pos_; }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::string_view data) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in slices.
    std::size_t off = 0;
    while (off < data.size()) {
        const auto n = static_cast<uInt>(std::min<std::size_t>(data.size() - off, 1u << 30));
        crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data() + off), n);
        off += n;
    }
    return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string serialize_index(const InvertedIndex& index) {
    const auto& h = index.header();
    json header = {{"format", kIndexFormat},
                   {"version", h.version},
                   {"dim", h.dim},
                   {"k_p", h.k_p},
                   {"embedder_id", h.embedder_id},
                   {"built_at", h.built_at},
                   {"corpus_path", h.corpus_path},
                   {"seed", index.prototypes().seed},
                   {"num_chunk_vectors", index.chunk_vectors().size()}};
    json sizes = json::array();
    for (const auto& b : index.buckets()) sizes.push_back(b.size());
    header["bucket_sizes"] = std::move(sizes);

    std::string out = header.dump();
    out += '\n';
    for (const auto& p : index.prototypes().prototypes) put_floats(out, p.vector.values());
    for (const auto& b : index.buckets()) {
        for (const auto& p : b) put_floats(out, p.vector.values());
    }
    for (const auto& c : index.chunk_vectors()) put_floats(out, c.vector.values());

    json postings = json::array();
    for (const auto& b : index.buckets()) {
        for (const auto& p : b) {
            postings.push_back({{"question_id", p.question_id}, {"chunk_id", p.chunk_id}, {"text", p.question_text}});
        }
    }
    json chunk_ids = json::array();
    for (const auto& c : index.chunk_vectors()) chunk_ids.push_back(c.chunk_id);
    out += json{{"postings", std::move(postings)}, {"chunks", std::move(chunk_ids)}}.dump();
    out += '\n';

    char trailer[kTrailerSize + 1];
    std::snprintf(trailer, sizeof trailer, "crc32 %08x\n", crc_of(out));
    out.append(trailer, kTrailerSize);
    return out;
}

InvertedIndex deserialize_index(std::string_view bytes) {
    if (bytes.find('\n') == std::string_view::npos) throw Error(Errc::ChecksumError, "index file truncated");
    Reader reader(bytes);
    json header = json::parse(reader.line(), nullptr, false);
    if (header.is_discarded() || !header.is_object() || header.value("format", "") != kIndexFormat) {
        throw Error(Errc::FormatError, "not a quim index file");
    }
    if (!header.contains("version") || !header["version"].is_number_integer()) {
        throw Error(Errc::FormatError, "index header lacks integer version");
    }
    if (header["version"].get<int>() != kIndexVersion) {
        throw Error(Errc::VersionMismatch, "index version " + header["version"].dump() + ", expected " +
                                               std::to_string(kIndexVersion));
    }

    if (bytes.size() < kTrailerSize || bytes.substr(bytes.size() - kTrailerSize, 6) != "crc32 " ||
        bytes.back() != '\n') {
        throw Error(Errc::ChecksumError, "index trailer missing (file truncated?)");
    }
    const std::string hex(bytes.substr(bytes.size() - kTrailerSize + 6, 8));
    char* end = nullptr;
    const auto stored = static_cast<std::uint32_t>(std::strtoul(hex.c_str(), &end, 16));
    if (end != hex.c_str() + 8 || stored != crc_of(bytes.substr(0, bytes.size() - kTrailerSize))) {
        throw Error(Errc::ChecksumError, "index checksum mismatch");
    }

    IndexHeader h;
    std::vector<std::size_t> sizes;
    std::size_t num_chunks = 0;
    std::uint64_t seed = 0;
    try {
        h.version = header.at("version").get<int>();
        h.dim = header.at("dim").get<std::size_t>();
        h.k_p = header.at("k_p").get<int>();
        h.embedder_id = header.at("embedder_id").get<std::string>();
        h.built_at = header.at("built_at").get<std::string>();
        h.corpus_path = header.at("corpus_path").get<std::string>();
        seed = header.at("seed").get<std::uint64_t>();
        num_chunks = header.at("num_chunk_vectors").get<std::size_t>();
        sizes = header.at("bucket_sizes").get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
        throw Error(Errc::FormatError, std::string("index header: ") + e.what());
    }
    if (h.dim == 0 || h.k_p < 1 || sizes.size() != static_cast<std::size_t>(h.k_p)) {
        throw Error(Errc::FormatError, "index header is inconsistent");
    }

    PrototypeSet ps;
    ps.embedder_id = h.embedder_id;
    ps.seed = seed;
    auto protos = reader.vectors(static_cast<std::size_t>(h.k_p), h.dim);
    for (std::size_t i = 0; i < protos.size(); ++i) ps.prototypes.push_back({static_cast<int>(i), std::move(protos[i])});

    std::size_t total = 0;
    for (auto s : sizes) total += s;
    auto posting_vectors = reader.vectors(total, h.dim);
    auto chunk_vecs = reader.vectors(num_chunks, h.dim);

    json directory = json::parse(reader.line(), nullptr, false);
    if (directory.is_discarded() || !directory.contains("postings") || !directory.contains("chunks") ||
        directory["postings"].size() != total || directory["chunks"].size() != num_chunks) {
        throw Error(Errc::FormatError, "index directory does not match vector blocks");
    }
    if (reader.pos() != bytes.size() - kTrailerSize) throw Error(Errc::FormatError, "unexpected bytes before trailer");

    std::vector<std::vector<Posting>> buckets(sizes.size());
    std::size_t k = 0;
    try {
        for (std::size_t b = 0; b < sizes.size(); ++b) {
            for (std::size_t i = 0; i < sizes[b]; ++i, ++k) {
                const auto& entry = directory["postings"][k];
                buckets[b].push_back({entry.at("question_id").get<std::string>(), entry.at("chunk_id").get<std::string>(),
                                      entry.at("text").get<std::string>(), std::move(posting_vectors[k])});
            }
        }
    } catch (const json::exception& e) {
        throw Error(Errc::FormatError, std::string("index directory: ") + e.what());
    }
    std::vector<ChunkVector> chunk_vectors;
    for (std::size_t i = 0; i < num_chunks; ++i) {
        if (!directory["chunks"][i].is_string()) throw Error(Errc::FormatError, "index directory: bad chunk id");
        chunk_vectors.push_back({directory["chunks"][i].get<std::string>(), std::move(chunk_vecs[i])});
    }
    return InvertedIndex(std::move(h), std::move(ps), std::move(buckets), std::move(chunk_vectors));
}

void save_index(const InvertedIndex& index, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_index(index));
}

InvertedIndex load_index(const std::filesystem::path& path) { return deserialize_index(read_file(path)); }

}  // namespace quim
