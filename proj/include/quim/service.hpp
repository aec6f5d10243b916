#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quim/generation.hpp"
#include "quim/qindex.hpp"
#include "quim/retrieval.hpp"

namespace httplib {
class Server;
}

namespace quim {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string index_path;
    std::string corpus_path;  // empty: the chunks file recorded in the index
    int top_k = 3;
    int n_probe = 1;
    std::vector<std::string> cors_allowed_origins;
    std::string llm = "mock";
    int llm_max_in_flight = 4;
    int max_tokens = 512;
    std::string rag_prompt_path;  // empty: built-in prompt
    std::string refusal_text;     // empty: built-in refusal sentence
    int threads = 8;
    std::string reload_token;  // from QUIM_RELOAD_TOKEN only; empty disables /v1/admin/reload
};

/// Reads a flat config file (relative paths resolve against its directory)
/// and QUIM_RELOAD_TOKEN. Throws ConfigError for unknown keys, wrong value
/// types, or secrets placed in the file.
ServiceConfig load_service_config(const std::filesystem::path& path);
ServiceConfig service_config_from(const std::map<std::string, nlohmann::json>& values,
                                  const std::filesystem::path& base_dir = {});

/// Immutable state a request reads: index, chunks and the query embedder.
struct Snapshot {
    InvertedIndex index;
    ChunkStore store;
    std::shared_ptr<const EmbedderProvider> embedder;
};

/// Chunks file recorded in an index header; a relative path is taken
/// relative to the index file's directory.
std::string index_corpus_path(const std::string& index_path, const IndexHeader& header);

using EmbedderFactory = std::function<std::shared_ptr<const EmbedderProvider>(const IndexHeader&)>;

/// Loads index and chunks and checks that every posting's chunk exists and
/// that the embedder matches the index. Throws on any failure.
std::shared_ptr<const Snapshot> load_snapshot(const std::string& index_path, const std::string& corpus_path,
                                              const EmbedderFactory& embedders);

struct HttpReply {
    int status = 200;
    nlohmann::json body;
};

/// The JSON API. Requests read whichever snapshot is current when they start;
/// reload() swaps in a new one without disturbing requests in flight.
class Service {
public:
    Service(ServiceConfig config, std::shared_ptr<const LlmProvider> llm, EmbedderFactory embedders = {});

    /// Loads the configured index; on failure the service stays up and
    /// answers 503. Returns the error message, empty on success.
    std::string load();

    /// Replaces the snapshot; the old one stays in place if loading fails.
    std::string reload();

    std::shared_ptr<const Snapshot> snapshot() const;
    void set_snapshot(std::shared_ptr<const Snapshot> s);

    const ServiceConfig& config() const noexcept { return config_; }
    const RagPrompt& prompt() const noexcept { return prompt_; }

    HttpReply query(const std::string& body) const;
    HttpReply health() const;
    HttpReply chunk(const std::string& chunk_id) const;
    HttpReply admin_reload(const std::string& token);

    /// True if `origin` is one of the configured CORS origins.
    bool origin_allowed(const std::string& origin) const;

    /// Registers the routes and CORS handling on `server`.
    void mount(httplib::Server& server);

private:
    ServiceConfig config_;
    std::shared_ptr<const LlmProvider> llm_;
    EmbedderFactory embedders_;
    RagPrompt prompt_;
    WhitespaceTokenizer tokenizer_;

    mutable std::mutex snap_mu_;
    std::shared_ptr<const Snapshot> snap_;
    std::mutex reload_mu_;
};

/// Blocks serving `service` on host:port until stop_serving() or SIGINT/SIGTERM.
/// SIGHUP triggers a reload.
int serve(Service& service);
void stop_serving();

}  // namespace quim
