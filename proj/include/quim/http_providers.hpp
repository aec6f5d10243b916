#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quim/embedding.hpp"
#include "quim/generation.hpp"
#include "quim/ingest.hpp"
#include "quim/question_gen.hpp"

namespace quim {

struct HttpEndpoint {
    std::string url;
    std::string api_key;  // sent as a Bearer token when non-empty
    int timeout_seconds = 120;
};

/// Reads the endpoint URL and key from the named environment variables.
/// Throws ConfigError when the URL variable is unset.
HttpEndpoint endpoint_from_env(const char* url_var, const char* key_var);

/// POSTs JSON and parses the JSON reply. Throws ProviderError on transport
/// failure, a non-2xx status or an unparsable body.
nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body);

/// POST {"texts": [...]} -> {"vectors": [[...], ...]}; replies are L2-normalized.
class HttpEmbedder final : public EmbedderProvider {
public:
    HttpEmbedder(HttpEndpoint endpoint, std::size_t dim, std::string embedder_id);

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) const override;
    std::size_t dim() const override { return dim_; }
    std::string embedder_id() const override { return id_; }

private:
    HttpEndpoint endpoint_;
    std::size_t dim_;
    std::string id_;
};

/// POST {"prompt", "max_tokens"} -> {"text"} or {"choices": [{"text"}]}.
class HttpLlm final : public LlmProvider {
public:
    HttpLlm(HttpEndpoint endpoint, std::size_t context_limit = 8000);

    std::string complete(const std::string& prompt, int max_tokens) const override;
    std::string provider_id() const override { return "http:" + endpoint_.url; }
    std::size_t context_limit_tokens() const override { return limit_; }

private:
    HttpEndpoint endpoint_;
    std::size_t limit_;
};

/// Question generation through an HTTP LLM; one question per reply line.
class HttpGenerator final : public GeneratorProvider {
public:
    explicit HttpGenerator(HttpEndpoint endpoint, int max_tokens = 1024);

    std::vector<std::string> generate(const std::string& prompt) const override;
    std::string provider_id() const override { return llm_.provider_id(); }

private:
    HttpLlm llm_;
    int max_tokens_;
};

/// GET with redirects; only 200 responses with an HTML content type count.
class HttpFetcher final : public PageFetcher {
public:
    explicit HttpFetcher(int timeout_seconds = 20) : timeout_(timeout_seconds) {}
    std::optional<FetchedPage> fetch(const std::string& url) const override;

private:
    int timeout_;
};

/// Provider selection shared by the CLI and the service.
struct ProviderSettings {
    std::string embedder = "hash";  // hash | http
    std::size_t dim = 512;
    std::uint64_t embed_seed = 0;
    std::string llm = "mock";  // mock | http
};

/// Embedder that can query an index built with `embedder_id`: hash ids are
/// rebuilt locally, anything else goes to QUIM_EMBED_ENDPOINT.
std::shared_ptr<const EmbedderProvider> embedder_for_index(const std::string& embedder_id, std::size_t dim);

/// Embedder for building a new index.
std::shared_ptr<const EmbedderProvider> make_embedder(const ProviderSettings& s);

/// "mock" is the extractive offline LLM; "http" uses QUIM_LLM_ENDPOINT.
std::shared_ptr<const LlmProvider> make_llm(const std::string& kind, const std::string& refusal_text);

/// "mock" is the template generator; "http" uses QUIM_LLM_ENDPOINT.
std::shared_ptr<const GeneratorProvider> make_generator(const std::string& kind, std::uint64_t seed);

}  // namespace quim
