#include "quim/http_providers.hpp"

#include <cstdlib>

#include <httplib.h>

#include "quim/error.hpp"

namespace quim {

namespace {

std::string env_or(const char* name, std::string fallback = {}) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

std::unique_ptr<httplib::Client> make_client(const UrlParts& u, int timeout_seconds) {
    auto cli = std::make_unique<httplib::Client>(u.scheme + "://" + u.host);
    cli->set_connection_timeout(timeout_seconds, 0);
    cli->set_read_timeout(timeout_seconds, 0);
    cli->set_write_timeout(timeout_seconds, 0);
    cli->set_follow_location(true);
    return cli;
}

}  // namespace

HttpEndpoint endpoint_from_env(const char* url_var, const char* key_var) {
    HttpEndpoint e;
    e.url = env_or(url_var);
    if (e.url.empty()) throw Error(Errc::ConfigError, std::string(url_var) + " is not set");
    e.api_key = env_or(key_var);
    return e;
}

nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body) {
    const auto u = parse_url(endpoint.url);
    if (!u || (u->scheme != "http" && u->scheme != "https")) {
        throw Error(Errc::ConfigError, "endpoint is not an http(s) URL: " + endpoint.url);
    }
    auto cli = make_client(*u, endpoint.timeout_seconds);
    httplib::Headers headers;
    if (!endpoint.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint.api_key);
    auto res = cli->Post(u->path, headers, body.dump(), "application/json");
    if (!res) throw Error(Errc::ProviderError, endpoint.url + ": " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) {
        throw Error(Errc::ProviderError, endpoint.url + ": HTTP " + std::to_string(res->status));
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ProviderError, endpoint.url + ": invalid JSON reply: " + e.what());
    }
}

HttpEmbedder::HttpEmbedder(HttpEndpoint endpoint, std::size_t dim, std::string embedder_id)
    : endpoint_(std::move(endpoint)), dim_(dim), id_(std::move(embedder_id)) {
    if (dim_ == 0) throw Error(Errc::ConfigError, "embedding dimension must be positive");
}

std::vector<EmbeddingVector> HttpEmbedder::embed(const std::vector<std::string>& texts) const {
    const auto reply = post_json(endpoint_, {{"texts", texts}});
    std::vector<std::vector<float>> raw;
    try {
        raw = reply.at("vectors").get<std::vector<std::vector<float>>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ProviderError, "embedder reply lacks vectors: " + std::string(e.what()));
    }
    if (raw.size() != texts.size()) {
        throw Error(Errc::ProviderError, "embedder returned " + std::to_string(raw.size()) + " vectors for " +
                                             std::to_string(texts.size()) + " texts");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(raw.size());
    for (const auto& r : raw) {
        if (r.size() != dim_) {
            throw Error(Errc::DimMismatch, "embedder returned dim " + std::to_string(r.size()) + ", expected " +
                                               std::to_string(dim_));
        }
        out.push_back(EmbeddingVector::normalized(std::span<const float>(r)));
    }
    return out;
}

HttpLlm::HttpLlm(HttpEndpoint endpoint, std::size_t context_limit)
    : endpoint_(std::move(endpoint)), limit_(context_limit) {}

std::string HttpLlm::complete(const std::string& prompt, int max_tokens) const {
    const auto reply = post_json(endpoint_, {{"prompt", prompt}, {"max_tokens", max_tokens}});
    if (reply.contains("text") && reply["text"].is_string()) return reply["text"].get<std::string>();
    if (reply.contains("choices") && reply["choices"].is_array() && !reply["choices"].empty()) {
        const auto& c = reply["choices"][0];
        if (c.contains("text") && c["text"].is_string()) return c["text"].get<std::string>();
    }
    throw Error(Errc::ProviderError, "LLM reply has no text");
}

HttpGenerator::HttpGenerator(HttpEndpoint endpoint, int max_tokens)
    : llm_(std::move(endpoint)), max_tokens_(max_tokens) {}

std::vector<std::string> HttpGenerator::generate(const std::string& prompt) const {
    return parse_question_lines(llm_.complete(prompt, max_tokens_));
}

std::optional<FetchedPage> HttpFetcher::fetch(const std::string& url) const {
    const auto u = parse_url(url);
    if (!u || (u->scheme != "http" && u->scheme != "https")) return std::nullopt;
    auto cli = make_client(*u, timeout_);
    auto res = cli->Get(u->path, {{"User-Agent", "quim/0.1"}});
    if (!res || res->status != 200) return std::nullopt;
    const auto type = res->get_header_value("Content-Type");
    if (!type.empty() && type.find("html") == std::string::npos) return std::nullopt;
    FetchedPage p;
    p.url = res->location.empty() ? url : resolve_url(url, res->location);
    p.body = std::move(res->body);
    return p;
}

std::shared_ptr<const EmbedderProvider> embedder_for_index(const std::string& embedder_id, std::size_t dim) {
    if (auto h = hash_embedder_from_id(embedder_id)) return std::shared_ptr<const EmbedderProvider>(std::move(h));
    auto ep = endpoint_from_env("QUIM_EMBED_ENDPOINT", "QUIM_EMBED_API_KEY");
    return std::make_shared<HttpEmbedder>(std::move(ep), dim, embedder_id);
}

std::shared_ptr<const EmbedderProvider> make_embedder(const ProviderSettings& s) {
    if (s.embedder == "hash") return std::shared_ptr<const EmbedderProvider>(test_embedder(s.dim, s.embed_seed));
    if (s.embedder == "http") {
        auto ep = endpoint_from_env("QUIM_EMBED_ENDPOINT", "QUIM_EMBED_API_KEY");
        const std::string id = "http:" + env_or("QUIM_EMBED_MODEL", ep.url);
        return std::make_shared<HttpEmbedder>(std::move(ep), s.dim, id);
    }
    throw Error(Errc::ConfigError, "unknown embedder '" + s.embedder + "' (expected hash or http)");
}

std::shared_ptr<const LlmProvider> make_llm(const std::string& kind, const std::string& refusal_text) {
    if (kind == "mock") return std::make_shared<ExtractiveLlm>(refusal_text);
    if (kind == "http") {
        const auto limit = std::strtoull(env_or("QUIM_LLM_CONTEXT_TOKENS", "8000").c_str(), nullptr, 10);
        return std::make_shared<HttpLlm>(endpoint_from_env("QUIM_LLM_ENDPOINT", "QUIM_LLM_API_KEY"),
                                         limit ? limit : 8000);
    }
    throw Error(Errc::ConfigError, "unknown LLM provider '" + kind + "' (expected mock or http)");
}

std::shared_ptr<const GeneratorProvider> make_generator(const std::string& kind, std::uint64_t seed) {
    if (kind == "mock") return std::make_shared<TemplateQuestionGenerator>(seed);
    if (kind == "http") return std::make_shared<HttpGenerator>(endpoint_from_env("QUIM_LLM_ENDPOINT", "QUIM_LLM_API_KEY"));
    throw Error(Errc::ConfigError, "unknown question provider '" + kind + "' (expected mock or http)");
}

}  // namespace quim
