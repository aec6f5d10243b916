#include "quim/service.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "quim/config.hpp"
#include "quim/corpus.hpp"
#include "quim/error.hpp"
#include "quim/http_providers.hpp"

namespace quim {

namespace fs = std::filesystem;

namespace {

template <class T>
T config_value(const std::string& key, const nlohmann::json& v) {
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(Errc::ConfigError, "config key '" + key + "' has the wrong type");
    }
}

std::string resolve_path(const fs::path& base, const std::string& p) {
    if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
    return (base / p).lexically_normal().string();
}

nlohmann::json error_body(const std::string& cls, const std::string& message) {
    return {{"error", cls}, {"message", message}};
}

HttpReply bad_request(const std::string& message) { return {400, error_body("InvalidArgument", message)}; }

int status_for(Errc code) {
    switch (code) {
        case Errc::ProviderError:
        case Errc::DimMismatch:
        case Errc::InvalidVector:
        case Errc::ContextOverflow:
            return 502;
        case Errc::InvalidArgument:
        case Errc::EmptyText:
            return 400;
        default:
            return 500;
    }
}

std::atomic<bool> g_stop{false};
std::atomic<bool> g_reload{false};

extern "C" void on_signal(int sig) {
    if (sig == SIGHUP) {
        g_reload = true;
    } else {
        g_stop = true;
    }
}

}  // namespace

ServiceConfig service_config_from(const std::map<std::string, nlohmann::json>& values, const fs::path& base_dir) {
    ServiceConfig c;
    for (const auto& [key, v] : values) {
        if (key == "host") c.host = config_value<std::string>(key, v);
        else if (key == "port") c.port = config_value<int>(key, v);
        else if (key == "index_path") c.index_path = resolve_path(base_dir, config_value<std::string>(key, v));
        else if (key == "corpus_path") c.corpus_path = resolve_path(base_dir, config_value<std::string>(key, v));
        else if (key == "top_k") c.top_k = config_value<int>(key, v);
        else if (key == "n_probe") c.n_probe = config_value<int>(key, v);
        else if (key == "cors_allowed_origins") c.cors_allowed_origins = config_value<std::vector<std::string>>(key, v);
        else if (key == "llm") c.llm = config_value<std::string>(key, v);
        else if (key == "llm_max_in_flight") c.llm_max_in_flight = config_value<int>(key, v);
        else if (key == "max_tokens") c.max_tokens = config_value<int>(key, v);
        else if (key == "rag_prompt_path") c.rag_prompt_path = resolve_path(base_dir, config_value<std::string>(key, v));
        else if (key == "refusal_text") c.refusal_text = config_value<std::string>(key, v);
        else if (key == "threads") c.threads = config_value<int>(key, v);
        else if (key.find("token") != std::string::npos || key.find("key") != std::string::npos ||
                 key.find("secret") != std::string::npos) {
            throw Error(Errc::ConfigError, "'" + key + "' looks like a secret; secrets are read from the environment");
        } else {
            throw Error(Errc::ConfigError, "unknown config key '" + key + "'");
        }
    }
    if (c.port < 0 || c.port > 65535) throw Error(Errc::ConfigError, "port out of range");
    if (c.top_k < 1 || c.n_probe < 1) throw Error(Errc::ConfigError, "top_k and n_probe must be >= 1");
    if (c.llm_max_in_flight < 1 || c.threads < 1 || c.max_tokens < 1) {
        throw Error(Errc::ConfigError, "llm_max_in_flight, threads and max_tokens must be >= 1");
    }
    if (const char* t = std::getenv("QUIM_RELOAD_TOKEN")) c.reload_token = t;
    return c;
}

ServiceConfig load_service_config(const fs::path& path) {
    return service_config_from(read_flat_config(path), path.parent_path());
}

std::string index_corpus_path(const std::string& index_path, const IndexHeader& header) {
    if (header.corpus_path.empty()) return {};
    const fs::path p(header.corpus_path);
    if (p.is_absolute()) return p.string();
    return (fs::path(index_path).parent_path() / p).lexically_normal().string();
}

std::shared_ptr<const Snapshot> load_snapshot(const std::string& index_path, const std::string& corpus_path,
                                              const EmbedderFactory& embedders) {
    auto snap = std::make_shared<Snapshot>();
    snap->index = load_index(index_path);
    const std::string chunks_path = corpus_path.empty() ? index_corpus_path(index_path, snap->index.header()) : corpus_path;
    if (chunks_path.empty()) throw Error(Errc::ConfigError, "index records no chunks file and none was given");
    snap->store = ChunkStore(read_corpus(chunks_path).chunks);
    for (const auto& bucket : snap->index.buckets()) {
        for (const auto& p : bucket) {
            if (!snap->store.find(p.chunk_id)) {
                throw Error(Errc::ReferentialIntegrity, "indexed chunk " + p.chunk_id + " missing from " + chunks_path);
            }
        }
    }
    snap->embedder = embedders(snap->index.header());
    if (snap->embedder->embedder_id() != snap->index.header().embedder_id) {
        throw Error(Errc::EmbedderMismatch, "index built with " + snap->index.header().embedder_id +
                                                ", service embedder is " + snap->embedder->embedder_id());
    }
    return snap;
}

Service::Service(ServiceConfig config, std::shared_ptr<const LlmProvider> llm, EmbedderFactory embedders)
    : config_(std::move(config)),
      llm_(std::make_shared<BoundedLlm>(std::move(llm), static_cast<std::size_t>(config_.llm_max_in_flight))),
      embedders_(std::move(embedders)) {
    if (!embedders_) {
        embedders_ = [](const IndexHeader& h) { return embedder_for_index(h.embedder_id, h.dim); };
    }
    const RagPrompt builtin = RagPrompt::default_prompt();
    const std::string refusal = config_.refusal_text.empty() ? builtin.refusal_text : config_.refusal_text;
    prompt_ = config_.rag_prompt_path.empty() ? RagPrompt{builtin.template_text, refusal}
                                              : RagPrompt::from_file(config_.rag_prompt_path, refusal);
}

std::string Service::load() {
    try {
        set_snapshot(load_snapshot(config_.index_path, config_.corpus_path, embedders_));
        return {};
    } catch (const std::exception& e) {
        return e.what();
    }
}

std::string Service::reload() {
    std::lock_guard lock(reload_mu_);
    return load();
}

std::shared_ptr<const Snapshot> Service::snapshot() const {
    std::lock_guard lock(snap_mu_);
    return snap_;
}

void Service::set_snapshot(std::shared_ptr<const Snapshot> s) {
    std::lock_guard lock(snap_mu_);
    snap_ = std::move(s);
}

HttpReply Service::query(const std::string& body) const {
    nlohmann::json req;
    try {
        req = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
        return bad_request("request body is not valid JSON");
    }
    if (!req.is_object()) return bad_request("request body must be a JSON object");
    if (!req.contains("question") || !req["question"].is_string() || trim(req["question"].get<std::string>()).empty()) {
        return bad_request("question must be a non-empty string");
    }
    Query q{req["question"].get<std::string>(), config_.top_k, config_.n_probe};
    for (const auto& [key, target] : {std::pair{"k", &q.top_k}, std::pair{"n_probe", &q.n_probe}}) {
        if (!req.contains(key) || req[key].is_null()) continue;
        if (!req[key].is_number_integer() || req[key].get<long long>() < 1 || req[key].get<long long>() > 1000) {
            return bad_request(std::string(key) + " must be an integer between 1 and 1000");
        }
        *target = req[key].get<int>();
    }
    bool baseline = false;
    if (req.contains("baseline") && !req["baseline"].is_null()) {
        if (!req["baseline"].is_boolean()) return bad_request("baseline must be a boolean");
        baseline = req["baseline"].get<bool>();
    }

    const auto snap = snapshot();
    if (!snap) return {503, error_body("IndexNotLoaded", "index is not loaded")};
    try {
        const ContextBundle bundle = baseline ? baseline_retrieve(q, snap->index, snap->store, *snap->embedder)
                                              : match_query(q, snap->index, snap->store, *snap->embedder);
        const Answer a = generate_answer(bundle, q.text, *llm_, prompt_, tokenizer_, {config_.max_tokens});
        nlohmann::json matched = nlohmann::json::array();
        for (const auto& m : a.matched_questions) {
            matched.push_back({{"question_id", m.question_id}, {"text", m.question_text}, {"score", m.score}, {"chunk_id", m.chunk_id}});
        }
        nlohmann::json chunks = nlohmann::json::array();
        for (const auto& c : bundle.chunks) {
            chunks.push_back({{"chunk_id", c.chunk_id}, {"text", c.text}, {"source_url", c.source_url}, {"score", c.score}});
        }
        return {200,
                {{"answer", a.text},
                 {"refused", a.refused},
                 {"sources", a.sources},
                 {"matched_questions", std::move(matched)},
                 {"chunks", std::move(chunks)},
                 {"pipeline", baseline ? "baseline" : "quim"}}};
    } catch (const Error& e) {
        return {status_for(e.code()), error_body(std::string(to_string(e.code())), e.what())};
    } catch (const std::exception& e) {
        return {500, error_body("InternalError", e.what())};
    }
}

HttpReply Service::health() const {
    const auto snap = snapshot();
    if (!snap) return {503, {{"status", "unavailable"}}};
    const auto& h = snap->index.header();
    return {200,
            {{"status", "ok"},
             {"index_version", h.version},
             {"embedder_id", h.embedder_id},
             {"questions_indexed", snap->index.num_questions()},
             {"prototypes", h.k_p},
             {"chunks", snap->store.size()},
             {"built_at", h.built_at}}};
}

HttpReply Service::chunk(const std::string& chunk_id) const {
    const auto snap = snapshot();
    if (!snap) return {503, error_body("IndexNotLoaded", "index is not loaded")};
    const Chunk* c = snap->store.find(chunk_id);
    if (!c) return {404, error_body("NotFound", "no chunk " + chunk_id)};
    return {200,
            {{"chunk_id", c->chunk_id},
             {"doc_id", c->doc_id},
             {"seq", c->seq},
             {"text", c->text},
             {"token_count", c->token_count},
             {"source_url", c->source_url}}};
}

HttpReply Service::admin_reload(const std::string& token) {
    if (config_.reload_token.empty()) return {403, error_body("Forbidden", "reload endpoint is disabled")};
    if (token != config_.reload_token) return {401, error_body("Unauthorized", "bad reload token")};
    const std::string err = reload();
    if (!err.empty()) return {500, error_body("ReloadFailed", err)};
    return {200, {{"reloaded", true}, {"questions_indexed", snapshot()->index.num_questions()}}};
}

bool Service::origin_allowed(const std::string& origin) const {
    return std::find(config_.cors_allowed_origins.begin(), config_.cors_allowed_origins.end(), origin) !=
           config_.cors_allowed_origins.end();
}

void Service::mount(httplib::Server& server) {
    auto send = [](httplib::Response& res, const HttpReply& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    server.Post("/v1/query", [this, send](const httplib::Request& req, httplib::Response& res) { send(res, query(req.body)); });
    server.Get("/v1/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
    server.Get(R"(/v1/chunks/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, chunk(req.matches[1]));
    });
    server.Post("/v1/admin/reload", [this, send](const httplib::Request& req, httplib::Response& res) {
        std::string token = req.get_header_value("X-Reload-Token");
        const auto auth = req.get_header_value("Authorization");
        if (token.empty() && auth.rfind("Bearer ", 0) == 0) token = auth.substr(7);
        const auto r = admin_reload(token);
        spdlog::info("reload requested: status {}", r.status);
        send(res, r);
    });
    server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.set_post_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
        const auto origin = req.get_header_value("Origin");
        if (origin.empty() || !origin_allowed(origin)) return;
        res.set_header("Access-Control-Allow-Origin", origin);
        res.set_header("Vary", "Origin");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type, Authorization, X-Reload-Token");
    });
}

int serve(Service& service) {
    httplib::Server server;
    const auto threads = static_cast<std::size_t>(service.config().threads);
    server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    service.mount(server);

    g_stop = false;
    g_reload = false;
    std::signal(SIGHUP, on_signal);
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    const auto& cfg = service.config();
    if (!server.bind_to_port(cfg.host, cfg.port)) {
        spdlog::error("cannot bind {}:{}", cfg.host, cfg.port);
        return 1;
    }
    std::thread listener([&] { server.listen_after_bind(); });
    spdlog::info("listening on {}:{}", cfg.host, cfg.port);
    while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        if (g_reload.exchange(false)) {
            const auto err = service.reload();
            if (err.empty()) spdlog::info("index reloaded");
            else spdlog::error("reload failed, keeping previous index: {}", err);
        }
    }
    server.stop();
    listener.join();
    spdlog::info("stopped");
    return 0;
}

void stop_serving() { g_stop = true; }

}  // namespace quim
