#include <atomic>
#include <thread>

#include <httplib.h>

#include "doctest.h"
#include "quim/corpus.hpp"
#include "quim/error.hpp"
#include "quim/jsonl.hpp"
#include "quim/service.hpp"
#include "support.hpp"

using namespace quim;

namespace {

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return Errc::InvalidArgument;
}

const std::vector<std::string> kVocab{"office", "ceres", "hall", "printing", "commons", "floor", "located", "parking"};

class BrokenLlm final : public LlmProvider {
public:
    std::string complete(const std::string&, int) const override { throw Error(Errc::ProviderError, "upstream 500"); }
    std::string provider_id() const override { return "broken"; }
};

/// Two chunks, two questions, one bucket, written to disk.
struct SiteOnDisk {
    qtest::TempDir dir;
    std::shared_ptr<qtest::OneHotEmbedder> emb = std::make_shared<qtest::OneHotEmbedder>(kVocab);
    std::vector<Chunk> chunks{qtest::make_chunk("c1", "The office is in ceres hall.", "https://e.org/contact"),
                              qtest::make_chunk("c2", "Printing is on the commons floor.", "https://e.org/print")};

    SiteOnDisk() { write(2); }

    void write(std::size_t n_questions) {
        std::vector<Document> docs{{"d-c1", "https://e.org/contact", "Contact", chunks[0].text},
                                   {"d-c2", "https://e.org/print", "Print", chunks[1].text}};
        write_corpus(docs, chunks, dir / "chunks.jsonl");
        std::vector<GeneratedQuestion> qs{{"c1.q000", "c1", "office hall?", QuestionOrigin::Llm},
                                          {"c2.q000", "c2", "printing commons?", QuestionOrigin::Llm},
                                          {"c2.q001", "c2", "printing floor?", QuestionOrigin::Llm}};
        qs.resize(n_questions);
        BuildOptions opts;
        opts.k_p = 1;
        opts.built_at = "2024-01-01T00:00:00Z";
        opts.corpus_path = "chunks.jsonl";
        save_index(build_index(chunks, qs, *emb, opts), dir / "site.qidx");
    }

    ServiceConfig config() const {
        ServiceConfig c;
        c.index_path = (dir / "site.qidx").string();
        c.cors_allowed_origins = {"http://localhost:5173"};
        c.top_k = 2;
        return c;
    }

    EmbedderFactory factory() const {
        auto e = emb;
        return [e](const IndexHeader&) { return e; };
    }
};

}  // namespace

TEST_CASE("service config from a flat file") {
    qtest::TempDir dir;
    write_file_atomic(dir / "quim.toml",
                      "host = \"0.0.0.0\"\nport = 9090\nindex_path = \"data/site.qidx\"\n"
                      "cors_allowed_origins = [\"http://localhost:5173\"]\nn_probe = 2\n");
    unsetenv("QUIM_RELOAD_TOKEN");
    auto c = load_service_config(dir / "quim.toml");
    CHECK(c.host == "0.0.0.0");
    CHECK(c.port == 9090);
    CHECK(c.n_probe == 2);
    CHECK(c.top_k == 3);
    CHECK(c.index_path == (dir / "data/site.qidx").string());
    CHECK(c.cors_allowed_origins == std::vector<std::string>{"http://localhost:5173"});
    CHECK(c.reload_token.empty());

    setenv("QUIM_RELOAD_TOKEN", "s3cret", 1);
    CHECK(service_config_from({}).reload_token == "s3cret");
    unsetenv("QUIM_RELOAD_TOKEN");

    using V = std::map<std::string, nlohmann::json>;
    CHECK(code_of([] { service_config_from(V{{"colour", "blue"}}); }) == Errc::ConfigError);
    CHECK(code_of([] { service_config_from(V{{"reload_token", "x"}}); }) == Errc::ConfigError);
    CHECK(code_of([] { service_config_from(V{{"api_key", "x"}}); }) == Errc::ConfigError);
    CHECK(code_of([] { service_config_from(V{{"port", "80"}}); }) == Errc::ConfigError);
    CHECK(code_of([] { service_config_from(V{{"port", 70000}}); }) == Errc::ConfigError);
    CHECK(code_of([] { service_config_from(V{{"top_k", 0}}); }) == Errc::ConfigError);
}

TEST_CASE("query endpoint") {
    SiteOnDisk site;
    auto llm = std::make_shared<ExtractiveLlm>();
    Service svc(site.config(), llm, site.factory());

    CHECK(svc.query(R"({"question":"where is the office?"})").status == 503);
    CHECK(svc.health().status == 503);
    CHECK(svc.chunk("c1").status == 503);
    REQUIRE(svc.load().empty());

    SUBCASE("answer with sources") {
        auto r = svc.query(R"({"question":"Where is the office located?"})");
        REQUIRE(r.status == 200);
        CHECK(r.body["answer"] == "The office is in ceres hall.");
        CHECK(r.body["refused"] == false);
        CHECK(r.body["sources"] == nlohmann::json::array({"https://e.org/contact"}));
        CHECK(r.body["pipeline"] == "quim");
        REQUIRE(r.body["matched_questions"].size() == 1);
        CHECK(r.body["matched_questions"][0]["question_id"] == "c1.q000");
        CHECK(r.body["matched_questions"][0]["chunk_id"] == "c1");
        CHECK(r.body["chunks"][0]["text"] == site.chunks[0].text);
    }
    SUBCASE("baseline and per-request k") {
        auto r = svc.query(R"({"question":"office","baseline":true,"k":1})");
        REQUIRE(r.status == 200);
        CHECK(r.body["pipeline"] == "baseline");
        CHECK(r.body["chunks"].size() == 1);
        CHECK(r.body["matched_questions"].empty());
    }
    SUBCASE("question with no related stored question is refused without an llm call") {
        auto r = svc.query(R"({"question":"parking located?"})");
        REQUIRE(r.status == 200);
        CHECK(r.body["refused"] == true);
        CHECK(r.body["answer"] == RagPrompt::default_prompt().refusal_text);
        CHECK(r.body["sources"].empty());
        CHECK(r.body["chunks"].empty());
        CHECK(llm->calls() == 0);
    }
    SUBCASE("bad requests") {
        for (const char* body : {"", "not json", "[]", "{}", R"({"question":"   "})", R"({"question":7})",
                                 R"({"question":"office","k":0})", R"({"question":"office","k":1001})",
                                 R"({"question":"office","k":"3"})", R"({"question":"office","n_probe":1.5})",
                                 R"({"question":"office","baseline":"yes"})"}) {
            auto r = svc.query(body);
            CHECK_MESSAGE(r.status == 400, body);
            CHECK(r.body["error"] == "InvalidArgument");
        }
        CHECK(svc.query(R"({"question":"nothing known here"})").status == 400);
        CHECK(llm->calls() == 0);
    }
    SUBCASE("health and chunks") {
        auto h = svc.health();
        REQUIRE(h.status == 200);
        CHECK(h.body["status"] == "ok");
        CHECK(h.body["questions_indexed"] == 2);
        CHECK(h.body["prototypes"] == 1);
        CHECK(h.body["chunks"] == 2);
        CHECK(h.body["embedder_id"] == "onehot-8");
        CHECK(h.body["built_at"] == "2024-01-01T00:00:00Z");
        auto c = svc.chunk("c2");
        REQUIRE(c.status == 200);
        CHECK(c.body["text"] == site.chunks[1].text);
        CHECK(c.body["source_url"] == "https://e.org/print");
        CHECK(svc.chunk("c9").status == 404);
    }
}

TEST_CASE("provider failure maps to 502") {
    SiteOnDisk site;
    Service svc(site.config(), std::make_shared<BrokenLlm>(), site.factory());
    REQUIRE(svc.load().empty());
    auto r = svc.query(R"({"question":"office hall"})");
    CHECK(r.status == 502);
    CHECK(r.body["error"] == "ProviderError");
}

TEST_CASE("load failures leave the service unavailable") {
    SiteOnDisk site;
    auto cfg = site.config();
    cfg.index_path = (site.dir / "absent.qidx").string();
    Service svc(cfg, std::make_shared<ExtractiveLlm>(), site.factory());
    CHECK_FALSE(svc.load().empty());
    CHECK(svc.health().status == 503);

    Service wrong(site.config(), std::make_shared<ExtractiveLlm>(),
                  [](const IndexHeader&) { return std::make_shared<qtest::OneHotEmbedder>(std::vector<std::string>{"a"}); });
    CHECK(wrong.load().find("EmbedderMismatch") != std::string::npos);

    write_file_atomic(site.dir / "chunks.jsonl", read_file(site.dir / "chunks.jsonl").substr(0, 0));
    Service dangling(site.config(), std::make_shared<ExtractiveLlm>(), site.factory());
    CHECK_FALSE(dangling.load().empty());
}

TEST_CASE("admin reload") {
    SiteOnDisk site;
    unsetenv("QUIM_RELOAD_TOKEN");
    {
        Service svc(site.config(), std::make_shared<ExtractiveLlm>(), site.factory());
        REQUIRE(svc.load().empty());
        CHECK(svc.admin_reload("anything").status == 403);
    }
    auto cfg = site.config();
    cfg.reload_token = "t0ken";
    Service svc(cfg, std::make_shared<ExtractiveLlm>(), site.factory());
    REQUIRE(svc.load().empty());
    CHECK(svc.admin_reload("wrong").status == 401);
    CHECK(svc.admin_reload("").status == 401);

    site.write(3);
    auto r = svc.admin_reload("t0ken");
    REQUIRE(r.status == 200);
    CHECK(r.body["questions_indexed"] == 3);
    CHECK(svc.health().body["questions_indexed"] == 3);

    write_file_atomic(site.dir / "site.qidx", "garbage");
    CHECK(svc.admin_reload("t0ken").status == 500);
    CHECK(svc.health().body["questions_indexed"] == 3);
}

TEST_CASE("reload while queries are in flight") {
    SiteOnDisk site;
    Service svc(site.config(), std::make_shared<ExtractiveLlm>(), site.factory());
    REQUIRE(svc.load().empty());
    std::atomic<bool> done{false};
    std::atomic<int> bad{0};
    std::vector<std::thread> workers;
    for (int t = 0; t < 4; ++t) {
        workers.emplace_back([&] {
            while (!done) {
                auto r = svc.query(R"({"question":"Where is the office located?"})");
                if (r.status != 200 || r.body["answer"] != "The office is in ceres hall.") ++bad;
            }
        });
    }
    for (int i = 0; i < 20; ++i) CHECK(svc.reload().empty());
    done = true;
    for (auto& w : workers) w.join();
    CHECK(bad == 0);
}

TEST_CASE("http routes and cors") {
    SiteOnDisk site;
    auto cfg = site.config();
    cfg.reload_token = "t0ken";
    Service svc(cfg, std::make_shared<ExtractiveLlm>(), site.factory());
    REQUIRE(svc.load().empty());
    CHECK(svc.origin_allowed("http://localhost:5173"));
    CHECK_FALSE(svc.origin_allowed("http://evil.example"));

    httplib::Server server;
    svc.mount(server);
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client cli("127.0.0.1", port);
    auto r = cli.Post("/v1/query", {{"Origin", "http://localhost:5173"}}, R"({"question":"office hall"})",
                      "application/json");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(r->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
    CHECK(nlohmann::json::parse(r->body)["sources"][0] == "https://e.org/contact");

    r = cli.Post("/v1/query", {{"Origin", "http://evil.example"}}, R"({"question":"office hall"})", "application/json");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK_FALSE(r->has_header("Access-Control-Allow-Origin"));

    r = cli.Options("/v1/query", {{"Origin", "http://localhost:5173"}});
    REQUIRE(r);
    CHECK(r->status == 204);
    CHECK(r->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);

    r = cli.Post("/v1/query", "{", "application/json");
    REQUIRE(r);
    CHECK(r->status == 400);

    r = cli.Get("/v1/health");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(nlohmann::json::parse(r->body)["chunks"] == 2);

    r = cli.Get("/v1/chunks/c1");
    REQUIRE(r);
    CHECK(nlohmann::json::parse(r->body)["text"] == site.chunks[0].text);
    r = cli.Get("/v1/chunks/zzz");
    REQUIRE(r);
    CHECK(r->status == 404);

    r = cli.Post("/v1/admin/reload", {{"Authorization", "Bearer t0ken"}}, "", "application/json");
    REQUIRE(r);
    CHECK(r->status == 200);
    r = cli.Post("/v1/admin/reload", {{"X-Reload-Token", "nope"}}, "", "application/json");
    REQUIRE(r);
    CHECK(r->status == 401);

    server.stop();
    listener.join();
}
