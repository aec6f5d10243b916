#include <random>

#include "doctest.h"
#include "quim/error.hpp"
#include "quim/retrieval.hpp"
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

std::vector<std::string> ids_of(const ContextBundle& b) {
    std::vector<std::string> ids;
    for (const auto& m : b.matches) ids.push_back(m.question_id);
    return ids;
}

std::vector<std::string> chunk_ids_of(const ContextBundle& b) {
    std::vector<std::string> ids;
    for (const auto& c : b.chunks) ids.push_back(c.chunk_id);
    return ids;
}

void check_bundle_shape(const ContextBundle& b, int top_k) {
    CHECK(b.matches.size() <= static_cast<std::size_t>(top_k));
    for (std::size_t i = 1; i < b.matches.size(); ++i) CHECK(b.matches[i - 1].score >= b.matches[i].score);
    // Chunks: distinct, in order of first appearance among the matches.
    std::vector<std::string> expected;
    for (const auto& m : b.matches) {
        if (std::find(expected.begin(), expected.end(), m.chunk_id) == expected.end()) expected.push_back(m.chunk_id);
    }
    CHECK(chunk_ids_of(b) == expected);
}

struct Built {
    qtest::RandomCorpus rc;
    InvertedIndex index;
    ChunkStore store;
};

Built build_random(std::uint64_t seed, std::size_t n, std::size_t dim, int k_p) {
    Built b{qtest::random_corpus(seed, n, dim), {}, {}};
    BuildOptions opts;
    opts.k_p = k_p;
    opts.built_at = "2024-01-01T00:00:00Z";
    b.index = build_index(b.rc.chunks, b.rc.questions, *b.rc.embedder, opts);
    b.store = ChunkStore(b.rc.chunks);
    return b;
}

}  // namespace

TEST_CASE("a stored question matches itself first") {
    auto b = build_random(11, 80, 12, 6);
    for (std::size_t i = 0; i < b.rc.questions.size(); i += 7) {
        const auto& q = b.rc.questions[i];
        auto bundle = match_query({q.text, 3, 1}, b.index, b.store, *b.rc.embedder);
        REQUIRE_FALSE(bundle.matches.empty());
        CHECK(bundle.matches[0].question_id == q.question_id);
        CHECK(bundle.matches[0].question_text == q.text);
        CHECK(bundle.matches[0].score == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(bundle.chunks[0].chunk_id == q.chunk_id);
    }
}

TEST_CASE("a small bucket returns fewer than top_k matches") {
    qtest::TableEmbedder emb(2, "two");
    std::vector<Chunk> chunks{qtest::make_chunk("c0", "left"), qtest::make_chunk("c1", "right")};
    emb.add("left", qtest::unit_from({1, 0}));
    emb.add("right", qtest::unit_from({0, 1}));
    std::vector<GeneratedQuestion> qs;
    auto add = [&](const char* chunk, int ord, double x, double y) {
        qs.push_back({make_question_id(chunk, ord), chunk, std::string(chunk) + "-" + std::to_string(ord) + "?", QuestionOrigin::Llm});
        emb.add(qs.back().text, qtest::unit_from({x, y}));
    };
    add("c0", 0, 1, 0.1);
    add("c0", 1, 1, 0.2);
    add("c1", 0, 0.1, 1);
    add("c1", 1, 0.2, 1);
    add("c1", 2, 0.3, 1);
    emb.add("query", qtest::unit_from({1, 0.05}));
    PrototypeSet ps;
    ps.prototypes = {{0, qtest::unit_from({1, 0})}, {1, qtest::unit_from({0, 1})}};
    BuildOptions opts;
    opts.prototypes = ps;
    auto index = build_index(chunks, qs, emb, opts);
    ChunkStore store(chunks);
    auto one = match_query({"query", 3, 1}, index, store, emb);
    CHECK(one.matches.size() == 2);
    CHECK(ids_of(one) == std::vector<std::string>{"c0.q000", "c0.q001"});
    CHECK(one.chunks.size() == 1);
    auto both = match_query({"query", 3, 2}, index, store, emb);
    CHECK(both.matches.size() == 3);
    CHECK(both.matches[2].question_id == "c1.q002");
}

TEST_CASE("probing every prototype equals the exhaustive scan") {
    for (std::uint64_t seed : {101ULL, 202ULL, 303ULL}) {
        auto b = build_random(seed, 200, 16, 14);
        std::mt19937_64 rng(seed * 7);
        for (int t = 0; t < 30; ++t) {
            auto qv = qtest::random_unit(rng, 16);
            const std::string text = "probe " + std::to_string(t);
            b.rc.embedder->add(text, qv);
            for (int k : {1, 3, 10}) {
                Query q{text, k, b.index.header().k_p};
                auto bundle = match_query(q, b.index, b.store, *b.rc.embedder);
                CHECK(ids_of(bundle) == qtest::oracle_top_questions(b.index, qv, k, 0.0));
                check_bundle_shape(bundle, k);
            }
        }
    }
}

TEST_CASE("with one prototype any probe count equals the exhaustive scan") {
    auto b = build_random(404, 60, 8, 1);
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
        auto qv = qtest::random_unit(rng, 8);
        const std::string text = "single " + std::to_string(t);
        b.rc.embedder->add(text, qv);
        for (int n_probe : {1, 2, 50}) {
            auto bundle = match_query({text, 5, n_probe}, b.index, b.store, *b.rc.embedder);
            CHECK(ids_of(bundle) == qtest::oracle_top_questions(b.index, qv, 5, 0.0));
        }
    }
}

TEST_CASE("two matches from one chunk and one from another give two chunks") {
    qtest::TableEmbedder emb(3, "fig");
    std::vector<Chunk> chunks{qtest::make_chunk("cA", "chunk a", "https://e.org/a"),
                              qtest::make_chunk("cB", "chunk b", "https://e.org/b"),
                              qtest::make_chunk("cC", "chunk c", "https://e.org/c")};
    for (const auto& c : chunks) emb.add(c.text, qtest::unit_from({0, 0, 1}));
    std::vector<GeneratedQuestion> qs{{"cA.q000", "cA", "question 1?", QuestionOrigin::Llm},
                                      {"cA.q001", "cA", "question 2?", QuestionOrigin::Llm},
                                      {"cB.q000", "cB", "question 3?", QuestionOrigin::Llm},
                                      {"cC.q000", "cC", "question 4?", QuestionOrigin::Llm}};
    emb.add("question 1?", qtest::unit_from({1, 0.05, 0}));
    emb.add("question 2?", qtest::unit_from({1, 0.10, 0}));
    emb.add("question 3?", qtest::unit_from({1, 0.20, 0}));
    emb.add("question 4?", qtest::unit_from({0, 1, 0.1}));
    emb.add("user query", qtest::unit_from({1, 0, 0}));
    BuildOptions opts;
    opts.k_p = 1;
    auto index = build_index(chunks, qs, emb, opts);
    auto bundle = match_query({"user query", 3, 1}, index, ChunkStore(chunks), emb);
    CHECK(ids_of(bundle) == std::vector<std::string>{"cA.q000", "cA.q001", "cB.q000"});
    CHECK(chunk_ids_of(bundle) == std::vector<std::string>{"cA", "cB"});
    CHECK(bundle.chunks[0].score == bundle.matches[0].score);
    CHECK(bundle.chunks[1].source_url == "https://e.org/b");
}

TEST_CASE("equal scores are ordered by question id") {
    qtest::TableEmbedder emb(2, "tie");
    std::vector<Chunk> chunks{qtest::make_chunk("c0", "c")};
    emb.add("c", qtest::unit_from({1, 0}));
    std::vector<GeneratedQuestion> qs;
    for (const char* id : {"c0.q002", "c0.q000", "c0.q001"}) {
        qs.push_back({id, "c0", std::string(id) + "?", QuestionOrigin::Llm});
        emb.add(qs.back().text, qtest::unit_from({1, 1}));
    }
    emb.add("q", qtest::unit_from({1, 0}));
    BuildOptions opts;
    opts.k_p = 1;
    auto index = build_index(chunks, qs, emb, opts);
    auto bundle = match_query({"q", 2, 1}, index, ChunkStore(chunks), emb);
    CHECK(ids_of(bundle) == std::vector<std::string>{"c0.q000", "c0.q001"});
}

TEST_CASE("questions scoring zero or less are not retrieved") {
    qtest::OneHotEmbedder emb({"robotics", "laboratory", "basement", "capital", "france"});
    std::vector<Chunk> chunks{qtest::make_chunk("c0", "robotics laboratory basement")};
    std::vector<GeneratedQuestion> qs{{"c0.q000", "c0", "Where is the robotics laboratory?", QuestionOrigin::Llm},
                                      {"c0.q001", "c0", "What is in the basement?", QuestionOrigin::Llm}};
    BuildOptions opts;
    opts.k_p = 1;
    auto index = build_index(chunks, qs, emb, opts);
    ChunkStore store(chunks);
    auto ood = match_query({"What is the capital of France?", 3, 1}, index, store, emb);
    CHECK(ood.empty());
    CHECK(ood.matches.empty());
    auto hit = match_query({"robotics", 3, 1}, index, store, emb);
    CHECK(ids_of(hit) == std::vector<std::string>{"c0.q000"});
    // The baseline still ranks every chunk.
    CHECK(baseline_retrieve({"What is the capital of France?", 3, 1}, index, store, emb).chunks.size() == 1);
}

TEST_CASE("baseline ranks chunk embeddings") {
    auto b = build_random(55, 40, 8, 3);
    const auto& target = b.rc.chunks[4];
    auto bundle = baseline_retrieve({target.text, 3, 1}, b.index, b.store, *b.rc.embedder);
    REQUIRE(bundle.chunks.size() == 3);
    CHECK(bundle.chunks[0].chunk_id == target.chunk_id);
    CHECK(bundle.chunks[0].score == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(bundle.matches.empty());

    auto all = baseline_retrieve({target.text, 1000, 1}, b.index, b.store, *b.rc.embedder);
    CHECK(all.chunks.size() == b.rc.chunks.size());
    for (std::size_t i = 1; i < all.chunks.size(); ++i) CHECK(all.chunks[i - 1].score >= all.chunks[i].score);
}

TEST_CASE("on the fixture site both pipelines match their own oracles where they disagree") {
    auto sc = qtest::site_corpus();
    HashEmbedder emb(512, 0);
    BuildOptions opts;
    opts.built_at = "2024-01-01T00:00:00Z";
    auto index = build_index(sc.chunks, sc.questions, emb, opts);
    ChunkStore store(sc.chunks);
    const int k_p = index.header().k_p;
    int disagreements = 0;
    for (const char* text : {"Where is the robotics lab?", "When is the enrollment deposit due?",
                             "Who teaches machine learning?", "How do I get a permission number?",
                             "Where can I print?", "What scholarships are available?", "What is the tuition?",
                             "Which clubs can I join?", "How do I contact advising?"}) {
        const auto qv = embed_text(text, emb);
        auto quim_bundle = match_query({text, 3, k_p}, index, store, emb);
        auto base_bundle = baseline_retrieve({text, 3, 1}, index, store, emb);
        CHECK(ids_of(quim_bundle) == qtest::oracle_top_questions(index, qv, 3, 0.0));
        CHECK(chunk_ids_of(base_bundle) == qtest::oracle_top_chunks(index, qv, 3));
        if (!quim_bundle.chunks.empty() && quim_bundle.chunks[0].chunk_id != base_bundle.chunks[0].chunk_id) {
            ++disagreements;
        }
    }
    CHECK(disagreements > 0);
}

TEST_CASE("retrieval errors") {
    auto b = build_random(66, 20, 8, 2);
    CHECK(code_of([&] { match_query({"", 3, 1}, b.index, b.store, *b.rc.embedder); }) == Errc::InvalidArgument);
    CHECK(code_of([&] { match_query({"question 1?", 0, 1}, b.index, b.store, *b.rc.embedder); }) == Errc::InvalidArgument);
    CHECK(code_of([&] { match_query({"question 1?", 3, 0}, b.index, b.store, *b.rc.embedder); }) == Errc::InvalidArgument);
    qtest::TableEmbedder other(8, "other");
    CHECK(code_of([&] { match_query({"question 1?", 3, 1}, b.index, b.store, other); }) == Errc::EmbedderMismatch);
    CHECK(code_of([&] { baseline_retrieve({"question 1?", 3, 1}, b.index, b.store, other); }) == Errc::EmbedderMismatch);
    CHECK(code_of([&] { match_query({"question 1?", 3, 1}, b.index, ChunkStore{}, *b.rc.embedder); }) ==
          Errc::ReferentialIntegrity);

    IndexHeader h;
    h.embedder_id = "table-66";
    PrototypeSet ps;
    ps.prototypes.push_back({0, qtest::unit_from({1, 0, 0, 0, 0, 0, 0, 0})});
    InvertedIndex empty(h, ps, {{}}, {});
    CHECK(code_of([&] { match_query({"question 1?", 3, 1}, empty, b.store, *b.rc.embedder); }) == Errc::EmptyIndex);
    CHECK(code_of([&] { baseline_retrieve({"question 1?", 3, 1}, empty, b.store, *b.rc.embedder); }) == Errc::EmptyIndex);
}

TEST_CASE("bundle json shape") {
    ContextBundle b;
    b.matches.push_back({"c.q000", "Where?", "c", 0.5});
    b.chunks.push_back({"c", "text", "https://e.org", 0.5});
    auto j = to_json(b);
    CHECK(j["matches"][0]["question_text"] == "Where?");
    CHECK(j["matches"][0]["score"] == 0.5);
    CHECK(j["chunks"][0]["source_url"] == "https://e.org");
}
