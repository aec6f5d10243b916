#include "quim/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <functional>
#include <set>
#include <thread>
#include <unordered_set>

#include "quim/error.hpp"
#include "quim/jsonl.hpp"
#include "quim/text.hpp"

namespace quim {

std::vector<GroundTruthItem> parse_ground_truth(std::string_view text) {
    std::vector<GroundTruthItem> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const auto line = trim(text.substr(pos, nl - pos));
        pos = nl + 1;
        ++line_no;
        if (line.empty()) {
            if (nl == text.size()) break;
            continue;
        }
        const auto where = "ground truth line " + std::to_string(line_no);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::FormatError, where + ": " + e.what());
        }
        try {
            GroundTruthItem item;
            item.question = j.at("question").get<std::string>();
            item.reference_answer = j.at("reference_answer").get<std::string>();
            if (j.contains("source_urls")) item.source_urls = j["source_urls"].get<std::vector<std::string>>();
            if (j.contains("relevant_chunk_ids") && !j["relevant_chunk_ids"].is_null()) {
                item.relevant_chunk_ids = j["relevant_chunk_ids"].get<std::vector<std::string>>();
            }
            if (trim(item.question).empty() || trim(item.reference_answer).empty()) {
                throw Error(Errc::FormatError, where + ": question and reference_answer must be non-empty");
            }
            out.push_back(std::move(item));
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::FormatError, where + ": " + e.what());
        }
        if (nl == text.size()) break;
    }
    return out;
}

std::vector<GroundTruthItem> read_ground_truth(const std::filesystem::path& path) {
    return parse_ground_truth(read_file(path));
}

TokenEmbeddings embed_tokens(std::string_view text, const EmbedderProvider& embedder) {
    TokenEmbeddings te;
    te.tokens = words(text);
    if (te.tokens.empty()) throw Error(Errc::EmptySequence, "text has no tokens");
    te.vectors = embed_all(te.tokens, embedder);
    return te;
}

namespace {

void check_sequence(const TokenEmbeddings& te, const char* which) {
    if (te.vectors.empty()) throw Error(Errc::EmptySequence, std::string(which) + " has no tokens");
    if (!te.tokens.empty() && te.tokens.size() != te.vectors.size()) {
        throw Error(Errc::InvalidArgument, std::string(which) + " tokens and vectors differ in length");
    }
}

// Mean over `from` of the best cosine against any vector in `to`.
double greedy_match(const std::vector<EmbeddingVector>& from, const std::vector<EmbeddingVector>& to) {
    double sum = 0.0;
    for (const auto& a : from) {
        double best = -1.0;
        for (const auto& b : to) best = std::max(best, cosine_similarity(a, b));
        sum += best;
    }
    return sum / static_cast<double>(from.size());
}

}  // namespace

BertScoreResult bert_score(const TokenEmbeddings& candidate, const TokenEmbeddings& reference) {
    check_sequence(candidate, "candidate");
    check_sequence(reference, "reference");
    BertScoreResult r;
    r.precision = greedy_match(candidate.vectors, reference.vectors);
    r.recall = greedy_match(reference.vectors, candidate.vectors);
    r.f1 = (r.precision + r.recall == 0.0) ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

double faithfulness(const std::vector<ClaimVerdict>& verdicts) {
    if (verdicts.empty()) throw Error(Errc::NoClaims, "answer makes no claims");
    const auto verified = std::count_if(verdicts.begin(), verdicts.end(), [](const ClaimVerdict& v) { return v.verified; });
    return static_cast<double>(verified) / static_cast<double>(verdicts.size());
}

std::vector<std::string> RuleJudge::extract_claims(const std::string& answer) const { return split_sentences(answer); }

bool RuleJudge::verify(const std::string& claim, const std::string& context) const {
    std::string needle = normalize_for_match(claim);
    while (!needle.empty() && (needle.back() == '.' || needle.back() == '!' || needle.back() == '?')) needle.pop_back();
    if (needle.empty()) return false;
    if (normalize_for_match(context).find(needle) != std::string::npos) return true;
    if (content_words(claim).empty()) return false;
    const EmbeddingVector cv = embed_text(claim, embedder_);
    for (const auto& s : split_sentences(context)) {
        if (words(s).empty()) continue;
        if (cosine_similarity(cv, embed_text(s, embedder_)) >= threshold_) return true;
    }
    return false;
}

std::vector<std::string> RuleJudge::extract_relevant_sentences(const std::string& question,
                                                               const std::vector<std::string>& sentences) const {
    const auto qw = content_words(question);
    const std::set<std::string> wanted(qw.begin(), qw.end());
    std::vector<std::string> out;
    for (const auto& s : sentences) {
        const auto sw = content_words(s);
        if (std::any_of(sw.begin(), sw.end(), [&](const std::string& w) { return wanted.count(w) > 0; })) out.push_back(s);
    }
    return out;
}

std::vector<std::string> RuleJudge::generate_questions_from_answer(const std::string& answer, int n) const {
    std::vector<std::string> cw;
    std::unordered_set<std::string> seen;
    for (auto& w : content_words(answer)) {
        if (seen.insert(w).second) cw.push_back(std::move(w));
    }
    if (cw.empty() || n < 1) return {};
    const std::size_t window = std::min<std::size_t>(6, cw.size());
    const std::size_t step = std::max<std::size_t>(1, cw.size() / static_cast<std::size_t>(n));
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) {
        std::string q = "What about";
        const std::size_t start = (static_cast<std::size_t>(i) * step) % cw.size();
        for (std::size_t k = 0; k < window; ++k) q += " " + cw[(start + k) % cw.size()];
        out.push_back(q + "?");
    }
    return out;
}

double answer_relevance(const std::string& original_question, const std::string& answer, const JudgeProvider& judge,
                        const EmbedderProvider& embedder, int n) {
    if (n < 1) throw Error(Errc::InvalidArgument, "answer relevance needs n >= 1");
    auto questions = judge.generate_questions_from_answer(answer, n);
    if (questions.empty()) throw Error(Errc::EmptyGeneration, "judge generated no questions");
    if (questions.size() > static_cast<std::size_t>(n)) questions.resize(static_cast<std::size_t>(n));
    const EmbeddingVector q = embed_text(original_question, embedder);
    const auto generated = embed_all(questions, embedder);
    double sum = 0.0;
    for (const auto& g : generated) sum += cosine_similarity(q, g);
    return sum / static_cast<double>(generated.size());
}

double context_relevance(const std::string& question, const std::vector<std::string>& context_sentences,
                         const JudgeProvider& judge) {
    if (context_sentences.empty()) throw Error(Errc::EmptyContext, "context has no sentences");
    const std::set<std::string> members(context_sentences.begin(), context_sentences.end());
    std::set<std::string> relevant;
    for (const auto& s : judge.extract_relevant_sentences(question, context_sentences)) {
        if (!members.count(s)) throw Error(Errc::JudgeHallucination, "judge returned a sentence not in the context: " + s);
        relevant.insert(s);
    }
    return static_cast<double>(relevant.size()) / static_cast<double>(context_sentences.size());
}

std::pair<double, double> context_precision_recall(const std::vector<std::string>& retrieved,
                                                   const std::vector<std::string>& relevant) {
    const std::set<std::string> ret(retrieved.begin(), retrieved.end());
    const std::set<std::string> rel(relevant.begin(), relevant.end());
    if (ret.empty()) throw Error(Errc::EmptyRetrieval, "nothing retrieved");
    if (rel.empty()) throw Error(Errc::InvalidArgument, "no relevant ids given");
    const auto hits = static_cast<double>(
        std::count_if(ret.begin(), ret.end(), [&](const std::string& id) { return rel.count(id) > 0; }));
    return {hits / static_cast<double>(ret.size()), hits / static_cast<double>(rel.size())};
}

std::string to_string(Pipeline p) { return p == Pipeline::Quim ? "quim" : "baseline"; }

Pipeline pipeline_from_string(std::string_view s) {
    if (s == "quim") return Pipeline::Quim;
    if (s == "baseline") return Pipeline::Baseline;
    throw Error(Errc::InvalidArgument, "unknown pipeline '" + std::string(s) + "'");
}

namespace {

// Metric undefined for this item; leave it absent.
bool undefined_metric(const Error& e) {
    switch (e.code()) {
        case Errc::NoClaims:
        case Errc::EmptyContext:
        case Errc::EmptyRetrieval:
        case Errc::EmptySequence:
        case Errc::EmptyGeneration:
        case Errc::EmptyText:
            return true;
        default:
            return false;
    }
}

template <class F>
auto try_metric(F&& f) -> std::optional<decltype(f())> {
    try {
        return f();
    } catch (const Error& e) {
        if (undefined_metric(e)) return std::nullopt;
        throw;
    }
}

ItemResult evaluate_item(const GroundTruthItem& item, std::size_t index, Pipeline pipeline, const EvalContext& ctx,
                         const EvalOptions& opts) {
    ItemResult r;
    r.index = index;
    r.question = item.question;
    try {
        Query q{item.question, opts.top_k, opts.n_probe};
        const ContextBundle bundle = pipeline == Pipeline::Quim ? match_query(q, ctx.index, ctx.store, ctx.embedder)
                                                                : baseline_retrieve(q, ctx.index, ctx.store, ctx.embedder);
        const Answer answer = generate_answer(bundle, item.question, ctx.llm, ctx.prompt, ctx.tokenizer, opts.generation);
        r.answer = answer.text;
        r.refused = answer.refused;
        for (const auto& c : bundle.chunks) r.retrieved_chunk_ids.push_back(c.chunk_id);

        std::string context_text;
        std::vector<std::string> sentences;
        for (const auto& c : bundle.chunks) {
            if (!context_text.empty()) context_text += "\n";
            context_text += c.text;
            for (auto& s : split_sentences(c.text)) sentences.push_back(std::move(s));
        }

        auto& m = r.metrics;
        if (!answer.refused) {
            m.faithfulness = try_metric([&] {
                std::vector<ClaimVerdict> verdicts;
                for (auto& claim : ctx.judge.extract_claims(answer.text)) {
                    const bool ok = ctx.judge.verify(claim, context_text);
                    verdicts.push_back({std::move(claim), ok});
                }
                return faithfulness(verdicts);
            });
            m.answer_relevance =
                try_metric([&] { return answer_relevance(item.question, answer.text, ctx.judge, ctx.embedder, opts.ar_questions); });
        }
        m.context_relevance = try_metric([&] { return context_relevance(item.question, sentences, ctx.judge); });
        if (item.relevant_chunk_ids && !item.relevant_chunk_ids->empty()) {
            if (r.retrieved_chunk_ids.empty()) {
                m.context_recall = 0.0;
            } else {
                const auto [p, rc] = context_precision_recall(r.retrieved_chunk_ids, *item.relevant_chunk_ids);
                m.context_precision = p;
                m.context_recall = rc;
            }
        }
        m.bert = try_metric([&] {
            return bert_score(embed_tokens(answer.text, ctx.embedder), embed_tokens(item.reference_answer, ctx.embedder));
        });
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    return r;
}

void add_mean(std::map<std::string, double>& means, const std::string& name, const std::vector<ItemResult>& items,
              const std::function<std::optional<double>(const ItemMetrics&)>& get) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& it : items) {
        if (it.error) continue;
        if (auto v = get(it.metrics)) {
            sum += *v;
            ++n;
        }
    }
    if (n) means[name] = sum / static_cast<double>(n);
}

const std::vector<std::pair<std::string, std::string>>& metric_rows() {
    static const std::vector<std::pair<std::string, std::string>> rows{
        {"faithfulness", "Faithfulness"},           {"answer_relevance", "Answer Relevance"},
        {"context_relevance", "Context Relevance"}, {"context_precision", "Context Precision"},
        {"context_recall", "Context Recall"},       {"bert_precision", "BERT Precision"},
        {"bert_recall", "BERT Recall"},             {"bert_f1", "BERT F1"},
    };
    return rows;
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

EvalReport run_eval(const std::vector<GroundTruthItem>& items, const EvalContext& ctx, const EvalOptions& opts) {
    if (items.empty()) throw Error(Errc::InvalidArgument, "no items");
    if (opts.pipelines.empty()) throw Error(Errc::InvalidArgument, "no pipelines selected");
    EvalReport report;
    for (Pipeline p : opts.pipelines) {
        PipelineReport pr;
        pr.pipeline = p;
        pr.items.resize(items.size());
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (std::size_t i = next++; i < items.size(); i = next++) pr.items[i] = evaluate_item(items[i], i, p, ctx, opts);
        };
        const std::size_t workers = std::clamp<std::size_t>(opts.workers, 1, items.size());
        if (workers == 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
            for (auto& t : pool) t.join();
        }
        pr.failures = static_cast<std::size_t>(
            std::count_if(pr.items.begin(), pr.items.end(), [](const ItemResult& r) { return r.error.has_value(); }));
        add_mean(pr.means, "faithfulness", pr.items, [](const ItemMetrics& m) { return m.faithfulness; });
        add_mean(pr.means, "answer_relevance", pr.items, [](const ItemMetrics& m) { return m.answer_relevance; });
        add_mean(pr.means, "context_relevance", pr.items, [](const ItemMetrics& m) { return m.context_relevance; });
        add_mean(pr.means, "context_precision", pr.items, [](const ItemMetrics& m) { return m.context_precision; });
        add_mean(pr.means, "context_recall", pr.items, [](const ItemMetrics& m) { return m.context_recall; });
        add_mean(pr.means, "bert_precision", pr.items,
                 [](const ItemMetrics& m) { return m.bert ? std::optional(m.bert->precision) : std::nullopt; });
        add_mean(pr.means, "bert_recall", pr.items,
                 [](const ItemMetrics& m) { return m.bert ? std::optional(m.bert->recall) : std::nullopt; });
        add_mean(pr.means, "bert_f1", pr.items,
                 [](const ItemMetrics& m) { return m.bert ? std::optional(m.bert->f1) : std::nullopt; });
        report.pipelines.push_back(std::move(pr));
    }
    return report;
}

nlohmann::json to_json(const EvalReport& report) {
    nlohmann::json pipelines = nlohmann::json::array();
    for (const auto& pr : report.pipelines) {
        nlohmann::json items = nlohmann::json::array();
        for (const auto& it : pr.items) {
            const auto& m = it.metrics;
            nlohmann::json metrics{{"faithfulness", opt_json(m.faithfulness)},
                                   {"answer_relevance", opt_json(m.answer_relevance)},
                                   {"context_relevance", opt_json(m.context_relevance)},
                                   {"context_precision", opt_json(m.context_precision)},
                                   {"context_recall", opt_json(m.context_recall)},
                                   {"bert_precision", m.bert ? nlohmann::json(m.bert->precision) : nlohmann::json(nullptr)},
                                   {"bert_recall", m.bert ? nlohmann::json(m.bert->recall) : nlohmann::json(nullptr)},
                                   {"bert_f1", m.bert ? nlohmann::json(m.bert->f1) : nlohmann::json(nullptr)}};
            items.push_back({{"index", it.index},
                             {"question", it.question},
                             {"error", it.error ? nlohmann::json(*it.error) : nlohmann::json(nullptr)},
                             {"answer", it.answer},
                             {"refused", it.refused},
                             {"retrieved_chunk_ids", it.retrieved_chunk_ids},
                             {"metrics", std::move(metrics)}});
        }
        pipelines.push_back({{"pipeline", to_string(pr.pipeline)},
                             {"items", std::move(items)},
                             {"means", pr.means},
                             {"failures", pr.failures}});
    }
    return {{"pipelines", std::move(pipelines)}};
}

std::string format_table(const EvalReport& report) {
    char buf[64];
    std::string out;
    std::snprintf(buf, sizeof buf, "%-20s", "Metric");
    out += buf;
    for (const auto& pr : report.pipelines) {
        std::snprintf(buf, sizeof buf, "%12s", to_string(pr.pipeline).c_str());
        out += buf;
    }
    out += "\n";
    for (const auto& [key, label] : metric_rows()) {
        std::snprintf(buf, sizeof buf, "%-20s", label.c_str());
        out += buf;
        for (const auto& pr : report.pipelines) {
            auto it = pr.means.find(key);
            if (it == pr.means.end()) {
                std::snprintf(buf, sizeof buf, "%12s", "n/a");
            } else {
                std::snprintf(buf, sizeof buf, "%12.2f", it->second);
            }
            out += buf;
        }
        out += "\n";
    }
    std::snprintf(buf, sizeof buf, "%-20s", "Items (failed)");
    out += buf;
    for (const auto& pr : report.pipelines) {
        const std::string cell = std::to_string(pr.items.size()) + " (" + std::to_string(pr.failures) + ")";
        std::snprintf(buf, sizeof buf, "%12s", cell.c_str());
        out += buf;
    }
    out += "\n";
    return out;
}

}  // namespace quim
