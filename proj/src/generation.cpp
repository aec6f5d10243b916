#include "quim/generation.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "quim/error.hpp"
#include "quim/jsonl.hpp"
#include "quim/template.hpp"

namespace quim {

namespace {

constexpr std::string_view kDefaultRagTemplate =
    "You are a documentation assistant. Answer the question using only the context below.\n"
    "Cite nothing that is not in the context. If the context does not contain the answer,\n"
    "reply exactly with: {refusal}\n"
    "\n"
    "Context:\n"
    "{context}\n"
    "\n"
    "Question: {question}\n"
    "Answer:";

constexpr std::string_view kDefaultRefusal =
    "I'm sorry, I cannot answer this question from the available documentation.";

const std::set<std::string> kRagRequired{"context", "question"};
const std::set<std::string> kRagAllowed{"context", "question", "refusal"};

std::string render_blocks(const ContextBundle& bundle, std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += "\n\n";
        out += "[" + std::to_string(i + 1) + "] Source: " + bundle.chunks[i].source_url + "\n";
        out += bundle.chunks[i].text;
    }
    return out;
}

}  // namespace

RagPrompt RagPrompt::default_prompt() { return {std::string(kDefaultRagTemplate), std::string(kDefaultRefusal)}; }

RagPrompt RagPrompt::from_file(const std::filesystem::path& path, std::string refusal_text) {
    RagPrompt p{read_file(path), std::move(refusal_text)};
    check_template(p.template_text, kRagRequired, kRagAllowed);
    if (trim(p.refusal_text).empty()) throw Error(Errc::TemplateError, "refusal text is empty");
    return p;
}

RenderedPrompt render_rag_prompt(const RagPrompt& prompt, const ContextBundle& bundle, std::string_view question,
                                 const TokenizerProvider& tokenizer, std::size_t limit_tokens) {
    check_template(prompt.template_text, kRagRequired, kRagAllowed);
    const std::string q(question);
    std::size_t n = bundle.chunks.size();
    for (;;) {
        RenderedPrompt r;
        r.text = render_template(prompt.template_text,
                                 {{"context", render_blocks(bundle, n)}, {"question", q}, {"refusal", prompt.refusal_text}});
        r.tokens = tokenizer.count(r.text);
        r.chunks_used = n;
        if (r.tokens <= limit_tokens) return r;
        if (n <= 1) {
            throw Error(Errc::ContextOverflow, "prompt needs " + std::to_string(r.tokens) + " tokens, limit is " +
                                                  std::to_string(limit_tokens));
        }
        --n;
    }
}

bool is_refusal(std::string_view completion, const RagPrompt& prompt) {
    const std::string needle = normalize_for_match(prompt.refusal_text);
    if (needle.empty()) return false;
    return normalize_for_match(completion).find(needle) != std::string::npos;
}

Answer generate_answer(const ContextBundle& bundle, std::string_view question, const LlmProvider& provider,
                       const RagPrompt& prompt, const TokenizerProvider& tokenizer, const GenerationOptions& opts) {
    Answer a;
    a.matched_questions = bundle.matches;
    if (bundle.empty()) {
        a.text = prompt.refusal_text;
        a.refused = true;
        return a;
    }
    const RenderedPrompt r = render_rag_prompt(prompt, bundle, question, tokenizer, provider.context_limit_tokens());
    a.text = std::string(trim(provider.complete(r.text, opts.max_tokens)));
    if (is_refusal(a.text, prompt)) {
        a.refused = true;
        return a;
    }
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < r.chunks_used; ++i) {
        const auto& url = bundle.chunks[i].source_url;
        if (seen.insert(url).second) a.sources.push_back(url);
    }
    return a;
}

nlohmann::json to_json(const Answer& answer) {
    nlohmann::json matched = nlohmann::json::array();
    for (const auto& m : answer.matched_questions) matched.push_back(to_json(m));
    return {{"text", answer.text},
            {"refused", answer.refused},
            {"sources", answer.sources},
            {"matched_questions", std::move(matched)}};
}

std::string ExtractiveLlm::complete(const std::string& prompt, int max_tokens) const {
    ++calls_;
    const auto qpos = prompt.rfind("Question:");
    const auto cpos = prompt.find("Context:");
    if (qpos == std::string::npos || cpos == std::string::npos || cpos > qpos) return refusal_;

    auto qend = prompt.find('\n', qpos);
    if (qend == std::string::npos) qend = prompt.size();
    const auto qwords = content_words(std::string_view(prompt).substr(qpos + 9, qend - qpos - 9));
    const std::set<std::string> wanted(qwords.begin(), qwords.end());

    const std::string_view context = std::string_view(prompt).substr(cpos + 8, qpos - cpos - 8);
    std::string best;
    std::size_t best_hits = 0;
    std::size_t pos = 0;
    while (pos < context.size()) {
        auto nl = context.find('\n', pos);
        if (nl == std::string_view::npos) nl = context.size();
        const auto line = trim(context.substr(pos, nl - pos));
        pos = nl + 1;
        if (line.empty() || (line.front() == '[' && line.find("] Source:") != std::string_view::npos)) continue;
        for (const auto& sentence : split_sentences(line)) {
            std::set<std::string> have;
            for (auto& w : content_words(sentence)) have.insert(std::move(w));
            std::size_t hits = 0;
            for (const auto& w : wanted) hits += have.count(w);
            if (hits > best_hits) {
                best_hits = hits;
                best = sentence;
            }
        }
    }
    if (best_hits == 0) return refusal_;

    if (max_tokens > 0) {
        const WhitespaceTokenizer tok;
        const auto spans = tok.tokenize(best);
        if (spans.size() > static_cast<std::size_t>(max_tokens)) best.resize(spans[max_tokens - 1].end);
    }
    return best;
}

BoundedLlm::BoundedLlm(std::shared_ptr<const LlmProvider> inner, std::size_t max_in_flight)
    : inner_(std::move(inner)), max_(std::max<std::size_t>(1, max_in_flight)) {
    if (!inner_) throw Error(Errc::InvalidArgument, "bounded provider needs an inner provider");
}

std::string BoundedLlm::complete(const std::string& prompt, int max_tokens) const {
    {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return in_flight_ < max_; });
        ++in_flight_;
    }
    struct Release {
        const BoundedLlm* self;
        ~Release() {
            {
                std::lock_guard lock(self->mu_);
                --self->in_flight_;
            }
            self->cv_.notify_one();
        }
    } release{this};
    return inner_->complete(prompt, max_tokens);
}

}  // namespace quim
