#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "quim/retrieval.hpp"
#include "quim/text.hpp"

namespace quim {

/// Grounded-answer instruction. {context} and {question} must each appear
/// exactly once; {refusal} may appear and expands to refusal_text, the
/// sentence the model is told to use when the context lacks the answer.
struct RagPrompt {
    std::string template_text;
    std::string refusal_text;

    static RagPrompt default_prompt();
    static RagPrompt from_file(const std::filesystem::path& path, std::string refusal_text);
};

class LlmProvider {
public:
    virtual ~LlmProvider() = default;
    virtual std::string complete(const std::string& prompt, int max_tokens) const = 0;
    virtual std::string provider_id() const = 0;
    virtual std::size_t context_limit_tokens() const { return 8000; }
};

struct RenderedPrompt {
    std::string text;
    std::size_t chunks_used = 0;  // leading bundle chunks that fit
    std::size_t tokens = 0;
};

/// Context blocks are "[n] Source: <url>" followed by the chunk text. When
/// the prompt exceeds limit_tokens the lowest-ranked chunks are dropped whole.
/// Throws ContextOverflow when even the best chunk alone does not fit.
RenderedPrompt render_rag_prompt(const RagPrompt& prompt, const ContextBundle& bundle, std::string_view question,
                                 const TokenizerProvider& tokenizer, std::size_t limit_tokens);

struct Answer {
    std::string text;
    std::vector<std::string> sources;  // distinct source URLs of the context used, in context order
    bool refused = false;
    std::vector<MatchedQuestion> matched_questions;

    friend bool operator==(const Answer&, const Answer&) = default;
};

/// True if `completion` contains the prompt's refusal sentence (compared
/// case-insensitively with whitespace collapsed).
bool is_refusal(std::string_view completion, const RagPrompt& prompt);

struct GenerationOptions {
    int max_tokens = 512;
};

/// An empty bundle yields a refusal without calling the provider. Otherwise
/// the provider's completion becomes the answer; a completion carrying the
/// refusal sentence marks the answer refused and drops its sources.
Answer generate_answer(const ContextBundle& bundle, std::string_view question, const LlmProvider& provider,
                       const RagPrompt& prompt, const TokenizerProvider& tokenizer,
                       const GenerationOptions& opts = {});

nlohmann::json to_json(const Answer& answer);

/// Offline LLM: answers with the context sentence sharing the most content
/// words with the question, or the refusal sentence if none shares any.
/// Expects the layout of the default prompt ("Context:" ... "Question: ...").
class ExtractiveLlm final : public LlmProvider {
public:
    explicit ExtractiveLlm(std::string refusal_text = RagPrompt::default_prompt().refusal_text,
                           std::size_t context_limit = 8000)
        : refusal_(std::move(refusal_text)), limit_(context_limit) {}

    std::string complete(const std::string& prompt, int max_tokens) const override;
    std::string provider_id() const override { return "extractive"; }
    std::size_t context_limit_tokens() const override { return limit_; }

    std::size_t calls() const noexcept { return calls_.load(); }

private:
    std::string refusal_;
    std::size_t limit_;
    mutable std::atomic<std::size_t> calls_{0};
};

/// Caps the number of concurrent complete() calls into another provider.
class BoundedLlm final : public LlmProvider {
public:
    BoundedLlm(std::shared_ptr<const LlmProvider> inner, std::size_t max_in_flight);

    std::string complete(const std::string& prompt, int max_tokens) const override;
    std::string provider_id() const override { return inner_->provider_id(); }
    std::size_t context_limit_tokens() const override { return inner_->context_limit_tokens(); }

private:
    std::shared_ptr<const LlmProvider> inner_;
    std::size_t max_;
    mutable std::size_t in_flight_ = 0;
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
};

}  // namespace quim
