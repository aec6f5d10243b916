#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "quim/corpus.hpp"

namespace quim {

enum class QuestionOrigin { Llm, Manual };

std::string_view to_string(QuestionOrigin o) noexcept;

struct GeneratedQuestion {
    std::string question_id;
    std::string chunk_id;
    std::string text;
    QuestionOrigin origin = QuestionOrigin::Llm;

    friend bool operator==(const GeneratedQuestion&, const GeneratedQuestion&) = default;
};

/// Question-generation instruction. The template must contain {chunk_text}
/// exactly once and no other placeholder.
struct QuestionGenPrompt {
    std::string template_text;

    static QuestionGenPrompt default_prompt();
    static QuestionGenPrompt from_file(const std::filesystem::path& path);
};

std::string render_qgen_prompt(const QuestionGenPrompt& prompt, const Chunk& chunk);

/// Instruction-following LLM used to propose questions for a prompt.
class GeneratorProvider {
public:
    virtual ~GeneratorProvider() = default;
    virtual std::vector<std::string> generate(const std::string& prompt) const = 0;
    virtual std::string provider_id() const = 0;
};

/// Offline generator. Reads the chunk back out of the prompt (between the
/// default template's BEGIN/END CHUNK markers, else the whole prompt) and
/// writes one templated question per window of up to eight content words of
/// each sentence. The seed picks the question wording.
class TemplateQuestionGenerator final : public GeneratorProvider {
public:
    explicit TemplateQuestionGenerator(std::uint64_t seed = 42) : seed_(seed) {}

    std::vector<std::string> generate(const std::string& prompt) const override;
    std::string provider_id() const override { return "template-s" + std::to_string(seed_); }

private:
    std::uint64_t seed_;
};

/// Splits a completion into one candidate question per non-blank line.
std::vector<std::string> parse_question_lines(std::string_view completion);

/// Strips list markers ("1.", "2)", "-", "*", "Q3:"), collapses whitespace and
/// makes the text end in '?'. Returns "" for lines that are not questions
/// (blank, or headings ending in ':').
std::string normalize_question(std::string_view line);

struct QuestionGenOptions {
    int max_questions_per_chunk = 32;
};

std::string make_question_id(std::string_view chunk_id, int ordinal);

/// Renders the prompt, calls the provider, normalizes, removes duplicates and
/// caps the list. Throws EmptyText for a blank chunk, EmptyGeneration when no
/// usable question remains; provider failures propagate as ProviderError.
std::vector<GeneratedQuestion> generate_questions(const Chunk& chunk, const GeneratorProvider& provider,
                                                  const QuestionGenPrompt& prompt,
                                                  const QuestionGenOptions& opts = {});

/// Removes later questions whose normalized text repeats an earlier one for
/// the same chunk. The same text under different chunks is kept.
std::vector<GeneratedQuestion> dedupe_questions(const std::vector<GeneratedQuestion>& questions);

/// Throws ReferentialIntegrity if a question names a chunk that is not in `chunks`.
void check_question_refs(const std::vector<GeneratedQuestion>& questions, const std::vector<Chunk>& chunks);

inline constexpr std::string_view kQuestionsFormat = "quim-questions";
inline constexpr int kQuestionsVersion = 1;

void write_questions(const std::vector<GeneratedQuestion>& questions, const std::filesystem::path& path);
std::vector<GeneratedQuestion> read_questions(const std::filesystem::path& path);

}  // namespace quim
