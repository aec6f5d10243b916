#include "quim/question_gen.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <regex>
#include <set>
#include <unordered_set>

#include "quim/error.hpp"
#include "quim/jsonl.hpp"
#include "quim/template.hpp"
#include "quim/text.hpp"

namespace quim {

namespace {

constexpr std::string_view kBeginChunk = "-----BEGIN CHUNK-----";
constexpr std::string_view kEndChunk = "-----END CHUNK-----";

constexpr std::string_view kDefaultQgenTemplate =
    "You are building a question set for a document retrieval system.\n"
    "Read the text chunk below and write a set of questions that together cover all of the key\n"
    "information it contains.\n"
    "\n"
    "Rules:\n"
    "- Every question must be answerable from the chunk alone.\n"
    "- Do not repeat yourself: each question must be unique and ask about something different.\n"
    "- Keep every question specific to the chunk and relevant to its context.\n"
    "- Write one question per line and nothing else.\n"
    "\n"
    "-----BEGIN CHUNK-----\n"
    "{chunk_text}\n"
    "-----END CHUNK-----\n";

constexpr std::array<std::string_view, 4> kQuestionForms = {
    "What about {}?",
    "How about {}?",
    "What is there about {}?",
    "What is it with {}?",
};

}  // namespace

std::string_view to_string(QuestionOrigin o) noexcept { return o == QuestionOrigin::Manual ? "manual" : "llm"; }

QuestionGenPrompt QuestionGenPrompt::default_prompt() { return {std::string(kDefaultQgenTemplate)}; }

QuestionGenPrompt QuestionGenPrompt::from_file(const std::filesystem::path& path) {
    QuestionGenPrompt p{read_file(path)};
    check_template(p.template_text, {"chunk_text"}, {"chunk_text"});
    return p;
}

std::string render_qgen_prompt(const QuestionGenPrompt& prompt, const Chunk& chunk) {
    check_template(prompt.template_text, {"chunk_text"}, {"chunk_text"});
    return render_template(prompt.template_text, {{"chunk_text", chunk.text}});
}

std::vector<std::string> TemplateQuestionGenerator::generate(const std::string& prompt) const {
    std::string_view body = prompt;
    if (auto b = body.find(kBeginChunk); b != std::string_view::npos) {
        body.remove_prefix(b + kBeginChunk.size());
        if (auto e = body.rfind(kEndChunk); e != std::string_view::npos) body = body.substr(0, e);
    }

    std::vector<std::string> out;
    for (const auto& sentence : split_sentences(body)) {
        std::vector<std::string> terms;
        std::set<std::string> seen;
        for (auto& w : content_words(sentence)) {
            if (seen.insert(w).second) terms.push_back(std::move(w));
        }
        const std::uint64_t h = fnv1a64(sentence, seed_ * 0x9e3779b97f4a7c15ULL + 1);
        for (std::size_t i = 0; i < terms.size(); i += 8) {
            std::string topic;
            for (std::size_t j = i; j < std::min(terms.size(), i + 8); ++j) {
                if (!topic.empty()) topic += ' ';
                topic += terms[j];
            }
            std::string_view form = kQuestionForms[(h + i / 8) % kQuestionForms.size()];
            auto at = form.find("{}");
            out.push_back(std::string(form.substr(0, at)) + topic + std::string(form.substr(at + 2)));
        }
    }
    return out;
}

std::vector<std::string> parse_question_lines(std::string_view completion) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= completion.size()) {
        std::size_t nl = completion.find('\n', pos);
        std::string_view line = completion.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (!trim(line).empty()) out.emplace_back(trim(line));
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return out;
}

std::string normalize_question(std::string_view line) {
    static const std::regex kMarker(R"(^(?:[-*+]|\d+[.)]|[Qq]\d*[:.)])\s*)");
    std::string s = collapse_whitespace(line);
    s = std::regex_replace(s, kMarker, "", std::regex_constants::format_first_only);
    s = collapse_whitespace(s);
    if (s.empty() || s.back() == ':') return {};
    while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == ',' || s.back() == ';')) s.pop_back();
    if (s.empty()) return {};
    if (s.back() != '?') s.push_back('?');
    return s;
}

std::string make_question_id(std::string_view chunk_id, int ordinal) {
    char buf[16];
    std::snprintf(buf, sizeof buf, ".q%03d", ordinal);
    return std::string(chunk_id) + buf;
}

std::vector<GeneratedQuestion> generate_questions(const Chunk& chunk, const GeneratorProvider& provider,
                                                  const QuestionGenPrompt& prompt,
                                                  const QuestionGenOptions& opts) {
    if (trim(chunk.text).empty()) throw Error(Errc::EmptyText, "chunk " + chunk.chunk_id + " is blank");
    const std::string rendered = render_qgen_prompt(prompt, chunk);
    std::vector<GeneratedQuestion> candidates;
    for (const auto& raw : provider.generate(rendered)) {
        std::string text = normalize_question(raw);
        if (text.empty()) continue;
        candidates.push_back({"", chunk.chunk_id, std::move(text), QuestionOrigin::Llm});
    }
    auto kept = dedupe_questions(candidates);
    if (opts.max_questions_per_chunk > 0 && kept.size() > static_cast<std::size_t>(opts.max_questions_per_chunk)) {
        kept.resize(static_cast<std::size_t>(opts.max_questions_per_chunk));
    }
    if (kept.empty()) {
        throw Error(Errc::EmptyGeneration, "provider " + provider.provider_id() + " produced no usable question for chunk " +
                                               chunk.chunk_id);
    }
    for (std::size_t i = 0; i < kept.size(); ++i) kept[i].question_id = make_question_id(chunk.chunk_id, static_cast<int>(i));
    return kept;
}

std::vector<GeneratedQuestion> dedupe_questions(const std::vector<GeneratedQuestion>& questions) {
    std::set<std::pair<std::string, std::string>> seen;
    std::vector<GeneratedQuestion> out;
    for (const auto& q : questions) {
        if (seen.emplace(q.chunk_id, normalize_for_match(q.text)).second) out.push_back(q);
    }
    return out;
}

void check_question_refs(const std::vector<GeneratedQuestion>& questions, const std::vector<Chunk>& chunks) {
    std::unordered_set<std::string> ids;
    for (const auto& c : chunks) ids.insert(c.chunk_id);
    for (const auto& q : questions) {
        if (!ids.count(q.chunk_id)) {
            throw Error(Errc::ReferentialIntegrity,
                        "question " + q.question_id + " references unknown chunk " + q.chunk_id);
        }
    }
}

void write_questions(const std::vector<GeneratedQuestion>& questions, const std::filesystem::path& path) {
    std::vector<json> records;
    records.reserve(questions.size());
    for (const auto& q : questions) {
        records.push_back({{"question_id", q.question_id},
                           {"chunk_id", q.chunk_id},
                           {"text", q.text},
                           {"origin", to_string(q.origin)}});
    }
    write_jsonl(path, kQuestionsFormat, kQuestionsVersion, records);
}

std::vector<GeneratedQuestion> read_questions(const std::filesystem::path& path) {
    std::vector<GeneratedQuestion> out;
    for (const auto& rec : read_jsonl(path, kQuestionsFormat, kQuestionsVersion)) {
        GeneratedQuestion q;
        q.question_id = get_string(rec, "question_id");
        q.chunk_id = get_string(rec, "chunk_id");
        q.text = get_string(rec, "text");
        const std::string origin = get_string(rec, "origin");
        if (origin == "llm") {
            q.origin = QuestionOrigin::Llm;
        } else if (origin == "manual") {
            q.origin = QuestionOrigin::Manual;
        } else {
            throw Error(Errc::FormatError, "line " + std::to_string(rec.line) + ": unknown origin \"" + origin + "\"");
        }
        if (trim(q.text).empty()) throw Error(Errc::FormatError, "line " + std::to_string(rec.line) + ": empty question text");
        out.push_back(std::move(q));
    }
    return out;
}

}  // namespace quim
