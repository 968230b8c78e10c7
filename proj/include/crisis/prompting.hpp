#pragma once

#include "crisis/error.hpp"
#include "crisis/message.hpp"
#include "crisis/taxonomy.hpp"
#include "crisis/textprep.hpp"
#include "crisis/triage_result.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace crisis {

enum class PromptTask { binary_relevance, multiclass, dispatcher_advisory, public_advisory };

std::string_view to_string(PromptTask t);
std::optional<PromptTask> parse_prompt_task(std::string_view s);

enum class PromptErrc { unfilled_placeholder, unknown_placeholder, missing_exemplars, bad_snippet };

std::string_view to_string(PromptErrc e);

using PromptError = CodedError<PromptErrc>;

/// A versioned template. The user skeleton may reference {message},
/// {labels}, {examples}, {guideline_snippets} and {locale_directive};
/// `{{` and `}}` are literal braces.
struct PromptTemplate {
    PromptTask task = PromptTask::multiclass;
    std::string version;
    std::string system_text;
    std::string user_skeleton;

    /// SHA-256 over task, version, system text and skeleton.
    std::string hash() const;
};

const PromptTemplate& default_template(PromptTask task);

/// Single-pass substitution; substituted values are never re-scanned.
/// Throws PromptError when a placeholder has no value or is not one of the
/// five known names.
std::string render_skeleton(std::string_view skeleton, const std::map<std::string, std::string>& values);

struct RenderedPrompt {
    PromptTask task = PromptTask::multiclass;
    std::string system_text;
    std::string user_text;
    std::string template_hash;

    /// System and user text joined by a blank line.
    std::string text() const;
};

/// JSON string literal of the text with `{` and `}` also escaped, so user
/// content can never look like a placeholder or an answer object.
std::string embed_message(std::string_view text);

/// Recovers the message embedded by the render functions.
std::optional<std::string> extract_message(std::string_view prompt_text);

/// Reads the `Task:` line written by the default skeletons.
std::optional<PromptTask> extract_task(std::string_view prompt_text);

struct Exemplar {
    std::string text;
    LabelSet labels;
};

RenderedPrompt render_multiclass(const CleanText& message, const CategoryTaxonomy& taxonomy, std::size_t k_shot,
                                 std::span<const Exemplar> exemplars,
                                 const PromptTemplate& tmpl = default_template(PromptTask::multiclass));

RenderedPrompt render_binary(const CleanText& message,
                             const PromptTemplate& tmpl = default_template(PromptTask::binary_relevance));

struct GuidelineSnippet {
    std::string id;
    std::string source_doc;
    std::string text;
    LabelSet tags;

    friend bool operator==(const GuidelineSnippet&, const GuidelineSnippet&) = default;
};

inline constexpr std::size_t kMaxSnippetChars = 800;
inline constexpr std::size_t kDefaultSnippetCount = 3;

/// NDJSON of {id, source_doc, text, tags}. With a taxonomy, tags must be
/// taxonomy keys.
std::vector<GuidelineSnippet> load_snippets(std::string_view ndjson, const CategoryTaxonomy* taxonomy = nullptr);
std::vector<GuidelineSnippet> load_snippets_file(const std::string& path, const CategoryTaxonomy* taxonomy = nullptr);

/// Snippets sharing at least one tag with `categories`, by overlap count
/// (descending) then id (ascending), at most `n`.
std::vector<GuidelineSnippet> select_snippets(const LabelSet& categories, std::span<const GuidelineSnippet> snippets,
                                              std::size_t n = kDefaultSnippetCount);

enum class Audience { dispatcher, public_user };

std::string_view to_string(Audience a);
std::optional<Audience> parse_audience(std::string_view s);

/// `message_text` is the cleaned message shown to the model for context.
RenderedPrompt render_advisory(const TriageResult& result, std::string_view message_text,
                               std::span<const GuidelineSnippet> snippets, Audience audience,
                               std::size_t n = kDefaultSnippetCount);

/// Structured answer in the output contract shape.
std::string contract_answer(bool relevant, const std::map<std::string, double>& labels,
                            EmergencyLevel level = EmergencyLevel::unknown,
                            const std::optional<std::string>& location = std::nullopt,
                            const std::optional<std::string>& contact = std::nullopt);

}  // namespace crisis
