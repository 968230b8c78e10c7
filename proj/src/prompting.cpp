#include "crisis/prompting.hpp"

#include "crisis/sha256.hpp"
#include "crisis/utf8.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

namespace crisis {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(PromptTask t) {
    switch (t) {
        case PromptTask::binary_relevance: return "binary_relevance";
        case PromptTask::multiclass: return "multiclass";
        case PromptTask::dispatcher_advisory: return "dispatcher_advisory";
        case PromptTask::public_advisory: return "public_advisory";
    }
    return "multiclass";
}

std::optional<PromptTask> parse_prompt_task(std::string_view s) {
    for (auto t : {PromptTask::binary_relevance, PromptTask::multiclass, PromptTask::dispatcher_advisory,
                   PromptTask::public_advisory}) {
        if (to_string(t) == s) return t;
    }
    return std::nullopt;
}

std::string_view to_string(PromptErrc e) {
    switch (e) {
        case PromptErrc::unfilled_placeholder: return "unfilled_placeholder";
        case PromptErrc::unknown_placeholder: return "unknown_placeholder";
        case PromptErrc::missing_exemplars: return "missing_exemplars";
        case PromptErrc::bad_snippet: return "bad_snippet";
    }
    return "bad_snippet";
}

std::string_view to_string(Audience a) { return a == Audience::dispatcher ? "dispatcher" : "public"; }

std::optional<Audience> parse_audience(std::string_view s) {
    if (s == "dispatcher") return Audience::dispatcher;
    if (s == "public") return Audience::public_user;
    return std::nullopt;
}

std::string PromptTemplate::hash() const {
    std::string bytes;
    bytes.append(to_string(task)).push_back('\x1F');
    bytes.append(version).push_back('\x1F');
    bytes.append(system_text).push_back('\x1F');
    bytes.append(user_skeleton);
    return sha256_hex(bytes);
}

namespace {

// The multiclass system text must not contain any default taxonomy key as a
// substring; the label list is the only place keys appear.
const std::array<PromptTemplate, 4>& templates() {
    static const std::array<PromptTemplate, 4> kTemplates{{
        {PromptTask::binary_relevance, "v1",
         "You screen inbound messages for a public-safety answering point after a disaster. Decide whether the "
         "author is a person directly affected who is asking for help and shares a location or contact details "
         "(relevant), or anything else such as news, commentary, or unrelated chatter (not relevant).\n"
         "Reply with a single JSON object and nothing else, exactly of the form {\"relevant\": true} or "
         "{\"relevant\": false}.",
         "Task: binary_relevance\n"
         "{locale_directive}"
         "Message to classify: {message}\n"
         "Answer:"},
        {PromptTask::multiclass, "v1",
         "You are a triage assistant supporting public-safety telecommunicators. You read one inbound message "
         "from a caller, a social post, or an app user and label it. A message may carry several labels.\n"
         "Reply with a single JSON object and nothing else, using exactly this shape:\n"
         "{\"relevant\": true|false, \"labels\": [{\"key\": \"<label key>\", \"confidence\": <number between 0 "
         "and 1>}], \"level\": \"critical|high|moderate|low|unknown\", \"location\": <string or null>, "
         "\"contact\": <string or null>}\n"
         "Use only label keys from the provided list, each at most once.",
         "Task: multiclass\n"
         "Label keys:\n"
         "{labels}\n"
         "{examples}"
         "{locale_directive}"
         "Message to classify: {message}\n"
         "Answer:"},
        {PromptTask::dispatcher_advisory, "v1",
         "You support a 911 dispatcher while a call is in progress. You never talk to the caller. Using the "
         "guideline excerpts provided, list the questions the dispatcher should ask next and the protocol steps "
         "to follow. Be brief and concrete.",
         "Task: dispatcher_advisory\n"
         "Assessment: {labels}\n"
         "Guidelines:\n"
         "{guideline_snippets}\n"
         "{locale_directive}"
         "Message: {message}\n"
         "Questions to ask and protocol steps:"},
        {PromptTask::public_advisory, "v1",
         "You help members of the public during a large crisis when emergency lines are overwhelmed. Using the "
         "guideline excerpts provided, give short plain-language safety instructions as at most five numbered "
         "steps, including where to find safe shelter when that applies.",
         "Task: public_advisory\n"
         "Assessment: {labels}\n"
         "Guidelines:\n"
         "{guideline_snippets}\n"
         "{locale_directive}"
         "Message: {message}\n"
         "Instructions:"},
    }};
    return kTemplates;
}

constexpr std::array<std::string_view, 5> kPlaceholders{"message", "labels", "examples", "guideline_snippets",
                                                        "locale_directive"};

std::string locale_directive(const std::optional<std::string>& tag) {
    if (!tag || *tag == "en") return {};
    return "Language: the message is tagged '" + *tag + "'. Read it in that language and answer in English.\n";
}

RenderedPrompt finish(const PromptTemplate& tmpl, const std::map<std::string, std::string>& values) {
    RenderedPrompt out;
    out.task = tmpl.task;
    out.system_text = tmpl.system_text;
    out.user_text = render_skeleton(tmpl.user_skeleton, values);
    out.template_hash = tmpl.hash();
    return out;
}

}  // namespace

const PromptTemplate& default_template(PromptTask task) {
    for (const auto& t : templates()) {
        if (t.task == task) return t;
    }
    throw std::logic_error("no template for task");
}

std::string render_skeleton(std::string_view skeleton, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(skeleton.size() * 2);
    std::size_t i = 0;
    while (i < skeleton.size()) {
        const char c = skeleton[i];
        if (c == '{' && i + 1 < skeleton.size() && skeleton[i + 1] == '{') {
            out.push_back('{');
            i += 2;
            continue;
        }
        if (c == '}' && i + 1 < skeleton.size() && skeleton[i + 1] == '}') {
            out.push_back('}');
            i += 2;
            continue;
        }
        if (c != '{') {
            out.push_back(c);
            ++i;
            continue;
        }
        const auto close = skeleton.find('}', i);
        if (close == std::string_view::npos) throw PromptError(PromptErrc::unknown_placeholder, "unterminated '{'");
        const std::string name(skeleton.substr(i + 1, close - i - 1));
        if (std::find(kPlaceholders.begin(), kPlaceholders.end(), name) == kPlaceholders.end()) {
            throw PromptError(PromptErrc::unknown_placeholder, "{" + name + "}");
        }
        const auto it = values.find(name);
        if (it == values.end()) throw PromptError(PromptErrc::unfilled_placeholder, "{" + name + "}");
        out += it->second;
        i = close + 1;
    }
    return out;
}

std::string RenderedPrompt::text() const { return system_text + "\n\n" + user_text; }

std::string embed_message(std::string_view text) {
    const std::string quoted = json(std::string(text)).dump(-1, ' ', false, json::error_handler_t::replace);
    std::string out;
    out.reserve(quoted.size());
    for (char c : quoted) {
        if (c == '{') {
            out += "\\u007b";
        } else if (c == '}') {
            out += "\\u007d";
        } else {
            out.push_back(c);
        }
    }
    return out;
}

namespace {

std::optional<std::string> line_after(std::string_view text, std::string_view marker) {
    std::size_t pos = 0;
    while (true) {
        pos = text.find(marker, pos);
        if (pos == std::string_view::npos) return std::nullopt;
        if (pos == 0 || text[pos - 1] == '\n') break;
        pos += marker.size();
    }
    const auto start = pos + marker.size();
    const auto end = text.find('\n', start);
    return std::string(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
}

}  // namespace

std::optional<std::string> extract_message(std::string_view prompt_text) {
    for (std::string_view marker : {"Message to classify: ", "Message: "}) {
        if (auto line = line_after(prompt_text, marker)) {
            try {
                const json parsed = json::parse(*line);
                if (parsed.is_string()) return parsed.get<std::string>();
            } catch (const json::exception&) {
                return std::nullopt;
            }
        }
    }
    return std::nullopt;
}

std::optional<PromptTask> extract_task(std::string_view prompt_text) {
    auto line = line_after(prompt_text, "Task: ");
    if (!line) return std::nullopt;
    return parse_prompt_task(*line);
}

std::string contract_answer(bool relevant, const std::map<std::string, double>& labels, EmergencyLevel level,
                            const std::optional<std::string>& location, const std::optional<std::string>& contact) {
    ordered_json answer;
    answer["relevant"] = relevant;
    answer["labels"] = ordered_json::array();
    for (const auto& [key, confidence] : labels) {
        answer["labels"].push_back(ordered_json{{"key", key}, {"confidence", confidence}});
    }
    answer["level"] = to_string(level);
    answer["location"] = location ? ordered_json(*location) : ordered_json(nullptr);
    answer["contact"] = contact ? ordered_json(*contact) : ordered_json(nullptr);
    return answer.dump(-1, ' ', false, json::error_handler_t::replace);
}

RenderedPrompt render_multiclass(const CleanText& message, const CategoryTaxonomy& taxonomy, std::size_t k_shot,
                                 std::span<const Exemplar> exemplars, const PromptTemplate& tmpl) {
    if (k_shot > exemplars.size()) {
        throw PromptError(PromptErrc::missing_exemplars, "k_shot=" + std::to_string(k_shot) + " but only " +
                                                             std::to_string(exemplars.size()) + " exemplars");
    }
    std::string labels;
    for (const auto& label : taxonomy.labels()) {
        if (!labels.empty()) labels += '\n';
        labels += "- " + label.key + ": " + label.display_name;
    }
    std::string examples;
    if (k_shot > 0) {
        examples = "Examples:\n";
        for (std::size_t i = 0; i < k_shot; ++i) {
            std::map<std::string, double> answer_labels;
            for (const auto& l : exemplars[i].labels) answer_labels[l] = 1.0;
            examples += "Example message: " + embed_message(exemplars[i].text) + "\n";
            examples += "Example answer: " + contract_answer(!answer_labels.empty(), answer_labels) + "\n";
        }
        examples += "\n";
    }
    return finish(tmpl, {{"labels", labels},
                         {"examples", examples},
                         {"locale_directive", locale_directive(message.locale_tag)},
                         {"message", embed_message(message.text)}});
}

RenderedPrompt render_binary(const CleanText& message, const PromptTemplate& tmpl) {
    return finish(tmpl, {{"locale_directive", locale_directive(message.locale_tag)},
                         {"message", embed_message(message.text)}});
}

std::vector<GuidelineSnippet> load_snippets(std::string_view ndjson, const CategoryTaxonomy* taxonomy) {
    std::vector<GuidelineSnippet> out;
    std::istringstream in{std::string(ndjson)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = "line " + std::to_string(line_no);
        GuidelineSnippet s;
        try {
            const json j = json::parse(line);
            s.id = j.at("id").is_string() ? j["id"].get<std::string>() : j["id"].dump();
            s.source_doc = j.value("source_doc", std::string{});
            s.text = j.at("text").get<std::string>();
            s.tags = j.value("tags", LabelSet{});
        } catch (const json::exception& e) {
            throw PromptError(PromptErrc::bad_snippet, where + ": " + e.what());
        }
        if (utf8::length(s.text) > kMaxSnippetChars) {
            throw PromptError(PromptErrc::bad_snippet, where + ": text longer than 800 characters");
        }
        if (taxonomy) {
            for (const auto& tag : s.tags) {
                if (!taxonomy->contains(tag)) throw PromptError(PromptErrc::bad_snippet, where + ": unknown tag " + tag);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<GuidelineSnippet> load_snippets_file(const std::string& path, const CategoryTaxonomy* taxonomy) {
    return load_snippets(read_text_file(path), taxonomy);
}

std::vector<GuidelineSnippet> select_snippets(const LabelSet& categories, std::span<const GuidelineSnippet> snippets,
                                              std::size_t n) {
    std::vector<std::pair<std::size_t, const GuidelineSnippet*>> ranked;
    for (const auto& s : snippets) {
        std::size_t overlap = 0;
        for (const auto& tag : s.tags) overlap += categories.count(tag);
        if (overlap > 0) ranked.emplace_back(overlap, &s);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second->id < b.second->id;
    });
    std::vector<GuidelineSnippet> out;
    for (std::size_t i = 0; i < ranked.size() && i < n; ++i) out.push_back(*ranked[i].second);
    return out;
}

RenderedPrompt render_advisory(const TriageResult& result, std::string_view message_text,
                               std::span<const GuidelineSnippet> snippets, Audience audience, std::size_t n) {
    LabelSet categories;
    for (const auto& [key, _] : result.categories) categories.insert(key);
    std::string assessment;
    for (const auto& key : categories) assessment += (assessment.empty() ? "" : ", ") + key;
    if (assessment.empty()) assessment = "unclassified";
    assessment += "; level " + std::string(to_string(result.level));
    if (result.location_text) assessment += "; location " + embed_message(*result.location_text);

    std::string guidelines;
    for (const auto& s : select_snippets(categories, snippets, n)) {
        guidelines += "[" + s.id + "] (" + s.source_doc + ") " + s.text + "\n";
    }
    const auto task = audience == Audience::dispatcher ? PromptTask::dispatcher_advisory : PromptTask::public_advisory;
    return finish(default_template(task), {{"labels", assessment},
                                           {"guideline_snippets", guidelines},
                                           {"locale_directive", std::string{}},
                                           {"message", embed_message(message_text)}});
}

}  // namespace crisis
