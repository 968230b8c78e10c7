#include "crisis/taxonomy.hpp"

#include "crisis/textprep.hpp"
#include "crisis/tomlish.hpp"
#include "crisis/utf8.hpp"

#include <fstream>
#include <sstream>

namespace crisis {

std::string_view to_string(TaxonomyErrc e) {
    switch (e) {
        case TaxonomyErrc::duplicate_key: return "duplicate_key";
        case TaxonomyErrc::empty_lexicon: return "empty_lexicon";
        case TaxonomyErrc::empty_taxonomy: return "empty_taxonomy";
        case TaxonomyErrc::bad_key: return "bad_key";
        case TaxonomyErrc::parse_error: return "parse_error";
    }
    return "parse_error";
}

namespace {

bool is_snake_case(std::string_view key) {
    if (key.empty() || key.front() == '_' || key.back() == '_') return false;
    for (char c : key) {
        if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) return false;
    }
    return true;
}

std::string required_string(const tomlish::Table& t, std::string_view name, std::size_t index) {
    const auto* v = tomlish::find(t, name);
    if (!v || !v->as_string()) {
        throw TaxonomyError(TaxonomyErrc::parse_error,
                            "label #" + std::to_string(index + 1) + " needs a string '" + std::string(name) + "'");
    }
    return *v->as_string();
}

}  // namespace

CategoryTaxonomy::CategoryTaxonomy(std::vector<CategoryLabel> labels) : labels_(std::move(labels)) {
    if (labels_.empty()) throw TaxonomyError(TaxonomyErrc::empty_taxonomy, "no labels defined");
    std::set<std::string> seen;
    for (const auto& label : labels_) {
        if (!is_snake_case(label.key)) throw TaxonomyError(TaxonomyErrc::bad_key, "'" + label.key + "'");
        if (!seen.insert(label.key).second) throw TaxonomyError(TaxonomyErrc::duplicate_key, "'" + label.key + "'");
        if (label.lexicon.empty()) throw TaxonomyError(TaxonomyErrc::empty_lexicon, "'" + label.key + "'");
    }
}

std::optional<std::size_t> CategoryTaxonomy::index_of(std::string_view key) const {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i].key == key) return i;
    }
    return std::nullopt;
}

std::vector<std::string> CategoryTaxonomy::keys() const {
    std::vector<std::string> out;
    out.reserve(labels_.size());
    for (const auto& l : labels_) out.push_back(l.key);
    return out;
}

CategoryTaxonomy load_taxonomy(std::string_view config_text) {
    tomlish::Document doc;
    try {
        doc = tomlish::parse(config_text);
    } catch (const tomlish::ParseError& e) {
        throw TaxonomyError(TaxonomyErrc::parse_error, e.what());
    }
    const auto it = doc.array_tables.find("label");
    if (it == doc.array_tables.end() || it->second.empty()) {
        throw TaxonomyError(TaxonomyErrc::empty_taxonomy, "no [[label]] tables");
    }
    std::vector<CategoryLabel> labels;
    for (std::size_t i = 0; i < it->second.size(); ++i) {
        const auto& table = it->second[i];
        CategoryLabel label;
        label.key = required_string(table, "key", i);
        label.display_name = tomlish::find(table, "display_name") ? required_string(table, "display_name", i) : label.key;
        if (const auto* lex = tomlish::find(table, "lexicon")) {
            const auto* arr = lex->as_array();
            if (!arr) throw TaxonomyError(TaxonomyErrc::parse_error, "lexicon of '" + label.key + "' is not an array");
            for (const auto& term : *arr) {
                if (!term.as_string()) {
                    throw TaxonomyError(TaxonomyErrc::parse_error, "lexicon of '" + label.key + "' holds a non-string");
                }
                auto words = word_tokens(*term.as_string());
                std::string normalized;
                for (const auto& w : words) normalized += (normalized.empty() ? "" : " ") + w;
                if (!normalized.empty()) label.lexicon.insert(normalized);
            }
        }
        labels.push_back(std::move(label));
    }
    return CategoryTaxonomy(std::move(labels));
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CategoryTaxonomy load_taxonomy_file(const std::string& path) { return load_taxonomy(read_text_file(path)); }

std::string serialize_taxonomy(const CategoryTaxonomy& taxonomy) {
    std::string out;
    for (const auto& label : taxonomy.labels()) {
        if (!out.empty()) out += '\n';
        out += "[[label]]\n";
        out += "key = " + tomlish::quote(label.key) + "\n";
        out += "display_name = " + tomlish::quote(label.display_name) + "\n";
        out += "lexicon = [";
        bool first = true;
        for (const auto& term : label.lexicon) {
            out += (first ? "" : ", ") + tomlish::quote(term);
            first = false;
        }
        out += "]\n";
    }
    return out;
}

}  // namespace crisis
