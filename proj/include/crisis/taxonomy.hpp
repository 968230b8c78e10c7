#pragma once

#include "crisis/error.hpp"

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace crisis {

struct CategoryLabel {
    std::string key;
    std::string display_name;
    std::set<std::string> lexicon;

    friend bool operator==(const CategoryLabel&, const CategoryLabel&) = default;
};

enum class TaxonomyErrc { duplicate_key, empty_lexicon, empty_taxonomy, bad_key, parse_error };

std::string_view to_string(TaxonomyErrc e);

using TaxonomyError = CodedError<TaxonomyErrc>;

/// Flat, ordered label set. Order is the file order and is the tie-break
/// order used by routing.
class CategoryTaxonomy {
public:
    CategoryTaxonomy() = default;
    explicit CategoryTaxonomy(std::vector<CategoryLabel> labels);

    const std::vector<CategoryLabel>& labels() const noexcept { return labels_; }
    std::size_t size() const noexcept { return labels_.size(); }

    bool contains(std::string_view key) const { return index_of(key).has_value(); }
    std::optional<std::size_t> index_of(std::string_view key) const;
    std::vector<std::string> keys() const;

    friend bool operator==(const CategoryTaxonomy&, const CategoryTaxonomy&) = default;

private:
    std::vector<CategoryLabel> labels_;
};

/// Parses `[[label]]` tables with `key`, `display_name` and `lexicon`.
CategoryTaxonomy load_taxonomy(std::string_view config_text);
CategoryTaxonomy load_taxonomy_file(const std::string& path);

std::string serialize_taxonomy(const CategoryTaxonomy& taxonomy);

/// Text of the taxonomy file shipped under data/config.
std::string_view default_taxonomy_text();

std::string read_text_file(const std::string& path);

}  // namespace crisis
