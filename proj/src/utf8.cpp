#include "crisis/utf8.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

namespace crisis::utf8 {

namespace {

template <class Fn>
void for_each_cp(std::string_view text, Fn&& fn) {
    const auto* s = reinterpret_cast<const uint8_t*>(text.data());
    const auto n = static_cast<int32_t>(text.size());
    int32_t i = 0;
    while (i < n) {
        UChar32 c;
        U8_NEXT(s, i, n, c);
        fn(c);
    }
}

}  // namespace

bool is_valid(std::string_view text) {
    bool ok = true;
    for_each_cp(text, [&](UChar32 c) { ok = ok && c >= 0; });
    return ok;
}

std::size_t length(std::string_view text) {
    std::size_t count = 0;
    for_each_cp(text, [&](UChar32) { ++count; });
    return count;
}

std::u32string decode(std::string_view text) {
    std::u32string out;
    out.reserve(text.size());
    for_each_cp(text, [&](UChar32 c) { out.push_back(c < 0 ? U'�' : static_cast<char32_t>(c)); });
    return out;
}

void append(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string encode(std::u32string_view cps) {
    std::string out;
    out.reserve(cps.size());
    for (char32_t c : cps) append(out, c);
    return out;
}

std::string to_lower(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for_each_cp(text, [&](UChar32 c) {
        append(out, c < 0 ? U'�' : static_cast<char32_t>(u_tolower(c)));
    });
    return out;
}

std::vector<std::string> split_whitespace(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for_each_cp(text, [&](UChar32 c) {
        if (c >= 0 && u_isUWhiteSpace(c)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
        } else {
            append(current, c < 0 ? U'�' : static_cast<char32_t>(c));
        }
    });
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

}  // namespace crisis::utf8
