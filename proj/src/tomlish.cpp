#include "crisis/tomlish.hpp"

#include "crisis/utf8.hpp"

#include <charconv>
#include <cstdio>

namespace crisis::tomlish {

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : s_(text) {}

    Document run() {
        Document doc;
        Table* current = &doc.root;
        while (true) {
            skip_blank_lines();
            if (at_end()) break;
            if (peek() == '[') {
                current = header(doc);
            } else {
                auto key = parse_key();
                skip_inline_ws();
                expect('=');
                skip_inline_ws();
                Value v = parse_value();
                for (const auto& [k, _] : *current) {
                    if (k == key) fail("duplicate key '" + key + "'");
                }
                current->emplace_back(std::move(key), std::move(v));
            }
            end_of_line();
        }
        return doc;
    }

private:
    bool at_end() const { return pos_ >= s_.size(); }
    char peek() const { return at_end() ? '\0' : s_[pos_]; }

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(line_, what); }

    void advance() {
        if (peek() == '\n') ++line_;
        ++pos_;
    }

    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        advance();
    }

    void skip_inline_ws() {
        while (peek() == ' ' || peek() == '\t') advance();
    }

    void skip_comment() {
        if (peek() == '#') {
            while (!at_end() && peek() != '\n') advance();
        }
    }

    // Whitespace, newlines and comments, as allowed between array elements.
    void skip_ws_and_comments() {
        while (!at_end()) {
            const char c = peek();
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                advance();
            } else if (c == '#') {
                skip_comment();
            } else {
                break;
            }
        }
    }

    void skip_blank_lines() { skip_ws_and_comments(); }

    void end_of_line() {
        skip_inline_ws();
        skip_comment();
        if (peek() == '\r') advance();
        if (!at_end() && peek() != '\n') fail("unexpected trailing characters");
    }

    Table* header(Document& doc) {
        expect('[');
        const bool array = peek() == '[';
        if (array) advance();
        skip_inline_ws();
        std::string name = parse_key();
        while (peek() == '.') {
            advance();
            name += '.' + parse_key();
        }
        skip_inline_ws();
        expect(']');
        if (array) {
            expect(']');
            auto& list = doc.array_tables[name];
            list.emplace_back();
            return &list.back();
        }
        if (doc.tables.contains(name)) fail("duplicate table [" + name + "]");
        return &doc.tables[name];
    }

    std::string parse_key() {
        if (peek() == '"') return parse_string();
        std::string key;
        while (!at_end()) {
            const char c = peek();
            const bool bare = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                              c == '-';
            if (!bare) break;
            key.push_back(c);
            advance();
        }
        if (key.empty()) fail("expected a key");
        return key;
    }

    std::string parse_string() {
        expect('"');
        std::string out;
        while (true) {
            if (at_end() || peek() == '\n') fail("unterminated string");
            char c = peek();
            advance();
            if (c == '"') break;
            if (c != '\\') {
                out.push_back(c);
                continue;
            }
            const char e = peek();
            advance();
            switch (e) {
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                case 'b': out.push_back('\b'); break;
                case 'f': out.push_back('\f'); break;
                case 'u':
                case 'U': {
                    const std::size_t n = e == 'u' ? 4 : 8;
                    if (pos_ + n > s_.size()) fail("short unicode escape");
                    std::uint32_t cp = 0;
                    auto [p, ec] = std::from_chars(s_.data() + pos_, s_.data() + pos_ + n, cp, 16);
                    if (ec != std::errc{} || p != s_.data() + pos_ + n) fail("bad unicode escape");
                    pos_ += n;
                    utf8::append(out, static_cast<char32_t>(cp));
                    break;
                }
                default: fail("unknown escape");
            }
        }
        return out;
    }

    Value parse_value() {
        const char c = peek();
        if (c == '"') return Value{parse_string()};
        if (c == '[') return Value{parse_array()};
        if (s_.substr(pos_, 4) == "true") {
            pos_ += 4;
            return Value{true};
        }
        if (s_.substr(pos_, 5) == "false") {
            pos_ += 5;
            return Value{false};
        }
        return parse_number();
    }

    Array parse_array() {
        expect('[');
        Array items;
        while (true) {
            skip_ws_and_comments();
            if (peek() == ']') {
                advance();
                return items;
            }
            items.push_back(parse_value());
            skip_ws_and_comments();
            if (peek() == ',') {
                advance();
                continue;
            }
            skip_ws_and_comments();
            expect(']');
            return items;
        }
    }

    Value parse_number() {
        const std::size_t start = pos_;
        while (!at_end()) {
            const char c = peek();
            if ((c >= '0' && c <= '9') || c == '-' || c == '+' || c == '.' || c == 'e' || c == 'E' || c == '_') {
                advance();
            } else {
                break;
            }
        }
        std::string token;
        for (char c : s_.substr(start, pos_ - start)) {
            if (c != '_') token.push_back(c);
        }
        if (token.empty()) fail("expected a value");
        if (token.front() == '+') token.erase(0, 1);
        const char* b = token.data();
        const char* e = token.data() + token.size();
        if (token.find_first_of(".eE") == std::string::npos) {
            std::int64_t v = 0;
            auto [p, ec] = std::from_chars(b, e, v);
            if (ec == std::errc{} && p == e) return Value{v};
        } else {
            double v = 0;
            auto [p, ec] = std::from_chars(b, e, v);
            if (ec == std::errc{} && p == e) return Value{v};
        }
        fail("bad number '" + token + "'");
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

}  // namespace

const Value* find(const Table& table, std::string_view key) {
    for (const auto& [k, v] : table) {
        if (k == key) return &v;
    }
    return nullptr;
}

Document parse(std::string_view text) { return Parser(text).run(); }

std::string quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20 || c == 0x7F) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", static_cast<unsigned>(static_cast<unsigned char>(c)));
                    out += buf;
                } else {
                    out.push_back(c);
                }
        }
    }
    out.push_back('"');
    return out;
}

}  // namespace crisis::tomlish
