#pragma once

#include "crisis/error.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

// Reader for the small TOML subset used by the shipped configuration files:
// comments, [table], [[array.of.tables]], bare or quoted keys, and values that
// are basic strings, integers, floats, booleans, or (possibly multi-line)
// arrays of those.
namespace crisis::tomlish {

struct Value;
using Array = std::vector<Value>;

struct Value {
    std::variant<std::string, std::int64_t, double, bool, Array> data;

    const std::string* as_string() const { return std::get_if<std::string>(&data); }
    const std::int64_t* as_int() const { return std::get_if<std::int64_t>(&data); }
    const Array* as_array() const { return std::get_if<Array>(&data); }
};

/// Key/value pairs in file order.
using Table = std::vector<std::pair<std::string, Value>>;

const Value* find(const Table& table, std::string_view key);

struct Document {
    Table root;
    std::map<std::string, Table> tables;
    std::map<std::string, std::vector<Table>> array_tables;
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

Document parse(std::string_view text);

/// Basic-string literal with TOML escapes.
std::string quote(std::string_view s);

}  // namespace crisis::tomlish
