#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crisis {

/// Exception carrying a machine-readable code alongside the message.
/// Each module instantiates it with its own code enum and a matching
/// `to_string(Code)` overload.
template <class Code>
class CodedError : public std::runtime_error {
public:
    CodedError(Code code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + (detail.empty() ? "" : ": " + detail)),
          code_(code),
          detail_(detail) {}

    Code code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    Code code_;
    std::string detail_;
};

}  // namespace crisis
