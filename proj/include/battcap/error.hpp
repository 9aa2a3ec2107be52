#pragma once

#include <stdexcept>
#include <string>

namespace battcap {

/// Every failure raised by the library. `code` is a short stable token
/// (e.g. "parse", "invariant") that the CLI prints as `ERROR <code>: ...`.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

}  // namespace battcap
