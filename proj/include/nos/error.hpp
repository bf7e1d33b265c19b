// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace nos {

/// Malformed genome / dataset / config text. `where` is a byte offset,
/// a line number or a JSON pointer, depending on the source.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string where, const std::string& cause)
        : std::runtime_error(where.empty() ? cause : where + ": " + cause), where_(std::move(where)) {}

    const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

/// Invalid or pathological configuration (bad parameters, exhausted
/// rejection loops).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A genome that violates a structural invariant.
class InvalidGenome : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace nos
