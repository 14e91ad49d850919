#pragma once

#include <stdexcept>
#include <string>

namespace anteriseg {

/// Input that violates a documented precondition (bad parameters, malformed
/// manifest rows, leakage-guard violations, ...). Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable/unwritable files and undecodable payloads. Maps to exit code 2.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ValidationError(what);
}

}  // namespace anteriseg
