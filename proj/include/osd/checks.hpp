#pragma once

// Runtime invariant collection. Algorithm invariants are checked as the
// simulation runs; `strict` turns a violation into an exception (the default
// in tests), otherwise violations accumulate and surface in reports.
// Diagnostics are soft bounds whose constants are configuration, not
// contract; they are only ever reported.

#include <stdexcept>
#include <string>
#include <vector>

namespace osd {

struct InvariantFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CheckLog {
    bool strict = true;
    std::vector<std::string> violations;
    std::vector<std::string> diagnostics;

    void fail(const std::string& what) {
        violations.push_back(what);
        if (strict) throw InvariantFailure(what);
    }
    void require(bool ok, const std::string& what) {
        if (!ok) fail(what);
    }
    void diag(bool ok, const std::string& what) {
        if (!ok) diagnostics.push_back(what);
    }
};

}  // namespace osd
