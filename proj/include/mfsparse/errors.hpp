#pragma once

#include <stdexcept>
#include <string>

namespace mfsparse {

/// Base of every error raised by the toolkit. `code()` is the stable,
/// machine-readable identifier written into error JSON by the CLI.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message, bool numerical)
        : std::runtime_error(message), code_(std::move(code)), numerical_(numerical) {}

    const std::string& code() const noexcept { return code_; }
    /// True for numerical failures (exit code 3), false for validation errors (exit code 2).
    bool numerical() const noexcept { return numerical_; }

private:
    std::string code_;
    bool numerical_;
};

#define MFSPARSE_DEFINE_ERROR(Name, code_str, is_numerical)                  \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& message)                            \
            : Error(code_str, message, is_numerical) {}                      \
    };

MFSPARSE_DEFINE_ERROR(ValidationError, "validation", false)
MFSPARSE_DEFINE_ERROR(SingularEvaluation, "singular-evaluation", true)
MFSPARSE_DEFINE_ERROR(UnsupportedOperator, "unsupported-operator", false)
MFSPARSE_DEFINE_ERROR(DegenerateDomain, "degenerate-domain", false)
MFSPARSE_DEFINE_ERROR(InvalidDilation, "invalid-dilation", false)
MFSPARSE_DEFINE_ERROR(NotAHilbertNorm, "not-a-hilbert-norm", false)
MFSPARSE_DEFINE_ERROR(SingularGram, "singular-gram", true)
MFSPARSE_DEFINE_ERROR(NonConvergence, "non-convergence", true)
MFSPARSE_DEFINE_ERROR(SingularW, "singular-w", true)
MFSPARSE_DEFINE_ERROR(InsufficientCandidates, "insufficient-candidates", false)
MFSPARSE_DEFINE_ERROR(NearBoundary, "near-boundary", false)

}  // namespace mfsparse
