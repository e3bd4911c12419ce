#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace glassgpt {

/// Base of every exception thrown by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand extents do not agree.
class shape_error : public error {
public:
    using error::error;
};

/// A kernel produced NaN or Inf.
class numeric_error : public error {
public:
    using error::error;
};

/// Malformed vocabulary or merges file, or an out-of-range token id.
class tokenizer_error : public error {
public:
    using error::error;
};

/// Malformed checkpoint container. `tensor()` names the offending entry when
/// one can be identified.
class checkpoint_error : public error {
public:
    explicit checkpoint_error(const std::string& what, std::string tensor = {})
        : error(what), tensor_(std::move(tensor)) {}

    const std::string& tensor() const noexcept { return tensor_; }

private:
    std::string tensor_;
};

/// Tensor map does not describe a valid model (missing tensor, wrong shape).
class model_error : public error {
public:
    using error::error;
};

/// Caller violated an operation's precondition (bad parameter value).
class precondition_error : public error {
public:
    using error::error;
};

/// Sequence would exceed the model's context window.
class context_overflow : public error {
public:
    context_overflow(const std::string& what, std::size_t limit, std::size_t step = 0)
        : error(what), limit_(limit), step_(step) {}

    std::size_t limit() const noexcept { return limit_; }
    /// Generation step (1-based) at which the overflow would occur; 0 outside generation.
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t limit_;
    std::size_t step_;
};

}  // namespace glassgpt
