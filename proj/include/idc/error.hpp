#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace idc {

enum class ErrorCode {
    OutOfRange,
    WrongArity,
    InvalidTheta,
    LTooLarge,
    EmptyTrace,
    InvalidParam,
    DomainExceeded,
    InvalidAlpha,
    NoFeasibleFit,
    Empty,
    DegenerateInput,
    TooShort,
    DimMismatch,
    NonConvergence,
    NoVisits,
    AllCellsSparse,
    UnknownStudy,
    IO,
    InvalidConfig,
};

const char* to_string(ErrorCode code);

// Every failing operation in the library throws this. `index` carries the
// offending entry when the error is positional (e.g. OutOfRange).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what, std::optional<std::size_t> index = std::nullopt)
        : std::runtime_error(what), code_(code), index_(index) {}

    ErrorCode code() const noexcept { return code_; }
    std::optional<std::size_t> index() const noexcept { return index_; }

private:
    ErrorCode code_;
    std::optional<std::size_t> index_;
};

}  // namespace idc
