#pragma once

#include <stdexcept>
#include <string>

namespace sysrisk {

// Exit-code classes used by the command-line front end.
enum class ErrorClass { usage = 1, data = 2, numerical = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
    ErrorClass error_class() const noexcept { return cls_; }
    int exit_code() const noexcept { return static_cast<int>(cls_); }

private:
    ErrorClass cls_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& w) : Error(ErrorClass::usage, w) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorClass::usage, w) {}
};

struct ParseError : Error {
    ParseError(const std::string& file, std::size_t row, const std::string& column,
               const std::string& msg)
        : Error(ErrorClass::data, file + ": row " + std::to_string(row) + ", column '" + column +
                                      "': " + msg),
          row(row),
          column(column) {}
    std::size_t row;
    std::string column;
};

struct DataError : Error {
    explicit DataError(const std::string& w) : Error(ErrorClass::data, w) {}
};

struct CoverageError : DataError {
    using DataError::DataError;
};

struct UniverseError : DataError {
    using DataError::DataError;
};

struct AlignmentError : DataError {
    using DataError::DataError;
};

struct DegenerateInputError : DataError {
    using DataError::DataError;
};

struct DomainError : Error {
    explicit DomainError(const std::string& w) : Error(ErrorClass::numerical, w) {}
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& w) : Error(ErrorClass::numerical, w) {}
};

struct RankError : NumericalError {
    using NumericalError::NumericalError;
};

struct InversionError : NumericalError {
    using NumericalError::NumericalError;
};

// Optimizer gave up. Carries the best iterate found so callers can still inspect it.
template <class Best>
struct EstimationError : NumericalError {
    EstimationError(const std::string& w, Best best) : NumericalError(w), best_iterate(std::move(best)) {}
    Best best_iterate;
};

}  // namespace sysrisk
