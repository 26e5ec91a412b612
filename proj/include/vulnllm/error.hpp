#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace vulnllm {

/// Coarse failure class; doubles as the CLI exit code.
enum class ErrorClass : int {
    usage = 1,
    data = 2,
    backend = 3,
};

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
    [[nodiscard]] ErrorClass error_class() const noexcept { return cls_; }

private:
    ErrorClass cls_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(ErrorClass::usage, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorClass::data, what) {}
};

class BackendError : public Error {
public:
    explicit BackendError(const std::string& what) : Error(ErrorClass::backend, what) {}
};

// corpus

class MissingField : public DataError {
public:
    MissingField(std::size_t row, std::string name)
        : DataError("row " + std::to_string(row) + ": missing field '" + name + "'"), row_(row),
          name_(std::move(name)) {}
    [[nodiscard]] std::size_t row() const noexcept { return row_; }
    [[nodiscard]] const std::string& name() const noexcept { return name_; }

private:
    std::size_t row_;
    std::string name_;
};

class BadLabel : public DataError {
public:
    BadLabel(std::size_t row, const std::string& value)
        : DataError("row " + std::to_string(row) + ": vul must be 0 or 1, got '" + value + "'"),
          row_(row) {}
    [[nodiscard]] std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class MalformedRow : public DataError {
public:
    MalformedRow(std::size_t row, const std::string& detail)
        : DataError("row " + std::to_string(row) + ": " + detail), row_(row) {}
    [[nodiscard]] std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

struct Shortfall {
    std::string cwe;
    int label = 0;
    std::size_t needed = 0;
    std::size_t available = 0;
};

class InsufficientSamples : public DataError {
public:
    explicit InsufficientSamples(std::vector<Shortfall> shortfalls);
    [[nodiscard]] const std::vector<Shortfall>& shortfalls() const noexcept { return shortfalls_; }

private:
    std::vector<Shortfall> shortfalls_;
};

class IndivisibleTotal : public DataError {
public:
    IndivisibleTotal(std::size_t total, std::size_t divisor)
        : DataError("total " + std::to_string(total) + " is not divisible by " +
                    std::to_string(divisor) + " (2 x number of CWEs)"),
          total_(total) {}
    [[nodiscard]] std::size_t total() const noexcept { return total_; }

private:
    std::size_t total_;
};

// knowledge / index

class DuplicateDoc : public DataError {
public:
    explicit DuplicateDoc(const std::string& doc_id)
        : DataError("document '" + doc_id + "' is already ingested (use overwrite)") {}
};

class EmptyText : public DataError {
public:
    EmptyText() : DataError("text has no tokens after cleaning") {}
};

class DimMismatch : public DataError {
public:
    DimMismatch(std::size_t expected, std::size_t got)
        : DataError("vector dimension " + std::to_string(got) + " does not match store dimension " +
                    std::to_string(expected)) {}
};

class EmptyStore : public DataError {
public:
    EmptyStore() : DataError("vector store is empty") {}
};

class EmbedderUnavailable : public BackendError {
public:
    EmbedderUnavailable(const std::string& endpoint, const std::string& detail)
        : BackendError("embedder at " + endpoint + " unavailable: " + detail) {}
};

// gateway

class BackendUnavailable : public BackendError {
public:
    BackendUnavailable(const std::string& detail, int attempts)
        : BackendError("backend unavailable after " + std::to_string(attempts) +
                       " attempt(s): " + detail),
          attempts_(attempts) {}
    [[nodiscard]] int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

class AuthMissing : public BackendError {
public:
    explicit AuthMissing(const std::string& env_name)
        : BackendError("auth environment variable '" + env_name + "' is not set") {}
};

class Timeout : public BackendError {
public:
    Timeout(const std::string& detail, int attempts)
        : BackendError("request timed out after " + std::to_string(attempts) +
                       " attempt(s): " + detail) {}
};

// evaluation

class LengthMismatch : public DataError {
public:
    LengthMismatch(std::size_t a, std::size_t b)
        : DataError("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

class EmptyMatrix : public DataError {
public:
    EmptyMatrix() : DataError("confusion matrix has no samples") {}
};

class EmptyRows : public DataError {
public:
    EmptyRows() : DataError("no metric rows to average") {}
};

class DegenerateDifferences : public DataError {
public:
    DegenerateDifferences() : DataError("paired differences have zero variance") {}
};

class NoResults : public DataError {
public:
    NoResults() : DataError("no completed strategy runs") {}
};

}  // namespace vulnllm
