#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bladekit {

/// Base class for all bladekit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input text (detection files, manifests, KB documents).
/// Carries the 1-based line number when the source is line-oriented.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what, int line = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_ = 0;
};

/// Invalid or inconsistent run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Report document failed schema validation; one message per failing field.
class SchemaError : public Error {
public:
    SchemaError(const std::string& what, std::vector<std::string> fields)
        : Error(join(what, fields)), fields_(std::move(fields)) {}

    const std::vector<std::string>& fields() const noexcept { return fields_; }

private:
    static std::string join(const std::string& what, const std::vector<std::string>& fields) {
        std::string msg = what;
        for (const auto& f : fields) {
            msg += "\n  - " + f;
        }
        return msg;
    }

    std::vector<std::string> fields_;
};

enum class HttpErrorKind {
    transport,          ///< connection failed or was dropped
    timeout,            ///< connect/read deadline exceeded
    auth,               ///< 401/403 from the endpoint
    http_status,        ///< other non-2xx status
    malformed,          ///< 2xx body that does not match the wire shape
    retries_exhausted,  ///< retryable failures persisted through every attempt
};

std::string http_error_kind_name(HttpErrorKind kind);

/// Endpoint failure, classified so callers can branch on the cause.
class HttpError : public Error {
public:
    HttpError(HttpErrorKind kind, const std::string& what, int status = 0, int attempts = 1)
        : Error(http_error_kind_name(kind) + ": " + what), kind_(kind), status_(status), attempts_(attempts) {}

    HttpErrorKind kind() const noexcept { return kind_; }
    int status() const noexcept { return status_; }
    int attempts() const noexcept { return attempts_; }

private:
    HttpErrorKind kind_;
    int status_;
    int attempts_;
};

/// Judge endpoint answered, but the answer could not be scored even after
/// retrying. Carries the raw text of the last answer.
class JudgeError : public Error {
public:
    JudgeError(const std::string& what, std::string raw) : Error(what), raw_(std::move(raw)) {}

    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

}  // namespace bladekit
