#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace pkgintel {

enum class ErrorKind {
    InvalidName,
    Parse,
    InvalidArgument,
    Transport,  // retryable
    Throttle,
    PermanentFetch,
    Schema,
    ExtractionFailed,
    Io,
    Lock,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    bool retryable() const noexcept { return kind_ == ErrorKind::Transport || kind_ == ErrorKind::Throttle; }

private:
    ErrorKind kind_;
};

/// Failure talking to a remote endpoint. `status` is 0 when no HTTP response was received.
class FetchError : public Error {
public:
    FetchError(ErrorKind kind, const std::string& what, std::string url, int status = 0,
               std::optional<int> retry_after_seconds = std::nullopt)
        : Error(kind, what), url_(std::move(url)), status_(status), retry_after_(retry_after_seconds) {}

    const std::string& url() const noexcept { return url_; }
    int status() const noexcept { return status_; }
    std::optional<int> retry_after_seconds() const noexcept { return retry_after_; }

private:
    std::string url_;
    int status_;
    std::optional<int> retry_after_;
};

class ExtractionError : public Error {
public:
    ExtractionError(const std::string& what, std::string raw_response)
        : Error(ErrorKind::ExtractionFailed, what), raw_(std::move(raw_response)) {}

    const std::string& raw_response() const noexcept { return raw_; }

private:
    std::string raw_;
};

}  // namespace pkgintel
