#pragma once

// HTTP transport, clocks and the per-host politeness limiter shared by the
// collector, the search client, the remote analyzer and the mirror scanner.

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "pkgintel/core.hpp"

namespace pkgintel {

using Duration = std::chrono::milliseconds;
/// Monotonic time since an arbitrary epoch.
using MonoTime = std::chrono::nanoseconds;

class Clock {
public:
    virtual ~Clock() = default;
    virtual MonoTime now() = 0;
    virtual Timestamp wall_now() = 0;
    virtual void sleep_until(MonoTime t) = 0;
    void sleep_for(Duration d) { sleep_until(now() + d); }
};

class SystemClock final : public Clock {
public:
    MonoTime now() override;
    Timestamp wall_now() override;
    void sleep_until(MonoTime t) override;
};

/// Deterministic clock: sleeping advances time instantly. Thread-safe.
class ManualClock final : public Clock {
public:
    explicit ManualClock(Timestamp wall_start = Timestamp{1700000000}) : wall_start_(wall_start) {}

    MonoTime now() override;
    Timestamp wall_now() override;
    void sleep_until(MonoTime t) override;
    void advance(Duration d);
    /// Total time spent in sleep_until.
    MonoTime slept() const;

private:
    mutable std::mutex mutex_;
    MonoTime now_{0};
    MonoTime slept_{0};
    Timestamp wall_start_;
};

struct CrawlPolicy {
    double max_requests_per_second = 1.0;
    int retries = 3;
    Duration timeout{10000};
    Duration backoff_base{500};
    int max_redirects = 5;
    int max_depth = 1;
    std::vector<std::string> user_agents = default_user_agents();

    static std::vector<std::string> default_user_agents();
    /// Throws Error(InvalidArgument): rate must be > 0, retries >= 0, rotation non-empty.
    void validate() const;
    Duration min_interval() const;
};

OrderedJson to_json(const CrawlPolicy& p);
CrawlPolicy crawl_policy_from_json(const Json& j);

/// Serializes requests per key (host): consecutive grants for one key are at
/// least policy.min_interval() apart. Keys are independent.
class RateLimiter {
public:
    explicit RateLimiter(Clock& clock) : clock_(clock) {}

    /// Blocks until the key's next slot; returns the granted slot time.
    MonoTime acquire(const std::string& key, Duration min_interval);
    /// Grant times per key, in grant order.
    std::map<std::string, std::vector<MonoTime>> grants() const;

private:
    Clock& clock_;
    mutable std::mutex mutex_;
    std::map<std::string, MonoTime> next_slot_;
    std::map<std::string, std::vector<MonoTime>> grants_;
};

using Headers = std::map<std::string, std::string>;  // keys lowercase

struct HttpResponse {
    int status = 0;
    std::string body;
    Headers headers;

    const std::string* header(const std::string& lowercase_name) const;
};

/// Does not follow redirects. Transport failures (connect, timeout) throw
/// FetchError with ErrorKind::Transport and status 0.
class HttpClient {
public:
    virtual ~HttpClient() = default;
    virtual HttpResponse get(const std::string& url, const Headers& headers, Duration timeout) = 0;
    virtual HttpResponse post(const std::string& url, const std::string& body, const Headers& headers,
                              Duration timeout) = 0;
};

/// cpp-httplib backed client (http and https).
class NetworkHttpClient final : public HttpClient {
public:
    HttpResponse get(const std::string& url, const Headers& headers, Duration timeout) override;
    HttpResponse post(const std::string& url, const std::string& body, const Headers& headers,
                      Duration timeout) override;
};

/// Refuses every request; used for --offline so any network attempt is an error.
class OfflineHttpClient final : public HttpClient {
public:
    HttpResponse get(const std::string& url, const Headers&, Duration) override;
    HttpResponse post(const std::string& url, const std::string&, const Headers&, Duration) override;
    std::size_t attempts() const { return attempts_; }

private:
    std::size_t attempts_ = 0;
};

struct RecordedRequest {
    std::string method;
    std::string url;
    Headers headers;
    std::string body;
};

/// Wraps another client and records every request.
class RecordingHttpClient final : public HttpClient {
public:
    explicit RecordingHttpClient(HttpClient& inner) : inner_(inner) {}

    HttpResponse get(const std::string& url, const Headers& headers, Duration timeout) override;
    HttpResponse post(const std::string& url, const std::string& body, const Headers& headers,
                      Duration timeout) override;
    std::vector<RecordedRequest> requests() const;

private:
    HttpClient& inner_;
    mutable std::mutex mutex_;
    std::vector<RecordedRequest> requests_;
};

/// Canned responses keyed by exact URL. Each URL holds a queue; the last entry
/// repeats once the queue is down to one. Unknown URLs answer 404.
class ScriptedHttpClient final : public HttpClient {
public:
    struct Outcome {
        HttpResponse response;
        bool transport_failure = false;
    };

    void add(const std::string& url, HttpResponse response);
    void add(const std::string& url, int status, std::string body, Headers headers = {});
    void add_failure(const std::string& url);
    /// Every request to any URL on `host` fails at the transport level.
    void fail_host(const std::string& host);

    HttpResponse get(const std::string& url, const Headers& headers, Duration timeout) override;
    HttpResponse post(const std::string& url, const std::string& body, const Headers& headers,
                      Duration timeout) override;
    std::size_t calls() const;

private:
    HttpResponse next(const std::string& url);

    mutable std::mutex mutex_;
    std::map<std::string, std::deque<Outcome>> scripts_;
    std::vector<std::string> failing_hosts_;
    std::size_t calls_ = 0;
};

/// Serves `<root>/<host>/<path>` files; a path ending in '/' maps to index.html.
/// Missing files answer 404. This is the on-disk mock site fixture format.
class DirectoryHttpClient final : public HttpClient {
public:
    explicit DirectoryHttpClient(std::filesystem::path root) : root_(std::move(root)) {}

    HttpResponse get(const std::string& url, const Headers& headers, Duration timeout) override;
    HttpResponse post(const std::string& url, const std::string& body, const Headers& headers,
                      Duration timeout) override;

private:
    std::filesystem::path root_;
};

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace pkgintel
