#include "pkgintel/http.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "httplib.h"
#include "pkgintel/strings.hpp"
#include "pkgintel/url.hpp"

namespace pkgintel {

MonoTime SystemClock::now() {
    return std::chrono::duration_cast<MonoTime>(std::chrono::steady_clock::now().time_since_epoch());
}

Timestamp SystemClock::wall_now() {
    return Timestamp{std::chrono::duration_cast<std::chrono::seconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count()};
}

void SystemClock::sleep_until(MonoTime t) {
    auto delta = t - now();
    if (delta > MonoTime::zero()) std::this_thread::sleep_for(delta);
}

MonoTime ManualClock::now() {
    std::lock_guard lock(mutex_);
    return now_;
}

Timestamp ManualClock::wall_now() {
    std::lock_guard lock(mutex_);
    return Timestamp{wall_start_.seconds + std::chrono::duration_cast<std::chrono::seconds>(now_).count()};
}

void ManualClock::sleep_until(MonoTime t) {
    std::lock_guard lock(mutex_);
    if (t > now_) {
        slept_ += t - now_;
        now_ = t;
    }
}

void ManualClock::advance(Duration d) {
    std::lock_guard lock(mutex_);
    now_ += d;
}

MonoTime ManualClock::slept() const {
    std::lock_guard lock(mutex_);
    return slept_;
}

std::vector<std::string> CrawlPolicy::default_user_agents() {
    return {
        "Mozilla/5.0 (X11; Linux x86_64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/120.0 Safari/537.36",
        "Mozilla/5.0 (Windows NT 10.0; Win64; x64; rv:121.0) Gecko/20100101 Firefox/121.0",
        "Mozilla/5.0 (Macintosh; Intel Mac OS X 14_2) AppleWebKit/605.1.15 (KHTML, like Gecko) Version/17.2 Safari/605.1.15",
    };
}

void CrawlPolicy::validate() const {
    if (!(max_requests_per_second > 0.0))
        throw Error(ErrorKind::InvalidArgument, "crawl policy: max_requests_per_second must be > 0");
    if (retries < 0) throw Error(ErrorKind::InvalidArgument, "crawl policy: retries must be >= 0");
    if (timeout <= Duration::zero()) throw Error(ErrorKind::InvalidArgument, "crawl policy: timeout must be > 0");
    if (user_agents.empty()) throw Error(ErrorKind::InvalidArgument, "crawl policy: user agent rotation is empty");
    if (max_redirects < 0) throw Error(ErrorKind::InvalidArgument, "crawl policy: max_redirects must be >= 0");
}

Duration CrawlPolicy::min_interval() const {
    return Duration(static_cast<Duration::rep>(1000.0 / max_requests_per_second + 0.5));
}

OrderedJson to_json(const CrawlPolicy& p) {
    OrderedJson j;
    j["max_requests_per_second"] = p.max_requests_per_second;
    j["retries"] = p.retries;
    j["timeout_ms"] = p.timeout.count();
    j["backoff_base_ms"] = p.backoff_base.count();
    j["max_redirects"] = p.max_redirects;
    j["max_depth"] = p.max_depth;
    j["user_agents"] = p.user_agents;
    return j;
}

CrawlPolicy crawl_policy_from_json(const Json& j) {
    CrawlPolicy p;
    p.max_requests_per_second = j.value("max_requests_per_second", p.max_requests_per_second);
    p.retries = j.value("retries", p.retries);
    p.timeout = Duration(j.value("timeout_ms", p.timeout.count()));
    p.backoff_base = Duration(j.value("backoff_base_ms", p.backoff_base.count()));
    p.max_redirects = j.value("max_redirects", p.max_redirects);
    p.max_depth = j.value("max_depth", p.max_depth);
    if (j.contains("user_agents")) p.user_agents = j.at("user_agents").get<std::vector<std::string>>();
    p.validate();
    return p;
}

MonoTime RateLimiter::acquire(const std::string& key, Duration min_interval) {
    MonoTime slot;
    {
        std::lock_guard lock(mutex_);
        const MonoTime now = clock_.now();
        auto it = next_slot_.find(key);
        slot = (it == next_slot_.end()) ? now : std::max(now, it->second);
        next_slot_[key] = slot + min_interval;
        grants_[key].push_back(slot);
    }
    clock_.sleep_until(slot);
    return slot;
}

std::map<std::string, std::vector<MonoTime>> RateLimiter::grants() const {
    std::lock_guard lock(mutex_);
    return grants_;
}

const std::string* HttpResponse::header(const std::string& lowercase_name) const {
    auto it = headers.find(lowercase_name);
    return it == headers.end() ? nullptr : &it->second;
}

namespace {

HttpResponse convert(const httplib::Result& res, const std::string& url) {
    if (!res) {
        const auto err = res.error();
        const bool timeout = err == httplib::Error::Read || err == httplib::Error::Write ||
                             err == httplib::Error::ConnectionTimeout;
        throw FetchError(ErrorKind::Transport,
                         std::string(timeout ? "timeout" : "transport failure") + " (" + httplib::to_string(err) +
                             ") for " + url,
                         url);
    }
    HttpResponse out;
    out.status = res->status;
    out.body = res->body;
    for (const auto& [k, v] : res->headers) out.headers[str::to_lower(k)] = v;
    return out;
}

httplib::Headers to_httplib(const Headers& h) {
    httplib::Headers out;
    for (const auto& [k, v] : h) out.emplace(k, v);
    return out;
}

httplib::Client make_client(const Url& u, Duration timeout) {
    httplib::Client cli(u.origin());
    cli.set_follow_location(false);
    const auto secs = timeout.count() / 1000;
    const auto usecs = (timeout.count() % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    return cli;
}

Url require_url(const std::string& url) {
    auto u = parse_url(url);
    if (!u || !u->is_http()) throw FetchError(ErrorKind::PermanentFetch, "not an http(s) URL: " + url, url);
    return *u;
}

}  // namespace

HttpResponse NetworkHttpClient::get(const std::string& url, const Headers& headers, Duration timeout) {
    const Url u = require_url(url);
    auto cli = make_client(u, timeout);
    return convert(cli.Get(u.target(), to_httplib(headers)), url);
}

HttpResponse NetworkHttpClient::post(const std::string& url, const std::string& body, const Headers& headers,
                                     Duration timeout) {
    const Url u = require_url(url);
    auto cli = make_client(u, timeout);
    auto it = headers.find("content-type");
    const std::string content_type = it == headers.end() ? "application/json" : it->second;
    return convert(cli.Post(u.target(), to_httplib(headers), body, content_type), url);
}

HttpResponse OfflineHttpClient::get(const std::string& url, const Headers&, Duration) {
    ++attempts_;
    throw FetchError(ErrorKind::PermanentFetch, "offline mode: refusing network request to " + url, url);
}

HttpResponse OfflineHttpClient::post(const std::string& url, const std::string&, const Headers&, Duration) {
    ++attempts_;
    throw FetchError(ErrorKind::PermanentFetch, "offline mode: refusing network request to " + url, url);
}

HttpResponse RecordingHttpClient::get(const std::string& url, const Headers& headers, Duration timeout) {
    {
        std::lock_guard lock(mutex_);
        requests_.push_back({"GET", url, headers, {}});
    }
    return inner_.get(url, headers, timeout);
}

HttpResponse RecordingHttpClient::post(const std::string& url, const std::string& body, const Headers& headers,
                                       Duration timeout) {
    {
        std::lock_guard lock(mutex_);
        requests_.push_back({"POST", url, headers, body});
    }
    return inner_.post(url, body, headers, timeout);
}

std::vector<RecordedRequest> RecordingHttpClient::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

void ScriptedHttpClient::add(const std::string& url, HttpResponse response) {
    std::lock_guard lock(mutex_);
    scripts_[url].push_back({std::move(response), false});
}

void ScriptedHttpClient::add(const std::string& url, int status, std::string body, Headers headers) {
    add(url, HttpResponse{status, std::move(body), std::move(headers)});
}

void ScriptedHttpClient::add_failure(const std::string& url) {
    std::lock_guard lock(mutex_);
    scripts_[url].push_back({{}, true});
}

void ScriptedHttpClient::fail_host(const std::string& host) {
    std::lock_guard lock(mutex_);
    failing_hosts_.push_back(str::to_lower(host));
}

HttpResponse ScriptedHttpClient::next(const std::string& url) {
    std::lock_guard lock(mutex_);
    ++calls_;
    if (auto u = parse_url(url)) {
        if (std::find(failing_hosts_.begin(), failing_hosts_.end(), u->host) != failing_hosts_.end())
            throw FetchError(ErrorKind::Transport, "timeout (scripted) for " + url, url);
    }
    auto it = scripts_.find(url);
    if (it == scripts_.end() || it->second.empty()) return HttpResponse{404, "not found", {}};
    Outcome out = it->second.front();
    if (it->second.size() > 1) it->second.pop_front();
    if (out.transport_failure) throw FetchError(ErrorKind::Transport, "timeout (scripted) for " + url, url);
    return out.response;
}

HttpResponse ScriptedHttpClient::get(const std::string& url, const Headers&, Duration) { return next(url); }

HttpResponse ScriptedHttpClient::post(const std::string& url, const std::string&, const Headers&, Duration) {
    return next(url);
}

std::size_t ScriptedHttpClient::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

HttpResponse DirectoryHttpClient::get(const std::string& url, const Headers&, Duration) {
    auto u = parse_url(url);
    if (!u) throw FetchError(ErrorKind::PermanentFetch, "bad URL " + url, url);
    std::string rel = url_decode(u->path);
    if (rel.find("..") != std::string::npos) return HttpResponse{400, "bad path", {}};
    if (rel.empty() || rel.back() == '/') rel += "index.html";
    auto path = root_ / u->host / rel.substr(1);
    std::error_code ec;
    if (std::filesystem::is_directory(path, ec)) path /= "index.html";
    if (!std::filesystem::is_regular_file(path, ec)) return HttpResponse{404, "not found", {}};
    return HttpResponse{200, read_file(path), {}};
}

HttpResponse DirectoryHttpClient::post(const std::string& url, const std::string&, const Headers&, Duration) {
    return HttpResponse{405, "method not allowed: " + url, {}};
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::Io, "SHA-256 failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[digest[i] >> 4];
        out += kHex[digest[i] & 15];
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error(ErrorKind::Io, "write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error(ErrorKind::Io, "rename failed: " + path.string() + ": " + ec.message());
    }
}

}  // namespace pkgintel
