#include "pkgintel/remote_backend.hpp"

#include <cstdlib>

namespace pkgintel {

RemoteBackendConfig RemoteBackendConfig::from_env() {
    RemoteBackendConfig c;
    if (const char* v = std::getenv("PKGINTEL_ANALYZER_ENDPOINT")) c.endpoint = v;
    if (const char* v = std::getenv("PKGINTEL_ANALYZER_API_KEY")) c.api_key = v;
    if (const char* v = std::getenv("PKGINTEL_ANALYZER_MODEL"); v && *v) c.model = v;
    return c;
}

RemoteBackend::RemoteBackend(RemoteBackendConfig config, HttpClient& http) : config_(std::move(config)), http_(http) {
    if (config_.endpoint.empty())
        throw Error(ErrorKind::InvalidArgument, "remote analyzer needs an endpoint (PKGINTEL_ANALYZER_ENDPOINT)");
}

OrderedJson RemoteBackend::request_body(const std::string& prompt) const {
    OrderedJson body;
    body["model"] = config_.model;
    body["temperature"] = 0;
    body["messages"] = OrderedJson::array({
        OrderedJson{{"role", "system"}, {"content", config_.system_prompt}},
        OrderedJson{{"role", "user"}, {"content", prompt}},
    });
    return body;
}

BackendReply RemoteBackend::call(const std::string& prompt) {
    Headers headers{{"content-type", "application/json"}};
    if (!config_.api_key.empty()) headers["authorization"] = "Bearer " + config_.api_key;
    auto resp = http_.post(config_.endpoint, request_body(prompt).dump(), headers, config_.timeout);
    if (resp.status == 429) throw FetchError(ErrorKind::Throttle, "analyzer throttled", config_.endpoint, 429);
    if (resp.status >= 500)
        throw FetchError(ErrorKind::Transport, "analyzer HTTP " + std::to_string(resp.status), config_.endpoint,
                         resp.status);
    if (resp.status != 200)
        throw FetchError(ErrorKind::PermanentFetch, "analyzer HTTP " + std::to_string(resp.status), config_.endpoint,
                         resp.status);
    auto j = Json::parse(resp.body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
        throw ExtractionError("analyzer response lacks choices", resp.body);
    const auto& msg = j["choices"][0];
    std::string content;
    if (msg.contains("message") && msg["message"].contains("content") && msg["message"]["content"].is_string())
        content = msg["message"]["content"].get<std::string>();
    else if (msg.contains("text") && msg["text"].is_string())
        content = msg["text"].get<std::string>();
    else
        throw ExtractionError("analyzer choice has no content", resp.body);
    BackendReply reply;
    reply.text = std::move(content);
    if (j.contains("usage") && j["usage"].is_object()) {
        reply.prompt_tokens = j["usage"].value("prompt_tokens", 0);
        reply.response_tokens = j["usage"].value("completion_tokens", 0);
    }
    return reply;
}

BackendReply RemoteBackend::extract(const std::string& prompt, const PageDocument&, const std::set<std::string>&) {
    return call(prompt);
}

BackendReply RemoteBackend::relate(const std::string& prompt, const EntitySet&, const PageDocument&) {
    return call(prompt);
}

BackendReply RemoteBackend::verify(const std::string& prompt, const std::vector<RecordDraft>&, const PageDocument&) {
    return call(prompt);
}

}  // namespace pkgintel
