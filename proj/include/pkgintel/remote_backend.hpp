#pragma once

// Chat-completion style analyzer endpoint (model, messages, temperature 0).

#include <string>

#include "pkgintel/http.hpp"
#include "pkgintel/ltm.hpp"

namespace pkgintel {

struct RemoteBackendConfig {
    std::string endpoint;
    std::string api_key;
    std::string model = "gpt-4";
    Duration timeout{60000};
    std::string system_prompt = "You extract malicious package intelligence and answer with JSON only.";

    /// PKGINTEL_ANALYZER_ENDPOINT, PKGINTEL_ANALYZER_API_KEY, PKGINTEL_ANALYZER_MODEL.
    static RemoteBackendConfig from_env();
};

/// The rendered stage prompt is sent as the user message; the reply's first choice
/// is returned verbatim. Non-200 answers: 429 -> Throttle, 5xx/transport -> Transport,
/// anything else -> PermanentFetch.
class RemoteBackend final : public AnalyzerBackend {
public:
    RemoteBackend(RemoteBackendConfig config, HttpClient& http);

    std::string name() const override { return "remote:" + config_.model; }
    BackendReply extract(const std::string& prompt, const PageDocument& doc,
                         const std::set<std::string>& candidates) override;
    BackendReply relate(const std::string& prompt, const EntitySet& entities, const PageDocument& doc) override;
    BackendReply verify(const std::string& prompt, const std::vector<RecordDraft>& drafts,
                        const PageDocument& doc) override;

    /// Request body for one prompt (exposed for tests).
    OrderedJson request_body(const std::string& prompt) const;

private:
    BackendReply call(const std::string& prompt);

    RemoteBackendConfig config_;
    HttpClient& http_;
};

}  // namespace pkgintel
