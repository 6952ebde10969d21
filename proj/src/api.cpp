#include "pkgintel/api.hpp"

#include "httplib.h"

#include "pkgintel/strings.hpp"
#include "pkgintel/url.hpp"

namespace pkgintel {

namespace {

ApiResponse error_response(int status, const std::string& message) {
    return {status, Json{{"error", message}}.dump() + "\n"};
}

ApiResponse json_lines(const std::vector<AggregatedIntel>& aggs) {
    OrderedJson arr = OrderedJson::array();
    for (const auto& a : aggs) arr.push_back(to_json(a));
    return {200, arr.dump() + "\n"};
}

}  // namespace

ApiResponse handle_api_request(const IntelStore& store, const std::string& method, const std::string& path,
                               const std::map<std::string, std::string>& params) {
    if (method != "GET") return error_response(405, "read-only API");
    std::vector<std::string> parts;
    for (auto& p : str::split(path, '/'))
        if (!p.empty()) parts.push_back(url_decode(p));
    try {
        if (parts.size() == 2 && parts[0] == "v1" && parts[1] == "stats") {
            auto m = store.meta();
            std::size_t pypi = 0, npm = 0;
            for (const auto& a : store.all()) (a.ecosystem == Ecosystem::PyPI ? pypi : npm)++;
            OrderedJson j{{"created_at", m.created_at.to_iso()}, {"record_count", m.record_count},
                          {"source_count", m.source_count}, {"log_records", m.log_records},
                          {"by_ecosystem", {{"PyPI", pypi}, {"NPM", npm}}}};
            return {200, j.dump() + "\n"};
        }
        if (parts.size() >= 2 && parts[0] == "v1" && parts[1] == "packages") {
            if (parts.size() == 2) {
                QueryFilter f;
                if (auto it = params.find("ecosystem"); it != params.end() && !it->second.empty())
                    f.ecosystem = parse_ecosystem(it->second);
                if (auto it = params.find("name"); it != params.end() && !it->second.empty()) f.name = it->second;
                if (auto it = params.find("date_range"); it != params.end() && !it->second.empty())
                    f.date_range = parse_date_range(it->second);
                if (auto it = params.find("source_id"); it != params.end() && !it->second.empty())
                    f.source_id = it->second;
                return json_lines(store.query(f));
            }
            // npm scopes arrive as two segments: /v1/packages/npm/@scope/name
            if (parts.size() == 4 || parts.size() == 5) {
                auto eco = parse_ecosystem(parts[2]);
                std::string name = parts[3];
                if (parts.size() == 5) name += "/" + parts[4];
                const auto* agg = store.find(eco, name);
                if (!agg) return error_response(404, "unknown package " + name);
                return {200, to_json(*agg).dump() + "\n"};
            }
        }
    } catch (const Error& e) {
        return error_response(400, e.what());
    }
    return error_response(404, "no such endpoint");
}

struct ApiServer::Impl {
    std::shared_ptr<const IntelStore> store;
    httplib::Server server;
};

ApiServer::ApiServer(std::shared_ptr<const IntelStore> store) : impl_(std::make_unique<Impl>()) {
    impl_->store = std::move(store);
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> params;
        for (const auto& [k, v] : req.params) params.emplace(k, v);
        auto out = handle_api_request(*impl_->store, req.method, req.path, params);
        res.status = out.status;
        res.set_content(out.body, "application/json");
    };
    impl_->server.Get(R"(/.*)", handler);
    impl_->server.Post(R"(/.*)", handler);
}

ApiServer::~ApiServer() { stop(); }

bool ApiServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int ApiServer::bind_any(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool ApiServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void ApiServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace pkgintel
