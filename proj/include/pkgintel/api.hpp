#pragma once

// Read-only HTTP API over an immutable store snapshot.

#include <map>
#include <memory>
#include <string>

#include "pkgintel/store.hpp"

namespace pkgintel {

struct ApiResponse {
    int status = 200;
    std::string body;  // JSON
};

/// GET /v1/packages?ecosystem=&name=, GET /v1/packages/{ecosystem}/{name}, GET /v1/stats.
/// `path` is URL-decoded segment by segment; scoped npm names may be passed encoded.
ApiResponse handle_api_request(const IntelStore& store, const std::string& method, const std::string& path,
                               const std::map<std::string, std::string>& params);

/// Blocks serving on host:port until stop() is called from another thread.
class ApiServer {
public:
    explicit ApiServer(std::shared_ptr<const IntelStore> store);
    ~ApiServer();
    /// Returns false when the port cannot be bound.
    bool listen(const std::string& host, int port);
    /// Binds to an ephemeral port; returns it (or -1).
    int bind_any(const std::string& host);
    bool listen_after_bind();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace pkgintel
