#pragma once

#include "plandistill/backend.hpp"

#include <chrono>
#include <memory>
#include <string>

namespace plandistill {

struct HttpOptions {
    // e.g. "https://api.openai.com/v1" or "http://localhost:8000/v1"
    std::string base_url;
    // Sent as "Authorization: Bearer <key>" when non-empty.
    std::string api_key;
    std::chrono::seconds connect_timeout{10};
    std::chrono::seconds read_timeout{120};
};

// Reads the credential from the named environment variable; empty if unset.
std::string api_key_from_env(const std::string& variable);

// POSTs JSON to <base_url>/<endpoint>. Connection failures surface as
// TransportError; any HTTP status is returned to the caller.
class HttpTransport : public Transport {
public:
    explicit HttpTransport(HttpOptions options);
    ~HttpTransport() override;

    UpstreamResponse post(const UpstreamRequest& request) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace plandistill
