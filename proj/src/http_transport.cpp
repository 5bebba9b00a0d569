#include "plandistill/http_transport.hpp"

#include <httplib.h>

#include <cstdlib>
#include <mutex>

namespace plandistill {

std::string api_key_from_env(const std::string& variable) {
    const char* v = std::getenv(variable.c_str());
    return v ? std::string(v) : std::string();
}

struct HttpTransport::Impl {
    HttpOptions options;
    std::string origin;       // scheme://host[:port]
    std::string path_prefix;  // "/v1", or empty
};

HttpTransport::HttpTransport(HttpOptions options) : impl_(std::make_unique<Impl>()) {
    impl_->options = std::move(options);
    std::string url = impl_->options.base_url;
    while (!url.empty() && url.back() == '/') url.pop_back();
    const std::size_t scheme = url.find("://");
    if (url.empty() || scheme == std::string::npos) {
        throw ConfigError("base URL must look like http(s)://host[:port][/path], got '" +
                          impl_->options.base_url + "'");
    }
    const std::string proto = url.substr(0, scheme);
    if (proto != "http" && proto != "https") throw ConfigError("unsupported URL scheme '" + proto + "'");
    const std::size_t slash = url.find('/', scheme + 3);
    impl_->origin = url.substr(0, slash);
    impl_->path_prefix = slash == std::string::npos ? std::string() : url.substr(slash);
}

HttpTransport::~HttpTransport() = default;

UpstreamResponse HttpTransport::post(const UpstreamRequest& request) {
    // httplib clients are not safe to share between threads; one per call.
    httplib::Client client(impl_->origin);
    client.set_connection_timeout(impl_->options.connect_timeout);
    client.set_read_timeout(impl_->options.read_timeout);
    httplib::Headers headers;
    if (!impl_->options.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + impl_->options.api_key);
    }
    const std::string path = impl_->path_prefix + "/" + request.endpoint;
    auto res = client.Post(path, headers, request.body, "application/json");
    if (!res) {
        throw TransportError("POST " + impl_->origin + path + " failed: " + httplib::to_string(res.error()));
    }
    return {res->status, res->body};
}

}  // namespace plandistill
