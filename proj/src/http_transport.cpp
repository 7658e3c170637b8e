#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "camp/provider.hpp"

namespace camp {

namespace {

// Splits "https://host:port/a/b" into ("https://host:port", "/a/b").
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpResult HttplibTransport::post(const std::string& url, const std::string& body,
                                  const std::vector<std::pair<std::string, std::string>>& headers) {
    const auto [origin, path] = split_url(url);
    httplib::Client client(origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);

    httplib::Headers h;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
        if (k == "Content-Type") {
            content_type = v;
        } else {
            h.emplace(k, v);
        }
    }
    auto res = client.Post(path, h, body, content_type);
    if (!res) return HttpResult{0, {}, httplib::to_string(res.error())};
    return HttpResult{res->status, res->body, {}};
}

}  // namespace camp
