#include "detdsci/http.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <httplib.h>

namespace detdsci {

namespace {

constexpr std::string_view kFileScheme = "file://";

HttpResponse read_file_url(const std::string& url)
{
    const std::filesystem::path path = url.substr(kFileScheme.size());
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return {404, {}};
    }
    return {200, std::string(std::istreambuf_iterator<char>(in), {})};
}

template <typename Fn>
HttpResponse with_client(const std::string& url, std::chrono::milliseconds timeout, Fn&& fn)
{
    const UrlParts parts = split_url(url);
    httplib::Client client(parts.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    client.set_follow_location(true);
    const httplib::Result result = fn(client, parts.target);
    if (!result) {
        throw TransportError(fmt::format("request to {} failed: {}", parts.origin,
                                         httplib::to_string(result.error())));
    }
    return {result->status, result->body};
}

}  // namespace

UrlParts split_url(const std::string& url)
{
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError(fmt::format("URL '{}' has no scheme", url));
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

DefaultHttpTransport::DefaultHttpTransport(std::chrono::milliseconds timeout) : timeout_(timeout) {}

HttpResponse DefaultHttpTransport::get(const std::string& url)
{
    if (url.starts_with(kFileScheme)) {
        return read_file_url(url);
    }
    return with_client(url, timeout_, [](httplib::Client& client, const std::string& target) {
        return client.Get(target);
    });
}

HttpResponse DefaultHttpTransport::post_json(const std::string& url, const std::string& body)
{
    if (url.starts_with(kFileScheme)) {
        throw TransportError("POST is not supported for file:// URLs");
    }
    return with_client(url, timeout_, [&body](httplib::Client& client, const std::string& target) {
        return client.Post(target, body, "application/json");
    });
}

}  // namespace detdsci
