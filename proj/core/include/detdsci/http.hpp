#pragma once

#include <chrono>
#include <string>

#include "detdsci/errors.hpp"

namespace detdsci {

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Connection-level failure (refused, timed out, unreadable file).
class TransportError : public Error {
public:
    using Error::Error;
};

/// Minimal request interface shared by the tile fetcher and the remote
/// inference clients, so tests can substitute an in-process fake.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;

    virtual HttpResponse get(const std::string& url) = 0;
    virtual HttpResponse post_json(const std::string& url, const std::string& body) = 0;
};

/// Transport backed by cpp-httplib. Understands http://, https:// and
/// file:// URLs (the latter answers 200 with the file contents, 404 when
/// the file is missing).
class DefaultHttpTransport final : public HttpTransport {
public:
    explicit DefaultHttpTransport(std::chrono::milliseconds timeout = std::chrono::seconds(30));

    HttpResponse get(const std::string& url) override;
    HttpResponse post_json(const std::string& url, const std::string& body) override;

private:
    std::chrono::milliseconds timeout_;
};

/// Splits "scheme://host[:port]/path?query" into its origin and target.
struct UrlParts {
    std::string origin;
    std::string target;
};

[[nodiscard]] UrlParts split_url(const std::string& url);

}  // namespace detdsci
