// Kept in its own translation unit: httplib is a large header.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cmath>

#include "afr/error.hpp"
#include "afr/vlm_client.hpp"

namespace afr {

namespace {

class HttplibTransport : public HttpTransport {
 public:
  HttpResponse post(const HttpRequest& req) override {
    auto scheme_end = req.url.find("://");
    if (scheme_end == std::string::npos) throw Error(Errc::transport_error, "malformed URL " + req.url);
    auto path_start = req.url.find('/', scheme_end + 3);
    std::string origin = req.url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : req.url.substr(path_start);

    httplib::Client client(origin);
    if (!client.is_valid()) throw Error(Errc::transport_error, "unsupported URL " + req.url);
    auto secs = static_cast<time_t>(req.timeout_s);
    auto usecs = static_cast<time_t>((req.timeout_s - std::floor(req.timeout_s)) * 1e6);
    client.set_connection_timeout(std::min<time_t>(secs, 30), usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [k, v] : req.headers) {
      if (httplib::detail::compare_case_ignore(k, "Content-Type")) {
        content_type = v;
      } else {
        headers.emplace(k, v);
      }
    }
    auto res = client.Post(path, headers, req.body, content_type);
    if (!res) throw Error(Errc::transport_error, httplib::to_string(res.error()) + " (" + origin + ")");
    return {res->status, res->body};
  }
};

}  // namespace

std::shared_ptr<HttpTransport> make_default_transport() { return std::make_shared<HttplibTransport>(); }

}  // namespace afr
