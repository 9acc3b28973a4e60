#include "internal_http.hpp"

#include <chrono>
#include <regex>
#include <thread>

#include "cvemap/errors.hpp"
#include "httplib.h"

namespace cvemap::detail {

std::string http_get_with_retries(const std::string& url, int retries,
                                  int backoff_ms) {
  static const std::regex url_re(R"(^http://([^/:]+)(?::(\d+))?(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, url_re))
    throw TransportError(
        "unsupported url (expected http://host[:port][/path]): " + url);
  const std::string host = m[1].str();
  const int port = m[2].matched ? std::stoi(m[2].str()) : 80;
  const std::string path =
      m[3].matched && !m[3].str().empty() ? m[3].str() : "/";

  std::string last_error = "no attempts made";
  int delay = backoff_ms;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
      delay = std::min(delay * 2, 2000);
    }
    httplib::Client client(host, port);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(60, 0);
    auto res = client.Get(path);
    if (!res) {
      last_error = "cannot reach " + host + ":" + std::to_string(port);
      continue;
    }
    if (res->status == 200) return res->body;
    last_error = "status " + std::to_string(res->status);
    if (res->status >= 400 && res->status < 500) break;
  }
  throw TransportError("fetch of " + url + " failed: " + last_error);
}

}  // namespace cvemap::detail
