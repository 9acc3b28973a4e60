#pragma once

#include <string>

namespace cvemap::detail {

// GET with capped exponential backoff; throws TransportError when every
// attempt fails. Only plain http endpoints are supported.
std::string http_get_with_retries(const std::string& url, int retries,
                                  int backoff_ms);

}  // namespace cvemap::detail
