#pragma once

#include <string>
#include <string_view>

#include "ragchat/retry.hpp"

namespace ragchat::detail {

struct HttpTarget {
    std::string origin;       // scheme://host[:port]
    std::string path_prefix;  // "" or "/v1"
};

/// Throws ConfigError on anything but http:// or https:// URLs.
HttpTarget parse_base_url(std::string_view base_url);

struct PostSpec {
    std::string base_url;
    std::string path;  // appended to the base URL's path, e.g. "/embeddings"
    std::string body;
    std::string api_key_env;
    int timeout_seconds = 60;
};

/// POSTs JSON, retrying transport errors, 429 and 5xx up to policy.max_attempts
/// with exponential backoff. Returns the 2xx body. Throws BackendError carrying
/// one log line per attempt; the credential never appears in messages.
std::string post_json_with_retry(const PostSpec& spec, const RetryPolicy& policy, const Sleeper& sleeper);

}  // namespace ragchat::detail
