#include "http_client.hpp"

#include <cstdlib>
#include <vector>

#include <httplib.h>

#include "ragchat/errors.hpp"

namespace ragchat::detail {

HttpTarget parse_base_url(std::string_view base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string_view::npos) throw ConfigError("base_url needs a scheme: " + std::string(base_url));
    const std::string_view scheme = base_url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw ConfigError("unsupported base_url scheme: " + std::string(scheme));
    }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (scheme == "https") throw ConfigError("https base_url requires a build with OpenSSL");
#endif
    const auto host_begin = scheme_end + 3;
    const auto path_begin = base_url.find('/', host_begin);
    HttpTarget t;
    if (path_begin == std::string_view::npos) {
        t.origin = std::string(base_url);
    } else {
        t.origin = std::string(base_url.substr(0, path_begin));
        t.path_prefix = std::string(base_url.substr(path_begin));
        while (!t.path_prefix.empty() && t.path_prefix.back() == '/') t.path_prefix.pop_back();
    }
    if (t.origin.size() <= host_begin) throw ConfigError("base_url has no host");
    return t;
}

std::string post_json_with_retry(const PostSpec& spec, const RetryPolicy& policy, const Sleeper& sleeper) {
    const HttpTarget target = parse_base_url(spec.base_url);
    std::vector<std::string> log;

    const char* key = spec.api_key_env.empty() ? nullptr : std::getenv(spec.api_key_env.c_str());
    if (!spec.api_key_env.empty() && (key == nullptr || *key == '\0')) {
        log.push_back("credential environment variable " + spec.api_key_env + " is not set");
        throw BackendError(log.back(), log, false);
    }

    httplib::Client client(target.origin);
    client.set_connection_timeout(spec.timeout_seconds, 0);
    client.set_read_timeout(spec.timeout_seconds, 0);
    client.set_write_timeout(spec.timeout_seconds, 0);
    httplib::Headers headers;
    if (key != nullptr) headers.emplace("Authorization", std::string("Bearer ") + key);

    const std::string path = target.path_prefix + spec.path;
    const int attempts = policy.max_attempts < 1 ? 1 : policy.max_attempts;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        auto res = client.Post(path, headers, spec.body, "application/json");
        bool retriable = true;
        if (!res) {
            log.push_back("attempt " + std::to_string(attempt) + ": transport error: " + httplib::to_string(res.error()));
        } else if (res->status >= 200 && res->status < 300) {
            return res->body;
        } else {
            retriable = is_retriable_status(res->status);
            log.push_back("attempt " + std::to_string(attempt) + ": HTTP " + std::to_string(res->status));
        }
        if (!retriable) {
            throw BackendError("POST " + path + " failed: " + log.back(), log, false);
        }
        if (attempt < attempts) sleeper(policy.backoff_after(attempt));
    }
    throw BackendError("POST " + path + " failed after " + std::to_string(attempts) + " attempts: " + log.back(), log,
                       true);
}

}  // namespace ragchat::detail
