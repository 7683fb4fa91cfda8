// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <autoscrum/backend.hpp>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

namespace autoscrum
{

struct LiveConfig
{
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key;
    int retries = 3;
    std::chrono::milliseconds initial_backoff {500};
    double backoff_multiplier = 2.0;
    std::chrono::seconds connect_timeout {10};
    std::chrono::seconds read_timeout {300};

    /// AUTOSCRUM_BASE_URL / AUTOSCRUM_API_KEY override the defaults.
    static LiveConfig from_env()
    {
        LiveConfig cfg;
        if (const char* url = std::getenv("AUTOSCRUM_BASE_URL"); url && *url)
            cfg.base_url = url;
        if (const char* key = std::getenv("AUTOSCRUM_API_KEY"); key && *key)
            cfg.api_key = key;
        return cfg;
    }
};

/// Client for an OpenAI-compatible `/chat/completions` endpoint.
class LiveBackend final : public Backend
{
  public:
    explicit LiveBackend(LiveConfig config): _config(std::move(config))
    {
        split_url(_config.base_url, _origin, _base_path);
    }

    [[nodiscard]] static nlohmann::json request_body(const ChatExchange& exchange)
    {
        nlohmann::json body;
        body["model"] = exchange.params.model;
        body["messages"] = nlohmann::json::array();
        for (const auto& m: exchange.messages)
            body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});
        body["temperature"] = exchange.params.temperature;
        body["max_tokens"] = exchange.params.max_tokens;
        if (exchange.params.stop)
            body["stop"] = *exchange.params.stop;
        return body;
    }

    std::string complete(const ChatExchange& exchange) override
    {
        const auto body = request_body(exchange).dump();
        const auto path = _base_path + "/chat/completions";
        auto delay = _config.initial_backoff;

        for (int attempt = 0;; ++attempt)
        {
            const bool last = attempt >= _config.retries;
            httplib::Client client(_origin);
            client.set_connection_timeout(_config.connect_timeout);
            client.set_read_timeout(_config.read_timeout);
            httplib::Headers headers;
            if (!_config.api_key.empty())
                headers.emplace("Authorization", "Bearer " + _config.api_key);

            auto res = client.Post(path, headers, body, "application/json");
            if (!res)
            {
                if (last)
                    throw BackendError(BackendErrorKind::transport,
                                       _origin + path + ": " + httplib::to_string(res.error()),
                                       {{"attempts", attempt + 1}});
            }
            else if (res->status >= 200 && res->status < 300)
            {
                return parse_completion(res->body);
            }
            else if (last || !transient(res->status))
            {
                throw BackendError(BackendErrorKind::http_status,
                                   "HTTP " + std::to_string(res->status) + " from " + _origin + path,
                                   {{"status", res->status}, {"body", res->body}, {"attempts", attempt + 1}});
            }

            std::this_thread::sleep_for(delay);
            delay = std::chrono::milliseconds(
                static_cast<std::chrono::milliseconds::rep>(static_cast<double>(delay.count()) * _config.backoff_multiplier));
        }
    }

  private:
    static bool transient(int status) noexcept { return status == 408 || status == 429 || status >= 500; }

    static std::string parse_completion(const std::string& text)
    {
        auto j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
            throw BackendError(BackendErrorKind::http_status, "response has no choices", {{"body", text}});
        const auto& msg = j["choices"][0].value("message", nlohmann::json::object());
        if (!msg.contains("content") || !msg["content"].is_string())
            throw BackendError(BackendErrorKind::http_status, "choices[0].message.content missing", {{"body", text}});
        return msg["content"].get<std::string>();
    }

    // "https://host:port/v1" -> origin "https://host:port", path "/v1"
    static void split_url(const std::string& url, std::string& origin, std::string& path)
    {
        auto scheme_end = url.find("://");
        auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
        auto slash = url.find('/', host_start);
        origin = url.substr(0, slash);
        path = slash == std::string::npos ? "" : url.substr(slash);
        while (!path.empty() && path.back() == '/')
            path.pop_back();
    }

    LiveConfig _config;
    std::string _origin;
    std::string _base_path;
};

} // namespace autoscrum
