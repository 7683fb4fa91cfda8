// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <autoscrum/error.hpp>

#include <nlohmann/json.hpp>

#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace autoscrum
{

enum class Role
{
    system,
    user,
    assistant,
};

inline std::string_view to_string(Role role) noexcept
{
    switch (role)
    {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

inline std::optional<Role> role_from_string(std::string_view text) noexcept
{
    if (text == "system")
        return Role::system;
    if (text == "user")
        return Role::user;
    if (text == "assistant")
        return Role::assistant;
    return std::nullopt;
}

struct Message
{
    Role role = Role::user;
    std::string content;

    bool operator==(const Message&) const = default;
};

struct GenerationParams
{
    std::string model = "gpt-3.5-turbo";
    double temperature = 0.0;
    int max_tokens = 1024;
    std::optional<std::string> stop;

    bool operator==(const GenerationParams&) const = default;
};

/// One request/response pair as seen by a backend.
struct ChatExchange
{
    std::vector<Message> messages;
    GenerationParams params;
    std::optional<std::string> completion;

    bool operator==(const ChatExchange&) const = default;

    void validate() const
    {
        if (messages.empty())
            throw Error(ErrorCode::internal, "chat exchange has no messages");
        if (!(params.temperature >= 0.0 && params.temperature <= 2.0))
            throw Error(ErrorCode::internal,
                        "temperature " + std::to_string(params.temperature) + " outside [0, 2]");
        if (params.max_tokens <= 0)
            throw Error(ErrorCode::internal, "max_tokens must be positive");
    }

    /// Canonical request form: sorted keys, `stop` omitted when unset.
    /// This is also what the fixture digest is computed over.
    [[nodiscard]] nlohmann::json request_json() const
    {
        auto msgs = nlohmann::json::array();
        for (const auto& m: messages)
            msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
        nlohmann::json params_json = {
            {"model", params.model},
            {"temperature", params.temperature},
            {"max_tokens", params.max_tokens},
        };
        if (params.stop)
            params_json["stop"] = *params.stop;
        return {{"messages", std::move(msgs)}, {"params", std::move(params_json)}};
    }

    [[nodiscard]] nlohmann::json to_json() const
    {
        auto j = request_json();
        j["completion"] = completion ? nlohmann::json(*completion) : nlohmann::json(nullptr);
        return j;
    }

    static ChatExchange from_request_json(const nlohmann::json& j)
    {
        ChatExchange ex;
        for (const auto& m: j.at("messages"))
        {
            auto role = role_from_string(m.at("role").get<std::string>());
            if (!role)
                throw ParseError("unknown message role '" + m.at("role").get<std::string>() + "'");
            ex.messages.push_back({*role, m.at("content").get<std::string>()});
        }
        const auto& p = j.at("params");
        ex.params.model = p.at("model").get<std::string>();
        ex.params.temperature = p.at("temperature").get<double>();
        ex.params.max_tokens = p.at("max_tokens").get<int>();
        if (p.contains("stop") && p.at("stop").is_string())
            ex.params.stop = p.at("stop").get<std::string>();
        return ex;
    }
};

enum class BackendErrorKind
{
    transport,
    http_status,
    fixture_miss,
    script_exhausted,
};

inline std::string_view to_string(BackendErrorKind kind) noexcept
{
    switch (kind)
    {
        case BackendErrorKind::transport: return "transport";
        case BackendErrorKind::http_status: return "http-status";
        case BackendErrorKind::fixture_miss: return "fixture-miss";
        case BackendErrorKind::script_exhausted: return "script-exhausted";
    }
    return "transport";
}

class BackendError : public Error
{
  public:
    BackendError(BackendErrorKind kind, const std::string& message, nlohmann::json extra = nlohmann::json::object()):
        Error(ErrorCode::backend_error, std::string(to_string(kind)) + ": " + message, std::move(extra)),
        _kind(kind)
    {
        auto d = detail();
        d["kind"] = to_string(kind);
        set_detail(std::move(d));
    }

    [[nodiscard]] BackendErrorKind kind() const noexcept { return _kind; }

    [[nodiscard]] const std::optional<ChatExchange>& exchange() const noexcept { return _exchange; }

    void attach(const ChatExchange& exchange)
    {
        if (_exchange)
            return;
        _exchange = exchange;
        auto d = detail();
        d["request"] = exchange.request_json();
        set_detail(std::move(d));
    }

  private:
    BackendErrorKind _kind;
    std::optional<ChatExchange> _exchange;
};

/// A completion source. Implementations must tolerate concurrent calls.
class Backend
{
  public:
    virtual ~Backend() = default;
    virtual std::string complete(const ChatExchange& exchange) = 0;
};

/// Validates the exchange, then forwards to the backend.
inline std::string complete(Backend& backend, const ChatExchange& exchange)
{
    exchange.validate();
    try
    {
        return backend.complete(exchange);
    }
    catch (BackendError& e)
    {
        e.attach(exchange);
        throw;
    }
}

/// Pops a queue of canned completions; records every request it sees.
class ScriptedBackend final : public Backend
{
  public:
    ScriptedBackend() = default;
    explicit ScriptedBackend(std::vector<std::string> script): _script(script.begin(), script.end()) {}

    void push(std::string completion)
    {
        std::lock_guard lock(_mutex);
        _script.push_back(std::move(completion));
    }

    std::string complete(const ChatExchange& exchange) override
    {
        std::lock_guard lock(_mutex);
        _seen.push_back(exchange);
        if (_script.empty())
            throw BackendError(BackendErrorKind::script_exhausted,
                               "scripted backend has no completion left for call #" + std::to_string(_seen.size()));
        auto out = std::move(_script.front());
        _script.pop_front();
        _seen.back().completion = out;
        return out;
    }

    [[nodiscard]] std::vector<ChatExchange> seen() const
    {
        std::lock_guard lock(_mutex);
        return _seen;
    }

    [[nodiscard]] std::size_t calls() const
    {
        std::lock_guard lock(_mutex);
        return _seen.size();
    }

    [[nodiscard]] std::size_t remaining() const
    {
        std::lock_guard lock(_mutex);
        return _script.size();
    }

  private:
    mutable std::mutex _mutex;
    std::deque<std::string> _script;
    std::vector<ChatExchange> _seen;
};

/// Computes each completion from the request. Handy for generators in tests.
class FunctionBackend final : public Backend
{
  public:
    using Responder = std::function<std::string(const ChatExchange&, std::size_t call_index)>;

    explicit FunctionBackend(Responder responder): _responder(std::move(responder)) {}

    std::string complete(const ChatExchange& exchange) override
    {
        std::size_t index = 0;
        {
            std::lock_guard lock(_mutex);
            index = _calls++;
        }
        return _responder(exchange, index);
    }

    [[nodiscard]] std::size_t calls() const
    {
        std::lock_guard lock(_mutex);
        return _calls;
    }

  private:
    Responder _responder;
    mutable std::mutex _mutex;
    std::size_t _calls = 0;
};

} // namespace autoscrum
