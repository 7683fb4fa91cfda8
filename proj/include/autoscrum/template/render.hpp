// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <autoscrum/backend.hpp>
#include <autoscrum/template/program.hpp>

#include <nlohmann/json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace autoscrum::tmpl
{

/// Template values: text, number, boolean, list or map. Maps keep insertion order.
using Value = nlohmann::ordered_json;

class Environment
{
  public:
    Environment(): _root(Value::object()) {}
    explicit Environment(Value root): _root(std::move(root))
    {
        if (!_root.is_object())
            throw TemplateTypeError("environment root must be a map");
    }

    void set(const std::string& name, Value value) { _root[name] = std::move(value); }

    [[nodiscard]] bool contains(const std::string& name) const { return _root.contains(name); }

    [[nodiscard]] const Value& root() const noexcept { return _root; }

    /// Resolves a dotted path from the root. Traversal only descends into maps.
    [[nodiscard]] const Value& lookup(const std::string& path) const { return lookup_from(_root, path, path); }

    static const Value& lookup_from(const Value& start, std::string_view rest, const std::string& full_path)
    {
        const Value* cur = &start;
        std::size_t from = 0;
        while (from <= rest.size())
        {
            auto dot = rest.find('.', from);
            auto key = std::string(rest.substr(from, dot == std::string_view::npos ? std::string_view::npos : dot - from));
            if (!cur->is_object())
                throw ResolutionError(full_path, "cannot look up '" + key + "' in a non-map value");
            auto it = cur->find(key);
            if (it == cur->end())
                throw ResolutionError(full_path);
            cur = &*it;
            if (dot == std::string_view::npos)
                break;
            from = dot + 1;
        }
        return *cur;
    }

  private:
    Value _root;
};

struct GenDefaults
{
    std::string model = "gpt-3.5-turbo";
    double temperature = 0.0;
    int max_tokens = 1024;
    std::optional<std::string> stop;
};

struct ExecutionResult
{
    /// One (name, completion) pair per executed gen, in execution order.
    std::vector<std::pair<std::string, std::string>> bindings;
    /// Every backend call made, with its completion filled in.
    std::vector<ChatExchange> transcript;
    /// Final role segments, including generated assistant text.
    std::vector<Message> segments;

    /// Last completion bound under `name`, or nullptr.
    [[nodiscard]] const std::string* binding(std::string_view name) const
    {
        for (auto it = bindings.rbegin(); it != bindings.rend(); ++it)
            if (it->first == name)
                return &it->second;
        return nullptr;
    }

    /// All segments concatenated, ignoring roles.
    [[nodiscard]] std::string text() const
    {
        std::string out;
        for (const auto& s: segments)
            out += s.content;
        return out;
    }
};

/// Text form of a value when interpolated: strings verbatim, anything else as compact JSON.
inline std::string to_prompt_text(const Value& value)
{
    if (value.is_string())
        return value.get<std::string>();
    return value.dump();
}

namespace detail
{

class Renderer
{
  public:
    Renderer(Environment& env, Backend& backend, const GenDefaults& defaults):
        _env(env), _backend(backend), _defaults(defaults)
    {
    }

    ExecutionResult run(const NodeList& nodes)
    {
        walk(nodes, Role::user);
        return std::move(_result);
    }

  private:
    struct Frame
    {
        const Value* item;
        std::size_t index;
    };

    void emit(Role role, const std::string& text)
    {
        if (text.empty())
            return;
        auto& segs = _result.segments;
        if (segs.empty() || segs.back().role != role)
            segs.push_back({role, {}});
        segs.back().content += text;
    }

    const Value& resolve(const std::string& path)
    {
        if (path == "@index" || path == "this" || path.starts_with("this."))
        {
            if (_frames.empty())
                throw ResolutionError(path, "used outside {{#each}}");
            const auto& frame = _frames.back();
            if (path == "@index")
            {
                _index_scratch = frame.index;
                return _index_scratch;
            }
            if (path == "this")
                return *frame.item;
            return Environment::lookup_from(*frame.item, std::string_view(path).substr(5), path);
        }
        return _env.lookup(path);
    }

    void walk(const NodeList& nodes, Role role)
    {
        for (const auto& node: nodes)
        {
            if (node.is<Text>())
            {
                emit(role, node.as<Text>().literal());
            }
            else if (node.is<Interp>())
            {
                emit(role, to_prompt_text(resolve(node.as<Interp>().path)));
            }
            else if (node.is<EachBlock>())
            {
                const auto& block = node.as<EachBlock>();
                // Copy: a gen in the body may rebind names in the environment.
                Value list = resolve(block.path);
                if (!list.is_array())
                    throw TemplateTypeError("{{#each " + block.path + "}} expects a list, got " + list.type_name());
                for (std::size_t i = 0; i < list.size(); ++i)
                {
                    _frames.push_back({&list[i], i});
                    walk(block.body, role);
                    _frames.pop_back();
                }
            }
            else if (node.is<RoleBlock>())
            {
                const auto& block = node.as<RoleBlock>();
                // Start a fresh segment even if the previous one had the same role.
                _result.segments.push_back({block.role, {}});
                walk(block.body, block.role);
                if (_result.segments.back().content.empty() && _result.segments.back().role == block.role)
                    _result.segments.pop_back();
            }
            else
            {
                generate(node.as<Gen>());
            }
        }
    }

    void generate(const Gen& gen)
    {
        ChatExchange exchange;
        for (const auto& seg: _result.segments)
            if (!seg.content.empty())
                exchange.messages.push_back(seg);
        exchange.params.model = _defaults.model;
        exchange.params.temperature = gen.kwargs.temperature.value_or(_defaults.temperature);
        exchange.params.max_tokens = gen.kwargs.max_tokens.value_or(_defaults.max_tokens);
        exchange.params.stop = gen.kwargs.stop ? gen.kwargs.stop : _defaults.stop;

        auto completion = complete(_backend, exchange);

        exchange.completion = completion;
        _result.transcript.push_back(std::move(exchange));
        _result.bindings.emplace_back(gen.name, completion);
        _env.set(gen.name, completion);
        emit(Role::assistant, completion);
    }

    Environment& _env;
    Backend& _backend;
    const GenDefaults& _defaults;
    ExecutionResult _result;
    std::vector<Frame> _frames;
    Value _index_scratch;
};

} // namespace detail

/// Executes a program. Text outside role blocks goes to the user role; each gen
/// sends every non-empty segment so far, binds the completion in both the
/// result and `env`, and appends it to an assistant segment.
inline ExecutionResult render(const Program& program, Environment& env, Backend& backend,
                              const GenDefaults& defaults = {})
{
    return detail::Renderer(env, backend, defaults).run(program.nodes);
}

} // namespace autoscrum::tmpl
