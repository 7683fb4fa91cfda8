// SPDX-License-Identifier: Apache-2.0
#pragma once

// Language programs: Handlebars-like templates with chat role blocks and gen calls.
//
// Grammar (everything else is literal text, whitespace preserved):
//
//   {{path}}                         interpolation; path = ident(.ident)* | this(.ident)* | @index
//   {{gen 'name' key=value ...}}     generation; keys: temperature, max_tokens, stop
//   {{#each path}} ... {{/each}}     loop over a list, binds `this` and `@index` (0-based)
//   {{#system}} ... {{/system}}      role blocks, also #user and #assistant; not nestable
//   \{{                              a literal "{{"
//
// Every node keeps the exact source text it was parsed from, so serializing a
// parsed program reproduces the source byte for byte.

#include <autoscrum/backend.hpp>
#include <autoscrum/error.hpp>

#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace autoscrum::tmpl
{

struct SourcePos
{
    std::size_t line = 1;
    std::size_t column = 1;

    bool operator==(const SourcePos&) const = default;
};

struct GenKwargs
{
    std::optional<double> temperature;
    std::optional<int> max_tokens;
    std::optional<std::string> stop;

    bool operator==(const GenKwargs&) const = default;
};

struct Node;
using NodeList = std::vector<Node>;

struct Text
{
    std::string raw;

    /// The text with `\{{` escapes resolved.
    [[nodiscard]] std::string literal() const
    {
        std::string out;
        out.reserve(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i)
        {
            if (raw[i] == '\\' && raw.compare(i + 1, 2, "{{") == 0)
                continue;
            out.push_back(raw[i]);
        }
        return out;
    }

    bool operator==(const Text&) const = default;
};

struct Interp
{
    std::string path;
    std::string raw;
    SourcePos pos;

    bool operator==(const Interp&) const = default;
};

struct Gen
{
    std::string name;
    GenKwargs kwargs;
    std::string raw;
    SourcePos pos;

    bool operator==(const Gen&) const = default;
};

struct EachBlock
{
    std::string path;
    NodeList body;
    std::string open_raw;
    std::string close_raw;
    SourcePos pos;

    bool operator==(const EachBlock&) const;
};

struct RoleBlock
{
    Role role = Role::user;
    NodeList body;
    std::string open_raw;
    std::string close_raw;
    SourcePos pos;

    bool operator==(const RoleBlock&) const;
};

struct Node
{
    std::variant<Text, Interp, Gen, EachBlock, RoleBlock> value;

    bool operator==(const Node&) const = default;

    template <class T>
    [[nodiscard]] bool is() const noexcept
    {
        return std::holds_alternative<T>(value);
    }

    template <class T>
    [[nodiscard]] const T& as() const
    {
        return std::get<T>(value);
    }
};

inline bool EachBlock::operator==(const EachBlock& o) const
{
    return path == o.path && body == o.body && open_raw == o.open_raw && close_raw == o.close_raw && pos == o.pos;
}

inline bool RoleBlock::operator==(const RoleBlock& o) const
{
    return role == o.role && body == o.body && open_raw == o.open_raw && close_raw == o.close_raw && pos == o.pos;
}

struct Program
{
    std::string source;
    NodeList nodes;
};

namespace detail
{

inline void serialize_into(const NodeList& nodes, std::string& out)
{
    for (const auto& node: nodes)
    {
        std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, EachBlock> || std::is_same_v<T, RoleBlock>)
                {
                    out += n.open_raw;
                    serialize_into(n.body, out);
                    out += n.close_raw;
                }
                else
                {
                    out += n.raw;
                }
            },
            node.value);
    }
}

inline bool is_ident_start(char c) noexcept
{
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

inline bool is_ident_char(char c) noexcept
{
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

inline bool is_identifier(std::string_view s) noexcept
{
    if (s.empty() || !is_ident_start(s.front()))
        return false;
    for (char c: s)
        if (!is_ident_char(c))
            return false;
    return true;
}

inline std::string_view trim(std::string_view s) noexcept
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

/// Empty string when valid, otherwise the reason.
inline std::string check_path(std::string_view path)
{
    if (path.empty())
        return "empty path";
    if (path == "@index")
        return {};
    std::size_t start = 0;
    while (true)
    {
        auto dot = path.find('.', start);
        auto part = path.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
        if (!is_identifier(part))
            return "invalid path '" + std::string(path) + "'";
        if (dot == std::string_view::npos)
            return {};
        start = dot + 1;
    }
}

class Parser
{
  public:
    explicit Parser(std::string_view source): _src(source) {}

    NodeList parse()
    {
        NodeList root;
        parse_into(root, nullptr, false);
        return root;
    }

  private:
    struct OpenTag
    {
        std::string name; // "each", "system", ...
        std::size_t offset;
    };

    [[nodiscard]] SourcePos pos_at(std::size_t offset) const
    {
        SourcePos p;
        for (std::size_t i = 0; i < offset && i < _src.size(); ++i)
        {
            if (_src[i] == '\n')
            {
                ++p.line;
                p.column = 1;
            }
            else
            {
                ++p.column;
            }
        }
        return p;
    }

    [[noreturn]] void fail(const std::string& what, std::size_t offset) const
    {
        auto p = pos_at(offset);
        throw SyntaxError(what, p.line, p.column);
    }

    // Offset of the "}}" closing the tag opened at `open`, skipping quoted strings.
    [[nodiscard]] std::size_t find_tag_end(std::size_t open) const
    {
        std::size_t i = open + 2;
        char quote = 0;
        while (i < _src.size())
        {
            char c = _src[i];
            if (quote)
            {
                if (c == '\\' && i + 1 < _src.size())
                    ++i;
                else if (c == quote)
                    quote = 0;
            }
            else if (c == '\'' || c == '"')
            {
                quote = c;
            }
            else if (c == '}' && i + 1 < _src.size() && _src[i + 1] == '}')
            {
                return i;
            }
            else if (c == '{' && i + 1 < _src.size() && _src[i + 1] == '{')
            {
                break; // a new tag starts before this one closed
            }
            ++i;
        }
        fail("unclosed '{{'", open);
    }

    // Next unescaped "{{" at or after `from`, or npos.
    [[nodiscard]] std::size_t find_tag_start(std::size_t from) const
    {
        while (true)
        {
            auto at = _src.find("{{", from);
            if (at == std::string_view::npos)
                return at;
            if (at > 0 && _src[at - 1] == '\\')
            {
                from = at + 2;
                continue;
            }
            return at;
        }
    }

    // Parses nodes until EOF or the close tag of `open`. Returns the raw close tag.
    std::string parse_into(NodeList& out, const OpenTag* open, bool in_role)
    {
        while (_pos < _src.size())
        {
            auto tag = find_tag_start(_pos);
            if (tag == std::string_view::npos)
            {
                out.push_back(Node {Text {std::string(_src.substr(_pos))}});
                _pos = _src.size();
                break;
            }
            if (tag > _pos)
                out.push_back(Node {Text {std::string(_src.substr(_pos, tag - _pos))}});

            auto end = find_tag_end(tag);
            auto raw = std::string(_src.substr(tag, end + 2 - tag));
            auto inner = trim(_src.substr(tag + 2, end - tag - 2));
            _pos = end + 2;

            if (!inner.empty() && inner.front() == '/')
            {
                auto name = std::string(trim(inner.substr(1)));
                if (!open)
                    fail("unexpected '{{/" + name + "}}' with no open block", tag);
                if (name != open->name)
                    fail("mismatched '{{/" + name + "}}', expected '{{/" + open->name + "}}'", tag);
                return raw;
            }

            if (!inner.empty() && inner.front() == '#')
            {
                parse_block(out, tag, std::move(raw), inner.substr(1), in_role);
                continue;
            }

            if (inner == "gen" || inner.starts_with("gen ") || inner.starts_with("gen\t") || inner.starts_with("gen\n"))
            {
                out.push_back(Node {parse_gen(tag, std::move(raw), inner.substr(3))});
                continue;
            }

            auto path = std::string(inner);
            if (auto why = check_path(path); !why.empty())
                fail(why, tag);
            out.push_back(Node {Interp {path, std::move(raw), pos_at(tag)}});
        }

        if (open)
            fail("unclosed block '{{#" + open->name + "}}'", open->offset);
        return {};
    }

    void parse_block(NodeList& out, std::size_t tag, std::string raw, std::string_view spec, bool in_role)
    {
        spec = trim(spec);
        auto space = spec.find_first_of(" \t\r\n");
        auto name = std::string(spec.substr(0, space));
        auto arg = space == std::string_view::npos ? std::string_view {} : trim(spec.substr(space));

        if (name == "each")
        {
            auto path = std::string(arg);
            if (auto why = check_path(path); !why.empty())
                fail(why, tag);
            OpenTag open {name, tag};
            EachBlock block;
            block.path = path;
            block.open_raw = std::move(raw);
            block.pos = pos_at(tag);
            block.close_raw = parse_into(block.body, &open, in_role);
            out.push_back(Node {std::move(block)});
            return;
        }

        if (auto role = role_from_string(name))
        {
            if (!arg.empty())
                fail("role block '{{#" + name + "}}' takes no arguments", tag);
            if (in_role)
                fail("role block '{{#" + name + "}}' nested inside another role block", tag);
            OpenTag open {name, tag};
            RoleBlock block;
            block.role = *role;
            block.open_raw = std::move(raw);
            block.pos = pos_at(tag);
            block.close_raw = parse_into(block.body, &open, true);
            out.push_back(Node {std::move(block)});
            return;
        }

        fail("unknown block tag '{{#" + name + "}}'", tag);
    }

    Gen parse_gen(std::size_t tag, std::string raw, std::string_view args)
    {
        Gen gen;
        gen.raw = std::move(raw);
        gen.pos = pos_at(tag);

        std::size_t i = 0;
        auto skip_ws = [&] {
            while (i < args.size() && std::isspace(static_cast<unsigned char>(args[i])))
                ++i;
        };
        auto read_quoted = [&]() -> std::optional<std::string> {
            if (i >= args.size() || (args[i] != '\'' && args[i] != '"'))
                return std::nullopt;
            char q = args[i++];
            std::string value;
            while (i < args.size() && args[i] != q)
            {
                if (args[i] == '\\' && i + 1 < args.size())
                {
                    ++i;
                    switch (args[i])
                    {
                        case 'n': value.push_back('\n'); break;
                        case 't': value.push_back('\t'); break;
                        default: value.push_back(args[i]); break;
                    }
                }
                else
                {
                    value.push_back(args[i]);
                }
                ++i;
            }
            if (i >= args.size())
                fail("unterminated string in gen", tag);
            ++i;
            return value;
        };

        skip_ws();
        auto name = read_quoted();
        if (!name)
            fail("gen requires a quoted binding name", tag);
        if (!is_identifier(*name))
            fail("gen binding name '" + *name + "' is not an identifier", tag);
        gen.name = *name;

        while (true)
        {
            skip_ws();
            if (i >= args.size())
                break;
            auto key_start = i;
            while (i < args.size() && is_ident_char(args[i]))
                ++i;
            auto key = std::string(args.substr(key_start, i - key_start));
            if (key.empty() || i >= args.size() || args[i] != '=')
                fail("expected key=value in gen arguments", tag);
            ++i;

            if (key == "stop")
            {
                auto value = read_quoted();
                if (!value)
                    fail("gen argument 'stop' must be a quoted string", tag);
                if (gen.kwargs.stop)
                    fail("duplicate kwarg 'stop'", tag);
                gen.kwargs.stop = *value;
                continue;
            }

            auto value_start = i;
            while (i < args.size() && !std::isspace(static_cast<unsigned char>(args[i])))
                ++i;
            auto value = std::string(args.substr(value_start, i - value_start));
            if (key == "temperature")
            {
                if (gen.kwargs.temperature)
                    fail("duplicate kwarg 'temperature'", tag);
                std::size_t used = 0;
                double t = 0;
                try
                {
                    t = std::stod(value, &used);
                }
                catch (const std::exception&)
                {
                    used = 0;
                }
                if (used == 0 || used != value.size() || t < 0.0 || t > 2.0)
                    fail("temperature must be a number in [0, 2]", tag);
                gen.kwargs.temperature = t;
            }
            else if (key == "max_tokens")
            {
                if (gen.kwargs.max_tokens)
                    fail("duplicate kwarg 'max_tokens'", tag);
                std::size_t used = 0;
                long n = 0;
                try
                {
                    n = std::stol(value, &used);
                }
                catch (const std::exception&)
                {
                    used = 0;
                }
                if (used == 0 || used != value.size() || n <= 0 || n > 1'000'000)
                    fail("max_tokens must be a positive integer", tag);
                gen.kwargs.max_tokens = static_cast<int>(n);
            }
            else
            {
                fail("unknown gen argument '" + key + "'", tag);
            }
        }
        return gen;
    }

    std::string_view _src;
    std::size_t _pos = 0;
};

} // namespace detail

/// Parses a language program. Throws SyntaxError with a 1-based line/column.
inline Program parse(std::string_view source)
{
    Program program;
    program.source = std::string(source);
    program.nodes = detail::Parser(source).parse();
    return program;
}

inline std::string serialize(const NodeList& nodes)
{
    std::string out;
    detail::serialize_into(nodes, out);
    return out;
}

inline std::string serialize(const Program& program)
{
    return serialize(program.nodes);
}

/// Number of Gen nodes in the tree, not counting loop repetition.
inline std::size_t count_gen_nodes(const NodeList& nodes)
{
    std::size_t n = 0;
    for (const auto& node: nodes)
    {
        if (node.is<Gen>())
            ++n;
        else if (node.is<EachBlock>())
            n += count_gen_nodes(node.as<EachBlock>().body);
        else if (node.is<RoleBlock>())
            n += count_gen_nodes(node.as<RoleBlock>().body);
    }
    return n;
}

} // namespace autoscrum::tmpl
