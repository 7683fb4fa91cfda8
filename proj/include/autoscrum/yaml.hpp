// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include <cctype>
#include <string>

namespace autoscrum
{

namespace detail
{

// Strings a YAML reader would take for something other than text.
inline bool needs_quotes(const std::string& s)
{
    if (s.empty() || s.front() == ' ' || s.back() == ' ')
        return true;
    static constexpr const char* words[] = {"~", "null", "true", "false", "yes", "no", "on", "off", "y", "n"};
    std::string lower;
    for (char c: s)
        lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (const char* w: words)
        if (lower == w)
            return true;
    auto probe = nlohmann::json::parse(s, nullptr, false);
    if (!probe.is_discarded() && probe.is_number())
        return true;
    return s.find_first_not_of("0123456789+-.eE_:xXoObB") == std::string::npos;
}

template <class J>
void emit_yaml(YAML::Emitter& out, const J& j)
{
    switch (j.type())
    {
        case nlohmann::json::value_t::object:
            out << YAML::BeginMap;
            for (auto it = j.begin(); it != j.end(); ++it)
            {
                out << YAML::Key << it.key() << YAML::Value;
                emit_yaml(out, it.value());
            }
            out << YAML::EndMap;
            break;
        case nlohmann::json::value_t::array:
            out << YAML::BeginSeq;
            for (const auto& item: j)
                emit_yaml(out, item);
            out << YAML::EndSeq;
            break;
        case nlohmann::json::value_t::string:
        {
            const auto& text = j.template get_ref<const std::string&>();
            if (needs_quotes(text))
                out << YAML::DoubleQuoted;
            out << text;
            break;
        }
        case nlohmann::json::value_t::null:
            out << YAML::Null;
            break;
        default:
            // numbers and booleans: JSON spelling is valid YAML
            out << j.dump();
            break;
    }
}

} // namespace detail

/// Block-style YAML with two-space indentation, keys in document order.
template <class J>
std::string to_yaml(const J& j)
{
    YAML::Emitter out;
    out.SetIndent(2);
    out.SetMapFormat(YAML::Block);
    out.SetSeqFormat(YAML::Block);
    detail::emit_yaml(out, j);
    std::string text = out.c_str();
    if (text.empty() || text.back() != '\n')
        text += '\n';
    return text;
}

} // namespace autoscrum
