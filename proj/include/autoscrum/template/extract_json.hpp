// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <autoscrum/error.hpp>

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>

namespace autoscrum
{

/// How far extract_json got before giving up.
enum class RepairStage
{
    as_is,
    strip_fences,
    balance,
    trailing_commas,
};

inline std::string_view to_string(RepairStage stage) noexcept
{
    switch (stage)
    {
        case RepairStage::as_is: return "as-is";
        case RepairStage::strip_fences: return "strip-fences";
        case RepairStage::balance: return "balance";
        case RepairStage::trailing_commas: return "trailing-commas";
    }
    return "as-is";
}

class JsonExtractError : public Error
{
  public:
    JsonExtractError(std::string raw, RepairStage stage, const std::string& why):
        Error(ErrorCode::json_extract_error,
              "no JSON value in completion (stage " + std::string(to_string(stage)) + "): " + why,
              {{"raw", raw}, {"stage", to_string(stage)}}),
        _raw(std::move(raw)), _stage(stage)
    {
    }

    [[nodiscard]] const std::string& raw() const noexcept { return _raw; }
    [[nodiscard]] RepairStage stage() const noexcept { return _stage; }

  private:
    std::string _raw;
    RepairStage _stage;
};

namespace detail
{

inline std::optional<nlohmann::ordered_json> try_parse(std::string_view text)
{
    auto j = nlohmann::ordered_json::parse(text.begin(), text.end(), nullptr, false);
    if (j.is_discarded())
        return std::nullopt;
    return j;
}

// Content of the first ``` fenced block (language tag line dropped). An
// unterminated fence runs to the end of the text.
inline std::optional<std::string> strip_fences(std::string_view text)
{
    auto open = text.find("```");
    if (open == std::string_view::npos)
        return std::nullopt;
    auto body_start = text.find('\n', open + 3);
    if (body_start == std::string_view::npos)
        return std::string(text.substr(open + 3));
    ++body_start;
    auto close = text.find("```", body_start);
    return std::string(text.substr(body_start, close == std::string_view::npos ? std::string_view::npos : close - body_start));
}

// From the first '{' or '[' through its balanced partner, skipping brackets
// inside strings.
inline std::optional<std::string> balanced_span(std::string_view text, std::string& why)
{
    auto start = text.find_first_of("{[");
    if (start == std::string_view::npos)
    {
        why = "no '{' or '[' found";
        return std::nullopt;
    }
    std::string stack;
    bool in_string = false;
    for (std::size_t i = start; i < text.size(); ++i)
    {
        char c = text[i];
        if (in_string)
        {
            if (c == '\\')
                ++i;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"')
            in_string = true;
        else if (c == '{' || c == '[')
            stack.push_back(c == '{' ? '}' : ']');
        else if (c == '}' || c == ']')
        {
            if (stack.empty() || stack.back() != c)
            {
                why = std::string("mismatched '") + c + "'";
                return std::nullopt;
            }
            stack.pop_back();
            if (stack.empty())
                return std::string(text.substr(start, i + 1 - start));
        }
    }
    why = "unbalanced brackets (truncated output?)";
    return std::nullopt;
}

// Drops commas followed (after whitespace) by '}' or ']', outside strings.
inline std::string remove_trailing_commas(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    bool in_string = false;
    for (std::size_t i = 0; i < text.size(); ++i)
    {
        char c = text[i];
        if (in_string)
        {
            out.push_back(c);
            if (c == '\\' && i + 1 < text.size())
                out.push_back(text[++i]);
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"')
            in_string = true;
        if (c == ',')
        {
            auto j = i + 1;
            while (j < text.size() && (text[j] == ' ' || text[j] == '\t' || text[j] == '\n' || text[j] == '\r'))
                ++j;
            if (j < text.size() && (text[j] == '}' || text[j] == ']'))
                continue;
        }
        out.push_back(c);
    }
    return out;
}

} // namespace detail

/// Pulls a JSON value out of model output. Repairs are applied cumulatively in
/// this order, with a parse attempt after each: strip Markdown fences, cut to
/// the first balanced {...} or [...], remove trailing commas.
inline nlohmann::ordered_json extract_json(std::string_view text)
{
    if (auto v = detail::try_parse(text))
        return *v;

    std::string work(text);
    if (auto inner = detail::strip_fences(work))
    {
        work = *inner;
        if (auto v = detail::try_parse(work))
            return *v;
    }

    std::string why;
    auto span = detail::balanced_span(work, why);
    if (!span)
        throw JsonExtractError(std::string(text), RepairStage::balance, why);
    work = *span;
    if (auto v = detail::try_parse(work))
        return *v;

    work = detail::remove_trailing_commas(work);
    if (auto v = detail::try_parse(work))
        return *v;

    throw JsonExtractError(std::string(text), RepairStage::trailing_commas, "still not valid JSON after repairs");
}

} // namespace autoscrum
