// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace autoscrum
{

/// Error categories shared by the library, the CLI exit-code mapping and the
/// HTTP API error body.
enum class ErrorCode
{
    syntax_error,
    resolution_error,
    type_error,
    json_extract_error,
    backend_error,
    parse_error,
    validation_error,
    path_error,
    precondition_failed,
    io_error,
    conflict,
    not_found,
    internal,
};

inline std::string_view to_string(ErrorCode code) noexcept
{
    switch (code)
    {
        case ErrorCode::syntax_error: return "syntax_error";
        case ErrorCode::resolution_error: return "resolution_error";
        case ErrorCode::type_error: return "type_error";
        case ErrorCode::json_extract_error: return "json_extract_error";
        case ErrorCode::backend_error: return "backend_error";
        case ErrorCode::parse_error: return "parse_error";
        case ErrorCode::validation_error: return "validation_error";
        case ErrorCode::path_error: return "path_error";
        case ErrorCode::precondition_failed: return "precondition_failed";
        case ErrorCode::io_error: return "io_error";
        case ErrorCode::conflict: return "conflict";
        case ErrorCode::not_found: return "not_found";
        case ErrorCode::internal: return "internal";
    }
    return "internal";
}

class Error : public std::runtime_error
{
  public:
    Error(ErrorCode code, const std::string& message, nlohmann::json detail = nullptr):
        std::runtime_error(message), _code(code), _detail(std::move(detail))
    {
    }

    [[nodiscard]] ErrorCode code() const noexcept { return _code; }

    /// Structured context (raw completion, offending request, issue list...).
    [[nodiscard]] const nlohmann::json& detail() const noexcept { return _detail; }
    void set_detail(nlohmann::json detail) { _detail = std::move(detail); }

  private:
    ErrorCode _code;
    nlohmann::json _detail;
};

class SyntaxError : public Error
{
  public:
    SyntaxError(const std::string& what, std::size_t line, std::size_t column):
        Error(ErrorCode::syntax_error,
              "syntax error at " + std::to_string(line) + ":" + std::to_string(column) + ": " + what,
              {{"line", line}, {"column", column}, {"reason", what}}),
        _reason(what), _line(line), _column(column)
    {
    }

    [[nodiscard]] const std::string& reason() const noexcept { return _reason; }
    [[nodiscard]] std::size_t line() const noexcept { return _line; }
    [[nodiscard]] std::size_t column() const noexcept { return _column; }

  private:
    std::string _reason;
    std::size_t _line;
    std::size_t _column;
};

class ResolutionError : public Error
{
  public:
    explicit ResolutionError(const std::string& path, const std::string& why = "unknown path"):
        Error(ErrorCode::resolution_error, "cannot resolve '" + path + "': " + why, {{"path", path}})
    {
    }
};

class TemplateTypeError : public Error
{
  public:
    explicit TemplateTypeError(const std::string& message): Error(ErrorCode::type_error, message) {}
};

class ParseError : public Error
{
  public:
    explicit ParseError(const std::string& message): Error(ErrorCode::parse_error, message) {}
};

struct ValidationIssue
{
    std::string path; // e.g. $.requirements[2].importance
    std::string message;

    bool operator==(const ValidationIssue&) const = default;
};

class ValidationError : public Error
{
  public:
    explicit ValidationError(std::vector<ValidationIssue> issues):
        Error(ErrorCode::validation_error, summarize(issues), issues_json(issues)), _issues(std::move(issues))
    {
    }

    ValidationError(std::string path, std::string message):
        ValidationError(std::vector<ValidationIssue> {{std::move(path), std::move(message)}})
    {
    }

    [[nodiscard]] const std::vector<ValidationIssue>& issues() const noexcept { return _issues; }

  private:
    static std::string summarize(const std::vector<ValidationIssue>& issues)
    {
        std::string out = "validation failed";
        for (const auto& issue: issues)
            out += "\n  " + issue.path + ": " + issue.message;
        return out;
    }

    static nlohmann::json issues_json(const std::vector<ValidationIssue>& issues)
    {
        auto list = nlohmann::json::array();
        for (const auto& issue: issues)
            list.push_back({{"path", issue.path}, {"message", issue.message}});
        return {{"issues", std::move(list)}};
    }

    std::vector<ValidationIssue> _issues;
};

class PathError : public Error
{
  public:
    explicit PathError(const std::string& path, const std::string& why = "does not resolve"):
        Error(ErrorCode::path_error, "path '" + path + "' " + why, {{"path", path}})
    {
    }
};

class PreconditionError : public Error
{
  public:
    explicit PreconditionError(const std::string& message): Error(ErrorCode::precondition_failed, message) {}
};

class IoError : public Error
{
  public:
    IoError(const std::string& path, const std::string& what):
        Error(ErrorCode::io_error, path + ": " + what, {{"path", path}})
    {
    }
};

} // namespace autoscrum
