// SPDX-License-Identifier: Apache-2.0
#pragma once

// Backlog domain types and their JSON forms.
//
// Two reading modes share one set of rules:
//   Strict  - project files and human edits: every invariant is enforced.
//   Model   - language model output: importance is clamped into [1, 5],
//             unknown keys are ignored; missing required keys still fail.

#include <autoscrum/error.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace autoscrum
{

using Json = nlohmann::ordered_json;

struct Requirement
{
    std::string name;
    std::string description;
    std::string customer_type;
    std::string stakeholders;
    int importance = 3;
    std::string assumptions;
    std::string risks;

    bool operator==(const Requirement&) const = default;
};

struct Feature
{
    std::string name;
    std::string explanation;
    std::string reasoning;
    std::string goal;

    bool operator==(const Feature&) const = default;
};

struct TaskItem
{
    std::string task;
    std::vector<std::string> subtasks;

    bool operator==(const TaskItem&) const = default;
};

struct ResourceItem
{
    std::string question;
    std::string concept_; // "concept" in JSON

    bool operator==(const ResourceItem&) const = default;
};

struct UserStory
{
    std::string name;
    std::string feature;
    std::optional<std::string> epic;
    std::string reasoning;
    std::vector<std::string> acceptance;
    std::vector<TaskItem> tasks;
    std::vector<ResourceItem> resources;

    bool operator==(const UserStory&) const = default;
};

enum class PlanStatus
{
    progress,
    done,
};

inline std::string_view to_string(PlanStatus status) noexcept
{
    return status == PlanStatus::done ? "done" : "progress";
}

struct PlanStep
{
    std::string reasoning;
    std::string task;
    PlanStatus status = PlanStatus::progress;

    bool operator==(const PlanStep&) const = default;
};

enum class ReadMode
{
    strict,
    model,
};

/// Collects every problem found while reading, each tagged with its JSON path.
class Issues
{
  public:
    void add(std::string path, std::string message) { _list.push_back({std::move(path), std::move(message)}); }
    [[nodiscard]] bool empty() const noexcept { return _list.empty(); }
    [[nodiscard]] const std::vector<ValidationIssue>& list() const noexcept { return _list; }

    void throw_if_any() const
    {
        if (!_list.empty())
            throw ValidationError(_list);
    }

  private:
    std::vector<ValidationIssue> _list;
};

inline std::string case_fold(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

namespace detail
{

inline std::string trimmed(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline bool expect_object(const Json& j, const std::string& path, Issues& issues)
{
    if (!j.is_object())
    {
        issues.add(path, std::string("expected an object, got ") + j.type_name());
        return false;
    }
    return true;
}

// Absent -> empty string (or an issue when required). Present must be a string.
inline std::string read_text(const Json& obj, const char* key, const std::string& path, Issues& issues, bool required)
{
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null())
    {
        if (required)
            issues.add(path + "." + key, "missing required field");
        return {};
    }
    if (!it->is_string())
    {
        issues.add(path + "." + key, std::string("expected text, got ") + it->type_name());
        return {};
    }
    auto value = it->get<std::string>();
    if (required && trimmed(value).empty())
        issues.add(path + "." + key, "must not be empty");
    return value;
}

inline std::vector<std::string> read_text_list(const Json& obj, const char* key, const std::string& path,
                                               Issues& issues)
{
    std::vector<std::string> out;
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null())
        return out;
    if (!it->is_array())
    {
        issues.add(path + "." + key, std::string("expected a list, got ") + it->type_name());
        return out;
    }
    for (std::size_t i = 0; i < it->size(); ++i)
    {
        const auto& v = (*it)[i];
        auto at = path + "." + key + "[" + std::to_string(i) + "]";
        if (!v.is_string())
            issues.add(at, std::string("expected text, got ") + v.type_name());
        else if (trimmed(v.get<std::string>()).empty())
            issues.add(at, "must not be empty");
        else
            out.push_back(v.get<std::string>());
    }
    return out;
}

} // namespace detail

// ---- readers ----------------------------------------------------------------

inline Requirement read_requirement(const Json& j, const std::string& path, ReadMode mode, Issues& issues)
{
    Requirement r;
    if (!detail::expect_object(j, path, issues))
        return r;
    r.name = detail::read_text(j, "name", path, issues, true);
    r.description = detail::read_text(j, "description", path, issues, false);
    r.customer_type = detail::read_text(j, "customer_type", path, issues, false);
    r.stakeholders = detail::read_text(j, "stakeholders", path, issues, false);
    r.assumptions = detail::read_text(j, "assumptions", path, issues, false);
    r.risks = detail::read_text(j, "risks", path, issues, false);

    auto at = path + ".importance";
    auto it = j.find("importance");
    if (it == j.end() || it->is_null())
    {
        issues.add(at, "missing required field");
        return r;
    }
    std::optional<double> value;
    if (it->is_number_integer())
        value = it->get<double>();
    else if (it->is_number_float())
        value = mode == ReadMode::model ? std::optional(it->get<double>()) : std::nullopt;
    else if (it->is_string() && mode == ReadMode::model)
    {
        try
        {
            std::size_t used = 0;
            auto text = detail::trimmed(it->get<std::string>());
            double d = std::stod(text, &used);
            if (used == text.size())
                value = d;
        }
        catch (const std::exception&)
        {
        }
    }
    if (!value)
    {
        issues.add(at, "expected an integer 1-5");
        return r;
    }
    auto n = static_cast<long>(std::lround(*value));
    if (mode == ReadMode::model)
        n = std::clamp(n, 1L, 5L);
    else if (n < 1 || n > 5)
    {
        issues.add(at, "importance " + std::to_string(n) + " outside 1-5");
        return r;
    }
    r.importance = static_cast<int>(n);
    return r;
}

inline Feature read_feature(const Json& j, const std::string& path, ReadMode, Issues& issues)
{
    Feature f;
    if (!detail::expect_object(j, path, issues))
        return f;
    f.name = detail::read_text(j, "name", path, issues, true);
    f.explanation = detail::read_text(j, "explanation", path, issues, false);
    f.reasoning = detail::read_text(j, "reasoning", path, issues, false);
    f.goal = detail::read_text(j, "goal", path, issues, true);
    return f;
}

inline TaskItem read_task(const Json& j, const std::string& path, ReadMode, Issues& issues)
{
    TaskItem t;
    if (!detail::expect_object(j, path, issues))
        return t;
    t.task = detail::read_text(j, "task", path, issues, true);
    t.subtasks = detail::read_text_list(j, "subtasks", path, issues);
    return t;
}

inline ResourceItem read_resource(const Json& j, const std::string& path, ReadMode, Issues& issues)
{
    ResourceItem r;
    if (!detail::expect_object(j, path, issues))
        return r;
    r.question = detail::read_text(j, "question", path, issues, true);
    r.concept_ = detail::read_text(j, "concept", path, issues, true);
    return r;
}

inline std::vector<TaskItem> read_tasks(const Json& list, const std::string& path, ReadMode mode, Issues& issues)
{
    std::vector<TaskItem> out;
    if (!list.is_array())
    {
        issues.add(path, std::string("expected a list, got ") + list.type_name());
        return out;
    }
    for (std::size_t i = 0; i < list.size(); ++i)
        out.push_back(read_task(list[i], path + "[" + std::to_string(i) + "]", mode, issues));
    return out;
}

inline std::vector<ResourceItem> read_resources(const Json& list, const std::string& path, ReadMode mode,
                                                Issues& issues)
{
    std::vector<ResourceItem> out;
    if (!list.is_array())
    {
        issues.add(path, std::string("expected a list, got ") + list.type_name());
        return out;
    }
    for (std::size_t i = 0; i < list.size(); ++i)
        out.push_back(read_resource(list[i], path + "[" + std::to_string(i) + "]", mode, issues));
    return out;
}

inline UserStory read_story(const Json& j, const std::string& path, ReadMode mode, Issues& issues)
{
    UserStory s;
    if (!detail::expect_object(j, path, issues))
        return s;
    s.name = detail::read_text(j, "name", path, issues, true);
    s.feature = detail::read_text(j, "feature", path, issues, false);
    if (auto it = j.find("epic"); it != j.end() && !it->is_null())
    {
        if (it->is_string())
            s.epic = it->get<std::string>();
        else
            issues.add(path + ".epic", std::string("expected text, got ") + it->type_name());
    }
    s.reasoning = detail::read_text(j, "reasoning", path, issues, false);
    s.acceptance = detail::read_text_list(j, "acceptance", path, issues);
    if (auto it = j.find("tasks"); it != j.end() && !it->is_null())
        s.tasks = read_tasks(*it, path + ".tasks", mode, issues);
    if (auto it = j.find("resources"); it != j.end() && !it->is_null())
        s.resources = read_resources(*it, path + ".resources", mode, issues);
    return s;
}

/// Reads a status token, case-insensitively.
inline std::optional<PlanStatus> parse_status(std::string_view token)
{
    auto folded = case_fold(detail::trimmed(token));
    if (folded == "progress")
        return PlanStatus::progress;
    if (folded == "done")
        return PlanStatus::done;
    return std::nullopt;
}

inline PlanStep read_plan_step(const Json& j, const std::string& path, ReadMode mode, Issues& issues)
{
    PlanStep p;
    if (!detail::expect_object(j, path, issues))
        return p;
    p.reasoning = detail::read_text(j, "reasoning", path, issues, false);
    p.task = detail::read_text(j, "task", path, issues, true);
    auto it = j.find("status");
    if (it == j.end() || !it->is_string())
    {
        issues.add(path + ".status", "missing status token");
        return p;
    }
    auto token = it->get<std::string>();
    auto status = mode == ReadMode::model ? parse_status(token) : std::optional<PlanStatus> {};
    if (mode == ReadMode::strict)
    {
        if (token == "progress")
            status = PlanStatus::progress;
        else if (token == "done")
            status = PlanStatus::done;
    }
    if (!status)
        issues.add(path + ".status", "status '" + token + "' is not one of progress, done");
    else
        p.status = *status;
    return p;
}

// ---- writers ----------------------------------------------------------------

inline Json to_json(const Requirement& r)
{
    Json j;
    j["name"] = r.name;
    j["description"] = r.description;
    j["customer_type"] = r.customer_type;
    j["stakeholders"] = r.stakeholders;
    j["importance"] = r.importance;
    j["assumptions"] = r.assumptions;
    j["risks"] = r.risks;
    return j;
}

inline Json to_json(const Feature& f)
{
    Json j;
    j["name"] = f.name;
    j["explanation"] = f.explanation;
    j["reasoning"] = f.reasoning;
    j["goal"] = f.goal;
    return j;
}

inline Json to_json(const TaskItem& t)
{
    Json j;
    j["task"] = t.task;
    j["subtasks"] = t.subtasks;
    return j;
}

inline Json to_json(const ResourceItem& r)
{
    Json j;
    j["question"] = r.question;
    j["concept"] = r.concept_;
    return j;
}

inline Json to_json(const UserStory& s)
{
    Json j;
    j["name"] = s.name;
    j["feature"] = s.feature;
    if (s.epic)
        j["epic"] = *s.epic;
    j["reasoning"] = s.reasoning;
    j["acceptance"] = s.acceptance;
    j["tasks"] = Json::array();
    for (const auto& t: s.tasks)
        j["tasks"].push_back(to_json(t));
    j["resources"] = Json::array();
    for (const auto& r: s.resources)
        j["resources"].push_back(to_json(r));
    return j;
}

inline Json to_json(const PlanStep& p)
{
    Json j;
    j["reasoning"] = p.reasoning;
    j["task"] = p.task;
    j["status"] = to_string(p.status);
    return j;
}

template <class T>
Json to_json_list(const std::vector<T>& items)
{
    auto out = Json::array();
    for (const auto& item: items)
        out.push_back(to_json(item));
    return out;
}

} // namespace autoscrum
