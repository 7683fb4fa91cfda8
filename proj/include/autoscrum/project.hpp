// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <autoscrum/backlog.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace autoscrum
{

/// Everything in a project file. Values are plain data: copy, modify, save.
struct ProjectState
{
    std::string product;
    std::string vision;
    std::string niche;
    Json current_state = Json::object(); // text -> number | text | bool
    Json desired_state = Json::object();
    std::vector<Requirement> requirements;
    std::string sprint_duration;
    std::vector<Feature> features;
    std::vector<UserStory> stories;
    std::vector<std::string> avoid;
    std::vector<PlanStep> plan;
    Json extra = Json::object(); // unknown top-level keys, kept for round-trip

    bool operator==(const ProjectState&) const = default;

    [[nodiscard]] const UserStory* find_story(std::string_view name) const
    {
        auto folded = case_fold(name);
        for (const auto& s: stories)
            if (case_fold(s.name) == folded)
                return &s;
        return nullptr;
    }
};

namespace detail
{

inline const std::vector<std::string>& known_project_keys()
{
    static const std::vector<std::string> keys = {
        "product", "vision", "niche", "current_state", "desired_state", "requirements",
        "sprint_duration", "features", "stories", "avoid", "plan",
    };
    return keys;
}

inline Json read_state_map(const Json& root, const char* key, Issues& issues)
{
    auto it = root.find(key);
    if (it == root.end() || it->is_null())
        return Json::object();
    if (!it->is_object())
    {
        issues.add(std::string("$.") + key, std::string("expected a map, got ") + it->type_name());
        return Json::object();
    }
    for (const auto& [k, v]: it->items())
        if (!(v.is_string() || v.is_number() || v.is_boolean()))
            issues.add(std::string("$.") + key + "." + k, std::string("expected a scalar, got ") + v.type_name());
    return *it;
}

template <class T, class Reader>
std::vector<T> read_list(const Json& root, const char* key, Issues& issues, Reader reader)
{
    std::vector<T> out;
    auto it = root.find(key);
    if (it == root.end() || it->is_null())
        return out;
    auto path = std::string("$.") + key;
    if (!it->is_array())
    {
        issues.add(path, std::string("expected a list, got ") + it->type_name());
        return out;
    }
    for (std::size_t i = 0; i < it->size(); ++i)
        out.push_back(reader((*it)[i], path + "[" + std::to_string(i) + "]", ReadMode::strict, issues));
    return out;
}

template <class T, class NameOf>
void check_unique_names(const std::vector<T>& items, const char* collection, NameOf name_of, Issues& issues)
{
    std::set<std::string> seen;
    for (std::size_t i = 0; i < items.size(); ++i)
    {
        auto folded = case_fold(name_of(items[i]));
        if (folded.empty())
            continue;
        if (!seen.insert(folded).second)
            issues.add(std::string("$.") + collection + "[" + std::to_string(i) + "].name",
                       "duplicate name '" + name_of(items[i]) + "' (names are unique ignoring case)");
    }
}

} // namespace detail

/// Collection-level invariants that single-item readers cannot see.
inline void check_collections(const ProjectState& state, Issues& issues)
{
    detail::check_unique_names(state.features, "features", [](const Feature& f) { return f.name; }, issues);
    detail::check_unique_names(state.stories, "stories", [](const UserStory& s) { return s.name; }, issues);
}

/// Builds a state from a parsed project document, checking every invariant.
inline ProjectState project_from_json(const Json& root)
{
    Issues issues;
    ProjectState s;
    if (!root.is_object())
    {
        issues.add("$", std::string("project must be an object, got ") + root.type_name());
        issues.throw_if_any();
    }
    s.product = detail::read_text(root, "product", "$", issues, true);
    s.vision = detail::read_text(root, "vision", "$", issues, true);
    s.niche = detail::read_text(root, "niche", "$", issues, true);
    s.current_state = detail::read_state_map(root, "current_state", issues);
    s.desired_state = detail::read_state_map(root, "desired_state", issues);
    s.requirements = detail::read_list<Requirement>(root, "requirements", issues, read_requirement);
    s.sprint_duration = detail::read_text(root, "sprint_duration", "$", issues, false);
    s.features = detail::read_list<Feature>(root, "features", issues, read_feature);
    s.stories = detail::read_list<UserStory>(root, "stories", issues, read_story);
    s.plan = detail::read_list<PlanStep>(root, "plan", issues, read_plan_step);

    if (auto it = root.find("avoid"); it != root.end() && !it->is_null())
    {
        if (!it->is_array())
            issues.add("$.avoid", "expected a list");
        else
            for (std::size_t i = 0; i < it->size(); ++i)
            {
                if ((*it)[i].is_string())
                    s.avoid.push_back((*it)[i].get<std::string>());
                else
                    issues.add("$.avoid[" + std::to_string(i) + "]", "expected text");
            }
    }

    for (const auto& [k, v]: root.items())
    {
        const auto& known = detail::known_project_keys();
        if (std::find(known.begin(), known.end(), k) == known.end())
            s.extra[k] = v;
    }

    check_collections(s, issues);
    issues.throw_if_any();
    return s;
}

inline Json project_to_json(const ProjectState& s)
{
    Json j;
    j["product"] = s.product;
    j["vision"] = s.vision;
    j["niche"] = s.niche;
    j["current_state"] = s.current_state;
    j["desired_state"] = s.desired_state;
    j["requirements"] = to_json_list(s.requirements);
    j["sprint_duration"] = s.sprint_duration;
    j["features"] = to_json_list(s.features);
    j["stories"] = to_json_list(s.stories);
    j["avoid"] = s.avoid;
    j["plan"] = to_json_list(s.plan);
    for (const auto& [k, v]: s.extra.items())
        j[k] = v;
    return j;
}

/// Re-checks every invariant of an in-memory state.
inline void validate_project(const ProjectState& state)
{
    (void) project_from_json(project_to_json(state));
}

/// The text written by save_project: 2-space indent, fixed key order, trailing newline.
inline std::string project_text(const ProjectState& state)
{
    return project_to_json(state).dump(2, ' ', false) + "\n";
}

inline ProjectState load_project(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(path.string(), std::filesystem::exists(path) ? "cannot read file" : "file not found");
    std::stringstream buf;
    buf << in.rdbuf();
    auto root = Json::parse(buf.str(), nullptr, false);
    if (root.is_discarded())
        throw ParseError(path.string() + ": malformed JSON");
    return project_from_json(root);
}

/// Writes to a sibling temp file, syncs, then renames over `path`.
inline void save_project(const ProjectState& state, const std::filesystem::path& path)
{
    auto text = project_text(state);
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError(path.string(), "cannot open for writing");
        out << text;
        out.flush();
        if (!out)
        {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw IoError(path.string(), "write failed");
        }
    }
    if (auto fd = ::open(tmp.c_str(), O_RDONLY | O_CLOEXEC); fd >= 0)
    {
        ::fsync(fd);
        ::close(fd);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
    {
        auto why = ec.message();
        std::filesystem::remove(tmp, ec);
        throw IoError(path.string(), "rename failed: " + why);
    }
}

} // namespace autoscrum
