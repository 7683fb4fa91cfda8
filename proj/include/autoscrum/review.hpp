// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <autoscrum/project.hpp>

#include <algorithm>
#include <functional>
#include <tuple>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace autoscrum
{

enum class ReviewAction
{
    accept,
    reject,
    edit,
};

struct ReviewDecision
{
    std::string target; // $.stories[1], $.stories[0].tasks[2], ...
    ReviewAction action = ReviewAction::accept;
    std::optional<Json> payload;

    static ReviewDecision from_json(const Json& j)
    {
        if (!j.is_object() || !j.contains("target") || !j["target"].is_string() || !j.contains("action")
            || !j["action"].is_string())
            throw ValidationError("$", "a decision needs string fields 'target' and 'action'");
        ReviewDecision d;
        d.target = j["target"].get<std::string>();
        auto action = j["action"].get<std::string>();
        if (action == "accept")
            d.action = ReviewAction::accept;
        else if (action == "reject")
            d.action = ReviewAction::reject;
        else if (action == "edit")
            d.action = ReviewAction::edit;
        else
            throw ValidationError(d.target, "unknown action '" + action + "'");
        if (j.contains("payload") && !j["payload"].is_null())
            d.payload = j["payload"];
        return d;
    }
};

/// A resolved review target: a top-level collection item or an item of a
/// story's acceptance/tasks/resources list.
struct ItemRef
{
    std::string collection;
    std::size_t index = 0;
    std::optional<std::string> sub;
    std::size_t sub_index = 0;

    bool operator<(const ItemRef& o) const
    {
        return std::tie(collection, index, sub, sub_index) < std::tie(o.collection, o.index, o.sub, o.sub_index);
    }
    bool operator==(const ItemRef&) const = default;
};

namespace detail
{

inline std::size_t collection_size(const ProjectState& s, const std::string& name)
{
    if (name == "requirements")
        return s.requirements.size();
    if (name == "features")
        return s.features.size();
    if (name == "stories")
        return s.stories.size();
    if (name == "avoid")
        return s.avoid.size();
    if (name == "plan")
        return s.plan.size();
    return static_cast<std::size_t>(-1);
}

inline std::size_t story_list_size(const UserStory& s, const std::string& name)
{
    if (name == "acceptance")
        return s.acceptance.size();
    if (name == "tasks")
        return s.tasks.size();
    if (name == "resources")
        return s.resources.size();
    return static_cast<std::size_t>(-1);
}

// "name[12]" -> ("name", 12)
inline bool split_segment(std::string_view seg, std::string& name, std::size_t& index)
{
    auto open = seg.find('[');
    if (seg.empty() || open == std::string_view::npos || open == 0 || seg.back() != ']')
        return false;
    name = std::string(seg.substr(0, open));
    auto digits = seg.substr(open + 1, seg.size() - open - 2);
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string_view::npos || digits.size() > 9)
        return false;
    index = std::stoul(std::string(digits));
    return true;
}

} // namespace detail

inline ItemRef resolve_target(const ProjectState& state, const std::string& target)
{
    if (!target.starts_with("$."))
        throw PathError(target, "must start with '$.'");
    auto rest = std::string_view(target).substr(2);
    auto dot = rest.find('.');
    ItemRef ref;
    if (!detail::split_segment(rest.substr(0, dot), ref.collection, ref.index))
        throw PathError(target, "is not of the form $.collection[index]");
    auto size = detail::collection_size(state, ref.collection);
    if (size == static_cast<std::size_t>(-1))
        throw PathError(target, "names no backlog collection");
    if (ref.index >= size)
        throw PathError(target, "index out of range (size " + std::to_string(size) + ")");
    if (dot == std::string_view::npos)
        return ref;

    if (ref.collection != "stories")
        throw PathError(target, "only stories have nested collections");
    std::string sub;
    if (!detail::split_segment(rest.substr(dot + 1), sub, ref.sub_index))
        throw PathError(target, "is not of the form $.stories[i].list[j]");
    auto sub_size = detail::story_list_size(state.stories[ref.index], sub);
    if (sub_size == static_cast<std::size_t>(-1))
        throw PathError(target, "names no story collection");
    if (ref.sub_index >= sub_size)
        throw PathError(target, "index out of range (size " + std::to_string(sub_size) + ")");
    ref.sub = sub;
    return ref;
}

namespace detail
{

inline std::string read_text_payload(const Json& payload, const std::string& path, Issues& issues)
{
    if (!payload.is_string())
    {
        issues.add(path, "expected text");
        return {};
    }
    if (trimmed(payload.get<std::string>()).empty())
        issues.add(path, "must not be empty");
    return payload.get<std::string>();
}

inline void apply_edit(ProjectState& s, const ItemRef& ref, const Json& payload, const std::string& path,
                       Issues& issues)
{
    const auto mode = ReadMode::strict;
    if (ref.sub)
    {
        auto& story = s.stories[ref.index];
        if (*ref.sub == "acceptance")
            story.acceptance[ref.sub_index] = read_text_payload(payload, path, issues);
        else if (*ref.sub == "tasks")
            story.tasks[ref.sub_index] = read_task(payload, path, mode, issues);
        else
            story.resources[ref.sub_index] = read_resource(payload, path, mode, issues);
        return;
    }
    if (ref.collection == "requirements")
        s.requirements[ref.index] = read_requirement(payload, path, mode, issues);
    else if (ref.collection == "features")
        s.features[ref.index] = read_feature(payload, path, mode, issues);
    else if (ref.collection == "stories")
        s.stories[ref.index] = read_story(payload, path, mode, issues);
    else if (ref.collection == "avoid")
        s.avoid[ref.index] = read_text_payload(payload, path, issues);
    else
        s.plan[ref.index] = read_plan_step(payload, path, mode, issues);
}

template <class T>
void erase_indices(std::vector<T>& v, std::vector<std::size_t> indices)
{
    std::sort(indices.begin(), indices.end(), std::greater<>());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    for (auto i: indices)
        v.erase(v.begin() + static_cast<std::ptrdiff_t>(i));
}

} // namespace detail

/// Applies human review decisions. All targets are resolved against the input
/// state, so indices never shift between decisions. Edits are held to the
/// strict schema (no clamping). Returns a new state.
inline ProjectState apply_review(const ProjectState& state, const std::vector<ReviewDecision>& decisions)
{
    std::vector<std::pair<ItemRef, const ReviewDecision*>> resolved;
    std::set<ItemRef> changed;
    for (const auto& d: decisions)
    {
        auto ref = resolve_target(state, d.target);
        if (d.action != ReviewAction::accept && !changed.insert(ref).second)
            throw ValidationError(d.target, "conflicting decisions for the same item");
        if (d.action == ReviewAction::edit && !d.payload)
            throw ValidationError(d.target, "edit requires a payload");
        resolved.emplace_back(ref, &d);
    }

    ProjectState out = state;
    Issues issues;
    for (const auto& [ref, d]: resolved)
        if (d->action == ReviewAction::edit)
            detail::apply_edit(out, ref, *d->payload, d->target, issues);
    issues.throw_if_any();

    std::map<std::string, std::vector<std::size_t>> top;
    std::map<std::pair<std::size_t, std::string>, std::vector<std::size_t>> nested;
    for (const auto& [ref, d]: resolved)
    {
        if (d->action != ReviewAction::reject)
            continue;
        if (ref.sub)
            nested[{ref.index, *ref.sub}].push_back(ref.sub_index);
        else
            top[ref.collection].push_back(ref.index);
    }
    // Nested removals first: story indices are still valid.
    for (const auto& [key, indices]: nested)
    {
        auto& story = out.stories[key.first];
        if (key.second == "acceptance")
            detail::erase_indices(story.acceptance, indices);
        else if (key.second == "tasks")
            detail::erase_indices(story.tasks, indices);
        else
            detail::erase_indices(story.resources, indices);
    }
    for (const auto& [name, indices]: top)
    {
        if (name == "requirements")
            detail::erase_indices(out.requirements, indices);
        else if (name == "features")
            detail::erase_indices(out.features, indices);
        else if (name == "stories")
            detail::erase_indices(out.stories, indices);
        else if (name == "avoid")
            detail::erase_indices(out.avoid, indices);
        else
            detail::erase_indices(out.plan, indices);
    }

    check_collections(out, issues);
    issues.throw_if_any();
    return out;
}

} // namespace autoscrum
