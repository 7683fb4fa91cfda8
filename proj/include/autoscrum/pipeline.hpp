// SPDX-License-Identifier: Apache-2.0
#pragma once

// The generation stages. Each one builds a program environment from the
// project, runs the stage's language program, extracts JSON from the
// completion, validates it as backlog items and folds them into a new state.

#include <autoscrum/backend.hpp>
#include <autoscrum/merge.hpp>
#include <autoscrum/programs.hpp>
#include <autoscrum/project.hpp>
#include <autoscrum/template/extract_json.hpp>
#include <autoscrum/template/render.hpp>

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace autoscrum
{

enum class Stage
{
    requirements,
    features,
    stories,
    acceptance,
    tasks,
    clarify,
};

struct StageSpec
{
    Stage stage;
    std::string_view name;    // CLI command
    std::string_view program; // programs/<program>.hbs
    std::string_view binding; // gen name holding the JSON answer
};

inline constexpr std::array<StageSpec, 6> stage_specs {{
    {Stage::requirements, "requirements", "requalizer", "requirements"},
    {Stage::features, "features", "featurizer", "features"},
    {Stage::stories, "stories", "storylizer", "stories"},
    {Stage::acceptance, "acceptance", "acceptance", "acceptance"},
    {Stage::tasks, "tasks", "taskalizer", "tasks"},
    {Stage::clarify, "clarify", "clarifier", "resources"},
}};

inline const StageSpec& spec_of(Stage stage)
{
    for (const auto& s: stage_specs)
        if (s.stage == stage)
            return s;
    throw Error(ErrorCode::internal, "unknown stage");
}

struct StageContext
{
    Backend& backend;
    const ProgramLibrary& programs;
    tmpl::GenDefaults defaults {};
};

template <class T>
struct BatchResult
{
    ProjectState state;
    std::vector<T> added;
    std::vector<T> rejected;
    std::vector<ChatExchange> transcript;
};

struct StoryFailure
{
    std::string story;
    ErrorCode code = ErrorCode::internal;
    std::string message;
    nlohmann::json detail;
};

struct StoryBatchResult
{
    ProjectState state;
    std::vector<std::string> updated;
    std::vector<std::string> skipped;
    std::vector<StoryFailure> failures;
    std::vector<ChatExchange> transcript;
};

/// Which stories a per-story stage looks at. No names means every story.
/// `limit` caps how many stories are sent to the model (0 = no cap).
struct StorySelector
{
    std::vector<std::string> names;
    std::size_t limit = 0;
};

// ---- environments -----------------------------------------------------------

inline Json requirement_descriptions(const ProjectState& s)
{
    auto out = Json::array();
    for (const auto& r: s.requirements)
        out.push_back(r.description);
    return out;
}

inline Json requirements_env(const ProjectState& s, int count)
{
    return {
        {"product", s.product},
        {"vision", s.vision},
        {"niche", s.niche},
        {"current_state", s.current_state},
        {"desired_state", s.desired_state},
        {"requirements", to_json_list(s.requirements)},
        {"count", count},
    };
}

inline Json features_env(const ProjectState& s, int count)
{
    auto names = Json::array();
    for (const auto& f: s.features)
        names.push_back(f.name);
    return {
        {"product", s.product},
        {"vision", s.vision},
        {"requirements", requirement_descriptions(s)},
        {"features", std::move(names)},
        {"avoid", s.avoid},
        {"count", count},
    };
}

inline Json stories_env(const ProjectState& s, int count)
{
    auto names = Json::array();
    auto goals = Json::array();
    for (const auto& f: s.features)
    {
        names.push_back(f.name);
        goals.push_back(f.goal);
    }
    auto stories = Json::array();
    for (const auto& st: s.stories)
        stories.push_back(st.name);
    return {
        {"product", s.product},
        {"vision", s.vision},
        {"features", std::move(names)},
        {"goals", std::move(goals)},
        {"stories", std::move(stories)},
        {"count", count},
    };
}

inline Json acceptance_env(const ProjectState& s, const UserStory& story)
{
    return {
        {"product", s.product},
        {"vision", s.vision},
        {"requirements", requirement_descriptions(s)},
        {"story", to_json(story)},
    };
}

inline Json tasks_env(const ProjectState& s, const UserStory& story)
{
    return {
        {"product", s.product},
        {"vision", s.vision},
        {"story",
         {
             {"name", story.name},
             {"feature", story.feature},
             {"reasoning", story.reasoning},
             {"acceptance", story.acceptance},
         }},
    };
}

inline Json resources_env(const ProjectState& s, const UserStory& story)
{
    return acceptance_env(s, story);
}

// ---- shared machinery -------------------------------------------------------

struct ProgramOutput
{
    Json value;
    std::string raw;
    std::vector<ChatExchange> transcript;
};

/// Renders a stage program and extracts the JSON bound to the stage's gen.
/// An unparseable completion is retried once with the same prompt.
inline ProgramOutput run_stage_program(StageContext& ctx, const StageSpec& spec, const Json& env_root)
{
    auto program = ctx.programs.get(std::string(spec.program));
    ProgramOutput out;
    for (int attempt = 0;; ++attempt)
    {
        tmpl::Environment env(env_root);
        auto result = tmpl::render(*program, env, ctx.backend, ctx.defaults);
        for (auto& ex: result.transcript)
            out.transcript.push_back(std::move(ex));
        const auto* raw = result.binding(spec.binding);
        if (!raw)
            throw Error(ErrorCode::internal,
                        "program '" + std::string(spec.program) + "' has no {{gen '" + std::string(spec.binding) + "'}}");
        out.raw = *raw;
        try
        {
            out.value = extract_json(out.raw);
            return out;
        }
        catch (const JsonExtractError&)
        {
            if (attempt >= 1)
                throw;
        }
    }
}

/// Accepts a bare list, or an object wrapping exactly one list.
inline const Json& as_item_list(const Json& value)
{
    if (value.is_array())
        return value;
    if (value.is_object() && value.size() == 1 && value.begin()->is_array())
        return *value.begin();
    throw ValidationError("$", std::string("expected a JSON list, got ") + value.type_name());
}

/// Attaches the raw completion to validation failures raised by `fn`.
template <class Fn>
auto with_raw(const std::string& raw, Fn fn) -> decltype(fn())
{
    try
    {
        return fn();
    }
    catch (ValidationError& e)
    {
        auto d = e.detail();
        d["raw"] = raw;
        e.set_detail(std::move(d));
        throw;
    }
}

template <class T, class Reader>
std::vector<T> read_model_items(const Json& list, std::size_t cap, Reader reader)
{
    Issues issues;
    std::vector<T> items;
    auto n = cap ? std::min<std::size_t>(cap, list.size()) : list.size();
    for (std::size_t i = 0; i < n; ++i)
        items.push_back(reader(list[i], "$[" + std::to_string(i) + "]", ReadMode::model, issues));
    issues.throw_if_any();
    return items;
}

inline void require_text(const std::string& value, const char* field)
{
    if (detail::trimmed(value).empty())
        throw PreconditionError(std::string("project field '") + field + "' must not be empty");
}

inline void require_state_maps(const ProjectState& s)
{
    if (s.current_state.empty())
        throw PreconditionError("current_state needs at least one entry");
    if (s.desired_state.empty())
        throw PreconditionError("desired_state needs at least one entry");
}

template <class T, class Reader>
BatchResult<T> run_batch_stage(const ProjectState& state, int count, StageContext& ctx, Stage stage, const Json& env,
                               const std::vector<T>& existing, std::vector<T> ProjectState::*field, Reader reader)
{
    BatchResult<T> out {state, {}, {}, {}};
    if (count <= 0)
        return out;
    auto output = run_stage_program(ctx, spec_of(stage), env);
    out.transcript = std::move(output.transcript);
    auto items = with_raw(output.raw, [&] {
        return read_model_items<T>(as_item_list(output.value), static_cast<std::size_t>(count), reader);
    });
    auto merged = merge_by_name(existing, items);
    out.state.*field = std::move(merged.merged);
    out.rejected = std::move(merged.rejected);
    auto& all = out.state.*field;
    out.added.assign(all.begin() + static_cast<std::ptrdiff_t>(existing.size()), all.end());
    return out;
}

// ---- batch stages -----------------------------------------------------------

inline BatchResult<Requirement> gen_requirements(const ProjectState& state, int count, StageContext& ctx)
{
    if (count <= 0)
        return {state, {}, {}, {}};
    require_text(state.product, "product");
    require_text(state.vision, "vision");
    require_text(state.niche, "niche");
    require_state_maps(state);
    return run_batch_stage<Requirement>(state, count, ctx, Stage::requirements, requirements_env(state, count),
                                        state.requirements, &ProjectState::requirements, read_requirement);
}

inline BatchResult<Feature> gen_features(const ProjectState& state, int count, StageContext& ctx)
{
    if (count <= 0)
        return {state, {}, {}, {}};
    if (state.requirements.empty())
        throw PreconditionError("features need at least one requirement; run 'requirements' first");
    return run_batch_stage<Feature>(state, count, ctx, Stage::features, features_env(state, count), state.features,
                                    &ProjectState::features, read_feature);
}

inline BatchResult<UserStory> gen_stories(const ProjectState& state, int count, StageContext& ctx)
{
    if (count <= 0)
        return {state, {}, {}, {}};
    if (state.features.empty() && state.requirements.empty())
        throw PreconditionError("stories need at least one feature or requirement");
    Issues issues;
    for (std::size_t i = 0; i < state.features.size(); ++i)
        if (detail::trimmed(state.features[i].goal).empty())
            issues.add("$.features[" + std::to_string(i) + "].goal",
                       "feature '" + state.features[i].name + "' has no goal");
    issues.throw_if_any();

    // Per-story collections belong to the later stages.
    auto reader = [](const Json& j, const std::string& path, ReadMode mode, Issues& issues) {
        auto story = read_story(j, path, mode, issues);
        story.acceptance.clear();
        story.tasks.clear();
        story.resources.clear();
        return story;
    };
    return run_batch_stage<UserStory>(state, count, ctx, Stage::stories, stories_env(state, count), state.stories,
                                      &ProjectState::stories, reader);
}

// ---- per-story stages -------------------------------------------------------

namespace detail
{

inline std::vector<std::size_t> select_stories(const ProjectState& state, const StorySelector& selector)
{
    std::vector<std::size_t> picked;
    if (selector.names.empty())
    {
        for (std::size_t i = 0; i < state.stories.size(); ++i)
            picked.push_back(i);
    }
    else
    {
        for (const auto& name: selector.names)
        {
            auto folded = case_fold(name);
            bool found = false;
            for (std::size_t i = 0; i < state.stories.size(); ++i)
                if (case_fold(state.stories[i].name) == folded)
                {
                    if (std::find(picked.begin(), picked.end(), i) == picked.end())
                        picked.push_back(i);
                    found = true;
                    break;
                }
            if (!found)
                throw PreconditionError("no story named '" + name + "'");
        }
    }
    if (picked.empty())
        throw PreconditionError("story selector matches no story");
    return picked;
}

template <class Apply>
StoryBatchResult run_story_stage(const ProjectState& state, const std::vector<std::size_t>& targets,
                                 std::size_t limit, StageContext& ctx, Stage stage, Apply apply,
                                 Json (*env_of)(const ProjectState&, const UserStory&))
{
    StoryBatchResult out {state, {}, {}, {}, {}};
    std::size_t processed = 0;
    for (auto index: targets)
    {
        const auto& story = state.stories[index];
        if (limit && processed >= limit)
        {
            out.skipped.push_back(story.name);
            continue;
        }
        ++processed;
        try
        {
            auto output = run_stage_program(ctx, spec_of(stage), env_of(state, story));
            for (auto& ex: output.transcript)
                out.transcript.push_back(std::move(ex));
            with_raw(output.raw, [&] {
                apply(out.state.stories[index], as_item_list(output.value));
                return 0;
            });
            out.updated.push_back(story.name);
        }
        catch (const Error& e)
        {
            out.failures.push_back({story.name, e.code(), e.what(), e.detail()});
        }
    }
    return out;
}

} // namespace detail

/// Fills in acceptance criteria for selected stories that have none yet.
inline StoryBatchResult gen_acceptance(const ProjectState& state, const StorySelector& selector, StageContext& ctx)
{
    auto picked = detail::select_stories(state, selector);
    std::vector<std::size_t> targets;
    std::vector<std::string> already;
    for (auto i: picked)
    {
        if (state.stories[i].acceptance.empty())
            targets.push_back(i);
        else
            already.push_back(state.stories[i].name);
    }
    auto out = detail::run_story_stage(
        state, targets, selector.limit, ctx, Stage::acceptance,
        [](UserStory& story, const Json& list) {
            Issues issues;
            std::vector<std::string> criteria;
            for (std::size_t i = 0; i < list.size(); ++i)
            {
                auto at = "$[" + std::to_string(i) + "]";
                if (!list[i].is_string())
                    issues.add(at, std::string("expected text, got ") + list[i].type_name());
                else if (detail::trimmed(list[i].get<std::string>()).empty())
                    issues.add(at, "must not be empty");
                else
                    criteria.push_back(list[i].get<std::string>());
            }
            issues.throw_if_any();
            story.acceptance = std::move(criteria);
        },
        acceptance_env);
    out.skipped.insert(out.skipped.begin(), already.begin(), already.end());
    return out;
}

/// Decomposes stories into tasks. Named stories must have acceptance criteria;
/// when no names are given, stories without criteria are skipped.
inline StoryBatchResult gen_tasks(const ProjectState& state, const StorySelector& selector, StageContext& ctx)
{
    auto picked = detail::select_stories(state, selector);
    std::vector<std::size_t> targets;
    std::vector<std::string> without;
    for (auto i: picked)
    {
        if (!state.stories[i].acceptance.empty())
            targets.push_back(i);
        else if (!selector.names.empty())
            throw PreconditionError("story '" + state.stories[i].name + "' has no acceptance criteria");
        else
            without.push_back(state.stories[i].name);
    }
    if (targets.empty())
        throw PreconditionError("no selected story has acceptance criteria; run 'acceptance' first");
    auto out = detail::run_story_stage(
        state, targets, selector.limit, ctx, Stage::tasks,
        [](UserStory& story, const Json& list) {
            story.tasks = read_model_items<TaskItem>(list, 0, read_task);
        },
        tasks_env);
    out.skipped.insert(out.skipped.begin(), without.begin(), without.end());
    return out;
}

/// Generates research questions and search concepts; replaces existing ones.
inline StoryBatchResult gen_resources(const ProjectState& state, const StorySelector& selector, StageContext& ctx)
{
    auto targets = detail::select_stories(state, selector);
    return detail::run_story_stage(
        state, targets, selector.limit, ctx, Stage::clarify,
        [](UserStory& story, const Json& list) {
            story.resources = read_model_items<ResourceItem>(list, 0, read_resource);
        },
        resources_env);
}

} // namespace autoscrum
