// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shortcut planning: repeatedly ask for the single most urgent next task
// given the current state, the desired state and the plan so far.

#include <autoscrum/pipeline.hpp>

#include <functional>
#include <string>
#include <vector>

namespace autoscrum
{

struct PlanRunConfig
{
    int max_steps = 10;
    double temperature = 0.0;
    bool stop_on_done = true;

    void validate() const
    {
        if (max_steps < 1)
            throw ValidationError("$.max_steps", "must be at least 1");
        if (!(temperature >= 0.0 && temperature <= 2.0))
            throw ValidationError("$.temperature", "must be within [0, 2]");
    }
};

enum class Termination
{
    done,
    cap,
};

inline std::string_view to_string(Termination t) noexcept
{
    return t == Termination::done ? "done" : "cap";
}

/// Called after each step with the step and the state that now includes it;
/// returns the state to continue from (e.g. with an updated current_state).
using StepHook = std::function<ProjectState(const PlanStep&, const ProjectState&)>;

struct PlanRunResult
{
    ProjectState state;
    std::vector<PlanStep> plan; // steps produced by this run
    Termination terminated_by = Termination::cap;
};

/// A run that failed part way. `partial` holds every step produced before the failure.
class PlanRunError : public Error
{
  public:
    PlanRunError(const Error& cause, ProjectState partial, std::size_t steps_done):
        Error(cause.code(), std::string(cause.what()) + " (after " + std::to_string(steps_done) + " plan steps)",
              cause.detail()),
        _partial(std::move(partial))
    {
    }

    [[nodiscard]] const ProjectState& partial() const noexcept { return _partial; }

  private:
    ProjectState _partial;
};

/// Plan history as the planner prompt sees it: task and status only.
inline Json plan_history(const std::vector<PlanStep>& plan)
{
    auto out = Json::array();
    for (const auto& step: plan)
        out.push_back({{"task", step.task}, {"status", to_string(step.status)}});
    return out;
}

inline Json planner_env(const ProjectState& s)
{
    return {
        {"product", s.product},
        {"vision", s.vision},
        {"niche", s.niche},
        {"current_state", s.current_state},
        {"desired_state", s.desired_state},
        {"plan", plan_history(s.plan)},
    };
}

inline constexpr std::string_view planner_program = "planner";
inline constexpr std::string_view planner_binding = "step";

/// Asks for the next step. Does not modify the state.
inline PlanStep next_step(const ProjectState& state, StageContext& ctx)
{
    require_state_maps(state);
    auto program = ctx.programs.get(std::string(planner_program));
    tmpl::Environment env(planner_env(state));
    auto result = tmpl::render(*program, env, ctx.backend, ctx.defaults);
    const auto* raw = result.binding(planner_binding);
    if (!raw)
        throw Error(ErrorCode::internal, "planner program has no {{gen 'step'}}");

    auto value = extract_json(*raw);
    if (value.is_array() && value.size() == 1)
        value = Json(value[0]);
    return with_raw(*raw, [&] {
        Issues issues;
        auto step = read_plan_step(value, "$", ReadMode::model, issues);
        issues.throw_if_any();
        return step;
    });
}

/// Runs the planner until a done step (when stop_on_done) or max_steps.
inline PlanRunResult run_plan(const ProjectState& state, StageContext& ctx, const PlanRunConfig& config,
                              const StepHook& on_step = {})
{
    config.validate();
    StageContext local {ctx.backend, ctx.programs, ctx.defaults};
    local.defaults.temperature = config.temperature;

    PlanRunResult out {state, {}, Termination::cap};
    for (int i = 0; i < config.max_steps; ++i)
    {
        PlanStep step;
        try
        {
            step = next_step(out.state, local);
        }
        catch (const Error& e)
        {
            throw PlanRunError(e, out.state, out.plan.size());
        }
        out.state.plan.push_back(step);
        out.plan.push_back(step);
        if (on_step)
        {
            auto history = out.state.plan;
            out.state = on_step(step, out.state);
            out.state.plan = std::move(history); // hooks may not rewrite history
        }
        if (step.status == PlanStatus::done && config.stop_on_done)
        {
            out.terminated_by = Termination::done;
            break;
        }
    }
    return out;
}

} // namespace autoscrum
