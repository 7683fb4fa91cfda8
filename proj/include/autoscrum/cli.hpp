// SPDX-License-Identifier: Apache-2.0
#pragma once

// The `autoscrum` command line.
//
// Exit codes: 0 success, 1 usage error, 2 validation/backend/extract/io error.
// On exit 2 the project file is left untouched.

#include <autoscrum/openai.hpp>
#include <autoscrum/planner.hpp>
#include <autoscrum/replay.hpp>
#include <autoscrum/review.hpp>
#include <autoscrum/service.hpp>
#include <autoscrum/yaml.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace autoscrum
{

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_failure = 2;

/// Builds the completion backend for --backend live|replay|record.
inline std::shared_ptr<Backend> make_backend(const std::string& mode, const std::vector<std::string>& fixtures)
{
    if (mode == "replay")
    {
        if (fixtures.empty())
            throw PreconditionError("--backend replay needs at least one --fixtures file");
        std::vector<std::filesystem::path> paths(fixtures.begin(), fixtures.end());
        return std::make_shared<ReplayBackend>(FixtureStore::from_files(paths));
    }
    auto live = std::make_shared<LiveBackend>(LiveConfig::from_env());
    if (mode == "record")
    {
        if (fixtures.size() != 1)
            throw PreconditionError("--backend record needs exactly one --fixtures file to append to");
        return record(live, fixtures.front());
    }
    return live;
}

inline bool is_generation_command(std::string_view c)
{
    return c == "requirements" || c == "features" || c == "stories" || c == "acceptance" || c == "tasks"
        || c == "clarify" || c == "plan";
}

struct CommandOutcome
{
    ProjectState state;
    Json output;                      // printed as YAML on success
    std::vector<std::string> notes;   // informational lines for stderr
    std::vector<StoryFailure> failures;
    std::optional<Termination> termination;
};

/// Runs one generation command against `state`. Shared by the CLI and the
/// fixture tooling so both drive the stages identically.
inline CommandOutcome run_command(const ProjectState& state, const std::string& command, int n,
                                  const std::vector<std::string>& story_names, StageContext& ctx,
                                  const StepHook& on_step = {})
{
    CommandOutcome out;
    auto batch = [&](auto result, const char* key) {
        out.state = std::move(result.state);
        out.output = Json {{key, to_json_list(result.added)}};
        for (const auto& r: result.rejected)
            out.notes.push_back("rejected duplicate: " + r.name);
    };
    auto per_story = [&](StoryBatchResult result) {
        out.state = std::move(result.state);
        auto updated = Json::array();
        for (const auto& name: result.updated)
            updated.push_back(to_json(*out.state.find_story(name)));
        out.output = Json {{"stories", std::move(updated)}};
        for (const auto& s: result.skipped)
            out.notes.push_back("skipped: " + s);
        out.failures = std::move(result.failures);
    };
    StorySelector selector {story_names, static_cast<std::size_t>(n)};

    if (command == "requirements")
        batch(gen_requirements(state, n, ctx), "requirements");
    else if (command == "features")
        batch(gen_features(state, n, ctx), "features");
    else if (command == "stories")
        batch(gen_stories(state, n, ctx), "stories");
    else if (command == "acceptance")
        per_story(gen_acceptance(state, selector, ctx));
    else if (command == "tasks")
        per_story(gen_tasks(state, selector, ctx));
    else if (command == "clarify")
        per_story(gen_resources(state, selector, ctx));
    else if (command == "plan")
    {
        PlanRunConfig config;
        config.max_steps = n;
        config.temperature = ctx.defaults.temperature;
        auto result = run_plan(state, ctx, config, on_step);
        out.state = std::move(result.state);
        out.output = Json {{"plan", to_json_list(result.plan)}};
        out.termination = result.terminated_by;
        out.notes.push_back(std::string("plan stopped: ") + std::string(to_string(result.terminated_by)));
    }
    else
        throw Error(ErrorCode::internal, "unknown command '" + command + "'");
    return out;
}

namespace detail
{

/// "key=value" -> (key, value). Values that parse as JSON scalars keep their type.
inline std::optional<std::pair<std::string, Json>> parse_assignment(const std::string& line)
{
    auto eq = line.find('=');
    if (eq == std::string::npos)
        return std::nullopt;
    auto key = trimmed(line.substr(0, eq));
    auto text = trimmed(line.substr(eq + 1));
    if (key.empty())
        return std::nullopt;
    auto value = Json::parse(text, nullptr, false);
    if (value.is_discarded() || value.is_structured() || value.is_null())
        value = text;
    return std::make_pair(key, value);
}

/// Lets a person update current_state between plan steps.
inline StepHook interactive_state_hook(std::istream& in, std::ostream& err)
{
    return [&in, &err](const PlanStep& step, const ProjectState& state) {
        ProjectState next = state;
        if (step.status == PlanStatus::done)
            return next;
        err << "\nnext task: " << step.task << "\ncurrent_state: " << state.current_state.dump()
            << "\nupdate with key=value lines, empty line to continue\n";
        std::string line;
        while (err << "> " << std::flush, std::getline(in, line))
        {
            if (trimmed(line).empty())
                break;
            if (auto kv = parse_assignment(line))
                next.current_state[kv->first] = kv->second;
            else
                err << "expected key=value\n";
        }
        return next;
    };
}

inline std::vector<ReviewDecision> read_decisions_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(path, "file not found");
    std::stringstream buf;
    buf << in.rdbuf();
    auto j = Json::parse(buf.str(), nullptr, false);
    if (j.is_discarded())
        throw ParseError(path + ": malformed JSON");
    if (j.is_object() && j.contains("decisions"))
        j = Json(j["decisions"]);
    if (!j.is_array())
        throw ValidationError("$", "expected a list of decisions or {\"decisions\": [...]}");
    std::vector<ReviewDecision> out;
    for (const auto& d: j)
        out.push_back(ReviewDecision::from_json(d));
    return out;
}

/// Walks requirements, features and stories asking for a decision on each.
inline std::vector<ReviewDecision> prompt_decisions(const ProjectState& state, std::istream& in, std::ostream& err)
{
    std::vector<ReviewDecision> out;
    auto items = Json::array();
    auto add = [&](const char* coll, const auto& list) {
        for (std::size_t i = 0; i < list.size(); ++i)
            items.push_back({{"target", std::string("$.") + coll + "[" + std::to_string(i) + "]"},
                             {"item", to_json(list[i])}});
    };
    add("requirements", state.requirements);
    add("features", state.features);
    add("stories", state.stories);

    for (const auto& entry: items)
    {
        auto target = entry["target"].get<std::string>();
        err << "\n" << target << "\n" << to_yaml(entry["item"]);
        for (;;)
        {
            err << "[a]ccept [r]eject [e]dit [s]kip [q]uit > " << std::flush;
            std::string line;
            if (!std::getline(in, line))
                return out;
            auto answer = trimmed(line);
            if (answer == "q")
                return out;
            if (answer == "s" || answer.empty())
                break;
            if (answer == "a" || answer == "r")
            {
                out.push_back({target, answer == "a" ? ReviewAction::accept : ReviewAction::reject, std::nullopt});
                break;
            }
            if (answer == "e")
            {
                err << "replacement as one line of JSON > " << std::flush;
                if (!std::getline(in, line))
                    return out;
                auto payload = Json::parse(line, nullptr, false);
                if (payload.is_discarded())
                {
                    err << "not valid JSON\n";
                    continue;
                }
                out.push_back({target, ReviewAction::edit, payload});
                break;
            }
        }
    }
    return out;
}

inline void report_error(std::ostream& err, const Error& e)
{
    err << "autoscrum: " << to_string(e.code()) << ": " << e.what() << "\n";
    auto detail = e.detail();
    if (detail.is_object())
    {
        detail.erase("request"); // full prompts are too long for a terminal
        if (!detail.empty())
            err << to_yaml(detail);
    }
}

} // namespace detail

struct CliEnvironment
{
    std::istream& in = std::cin;
    std::ostream& out = std::cout;
    std::ostream& err = std::cerr;
    bool interactive = false; // stdin is a terminal
    std::vector<Asset> assets;
};

inline int run_cli(int argc, const char* const* argv, CliEnvironment env)
{
    CLI::App app {"Generate agile backlogs and shortcut plans with a language model.", "autoscrum"};
    app.fallthrough();
    app.require_subcommand(1);

    std::string file;
    std::string backend_mode = "live";
    std::vector<std::string> fixtures;
    double temperature = 0.0;
    std::string model = tmpl::GenDefaults {}.model;
    std::string programs_flag;
    app.add_option("-f,--file", file, "Project file (JSON)")->required();
    app.add_option("--backend", backend_mode, "Completion backend")
        ->check(CLI::IsMember({"live", "replay", "record"}))
        ->capture_default_str();
    app.add_option("--fixtures", fixtures, "Fixture file(s) for replay, or the file to record into");
    app.add_option("--temperature", temperature, "Sampling temperature")
        ->check(CLI::Range(0.0, 2.0))
        ->capture_default_str();
    app.add_option("--model", model, "Model name")->capture_default_str();
    app.add_option("--programs", programs_flag, "Directory with the .hbs programs");

    int count = 3;
    std::vector<std::string> story_names;
    std::string decisions_path;
    std::string bind = "127.0.0.1:8080";

    struct Command
    {
        const char* name;
        const char* help;
        bool per_story;
    };
    static constexpr Command generation[] = {
        {"requirements", "Generate requirements from the current/desired state gap", false},
        {"features", "Generate product features from the requirements", false},
        {"stories", "Generate user stories", false},
        {"acceptance", "Generate acceptance criteria for stories without any", true},
        {"tasks", "Break stories with acceptance criteria into tasks", true},
        {"clarify", "Generate research questions and search concepts per story", true},
        {"plan", "Run the shortcut planner for -n steps", false},
    };
    for (const auto& c: generation)
    {
        auto* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("-n,--count", count, c.per_story ? "Maximum number of stories to process"
                                                         : std::string_view(c.name) == "plan"
                                                               ? "Maximum number of planner steps"
                                                               : "Number of items to generate")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        if (c.per_story)
            sub->add_option("--story", story_names, "Only these stories (by name); repeatable");
    }
    app.add_subcommand("review", "Accept, reject or edit backlog items")
        ->add_option("--decisions", decisions_path, "JSON file with decisions (otherwise prompts)");
    app.add_subcommand("validate", "Check the project file");
    app.add_subcommand("serve", "Serve the HTTP API and UI")
        ->add_option("--bind", bind, "host:port")
        ->capture_default_str();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e, env.out, env.err);
    }
    catch (const CLI::CallForAllHelp& e)
    {
        return app.exit(e, env.out, env.err);
    }
    catch (const CLI::CallForVersion& e)
    {
        return app.exit(e, env.out, env.err);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e, env.out, env.err);
        return exit_usage;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try
    {
        auto state = load_project(file);
        if (command == "validate")
        {
            env.out << to_yaml(Json {
                {"valid", true},
                {"product", state.product},
                {"requirements", state.requirements.size()},
                {"features", state.features.size()},
                {"stories", state.stories.size()},
                {"plan", state.plan.size()},
            });
            return exit_ok;
        }

        tmpl::GenDefaults defaults;
        defaults.model = model;
        defaults.temperature = temperature;
        auto programs = std::make_shared<const ProgramLibrary>(resolve_programs_dir(programs_flag));

        if (command == "review")
        {
            auto decisions = decisions_path.empty() ? detail::prompt_decisions(state, env.in, env.err)
                                                    : detail::read_decisions_file(decisions_path);
            auto next = apply_review(state, decisions);
            save_project(next, file);
            env.out << to_yaml(Json {
                {"decisions", decisions.size()},
                {"requirements", next.requirements.size()},
                {"features", next.features.size()},
                {"stories", next.stories.size()},
            });
            return exit_ok;
        }

        auto backend = make_backend(backend_mode, fixtures);
        if (command == "serve")
        {
            Service service(file, backend, programs, defaults, env.assets);
            serve(service, bind, [&](int port) { env.err << "autoscrum: listening on port " << port << "\n"; });
            return exit_ok;
        }

        StageContext ctx {*backend, *programs, defaults};
        StepHook hook;
        if (command == "plan" && env.interactive && count > 1)
            hook = detail::interactive_state_hook(env.in, env.err);
        auto outcome = run_command(state, command, count, story_names, ctx, hook);
        for (const auto& note: outcome.notes)
            env.err << "autoscrum: " << note << "\n";
        if (!outcome.failures.empty())
        {
            for (const auto& f: outcome.failures)
            {
                env.err << "autoscrum: story failed: " << f.story << "\n";
                detail::report_error(env.err, Error(f.code, f.message, f.detail));
            }
            env.err << "autoscrum: project file not modified\n";
            return exit_failure;
        }
        save_project(outcome.state, file);
        env.out << to_yaml(outcome.output);
        return exit_ok;
    }
    catch (const PlanRunError& e)
    {
        detail::report_error(env.err, e);
        env.err << "autoscrum: project file not modified\n";
        return exit_failure;
    }
    catch (const Error& e)
    {
        detail::report_error(env.err, e);
        return exit_failure;
    }
    catch (const std::exception& e)
    {
        env.err << "autoscrum: " << e.what() << "\n";
        return exit_failure;
    }
}

} // namespace autoscrum
