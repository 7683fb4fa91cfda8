// SPDX-License-Identifier: Apache-2.0
#pragma once

// A scripted CLI session: the project to start from and, per command, the
// completions the model returns. Used to (re)generate replay fixtures and
// by the tests that replay them.

#include <autoscrum/cli.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace autoscrum::fixtures
{

struct SessionCommand
{
    std::string command;
    int n = 3;
    std::vector<std::string> completions;
    std::vector<Json> current_state_after; // plan only; null = unchanged
};

struct Session
{
    std::filesystem::path project; // relative to the repository root
    std::vector<SessionCommand> commands;
};

/// Strings are taken verbatim; anything else is sent as pretty-printed JSON.
inline std::string completion_text(const Json& j)
{
    return j.is_string() ? j.get<std::string>() : j.dump(2);
}

inline Session load_session(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(path.string(), "file not found");
    auto j = Json::parse(in);
    Session s;
    s.project = j.at("project").get<std::string>();
    for (const auto& c: j.at("session"))
    {
        SessionCommand cmd;
        cmd.command = c.at("command").get<std::string>();
        cmd.n = c.value("n", 3);
        for (const auto& comp: c.at("completions"))
            cmd.completions.push_back(completion_text(comp));
        if (c.contains("current_state_after"))
            for (const auto& u: c["current_state_after"])
                cmd.current_state_after.push_back(u);
        s.commands.push_back(std::move(cmd));
    }
    return s;
}

/// Applies `current_state_after[k]` after the k-th plan step of this run.
inline StepHook state_updates(const std::vector<Json>& updates)
{
    auto step = std::make_shared<std::size_t>(0);
    return [updates, step](const PlanStep&, const ProjectState& state) {
        ProjectState next = state;
        auto k = (*step)++;
        if (k < updates.size() && !updates[k].is_null())
            next.current_state = updates[k];
        return next;
    };
}

} // namespace autoscrum::fixtures
