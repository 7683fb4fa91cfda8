// SPDX-License-Identifier: Apache-2.0
// Records a scripted session into a replay fixture file by running every
// command through the same stage code the CLI uses.
//
//   make_fixtures --root . fixtures/sources/happy-farm.json fixtures/happy-farm.jsonl \
//       --golden tests/golden/happy-farm.golden.json

#include "fixture_session.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    using namespace autoscrum;
    CLI::App app {"Record replay fixtures from a scripted session", "make_fixtures"};
    std::string source, output, golden, root = ".", programs_dir;
    app.add_option("source", source, "Session description (JSON)")->required();
    app.add_option("output", output, "Fixture file to write (JSONL, overwritten)")->required();
    app.add_option("--golden", golden, "Also write the final project file here");
    app.add_option("--root", root, "Repository root");
    app.add_option("--programs", programs_dir, "Program directory (default <root>/programs)");
    CLI11_PARSE(app, argc, argv);

    try
    {
        auto session = fixtures::load_session(source);
        auto state = load_project(std::filesystem::path(root) / session.project);
        ProgramLibrary programs(programs_dir.empty() ? std::filesystem::path(root) / "programs" : std::filesystem::path(programs_dir));
        std::filesystem::remove(output);

        for (const auto& cmd: session.commands)
        {
            auto scripted = std::make_shared<ScriptedBackend>();
            for (const auto& c: cmd.completions)
                scripted->push(c);
            auto recorder = record(scripted, output);
            StageContext ctx {*recorder, programs, {}};
            auto outcome = run_command(state, cmd.command, cmd.n, {}, ctx, fixtures::state_updates(cmd.current_state_after));
            if (!outcome.failures.empty())
                throw Error(outcome.failures.front().code, outcome.failures.front().message, outcome.failures.front().detail);
            if (scripted->remaining() != 0)
                throw Error(ErrorCode::internal, cmd.command + ": " + std::to_string(scripted->remaining())
                                                     + " scripted completions were not used");
            state = std::move(outcome.state);
            std::cerr << cmd.command << ": " << scripted->calls() << " exchanges\n";
        }
        if (!golden.empty())
            save_project(state, golden);
    }
    catch (const Error& e)
    {
        std::cerr << "make_fixtures: " << e.what() << "\n" << e.detail().dump(2) << "\n";
        return 2;
    }
    return 0;
}
