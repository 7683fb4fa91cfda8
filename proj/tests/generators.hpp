// SPDX-License-Identifier: Apache-2.0
#pragma once

// Hand-rolled random generators for backlog values.

#include <autoscrum/project.hpp>

#include <random>
#include <set>
#include <string>

namespace support
{

class Gen
{
  public:
    explicit Gen(std::uint32_t seed): rng(seed) {}

    std::mt19937 rng;

    int range(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
    bool coin() { return range(0, 1) == 1; }

    // Non-blank text drawn from a pool that includes JSON/YAML-awkward pieces.
    std::string text()
    {
        static const char* pieces[] = {"chicken", "coop", " ", "\"q\"", "\\", "\n", "é", "🐔", "-", ":", "#",
                                       "true",    "42",   "{", "}",     "[",  "\t", "a",  "Z",  "_"};
        std::string out = range(0, 1) ? "x" : "Y";
        int n = range(0, 6);
        for (int i = 0; i < n; ++i)
            out += pieces[range(0, static_cast<int>(std::size(pieces)) - 1)];
        return out;
    }

    // Text that is unique (ignoring ASCII case) within `used`.
    std::string unique_name(std::set<std::string>& used)
    {
        for (;;)
        {
            auto t = text() + std::to_string(range(0, 9999));
            if (used.insert(autoscrum::case_fold(t)).second)
                return t;
        }
    }

    autoscrum::Json state_map()
    {
        autoscrum::Json m = autoscrum::Json::object();
        int n = range(0, 4);
        for (int i = 0; i < n; ++i)
        {
            auto key = "k" + std::to_string(i) + text();
            switch (range(0, 3))
            {
                case 0: m[key] = range(-1000, 1000); break;
                case 1: m[key] = range(-1000, 1000) / 8.0; break;
                case 2: m[key] = text(); break;
                default: m[key] = coin(); break;
            }
        }
        return m;
    }

    autoscrum::Requirement requirement(std::string name)
    {
        return {std::move(name), text(), text(), text(), range(1, 5), text(), text()};
    }

    autoscrum::Feature feature(std::string name) { return {std::move(name), text(), text(), text()}; }

    autoscrum::UserStory story(std::string name)
    {
        autoscrum::UserStory s;
        s.name = std::move(name);
        s.feature = text();
        if (coin())
            s.epic = text();
        s.reasoning = text();
        for (int i = range(0, 3); i > 0; --i)
            s.acceptance.push_back(text());
        for (int i = range(0, 3); i > 0; --i)
        {
            autoscrum::TaskItem t {text(), {}};
            for (int k = range(0, 2); k > 0; --k)
                t.subtasks.push_back(text());
            s.tasks.push_back(std::move(t));
        }
        for (int i = range(0, 2); i > 0; --i)
            s.resources.push_back({text(), text()});
        return s;
    }

    autoscrum::ProjectState state()
    {
        autoscrum::ProjectState s;
        s.product = text();
        s.vision = text();
        s.niche = text();
        s.current_state = state_map();
        s.desired_state = state_map();
        s.sprint_duration = coin() ? text() : "";
        std::set<std::string> used;
        for (int i = range(0, 4); i > 0; --i)
            s.requirements.push_back(requirement(text()));
        used.clear();
        for (int i = range(0, 4); i > 0; --i)
            s.features.push_back(feature(unique_name(used)));
        used.clear();
        for (int i = range(0, 4); i > 0; --i)
            s.stories.push_back(story(unique_name(used)));
        for (int i = range(0, 2); i > 0; --i)
            s.avoid.push_back(text());
        for (int i = range(0, 3); i > 0; --i)
            s.plan.push_back({text(), text(), coin() ? autoscrum::PlanStatus::done : autoscrum::PlanStatus::progress});
        if (coin())
            s.extra["x_custom"] = autoscrum::Json {{"note", text()}, {"n", range(0, 9)}};
        return s;
    }
};

} // namespace support
