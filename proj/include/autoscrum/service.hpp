// SPDX-License-Identifier: Apache-2.0
#pragma once

// Local HTTP/JSON API over one project file.
//
//   GET  /api/project                 whole project
//   PUT  /api/project                 replace (validated)
//   POST /api/generate/<batch stage>  {count}
//   POST /api/generate/<story stage>  {story_names, limit?}
//   POST /api/review                  {decisions}
//   POST /api/plan/step               {current_state?}
//   GET  /api/plan
//   GET  /healthz
//   GET  /...                         embedded UI assets
//
// Errors are {code, message, detail} with status 400/404/409/500/502.

#include <autoscrum/planner.hpp>
#include <autoscrum/review.hpp>

#include <httplib.h>

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace autoscrum
{

struct Asset
{
    std::string_view path; // "/index.html"
    std::string_view content_type;
    std::string_view body;
};

inline int http_status(ErrorCode code) noexcept
{
    switch (code)
    {
        case ErrorCode::validation_error:
        case ErrorCode::parse_error:
        case ErrorCode::precondition_failed:
            return 400;
        case ErrorCode::path_error:
        case ErrorCode::not_found:
            return 404;
        case ErrorCode::conflict:
            return 409;
        case ErrorCode::backend_error:
        case ErrorCode::json_extract_error:
            return 502;
        default:
            return 500;
    }
}

inline nlohmann::json api_error(ErrorCode code, std::string_view message, const nlohmann::json& detail = nullptr)
{
    nlohmann::json j {{"code", to_string(code)}, {"message", message}};
    if (!detail.is_null() && !(detail.is_object() && detail.empty()))
        j["detail"] = detail;
    return j;
}

inline nlohmann::json story_batch_json(const StoryBatchResult& r)
{
    auto failures = nlohmann::json::array();
    for (const auto& f: r.failures)
    {
        auto e = api_error(f.code, f.message, f.detail);
        e["story"] = f.story;
        failures.push_back(std::move(e));
    }
    return {{"updated", r.updated}, {"skipped", r.skipped}, {"failures", failures}};
}

class Service
{
  public:
    Service(std::filesystem::path project_path, std::shared_ptr<Backend> backend,
            std::shared_ptr<const ProgramLibrary> programs, tmpl::GenDefaults defaults = {},
            std::vector<Asset> assets = {}):
        _path(std::move(project_path)),
        _backend(std::move(backend)),
        _programs(std::move(programs)),
        _defaults(std::move(defaults)),
        _assets(std::move(assets)),
        _state(std::make_shared<const ProjectState>(load_project(_path)))
    {
    }

    [[nodiscard]] std::shared_ptr<const ProjectState> snapshot() const
    {
        std::lock_guard lock(_snapshot_mutex);
        return _state;
    }

    void mount(httplib::Server& server)
    {
        server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"status":"ok"})", "application/json");
        });
        server.Get("/api/project", [this](const httplib::Request&, httplib::Response& res) {
            reply(res, 200, project_to_json(*snapshot()));
        });
        server.Put("/api/project", [this](const httplib::Request& req, httplib::Response& res) {
            mutate(req, res, [](const ProjectState&, const Json& body, ProjectState& next) {
                next = project_from_json(body);
                return Json(project_to_json(next));
            });
        });
        server.Get("/api/plan", [this](const httplib::Request&, httplib::Response& res) {
            auto s = snapshot();
            bool done = !s->plan.empty() && s->plan.back().status == PlanStatus::done;
            reply(res, 200, Json {{"plan", to_json_list(s->plan)}, {"done", done}});
        });
        server.Post(R"(/api/generate/(requirements|features|stories))",
                    [this](const httplib::Request& req, httplib::Response& res) { generate_batch(req, res); });
        server.Post(R"(/api/generate/(acceptance|tasks|resources))",
                    [this](const httplib::Request& req, httplib::Response& res) { generate_per_story(req, res); });
        server.Post("/api/review", [this](const httplib::Request& req, httplib::Response& res) {
            mutate(req, res, [](const ProjectState& cur, const Json& body, ProjectState& next) {
                if (!body.contains("decisions") || !body["decisions"].is_array())
                    throw ValidationError("$.decisions", "expected a list of decisions");
                std::vector<ReviewDecision> decisions;
                for (const auto& d: body["decisions"])
                    decisions.push_back(ReviewDecision::from_json(d));
                next = apply_review(cur, decisions);
                return Json(project_to_json(next));
            });
        });
        server.Post("/api/plan/step", [this](const httplib::Request& req, httplib::Response& res) {
            mutate(req, res, [this](const ProjectState& cur, const Json& body, ProjectState& next) {
                next = cur;
                if (body.contains("current_state") && !body["current_state"].is_null())
                {
                    auto probe = project_to_json(cur);
                    probe["current_state"] = body["current_state"];
                    next = project_from_json(probe);
                }
                StageContext ctx {*_backend, *_programs, _defaults};
                auto step = next_step(next, ctx);
                next.plan.push_back(step);
                return Json {{"step", to_json(step)}, {"index", next.plan.size() - 1}};
            });
        });
        server.Get(R"(/(.*))", [this](const httplib::Request& req, httplib::Response& res) { serve_asset(req, res); });
    }

  private:
    static void reply(httplib::Response& res, int status, const Json& body)
    {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static void reply_error(httplib::Response& res, const Error& e)
    {
        res.status = http_status(e.code());
        res.set_content(api_error(e.code(), e.what(), e.detail()).dump(), "application/json");
    }

    static Json parse_body(const httplib::Request& req)
    {
        if (req.body.empty())
            return Json::object();
        auto j = Json::parse(req.body, nullptr, false);
        if (j.is_discarded())
            throw ParseError("request body is not valid JSON");
        if (!j.is_object())
            throw ValidationError("$", "request body must be a JSON object");
        return j;
    }

    // One mutation at a time; a second concurrent one gets 409. The new state is
    // persisted before it becomes visible to readers.
    template <class Fn>
    void mutate(const httplib::Request& req, httplib::Response& res, Fn fn)
    {
        std::unique_lock lock(_write_mutex, std::try_to_lock);
        if (!lock.owns_lock())
        {
            reply(res, 409, api_error(ErrorCode::conflict, "another mutation is in progress"));
            return;
        }
        try
        {
            auto current = snapshot();
            auto body = parse_body(req);
            ProjectState next;
            Json out = fn(*current, body, next);
            commit(std::move(next));
            reply(res, 200, out);
        }
        catch (const Error& e)
        {
            reply_error(res, e);
        }
        catch (const std::exception& e)
        {
            reply(res, 500, api_error(ErrorCode::internal, e.what()));
        }
    }

    void commit(ProjectState next)
    {
        save_project(next, _path);
        auto shared = std::make_shared<const ProjectState>(std::move(next));
        std::lock_guard lock(_snapshot_mutex);
        _state = std::move(shared);
    }

    void generate_batch(const httplib::Request& req, httplib::Response& res)
    {
        auto stage = req.matches[1].str();
        mutate(req, res, [&](const ProjectState& cur, const Json& body, ProjectState& next) {
            int count = 3;
            if (body.contains("count"))
            {
                if (!body["count"].is_number_integer() || body["count"].get<int>() < 0)
                    throw ValidationError("$.count", "expected a non-negative integer");
                count = body["count"].get<int>();
            }
            StageContext ctx {*_backend, *_programs, _defaults};
            auto pack = [&](auto result) {
                next = std::move(result.state);
                return Json {{"added", to_json_list(result.added)}, {"rejected", to_json_list(result.rejected)}};
            };
            if (stage == "requirements")
                return pack(gen_requirements(cur, count, ctx));
            if (stage == "features")
                return pack(gen_features(cur, count, ctx));
            return pack(gen_stories(cur, count, ctx));
        });
    }

    void generate_per_story(const httplib::Request& req, httplib::Response& res)
    {
        auto stage = req.matches[1].str();
        mutate(req, res, [&](const ProjectState& cur, const Json& body, ProjectState& next) {
            StorySelector selector;
            if (body.contains("story_names"))
            {
                if (!body["story_names"].is_array())
                    throw ValidationError("$.story_names", "expected a list of story names");
                for (const auto& n: body["story_names"])
                {
                    if (!n.is_string())
                        throw ValidationError("$.story_names", "expected a list of story names");
                    selector.names.push_back(n.get<std::string>());
                }
            }
            if (body.contains("limit"))
            {
                if (!body["limit"].is_number_integer() || body["limit"].get<int>() < 0)
                    throw ValidationError("$.limit", "expected a non-negative integer");
                selector.limit = body["limit"].get<std::size_t>();
            }
            StageContext ctx {*_backend, *_programs, _defaults};
            StoryBatchResult result = stage == "acceptance" ? gen_acceptance(cur, selector, ctx)
                                      : stage == "tasks"    ? gen_tasks(cur, selector, ctx)
                                                            : gen_resources(cur, selector, ctx);
            if (result.updated.empty() && !result.failures.empty())
            {
                const auto& first = result.failures.front();
                throw Error(first.code, "every selected story failed; first: " + first.message,
                            story_batch_json(result));
            }
            next = std::move(result.state);
            return story_batch_json(result);
        });
    }

    void serve_asset(const httplib::Request& req, httplib::Response& res) const
    {
        std::string path = req.path == "/" ? "/index.html" : req.path;
        for (const auto& a: _assets)
            if (a.path == path)
            {
                res.set_content(std::string(a.body), std::string(a.content_type));
                return;
            }
        if (path == "/index.html")
        {
            res.set_content("<!doctype html><title>autoscrum</title><p>No UI bundled. See <a "
                            "href=\"/api/project\">/api/project</a>.</p>\n",
                            "text/html");
            return;
        }
        reply(res, 404, api_error(ErrorCode::not_found, "no such resource: " + req.path));
    }

    std::filesystem::path _path;
    std::shared_ptr<Backend> _backend;
    std::shared_ptr<const ProgramLibrary> _programs;
    tmpl::GenDefaults _defaults;
    std::vector<Asset> _assets;

    mutable std::mutex _snapshot_mutex;
    std::shared_ptr<const ProjectState> _state;
    std::mutex _write_mutex;
};

/// Binds and serves until the server is stopped. `bind` is "host:port".
inline void serve(Service& service, const std::string& bind, const std::function<void(int port)>& on_ready = {})
{
    auto colon = bind.rfind(':');
    if (colon == std::string::npos)
        throw ValidationError("--bind", "expected host:port");
    auto host = bind.substr(0, colon);
    int port = 0;
    try
    {
        port = std::stoi(bind.substr(colon + 1));
    }
    catch (const std::exception&)
    {
        throw ValidationError("--bind", "port is not a number");
    }
    httplib::Server server;
    service.mount(server);
    if (port == 0)
        port = server.bind_to_any_port(host);
    else if (!server.bind_to_port(host, port))
        port = -1;
    if (port < 0)
        throw IoError(bind, "cannot bind");
    if (on_ready)
        on_ready(port);
    server.listen_after_bind();
}

} // namespace autoscrum
