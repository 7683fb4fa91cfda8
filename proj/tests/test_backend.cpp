// SPDX-License-Identifier: Apache-2.0
#include "fake_openai.hpp"
#include "support.hpp"

#include <autoscrum/openai.hpp>

#include <random>

using namespace autoscrum;
using support::FakeOpenAi;

namespace
{

ChatExchange hello(std::string text = "hi")
{
    ChatExchange ex;
    ex.messages.push_back({Role::user, std::move(text)});
    return ex;
}

LiveConfig fast_config(const std::string& url, int retries = 2)
{
    LiveConfig cfg;
    cfg.base_url = url;
    cfg.api_key = "sk-test";
    cfg.retries = retries;
    cfg.initial_backoff = std::chrono::milliseconds(1);
    cfg.connect_timeout = std::chrono::seconds(2);
    cfg.read_timeout = std::chrono::seconds(5);
    return cfg;
}

std::size_t count_lines(const std::filesystem::path& p)
{
    auto text = support::read_file(p);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

} // namespace

TEST(Scripted, PopsInOrderThenExhausts)
{
    ScriptedBackend backend({"ok", "again"});
    EXPECT_EQ(complete(backend, hello()), "ok");
    EXPECT_EQ(complete(backend, hello("second")), "again");
    try
    {
        complete(backend, hello("third"));
        FAIL() << "expected script exhaustion";
    }
    catch (const BackendError& e)
    {
        EXPECT_EQ(e.kind(), BackendErrorKind::script_exhausted);
        EXPECT_EQ(e.code(), ErrorCode::backend_error);
        EXPECT_EQ(e.detail()["request"]["messages"][0]["content"], "third");
    }
    ASSERT_EQ(backend.seen().size(), 3u);
    EXPECT_EQ(backend.seen()[0].completion, "ok");
}

TEST(Exchange, ValidateRejectsBadParamsBeforeTheBackendSeesThem)
{
    ScriptedBackend backend({"x"});
    auto ex = hello();
    ex.params.temperature = 2.5;
    EXPECT_THROW(complete(backend, ex), Error);
    ex.params.temperature = 2.0;
    ex.params.max_tokens = 0;
    EXPECT_THROW(complete(backend, ex), Error);
    EXPECT_THROW(complete(backend, ChatExchange {}), Error);
    EXPECT_EQ(backend.calls(), 0u);
}

TEST(Exchange, RequestJsonRoundTrips)
{
    auto ex = hello();
    ex.messages.push_back({Role::assistant, "prior"});
    ex.params.stop = "\n\n";
    ex.params.temperature = 1.2;
    auto back = ChatExchange::from_request_json(ex.request_json());
    EXPECT_EQ(back, ex);
    EXPECT_FALSE(hello().request_json()["params"].contains("stop"));
}

TEST(Digest, MatchesKnownVectors)
{
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    // printf '%s' '<canonical request>' | sha256sum
    EXPECT_EQ(request_digest(hello()), "5e3f70bc87736324fd82fed4e23a7eea80b1351be7814368cf8c393887b75c99");
}

TEST(Digest, IndependentOfKeyOrder)
{
    std::mt19937 rng(7);
    for (int round = 0; round < 200; ++round)
    {
        std::vector<std::pair<std::string, int>> fields;
        int n = 1 + static_cast<int>(rng() % 6);
        for (int i = 0; i < n; ++i)
            fields.emplace_back("k" + std::to_string(rng() % 1000) + "_" + std::to_string(i), static_cast<int>(rng() % 50));
        auto build = [&] {
            Json params;
            for (const auto& [k, v]: fields)
                params[k] = v;
            Json outer;
            if (rng() % 2)
            {
                outer["params"] = params;
                outer["messages"] = Json::array({{{"role", "user"}, {"content", "x"}}});
            }
            else
            {
                outer["messages"] = Json::array({{{"content", "x"}, {"role", "user"}}});
                outer["params"] = params;
            }
            return outer.dump();
        };
        auto a = build();
        std::shuffle(fields.begin(), fields.end(), rng);
        auto b = build();
        EXPECT_EQ(request_digest(nlohmann::json::parse(a)), request_digest(nlohmann::json::parse(b))) << a << "\n" << b;
    }
}

TEST(Replay, ServesRecordedHappyFarmCompletion)
{
    auto store = FixtureStore::from_files({support::fixture("happy-farm")});
    ASSERT_EQ(store.entries().size(), 14u);
    const auto& first = store.entries().front();
    ReplayBackend backend(store);
    auto out = complete(backend, ChatExchange::from_request_json(first.request));
    EXPECT_NE(out.find("Increase chicken coop size"), std::string::npos);
    EXPECT_EQ(first.digest, request_digest(first.request));
}

TEST(Replay, DuplicatesAreConsumedInOrder)
{
    FixtureStore store;
    store.add(hello().request_json(), "a");
    store.add(hello().request_json(), "b");
    ReplayBackend backend(store);
    EXPECT_EQ(complete(backend, hello()), "a");
    EXPECT_EQ(complete(backend, hello()), "b");
    try
    {
        complete(backend, hello());
        FAIL();
    }
    catch (const BackendError& e)
    {
        EXPECT_EQ(e.kind(), BackendErrorKind::fixture_miss);
        EXPECT_NE(std::string(e.what()).find("consumed"), std::string::npos);
    }
}

TEST(Replay, MissReportsDigestAndNearestKey)
{
    FixtureStore store;
    store.add(hello("the quick brown fox").request_json(), "a");
    store.add(hello("zzz").request_json(), "b");
    ReplayBackend backend(store);
    auto probe = hello("the quick brown cat");
    try
    {
        complete(backend, probe);
        FAIL();
    }
    catch (const BackendError& e)
    {
        EXPECT_EQ(e.kind(), BackendErrorKind::fixture_miss);
        EXPECT_EQ(e.detail()["digest"], request_digest(probe));
        EXPECT_EQ(e.detail()["nearest_digest"], request_digest(hello("the quick brown fox")));
        auto canonical = nlohmann::json(probe.request_json()).dump();
        auto at = e.detail()["diverges_at"].get<std::size_t>();
        EXPECT_EQ(canonical.substr(at, 3), "cat");
        EXPECT_EQ(e.detail()["kind"], "fixture-miss");
    }
}

TEST(Replay, MalformedLineNamesTheLine)
{
    support::TempDir dir;
    auto path = dir / "bad.jsonl";
    support::write_file(path, R"({"request":{"messages":[],"params":{}},"completion":"x"})"
                              "\n\nnot json\n");
    try
    {
        FixtureStore::from_files({path});
        FAIL();
    }
    catch (const ParseError& e)
    {
        EXPECT_NE(std::string(e.what()).find("bad.jsonl:3"), std::string::npos) << e.what();
    }
    EXPECT_THROW(FixtureStore::from_files({dir / "absent.jsonl"}), IoError);
}

TEST(Record, RecordThenReplayReproduces)
{
    support::TempDir dir;
    auto path = dir / "sub" / "rec.jsonl";
    auto inner = std::make_shared<ScriptedBackend>(std::vector<std::string> {"a", "b"});
    auto rec = record(inner, path);
    EXPECT_EQ(complete(*rec, hello("one")), "a");
    EXPECT_EQ(complete(*rec, hello("two")), "b");
    EXPECT_EQ(count_lines(path), 2u);

    ReplayBackend replay(FixtureStore::from_files({path}));
    EXPECT_EQ(complete(replay, hello("one")), "a");
    EXPECT_EQ(complete(replay, hello("two")), "b");

    std::istringstream lines(support::read_file(path));
    std::string line;
    while (std::getline(lines, line))
    {
        auto j = nlohmann::json::parse(line);
        EXPECT_EQ(j["digest"], sha256_hex(j["request"].dump()));
    }
}

TEST(Record, AppendsAcrossSessionsAndSkipsFailures)
{
    support::TempDir dir;
    auto path = dir / "rec.jsonl";
    {
        auto rec = record(std::make_shared<ScriptedBackend>(std::vector<std::string> {"a"}), path);
        complete(*rec, hello("one"));
        EXPECT_THROW(complete(*rec, hello("nothing left")), BackendError);
    }
    EXPECT_EQ(count_lines(path), 1u);
    {
        auto rec = record(std::make_shared<ScriptedBackend>(std::vector<std::string> {"b"}), path);
        complete(*rec, hello("two"));
    }
    EXPECT_EQ(count_lines(path), 2u);
    ReplayBackend replay(FixtureStore::from_files({path}));
    EXPECT_EQ(complete(replay, hello("one")), "a");
    EXPECT_EQ(complete(replay, hello("two")), "b");
}

TEST(Live, SendsOpenAiWireFormat)
{
    FakeOpenAi server([](const nlohmann::json&, int) { return FakeOpenAi::ok("pong"); });
    LiveBackend backend(fast_config(server.base_url()));
    auto ex = hello("ping");
    ex.messages.insert(ex.messages.begin(), {Role::system, "be brief"});
    ex.params.temperature = 1.2;
    ex.params.max_tokens = 77;
    ex.params.stop = "\n";
    EXPECT_EQ(complete(backend, ex), "pong");

    auto bodies = server.bodies();
    ASSERT_EQ(bodies.size(), 1u);
    const auto& b = bodies[0];
    EXPECT_EQ(b["model"], "gpt-3.5-turbo");
    EXPECT_DOUBLE_EQ(b["temperature"].get<double>(), 1.2);
    EXPECT_EQ(b["max_tokens"], 77);
    EXPECT_EQ(b["stop"], "\n");
    ASSERT_EQ(b["messages"].size(), 2u);
    EXPECT_EQ(b["messages"][0]["role"], "system");
    EXPECT_EQ(b["messages"][1]["content"], "ping");
    EXPECT_EQ(server.auth_headers()[0], "Bearer sk-test");
}

TEST(Live, OmitsAuthAndStopWhenUnset)
{
    FakeOpenAi server([](const nlohmann::json&, int) { return FakeOpenAi::ok("x"); });
    auto cfg = fast_config(server.base_url());
    cfg.api_key.clear();
    LiveBackend backend(cfg);
    complete(backend, hello());
    EXPECT_EQ(server.auth_headers()[0], "");
    EXPECT_FALSE(server.bodies()[0].contains("stop"));
}

TEST(Live, RetriesTransientStatusesUpToTheLimit)
{
    for (int retries: {0, 1, 3})
    {
        FakeOpenAi server([](const nlohmann::json&, int) { return FakeOpenAi::Reply {500, "{}"}; });
        LiveBackend backend(fast_config(server.base_url(), retries));
        try
        {
            complete(backend, hello());
            FAIL();
        }
        catch (const BackendError& e)
        {
            EXPECT_EQ(e.kind(), BackendErrorKind::http_status);
            EXPECT_EQ(e.detail()["status"], 500);
            EXPECT_EQ(e.detail()["attempts"], retries + 1);
        }
        EXPECT_EQ(server.bodies().size(), static_cast<std::size_t>(retries + 1));
    }
}

TEST(Live, RecoversAfterRateLimit)
{
    FakeOpenAi server([](const nlohmann::json&, int call) {
        return call < 2 ? FakeOpenAi::Reply {429, R"({"error":"slow down"})"} : FakeOpenAi::ok("finally");
    });
    LiveBackend backend(fast_config(server.base_url(), 3));
    EXPECT_EQ(complete(backend, hello()), "finally");
    EXPECT_EQ(server.bodies().size(), 3u);
}

TEST(Live, ClientErrorsAreNotRetried)
{
    FakeOpenAi server([](const nlohmann::json&, int) { return FakeOpenAi::Reply {400, R"({"error":"bad"})"}; });
    LiveBackend backend(fast_config(server.base_url(), 3));
    try
    {
        complete(backend, hello());
        FAIL();
    }
    catch (const BackendError& e)
    {
        EXPECT_EQ(e.detail()["status"], 400);
        EXPECT_EQ(e.detail()["body"], R"({"error":"bad"})");
    }
    EXPECT_EQ(server.bodies().size(), 1u);
}

TEST(Live, MalformedResponseIsABackendError)
{
    FakeOpenAi server([](const nlohmann::json&, int call) {
        return call == 0 ? FakeOpenAi::Reply {200, R"({"choices":[]})"}
                         : FakeOpenAi::Reply {200, R"({"choices":[{"message":{"role":"assistant"}}]})"};
    });
    LiveBackend backend(fast_config(server.base_url()));
    EXPECT_THROW(complete(backend, hello()), BackendError);
    EXPECT_THROW(complete(backend, hello()), BackendError);
}

TEST(Live, UnreachableEndpointIsATransportError)
{
    // Grab a free port, then close it so nothing listens there.
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr {};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ASSERT_EQ(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    ::close(fd);
    int port = ntohs(addr.sin_port);
    LiveBackend backend(fast_config("http://127.0.0.1:" + std::to_string(port) + "/v1", 1));
    try
    {
        complete(backend, hello());
        FAIL();
    }
    catch (const BackendError& e)
    {
        EXPECT_EQ(e.kind(), BackendErrorKind::transport);
        EXPECT_EQ(e.detail()["attempts"], 2);
    }
}

TEST(Live, ConfigFromEnvironment)
{
    ::setenv("AUTOSCRUM_BASE_URL", "http://example.invalid/v9", 1);
    ::setenv("AUTOSCRUM_API_KEY", "k", 1);
    auto cfg = LiveConfig::from_env();
    EXPECT_EQ(cfg.base_url, "http://example.invalid/v9");
    EXPECT_EQ(cfg.api_key, "k");
    ::unsetenv("AUTOSCRUM_BASE_URL");
    ::unsetenv("AUTOSCRUM_API_KEY");
    EXPECT_EQ(LiveConfig::from_env().base_url, "https://api.openai.com/v1");
}
