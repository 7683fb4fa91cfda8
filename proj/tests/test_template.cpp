// SPDX-License-Identifier: Apache-2.0
#include "template_oracle.hpp"

using namespace autoscrum;
using namespace autoscrum::tmpl;
using namespace oracle;

// ---- parse -------------------------------------------------------------------

TEST(Parse, EmptySourceHasNoNodes)
{
    auto p = parse("");
    EXPECT_TRUE(p.nodes.empty());
    EXPECT_EQ(serialize(p), "");
}

TEST(Parse, HandDerivedAst)
{
    auto p = parse("Product: {{product}}\n{{#each requirements}}- {{this}}\n{{/each}}");
    ASSERT_EQ(p.nodes.size(), 4u);
    EXPECT_EQ(p.nodes[0].as<Text>().raw, "Product: ");
    EXPECT_EQ(p.nodes[1].as<Interp>().path, "product");
    EXPECT_EQ(p.nodes[2].as<Text>().raw, "\n");
    const auto& each = p.nodes[3].as<EachBlock>();
    EXPECT_EQ(each.path, "requirements");
    ASSERT_EQ(each.body.size(), 3u);
    EXPECT_EQ(each.body[0].as<Text>().raw, "- ");
    EXPECT_EQ(each.body[1].as<Interp>().path, "this");
    EXPECT_EQ(each.body[2].as<Text>().raw, "\n");
}

TEST(Parse, GenKwargs)
{
    auto p = parse("{{gen 'answer' temperature=0.7 max_tokens=64 stop='\\n'}}");
    ASSERT_EQ(p.nodes.size(), 1u);
    const auto& g = p.nodes[0].as<Gen>();
    EXPECT_EQ(g.name, "answer");
    EXPECT_DOUBLE_EQ(*g.kwargs.temperature, 0.7);
    EXPECT_EQ(*g.kwargs.max_tokens, 64);
    EXPECT_TRUE(g.kwargs.stop.has_value());
}

TEST(Parse, RoleBlocks)
{
    auto p = parse("{{#system}}s{{/system}}{{#assistant}}{{gen 'x'}}{{/assistant}}");
    ASSERT_EQ(p.nodes.size(), 2u);
    EXPECT_EQ(p.nodes[0].as<RoleBlock>().role, Role::system);
    EXPECT_EQ(p.nodes[1].as<RoleBlock>().role, Role::assistant);
    EXPECT_EQ(count_gen_nodes(p.nodes), 1u);
}

TEST(Parse, EscapedBracesAreText)
{
    auto p = parse("a \\{{b}} c");
    ASSERT_EQ(p.nodes.size(), 1u);
    EXPECT_EQ(p.nodes[0].as<Text>().literal(), "a {{b}} c");
}

TEST(Parse, LosslessOnProgramFixtures)
{
    auto files = program_fixtures();
    ASSERT_GE(files.size(), 10u);
    for (const auto& f: files)
    {
        SCOPED_TRACE(f.string());
        auto src = support::read_file(f);
        auto p = parse(src);
        EXPECT_EQ(serialize(p), src);
        EXPECT_FALSE(p.nodes.empty());
    }
}

TEST(Parse, ShippedProgramsEachHaveTheirGen)
{
    for (const auto& spec: stage_specs)
    {
        auto program = support::programs().get(std::string(spec.program));
        EXPECT_EQ(count_gen_nodes(program->nodes), 1u) << spec.program;
    }
    EXPECT_EQ(count_gen_nodes(support::programs().get("planner")->nodes), 1u);
}

TEST(Parse, LosslessOnRandomTemplates)
{
    TemplateGen gen {std::mt19937(7)};
    for (int i = 0; i < 300; ++i)
    {
        auto src = gen.program();
        SCOPED_TRACE(src);
        EXPECT_EQ(serialize(parse(src)), src);
    }
}

TEST(Parse, MalformedCorpusReportsPositions)
{
    auto corpus = support::read_json(support::source_dir() / "tests/data/malformed_templates.json");
    ASSERT_GE(corpus.size(), 8u);
    for (const auto& c: corpus)
    {
        SCOPED_TRACE(c["name"].get<std::string>());
        try
        {
            (void) parse(c["source"].get<std::string>());
            ADD_FAILURE() << "expected a syntax error";
        }
        catch (const SyntaxError& e)
        {
            EXPECT_EQ(e.line(), c["line"].get<std::size_t>());
            EXPECT_EQ(e.column(), c["column"].get<std::size_t>());
            EXPECT_NE(e.reason().find(c["message"].get<std::string>()), std::string::npos) << e.reason();
        }
    }
}

// ---- render ------------------------------------------------------------------

TEST(Render, NoGenNoBackendCall)
{
    ScriptedBackend backend;
    Environment env(Json {{"name", "farm"}});
    auto r = render(parse("Hello {{name}}"), env, backend);
    EXPECT_EQ(backend.calls(), 0u);
    EXPECT_TRUE(r.bindings.empty());
    ASSERT_EQ(r.segments.size(), 1u);
    EXPECT_EQ(r.segments[0].role, Role::user);
    EXPECT_EQ(r.segments[0].content, "Hello farm");
}

TEST(Render, SingleGenBindsCompletion)
{
    ScriptedBackend backend;
    backend.push("42");
    Environment env;
    auto r = render(parse("Q?{{gen 'answer'}} then {{answer}}"), env, backend);
    ASSERT_EQ(r.bindings.size(), 1u);
    EXPECT_EQ(r.bindings[0].first, "answer");
    EXPECT_EQ(r.bindings[0].second, "42");
    EXPECT_EQ(r.transcript.size(), 1u);
    EXPECT_EQ(env.lookup("answer"), "42");
    EXPECT_EQ(r.text(), "Q?42 then 42");
}

TEST(Render, GenSendsRoleSegmentsAndKwargs)
{
    ScriptedBackend backend;
    backend.push("red, green, blue");
    backend.push("green");
    Environment env;
    GenDefaults defaults;
    defaults.temperature = 0.3;
    auto program = parse(support::read_file(support::source_dir() / "tests/data/templates/gen_kwargs.hbs"));
    auto r = render(program, env, backend, defaults);
    ASSERT_EQ(r.transcript.size(), 2u);

    const auto& first = r.transcript[0];
    ASSERT_EQ(first.messages.size(), 3u); // system, "\n" between blocks, user
    EXPECT_EQ(first.messages[0].role, Role::system);
    EXPECT_EQ(first.messages[0].content, "You answer tersely.");
    EXPECT_EQ(first.messages[2].content, "Name three colours.\n"); // top-level text joins the open user segment
    EXPECT_DOUBLE_EQ(first.params.temperature, 0.7);
    EXPECT_EQ(first.params.max_tokens, 64);
    EXPECT_EQ(first.params.stop, std::optional<std::string>("\n\n"));

    const auto& second = r.transcript[1];
    EXPECT_DOUBLE_EQ(second.params.temperature, 0.3); // falls back to defaults
    EXPECT_EQ(second.params.max_tokens, 1024);
    bool saw_assistant = false;
    for (const auto& m: second.messages)
        saw_assistant = saw_assistant || (m.role == Role::assistant && m.content == "red, green, blue");
    EXPECT_TRUE(saw_assistant);
    EXPECT_NE(second.messages.back().content.find("Now pick one of red, green, blue."), std::string::npos);
}

TEST(Render, BindingCountLawWithLoops)
{
    auto program = parse(support::read_file(support::source_dir() / "tests/data/templates/multi_gen_loop.hbs"));
    for (std::size_t n: {0u, 1u, 4u})
    {
        FunctionBackend backend([](const ChatExchange&, std::size_t i) { return "a" + std::to_string(i); });
        auto questions = Json::array();
        for (std::size_t i = 0; i < n; ++i)
            questions.push_back("q" + std::to_string(i));
        Environment env(Json {{"questions", questions}});
        auto r = render(program, env, backend);
        EXPECT_EQ(r.bindings.size(), n + 1);
        EXPECT_EQ(r.transcript.size(), n + 1);
        EXPECT_EQ(*r.binding("summary"), "a" + std::to_string(n));
    }
}

TEST(Render, Deterministic)
{
    auto program = parse(support::read_file(support::source_dir() / "tests/data/templates/multi_gen_loop.hbs"));
    auto once = [&] {
        ScriptedBackend backend;
        for (const auto* c: {"x", "y", "z"})
            backend.push(c);
        Environment env(Json {{"questions", {"a", "b"}}});
        return render(program, env, backend);
    };
    auto a = once(), b = once();
    EXPECT_EQ(a.bindings, b.bindings);
    ASSERT_EQ(a.transcript.size(), b.transcript.size());
    for (std::size_t i = 0; i < a.transcript.size(); ++i)
        EXPECT_EQ(a.transcript[i].to_json(), b.transcript[i].to_json());
}

TEST(Render, EachIndexIsZeroBased)
{
    ScriptedBackend backend;
    Environment env(Json {{"xs", {"a", "b"}}});
    auto r = render(parse("{{#each xs}}{{@index}}={{this}};{{/each}}"), env, backend);
    EXPECT_EQ(r.text(), "0=a;1=b;");
}

TEST(Render, NestedEachAndRecords)
{
    ScriptedBackend backend;
    Environment env(Json::parse(R"({"groups": [{"title": "G", "items": ["x", "y"]}]})"));
    auto program = parse(support::read_file(support::source_dir() / "tests/data/templates/nested_each.hbs"));
    auto r = render(program, env, backend);
    EXPECT_EQ(r.text(), "Group 0: G\n  - x (#0)\n  - y (#1)\n\n");
}

TEST(Render, StrictResolution)
{
    ScriptedBackend backend;
    Environment env(Json {{"obj", {{"a", 1}}}, {"s", "text"}});
    EXPECT_THROW(render(parse("{{missing}}"), env, backend), ResolutionError);
    EXPECT_THROW(render(parse("{{obj.b}}"), env, backend), ResolutionError);
    EXPECT_THROW(render(parse("{{s.len}}"), env, backend), ResolutionError); // no traversal into text
    EXPECT_THROW(render(parse("{{this}}"), env, backend), ResolutionError);
    EXPECT_THROW(render(parse("{{#each s}}x{{/each}}"), env, backend), TemplateTypeError);
}

TEST(Render, BackendErrorCarriesExchange)
{
    ScriptedBackend backend; // empty script
    Environment env;
    try
    {
        (void) render(parse("hi {{gen 'x'}}"), env, backend);
        FAIL();
    }
    catch (const BackendError& e)
    {
        EXPECT_EQ(e.kind(), BackendErrorKind::script_exhausted);
        ASSERT_TRUE(e.detail().contains("request"));
        EXPECT_EQ(e.detail()["request"]["messages"][0]["content"], "hi ");
    }
}

TEST(Render, GenFreeMatchesReferenceExpander)
{
    TemplateGen gen {std::mt19937(2024)};
    int compared = 0;
    for (int i = 0; i < 150; ++i)
    {
        auto src = gen.program();
        SCOPED_TRACE(src);
        ScriptedBackend backend;
        Environment env(random_env());
        auto r = render(parse(src), env, backend);
        EXPECT_EQ(r.text(), expand(src, random_env()));
        ++compared;
    }
    EXPECT_GE(compared, 100);
}

// ---- extract_json -------------------------------------------------------------

TEST(ExtractJson, RepairCorpus)
{
    auto corpus = support::read_json(support::source_dir() / "tests/data/json_repair_corpus.json");
    ASSERT_EQ(corpus["recoverable"].size(), 15u);
    for (const auto& c: corpus["recoverable"])
    {
        SCOPED_TRACE(c["name"].get<std::string>());
        auto text = c["text"].get<std::string>();
        const auto copy = text;
        EXPECT_EQ(extract_json(text), c["expected"]);
        EXPECT_EQ(text, copy);
    }
    ASSERT_EQ(corpus["irrecoverable"].size(), 3u);
    for (const auto& c: corpus["irrecoverable"])
    {
        SCOPED_TRACE(c["name"].get<std::string>());
        auto text = c["text"].get<std::string>();
        try
        {
            (void) extract_json(text);
            ADD_FAILURE() << "expected JsonExtractError";
        }
        catch (const JsonExtractError& e)
        {
            EXPECT_EQ(e.raw(), text);
        }
    }
}

TEST(ExtractJson, Idempotent)
{
    auto corpus = support::read_json(support::source_dir() / "tests/data/json_repair_corpus.json");
    for (const auto& c: corpus["recoverable"])
    {
        auto once = extract_json(c["text"].get<std::string>());
        EXPECT_EQ(extract_json(once.dump()), once);
        EXPECT_EQ(extract_json(once.dump(2)), once);
    }
}

TEST(ExtractJson, ErrorStages)
{
    try
    {
        (void) extract_json("no json here");
        FAIL();
    }
    catch (const JsonExtractError& e)
    {
        EXPECT_EQ(e.stage(), RepairStage::balance);
        EXPECT_EQ(e.code(), ErrorCode::json_extract_error);
    }
    try
    {
        (void) extract_json("{'a': 1}");
        FAIL();
    }
    catch (const JsonExtractError& e)
    {
        EXPECT_EQ(e.stage(), RepairStage::trailing_commas);
    }
}

TEST(ExtractJson, KeepsKeyOrder)
{
    auto j = extract_json(R"({"z": 1, "a": 2})");
    EXPECT_EQ(j.begin().key(), "z");
}
