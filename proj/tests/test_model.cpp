// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <doctest.h>

#include <filesystem>

using namespace guimig;
using namespace guimig::testing;

namespace
{

const char* keypad_test = R"({
  "app_id": "tipcalc_a",
  "category": "tip",
  "functionality_id": "tip_total",
  "events": [
    {"type": "action", "kind": "tap", "selector": {"resource_id": "", "text": "5"}},
    {"type": "action", "kind": "tap", "selector": {"resource_id": "", "text": "6"}},
    {"type": "action", "kind": "tap", "selector": {"resource_id": "", "text": "6"}},
    {"type": "action", "kind": "tap", "selector": {"resource_id": "", "text": "0"}},
    {"type": "oracle", "kind": "text_equals", "selector": {"resource_id": "total_amount"}, "expected": "65.09"}
  ]
})";

TestCase minimal()
{
    TestCase tc;
    tc.app_id = "a";
    tc.category = "c";
    tc.functionality_id = "f";
    tc.events.emplace_back(tap(by_id("go")));
    tc.events.emplace_back(text_equals(by_id("out"), "done"));
    return tc;
}

} // namespace

TEST_SUITE("core-model")
{
    TEST_CASE("four digit taps plus terminal oracle load as five events")
    {
        const auto tc = load_test_case(keypad_test);
        CHECK(tc.events.size() == 5);
        CHECK(tc.actions().size() == 4);
        REQUIRE(tc.terminal_oracle() != nullptr);
        CHECK(tc.terminal_oracle()->expected == "65.09");
        CHECK(tc.action_event_indices() == std::vector<std::size_t> {0, 1, 2, 3});
    }

    TEST_CASE("last event must be an oracle")
    {
        auto tc = minimal();
        tc.events.pop_back();
        const auto v = validate_test_case(tc);
        REQUIRE(v.size() == 1);
        CHECK(v[0] == "terminal event must be oracle");
        try
        {
            (void)load_test_case(save_test_case(tc));
            FAIL("expected ValidationError");
        }
        catch (const ValidationError& e)
        {
            CHECK(e.violations() == v);
        }
    }

    TEST_CASE("set_text without payload is named")
    {
        auto tc = minimal();
        tc.events.insert(tc.events.begin(), Action {ActionKind::set_text, by_id("bill"), std::nullopt});
        const auto v = validate_test_case(tc);
        REQUIRE(v.size() == 1);
        CHECK(v[0].starts_with("set_text requires payload"));
    }

    TEST_CASE("empty expected on text_equals names the event index")
    {
        auto tc = minimal();
        tc.events.insert(tc.events.begin(), text_equals(by_id("x"), ""));
        const auto v = validate_test_case(tc);
        REQUIRE(v.size() == 1);
        CHECK(v[0].find("event 0") != std::string::npos);
        CHECK(v[0].find("text_equals") != std::string::npos);
    }

    TEST_CASE("validation is repeatable and a fixture is clean")
    {
        const auto tc = test_case("bench/tip/tipcalc_b/tests/tip_total.json");
        CHECK(validate_test_case(tc).empty());
        auto broken = tc;
        broken.events.push_back(Action {ActionKind::wait, std::nullopt, std::string("soon")});
        CHECK(validate_test_case(broken) == validate_test_case(broken));
        CHECK(validate_test_case(broken).size() == 2);
    }

    TEST_CASE("selector-needing actions without a selector")
    {
        auto tc = minimal();
        tc.events.insert(tc.events.begin(), Action {ActionKind::tap, std::nullopt, std::nullopt});
        tc.events.insert(tc.events.begin(), Action {ActionKind::key_event, by_id("x"), std::string("back")});
        const auto v = validate_test_case(tc);
        REQUIRE(v.size() == 2);
        CHECK(v[0] == "key_event takes no selector (event 0)");
        CHECK(v[1] == "tap requires a selector (event 1)");
    }

    TEST_CASE("payload 56.60 survives byte for byte")
    {
        auto tc = minimal();
        tc.events.insert(tc.events.begin(), set_text(by_id("bill_input"), "56.60"));
        const auto doc = save_test_case(tc);
        CHECK(doc.find("\"payload\": \"56.60\"") != std::string::npos);
        const auto back = load_test_case(doc);
        CHECK(std::get<Action>(back.events[0]).payload == std::optional<std::string>("56.60"));
        CHECK(save_test_case(back) == doc);
    }

    TEST_CASE("empty resource_id stays explicit")
    {
        const auto tc = load_test_case(keypad_test);
        const auto doc = save_test_case(tc);
        CHECK(doc.find("\"resource_id\": \"\"") != std::string::npos);
        CHECK(load_test_case(doc) == tc);
        // Empty attributes do not constrain matching.
        const auto& sel = *std::get<Action>(tc.events[0]).selector;
        CHECK(sel.has_constraint());
        Widget root;
        root.children.push_back(Widget {{0}, "keypad_5", "5", "", "Button", {0, 0, 5, 5}, {}, {}});
        CHECK(resolve(root, sel) == &root.children[0]);
    }

    TEST_CASE("malformed documents report line or field")
    {
        try
        {
            (void)load_test_case("{\n  \"app_id\": \"a\",\n  \"events\": [\n    {\"type\": \"action\",,}\n  ]\n}");
            FAIL("expected ParseError");
        }
        catch (const ParseError& e)
        {
            CHECK(e.line() == 4);
        }
        try
        {
            (void)load_test_case(R"({"app_id":"a","category":"c","functionality_id":"f",
                "events":[{"type":"action","kind":"fling","selector":{"text":"x"}}]})");
            FAIL("expected ParseError");
        }
        catch (const ParseError& e)
        {
            CHECK(e.field() == "events[0].kind");
        }
        try
        {
            (void)load_test_case(R"({"app_id":"a","category":"c","functionality_id":"f",
                "events":[{"type":"oracle","kind":"exists","selector":{"node_path":[0,-1]}}]})");
            FAIL("expected ParseError");
        }
        catch (const ParseError& e)
        {
            CHECK(e.field() == "events[0].selector.node_path");
        }
    }

    TEST_CASE("codec round trip on random tests")
    {
        Rng rng(20240611);
        for (int i = 0; i < 300; ++i)
        {
            const auto tc = random_test_case(rng);
            REQUIRE_MESSAGE(validate_test_case(tc).empty(), save_test_case(tc));
            const auto doc = save_test_case(tc);
            const auto back = load_test_case(doc);
            REQUIRE(back == tc);
            REQUIRE(save_test_case(back) == doc);
        }
    }

    TEST_CASE("selector resolution order")
    {
        Widget root;
        root.class_name = "FrameLayout";
        root.bounds = {0, 0, 100, 100};
        root.children.push_back(Widget {{}, "a", "same", "", "TextView", {0, 0, 10, 10}, {}, {}});
        root.children.push_back(Widget {{}, "b", "same", "desc", "Button", {0, 10, 10, 20}, {}, {}});
        assign_node_paths(root);

        CHECK(resolve(root, by_text("same")) == &root.children[0]);
        Selector both = by_text("same");
        both.content_desc = "desc";
        CHECK(resolve(root, both) == &root.children[1]);
        Selector path;
        path.node_path = NodePath {1};
        path.resource_id = "a"; // node_path wins
        CHECK(resolve(root, path) == &root.children[1]);
        CHECK(resolve(root, by_id("zzz")) == nullptr);
        Selector root_sel;
        root_sel.node_path = NodePath {};
        CHECK(resolve(root, root_sel) == &root);
    }

    TEST_CASE("oracle checks trim nothing except for the rule path")
    {
        Widget root;
        root.bounds = {0, 0, 100, 100};
        root.children.push_back(Widget {{}, "total", "$ 65.09", "", "TextView", {0, 0, 10, 10}, {}, {}});
        root.children.push_back(Widget {{}, "hidden", "x", "", "TextView", {0, 0, 10, 10}, {}, {}});
        root.children[1].flags.visible = false;
        assign_node_paths(root);
        CHECK(oracle_holds(text_equals(by_id("total"), "$ 65.09"), root));
        CHECK_FALSE(oracle_holds(text_equals(by_id("total"), "65.09"), root));
        CHECK(oracle_holds(OracleEvent {OracleKind::text_contains, by_id("total"), "65.09"}, root));
        CHECK(oracle_holds(OracleEvent {OracleKind::exists, by_id("total"), ""}, root));
        CHECK_FALSE(oracle_holds(OracleEvent {OracleKind::exists, by_id("hidden"), ""}, root));
    }

    TEST_CASE("widget tree validation")
    {
        Widget root;
        root.bounds = {0, 0, 100, 100};
        root.children.push_back(Widget {{}, "", "x", "", "View", {10, 10, 5, 20}, {}, {}});
        root.children.push_back(Widget {{}, "", "y", "", "View", {0, 0, 500, 500}, {}, {}}); // escapes parent: allowed
        assign_node_paths(root);
        auto v = validate_widget_tree(root);
        REQUIRE(v.size() == 1);
        CHECK(v[0].starts_with("invalid bounds"));
        root.children[0].bounds = {0, 0, 5, 5};
        root.children[1].node_path = {0};
        v = validate_widget_tree(root);
        REQUIRE(v.size() == 1);
        CHECK(v[0].starts_with("duplicate node_path"));
    }

    TEST_CASE("widget json round trip on random trees")
    {
        Rng rng(7);
        for (int i = 0; i < 50; ++i)
        {
            const auto t = random_tree(rng, uniform(rng, 1, 40));
            CHECK(widget_from_json(widget_to_json(t)) == t);
            CHECK(validate_widget_tree(t).empty());
        }
    }

    TEST_CASE("execution log persists to disk")
    {
        auto dev = SimulatedDevice(tipcalc_a());
        const auto tc = test_case("bench/tip/tipcalc_a/tests/tip_total.json");
        const auto log = record_execution_log(dev, tc);
        REQUIRE(log.entries.size() == 4);
        const auto dir = std::filesystem::temp_directory_path() / "guimig_log_test";
        std::filesystem::remove_all(dir);
        save_log(log, dir.string());
        const auto back = load_log(dir.string());
        REQUIRE(back.entries.size() == 4);
        for (std::size_t i = 0; i < 4; ++i)
        {
            CHECK(back.entries[i].event_index == log.entries[i].event_index);
            CHECK(same_content(back.entries[i].before, log.entries[i].before));
            CHECK(same_content(back.entries[i].after, log.entries[i].after));
            CHECK(back.entries[i].after.sequence_no == log.entries[i].after.sequence_no);
        }
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("digests are stable")
    {
        CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
        CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
        CHECK(hex_digest("a") == hex_digest("a"));
        CHECK(hex_digest("a") != hex_digest("b"));
        CHECK(trim("  65.09 \n") == "65.09");
    }
}
