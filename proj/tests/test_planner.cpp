// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <guimig/planner.hpp>

#include <doctest.h>

using namespace guimig;
using namespace guimig::testing;
using nlohmann::json;

namespace
{

json step(const std::string& id, const std::string& status)
{
    return {{"step_id", id}, {"status", status}, {"necessary", true}, {"justification", ""}};
}

std::string cc(json steps, bool complete, bool stop_met, bool extra = false)
{
    return reply({{"steps", std::move(steps)},
                  {"stop_condition_met", stop_met},
                  {"complete", complete},
                  {"extra_navigation_needed", extra},
                  {"note", "checked"}});
}

struct Target
{
    TestSkeleton sk = keypad_skeleton();
    SimulatedDevice dev {tipcalc_b()};
    ExplorationState state;

    Target() { state = initial_exploration_state(sk, dev.capture_page(), 60); }

    void run(const Action& a)
    {
        auto o = dev.execute_action(a);
        REQUIRE(o.executed);
        state.history.push_back({a, describe(a), "ok", o.after});
        observe_page(state, o.after, 60);
    }
};

} // namespace

TEST_SUITE("planner")
{
    TEST_CASE("fresh state has every key step pending and labels the page")
    {
        Target t;
        REQUIRE(t.state.step_status.size() == 1);
        CHECK(t.state.step_status.at("s1") == StepStatus::pending);
        CHECK(t.state.history.empty());
        CHECK(t.state.annotated.index_map.size() == 3);
        CHECK(status_strings(t.state).at("s1") == "pending");
        CHECK(target_page_text(t.state.page, t.state.pruned).find("label 3: button 'CALCULATE'")
              != std::string::npos);
    }

    TEST_CASE("a completeness claim with a pending step is re-queried")
    {
        Target t;
        QueueBackend backend({cc(json::array({step("s1", "pending")}), true, true),
                              cc(json::array({step("s1", "in_progress")}), false, false)});
        Gateway gw(backend);
        const auto v = check_completeness(gw, t.sk, t.state);
        CHECK(backend.prompts.size() == 2);
        CHECK_FALSE(v.complete);
        CHECK(v.step_status.at("s1") == StepStatus::in_progress);
        CHECK(t.state.status_since.at("s1") == 0);
        const auto& note = backend.prompts[1].find(section::instruction)->text;
        CHECK(note.find("reply claims completion while step 's1' is pending") != std::string::npos);
    }

    TEST_CASE("a guard that never gets a valid reply fails after the budget")
    {
        Target t;
        const auto bad = cc(json::array({step("s1", "pending")}), true, true);
        QueueBackend backend({bad, bad, bad, bad});
        Gateway gw(backend, 2);
        CHECK_THROWS_AS(check_completeness(gw, t.sk, t.state), GatewayError);
        CHECK(backend.prompts.size() == 3);
        CHECK(t.state.step_status.at("s1") == StepStatus::pending);
    }

    TEST_CASE("completion also needs the stop condition")
    {
        Target t;
        QueueBackend backend({cc(json::array({step("s1", "done")}), true, false),
                              cc(json::array({step("s1", "done")}), false, false)});
        Gateway gw(backend);
        const auto v = check_completeness(gw, t.sk, t.state);
        CHECK(backend.prompts.size() == 2);
        CHECK(v.step_status.at("s1") == StepStatus::done);
    }

    TEST_CASE("waiving needs necessary=false and a justification")
    {
        Target t;
        json lazy = json::array({{{"step_id", "s1"}, {"status", "waived"}}});
        json careful = json::array({{{"step_id", "s1"},
                                     {"status", "waived"},
                                     {"necessary", false},
                                     {"justification", "the target app has no such screen"}}});
        QueueBackend backend({cc(lazy, true, true), cc(careful, true, true)});
        Gateway gw(backend);
        const auto v = check_completeness(gw, t.sk, t.state);
        CHECK(backend.prompts.size() == 2);
        CHECK(v.complete);
        CHECK(v.step_status.at("s1") == StepStatus::waived);
    }

    TEST_CASE("done never reverts")
    {
        Target t;
        t.run(set_text(by_id("bill_input"), "56.60"));
        QueueBackend backend({cc(json::array({step("s1", "done")}), false, false),
                              cc(json::array({step("s1", "pending")}), false, false)});
        Gateway gw(backend);
        (void)check_completeness(gw, t.sk, t.state);
        CHECK(t.state.status_since.at("s1") == 1);
        const auto v = check_completeness(gw, t.sk, t.state);
        CHECK(v.step_status.at("s1") == StepStatus::done);
        CHECK(t.state.step_status.at("s1") == StepStatus::done);
        CHECK(t.state.status_since.at("s1") == 1);
    }

    TEST_CASE("unknown or repeated step ids are re-queried")
    {
        Target t;
        QueueBackend backend({cc(json::array({step("s9", "done")}), false, false),
                              cc(json::array({step("s1", "done"), step("s1", "done")}), false, false),
                              cc(json::array(), false, false)});
        Gateway gw(backend);
        const auto v = check_completeness(gw, t.sk, t.state);
        CHECK(backend.prompts.size() == 3);
        CHECK(v.step_status.at("s1") == StepStatus::pending);
    }

    TEST_CASE("checker prompt shows the source final page next to the target")
    {
        Target t;
        QueueBackend backend({cc(json::array(), false, false)});
        Gateway gw(backend);
        (void)check_completeness(gw, t.sk, t.state);
        const auto& b = backend.prompts.at(0);
        REQUIRE(b.images.size() == 2);
        CHECK(b.images[0].label == "source");
        CHECK(b.images[0].caption == "final GUI page");
        CHECK(b.images[1].label == "target");
        CHECK(b.find(section::source_context)->text.find("total_amount") != std::string::npos);
    }

    TEST_CASE("widget labels map through the annotation")
    {
        Target t;
        QueueBackend backend({reply({{"widget_label", 3}, {"action", "tap"}, {"rationale", "compute"}})});
        Gateway gw(backend);
        const auto p = generate_action(gw, t.sk, t.state, {});
        REQUIRE(p.candidate);
        CHECK(p.candidate->label == 3);
        CHECK(p.candidate->action.kind == ActionKind::tap);
        const auto& sel = *p.candidate->action.selector;
        CHECK(sel.node_path == t.state.annotated.index_map.at(3));
        CHECK(sel.resource_id == std::optional<std::string>("calculate_button"));
        CHECK(resolve(t.state.page.root, sel)->text == "CALCULATE");
        CHECK_FALSE(p.candidate->action.payload);
    }

    TEST_CASE("set_text keeps its payload and drops the field text from the selector")
    {
        Target t;
        t.run(set_text(by_id("bill_input"), "12"));
        QueueBackend backend(
            {reply({{"widget_label", 2}, {"action", "set_text"}, {"payload", "56.60"}, {"rationale", "bill"}})});
        Gateway gw(backend);
        const auto p = generate_action(gw, t.sk, t.state, {"try the bill field"});
        REQUIRE(p.candidate);
        CHECK(p.candidate->action.payload == std::optional<std::string>("56.60"));
        CHECK_FALSE(p.candidate->action.selector->text);
        CHECK(backend.prompts[0].find(section::instruction)->text.find("try the bill field") != std::string::npos);
    }

    TEST_CASE("a label outside the page is re-queried, then fails")
    {
        Target t;
        const auto bad = reply({{"widget_label", 99}, {"action", "tap"}, {"rationale", "?"}});
        {
            QueueBackend backend({bad, reply({{"widget_label", 1}, {"action", "tap"}, {"rationale", "ok"}})});
            Gateway gw(backend);
            const auto p = generate_action(gw, t.sk, t.state, {});
            CHECK(backend.prompts.size() == 2);
            REQUIRE(p.candidate);
            CHECK(p.candidate->label == 1);
        }
        QueueBackend backend({bad, bad, bad});
        Gateway gw(backend);
        CHECK_THROWS_AS(generate_action(gw, t.sk, t.state, {}), GatewayError);
        CHECK(backend.prompts.size() == 3);
    }

    TEST_CASE("no_action is a stuck signal, wait gets a default")
    {
        Target t;
        QueueBackend backend({reply({{"no_action", true}, {"reason", "nothing fits"}}),
                              reply({{"action", "wait"}, {"rationale", "loading"}})});
        Gateway gw(backend);
        const auto stuck = generate_action(gw, t.sk, t.state, {});
        CHECK_FALSE(stuck.candidate);
        CHECK(stuck.stuck_reason == "nothing fits");
        const auto wait = generate_action(gw, t.sk, t.state, {});
        REQUIRE(wait.candidate);
        CHECK(wait.candidate->action.payload == std::optional<std::string>("500"));
        CHECK_FALSE(wait.candidate->action.selector);
    }

    TEST_CASE("oracle rule path finds the identical text without a call")
    {
        Target t;
        t.run(set_text(by_id("bill_input"), "56.60"));
        t.run(tap(by_id("calculate_button")));
        QueueBackend backend({});
        Gateway gw(backend);
        const auto d = generate_oracle(gw, t.sk, t.state);
        CHECK(d.rule_path);
        CHECK(gw.total_calls() == 0);
        CHECK(d.oracle.kind == OracleKind::text_equals);
        CHECK(d.oracle.expected == "65.09");
        CHECK(d.oracle.selector.resource_id == std::optional<std::string>("total_value"));
        CHECK(oracle_holds(d.oracle, t.state.page.root));
    }

    TEST_CASE("a prefixed total needs the oracle generator")
    {
        auto sk = keypad_skeleton();
        SimulatedDevice dev(tipcalc_dollar());
        auto state = initial_exploration_state(sk, dev.capture_page(), 60);
        (void)dev.execute_action(set_text(by_id("bill_input"), "56.60"));
        observe_page(state, dev.execute_action(tap(by_id("calculate_button"))).after, 60);
        CHECK_FALSE(rule_path_oracle(sk.source_oracle, state.page));

        const json wrong = {{"kind", "text_equals"}, {"selector_attrs", {{"resource_id", "total_value"}}},
                            {"expected", "65.09"}};
        const json right = {{"kind", "text_equals"}, {"selector_attrs", {{"resource_id", "total_value"}}},
                            {"expected", "$ 65.09"}};
        QueueBackend backend({reply(wrong), reply(right)});
        Gateway gw(backend);
        const auto d = generate_oracle(gw, sk, state);
        CHECK_FALSE(d.rule_path);
        CHECK(backend.prompts.size() == 2);
        CHECK(d.oracle.expected == "$ 65.09");
        CHECK(backend.prompts[1].find(section::instruction)->text.find("does not hold") != std::string::npos);
    }

    TEST_CASE("exists oracles match on resource_id or content_desc")
    {
        Widget root;
        root.bounds = {0, 0, 100, 100};
        root.children.push_back(Widget {{}, "done_icon", "", "", "ImageView", {0, 0, 10, 10}, {}, {}});
        root.children.push_back(Widget {{}, "", "", "settings", "ImageButton", {0, 10, 10, 20}, {}, {}});
        assign_node_paths(root);
        const auto page = page_of(root);

        const auto by_rid = rule_path_oracle({OracleKind::exists, by_id("done_icon"), ""}, page);
        REQUIRE(by_rid);
        CHECK(by_rid->kind == OracleKind::exists);
        CHECK(by_rid->selector.resource_id == std::optional<std::string>("done_icon"));

        Selector desc;
        desc.content_desc = "settings";
        const auto by_desc = rule_path_oracle({OracleKind::exists, desc, ""}, page);
        REQUIRE(by_desc);
        CHECK(resolve(page.root, by_desc->selector) == &page.root.children[1]);

        CHECK_FALSE(rule_path_oracle({OracleKind::exists, by_id("missing"), ""}, page));
    }

    TEST_CASE("rule path ignores surrounding whitespace but not other differences")
    {
        Widget root;
        root.bounds = {0, 0, 100, 100};
        root.children.push_back(Widget {{}, "", " 65.09 ", "", "TextView", {0, 0, 10, 10}, {}, {}});
        assign_node_paths(root);
        auto hit = rule_path_oracle(text_equals(by_id("total"), "65.09"), page_of(root));
        REQUIRE(hit);
        CHECK(hit->selector.node_path == NodePath {0});
        CHECK(hit->expected == " 65.09 ");
        CHECK(oracle_holds(*hit, root));
        CHECK_FALSE(rule_path_oracle(text_equals(by_id("total"), "65.1"), page_of(root)));
    }

    TEST_CASE("selector_for on random trees resolves back to the widget")
    {
        Rng rng(99);
        for (int i = 0; i < 40; ++i)
        {
            const auto t = random_tree(rng, uniform(rng, 1, 30));
            visit_preorder(t, [&](const Widget& w) {
                CHECK(resolve(t, selector_for(w)) == &w);
                return true;
            });
        }
    }
}
