// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <guimig/feedback.hpp>

#include <doctest.h>

using namespace guimig;
using namespace guimig::testing;
using nlohmann::json;

namespace
{

struct Target
{
    TestSkeleton sk = keypad_skeleton();
    SimulatedDevice dev {tipcalc_b()};
    ExplorationState state;

    Target() { state = initial_exploration_state(sk, dev.capture_page(), 60); }

    ExecutionOutcome run(const Action& a)
    {
        auto o = dev.execute_action(a);
        REQUIRE(o.executed);
        state.history.push_back({a, describe(a), "ok", o.after});
        observe_page(state, o.after, 60);
        return o;
    }

    /// The detour of the truncation scenario: bill typed, then settings
    /// opened and dark mode switched on.
    void detour()
    {
        run(set_text(by_id("bill_input"), "56.60"));
        run(tap(by_id("settings_button")));
        run(tap(by_id("dark_mode")));
    }
};

Reflection blame(std::size_t i)
{
    Reflection r;
    r.misleading_index = i;
    r.consulted = true;
    return r;
}

} // namespace

TEST_SUITE("feedback")
{
    TEST_CASE("a non-executed action is rejected without a call")
    {
        Target t;
        const auto bad = tap(by_text("nope"));
        const auto o = t.dev.execute_action(bad);
        REQUIRE_FALSE(o.executed);
        QueueBackend backend({});
        Gateway gw(backend);
        const auto v = assess_action(gw, t.sk, t.state, bad, o);
        CHECK_FALSE(v.accepted);
        CHECK_FALSE(v.consulted);
        CHECK(v.reason == "not executable");
        REQUIRE(v.suggestions.size() == 1);
        CHECK(v.suggestions[0] == "the previous action failed: selector unresolved");
        CHECK(gw.total_calls() == 0);
    }

    TEST_CASE("bare accept is enough")
    {
        Target t;
        const auto a = set_text(by_id("bill_input"), "56.60");
        const auto o = t.dev.execute_action(a);
        QueueBackend backend({reply({{"accept", true}})});
        Gateway gw(backend);
        const auto v = assess_action(gw, t.sk, t.state, a, o);
        CHECK(v.accepted);
        CHECK(v.consulted);
        CHECK(v.reason.empty());
        CHECK(v.suggestions.empty());
        const auto& b = backend.prompts.at(0);
        REQUIRE(b.images.size() == 2);
        CHECK(b.images[0].caption == "page before action");
        CHECK(b.images[1].caption == "page after action");
        CHECK(b.find(section::target_context)->text.find("56.60") != std::string::npos);
    }

    TEST_CASE("rejection carries reason and suggestions")
    {
        Target t;
        const auto a = tap(by_id("settings_button"));
        const auto o = t.dev.execute_action(a);
        QueueBackend backend(
            {reply({{"accept", false}, {"reason", "settings are off the path"}, {"suggestions", {"press back"}}})});
        Gateway gw(backend);
        const auto v = assess_action(gw, t.sk, t.state, a, o);
        CHECK_FALSE(v.accepted);
        CHECK(v.reason == "settings are off the path");
        CHECK(v.suggestions == std::vector<std::string> {"press back"});
    }

    TEST_CASE("a rejection without a reason is re-queried")
    {
        Target t;
        const auto a = tap(by_id("settings_button"));
        const auto o = t.dev.execute_action(a);
        QueueBackend backend({reply({{"accept", false}}), reply({{"accept", false}, {"reason", "detour"}})});
        Gateway gw(backend);
        const auto v = assess_action(gw, t.sk, t.state, a, o);
        CHECK(backend.prompts.size() == 2);
        CHECK(v.reason == "detour");
    }

    TEST_CASE("feedback that never parses counts as a rejection")
    {
        Target t;
        const auto a = tap(by_id("settings_button"));
        const auto o = t.dev.execute_action(a);
        QueueBackend backend({"no block", "no block", "no block"});
        Gateway gw(backend);
        const auto v = assess_action(gw, t.sk, t.state, a, o);
        CHECK_FALSE(v.accepted);
        CHECK(v.consulted);
        CHECK(v.reason == "feedback unavailable");
        CHECK(gw.total_calls() == 3);
    }

    TEST_CASE("reflection on an empty history makes no call")
    {
        Target t;
        QueueBackend backend({});
        Gateway gw(backend);
        const auto r = reflect_test(gw, t.sk, t.state);
        CHECK_FALSE(r.consulted);
        CHECK_FALSE(r.misleading_index);
        CHECK(gw.total_calls() == 0);
    }

    TEST_CASE("reflection names a history position")
    {
        Target t;
        t.detour();
        QueueBackend backend({reply({{"misleading_index", 2}, {"reason", "settings were a detour"}})});
        Gateway gw(backend);
        const auto r = reflect_test(gw, t.sk, t.state);
        CHECK(r.consulted);
        CHECK(r.misleading_index == std::optional<std::size_t>(2));
        CHECK(r.reason == "settings were a detour");
        const auto& b = backend.prompts.at(0);
        CHECK(b.images.size() == 3);
        CHECK(b.images[2].caption == "after accepted action 3");
        const auto& dialog = b.find(section::event_history)->text;
        CHECK(dialog.find("1. ") == 0);
        CHECK(dialog.find("3. ") != std::string::npos);
    }

    TEST_CASE("reflection may blame nothing, out-of-range indices are re-queried")
    {
        Target t;
        t.detour();
        QueueBackend backend({reply({{"misleading_index", 4}, {"reason", "x"}}),
                              reply({{"misleading_index", 0}, {"reason", "x"}}),
                              reply({{"misleading_index", nullptr}, {"reason", "all fine"}})});
        Gateway gw(backend);
        const auto r = reflect_test(gw, t.sk, t.state);
        CHECK(backend.prompts.size() == 3);
        CHECK(r.consulted);
        CHECK_FALSE(r.misleading_index);
    }

    TEST_CASE("truncation to index 2 keeps the first action and its page")
    {
        Target t;
        t.detour();
        const auto recorded = t.state.history[0].after;
        t.state.step_status["s1"] = StepStatus::done;
        t.state.status_since["s1"] = 2;
        const auto rep = apply_truncation(t.state, blame(2), t.dev);
        CHECK(rep.kept == 1);
        CHECK(rep.dropped == 2);
        CHECK(rep.page_matches_record);
        CHECK(rep.reverted_steps == std::vector<std::string> {"s1"});
        CHECK(t.state.step_status.at("s1") == StepStatus::pending);
        CHECK(t.state.history.size() == 1);
        CHECK(same_content(t.state.page, recorded));
        CHECK(t.state.page.activity == ".CalcActivity");
        CHECK(t.state.consecutive_rejections == 0);
        // The dark switch was undone by the reset.
        CHECK(t.dev.state().bindings.at("dark") == initial_state(t.dev.model()).bindings.at("dark"));
    }

    TEST_CASE("truncation to index 1 returns to the initial page")
    {
        Target t;
        t.detour();
        t.state.status_since["s1"] = 1;
        t.state.step_status["s1"] = StepStatus::in_progress;
        const auto rep = apply_truncation(t.state, blame(1), t.dev);
        CHECK(rep.kept == 0);
        CHECK(rep.dropped == 3);
        CHECK(rep.page_matches_record);
        CHECK(same_content(t.state.page, t.state.initial_page));
        CHECK(rep.reverted_steps == std::vector<std::string> {"s1"});
    }

    TEST_CASE("steps marked inside the kept prefix survive")
    {
        Target t;
        t.detour();
        t.state.step_status["s1"] = StepStatus::done;
        t.state.status_since["s1"] = 1;
        const auto rep = apply_truncation(t.state, blame(2), t.dev);
        CHECK(rep.reverted_steps.empty());
        CHECK(t.state.step_status.at("s1") == StepStatus::done);
    }

    TEST_CASE("two truncations in one exploration")
    {
        Target t;
        t.detour();
        auto rep = apply_truncation(t.state, blame(3), t.dev);
        CHECK(rep.kept == 2);
        CHECK(t.state.page.activity == ".SettingsActivity");
        t.run(Action {ActionKind::key_event, std::nullopt, std::string("back")});
        t.run(tap(by_id("settings_button")));
        REQUIRE(t.state.history.size() == 4);
        rep = apply_truncation(t.state, blame(2), t.dev);
        CHECK(rep.kept == 1);
        CHECK(rep.dropped == 3);
        CHECK(rep.page_matches_record);
        CHECK(t.state.page.activity == ".CalcActivity");
    }

    TEST_CASE("a prefix that no longer replays is an error")
    {
        Target t;
        t.detour();
        // Pretend the switch was tapped first.
        std::swap(t.state.history[0], t.state.history[2]);
        CHECK_THROWS_AS(apply_truncation(t.state, blame(2), t.dev), MigrationError);
        Target u;
        u.detour();
        CHECK_THROWS_AS(apply_truncation(u.state, Reflection {}, u.dev), MigrationError);
        CHECK_THROWS_AS(apply_truncation(u.state, blame(4), u.dev), MigrationError);
    }
}
