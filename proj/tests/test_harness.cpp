// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <guimig/cli.hpp>
#include <guimig/harness.hpp>

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

using namespace guimig;
using namespace guimig::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace
{

TestCase ground_truth() { return test_case("bench/tip/tipcalc_b/tests/tip_total.json"); }

MigrationResult completed_with(std::vector<Event> events)
{
    MigrationResult r;
    r.status = MigrationStatus::completed;
    r.generated.app_id = "tipcalc_b";
    r.generated.category = "tip";
    r.generated.functionality_id = "tip_total";
    r.generated.events = std::move(events);
    return r;
}

struct CliRun
{
    int code = 0;
    std::string out;
    std::string err;
};

CliRun cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "guimig");
    std::vector<const char*> argv;
    for (const auto& a: args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliRun r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path scratch(const std::string& name)
{
    auto p = fs::temp_directory_path() / ("guimig_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace

TEST_SUITE("harness")
{
    TEST_CASE("the ground truth itself is an exact match")
    {
        SimulatedDevice dev(tipcalc_b());
        const auto gt = ground_truth();
        const auto v = verify_result(completed_with(gt.events), gt, dev);
        CHECK(v.label == Label::success_exact_match);
        CHECK(v.step_reached == 2);
        CHECK(is_success(v.label));
    }

    TEST_CASE("node_path-only selectors still match the ground-truth widgets")
    {
        SimulatedDevice dev(tipcalc_b());
        const auto gt = ground_truth();
        auto events = gt.events;
        const auto page = dev.capture_page();
        for (auto& e: events)
            if (auto* a = std::get_if<Action>(&e))
            {
                Selector s;
                s.node_path = resolve(page.root, *a->selector)->node_path;
                a->selector = s;
            }
        const auto v = verify_result(completed_with(events), gt, dev);
        CHECK(v.label == Label::success_exact_match);
    }

    TEST_CASE("an action that does not execute fails at step 1")
    {
        SimulatedDevice dev(tipcalc_b());
        const auto v = verify_result(
            completed_with({tap(by_text("nope")), text_equals(by_id("total_value"), "65.09")}), ground_truth(), dev);
        CHECK(v.label == Label::failed_not_executable);
        CHECK(v.step_reached == 1);
        CHECK_FALSE(is_success(v.label));
    }

    TEST_CASE("a generated oracle that does not hold fails at step 1")
    {
        SimulatedDevice dev(tipcalc_b());
        const auto v = verify_result(completed_with({set_text(by_id("bill_input"), "56.60"),
                                                     text_equals(by_id("total_value"), "65.09")}),
                                     ground_truth(), dev);
        CHECK(v.label == Label::failed_not_executable);
    }

    TEST_CASE("different actions with the anchor present are anchor matches")
    {
        SimulatedDevice dev(tipcalc_b());
        const auto v = verify_result(completed_with({set_text(by_id("bill_input"), "56.60"),
                                                     tap(by_id("calculate_button")), tap(by_id("calculate_button")),
                                                     text_equals(by_id("total_value"), "65.09")}),
                                     ground_truth(), dev);
        CHECK(v.label == Label::success_anchor_found);
        CHECK(v.step_reached == 3);
    }

    TEST_CASE("the last recorded page can supply the anchor")
    {
        SimulatedDevice dev(tipcalc_b());
        (void)dev.execute_action(set_text(by_id("bill_input"), "56.60"));
        const auto seen = dev.execute_action(tap(by_id("calculate_button"))).after;
        auto r = completed_with({OracleEvent {OracleKind::exists, by_id("calculate_button"), ""}});
        r.recorded_pages.push_back(seen);
        const auto v = verify_result(r, ground_truth(), dev);
        CHECK(v.label == Label::success_anchor_found);
        CHECK(v.detail.find("last recorded page") != std::string::npos);
    }

    TEST_CASE("an executable test without the anchor needs review")
    {
        SimulatedDevice dev(tipcalc_b());
        const auto v = verify_result(completed_with({set_text(by_id("bill_input"), "10.00"),
                                                     tap(by_id("calculate_button")),
                                                     text_equals(by_id("total_value"), "11.50")}),
                                     ground_truth(), dev);
        CHECK(v.label == Label::needs_manual_review);
        CHECK(v.step_reached == 4);
        CHECK_FALSE(is_success(v.label));
    }

    TEST_CASE("a run that did not complete is failed")
    {
        SimulatedDevice dev(tipcalc_b());
        auto r = completed_with(ground_truth().events);
        r.status = MigrationStatus::budget_exhausted;
        CHECK(verify_result(r, ground_truth(), dev).label == Label::failed);
        r = completed_with({set_text(by_id("bill_input"), "56.60")});
        CHECK(verify_result(r, ground_truth(), dev).label == Label::failed);
    }

    TEST_CASE("the fixture dataset loads")
    {
        const auto ds = load_dataset(bench_dir());
        REQUIRE(ds.tasks.size() == 4);
        CHECK(ds.tasks[0].task_id == "t01_tip_basic");
        CHECK(ds.tasks[3].category == "todo");
        for (const auto& t: ds.tasks)
        {
            CHECK(t.source_model->app_id == t.source_app);
            CHECK(t.target_model->app_id == t.target_app);
            CHECK(t.ground_truth.app_id == t.target_app);
            CHECK(fs::exists(transcript_path(ds, t)));
        }
    }

    TEST_CASE("a broken dataset lists every broken task")
    {
        const auto dir = scratch("broken_ds");
        fs::copy(bench_dir(), dir, fs::copy_options::recursive);
        write_file((dir / "tasks.json").string(),
                   R"([{"task_id":"x","category":"tip","source_app":"nope","target_app":"tipcalc_b","functionality_id":"tip_total"},
                       {"task_id":"y","category":"tip","source_app":"tipcalc_a","target_app":"tipcalc_b","functionality_id":"missing"}])");
        try
        {
            (void)load_dataset(dir.string());
            FAIL("expected ValidationError");
        }
        catch (const ValidationError& e)
        {
            CHECK(e.violations().size() == 2);
        }
        fs::remove_all(dir);
    }

    TEST_CASE("every task succeeds in every variant")
    {
        const auto ds = load_dataset(bench_dir());
        BenchOptions opt;
        MigrationConfig v;
        opt.variants = {v};
        v.no_vision = true;
        opt.variants.push_back(v);
        v = {};
        v.no_analyzer = true;
        opt.variants.push_back(v);
        v = {};
        v.no_feedback = true;
        opt.variants.push_back(v);
        const auto rep = run_benchmark(ds, opt, scripted_backend_factory(ds));
        REQUIRE(rep.outcomes.size() == 16);
        for (const auto& o: rep.outcomes)
            CHECK_MESSAGE(o.verification.label == Label::success_exact_match,
                          o.task_id << " " << o.variant << ": " << o.error << " " << o.verification.detail);
        const auto j = rep.to_json();
        CHECK(j["categories"] == json {"tip", "todo"});
        CHECK(j["configurations"].size() == 4);
        CHECK(j["configurations"][0]["overall"]["success_rate"] == 100.0);
        CHECK(j["configurations"][1]["name"] == "no_vision");
        const auto table = rep.table();
        CHECK(table.starts_with("Configuration"));
        CHECK(table.find("no_feedback") != std::string::npos);
        CHECK(table.find("100.0%") != std::string::npos);
    }

    TEST_CASE("reports do not depend on task order or parallelism")
    {
        const auto ds = load_dataset(bench_dir());
        BenchOptions opt;
        opt.repeat = 2;
        opt.timing = false;
        const auto a = run_benchmark(ds, opt, scripted_backend_factory(ds));

        auto shuffled = ds;
        std::reverse(shuffled.tasks.begin(), shuffled.tasks.end());
        opt.jobs = 3;
        const auto b = run_benchmark(shuffled, opt, scripted_backend_factory(shuffled));
        CHECK(a.outcomes.size() == 8);
        CHECK(a.to_json().dump(2) == b.to_json().dump(2));
        CHECK(a.table() == b.table());
        CHECK(a.to_json()["configurations"][0]["mean_wall_time_s"].is_null());
        for (std::size_t i = 0; i < a.outcomes.size(); ++i)
        {
            CHECK(a.outcomes[i].task_id == b.outcomes[i].task_id);
            CHECK(a.outcomes[i].repeat == b.outcomes[i].repeat);
        }
    }

    TEST_CASE("a task whose backend fails is labelled, the batch continues")
    {
        const auto ds = load_dataset(bench_dir());
        const auto real = scripted_backend_factory(ds);
        BackendFactory factory = [&](const MigrationTask& t, const MigrationConfig& c)
            -> std::unique_ptr<CompletionBackend> {
            if (t.task_id == "t02_tip_dollar")
                return std::make_unique<QueueBackend>(std::vector<std::string> {});
            return real(t, c);
        };
        const auto rep = run_benchmark(ds, {}, factory);
        REQUIRE(rep.outcomes.size() == 4);
        CHECK(rep.outcomes[1].verification.label == Label::failed);
        CHECK(rep.outcomes[1].status == MigrationStatus::error);
        CHECK(rep.outcomes[0].verification.label == Label::success_exact_match);
        CHECK(rep.outcomes[3].verification.label == Label::success_exact_match);
        CHECK(rep.to_json()["configurations"][0]["overall"]["success_rate"] == 75.0);
    }

    TEST_CASE("cli usage errors exit with 2")
    {
        CHECK(cli({}).code == 2);
        CHECK(cli({"frobnicate"}).code == 2);
        const auto r = cli({"migrate", "--bogus-flag"});
        CHECK(r.code == 2);
        CHECK_FALSE(r.err.empty());
        CHECK(cli({"bench", fixture("bench"), "--jobs", "0"}).code == 2);
        CHECK(cli({"--help"}).code == 0);
    }

    TEST_CASE("cli migrate, verify and replay")
    {
        const auto dir = scratch("cli_migrate");
        const auto m = cli({"migrate", fixture("bench/tip/tipcalc_a/tests/tip_total.json"), "--source-device",
                            "sim:" + fixture("bench/tip/tipcalc_a/model.json"), "--device",
                            "sim:" + fixture("bench/tip/tipcalc_b/model.json"), "--gateway",
                            "scripted:" + fixture("bench/transcripts/t01_tip_basic.json"), "--out", dir.string()});
        INFO(m.out << m.err);
        REQUIRE(m.code == 0);
        CHECK(m.out.starts_with("status: completed\n"));
        for (const auto* f: {"result.json", "trace.jsonl", "skeleton.json", "generated_test.json"})
            CHECK(fs::exists(dir / f));
        const auto generated = load_test_case(read_file((dir / "generated_test.json").string()));
        CHECK(generated.events.size() == 3);

        const auto v = cli({"verify", (dir / "result.json").string(), "--ground-truth",
                            fixture("bench/tip/tipcalc_b/tests/tip_total.json"), "--device",
                            "sim:" + fixture("bench/tip/tipcalc_b/model.json")});
        CHECK(v.code == 0);
        CHECK(v.out.starts_with("success_exact_match (step 2)"));

        const auto log_dir = dir / "log";
        const auto r = cli({"replay", (dir / "generated_test.json").string(), "--device",
                            "sim:" + fixture("bench/tip/tipcalc_b/model.json"), "--record-log", log_dir.string()});
        CHECK(r.code == 0);
        CHECK(load_log(log_dir.string()).entries.size() == 2);

        // A migration that does not complete exits with 1.
        const auto bad = cli({"migrate", fixture("bench/tip/tipcalc_a/tests/tip_total.json"), "--source-device",
                              "sim:" + fixture("bench/tip/tipcalc_a/model.json"), "--device",
                              "sim:" + fixture("bench/tip/tipcalc_b/model.json"), "--gateway",
                              "scripted:" + fixture("scenarios/cc_guard.json"), "--out", (dir / "bad").string()});
        CHECK(bad.code == 1);
        CHECK(bad.out.starts_with("status: error"));
        fs::remove_all(dir);
    }

    TEST_CASE("cli analyze prints the skeleton")
    {
        const auto a = cli({"analyze", fixture("bench/tip/tipcalc_tutorial/tests/tip_total.json"), "--device",
                            "sim:" + fixture("bench/tip/tipcalc_tutorial/model.json"), "--gateway",
                            "scripted:" + fixture("scenarios/skeleton_prune.json")});
        INFO(a.err);
        REQUIRE(a.code == 0);
        const auto j = json::parse(a.out);
        CHECK(j["key_steps"].size() == 2);
        CHECK(cli({"analyze", fixture("bench/tip/tipcalc_tutorial/tests/tip_total.json")}).code != 0);
    }

    TEST_CASE("cli bench writes report files")
    {
        const auto dir = scratch("cli_bench");
        const auto b = cli({"bench", bench_dir(), "--jobs", "2", "--out", dir.string()});
        INFO(b.err);
        REQUIRE(b.code == 0);
        CHECK(fs::exists(dir / "report.json"));
        CHECK(fs::exists(dir / "full" / "t01_tip_basic" / "trace.jsonl"));
        CHECK(read_file((dir / "report.txt").string()) == b.out);
        const auto timed = json::parse(read_file((dir / "report.json").string()));
        CHECK(timed["configurations"][0]["mean_wall_time_s"].is_number());

        const auto again = cli({"bench", bench_dir(), "--no-timing", "--ablations", "--out", (dir / "a").string()});
        const auto again2 = cli({"bench", bench_dir(), "--no-timing", "--ablations", "--jobs", "3", "--out",
                                 (dir / "b").string()});
        REQUIRE(again.code == 0);
        CHECK(again.out == again2.out);
        CHECK(read_file((dir / "a" / "report.json").string()) == read_file((dir / "b" / "report.json").string()));
        fs::remove_all(dir);
    }
}
