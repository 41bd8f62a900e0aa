// SPDX-License-Identifier: Apache-2.0
#include <guimig/harness.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

namespace guimig
{

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Label l) noexcept
{
    switch (l)
    {
        case Label::failed_not_executable: return "failed_not_executable";
        case Label::success_exact_match: return "success_exact_match";
        case Label::success_anchor_found: return "success_anchor_found";
        case Label::needs_manual_review: return "needs_manual_review";
        case Label::failed: return "failed";
    }
    return "failed";
}

bool is_success(Label l) noexcept
{
    return l == Label::success_exact_match || l == Label::success_anchor_found;
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

namespace
{

struct ReplayTrace
{
    bool ok = false;
    std::string failure;
    // kind, widget acted on (resolved before the action), payload
    std::vector<std::tuple<ActionKind, std::optional<NodePath>, std::optional<std::string>>> steps;
    GuiPage final_page;
};

ReplayTrace replay(DeviceSession& session, const std::vector<Action>& actions)
{
    ReplayTrace t;
    const auto outcomes = replay_prefix(session, actions);
    for (std::size_t i = 0; i < outcomes.size(); ++i)
    {
        const auto& o = outcomes[i];
        if (!o.executed)
        {
            t.failure = "action " + std::to_string(i) + ": " + o.failure_reason;
            return t;
        }
        std::optional<NodePath> target;
        if (actions[i].selector)
            if (const Widget* w = resolve(o.before.root, *actions[i].selector))
                target = w->node_path;
        const auto payload = actions[i].kind == ActionKind::tap || actions[i].kind == ActionKind::long_tap
                                 ? std::nullopt
                                 : actions[i].payload;
        t.steps.emplace_back(actions[i].kind, target, payload);
    }
    t.final_page = session.capture_page();
    t.ok = true;
    return t;
}

std::optional<NodePath> anchor_of(const OracleEvent& o, const Widget& root)
{
    if (const Widget* w = resolve(root, o.selector))
        return w->node_path;
    return std::nullopt;
}

} // namespace

VerificationLabel verify_result(const MigrationResult& result, const TestCase& ground_truth, DeviceSession& target)
{
    const auto* oracle = result.generated.terminal_oracle();
    if (result.status != MigrationStatus::completed || !oracle)
        return {Label::failed, 1, "migration ended with status " + std::string(to_string(result.status))};

    // Step 1
    const auto gen = replay(target, result.generated.actions());
    if (!gen.ok)
        return {Label::failed_not_executable, 1, "replay failed at " + gen.failure};
    if (!oracle_holds(*oracle, gen.final_page.root))
        return {Label::failed_not_executable, 1, "generated oracle fails: " + describe(*oracle)};

    // Step 2
    const auto* gt_oracle = ground_truth.terminal_oracle();
    const auto gt = replay(target, ground_truth.actions());
    if (gt.ok && gt_oracle && gt.steps == gen.steps && gt_oracle->kind == oracle->kind
        && trim(gt_oracle->expected) == trim(oracle->expected)
        && anchor_of(*gt_oracle, gt.final_page.root) == anchor_of(*oracle, gen.final_page.root)
        && anchor_of(*oracle, gen.final_page.root))
        return {Label::success_exact_match, 2, "same actions, widgets, payloads and oracle as the ground truth"};

    // Step 3
    if (gt_oracle)
    {
        if (oracle_holds(*gt_oracle, gen.final_page.root))
            return {Label::success_anchor_found, 3, "ground-truth anchor found on the replayed final page"};
        if (!result.recorded_pages.empty() && oracle_holds(*gt_oracle, result.recorded_pages.back().root))
            return {Label::success_anchor_found, 3, "ground-truth anchor found on the last recorded page"};
    }

    // Step 4
    return {Label::needs_manual_review, 4, "executable but neither equal to nor anchored like the ground truth"};
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

Dataset load_dataset(const std::string& root)
{
    Dataset ds;
    ds.root = root;
    const auto tasks_path = (fs::path(root) / "tasks.json").string();
    json tasks;
    try
    {
        tasks = json::parse(read_file(tasks_path));
    }
    catch (const json::parse_error& e)
    {
        throw ParseError(e.what(), 0, tasks_path);
    }
    if (!tasks.is_array())
        throw ParseError("tasks.json must be an array", 0, "tasks");

    std::map<std::string, std::shared_ptr<const AppModel>> models;
    auto model_for = [&](const std::string& category, const std::string& app) {
        const auto path = (fs::path(root) / category / app / "model.json").string();
        auto& slot = models[path];
        if (!slot)
            slot = std::make_shared<const AppModel>(load_app_model(read_file(path)));
        return slot;
    };
    auto test_for = [&](const std::string& category, const std::string& app, const std::string& fid) {
        return load_test_case(read_file((fs::path(root) / category / app / "tests" / (fid + ".json")).string()));
    };

    std::vector<std::string> problems;
    for (std::size_t i = 0; i < tasks.size(); ++i)
    {
        const auto& t = tasks[i];
        MigrationTask task;
        try
        {
            task.task_id = t.at("task_id").get<std::string>();
            task.category = t.at("category").get<std::string>();
            task.source_app = t.at("source_app").get<std::string>();
            task.target_app = t.at("target_app").get<std::string>();
            task.functionality_id = t.at("functionality_id").get<std::string>();
            task.source_model = model_for(task.category, task.source_app);
            task.target_model = model_for(task.category, task.target_app);
            task.source_test = test_for(task.category, task.source_app, task.functionality_id);
            task.ground_truth = test_for(task.category, task.target_app, task.functionality_id);
        }
        catch (const std::exception& e)
        {
            problems.push_back("tasks[" + std::to_string(i) + "]: " + e.what());
            continue;
        }
        if (task.source_test.functionality_id != task.ground_truth.functionality_id)
            problems.push_back("task " + task.task_id + ": source and ground truth differ in functionality_id");
        ds.tasks.push_back(std::move(task));
    }
    if (!problems.empty())
        throw ValidationError(problems);
    return ds;
}

std::string transcript_path(const Dataset& ds, const MigrationTask& task)
{
    return (fs::path(ds.root) / "transcripts" / (task.task_id + ".json")).string();
}

BackendFactory scripted_backend_factory(const Dataset& ds)
{
    return [root = ds](const MigrationTask& task, const MigrationConfig&) -> std::unique_ptr<CompletionBackend> {
        return std::make_unique<ScriptedBackend>(load_transcript(read_file(transcript_path(root, task))));
    };
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

TaskOutcome run_task(const MigrationTask& task, const MigrationConfig& cfg, CompletionBackend& backend)
{
    TaskOutcome out;
    out.task_id = task.task_id;
    out.category = task.category;
    out.variant = cfg.variant_name();
    try
    {
        SimulatedDevice source(task.source_model);
        const auto log = record_execution_log(source, task.source_test);
        SimulatedDevice target(task.target_model);
        auto result = migrate(task.source_test, log, target, backend, cfg);
        SimulatedDevice fresh(task.target_model);
        out.verification = verify_result(result, task.ground_truth, fresh);
        out.status = result.status;
        out.iterations = result.iterations;
        out.action_attempts = result.action_attempts;
        out.vlm_calls = result.vlm_calls;
        out.images_sent = result.images_sent;
        out.wall_time = result.wall_time;
        out.error = result.error;
        out.result = std::move(result);
    }
    catch (const std::exception& e)
    {
        out.status = MigrationStatus::error;
        out.error = e.what();
        out.verification = {Label::failed, 1, e.what()};
    }
    return out;
}

BenchReport run_benchmark(const Dataset& ds, const BenchOptions& options, const BackendFactory& backends)
{
    struct Job
    {
        std::size_t variant;
        std::size_t task;
        int repeat;
    };
    std::vector<Job> jobs;
    for (std::size_t v = 0; v < options.variants.size(); ++v)
        for (std::size_t t = 0; t < ds.tasks.size(); ++t)
            for (int r = 0; r < std::max(options.repeat, 1); ++r)
                jobs.push_back({v, t, r});

    std::vector<TaskOutcome> outcomes(jobs.size());
    std::atomic<std::size_t> next {0};
    auto worker = [&] {
        for (auto i = next++; i < jobs.size(); i = next++)
        {
            const auto& job = jobs[i];
            const auto& task = ds.tasks[job.task];
            const auto& cfg = options.variants[job.variant];
            try
            {
                auto backend = backends(task, cfg);
                outcomes[i] = run_task(task, cfg, *backend);
            }
            catch (const std::exception& e)
            {
                outcomes[i].task_id = task.task_id;
                outcomes[i].category = task.category;
                outcomes[i].variant = cfg.variant_name();
                outcomes[i].error = e.what();
                outcomes[i].verification = {Label::failed, 1, e.what()};
            }
            outcomes[i].repeat = job.repeat;
        }
    };
    const int n_threads = std::clamp(options.jobs, 1, static_cast<int>(std::max<std::size_t>(jobs.size(), 1)));
    std::vector<std::thread> pool;
    for (int i = 1; i < n_threads; ++i)
        pool.emplace_back(worker);
    worker();
    for (auto& th: pool)
        th.join();

    if (!options.out_dir.empty())
    {
        for (std::size_t i = 0; i < jobs.size(); ++i)
        {
            const auto& o = outcomes[i];
            if (!o.result)
                continue;
            auto dir = fs::path(options.out_dir) / o.variant / o.task_id;
            if (options.repeat > 1)
                dir /= "run" + std::to_string(o.repeat + 1);
            fs::create_directories(dir);
            write_file((dir / "trace.jsonl").string(), trace_to_jsonl(o.result->trace));
            write_file((dir / "result.json").string(), result_to_json(*o.result).dump(2) + "\n");
            if (o.result->skeleton)
                write_file((dir / "skeleton.json").string(), save_skeleton(*o.result->skeleton));
        }
    }

    BenchReport rep;
    rep.variants = options.variants;
    rep.timing = options.timing;
    for (const auto& t: ds.tasks)
        if (std::find(rep.categories.begin(), rep.categories.end(), t.category) == rep.categories.end())
            rep.categories.push_back(t.category);
    std::sort(rep.categories.begin(), rep.categories.end());

    std::vector<std::size_t> order(jobs.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ja = jobs[a];
        const auto& jb = jobs[b];
        const auto& ta = ds.tasks[ja.task].task_id;
        const auto& tb = ds.tasks[jb.task].task_id;
        return std::tie(ja.variant, ta, ja.repeat) < std::tie(jb.variant, tb, jb.repeat);
    });
    for (auto i: order)
        rep.outcomes.push_back(std::move(outcomes[i]));
    return rep;
}

namespace
{

struct Tally
{
    int total = 0;
    int exact = 0;
    int anchor = 0;
    int manual = 0;
    int not_executable = 0;
    int failed = 0;

    void add(Label l)
    {
        ++total;
        switch (l)
        {
            case Label::success_exact_match: ++exact; break;
            case Label::success_anchor_found: ++anchor; break;
            case Label::needs_manual_review: ++manual; break;
            case Label::failed_not_executable: ++not_executable; break;
            case Label::failed: ++failed; break;
        }
    }

    // Percentage rounded to one decimal.
    [[nodiscard]] double rate() const
    {
        if (total == 0)
            return 0.0;
        return std::round(1000.0 * (exact + anchor) / total) / 10.0;
    }

    [[nodiscard]] ordered_json to_json() const
    {
        ordered_json j;
        j["total"] = total;
        j["success"] = exact + anchor;
        j["success_exact_match"] = exact;
        j["success_anchor_found"] = anchor;
        j["needs_manual_review"] = manual;
        j["failed_not_executable"] = not_executable;
        j["failed"] = failed;
        j["success_rate"] = rate();
        return j;
    }
};

std::string fixed1(double v)
{
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << v;
    return s.str();
}

} // namespace

ordered_json BenchReport::to_json() const
{
    ordered_json j;
    j["categories"] = categories;
    j["configurations"] = ordered_json::array();
    for (const auto& cfg: variants)
    {
        const auto name = cfg.variant_name();
        ordered_json c;
        c["name"] = name;
        c["config"] = config_to_json(cfg);
        c["tasks"] = ordered_json::array();
        std::map<std::string, Tally> per_cat;
        Tally all;
        double wall = 0.0;
        for (const auto& o: outcomes)
        {
            if (o.variant != name)
                continue;
            ordered_json t;
            t["task_id"] = o.task_id;
            t["category"] = o.category;
            t["repeat"] = o.repeat;
            t["status"] = to_string(o.status);
            t["label"] = to_string(o.verification.label);
            t["step_reached"] = o.verification.step_reached;
            t["iterations"] = o.iterations;
            t["action_attempts"] = o.action_attempts;
            t["vlm_calls"] = o.vlm_calls;
            t["images_sent"] = o.images_sent;
            t["error"] = o.error;
            c["tasks"].push_back(std::move(t));
            per_cat[o.category].add(o.verification.label);
            all.add(o.verification.label);
            wall += o.wall_time;
        }
        ordered_json pc = ordered_json::object();
        for (const auto& cat: categories)
            pc[cat] = per_cat[cat].to_json();
        c["per_category"] = std::move(pc);
        c["overall"] = all.to_json();
        if (timing)
            c["mean_wall_time_s"] = all.total ? std::round(10.0 * wall / all.total) / 10.0 : 0.0;
        else
            c["mean_wall_time_s"] = nullptr;
        j["configurations"].push_back(std::move(c));
    }
    return j;
}

std::string BenchReport::table() const
{
    std::vector<std::string> header {"Configuration"};
    for (const auto& c: categories)
        header.push_back(c);
    header.push_back("All");
    header.push_back("Review");
    header.push_back("Mean time (s)");

    std::vector<std::vector<std::string>> rows;
    for (const auto& cfg: variants)
    {
        const auto name = cfg.variant_name();
        std::map<std::string, Tally> per_cat;
        Tally all;
        double wall = 0.0;
        for (const auto& o: outcomes)
            if (o.variant == name)
            {
                per_cat[o.category].add(o.verification.label);
                all.add(o.verification.label);
                wall += o.wall_time;
            }
        std::vector<std::string> row {name};
        for (const auto& c: categories)
            row.push_back(fixed1(per_cat[c].rate()) + "%");
        row.push_back(fixed1(all.rate()) + "%");
        row.push_back(std::to_string(all.manual));
        row.push_back(timing ? fixed1(all.total ? wall / all.total : 0.0) : "-");
        rows.push_back(std::move(row));
    }

    std::vector<std::size_t> width(header.size());
    for (std::size_t i = 0; i < header.size(); ++i)
    {
        width[i] = header[i].size();
        for (const auto& r: rows)
            width[i] = std::max(width[i], r[i].size());
    }
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i)
        {
            out += cells[i];
            if (i + 1 < cells.size())
                out += std::string(width[i] - cells[i].size() + 2, ' ');
        }
        out += "\n";
    };
    line(header);
    std::size_t total_width = 0;
    for (auto w: width)
        total_width += w + 2;
    out += std::string(total_width - 2, '-') + "\n";
    for (const auto& r: rows)
        line(r);
    return out;
}

} // namespace guimig
