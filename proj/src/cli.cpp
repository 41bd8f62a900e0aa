// SPDX-License-Identifier: Apache-2.0
#include <guimig/cli.hpp>
#include <guimig/harness.hpp>
#include <guimig/live_device.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace guimig
{

namespace fs = std::filesystem;
using nlohmann::json;

namespace
{

/// Flags every subcommand accepts.
struct CommonFlags
{
    std::string config_file;
    std::string gateway;
    std::string device;
    bool no_vision = false;
    bool no_analyzer = false;
    bool no_feedback = false;
    std::optional<std::int64_t> seed;
    std::string out;
};

void add_common(CLI::App& cmd, CommonFlags& f)
{
    cmd.add_option("--config", f.config_file, "JSON file with MigrationConfig fields")->check(CLI::ExistingFile);
    cmd.add_option("--gateway", f.gateway, "scripted:<transcript.json> | remote");
    cmd.add_option("--device", f.device, "sim:<model.json> | live[:<bridge-url>]");
    cmd.add_flag("--no-vision", f.no_vision, "send no screenshots to the VLM");
    cmd.add_flag("--no-analyzer", f.no_analyzer, "skip the analyzer: one key step per raw source action");
    cmd.add_flag("--no-feedback", f.no_feedback, "accept every executed action");
    cmd.add_option("--seed", f.seed, "seed passed to the remote backend");
    cmd.add_option("--out", f.out, "output directory");
}

MigrationConfig make_config(const CommonFlags& f)
{
    MigrationConfig cfg;
    if (!f.config_file.empty())
        cfg = config_from_json(json::parse(read_file(f.config_file)), cfg);
    cfg.no_vision = cfg.no_vision || f.no_vision;
    cfg.no_analyzer = cfg.no_analyzer || f.no_analyzer;
    cfg.no_feedback = cfg.no_feedback || f.no_feedback;
    if (f.seed)
        cfg.seed = *f.seed;
    if (f.gateway == "remote")
        cfg.gateway = "remote";
    else if (f.gateway.starts_with("scripted"))
        cfg.gateway = "scripted";
    if (f.device.starts_with("live"))
        cfg.device = "live";
    else if (f.device.starts_with("sim"))
        cfg.device = "simulated";
    return cfg;
}

std::unique_ptr<CompletionBackend> make_backend(const std::string& spec, const MigrationConfig& cfg)
{
    if (spec == "remote")
    {
        auto rc = RemoteConfig::from_env(cfg.model);
        rc.seed = cfg.seed;
        return std::make_unique<RemoteBackend>(rc);
    }
    if (spec.starts_with("scripted:"))
        return std::make_unique<ScriptedBackend>(load_transcript(read_file(spec.substr(9))));
    throw CLI::ValidationError("--gateway", "expected scripted:<file> or remote, got '" + spec + "'");
}

std::unique_ptr<DeviceSession> make_device(const std::string& spec, const std::string& app_id)
{
    if (spec.starts_with("sim:"))
        return std::make_unique<SimulatedDevice>(
            std::make_shared<const AppModel>(load_app_model(read_file(spec.substr(4)))));
    if (spec == "live" || spec.starts_with("live:"))
    {
        LiveBridgeConfig bc;
        if (const char* env = std::getenv("DEVICE_BRIDGE_URL"))
            bc.base_url = env;
        if (spec.size() > 5)
            bc.base_url = spec.substr(5);
        return std::make_unique<LiveDevice>(app_id, bc);
    }
    throw CLI::ValidationError("--device", "expected sim:<model.json> or live[:<url>], got '" + spec + "'");
}

void require(const std::string& value, const char* flag)
{
    if (value.empty())
        throw CLI::RequiredError(flag);
}

fs::path out_dir(const CommonFlags& f, const char* fallback)
{
    fs::path p = f.out.empty() ? fs::path(fallback) : fs::path(f.out);
    fs::create_directories(p);
    return p;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app {"Migrate recorded GUI tests between similar Android apps", "guimig"};
    app.require_subcommand(1);

    CommonFlags analyze_f, migrate_f, bench_f, verify_f, replay_f;

    auto* analyze = app.add_subcommand("analyze", "build a test skeleton from a source test");
    std::string a_test, a_log;
    analyze->add_option("test", a_test, "source test-case file")->required()->check(CLI::ExistingFile);
    analyze->add_option("log", a_log, "recorded log directory (otherwise recorded on --device)");
    add_common(*analyze, analyze_f);

    auto* mig = app.add_subcommand("migrate", "migrate one source test to the target app on --device");
    std::string m_test, m_log, m_source_device, m_target_app;
    mig->add_option("test", m_test, "source test-case file")->required()->check(CLI::ExistingFile);
    mig->add_option("log", m_log, "source log directory");
    mig->add_option("--source-device", m_source_device, "record the source log on sim:<model.json> instead");
    mig->add_option("--target-app", m_target_app, "target app id (live devices)");
    add_common(*mig, migrate_f);

    auto* bench = app.add_subcommand("bench", "run every task of a dataset");
    std::string b_dataset;
    int b_jobs = 1, b_repeat = 1;
    bool b_ablations = false;
    bool b_no_timing = false;
    bench->add_option("dataset", b_dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
    bench->add_option("--jobs", b_jobs, "parallel tasks")->check(CLI::PositiveNumber);
    bench->add_option("--repeat", b_repeat, "runs per task")->check(CLI::PositiveNumber);
    bench->add_flag("--ablations", b_ablations, "also run the no-vision, no-analyzer and no-feedback variants");
    bench->add_flag("--no-timing", b_no_timing, "write the mean runtime as null (reproducible reports)");
    add_common(*bench, bench_f);

    auto* verify = app.add_subcommand("verify", "label an existing migration result");
    std::string v_result, v_truth;
    verify->add_option("result", v_result, "result.json from migrate")->required()->check(CLI::ExistingFile);
    verify->add_option("--ground-truth", v_truth, "ground-truth test for the target")
        ->required()
        ->check(CLI::ExistingFile);
    add_common(*verify, verify_f);

    auto* replay_cmd = app.add_subcommand("replay", "execute a test-case file on --device");
    std::string r_test, r_log_dir;
    replay_cmd->add_option("test", r_test, "test-case file")->required()->check(CLI::ExistingFile);
    replay_cmd->add_option("--record-log", r_log_dir, "write the visual execution log here");
    add_common(*replay_cmd, replay_f);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e, out, err);
    }
    catch (const CLI::CallForAllHelp& e)
    {
        return app.exit(e, out, err);
    }
    catch (const CLI::ParseError& e)
    {
        err << "error: " << e.what() << "\n";
        err << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return 2;
    }

    try
    {
        if (*analyze)
        {
            const auto cfg = make_config(analyze_f);
            const auto tc = load_test_case(read_file(a_test));
            VisualExecutionLog log;
            if (!a_log.empty())
                log = load_log(a_log);
            else
            {
                require(analyze_f.device, "--device");
                auto dev = make_device(analyze_f.device, tc.app_id);
                log = record_execution_log(*dev, tc);
            }
            require(analyze_f.gateway, "--gateway");
            auto backend = make_backend(analyze_f.gateway, cfg);
            Gateway gw(*backend, cfg.requery_budget);
            const auto sk =
                build_skeleton(gw, tc, log, {cfg.no_analyzer, cfg.no_vision, cfg.prune_budget});
            const auto text = save_skeleton(sk);
            if (!analyze_f.out.empty())
                write_file((out_dir(analyze_f, ".") / "skeleton.json").string(), text);
            out << text;
            return 0;
        }

        if (*mig)
        {
            auto cfg = make_config(migrate_f);
            require(migrate_f.device, "--device");
            require(migrate_f.gateway, "--gateway");
            const auto tc = load_test_case(read_file(m_test));
            VisualExecutionLog log;
            if (!m_log.empty())
                log = load_log(m_log);
            else if (!m_source_device.empty())
            {
                auto src = make_device(m_source_device, tc.app_id);
                log = record_execution_log(*src, tc);
            }
            else
                throw CLI::RequiredError("log directory or --source-device");
            auto target = make_device(migrate_f.device, m_target_app);
            auto backend = make_backend(migrate_f.gateway, cfg);
            const auto result = migrate(tc, log, *target, *backend, cfg);

            const auto dir = out_dir(migrate_f, "out");
            write_file((dir / "result.json").string(), result_to_json(result).dump(2) + "\n");
            write_file((dir / "trace.jsonl").string(), trace_to_jsonl(result.trace));
            if (result.skeleton)
                write_file((dir / "skeleton.json").string(), save_skeleton(*result.skeleton));
            write_file((dir / "generated_test.json").string(), test_case_to_json(result.generated).dump(2) + "\n");
            out << "status: " << to_string(result.status) << "\n";
            if (!result.error.empty())
                out << "error: " << result.error << "\n";
            for (const auto& e: result.generated.events)
                out << "  " << (std::holds_alternative<Action>(e) ? describe(std::get<Action>(e))
                                                                  : describe(std::get<OracleEvent>(e)))
                    << "\n";
            out << "vlm calls: " << result.vlm_calls << ", wall time: " << result.wall_time << " s\n";
            out << "wrote " << dir.string() << "\n";
            return result.status == MigrationStatus::completed ? 0 : 1;
        }

        if (*bench)
        {
            const auto base = make_config(bench_f);
            const auto ds = load_dataset(b_dataset);
            BenchOptions opt;
            opt.jobs = b_jobs;
            opt.repeat = b_repeat;
            opt.timing = !b_no_timing;
            opt.variants = {base};
            if (b_ablations)
            {
                auto v = base;
                v.no_vision = true;
                opt.variants.push_back(v);
                v = base;
                v.no_analyzer = true;
                opt.variants.push_back(v);
                v = base;
                v.no_feedback = true;
                opt.variants.push_back(v);
            }
            const auto dir = out_dir(bench_f, "bench_out");
            opt.out_dir = dir.string();

            BackendFactory factory;
            if (bench_f.gateway.empty() || bench_f.gateway == "scripted")
                factory = scripted_backend_factory(ds);
            else
            {
                const auto spec = bench_f.gateway;
                factory = [spec](const MigrationTask&, const MigrationConfig& cfg) { return make_backend(spec, cfg); };
            }
            const auto rep = run_benchmark(ds, opt, factory);
            write_file((dir / "report.json").string(), rep.to_json().dump(2) + "\n");
            const auto table = rep.table();
            write_file((dir / "report.txt").string(), table);
            out << table;
            return 0;
        }

        if (*verify)
        {
            require(verify_f.device, "--device");
            const auto result = result_from_json(json::parse(read_file(v_result)));
            const auto truth = load_test_case(read_file(v_truth));
            auto target = make_device(verify_f.device, truth.app_id);
            const auto label = verify_result(result, truth, *target);
            out << to_string(label.label) << " (step " << label.step_reached << "): " << label.detail << "\n";
            return is_success(label.label) ? 0 : 1;
        }

        if (*replay_cmd)
        {
            require(replay_f.device, "--device");
            const auto tc = load_test_case(read_file(r_test));
            auto dev = make_device(replay_f.device, tc.app_id);
            try
            {
                const auto log = record_execution_log(*dev, tc);
                if (!r_log_dir.empty())
                    save_log(log, r_log_dir);
                out << "replayed " << log.entries.size() << " actions; all oracles hold\n";
                return 0;
            }
            catch (const ValidationError& e)
            {
                out << "replay failed: " << e.what() << "\n";
                return 1;
            }
        }
    }
    catch (const CLI::Error& e)
    {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace guimig
