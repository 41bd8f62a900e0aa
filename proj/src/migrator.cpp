// SPDX-License-Identifier: Apache-2.0
#include <guimig/migrator.hpp>

#include <chrono>

namespace guimig
{

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<std::string> MigrationConfig::violations() const
{
    std::vector<std::string> out;
    auto check = [&](long long v, const char* name) {
        if (v < 1)
            out.push_back(std::string(name) + " must be at least 1");
    };
    check(max_iterations, "max_iterations");
    check(max_rejections_per_iteration, "max_rejections_per_iteration");
    check(reflection_threshold, "reflection_threshold");
    check(static_cast<long long>(prune_budget), "prune_budget");
    check(requery_budget, "requery_budget");
    if (gateway != "scripted" && gateway != "remote")
        out.push_back("gateway must be scripted or remote");
    if (device != "simulated" && device != "live")
        out.push_back("device must be simulated or live");
    return out;
}

std::string MigrationConfig::variant_name() const
{
    std::string out;
    auto add = [&](bool on, const char* name) {
        if (!on)
            return;
        if (!out.empty())
            out += "+";
        out += name;
    };
    add(no_vision, "no_vision");
    add(no_analyzer, "no_analyzer");
    add(no_feedback, "no_feedback");
    return out.empty() ? "full" : out;
}

MigrationConfig config_from_json(const json& j, MigrationConfig c)
{
    if (!j.is_object())
        throw ParseError("config must be a JSON object", 0, "config");
    try
    {
        c.max_iterations = j.value("max_iterations", c.max_iterations);
        c.max_rejections_per_iteration = j.value("max_rejections_per_iteration", c.max_rejections_per_iteration);
        c.reflection_threshold = j.value("reflection_threshold", c.reflection_threshold);
        c.prune_budget = j.value("prune_budget", c.prune_budget);
        c.requery_budget = j.value("requery_budget", c.requery_budget);
        c.no_vision = j.value("no_vision", c.no_vision);
        c.no_analyzer = j.value("no_analyzer", c.no_analyzer);
        c.no_feedback = j.value("no_feedback", c.no_feedback);
        c.model = j.value("model", c.model);
        c.gateway = j.value("gateway", c.gateway);
        c.device = j.value("device", c.device);
        c.seed = j.value("seed", c.seed);
    }
    catch (const json::type_error& e)
    {
        throw ParseError(e.what(), 0, "config");
    }
    if (auto v = c.violations(); !v.empty())
        throw ValidationError(v);
    return c;
}

ordered_json config_to_json(const MigrationConfig& c)
{
    ordered_json j;
    j["max_iterations"] = c.max_iterations;
    j["max_rejections_per_iteration"] = c.max_rejections_per_iteration;
    j["reflection_threshold"] = c.reflection_threshold;
    j["prune_budget"] = c.prune_budget;
    j["requery_budget"] = c.requery_budget;
    j["no_vision"] = c.no_vision;
    j["no_analyzer"] = c.no_analyzer;
    j["no_feedback"] = c.no_feedback;
    j["model"] = c.model;
    j["gateway"] = c.gateway;
    j["device"] = c.device;
    j["seed"] = c.seed;
    return j;
}

std::string_view to_string(MigrationStatus s) noexcept
{
    switch (s)
    {
        case MigrationStatus::completed: return "completed";
        case MigrationStatus::budget_exhausted: return "budget_exhausted";
        case MigrationStatus::error: return "error";
    }
    return "error";
}

std::optional<MigrationStatus> parse_migration_status(std::string_view s) noexcept
{
    for (auto v: {MigrationStatus::completed, MigrationStatus::budget_exhausted, MigrationStatus::error})
        if (to_string(v) == s)
            return v;
    return std::nullopt;
}

namespace
{

class Run
{
  public:
    Run(const TestCase& source, const VisualExecutionLog& log, DeviceSession& target, CompletionBackend& backend,
        const MigrationConfig& cfg):
        _source(source), _log(log), _target(target), _gateway(backend, cfg.requery_budget), _cfg(cfg)
    {
        _gateway.set_observer([this](const CallRecord& c) {
            ordered_json p;
            p["agent_kind"] = to_string(c.kind);
            p["attempt"] = c.attempt;
            p["sections"] = c.sections;
            p["images"] = c.image_labels.size();
            p["image_labels"] = c.image_labels;
            p["prompt_digest"] = c.prompt_digest;
            p["accepted"] = c.accepted;
            p["error"] = c.error;
            p["raw"] = c.raw;
            emit("vlm_call", std::move(p));
        });
    }

    MigrationResult run()
    {
        const auto t0 = std::chrono::steady_clock::now();
        _result.generated.app_id = _target.app_id();
        _result.generated.category = _source.category;
        _result.generated.functionality_id = _source.functionality_id;
        emit("config", config_to_json(_cfg));
        try
        {
            loop();
        }
        catch (const Error& e)
        {
            _result.status = MigrationStatus::error;
            _result.error = e.what();
        }
        catch (const std::exception& e)
        {
            _result.status = MigrationStatus::error;
            _result.error = std::string("internal: ") + e.what();
        }
        _result.vlm_calls = _gateway.total_calls();
        _result.images_sent = _gateway.images_sent();
        _result.generated.events.clear();
        for (const auto& h: _state.history)
            _result.generated.events.emplace_back(h.action);
        if (_oracle)
            _result.generated.events.emplace_back(*_oracle);

        ordered_json p;
        p["status"] = to_string(_result.status);
        p["error"] = _result.error;
        p["iterations"] = _result.iterations;
        p["action_attempts"] = _result.action_attempts;
        p["vlm_calls"] = _result.vlm_calls;
        p["images_sent"] = _result.images_sent;
        p["generated"] = test_case_to_json(_result.generated);
        emit("result", std::move(p));
        _result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return std::move(_result);
    }

  private:
    void emit(std::string kind, ordered_json payload)
    {
        _result.trace.push_back({_clock++, std::move(kind), std::move(payload)});
    }

    void see(const GuiPage& page) { _result.recorded_pages.push_back(page); }

    void loop()
    {
        AnalyzerOptions aopt {_cfg.no_analyzer, _cfg.no_vision, _cfg.prune_budget};
        _skeleton = build_skeleton(_gateway, _source, _log, aopt);
        _result.skeleton = _skeleton;
        emit("skeleton", skeleton_to_json(_skeleton));

        const auto page0 = _target.capture_page();
        see(page0);
        _state = initial_exploration_state(_skeleton, page0, _cfg.prune_budget);

        for (int iter = 1; iter <= _cfg.max_iterations; ++iter)
        {
            _state.iteration = iter;
            _result.iterations = iter;
            const auto calls_before = _gateway.total_calls();
            {
                ordered_json p;
                p["iteration"] = iter;
                p["history_length"] = _state.history.size();
                p["page_seq"] = _state.page.sequence_no;
                emit("iteration", std::move(p));
            }

            const auto verdict = check_completeness(_gateway, _skeleton, _state, popt());
            {
                ordered_json p;
                p["complete"] = verdict.complete;
                p["stop_condition_met"] = verdict.stop_condition_met;
                p["extra_navigation_needed"] = verdict.extra_navigation_needed;
                p["note"] = verdict.note;
                ordered_json st = ordered_json::object();
                for (const auto& [id, s]: verdict.step_status)
                    st[id] = to_string(s);
                p["step_status"] = std::move(st);
                emit("completeness", std::move(p));
            }

            if (verdict.complete)
            {
                auto decision = generate_oracle(_gateway, _skeleton, _state, popt());
                _oracle = decision.oracle;
                _result.oracle_rule_path = decision.rule_path;
                ordered_json p;
                p["oracle"] = oracle_to_json(decision.oracle);
                p["rule_path"] = decision.rule_path;
                emit("oracle", std::move(p));
                end_iteration(iter, false, calls_before);
                _result.status = MigrationStatus::completed;
                return;
            }

            std::vector<std::string> notes;
            if (verdict.extra_navigation_needed)
                notes.push_back("The key steps look done but the expected outcome is not visible yet. Navigate to "
                                "the page where " + _skeleton.stop_condition + ".");

            const bool accepted = iterate(notes);
            end_iteration(iter, accepted, calls_before);
            if (_aborted)
            {
                _result.status = MigrationStatus::budget_exhausted;
                return;
            }
        }
        _result.status = MigrationStatus::budget_exhausted;
    }

    // Proposes, executes and assesses actions until one is accepted or the
    // per-iteration rejection budget runs out.
    bool iterate(std::vector<std::string>& notes)
    {
        int rejections = 0;
        int empty_reflections = 0;
        while (rejections < _cfg.max_rejections_per_iteration)
        {
            auto proposal = generate_action(_gateway, _skeleton, _state, notes, popt());
            if (!proposal.candidate)
            {
                ordered_json p;
                p["reason"] = proposal.stuck_reason;
                emit("stuck", std::move(p));
                ++rejections;
                ++_state.consecutive_rejections;
                notes.push_back("A previous attempt found no action to take: " + proposal.stuck_reason);
                if (!_cfg.no_feedback && !reflect(notes, empty_reflections))
                    return false;
                continue;
            }

            const auto& cand = *proposal.candidate;
            ++_result.action_attempts;
            {
                ordered_json p;
                p["action"] = action_to_json(cand.action);
                p["label"] = cand.label ? json(*cand.label) : json(nullptr);
                p["rationale"] = cand.rationale;
                p["source"] = cand.source == CandidateSource::vlm ? "vlm" : "feedback_suggestion";
                emit("candidate", std::move(p));
            }
            auto outcome = _target.execute_action(cand.action);
            see(outcome.after);
            {
                ordered_json p;
                p["executed"] = outcome.executed;
                p["failure_reason"] = outcome.failure_reason;
                p["before_seq"] = outcome.before.sequence_no;
                p["after_seq"] = outcome.after.sequence_no;
                emit("execution", std::move(p));
            }

            FeedbackVerdict fb;
            if (_cfg.no_feedback)
            {
                fb.accepted = outcome.executed;
                fb.reason = outcome.executed ? "feedback disabled" : "not executable";
            }
            else
                fb = assess_action(_gateway, _skeleton, _state, cand.action, outcome, fopt());
            {
                ordered_json p;
                p["accepted"] = fb.accepted;
                p["reason"] = fb.reason;
                p["suggestions"] = fb.suggestions;
                p["consulted"] = fb.consulted;
                emit("feedback", std::move(p));
            }

            if (fb.accepted)
            {
                _state.history.push_back({cand.action, describe(cand.action), fb.reason, outcome.after});
                observe_page(_state, outcome.after, _cfg.prune_budget);
                _state.consecutive_rejections = 0;
                return true;
            }

            ++rejections;
            ++_state.consecutive_rejections;
            std::string note = "Rejected: " + describe(cand.action) + " (" + fb.reason + ")";
            for (const auto& s: fb.suggestions)
                note += "; suggestion: " + s;
            notes.push_back(std::move(note));
            if (outcome.executed)
                undo();
            if (!_cfg.no_feedback && _state.consecutive_rejections >= _cfg.reflection_threshold
                && !reflect(notes, empty_reflections))
                return false;
        }
        return false;
    }

    // Returns false when the run must stop.
    bool reflect(std::vector<std::string>& notes, int& empty_reflections)
    {
        auto r = reflect_test(_gateway, _skeleton, _state, fopt());
        {
            ordered_json p;
            p["misleading_index"] = r.misleading_index ? json(*r.misleading_index) : json(nullptr);
            p["reason"] = r.reason;
            p["consulted"] = r.consulted;
            emit("reflection", std::move(p));
        }
        if (r.misleading_index)
        {
            const auto rep = apply_truncation(_state, r, _target, _cfg.prune_budget);
            see(_state.page);
            ordered_json p;
            p["kept"] = rep.kept;
            p["dropped"] = rep.dropped;
            p["page_matches_record"] = rep.page_matches_record;
            p["reverted_steps"] = rep.reverted_steps;
            emit("truncation", std::move(p));
            notes.clear();
            notes.push_back("The exploration was restarted before accepted action " + std::to_string(*r.misleading_index)
                            + ": " + r.reason);
            return true;
        }
        if (++empty_reflections >= 2)
        {
            _aborted = true;
            return false;
        }
        notes.push_back("Reviewing the history found no misleading action; try a different action.");
        return true;
    }

    // Restores the device to the last accepted page after a rejected action.
    void undo()
    {
        const auto outcomes = replay_prefix(_target, _state.actions());
        for (const auto& o: outcomes)
            if (!o.executed)
                throw MigrationError("accepted history no longer replays: " + o.failure_reason);
        const auto page = _target.capture_page();
        see(page);
        const auto& recorded = _state.history.empty() ? _state.initial_page : _state.history.back().after;
        ordered_json p;
        p["history_length"] = _state.history.size();
        p["page_matches_record"] = same_content(page, recorded);
        emit("undo", std::move(p));
        observe_page(_state, page, _cfg.prune_budget);
    }

    void end_iteration(int iter, bool accepted, int calls_before)
    {
        ordered_json p;
        p["iteration"] = iter;
        p["accepted"] = accepted;
        p["vlm_calls"] = _gateway.total_calls() - calls_before;
        p["history_length"] = _state.history.size();
        emit("iteration_end", std::move(p));
    }

    PlannerOptions popt() const { return {_cfg.no_vision, _cfg.prune_budget}; }
    FeedbackOptions fopt() const { return {_cfg.no_vision, _cfg.prune_budget}; }

    const TestCase& _source;
    const VisualExecutionLog& _log;
    DeviceSession& _target;
    Gateway _gateway;
    const MigrationConfig& _cfg;

    MigrationResult _result;
    TestSkeleton _skeleton;
    ExplorationState _state;
    std::optional<OracleEvent> _oracle;
    std::uint64_t _clock = 0;
    bool _aborted = false;
};

} // namespace

MigrationResult migrate(const TestCase& source, const VisualExecutionLog& log, DeviceSession& target,
                        CompletionBackend& backend, const MigrationConfig& cfg)
{
    if (auto v = cfg.violations(); !v.empty())
        throw ValidationError(v);
    return Run(source, log, target, backend, cfg).run();
}

std::string trace_to_jsonl(const std::vector<TraceRecord>& trace)
{
    std::string out;
    for (const auto& r: trace)
    {
        ordered_json j;
        j["ts"] = r.ts;
        j["kind"] = r.kind;
        j["payload"] = r.payload;
        out += j.dump() + "\n";
    }
    return out;
}

ordered_json result_to_json(const MigrationResult& r)
{
    ordered_json j;
    j["status"] = to_string(r.status);
    j["error"] = r.error;
    j["generated"] = test_case_to_json(r.generated);
    j["skeleton"] = r.skeleton ? ordered_json(skeleton_to_json(*r.skeleton)) : ordered_json(nullptr);
    j["iterations"] = r.iterations;
    j["action_attempts"] = r.action_attempts;
    j["vlm_calls"] = r.vlm_calls;
    j["images_sent"] = r.images_sent;
    j["oracle_rule_path"] = r.oracle_rule_path;
    j["wall_time_s"] = r.wall_time;
    j["recorded_pages"] = ordered_json::array();
    for (const auto& p: r.recorded_pages)
        j["recorded_pages"].push_back(page_to_json(p));
    return j;
}

MigrationResult result_from_json(const json& j)
{
    MigrationResult r;
    try
    {
        auto status = parse_migration_status(j.at("status").get<std::string>());
        if (!status)
            throw ParseError("unknown status", 0, "status");
        r.status = *status;
        r.error = j.value("error", "");
        // A partial test has no terminal oracle, so no validation here.
        r.generated = test_case_from_json(j.at("generated"));
        r.iterations = j.value("iterations", 0);
        r.action_attempts = j.value("action_attempts", 0);
        r.vlm_calls = j.value("vlm_calls", 0);
        r.images_sent = j.value("images_sent", 0);
        r.oracle_rule_path = j.value("oracle_rule_path", false);
        r.wall_time = j.value("wall_time_s", 0.0);
        for (const auto& p: j.at("recorded_pages"))
            r.recorded_pages.push_back(page_from_json(p));
    }
    catch (const json::exception& e)
    {
        throw ParseError(e.what(), 0, "result");
    }
    return r;
}

} // namespace guimig
