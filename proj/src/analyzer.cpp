// SPDX-License-Identifier: Apache-2.0
#include <guimig/analyzer.hpp>
#include <guimig/page_view.hpp>

#include <set>

namespace guimig
{

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(StepCategory c) noexcept
{
    switch (c)
    {
        case StepCategory::key: return "key";
        case StepCategory::supporting: return "supporting";
        case StepCategory::unclassified: return "unclassified";
    }
    return "unclassified";
}

std::string synthesize_stop_condition(const OracleEvent& oracle)
{
    switch (oracle.kind)
    {
        case OracleKind::text_equals:
            return "the page shows '" + oracle.expected + "' on " + oracle.selector.describe();
        case OracleKind::text_contains:
            return "the page shows text containing '" + oracle.expected + "' on " + oracle.selector.describe();
        case OracleKind::exists: return "the page shows " + oracle.selector.describe();
    }
    return {};
}

namespace
{

PromptImage source_image(const GuiPage& page, std::string caption)
{
    return {"source", std::move(caption), page.screenshot};
}

std::string page_summary(const GuiPage& page, std::size_t budget)
{
    auto text = describe_page(prune_dom(page, budget));
    if (text.empty())
        text = "(no interactive widgets)\n";
    const auto pruned = prune_dom(page, budget);
    std::string visible;
    visit_preorder(pruned, [&](const Widget& w) {
        if (!w.flags.interactive() && !w.text.empty())
            visible += " '" + w.text + "'";
        return true;
    });
    if (!visible.empty())
        text += "texts:" + visible + "\n";
    return text;
}

std::string script_text(const TestCase& tc)
{
    std::string out = "Source test for app " + tc.app_id + " (" + tc.category + "/" + tc.functionality_id + "):\n";
    std::size_t action_no = 0;
    for (const auto& e: tc.events)
    {
        if (const auto* a = std::get_if<Action>(&e))
            out += "[" + std::to_string(action_no++) + "] " + describe(*a) + "\n";
        else
            out += "[oracle] " + describe(std::get<OracleEvent>(e)) + "\n";
    }
    return out;
}

std::string steps_text(const std::vector<LogicStep>& steps)
{
    std::string out;
    for (const auto& s: steps)
        out += "[" + s.step_id + "] " + s.description + " (actions " + std::to_string(s.first) + "-"
               + std::to_string(s.last) + ")\n";
    return out;
}

} // namespace

AugmentResult augment_actions(Gateway& gateway, const TestCase& tc, const VisualExecutionLog& log,
                              const AnalyzerOptions& options)
{
    const auto indices = tc.action_event_indices();
    if (log.entries.size() != indices.size())
        throw ValidationError({"log has " + std::to_string(log.entries.size()) + " entries for "
                               + std::to_string(indices.size()) + " actions"});
    const auto* oracle = tc.terminal_oracle();

    PromptContext ctx;
    std::string source = script_text(tc);
    for (std::size_t i = 0; i < log.entries.size(); ++i)
    {
        source += "\nBefore action " + std::to_string(i) + ":\n" + page_summary(log.entries[i].before, options.prune_budget);
        source += "After action " + std::to_string(i) + ":\n" + page_summary(log.entries[i].after, options.prune_budget);
        ctx.source_images.push_back(source_image(log.entries[i].before, "before action " + std::to_string(i)));
        ctx.source_images.push_back(source_image(log.entries[i].after, "after action " + std::to_string(i)));
    }
    if (oracle)
        source += "\nThe terminal oracle checks: " + describe(*oracle) + "\n";
    ctx.source_context = source;

    const auto n = indices.size();
    auto reply = gateway.ask(assemble_prompt(AgentKind::analyzer_augment, ctx, options.no_vision), [n](const json& j) {
        std::set<std::int64_t> seen;
        for (const auto& a: j["actions"])
        {
            const auto idx = a["index"].get<std::int64_t>();
            if (idx < 0 || static_cast<std::size_t>(idx) >= n)
                throw ReplyParseError("action index " + std::to_string(idx) + " out of range", j.dump());
            if (!seen.insert(idx).second)
                throw ReplyParseError("action index " + std::to_string(idx) + " described twice", j.dump());
        }
        if (seen.size() != n)
            throw ReplyParseError("expected " + std::to_string(n) + " action descriptions, got "
                                      + std::to_string(seen.size()),
                                  j.dump());
    });

    AugmentResult out;
    out.actions.resize(n);
    for (const auto& a: reply["actions"])
    {
        const auto idx = a["index"].get<std::size_t>();
        out.actions[idx] = {indices[idx], a["description"].get<std::string>()};
    }
    out.functionality = reply["functionality"].get<std::string>();
    out.stop_condition_draft = reply["stop_condition"].get<std::string>();
    return out;
}

std::vector<LogicStep> group_logic_steps(Gateway& gateway, const std::vector<DescribedAction>& described,
                                         const VisualExecutionLog& log, const AnalyzerOptions& options)
{
    if (described.empty())
        throw ValidationError({"no actions to group"});
    PromptContext ctx;
    std::string source = "Described source actions:\n";
    for (std::size_t i = 0; i < described.size(); ++i)
        source += "[" + std::to_string(i) + "] " + described[i].description + "\n";
    ctx.source_context = source;

    const auto n = described.size();
    auto reply = gateway.ask(assemble_prompt(AgentKind::analyzer_group, ctx, options.no_vision), [n](const json& j) {
        std::size_t next = 0;
        std::set<std::string> ids;
        for (const auto& s: j["steps"])
        {
            const auto f = s["action_range"][0].get<std::int64_t>();
            const auto l = s["action_range"][1].get<std::int64_t>();
            const auto id = s["step_id"].get<std::string>();
            if (!ids.insert(id).second)
                throw ReplyParseError("duplicate step_id '" + id + "'", j.dump());
            if (f != static_cast<std::int64_t>(next) || l < f || l >= static_cast<std::int64_t>(n))
                throw ReplyParseError("step ranges do not partition actions 0-" + std::to_string(n - 1) + " (step '"
                                          + id + "')",
                                      j.dump());
            next = static_cast<std::size_t>(l) + 1;
        }
        if (next != n)
            throw ReplyParseError("step ranges do not cover all " + std::to_string(n) + " actions", j.dump());
    });

    std::vector<LogicStep> steps;
    for (const auto& s: reply["steps"])
    {
        LogicStep step;
        step.step_id = s["step_id"].get<std::string>();
        step.description = s["description"].get<std::string>();
        step.first = s["action_range"][0].get<std::size_t>();
        step.last = s["action_range"][1].get<std::size_t>();
        if (step.last < log.entries.size())
        {
            step.before_seq = log.entries[step.first].before.sequence_no;
            step.after_seq = log.entries[step.last].after.sequence_no;
        }
        steps.push_back(std::move(step));
    }
    return steps;
}

std::vector<LogicStep> classify_steps(Gateway& gateway, const std::vector<LogicStep>& steps,
                                      const std::string& functionality, const VisualExecutionLog& log,
                                      const AnalyzerOptions& options)
{
    PromptContext ctx;
    ctx.test_skeleton = "Target functionality: " + functionality + "\nLogic steps:\n" + steps_text(steps);
    std::string source = "Pages around each step:\n";
    for (const auto& s: steps)
    {
        if (s.last >= log.entries.size())
            continue;
        source += "\n[" + s.step_id + "] before:\n" + page_summary(log.entries[s.first].before, options.prune_budget);
        source += "[" + s.step_id + "] after:\n" + page_summary(log.entries[s.last].after, options.prune_budget);
        ctx.source_images.push_back(source_image(log.entries[s.first].before, "step " + s.step_id + " before"));
        ctx.source_images.push_back(source_image(log.entries[s.last].after, "step " + s.step_id + " after"));
    }
    ctx.source_context = source;

    std::set<std::string> known;
    for (const auto& s: steps)
        known.insert(s.step_id);
    auto validate = [&known](const json& j) {
        std::set<std::string> seen;
        for (const auto& s: j["steps"])
        {
            const auto id = s["step_id"].get<std::string>();
            if (!known.count(id))
                throw ReplyParseError("unknown step_id '" + id + "'", j.dump());
            if (!seen.insert(id).second)
                throw ReplyParseError("step '" + id + "' classified twice", j.dump());
        }
        if (seen.size() != known.size())
            throw ReplyParseError("every step must be classified", j.dump());
    };

    const auto bundle = assemble_prompt(AgentKind::analyzer_classify, ctx, options.no_vision);
    std::map<std::string, int> supporting_votes;
    for (int round = 0; round < 2; ++round)
    {
        auto reply = gateway.ask(bundle, validate);
        for (const auto& s: reply["steps"])
            if (s["category"] == "supporting")
                ++supporting_votes[s["step_id"].get<std::string>()];
    }

    std::vector<LogicStep> kept;
    for (auto s: steps)
    {
        if (supporting_votes[s.step_id] == 2)
            continue;
        s.category = StepCategory::key;
        kept.push_back(std::move(s));
    }
    return kept;
}

TestSkeleton build_skeleton(Gateway& gateway, const TestCase& tc, const VisualExecutionLog& log,
                            const AnalyzerOptions& options)
{
    const auto* oracle = tc.terminal_oracle();
    if (!oracle)
        throw ValidationError({"terminal event must be oracle"});
    if (log.entries.empty())
        throw ValidationError({"source test has no actions"});
    if (log.entries.size() != tc.action_event_indices().size())
        throw ValidationError({"log has " + std::to_string(log.entries.size()) + " entries for "
                               + std::to_string(tc.action_event_indices().size()) + " actions"});

    TestSkeleton sk;
    sk.stop_condition = synthesize_stop_condition(*oracle);
    sk.source_oracle = *oracle;
    sk.source_final_page = log.final_page();

    // Without the analyzer the raw source test is all the planner gets: no
    // augmentation, no grouping, every action a key step.
    if (options.no_analyzer)
    {
        const auto actions = tc.actions();
        sk.functionality = tc.functionality_id;
        sk.stop_condition_draft = sk.stop_condition;
        for (std::size_t i = 0; i < actions.size(); ++i)
        {
            LogicStep s;
            s.step_id = "a" + std::to_string(i + 1);
            s.description = describe(actions[i]);
            s.first = s.last = i;
            s.category = StepCategory::key;
            s.before_seq = log.entries[i].before.sequence_no;
            s.after_seq = log.entries[i].after.sequence_no;
            sk.key_steps.push_back(std::move(s));
        }
        return sk;
    }

    auto augmented = augment_actions(gateway, tc, log, options);
    sk.functionality = augmented.functionality;
    sk.stop_condition_draft = augmented.stop_condition_draft;
    auto steps = group_logic_steps(gateway, augmented.actions, log, options);
    sk.key_steps = classify_steps(gateway, steps, sk.functionality, log, options);
    return sk;
}

ordered_json skeleton_to_json(const TestSkeleton& s)
{
    ordered_json j;
    j["functionality"] = s.functionality;
    j["key_steps"] = ordered_json::array();
    for (const auto& k: s.key_steps)
    {
        ordered_json step;
        step["step_id"] = k.step_id;
        step["description"] = k.description;
        step["action_range"] = {k.first, k.last};
        j["key_steps"].push_back(std::move(step));
    }
    j["stop_condition"] = s.stop_condition;
    j["stop_condition_draft"] = s.stop_condition_draft;
    j["source_final_page_ref"] = "seq:" + std::to_string(s.source_final_page.sequence_no);
    return j;
}

std::string save_skeleton(const TestSkeleton& s)
{
    return skeleton_to_json(s).dump(2) + "\n";
}

std::string skeleton_prompt_text(const TestSkeleton& s, const std::map<std::string, std::string>& status)
{
    std::string out = "Target functionality: " + s.functionality + "\nKey steps:\n";
    for (const auto& k: s.key_steps)
    {
        out += "[" + k.step_id + "] " + k.description;
        if (auto it = status.find(k.step_id); it != status.end())
            out += " (status: " + it->second + ")";
        out += "\n";
    }
    out += "Stop condition: " + s.stop_condition + "\n";
    if (!s.stop_condition_draft.empty() && s.stop_condition_draft != s.stop_condition)
        out += "Stop condition as described by the source analysis: " + s.stop_condition_draft + "\n";
    return out;
}

} // namespace guimig
