// SPDX-License-Identifier: Apache-2.0
#include <guimig/feedback.hpp>

namespace guimig
{

using nlohmann::json;

namespace
{

std::string page_brief(const GuiPage& page, std::size_t budget)
{
    const auto pruned = prune_dom(page, budget);
    std::string out;
    if (!page.activity.empty())
        out += "Activity: " + page.activity + "\n";
    out += serialize_dom(pruned);
    return out;
}

} // namespace

FeedbackVerdict assess_action(Gateway& gateway, const TestSkeleton& skeleton, const ExplorationState& state,
                              const Action& action, const ExecutionOutcome& outcome, const FeedbackOptions& options)
{
    FeedbackVerdict v;
    if (!outcome.executed)
    {
        v.reason = "not executable";
        if (!outcome.failure_reason.empty())
            v.suggestions.push_back("the previous action failed: " + outcome.failure_reason);
        return v;
    }

    PromptContext ctx;
    ctx.test_skeleton = skeleton_prompt_text(skeleton, status_strings(state));
    ctx.target_context = "Current action: " + describe(action) + "\n\nPage before the action:\n"
                         + page_brief(outcome.before, options.prune_budget) + "\nPage after the action:\n"
                         + page_brief(outcome.after, options.prune_budget);
    ctx.target_images.push_back({"target", "page before action", outcome.before.screenshot});
    ctx.target_images.push_back({"target", "page after action", outcome.after.screenshot});
    ctx.event_history = history_text(state);

    v.consulted = true;
    try
    {
        auto reply = gateway.ask(assemble_prompt(AgentKind::feedback_action, ctx, options.no_vision));
        v.accepted = reply["accept"].get<bool>();
        v.reason = reply.value("reason", "");
        for (const auto& s: reply.value("suggestions", nlohmann::json::array()))
            v.suggestions.push_back(s.get<std::string>());
    }
    catch (const GatewayError&)
    {
        v = {false, "feedback unavailable", {}, true};
    }
    return v;
}

Reflection reflect_test(Gateway& gateway, const TestSkeleton& skeleton, const ExplorationState& state,
                        const FeedbackOptions& options)
{
    Reflection r;
    if (state.history.empty())
    {
        r.reason = "no accepted actions to review";
        return r;
    }

    PromptContext ctx;
    ctx.test_skeleton = skeleton_prompt_text(skeleton, status_strings(state));
    ctx.target_context = "Current target page:\n" + target_page_text(state.page, state.pruned);
    std::string dialog;
    for (std::size_t i = 0; i < state.history.size(); ++i)
    {
        const auto& h = state.history[i];
        dialog += std::to_string(i + 1) + ". " + h.description + "\n   resulting page:\n";
        const auto brief = page_brief(h.after, options.prune_budget);
        std::size_t pos = 0;
        while (pos < brief.size())
        {
            auto end = brief.find('\n', pos);
            if (end == std::string::npos)
                end = brief.size();
            dialog += "   " + brief.substr(pos, end - pos) + "\n";
            pos = end + 1;
        }
        ctx.target_images.push_back({"target", "after accepted action " + std::to_string(i + 1), h.after.screenshot});
    }
    ctx.event_history = dialog;

    const auto n = state.history.size();
    auto reply = gateway.ask(assemble_prompt(AgentKind::feedback_reflect, ctx, options.no_vision), [n](const json& j) {
        const auto& idx = j["misleading_index"];
        if (idx.is_null())
            return;
        const auto v = idx.get<std::int64_t>();
        if (v < 1 || static_cast<std::size_t>(v) > n)
            throw ReplyParseError("misleading_index " + std::to_string(v) + " outside history 1.."
                                      + std::to_string(n),
                                  j.dump());
    });
    r.consulted = true;
    r.reason = reply["reason"].get<std::string>();
    if (!reply["misleading_index"].is_null())
        r.misleading_index = reply["misleading_index"].get<std::size_t>();
    return r;
}

TruncationReport apply_truncation(ExplorationState& state, const Reflection& r, DeviceSession& session,
                                  std::size_t prune_budget)
{
    if (!r.misleading_index || *r.misleading_index < 1 || *r.misleading_index > state.history.size())
        throw MigrationError("truncation needs a misleading index within the history");

    TruncationReport rep;
    rep.kept = *r.misleading_index - 1;
    rep.dropped = state.history.size() - rep.kept;
    state.history.resize(rep.kept);

    const auto outcomes = replay_prefix(session, state.actions());
    for (std::size_t i = 0; i < outcomes.size(); ++i)
        if (!outcomes[i].executed)
            throw MigrationError("accepted action " + std::to_string(i + 1)
                                 + " no longer replays: " + outcomes[i].failure_reason);
    if (outcomes.size() != state.history.size())
        throw MigrationError("replay stopped early");

    const auto page = session.capture_page();
    const auto& recorded = state.history.empty() ? state.initial_page : state.history.back().after;
    rep.page_matches_record = same_content(page, recorded);
    observe_page(state, page, prune_budget);

    for (auto it = state.status_since.begin(); it != state.status_since.end();)
    {
        if (it->second > rep.kept)
        {
            state.step_status[it->first] = StepStatus::pending;
            rep.reverted_steps.push_back(it->first);
            it = state.status_since.erase(it);
        }
        else
            ++it;
    }
    state.consecutive_rejections = 0;
    return rep;
}

} // namespace guimig
