// SPDX-License-Identifier: Apache-2.0
#include <guimig/planner.hpp>

#include <set>

namespace guimig
{

using nlohmann::json;

std::string_view to_string(StepStatus s) noexcept
{
    switch (s)
    {
        case StepStatus::pending: return "pending";
        case StepStatus::in_progress: return "in_progress";
        case StepStatus::done: return "done";
        case StepStatus::waived: return "waived";
    }
    return "pending";
}

std::optional<StepStatus> parse_step_status(std::string_view s) noexcept
{
    for (auto v: {StepStatus::pending, StepStatus::in_progress, StepStatus::done, StepStatus::waived})
        if (to_string(v) == s)
            return v;
    return std::nullopt;
}

std::vector<Action> ExplorationState::actions() const
{
    std::vector<Action> out;
    out.reserve(history.size());
    for (const auto& h: history)
        out.push_back(h.action);
    return out;
}

ExplorationState initial_exploration_state(const TestSkeleton& skeleton, const GuiPage& page,
                                           std::size_t prune_budget)
{
    ExplorationState st;
    st.initial_page = page;
    for (const auto& k: skeleton.key_steps)
        st.step_status[k.step_id] = StepStatus::pending;
    observe_page(st, page, prune_budget);
    return st;
}

void observe_page(ExplorationState& state, const GuiPage& page, std::size_t prune_budget)
{
    state.page = page;
    state.pruned = prune_dom(page, prune_budget);
    state.annotated = annotate_screenshot(page, state.pruned);
}

std::map<std::string, std::string> status_strings(const ExplorationState& state)
{
    std::map<std::string, std::string> out;
    for (const auto& [id, st]: state.step_status)
        out[id] = std::string(to_string(st));
    return out;
}

std::string history_text(const ExplorationState& state)
{
    if (state.history.empty())
        return "No actions have been accepted yet.\n";
    std::string out;
    for (std::size_t i = 0; i < state.history.size(); ++i)
    {
        const auto& h = state.history[i];
        out += std::to_string(i + 1) + ". " + h.description;
        if (!h.outcome.empty())
            out += " -> " + h.outcome;
        out += "\n";
    }
    return out;
}

std::string target_page_text(const GuiPage& page, const Widget& pruned)
{
    std::string out;
    if (!page.activity.empty())
        out += "Activity: " + page.activity + "\n";
    const auto desc = describe_page(pruned);
    out += "Page description:\n" + (desc.empty() ? std::string("(no interactive widgets)\n") : desc);
    out += "Pruned DOM:\n" + serialize_dom(pruned);
    return out;
}

namespace
{

std::string source_final_text(const TestSkeleton& sk, std::size_t budget)
{
    const auto pruned = prune_dom(sk.source_final_page, budget);
    std::string out = "Source final page";
    if (!sk.source_final_page.activity.empty())
        out += " (" + sk.source_final_page.activity + ")";
    out += ":\n" + serialize_dom(pruned);
    out += "Source oracle: " + describe(sk.source_oracle) + "\n";
    return out;
}

PromptImage target_overlay(const ExplorationState& state, std::string caption)
{
    return {"target", std::move(caption), state.annotated.overlay};
}

} // namespace

// ---------------------------------------------------------------------------
// Completeness checking
// ---------------------------------------------------------------------------

CompletenessVerdict check_completeness(Gateway& gateway, const TestSkeleton& skeleton, ExplorationState& state,
                                       const PlannerOptions& options)
{
    PromptContext ctx;
    ctx.test_skeleton = skeleton_prompt_text(skeleton, status_strings(state));
    ctx.source_context = source_final_text(skeleton, options.prune_budget);
    ctx.source_images.push_back({"source", "final GUI page", skeleton.source_final_page.screenshot});
    ctx.target_context = "Current target page:\n" + target_page_text(state.page, state.pruned);
    ctx.target_images.push_back(target_overlay(state, "current page"));
    ctx.event_history = history_text(state);

    const auto current = state.step_status;
    std::map<std::string, StepStatus> merged;
    auto validate = [&](const json& j) {
        merged = current;
        std::set<std::string> seen;
        for (const auto& s: j["steps"])
        {
            const auto id = s["step_id"].get<std::string>();
            if (!current.count(id))
                throw ReplyParseError("unknown step_id '" + id + "'", j.dump());
            if (!seen.insert(id).second)
                throw ReplyParseError("step '" + id + "' reported twice", j.dump());
            const auto st = *parse_step_status(s["status"].get<std::string>());
            if (st == StepStatus::waived)
            {
                const bool unnecessary = s.contains("necessary") && s["necessary"] == false;
                const auto why = s.value("justification", std::string {});
                if (!unnecessary || trim(why).empty())
                    throw ReplyParseError("step '" + id
                                              + "' waived without the necessity check (need necessary=false and a "
                                                "justification)",
                                          j.dump());
            }
            auto& slot = merged[id];
            if (slot != StepStatus::done && slot != StepStatus::waived)
                slot = st;
        }
        if (j["complete"].get<bool>())
        {
            for (const auto& [id, st]: merged)
                if (st != StepStatus::done && st != StepStatus::waived)
                    throw ReplyParseError("reply claims completion while step '" + id + "' is "
                                              + std::string(to_string(st)),
                                          j.dump());
            if (!j["stop_condition_met"].get<bool>())
                throw ReplyParseError("reply claims completion while the stop condition is not met", j.dump());
        }
    };

    auto reply = gateway.ask(assemble_prompt(AgentKind::completeness_checker, ctx, options.no_vision), validate);

    for (const auto& [id, st]: merged)
    {
        if (st == StepStatus::pending)
            state.status_since.erase(id);
        else if (!state.status_since.count(id))
            state.status_since[id] = state.history.size();
    }
    state.step_status = merged;

    CompletenessVerdict v;
    v.complete = reply["complete"].get<bool>();
    v.step_status = merged;
    v.stop_condition_met = reply["stop_condition_met"].get<bool>();
    v.extra_navigation_needed = reply["extra_navigation_needed"].get<bool>();
    v.note = reply["note"].get<std::string>();
    return v;
}

// ---------------------------------------------------------------------------
// Action generation
// ---------------------------------------------------------------------------

Selector selector_for(const Widget& w)
{
    Selector s;
    s.node_path = w.node_path;
    if (!w.resource_id.empty())
        s.resource_id = w.resource_id;
    if (!w.content_desc.empty())
        s.content_desc = w.content_desc;
    // Field contents change as the test types into them.
    if (!w.text.empty() && !w.flags.editable)
        s.text = w.text;
    return s;
}

ActionProposal generate_action(Gateway& gateway, const TestSkeleton& skeleton, const ExplorationState& state,
                               const std::vector<std::string>& notes, const PlannerOptions& options)
{
    PromptContext ctx;
    ctx.test_skeleton = skeleton_prompt_text(skeleton, status_strings(state));
    ctx.target_context = "Current target page (labels refer to the numbered boxes):\n"
                         + target_page_text(state.page, state.pruned);
    ctx.target_images.push_back(target_overlay(state, "current page with numbered widgets"));
    ctx.event_history = history_text(state);
    ctx.notes = notes;

    ActionProposal out;
    auto validate = [&](const json& j) {
        out = {};
        if (j.value("no_action", false))
        {
            out.stuck_reason = j["reason"].get<std::string>();
            return;
        }
        CandidateAction c;
        c.action.kind = *parse_action_kind(j["action"].get<std::string>());
        c.rationale = j["rationale"].get<std::string>();
        if (j.value("follows_suggestion", false))
            c.source = CandidateSource::feedback_suggestion;
        if (needs_selector(c.action.kind))
        {
            const int label = j["widget_label"].get<int>();
            auto it = state.annotated.index_map.find(label);
            if (it == state.annotated.index_map.end())
                throw ReplyParseError("widget label " + std::to_string(label) + " is not on the current page ("
                                          + std::to_string(state.annotated.index_map.size()) + " labels)",
                                      j.dump());
            const Widget* w = find_by_path(state.page.root, it->second);
            if (!w)
                throw ReplyParseError("widget label " + std::to_string(label) + " does not resolve", j.dump());
            c.label = label;
            c.action.selector = selector_for(*w);
        }
        if (auto p = j.find("payload"); p != j.end() && p->is_string() && c.action.kind != ActionKind::tap
                                        && c.action.kind != ActionKind::long_tap)
            c.action.payload = p->get<std::string>();
        if (c.action.kind == ActionKind::wait && !c.action.payload)
            c.action.payload = "500";

        // Reuse the test-case rules so an emitted action is always well formed.
        TestCase probe;
        probe.events.emplace_back(c.action);
        probe.events.emplace_back(OracleEvent {OracleKind::exists, Selector {{}, "probe", {}, {}}, ""});
        if (auto violations = validate_test_case(probe); !violations.empty())
            throw ReplyParseError(violations.front(), j.dump());
        out.candidate = std::move(c);
    };
    gateway.ask(assemble_prompt(AgentKind::action_generator, ctx, options.no_vision), validate);
    return out;
}

// ---------------------------------------------------------------------------
// Oracle generation
// ---------------------------------------------------------------------------

namespace
{

Selector anchor_selector(const Widget& root, const Widget& w)
{
    if (!w.resource_id.empty())
    {
        Selector s;
        s.resource_id = w.resource_id;
        if (resolve(root, s) == &w)
            return s;
    }
    if (!w.content_desc.empty())
    {
        Selector s;
        s.content_desc = w.content_desc;
        if (resolve(root, s) == &w)
            return s;
    }
    Selector s;
    s.node_path = w.node_path;
    return s;
}

} // namespace

std::optional<OracleEvent> rule_path_oracle(const OracleEvent& source_oracle, const GuiPage& page)
{
    const auto expected = trim(source_oracle.expected);
    const auto& want_id = source_oracle.selector.resource_id;
    const auto& want_desc = source_oracle.selector.content_desc;
    const Widget* hit = nullptr;
    visit_preorder(page.root, [&](const Widget& w) {
        if (!w.flags.visible)
            return true;
        bool same = false;
        if (source_oracle.kind == OracleKind::exists)
            same = (want_id && !want_id->empty() && w.resource_id == *want_id)
                   || (want_desc && !want_desc->empty() && w.content_desc == *want_desc);
        else
            same = !expected.empty() && trim(w.text) == expected;
        if (same)
        {
            hit = &w;
            return false;
        }
        return true;
    });
    if (!hit)
        return std::nullopt;

    OracleEvent o;
    o.selector = anchor_selector(page.root, *hit);
    if (source_oracle.kind == OracleKind::exists)
        o.kind = OracleKind::exists;
    else
    {
        o.kind = OracleKind::text_equals;
        o.expected = hit->text;
    }
    return o;
}

OracleDecision generate_oracle(Gateway& gateway, const TestSkeleton& skeleton, const ExplorationState& state,
                               const PlannerOptions& options)
{
    if (auto rule = rule_path_oracle(skeleton.source_oracle, state.page))
        return {*rule, true};

    PromptContext ctx;
    ctx.test_skeleton = skeleton_prompt_text(skeleton, status_strings(state));
    ctx.source_context = source_final_text(skeleton, options.prune_budget);
    ctx.source_images.push_back({"source", "final GUI page", skeleton.source_final_page.screenshot});
    ctx.target_context = "Final target page:\n" + target_page_text(state.page, state.pruned);
    ctx.target_images.push_back(target_overlay(state, "final page"));
    ctx.event_history = history_text(state);

    OracleEvent oracle;
    auto validate = [&](const json& j) {
        OracleEvent o;
        o.kind = *parse_oracle_kind(j["kind"].get<std::string>());
        try
        {
            o.selector = selector_from_json(j["selector_attrs"], "selector_attrs");
        }
        catch (const ParseError& e)
        {
            throw ReplyParseError(e.what(), j.dump());
        }
        o.expected = j["expected"].get<std::string>();
        if (!o.selector.has_constraint())
            throw ReplyParseError("oracle selector has no constraint", j.dump());
        if (!resolve(state.page.root, o.selector))
            throw ReplyParseError("oracle selector " + o.selector.describe() + " does not resolve on the final page",
                                  j.dump());
        if (!oracle_holds(o, state.page.root))
            throw ReplyParseError("oracle does not hold on the final page", j.dump());
        oracle = std::move(o);
    };
    gateway.ask(assemble_prompt(AgentKind::oracle_generator, ctx, options.no_vision), validate);
    return {oracle, false};
}

} // namespace guimig
