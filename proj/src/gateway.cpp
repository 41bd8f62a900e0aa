// SPDX-License-Identifier: Apache-2.0
#include <guimig/gateway.hpp>

#include <algorithm>

namespace guimig
{

using nlohmann::json;

std::string_view to_string(AgentKind kind) noexcept
{
    switch (kind)
    {
        case AgentKind::analyzer_augment: return "analyzer_augment";
        case AgentKind::analyzer_group: return "analyzer_group";
        case AgentKind::analyzer_classify: return "analyzer_classify";
        case AgentKind::completeness_checker: return "completeness_checker";
        case AgentKind::action_generator: return "action_generator";
        case AgentKind::feedback_action: return "feedback_action";
        case AgentKind::feedback_reflect: return "feedback_reflect";
        case AgentKind::oracle_generator: return "oracle_generator";
    }
    return "?";
}

std::optional<AgentKind> parse_agent_kind(std::string_view s) noexcept
{
    for (auto k: all_agent_kinds)
        if (to_string(k) == s)
            return k;
    return std::nullopt;
}

AssemblyError::AssemblyError(AgentKind kind, std::string section):
    Error("prompt for " + std::string(to_string(kind)) + " is missing section '" + section + "'"),
    _section(std::move(section))
{
}

GatewayError::GatewayError(std::string message, int retries):
    Error(message + " (retries: " + std::to_string(retries) + ")"), _retries(retries)
{
}

ReplyParseError::ReplyParseError(std::string reason, std::string raw):
    Error("unusable reply: " + reason), _reason(std::move(reason)), _raw(std::move(raw))
{
}

// ---------------------------------------------------------------------------
// Prompt tables
// ---------------------------------------------------------------------------

const SectionRule& section_rule(AgentKind kind)
{
    //                                       skel   src    tgt    hist   src# tgt#
    static const SectionRule augment {false, true, false, false, 1, 0};
    static const SectionRule group {false, true, false, false, 0, 0};
    static const SectionRule classify {true, true, false, false, 1, 0};
    static const SectionRule checker {true, true, true, true, 1, 1};
    static const SectionRule generator {true, false, true, true, 0, 1};
    static const SectionRule fb_action {true, false, true, true, 0, 2};
    static const SectionRule fb_reflect {true, false, true, true, 0, 0};
    static const SectionRule oracle {true, true, true, true, 0, 1};
    switch (kind)
    {
        case AgentKind::analyzer_augment: return augment;
        case AgentKind::analyzer_group: return group;
        case AgentKind::analyzer_classify: return classify;
        case AgentKind::completeness_checker: return checker;
        case AgentKind::action_generator: return generator;
        case AgentKind::feedback_action: return fb_action;
        case AgentKind::feedback_reflect: return fb_reflect;
        case AgentKind::oracle_generator: return oracle;
    }
    return augment;
}

const std::vector<std::string>& chain_of_thought_steps(AgentKind kind)
{
    static const std::map<AgentKind, std::vector<std::string>> steps {
        {AgentKind::analyzer_augment,
         {"Read each source action together with the attributes of the widget it touches.",
          "Compare the screenshots taken before and after the action to see what it changed.",
          "Write one description per action in the form '<action> the <widget> to <effect>'."}},
        {AgentKind::analyzer_group,
         {"Read the described actions in order.",
          "Find runs of consecutive actions that together serve a single intention.",
          "Give each run a short logic-step description; every action belongs to exactly one step."}},
        {AgentKind::analyzer_classify,
         {"For each step decide whether it directly realizes the target functionality (key).",
          "Steps that only handle app-specific behaviour such as tutorials, hints or input confirmation are "
          "supporting."}},
        {AgentKind::completeness_checker,
         {"Check step completeness: for each key step, decide from the event history and the target page whether "
          "it is done. For a step that is not done, double-check whether the target app needs it at all by "
          "comparing the source final page with the target page.",
          "Check the stop condition: compare the source final page with the target page and decide whether the "
          "same outcome is shown, allowing for different formatting.",
          "Infer navigation to the anchor page: if the steps are done but the outcome is not visible yet, decide "
          "whether extra actions are needed to reach the page that shows it."}},
        {AgentKind::action_generator,
         {"Check step completeness against the event history.",
          "Infer which step is currently under way.",
          "Infer which step should start next.",
          "Infer the connecting action that moves the app towards the next step."}},
        {AgentKind::feedback_action,
         {"Describe the consequences of the current action by comparing the pages before and after it.",
          "Check whether those consequences relate to the target functionality."}},
        {AgentKind::feedback_reflect,
         {"Review each accepted action and the page it led to.",
          "Find the earliest action that took the exploration away from the target functionality, if any."}},
        {AgentKind::oracle_generator,
         {"Compare the target page with the source final page and the source oracle.",
          "Pick the target widget that shows the outcome the source oracle checks.",
          "Choose the assertion kind and the expected value as displayed on the target page."}},
    };
    return steps.at(kind);
}

const std::vector<std::string>& instruction_items(AgentKind kind)
{
    static const std::map<AgentKind, std::vector<std::string>> items {
        {AgentKind::analyzer_augment,
         {"Describe every source action.", "Summarize the target functionality and the stop condition."}},
        {AgentKind::analyzer_group, {"Group the described actions into logic steps."}},
        {AgentKind::analyzer_classify, {"Label every step as key or supporting."}},
        {AgentKind::completeness_checker,
         {"Is it time to generate the oracle?", "Are extra actions needed to reach the anchor page?"}},
        {AgentKind::action_generator, {"Select a widget to interact with.", "Select an action to perform."}},
        {AgentKind::feedback_action,
         {"Decide whether to accept the action or not.", "Suggest alternative actions."}},
        {AgentKind::feedback_reflect, {"Name the earliest misleading action, or null if there is none."}},
        {AgentKind::oracle_generator, {"Write the closing assertion for the target test."}},
    };
    return items.at(kind);
}

std::string_view reply_format(AgentKind kind)
{
    switch (kind)
    {
        case AgentKind::analyzer_augment:
            return R"({"actions":[{"index":0,"description":"..."}],"functionality":"...","stop_condition":"..."})";
        case AgentKind::analyzer_group:
            return R"({"steps":[{"step_id":"s1","description":"...","action_range":[0,3]}]})";
        case AgentKind::analyzer_classify:
            return R"({"steps":[{"step_id":"s1","category":"key|supporting","reason":"..."}]})";
        case AgentKind::completeness_checker:
            return R"({"steps":[{"step_id":"s1","status":"pending|in_progress|done|waived","necessary":true,"justification":"..."}],"stop_condition_met":false,"complete":false,"extra_navigation_needed":false,"note":"..."})";
        case AgentKind::action_generator:
            return R"({"widget_label":3,"action":"tap|long_tap|swipe|set_text|key_event|wait","payload":"...","rationale":"..."} or {"no_action":true,"reason":"..."})";
        case AgentKind::feedback_action:
            return R"({"accept":true,"reason":"...","suggestions":["..."]})";
        case AgentKind::feedback_reflect: return R"({"misleading_index":2,"reason":"..."})";
        case AgentKind::oracle_generator:
            return R"({"kind":"exists|text_equals|text_contains","selector_attrs":{"resource_id":"..."},"expected":"..."})";
    }
    return "{}";
}

const PromptSection* PromptBundle::find(std::string_view name) const
{
    for (const auto& s: sections)
        if (s.name == name)
            return &s;
    return nullptr;
}

std::vector<std::string> PromptBundle::section_names() const
{
    std::vector<std::string> out;
    for (const auto& s: sections)
        out.push_back(s.name);
    return out;
}

namespace
{

std::string heading(const std::string& name)
{
    if (name == section::test_skeleton)
        return "Test Skeleton";
    if (name == section::source_context)
        return "Source App Context";
    if (name == section::target_context)
        return "Target App Context";
    if (name == section::event_history)
        return "Event History";
    if (name == section::chain_of_thought)
        return "Chain of Thought";
    return "Instruction";
}

std::string numbered(const std::vector<std::string>& items)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i)
        out += std::to_string(i + 1) + ". " + items[i] + "\n";
    return out;
}

} // namespace

std::string PromptBundle::text() const
{
    std::string out;
    for (const auto& s: sections)
        out += "## " + heading(s.name) + "\n" + s.text + (s.text.ends_with('\n') ? "" : "\n") + "\n";
    return out;
}

PromptBundle assemble_prompt(AgentKind kind, const PromptContext& ctx, bool no_vision)
{
    const auto& rule = section_rule(kind);
    PromptBundle b;
    b.kind = kind;

    auto take = [&](bool wanted, const std::optional<std::string>& value, std::string_view name) {
        if (!wanted)
            return;
        if (!value)
            throw AssemblyError(kind, std::string(name));
        b.sections.push_back({std::string(name), *value});
    };
    take(rule.test_skeleton, ctx.test_skeleton, section::test_skeleton);
    take(rule.source_context, ctx.source_context, section::source_context);
    take(rule.target_context, ctx.target_context, section::target_context);
    take(rule.event_history, ctx.event_history, section::event_history);

    b.sections.push_back({std::string(section::chain_of_thought),
                          "Think step by step before answering:\n" + numbered(chain_of_thought_steps(kind))});

    auto instruction = numbered(instruction_items(kind));
    if (!ctx.notes.empty())
    {
        instruction += "\nNotes:\n";
        for (const auto& n: ctx.notes)
            instruction += "- " + n + "\n";
    }
    instruction += "\nWrite your reasoning first, then end the reply with a fenced ```json block of the form:\n";
    instruction += std::string(reply_format(kind)) + "\n";
    b.sections.push_back({std::string(section::instruction), instruction});

    if (no_vision)
        return b;
    if (rule.source_context)
    {
        if (ctx.source_images.size() < rule.min_source_images)
            throw AssemblyError(kind, "source_context.images");
        b.images.insert(b.images.end(), ctx.source_images.begin(), ctx.source_images.end());
    }
    if (rule.target_context)
    {
        if (ctx.target_images.size() < rule.min_target_images)
            throw AssemblyError(kind, "target_context.images");
        b.images.insert(b.images.end(), ctx.target_images.begin(), ctx.target_images.end());
    }
    return b;
}

// ---------------------------------------------------------------------------
// Reply parsing
// ---------------------------------------------------------------------------

namespace
{

std::optional<std::string> last_fenced_block(const std::string& raw)
{
    // Collect fence lines (``` at line start, optionally indented) and pair them.
    std::vector<std::pair<std::size_t, std::size_t>> fences; // line start, line end
    std::size_t pos = 0;
    while (pos <= raw.size())
    {
        auto end = raw.find('\n', pos);
        if (end == std::string::npos)
            end = raw.size();
        auto line = std::string_view(raw).substr(pos, end - pos);
        const auto first = line.find_first_not_of(" \t");
        if (first != std::string_view::npos && line.substr(first).starts_with("```"))
            fences.emplace_back(pos, end);
        if (end == raw.size())
            break;
        pos = end + 1;
    }
    if (fences.size() < 2)
        return std::nullopt;
    const auto pairs = fences.size() / 2;
    const auto& open = fences[(pairs - 1) * 2];
    const auto& close = fences[(pairs - 1) * 2 + 1];
    const auto body_start = std::min(open.second + 1, raw.size());
    if (close.first < body_start)
        return std::string {};
    return raw.substr(body_start, close.first - body_start);
}

[[noreturn]] void bad(const std::string& reason, const std::string& raw)
{
    throw ReplyParseError(reason, raw);
}

const json& field(const json& j, const char* key, const std::string& raw, const std::string& where = "")
{
    auto it = j.find(key);
    if (it == j.end())
        bad("missing field '" + where + key + "'", raw);
    return *it;
}

void expect_string(const json& j, const char* key, const std::string& raw, bool non_empty = false,
                   const std::string& where = "")
{
    const auto& v = field(j, key, raw, where);
    if (!v.is_string())
        bad("field '" + where + key + "' must be a string", raw);
    if (non_empty && v.get<std::string>().empty())
        bad("field '" + where + key + "' must not be empty", raw);
}

void expect_bool(const json& j, const char* key, const std::string& raw)
{
    if (!field(j, key, raw).is_boolean())
        bad(std::string("field '") + key + "' must be a boolean", raw);
}

const json& expect_array(const json& j, const char* key, const std::string& raw)
{
    const auto& v = field(j, key, raw);
    if (!v.is_array())
        bad(std::string("field '") + key + "' must be an array", raw);
    return v;
}

void check_schema(const json& j, AgentKind kind, const std::string& raw)
{
    if (!j.is_object())
        bad("structured block must be a JSON object", raw);
    switch (kind)
    {
        case AgentKind::analyzer_augment:
        {
            const auto& actions = expect_array(j, "actions", raw);
            for (std::size_t i = 0; i < actions.size(); ++i)
            {
                const auto where = "actions[" + std::to_string(i) + "].";
                const auto& a = actions[i];
                if (!a.is_object() || !field(a, "index", raw, where).is_number_integer())
                    bad("field '" + where + "index' must be an integer", raw);
                expect_string(a, "description", raw, true, where);
            }
            expect_string(j, "functionality", raw, true);
            expect_string(j, "stop_condition", raw, true);
            return;
        }
        case AgentKind::analyzer_group:
        {
            const auto& steps = expect_array(j, "steps", raw);
            if (steps.empty())
                bad("steps must not be empty", raw);
            for (std::size_t i = 0; i < steps.size(); ++i)
            {
                const auto where = "steps[" + std::to_string(i) + "].";
                const auto& s = steps[i];
                if (!s.is_object())
                    bad("steps entries must be objects", raw);
                expect_string(s, "step_id", raw, true, where);
                expect_string(s, "description", raw, true, where);
                const auto& r = field(s, "action_range", raw, where);
                if (!r.is_array() || r.size() != 2 || !r[0].is_number_integer() || !r[1].is_number_integer())
                    bad("field '" + where + "action_range' must be [first,last]", raw);
            }
            return;
        }
        case AgentKind::analyzer_classify:
        {
            const auto& steps = expect_array(j, "steps", raw);
            for (std::size_t i = 0; i < steps.size(); ++i)
            {
                const auto where = "steps[" + std::to_string(i) + "].";
                const auto& s = steps[i];
                if (!s.is_object())
                    bad("steps entries must be objects", raw);
                expect_string(s, "step_id", raw, true, where);
                expect_string(s, "category", raw, true, where);
                const auto c = s["category"].get<std::string>();
                if (c != "key" && c != "supporting")
                    bad("field '" + where + "category' must be key or supporting", raw);
                expect_string(s, "reason", raw, false, where);
            }
            return;
        }
        case AgentKind::completeness_checker:
        {
            const auto& steps = expect_array(j, "steps", raw);
            for (std::size_t i = 0; i < steps.size(); ++i)
            {
                const auto where = "steps[" + std::to_string(i) + "].";
                const auto& s = steps[i];
                if (!s.is_object())
                    bad("steps entries must be objects", raw);
                expect_string(s, "step_id", raw, true, where);
                expect_string(s, "status", raw, true, where);
                const auto st = s["status"].get<std::string>();
                if (st != "pending" && st != "in_progress" && st != "done" && st != "waived")
                    bad("field '" + where + "status' has unknown value '" + st + "'", raw);
                if (auto n = s.find("necessary"); n != s.end() && !n->is_boolean())
                    bad("field '" + where + "necessary' must be a boolean", raw);
                if (auto n = s.find("justification"); n != s.end() && !n->is_string())
                    bad("field '" + where + "justification' must be a string", raw);
            }
            expect_bool(j, "stop_condition_met", raw);
            expect_bool(j, "complete", raw);
            expect_bool(j, "extra_navigation_needed", raw);
            expect_string(j, "note", raw);
            return;
        }
        case AgentKind::action_generator:
        {
            if (auto n = j.find("no_action"); n != j.end())
            {
                if (!n->is_boolean() || !n->get<bool>())
                    bad("field 'no_action' must be true when present", raw);
                expect_string(j, "reason", raw, true);
                return;
            }
            expect_string(j, "action", raw, true);
            const auto kind_name = j["action"].get<std::string>();
            auto k = parse_action_kind(kind_name);
            if (!k)
                bad("unknown action '" + kind_name + "'", raw);
            if (needs_selector(*k))
            {
                auto it = j.find("widget_label");
                if (it == j.end() || !it->is_number_integer())
                    bad("field 'widget_label' is required for " + kind_name, raw);
            }
            if (auto p = j.find("payload"); p != j.end() && !p->is_null() && !p->is_string())
                bad("field 'payload' must be a string", raw);
            if ((*k == ActionKind::set_text || *k == ActionKind::swipe || *k == ActionKind::key_event)
                && (!j.contains("payload") || !j["payload"].is_string()))
                bad("field 'payload' is required for " + kind_name, raw);
            expect_string(j, "rationale", raw);
            return;
        }
        case AgentKind::feedback_action:
        {
            // An acceptance may be a bare {"accept":true}.
            expect_bool(j, "accept", raw);
            if (!j["accept"].get<bool>() || j.contains("reason"))
                expect_string(j, "reason", raw, !j["accept"].get<bool>());
            if (j.contains("suggestions"))
                for (const auto& s: expect_array(j, "suggestions", raw))
                    if (!s.is_string())
                        bad("suggestions must be strings", raw);
            return;
        }
        case AgentKind::feedback_reflect:
        {
            const auto& idx = field(j, "misleading_index", raw);
            if (!idx.is_null() && !idx.is_number_integer())
                bad("field 'misleading_index' must be an integer or null", raw);
            expect_string(j, "reason", raw);
            return;
        }
        case AgentKind::oracle_generator:
        {
            expect_string(j, "kind", raw, true);
            const auto kind_name = j["kind"].get<std::string>();
            auto k = parse_oracle_kind(kind_name);
            if (!k)
                bad("unknown oracle kind '" + kind_name + "'", raw);
            const auto& attrs = field(j, "selector_attrs", raw);
            if (!attrs.is_object() || attrs.empty())
                bad("field 'selector_attrs' must be a non-empty object", raw);
            for (const auto& [key, value]: attrs.items())
            {
                if (key == "node_path")
                {
                    if (!value.is_array())
                        bad("selector_attrs.node_path must be an array", raw);
                }
                else if (key != "resource_id" && key != "text" && key != "content_desc")
                    bad("unknown selector attribute '" + key + "'", raw);
                else if (!value.is_string())
                    bad("selector_attrs." + key + " must be a string", raw);
            }
            expect_string(j, "expected", raw, *k != OracleKind::exists);
            return;
        }
    }
}

} // namespace

json parse_structured_reply(const VlmReply& reply, AgentKind kind)
{
    auto block = last_fenced_block(reply.raw);
    if (!block)
        bad("no fenced JSON block", reply.raw);
    json j;
    try
    {
        j = json::parse(*block);
    }
    catch (const json::parse_error& e)
    {
        bad(std::string("malformed JSON block: ") + e.what(), reply.raw);
    }
    check_schema(j, kind, reply.raw);
    return j;
}

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

std::vector<TranscriptEntry> load_transcript(std::string_view document)
{
    json j;
    try
    {
        j = json::parse(document);
    }
    catch (const json::parse_error& e)
    {
        throw ParseError(e.what(), 0, "transcript");
    }
    if (!j.is_array())
        throw ParseError("transcript must be an array", 0, "transcript");
    std::vector<TranscriptEntry> out;
    for (std::size_t i = 0; i < j.size(); ++i)
    {
        const auto path = "transcript[" + std::to_string(i) + "]";
        const auto& e = j[i];
        if (!e.is_object() || !e.contains("match") || !e.contains("reply") || !e["reply"].is_string())
            throw ParseError("entry needs match and reply", 0, path);
        const auto& m = e["match"];
        const auto kind_name = m.value("agent_kind", "");
        auto kind = parse_agent_kind(kind_name);
        if (!kind)
            throw ParseError("unknown agent_kind '" + kind_name + "'", 0, path + ".match.agent_kind");
        TranscriptEntry t;
        t.agent_kind = *kind;
        if (auto c = m.find("contains"); c != m.end() && c->is_string())
            t.contains = c->get<std::string>();
        t.reply = e["reply"].get<std::string>();
        out.push_back(std::move(t));
    }
    return out;
}

ScriptedBackend::ScriptedBackend(std::vector<TranscriptEntry> entries):
    _entries(std::move(entries)), _used(_entries.size(), false)
{
}

VlmReply ScriptedBackend::complete(const PromptBundle& bundle)
{
    const auto text = bundle.text();
    std::lock_guard lock(_mutex);
    for (std::size_t i = 0; i < _entries.size(); ++i)
    {
        if (_used[i] || _entries[i].agent_kind != bundle.kind)
            continue;
        if (_entries[i].contains && text.find(*_entries[i].contains) == std::string::npos)
            continue;
        _used[i] = true;
        return VlmReply {_entries[i].reply, std::nullopt, {}};
    }
    std::string msg = "scripted transcript has no entry for " + std::string(to_string(bundle.kind));
    auto next = std::find(_used.begin(), _used.end(), false);
    if (next == _used.end())
        msg += " (transcript exhausted after " + std::to_string(_entries.size()) + " entries)";
    else
    {
        const auto idx = static_cast<std::size_t>(next - _used.begin());
        msg += "; next unconsumed entry is #" + std::to_string(idx) + " ("
               + std::string(to_string(_entries[idx].agent_kind))
               + (_entries[idx].contains ? ", contains '" + *_entries[idx].contains + "'" : std::string {}) + ")";
    }
    throw ScriptError(msg);
}

std::size_t ScriptedBackend::consumed() const
{
    std::lock_guard lock(_mutex);
    return static_cast<std::size_t>(std::count(_used.begin(), _used.end(), true));
}

std::size_t ScriptedBackend::remaining() const
{
    std::lock_guard lock(_mutex);
    return static_cast<std::size_t>(std::count(_used.begin(), _used.end(), false));
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

Gateway::Gateway(CompletionBackend& backend, int requery_budget):
    _backend(backend), _requery_budget(std::max(requery_budget, 0))
{
}

void Gateway::set_observer(Observer observer)
{
    _observer = std::move(observer);
}

json Gateway::ask(const PromptBundle& bundle, const Validator& validate)
{
    PromptBundle current = bundle;
    std::string last_reason;
    for (int attempt = 1; attempt <= 1 + _requery_budget; ++attempt)
    {
        CallRecord record;
        record.kind = current.kind;
        record.attempt = attempt;
        record.sections = current.section_names();
        std::string digest_input = current.text();
        for (const auto& img: current.images)
        {
            record.image_labels.push_back(img.label);
            digest_input += img.label + img.caption + hex_digest(img.image.bytes);
        }
        record.prompt_digest = hex_digest(digest_input);
        {
            std::lock_guard lock(_mutex);
            ++_calls[current.kind];
            _images += static_cast<int>(current.images.size());
        }

        VlmReply reply;
        try
        {
            reply = _backend.complete(current);
        }
        catch (const Error& e)
        {
            record.error = e.what();
            if (_observer)
                _observer(record);
            throw;
        }
        record.raw = reply.raw;
        try
        {
            auto parsed = parse_structured_reply(reply, current.kind);
            if (validate)
                validate(parsed);
            record.accepted = true;
            if (_observer)
                _observer(record);
            return parsed;
        }
        catch (const ReplyParseError& e)
        {
            last_reason = e.reason();
            record.error = e.reason();
            if (_observer)
                _observer(record);
        }

        // Re-query with the rejection reason attached to the instruction.
        for (auto& s: current.sections)
            if (s.name == section::instruction)
                s.text += "\nYour previous reply was rejected: " + last_reason
                          + ". Answer again and follow the reply format exactly.\n";
    }
    throw GatewayError(std::string(to_string(bundle.kind)) + " gave no usable reply: " + last_reason, _requery_budget);
}

int Gateway::calls(AgentKind kind) const
{
    std::lock_guard lock(_mutex);
    auto it = _calls.find(kind);
    return it == _calls.end() ? 0 : it->second;
}

int Gateway::total_calls() const
{
    std::lock_guard lock(_mutex);
    int n = 0;
    for (const auto& [k, v]: _calls)
        n += v;
    return n;
}

int Gateway::images_sent() const
{
    std::lock_guard lock(_mutex);
    return _images;
}

} // namespace guimig
