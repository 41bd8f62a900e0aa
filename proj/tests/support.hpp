// SPDX-License-Identifier: Apache-2.0
// Shared helpers for the unit tests and the acceptance runner.
#pragma once

#include <guimig/analyzer.hpp>
#include <guimig/app_model.hpp>
#include <guimig/device.hpp>
#include <guimig/gateway.hpp>
#include <guimig/model.hpp>

#include <memory>
#include <random>
#include <set>
#include <string>

#ifndef GUIMIG_FIXTURES
#error "GUIMIG_FIXTURES must point at the fixtures directory"
#endif

namespace guimig::testing
{

inline std::string fixture(const std::string& rel)
{
    return std::string(GUIMIG_FIXTURES) + "/" + rel;
}

inline std::string bench_dir() { return fixture("bench"); }

inline std::shared_ptr<const AppModel> model(const std::string& rel)
{
    return std::make_shared<const AppModel>(load_app_model(read_file(fixture(rel))));
}

inline std::shared_ptr<const AppModel> tipcalc_a() { return model("bench/tip/tipcalc_a/model.json"); }
inline std::shared_ptr<const AppModel> tipcalc_b() { return model("bench/tip/tipcalc_b/model.json"); }
inline std::shared_ptr<const AppModel> tipcalc_dollar() { return model("bench/tip/tipcalc_dollar/model.json"); }
inline std::shared_ptr<const AppModel> tipcalc_tutorial() { return model("bench/tip/tipcalc_tutorial/model.json"); }

inline TestCase test_case(const std::string& rel) { return load_test_case(read_file(fixture(rel))); }

inline std::unique_ptr<ScriptedBackend> scripted(const std::string& rel)
{
    return std::make_unique<ScriptedBackend>(load_transcript(read_file(fixture(rel))));
}

/// Reply text in the shape the agents produce: prose, then a fenced block.
inline std::string reply(const nlohmann::json& block, const std::string& prose = "Thinking it over.")
{
    return prose + "\n```json\n" + block.dump() + "\n```\n";
}

/// Backend answering from a list of canned replies in order, whatever the kind.
class QueueBackend final: public CompletionBackend
{
  public:
    explicit QueueBackend(std::vector<std::string> replies): _replies(std::move(replies)) {}

    VlmReply complete(const PromptBundle& bundle) override
    {
        prompts.push_back(bundle);
        if (_next >= _replies.size())
            throw ScriptError("queue backend exhausted");
        return VlmReply {_replies[_next++], std::nullopt, {}};
    }

    std::vector<PromptBundle> prompts;

  private:
    std::vector<std::string> _replies;
    std::size_t _next = 0;
};

/// Skeleton of the keypad tip test, built without any VLM call: one key step
/// covering the four digit taps.
inline TestSkeleton keypad_skeleton()
{
    SimulatedDevice dev(tipcalc_a());
    const auto tc = test_case("bench/tip/tipcalc_a/tests/tip_total.json");
    const auto log = record_execution_log(dev, tc);
    TestSkeleton sk;
    sk.functionality = "compute the total of a 56.60 bill including a 15% tip";
    sk.key_steps.push_back({"s1", "input the bill amount 56.60", 0, 3, StepCategory::key,
                            log.entries.front().before.sequence_no, log.entries.back().after.sequence_no});
    sk.source_oracle = *tc.terminal_oracle();
    sk.stop_condition = synthesize_stop_condition(sk.source_oracle);
    sk.stop_condition_draft = "the total amount reads 65.09";
    sk.source_final_page = log.entries.back().after;
    return sk;
}

inline Selector by_id(const std::string& id)
{
    Selector s;
    s.resource_id = id;
    return s;
}

inline Selector by_text(const std::string& t)
{
    Selector s;
    s.text = t;
    return s;
}

inline Action tap(Selector s) { return Action {ActionKind::tap, std::move(s), std::nullopt}; }

inline Action set_text(Selector s, std::string payload)
{
    return Action {ActionKind::set_text, std::move(s), std::move(payload)};
}

inline OracleEvent text_equals(Selector s, std::string expected)
{
    return OracleEvent {OracleKind::text_equals, std::move(s), std::move(expected)};
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

inline int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
inline bool coin(Rng& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

/// Strings that stress the codec: empty, digits with trailing zeros,
/// quotes, backslashes, unicode, control characters.
inline std::string random_string(Rng& rng, bool allow_empty = true)
{
    static const std::vector<std::string> pieces {"5",   "56.60", "0",     "$ ",   "\"",   "\\",  "\n",  "tab\t",
                                                  "é",   "中",    "🙂",    " ",    "Buy",  "milk", "{}",  "[1]",
                                                  "/",   "\x01",  "0.10",  "-3",   "null", "true", " "};
    if (allow_empty && coin(rng, 0.2))
        return {};
    std::string s;
    const int n = uniform(rng, 1, 4);
    for (int i = 0; i < n; ++i)
        s += pieces[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(pieces.size()) - 1))];
    return s;
}

inline Selector random_selector(Rng& rng)
{
    Selector s;
    if (coin(rng, 0.4))
    {
        NodePath p;
        const int depth = uniform(rng, 0, 4);
        for (int i = 0; i < depth; ++i)
            p.push_back(uniform(rng, 0, 12));
        s.node_path = p;
    }
    if (coin(rng, 0.6))
        s.resource_id = random_string(rng);
    if (coin(rng, 0.5))
        s.text = random_string(rng);
    if (coin(rng, 0.3))
        s.content_desc = random_string(rng);
    if (!s.has_constraint())
        s.resource_id = "w" + std::to_string(uniform(rng, 0, 99));
    return s;
}

inline Action random_action(Rng& rng)
{
    static const ActionKind kinds[] = {ActionKind::tap,      ActionKind::long_tap,  ActionKind::swipe,
                                       ActionKind::set_text, ActionKind::key_event, ActionKind::wait};
    Action a;
    a.kind = kinds[uniform(rng, 0, 5)];
    if (needs_selector(a.kind))
        a.selector = random_selector(rng);
    if (a.kind == ActionKind::set_text)
        a.payload = random_string(rng);
    else if (a.kind == ActionKind::swipe)
        a.payload = coin(rng) ? "left" : "right";
    else if (a.kind == ActionKind::key_event)
        a.payload = coin(rng) ? "back" : random_string(rng, false);
    else if (a.kind == ActionKind::wait)
        a.payload = std::to_string(uniform(rng, 0, 5000));
    else if (coin(rng, 0.2))
        a.payload = random_string(rng);
    return a;
}

inline OracleEvent random_oracle(Rng& rng)
{
    OracleEvent o;
    o.kind = static_cast<OracleKind>(uniform(rng, 0, 2));
    o.selector = random_selector(rng);
    o.expected = random_string(rng, o.kind == OracleKind::exists);
    return o;
}

inline TestCase random_test_case(Rng& rng)
{
    TestCase tc;
    tc.app_id = "app_" + std::to_string(uniform(rng, 0, 999));
    tc.category = random_string(rng);
    tc.functionality_id = "f" + std::to_string(uniform(rng, 0, 99));
    const int n = uniform(rng, 0, 8);
    for (int i = 0; i < n; ++i)
    {
        if (coin(rng, 0.15))
            tc.events.emplace_back(random_oracle(rng));
        else
            tc.events.emplace_back(random_action(rng));
    }
    tc.events.emplace_back(random_oracle(rng));
    return tc;
}

/// Random page tree with `n` nodes in total. Bounds always valid, node paths
/// assigned afterwards.
inline Widget random_tree(Rng& rng, int n, double p_interactive = 0.3, double p_invisible = 0.08)
{
    static const char* classes[] = {"android.widget.FrameLayout", "android.widget.LinearLayout",
                                    "android.widget.TextView",    "android.widget.Button",
                                    "android.widget.EditText",    "android.widget.ImageView"};
    std::vector<Widget> nodes(static_cast<std::size_t>(n));
    std::vector<int> parent(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i)
    {
        auto& w = nodes[static_cast<std::size_t>(i)];
        w.class_name = classes[uniform(rng, 0, 5)];
        const int x1 = uniform(rng, 0, 150), y1 = uniform(rng, 0, 300);
        w.bounds = {x1, y1, x1 + uniform(rng, 0, 30), y1 + uniform(rng, 0, 20)};
        if (coin(rng, 0.4))
            w.text = "t" + std::to_string(i);
        if (coin(rng, 0.15))
            w.content_desc = "d" + std::to_string(i);
        if (coin(rng, 0.3))
            w.resource_id = "id" + std::to_string(i);
        w.flags.clickable = coin(rng, p_interactive);
        w.flags.editable = !w.flags.clickable && coin(rng, p_interactive / 4);
        w.flags.visible = i == 0 || !coin(rng, p_invisible);
        if (i > 0)
            parent[static_cast<std::size_t>(i)] = uniform(rng, 0, i - 1);
    }
    // Attach children bottom-up so each node is complete before it moves.
    for (int i = n - 1; i > 0; --i)
    {
        auto& p = nodes[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
        p.children.insert(p.children.begin(), std::move(nodes[static_cast<std::size_t>(i)]));
    }
    Widget root = std::move(nodes[0]);
    root.bounds = {0, 0, 180, 320};
    assign_node_paths(root);
    return root;
}

inline GuiPage page_of(Widget root)
{
    GuiPage p;
    p.sequence_no = 1;
    p.activity = ".Synthetic";
    p.root = std::move(root);
    return p;
}

/// Visible (including every ancestor) and interactive node paths, by brute force.
inline std::set<NodePath> visible_interactive(const Widget& w, bool ancestors_visible = true)
{
    std::set<NodePath> out;
    const bool vis = ancestors_visible && w.flags.visible;
    if (!vis)
        return out;
    if (w.flags.interactive())
        out.insert(w.node_path);
    for (const auto& c: w.children)
        for (auto& p: visible_interactive(c, true))
            out.insert(p);
    return out;
}

inline std::set<NodePath> all_paths(const Widget& w)
{
    std::set<NodePath> out;
    visit_preorder(w, [&](const Widget& x) {
        out.insert(x.node_path);
        return true;
    });
    return out;
}

/// Node paths needed to keep `targets`: the targets and all their prefixes.
inline std::set<NodePath> closure(const std::set<NodePath>& targets)
{
    std::set<NodePath> out {NodePath {}};
    for (const auto& t: targets)
        for (std::size_t k = 0; k <= t.size(); ++k)
            out.insert(NodePath(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(k)));
    return out;
}

} // namespace guimig::testing
