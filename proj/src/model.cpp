// SPDX-License-Identifier: Apache-2.0
#include <guimig/model.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace guimig
{

using nlohmann::json;
using nlohmann::ordered_json;

namespace
{

std::string join_message(const std::vector<std::string>& v)
{
    std::string out = "validation failed: ";
    for (std::size_t i = 0; i < v.size(); ++i)
    {
        if (i)
            out += "; ";
        out += v[i];
    }
    return out;
}

} // namespace

ParseError::ParseError(std::string message, int line, std::string field):
    Error(line > 0 ? "line " + std::to_string(line) + ": " + message
                   : (field.empty() ? message : field + ": " + message)),
    _line(line),
    _field(std::move(field))
{
}

ValidationError::ValidationError(std::vector<std::string> violations):
    Error(join_message(violations)), _violations(std::move(violations))
{
}

// ---------------------------------------------------------------------------

bool same_content(const GuiPage& a, const GuiPage& b)
{
    return a.activity == b.activity && a.root == b.root && a.screenshot == b.screenshot;
}

const Widget* find_by_path(const Widget& root, const NodePath& path)
{
    const Widget* w = &root;
    for (int idx: path)
    {
        if (idx < 0 || static_cast<std::size_t>(idx) >= w->children.size())
            return nullptr;
        w = &w->children[static_cast<std::size_t>(idx)];
    }
    return w;
}

std::size_t count_nodes(const Widget& root)
{
    std::size_t n = 0;
    visit_preorder(root, [&](const Widget&) {
        ++n;
        return true;
    });
    return n;
}

void assign_node_paths(Widget& root, NodePath prefix)
{
    root.node_path = prefix;
    for (std::size_t i = 0; i < root.children.size(); ++i)
    {
        auto child = prefix;
        child.push_back(static_cast<int>(i));
        assign_node_paths(root.children[i], std::move(child));
    }
}

std::vector<std::string> validate_widget_tree(const Widget& root)
{
    std::vector<std::string> out;
    std::set<NodePath> seen;
    if (!root.node_path.empty())
        out.emplace_back("root node_path must be empty");
    visit_preorder(root, [&](const Widget& w) {
        const auto& b = w.bounds;
        if (b.x1 < 0 || b.y1 < 0 || b.x2 < b.x1 || b.y2 < b.y1)
            out.push_back("invalid bounds on node " + json(w.node_path).dump());
        if (!seen.insert(w.node_path).second)
            out.push_back("duplicate node_path " + json(w.node_path).dump());
        return true;
    });
    return out;
}

// ---------------------------------------------------------------------------

bool Selector::has_constraint() const noexcept
{
    return node_path.has_value() || (resource_id && !resource_id->empty()) || (text && !text->empty())
           || (content_desc && !content_desc->empty());
}

std::string Selector::describe() const
{
    std::string out;
    auto add = [&](std::string_view key, const std::optional<std::string>& v) {
        if (!v || v->empty())
            return;
        if (!out.empty())
            out += ", ";
        out += std::string(key) + "='" + *v + "'";
    };
    add("resource_id", resource_id);
    add("text", text);
    add("content_desc", content_desc);
    if (node_path)
    {
        if (!out.empty())
            out += ", ";
        out += "node_path=" + json(*node_path).dump();
    }
    return out.empty() ? "widget <any>" : "widget " + out;
}

const Widget* resolve(const Widget& root, const Selector& selector)
{
    if (selector.node_path)
        return find_by_path(root, *selector.node_path);
    if (!selector.has_constraint())
        return nullptr;

    auto matches = [](const std::optional<std::string>& want, const std::string& have) {
        return !want || want->empty() || *want == have;
    };
    const Widget* found = nullptr;
    visit_preorder(root, [&](const Widget& w) {
        if (matches(selector.resource_id, w.resource_id) && matches(selector.text, w.text)
            && matches(selector.content_desc, w.content_desc))
        {
            found = &w;
            return false;
        }
        return true;
    });
    return found;
}

std::string_view to_string(ActionKind kind) noexcept
{
    switch (kind)
    {
        case ActionKind::tap: return "tap";
        case ActionKind::long_tap: return "long_tap";
        case ActionKind::swipe: return "swipe";
        case ActionKind::set_text: return "set_text";
        case ActionKind::key_event: return "key_event";
        case ActionKind::wait: return "wait";
    }
    return "?";
}

std::string_view to_string(OracleKind kind) noexcept
{
    switch (kind)
    {
        case OracleKind::exists: return "exists";
        case OracleKind::text_equals: return "text_equals";
        case OracleKind::text_contains: return "text_contains";
    }
    return "?";
}

std::optional<ActionKind> parse_action_kind(std::string_view s) noexcept
{
    for (auto k: {ActionKind::tap, ActionKind::long_tap, ActionKind::swipe, ActionKind::set_text,
                  ActionKind::key_event, ActionKind::wait})
        if (to_string(k) == s)
            return k;
    return std::nullopt;
}

std::optional<OracleKind> parse_oracle_kind(std::string_view s) noexcept
{
    for (auto k: {OracleKind::exists, OracleKind::text_equals, OracleKind::text_contains})
        if (to_string(k) == s)
            return k;
    return std::nullopt;
}

bool needs_selector(ActionKind kind) noexcept
{
    return kind != ActionKind::key_event && kind != ActionKind::wait;
}

std::vector<Action> TestCase::actions() const
{
    std::vector<Action> out;
    for (const auto& e: events)
        if (const auto* a = std::get_if<Action>(&e))
            out.push_back(*a);
    return out;
}

std::vector<std::size_t> TestCase::action_event_indices() const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < events.size(); ++i)
        if (std::holds_alternative<Action>(events[i]))
            out.push_back(i);
    return out;
}

const OracleEvent* TestCase::terminal_oracle() const
{
    if (events.empty())
        return nullptr;
    return std::get_if<OracleEvent>(&events.back());
}

bool oracle_holds(const OracleEvent& oracle, const Widget& root)
{
    const Widget* w = resolve(root, oracle.selector);
    if (!w || !w->flags.visible)
        return false;
    switch (oracle.kind)
    {
        case OracleKind::exists: return true;
        case OracleKind::text_equals: return w->text == oracle.expected;
        case OracleKind::text_contains: return w->text.find(oracle.expected) != std::string::npos;
    }
    return false;
}

std::string describe(const Action& action)
{
    std::string out(to_string(action.kind));
    if (action.payload)
        out += " '" + *action.payload + "'";
    if (action.selector)
        out += " on " + action.selector->describe();
    return out;
}

std::string describe(const OracleEvent& oracle)
{
    std::string out = "assert " + std::string(to_string(oracle.kind)) + " on " + oracle.selector.describe();
    if (oracle.kind != OracleKind::exists)
        out += " expecting '" + oracle.expected + "'";
    return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::vector<std::string> validate_test_case(const TestCase& tc)
{
    std::vector<std::string> out;
    if (tc.events.empty())
    {
        out.emplace_back("test case has no events");
        return out;
    }
    for (std::size_t i = 0; i < tc.events.size(); ++i)
    {
        const auto at = " (event " + std::to_string(i) + ")";
        if (const auto* a = std::get_if<Action>(&tc.events[i]))
        {
            const auto kind = std::string(to_string(a->kind));
            if (needs_selector(a->kind))
            {
                if (!a->selector)
                    out.push_back(kind + " requires a selector" + at);
                else if (!a->selector->has_constraint())
                    out.push_back("selector has no constraint" + at);
            }
            else if (a->selector)
                out.push_back(kind + " takes no selector" + at);

            switch (a->kind)
            {
                case ActionKind::set_text:
                    if (!a->payload)
                        out.push_back("set_text requires payload" + at);
                    break;
                case ActionKind::swipe:
                    if (!a->payload
                        || (*a->payload != "up" && *a->payload != "down" && *a->payload != "left"
                            && *a->payload != "right"))
                        out.push_back("swipe requires a direction payload" + at);
                    break;
                case ActionKind::key_event:
                    if (!a->payload || a->payload->empty())
                        out.push_back("key_event requires a key name" + at);
                    break;
                case ActionKind::wait:
                    if (!a->payload || a->payload->empty()
                        || !std::all_of(a->payload->begin(), a->payload->end(), [](char c) {
                               return c >= '0' && c <= '9';
                           }))
                        out.push_back("wait requires milliseconds" + at);
                    break;
                default: break;
            }
        }
        else
        {
            const auto& o = std::get<OracleEvent>(tc.events[i]);
            if (o.kind != OracleKind::exists && o.expected.empty())
                out.push_back(std::string(to_string(o.kind)) + " requires non-empty expected" + at);
            if (!o.selector.has_constraint())
                out.push_back("selector has no constraint" + at);
        }
    }
    if (!std::holds_alternative<OracleEvent>(tc.events.back()))
        out.emplace_back("terminal event must be oracle");
    return out;
}

// ---------------------------------------------------------------------------
// JSON codec
// ---------------------------------------------------------------------------

namespace
{

const json& require(const json& j, const char* key, const std::string& path)
{
    if (!j.is_object())
        throw ParseError("expected object", 0, path);
    auto it = j.find(key);
    if (it == j.end())
        throw ParseError("missing field", 0, path.empty() ? key : path + "." + key);
    return *it;
}

std::string require_string(const json& j, const char* key, const std::string& path)
{
    const auto& v = require(j, key, path);
    if (!v.is_string())
        throw ParseError("expected string", 0, path.empty() ? key : path + "." + key);
    return v.get<std::string>();
}

std::optional<std::string> optional_string(const json& j, const char* key, const std::string& path)
{
    auto it = j.find(key);
    if (it == j.end() || it->is_null())
        return std::nullopt;
    if (!it->is_string())
        throw ParseError("expected string", 0, path + "." + key);
    return it->get<std::string>();
}

int line_of(std::string_view doc, std::size_t byte)
{
    byte = std::min(byte, doc.size());
    return 1 + static_cast<int>(std::count(doc.begin(), doc.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

} // namespace

ordered_json selector_to_json(const Selector& s)
{
    ordered_json j = ordered_json::object();
    if (s.node_path)
        j["node_path"] = *s.node_path;
    if (s.resource_id)
        j["resource_id"] = *s.resource_id;
    if (s.text)
        j["text"] = *s.text;
    if (s.content_desc)
        j["content_desc"] = *s.content_desc;
    return j;
}

Selector selector_from_json(const json& j, const std::string& field)
{
    if (!j.is_object())
        throw ParseError("expected object", 0, field);
    Selector s;
    if (auto it = j.find("node_path"); it != j.end() && !it->is_null())
    {
        if (!it->is_array())
            throw ParseError("expected array of integers", 0, field + ".node_path");
        NodePath p;
        for (const auto& v: *it)
        {
            if (!v.is_number_integer() || v.get<int>() < 0)
                throw ParseError("expected non-negative integer", 0, field + ".node_path");
            p.push_back(v.get<int>());
        }
        s.node_path = std::move(p);
    }
    s.resource_id = optional_string(j, "resource_id", field);
    s.text = optional_string(j, "text", field);
    s.content_desc = optional_string(j, "content_desc", field);
    return s;
}

ordered_json action_to_json(const Action& a)
{
    ordered_json j;
    j["type"] = "action";
    j["kind"] = to_string(a.kind);
    if (a.selector)
        j["selector"] = selector_to_json(*a.selector);
    if (a.payload)
        j["payload"] = *a.payload;
    return j;
}

ordered_json oracle_to_json(const OracleEvent& o)
{
    ordered_json j;
    j["type"] = "oracle";
    j["kind"] = to_string(o.kind);
    j["selector"] = selector_to_json(o.selector);
    j["expected"] = o.expected;
    return j;
}

ordered_json test_case_to_json(const TestCase& tc)
{
    ordered_json j;
    j["app_id"] = tc.app_id;
    j["category"] = tc.category;
    j["functionality_id"] = tc.functionality_id;
    j["events"] = ordered_json::array();
    for (const auto& e: tc.events)
    {
        if (const auto* a = std::get_if<Action>(&e))
            j["events"].push_back(action_to_json(*a));
        else
            j["events"].push_back(oracle_to_json(std::get<OracleEvent>(e)));
    }
    return j;
}

TestCase test_case_from_json(const json& j)
{
    TestCase tc;
    tc.app_id = require_string(j, "app_id", "");
    tc.category = require_string(j, "category", "");
    tc.functionality_id = require_string(j, "functionality_id", "");
    const auto& events = require(j, "events", "");
    if (!events.is_array())
        throw ParseError("expected array", 0, "events");
    for (std::size_t i = 0; i < events.size(); ++i)
    {
        const auto path = "events[" + std::to_string(i) + "]";
        const auto& e = events[i];
        const auto type = require_string(e, "type", path);
        const auto kind = require_string(e, "kind", path);
        if (type == "action")
        {
            Action a;
            auto k = parse_action_kind(kind);
            if (!k)
                throw ParseError("unknown action kind '" + kind + "'", 0, path + ".kind");
            a.kind = *k;
            if (auto it = e.find("selector"); it != e.end() && !it->is_null())
                a.selector = selector_from_json(*it, path + ".selector");
            a.payload = optional_string(e, "payload", path);
            tc.events.emplace_back(std::move(a));
        }
        else if (type == "oracle")
        {
            OracleEvent o;
            auto k = parse_oracle_kind(kind);
            if (!k)
                throw ParseError("unknown oracle kind '" + kind + "'", 0, path + ".kind");
            o.kind = *k;
            o.selector = selector_from_json(require(e, "selector", path), path + ".selector");
            o.expected = optional_string(e, "expected", path).value_or("");
            tc.events.emplace_back(std::move(o));
        }
        else
            throw ParseError("unknown event type '" + type + "'", 0, path + ".type");
    }
    return tc;
}

TestCase load_test_case(std::string_view document)
{
    json j;
    try
    {
        j = json::parse(document);
    }
    catch (const json::parse_error& e)
    {
        throw ParseError(e.what(), line_of(document, e.byte == 0 ? 0 : e.byte - 1), "");
    }
    auto tc = test_case_from_json(j);
    if (auto v = validate_test_case(tc); !v.empty())
        throw ValidationError(std::move(v));
    return tc;
}

std::string save_test_case(const TestCase& tc)
{
    return test_case_to_json(tc).dump(2) + "\n";
}

// Widgets / pages -------------------------------------------------------------

ordered_json widget_to_json(const Widget& w)
{
    ordered_json j;
    j["node_path"] = w.node_path;
    j["resource_id"] = w.resource_id;
    j["text"] = w.text;
    j["content_desc"] = w.content_desc;
    j["class_name"] = w.class_name;
    j["bounds"] = {w.bounds.x1, w.bounds.y1, w.bounds.x2, w.bounds.y2};
    j["flags"] = ordered_json {{"clickable", w.flags.clickable},     {"long_clickable", w.flags.long_clickable},
                               {"editable", w.flags.editable},       {"scrollable", w.flags.scrollable},
                               {"checkable", w.flags.checkable},     {"enabled", w.flags.enabled},
                               {"visible", w.flags.visible}};
    j["children"] = ordered_json::array();
    for (const auto& c: w.children)
        j["children"].push_back(widget_to_json(c));
    return j;
}

Widget widget_from_json(const json& j)
{
    Widget w;
    w.node_path = j.value("node_path", NodePath {});
    w.resource_id = j.value("resource_id", "");
    w.text = j.value("text", "");
    w.content_desc = j.value("content_desc", "");
    w.class_name = j.value("class_name", "");
    if (auto it = j.find("bounds"); it != j.end())
    {
        if (!it->is_array() || it->size() != 4)
            throw ParseError("bounds must be [x1,y1,x2,y2]", 0, "bounds");
        w.bounds = {(*it)[0].get<int>(), (*it)[1].get<int>(), (*it)[2].get<int>(), (*it)[3].get<int>()};
    }
    if (auto it = j.find("flags"); it != j.end())
    {
        const auto& f = *it;
        w.flags.clickable = f.value("clickable", false);
        w.flags.long_clickable = f.value("long_clickable", false);
        w.flags.editable = f.value("editable", false);
        w.flags.scrollable = f.value("scrollable", false);
        w.flags.checkable = f.value("checkable", false);
        w.flags.enabled = f.value("enabled", true);
        w.flags.visible = f.value("visible", true);
    }
    if (auto it = j.find("children"); it != j.end())
        for (const auto& c: *it)
            w.children.push_back(widget_from_json(c));
    return w;
}

ordered_json page_to_json(const GuiPage& page)
{
    ordered_json j;
    j["sequence_no"] = page.sequence_no;
    j["activity"] = page.activity;
    j["screenshot"] = ordered_json {{"format", page.screenshot.format},
                                    {"width", page.screenshot.width},
                                    {"height", page.screenshot.height},
                                    {"digest", hex_digest(page.screenshot.bytes)}};
    j["root"] = widget_to_json(page.root);
    return j;
}

GuiPage page_from_json(const json& j)
{
    GuiPage p;
    p.sequence_no = j.value("sequence_no", std::uint64_t {0});
    p.activity = j.value("activity", "");
    if (auto it = j.find("screenshot"); it != j.end())
    {
        p.screenshot.format = it->value("format", "");
        p.screenshot.width = it->value("width", 0);
        p.screenshot.height = it->value("height", 0);
    }
    p.root = widget_from_json(require(j, "root", "page"));
    return p;
}

// Logs ------------------------------------------------------------------------

const GuiPage& VisualExecutionLog::final_page() const
{
    if (entries.empty())
        throw Error("execution log is empty");
    return entries.back().after;
}

void save_log(const VisualExecutionLog& log, const std::string& directory)
{
    namespace fs = std::filesystem;
    fs::create_directories(directory);
    ordered_json doc;
    doc["entries"] = ordered_json::array();
    auto dump_page = [&](const GuiPage& page) {
        auto j = page_to_json(page);
        const auto file = "page_" + std::to_string(page.sequence_no) + "." + page.screenshot.format;
        write_file((fs::path(directory) / file).string(), page.screenshot.bytes);
        j["screenshot"]["file"] = file;
        return j;
    };
    for (const auto& e: log.entries)
    {
        ordered_json entry;
        entry["event_index"] = e.event_index;
        entry["before"] = dump_page(e.before);
        entry["after"] = dump_page(e.after);
        doc["entries"].push_back(std::move(entry));
    }
    write_file((fs::path(directory) / "log.json").string(), doc.dump(2) + "\n");
}

VisualExecutionLog load_log(const std::string& directory)
{
    namespace fs = std::filesystem;
    const auto text = read_file((fs::path(directory) / "log.json").string());
    json doc;
    try
    {
        doc = json::parse(text);
    }
    catch (const json::parse_error& e)
    {
        throw ParseError(e.what(), line_of(text, e.byte == 0 ? 0 : e.byte - 1), "log.json");
    }
    auto load_page = [&](const json& j) {
        auto page = page_from_json(j);
        const auto& shot = j.at("screenshot");
        if (auto f = shot.find("file"); f != shot.end())
            page.screenshot.bytes = read_file((fs::path(directory) / f->get<std::string>()).string());
        return page;
    };
    VisualExecutionLog log;
    for (const auto& e: require(doc, "entries", "log.json"))
        log.entries.push_back({e.at("event_index").get<std::size_t>(), load_page(e.at("before")),
                               load_page(e.at("after"))});
    return log;
}

// Helpers -------------------------------------------------------------------

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed) noexcept
{
    std::uint64_t h = seed;
    for (unsigned char c: data)
    {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex_digest(std::string_view data)
{
    static constexpr char digits[] = "0123456789abcdef";
    auto h = fnv1a(data);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i)
    {
        out[static_cast<std::size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

std::string trim(std::string_view s)
{
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
    while (!s.empty() && is_space(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && is_space(s.back()))
        s.remove_suffix(1);
    return std::string(s);
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

} // namespace guimig
