// SPDX-License-Identifier: Apache-2.0
#include <guimig/live_device.hpp>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <sstream>
#include <thread>

namespace guimig
{

namespace pt = boost::property_tree;

Bounds parse_uiautomator_bounds(std::string_view s)
{
    int v[4] = {0, 0, 0, 0};
    std::size_t pos = 0;
    for (int k = 0; k < 4; ++k)
    {
        const char open = (k % 2 == 0) ? '[' : ',';
        if (pos >= s.size() || s[pos] != open)
            throw ParseError("malformed bounds '" + std::string(s) + "'", 0, "bounds");
        ++pos;
        auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + s.size(), v[k]);
        if (ec != std::errc {})
            throw ParseError("malformed bounds '" + std::string(s) + "'", 0, "bounds");
        pos = static_cast<std::size_t>(ptr - s.data());
        if (k % 2 == 1)
        {
            if (pos >= s.size() || s[pos] != ']')
                throw ParseError("malformed bounds '" + std::string(s) + "'", 0, "bounds");
            ++pos;
        }
    }
    if (pos != s.size())
        throw ParseError("trailing characters in bounds '" + std::string(s) + "'", 0, "bounds");
    Bounds b {std::max(v[0], 0), std::max(v[1], 0), std::max(v[2], 0), std::max(v[3], 0)};
    b.x2 = std::max(b.x2, b.x1);
    b.y2 = std::max(b.y2, b.y1);
    return b;
}

namespace
{

bool attr_bool(const pt::ptree& attrs, const char* key, bool fallback)
{
    auto v = attrs.get_optional<std::string>(key);
    if (!v)
        return fallback;
    return *v == "true";
}

Widget node_to_widget(const pt::ptree& node)
{
    Widget w;
    static const pt::ptree empty;
    const auto& attrs = node.get_child("<xmlattr>", empty);
    w.resource_id = attrs.get("resource-id", "");
    w.text = attrs.get("text", "");
    w.content_desc = attrs.get("content-desc", "");
    w.class_name = attrs.get("class", "");
    if (auto b = attrs.get_optional<std::string>("bounds"))
        w.bounds = parse_uiautomator_bounds(*b);
    w.flags.clickable = attr_bool(attrs, "clickable", false);
    w.flags.long_clickable = attr_bool(attrs, "long-clickable", false);
    w.flags.scrollable = attr_bool(attrs, "scrollable", false);
    w.flags.checkable = attr_bool(attrs, "checkable", false);
    w.flags.enabled = attr_bool(attrs, "enabled", true);
    w.flags.visible = attr_bool(attrs, "visible-to-user", true);
    w.flags.editable = w.class_name.find("EditText") != std::string::npos;
    for (const auto& [tag, child]: node)
        if (tag == "node")
            w.children.push_back(node_to_widget(child));
    return w;
}

} // namespace

Widget parse_uiautomator_xml(std::string_view xml)
{
    pt::ptree tree;
    try
    {
        std::istringstream in {std::string(xml)};
        pt::read_xml(in, tree);
    }
    catch (const pt::xml_parser_error& e)
    {
        throw ParseError(e.message(), static_cast<int>(e.line()), "hierarchy");
    }
    auto hierarchy = tree.get_child_optional("hierarchy");
    if (!hierarchy)
        throw ParseError("missing <hierarchy> element", 0, "hierarchy");

    std::vector<Widget> top;
    for (const auto& [tag, child]: *hierarchy)
        if (tag == "node")
            top.push_back(node_to_widget(child));

    Widget root;
    if (top.size() == 1)
        root = std::move(top.front());
    else
    {
        root.class_name = "hierarchy";
        for (const auto& w: top)
        {
            root.bounds.x2 = std::max(root.bounds.x2, w.bounds.x2);
            root.bounds.y2 = std::max(root.bounds.y2, w.bounds.y2);
        }
        root.children = std::move(top);
    }
    assign_node_paths(root);
    return root;
}

// ---------------------------------------------------------------------------

struct LiveDevice::Impl
{
    explicit Impl(const LiveBridgeConfig& cfg): client(cfg.base_url)
    {
        const auto sec = cfg.timeout_ms / 1000;
        const auto usec = (cfg.timeout_ms % 1000) * 1000;
        client.set_connection_timeout(sec, usec);
        client.set_read_timeout(sec, usec);
        client.set_write_timeout(sec, usec);
    }

    httplib::Result checked(httplib::Result r, const std::string& what)
    {
        if (!r)
            throw TransportError("bridge " + what + ": " + httplib::to_string(r.error()));
        if (r->status < 200 || r->status >= 300)
            throw TransportError("bridge " + what + ": HTTP " + std::to_string(r->status));
        return r;
    }

    httplib::Client client;
};

LiveDevice::LiveDevice(std::string app_id, LiveBridgeConfig config):
    _app_id(std::move(app_id)), _impl(std::make_unique<Impl>(config))
{
}

LiveDevice::~LiveDevice() = default;

GuiPage LiveDevice::capture_page()
{
    auto xml = _impl->checked(_impl->client.Get("/hierarchy"), "GET /hierarchy");
    auto png = _impl->checked(_impl->client.Get("/screenshot"), "GET /screenshot");

    GuiPage page;
    page.root = parse_uiautomator_xml(xml->body);
    page.screenshot.bytes = png->body;
    page.screenshot.format = "png";
    auto header_int = [&](const char* key) {
        const auto v = png->get_header_value(key);
        int out = 0;
        std::from_chars(v.data(), v.data() + v.size(), out);
        return out;
    };
    page.screenshot.width = header_int("X-Width");
    page.screenshot.height = header_int("X-Height");
    if (page.screenshot.width == 0)
        page.screenshot.width = page.root.bounds.x2;
    if (page.screenshot.height == 0)
        page.screenshot.height = page.root.bounds.y2;
    if (auto act = _impl->client.Get("/activity"); act && act->status == 200)
        page.activity = act->body;
    page.sequence_no = ++_captures;
    return page;
}

ExecutionOutcome LiveDevice::execute_action(const Action& action)
{
    ExecutionOutcome out;
    out.before = capture_page();

    nlohmann::json body;
    body["kind"] = to_string(action.kind);
    if (action.kind == ActionKind::wait)
    {
        int ms = 0;
        const auto& p = action.payload.value_or("0");
        std::from_chars(p.data(), p.data() + p.size(), ms);
        std::this_thread::sleep_for(std::chrono::milliseconds(ms));
        out.executed = true;
        out.after = capture_page();
        return out;
    }
    if (action.kind == ActionKind::key_event)
        body["key"] = action.payload.value_or("");
    else
    {
        const Widget* target = action.selector ? resolve(out.before.root, *action.selector) : nullptr;
        if (!target)
        {
            out.failure_reason = "selector unresolved";
            out.after = out.before;
            return out;
        }
        const auto& b = target->bounds;
        body["x"] = b.center_x();
        body["y"] = b.center_y();
        if (action.kind == ActionKind::swipe)
        {
            const auto dir = action.payload.value_or("");
            int dx = 0, dy = 0;
            if (dir == "left")
                dx = -b.width() * 2 / 5;
            else if (dir == "right")
                dx = b.width() * 2 / 5;
            else if (dir == "up")
                dy = -b.height() * 2 / 5;
            else if (dir == "down")
                dy = b.height() * 2 / 5;
            body["x2"] = b.center_x() + dx;
            body["y2"] = b.center_y() + dy;
        }
        if (action.kind == ActionKind::set_text)
            body["text"] = action.payload.value_or("");
    }
    _impl->checked(_impl->client.Post("/input", body.dump(), "application/json"), "POST /input");
    out.executed = true;
    out.after = capture_page();
    return out;
}

void LiveDevice::reset()
{
    nlohmann::json body {{"app_id", _app_id}};
    _impl->checked(_impl->client.Post("/reset", body.dump(), "application/json"), "POST /reset");
}

} // namespace guimig
