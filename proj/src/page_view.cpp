// SPDX-License-Identifier: Apache-2.0
#include <guimig/page_view.hpp>
#include <guimig/raster.hpp>

#include <algorithm>
#include <sstream>

namespace guimig
{

namespace
{

std::optional<Widget> drop_invisible(const Widget& w)
{
    if (!w.flags.visible)
        return std::nullopt;
    Widget out = w;
    out.children.clear();
    for (const auto& c: w.children)
        if (auto kept = drop_invisible(c))
            out.children.push_back(std::move(*kept));
    return out;
}

bool decorative(const Widget& w)
{
    return w.text.empty() && w.content_desc.empty() && !w.flags.interactive() && w.children.empty();
}

void drop_decorative(Widget& w)
{
    for (auto& c: w.children)
        drop_decorative(c);
    std::erase_if(w.children, [](const Widget& c) { return decorative(c); });
}

struct LeafPick
{
    Widget* parent = nullptr;
    std::size_t index = 0;
    int depth = -1;
};

// Pre-order walk; later nodes win ties so the scan keeps the last candidate.
void find_leaf(Widget& w, int depth, bool want_non_interactive, LeafPick& best)
{
    for (std::size_t i = 0; i < w.children.size(); ++i)
    {
        auto& c = w.children[i];
        if (c.children.empty())
        {
            if ((!want_non_interactive || !c.flags.interactive()) && depth + 1 >= best.depth)
                best = {&w, i, depth + 1};
        }
        else
            find_leaf(c, depth + 1, want_non_interactive, best);
    }
}

bool remove_one_leaf(Widget& root)
{
    LeafPick pick;
    find_leaf(root, 0, true, pick);
    if (!pick.parent)
        find_leaf(root, 0, false, pick);
    if (!pick.parent)
        return false;
    pick.parent->children.erase(pick.parent->children.begin() + static_cast<std::ptrdiff_t>(pick.index));
    return true;
}

} // namespace

Widget prune_dom(const GuiPage& page, std::size_t budget)
{
    budget = std::max<std::size_t>(budget, 1);
    Widget root = page.root;
    root.children.clear();
    if (page.root.flags.visible)
        for (const auto& c: page.root.children)
            if (auto kept = drop_invisible(c))
                root.children.push_back(std::move(*kept));

    drop_decorative(root);

    auto count = count_nodes(root);
    while (count > budget && remove_one_leaf(root))
        --count;
    return root;
}

// ---------------------------------------------------------------------------

namespace
{

std::vector<const Widget*> interactive_nodes(const Widget& pruned)
{
    std::vector<const Widget*> out;
    visit_preorder(pruned, [&](const Widget& w) {
        if (w.flags.interactive() && w.flags.visible)
            out.push_back(&w);
        return true;
    });
    return out;
}

} // namespace

AnnotatedPage annotate_screenshot(const GuiPage& page, const Widget& pruned)
{
    AnnotatedPage out;
    out.base = page;
    out.overlay = page.screenshot;

    const auto nodes = interactive_nodes(pruned);
    for (std::size_t i = 0; i < nodes.size(); ++i)
        out.index_map.emplace(static_cast<int>(i + 1), nodes[i]->node_path);

    if (nodes.empty() || page.screenshot.format != "ppm")
        return out;
    auto raster = Raster::from_ppm(page.screenshot.bytes);
    if (!raster)
        return out;

    constexpr Rgb box {220, 30, 30};
    for (std::size_t i = 0; i < nodes.size(); ++i)
    {
        const auto& b = nodes[i]->bounds;
        raster->stroke_rect(b, box, 2);
        const auto label = static_cast<unsigned>(i + 1);
        const int digits = static_cast<int>(std::to_string(label).size());
        const Bounds tag {b.x1 + 2, b.y1 + 2, b.x1 + 2 + digits * 8 + 2, b.y1 + 2 + 14};
        raster->fill_rect(tag, box);
        raster->draw_number(tag.x1 + 2, tag.y1 + 2, label, {255, 255, 255}, 2);
    }
    out.overlay.bytes = raster->to_ppm();
    return out;
}

std::string widget_role(const Widget& w)
{
    const auto& c = w.class_name;
    auto has = [&](std::string_view s) { return c.find(s) != std::string::npos; };
    if (w.flags.editable || has("EditText"))
        return "text field";
    if (has("CheckBox"))
        return "checkbox";
    if (has("Switch") || has("Toggle"))
        return "switch";
    if (has("SeekBar") || has("Slider"))
        return "slider";
    if (has("RadioButton"))
        return "radio button";
    if (has("Button"))
        return "button";
    if (has("ImageView"))
        return "image";
    if (has("TextView"))
        return "text";
    if (w.flags.scrollable)
        return "scroll area";
    auto simple = c.substr(c.rfind('.') == std::string::npos ? 0 : c.rfind('.') + 1);
    std::transform(simple.begin(), simple.end(), simple.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return simple.empty() ? "widget" : simple;
}

const std::string& widget_label_text(const Widget& w)
{
    return w.text.empty() ? w.content_desc : w.text;
}

std::string screen_region(const Widget& root, const Widget& w)
{
    const auto sw = std::max(root.bounds.width(), 1);
    const auto sh = std::max(root.bounds.height(), 1);
    const auto cx = w.bounds.center_x() - root.bounds.x1;
    const auto cy = w.bounds.center_y() - root.bounds.y1;
    const char* vertical = cy * 3 < sh ? "top" : (cy * 3 < 2 * sh ? "middle" : "bottom");
    const char* horizontal = cx * 3 < sw ? "left" : (cx * 3 < 2 * sw ? "center" : "right");
    return std::string(vertical) + "-" + horizontal;
}

std::string describe_page(const Widget& pruned)
{
    std::string out;
    const auto nodes = interactive_nodes(pruned);
    for (std::size_t i = 0; i < nodes.size(); ++i)
    {
        const auto& w = *nodes[i];
        out += "label " + std::to_string(i + 1) + ": " + widget_role(w) + " '" + widget_label_text(w) + "' at "
               + screen_region(pruned, w);
        if (!w.flags.enabled)
            out += " (disabled)";
        out += "\n";
    }
    return out;
}

std::string serialize_dom(const Widget& pruned)
{
    std::map<NodePath, int> labels;
    {
        const auto nodes = interactive_nodes(pruned);
        for (std::size_t i = 0; i < nodes.size(); ++i)
            labels.emplace(nodes[i]->node_path, static_cast<int>(i + 1));
    }
    std::ostringstream out;
    auto walk = [&](const Widget& w, int depth, auto&& self) -> void {
        out << std::string(static_cast<std::size_t>(depth) * 2, ' ') << "- ";
        if (auto it = labels.find(w.node_path); it != labels.end())
            out << "[" << it->second << "] ";
        auto simple = w.class_name.substr(w.class_name.rfind('.') == std::string::npos ? 0 : w.class_name.rfind('.') + 1);
        out << (simple.empty() ? "View" : simple);
        if (!w.resource_id.empty())
            out << " id=" << w.resource_id;
        if (!w.text.empty())
            out << " text=\"" << w.text << "\"";
        if (!w.content_desc.empty())
            out << " desc=\"" << w.content_desc << "\"";
        out << " bounds=[" << w.bounds.x1 << "," << w.bounds.y1 << "][" << w.bounds.x2 << "," << w.bounds.y2 << "]";
        std::vector<const char*> flags;
        if (w.flags.clickable)
            flags.push_back("clickable");
        if (w.flags.long_clickable)
            flags.push_back("long-clickable");
        if (w.flags.editable)
            flags.push_back("editable");
        if (w.flags.scrollable)
            flags.push_back("scrollable");
        if (w.flags.checkable)
            flags.push_back("checkable");
        if (!w.flags.enabled)
            flags.push_back("disabled");
        for (std::size_t i = 0; i < flags.size(); ++i)
            out << (i == 0 ? " {" : ",") << flags[i];
        if (!flags.empty())
            out << "}";
        out << "\n";
        for (const auto& c: w.children)
            self(c, depth + 1, self);
    };
    walk(pruned, 0, walk);
    return out.str();
}

} // namespace guimig
