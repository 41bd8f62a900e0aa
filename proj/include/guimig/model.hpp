// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace guimig
{

using NodePath = std::vector<int>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed document. Carries a 1-based line (0 when unknown) and the
/// offending field path, e.g. "events[2].kind".
class ParseError: public Error
{
  public:
    ParseError(std::string message, int line, std::string field);

    [[nodiscard]] int line() const noexcept { return _line; }
    [[nodiscard]] const std::string& field() const noexcept { return _field; }

  private:
    int _line;
    std::string _field;
};

/// Well-formed document whose content violates invariants.
class ValidationError: public Error
{
  public:
    explicit ValidationError(std::vector<std::string> violations);

    [[nodiscard]] const std::vector<std::string>& violations() const noexcept { return _violations; }

  private:
    std::vector<std::string> _violations;
};

// ---------------------------------------------------------------------------
// Widgets and pages
// ---------------------------------------------------------------------------

struct Bounds
{
    int x1 = 0;
    int y1 = 0;
    int x2 = 0;
    int y2 = 0;

    [[nodiscard]] int width() const noexcept { return x2 - x1; }
    [[nodiscard]] int height() const noexcept { return y2 - y1; }
    [[nodiscard]] int center_x() const noexcept { return (x1 + x2) / 2; }
    [[nodiscard]] int center_y() const noexcept { return (y1 + y2) / 2; }

    bool operator==(const Bounds&) const = default;
};

struct WidgetFlags
{
    bool clickable = false;
    bool long_clickable = false;
    bool editable = false;
    bool scrollable = false;
    bool checkable = false;
    bool enabled = true;
    bool visible = true;

    [[nodiscard]] bool interactive() const noexcept
    {
        return clickable || long_clickable || editable || scrollable || checkable;
    }

    bool operator==(const WidgetFlags&) const = default;
};

struct Widget
{
    NodePath node_path;
    std::string resource_id;
    std::string text;
    std::string content_desc;
    std::string class_name;
    Bounds bounds;
    WidgetFlags flags;
    std::vector<Widget> children;

    bool operator==(const Widget&) const = default;
};

struct Screenshot
{
    std::string bytes; // opaque; PPM (P6) for the simulator, PNG for live devices
    int width = 0;
    int height = 0;
    std::string format; // "ppm" | "png"

    bool operator==(const Screenshot&) const = default;
};

struct GuiPage
{
    std::uint64_t sequence_no = 0;
    std::string activity;
    Widget root;
    Screenshot screenshot;
};

/// Equal tree, activity and screenshot bytes; the capture counter is ignored.
[[nodiscard]] bool same_content(const GuiPage& a, const GuiPage& b);

/// Pre-order visit; the callback returns false to stop early.
template <typename F>
bool visit_preorder(const Widget& w, F&& fn)
{
    if (!fn(w))
        return false;
    for (const auto& c: w.children)
        if (!visit_preorder(c, fn))
            return false;
    return true;
}

[[nodiscard]] const Widget* find_by_path(const Widget& root, const NodePath& path);
[[nodiscard]] std::size_t count_nodes(const Widget& root);

/// Rewrites node_path of every node to its child-index position under root.
void assign_node_paths(Widget& root, NodePath prefix = {});

/// Structural invariants of a widget tree (bounds, node_path uniqueness).
[[nodiscard]] std::vector<std::string> validate_widget_tree(const Widget& root);

// ---------------------------------------------------------------------------
// Test cases
// ---------------------------------------------------------------------------

/// Widget selector. A present node_path wins; otherwise every non-empty
/// attribute must match exactly. An attribute present with an empty value is
/// kept (it round-trips) but does not constrain matching.
struct Selector
{
    std::optional<NodePath> node_path;
    std::optional<std::string> resource_id;
    std::optional<std::string> text;
    std::optional<std::string> content_desc;

    [[nodiscard]] bool has_constraint() const noexcept;
    [[nodiscard]] std::string describe() const;

    bool operator==(const Selector&) const = default;
};

/// First pre-order match, or nullptr.
[[nodiscard]] const Widget* resolve(const Widget& root, const Selector& selector);

enum class ActionKind
{
    tap,
    long_tap,
    swipe,
    set_text,
    key_event,
    wait
};

enum class OracleKind
{
    exists,
    text_equals,
    text_contains
};

[[nodiscard]] std::string_view to_string(ActionKind kind) noexcept;
[[nodiscard]] std::string_view to_string(OracleKind kind) noexcept;
[[nodiscard]] std::optional<ActionKind> parse_action_kind(std::string_view s) noexcept;
[[nodiscard]] std::optional<OracleKind> parse_oracle_kind(std::string_view s) noexcept;
[[nodiscard]] bool needs_selector(ActionKind kind) noexcept;

struct Action
{
    ActionKind kind = ActionKind::tap;
    std::optional<Selector> selector;
    std::optional<std::string> payload;

    bool operator==(const Action&) const = default;
};

struct OracleEvent
{
    OracleKind kind = OracleKind::exists;
    Selector selector;
    std::string expected;

    bool operator==(const OracleEvent&) const = default;
};

using Event = std::variant<Action, OracleEvent>;

struct TestCase
{
    std::string app_id;
    std::string category;
    std::string functionality_id;
    std::vector<Event> events;

    [[nodiscard]] std::vector<Action> actions() const;
    /// Index into events of every Action, in order.
    [[nodiscard]] std::vector<std::size_t> action_event_indices() const;
    [[nodiscard]] const OracleEvent* terminal_oracle() const;

    bool operator==(const TestCase&) const = default;
};

/// False when the anchor does not resolve to a visible widget.
[[nodiscard]] bool oracle_holds(const OracleEvent& oracle, const Widget& root);

[[nodiscard]] std::string describe(const Action& action);
[[nodiscard]] std::string describe(const OracleEvent& oracle);

// Codec ---------------------------------------------------------------------

[[nodiscard]] std::vector<std::string> validate_test_case(const TestCase& tc);
[[nodiscard]] TestCase load_test_case(std::string_view document);
[[nodiscard]] std::string save_test_case(const TestCase& tc);

[[nodiscard]] nlohmann::ordered_json selector_to_json(const Selector& s);
[[nodiscard]] Selector selector_from_json(const nlohmann::json& j, const std::string& field);
[[nodiscard]] nlohmann::ordered_json action_to_json(const Action& a);
[[nodiscard]] nlohmann::ordered_json oracle_to_json(const OracleEvent& o);
[[nodiscard]] nlohmann::ordered_json test_case_to_json(const TestCase& tc);
[[nodiscard]] TestCase test_case_from_json(const nlohmann::json& j);

[[nodiscard]] nlohmann::ordered_json widget_to_json(const Widget& w);
[[nodiscard]] Widget widget_from_json(const nlohmann::json& j);

/// Page metadata plus tree; screenshot bytes are replaced by a digest.
[[nodiscard]] nlohmann::ordered_json page_to_json(const GuiPage& page);
[[nodiscard]] GuiPage page_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Execution log and results
// ---------------------------------------------------------------------------

struct LogEntry
{
    std::size_t event_index = 0;
    GuiPage before;
    GuiPage after;
};

/// One entry per source action. The page an oracle sees is the after-page of
/// the action preceding it.
struct VisualExecutionLog
{
    std::vector<LogEntry> entries;

    [[nodiscard]] const GuiPage& final_page() const;
};

void save_log(const VisualExecutionLog& log, const std::string& directory);
[[nodiscard]] VisualExecutionLog load_log(const std::string& directory);

// Helpers -------------------------------------------------------------------

[[nodiscard]] std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;
[[nodiscard]] std::string hex_digest(std::string_view data);
[[nodiscard]] std::string trim(std::string_view s);
[[nodiscard]] std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

} // namespace guimig
