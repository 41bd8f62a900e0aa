// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <guimig/model.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace guimig
{

/// Fixed-point decimal with exactly two fraction digits.
class Decimal
{
  public:
    constexpr Decimal() = default;

    [[nodiscard]] static constexpr Decimal from_cents(std::int64_t cents) noexcept
    {
        Decimal d;
        d._cents = cents;
        return d;
    }

    /// Accepts "[-]digits[.digits]"; extra fraction digits round half up.
    [[nodiscard]] static std::optional<Decimal> parse(std::string_view s);

    [[nodiscard]] constexpr std::int64_t cents() const noexcept { return _cents; }
    [[nodiscard]] std::string to_string() const;

    auto operator<=>(const Decimal&) const = default;

  private:
    std::int64_t _cents = 0;
};

enum class ValueType
{
    string,
    decimal,
    boolean
};

using Value = std::variant<std::string, Decimal, bool>;

[[nodiscard]] std::string format_value(const Value& v);

/// Arithmetic over decimal/string variables: + - * / with parentheses.
/// Evaluated at 1e-9 precision and rounded half up to cents on assignment.
class Expression
{
  public:
    static Expression parse(std::string_view source);

    [[nodiscard]] Decimal evaluate(const std::map<std::string, Value>& bindings) const;
    [[nodiscard]] const std::vector<std::string>& variables() const noexcept { return _variables; }
    [[nodiscard]] const std::string& source() const noexcept { return _source; }

    struct Node;

  private:
    std::string _source;
    std::shared_ptr<const Node> _root;
    std::vector<std::string> _variables;
};

struct WidgetTemplate
{
    std::string resource_id;
    std::string text;
    std::optional<std::string> var_ref;
    std::string format = "{}"; // applied to var_ref value, "{}" is the placeholder
    std::string content_desc;
    std::string class_name;
    Bounds bounds;
    WidgetFlags flags;
    std::vector<WidgetTemplate> children;
};

struct PageLayout
{
    std::string activity;
    std::vector<WidgetTemplate> widgets;
};

struct Effect
{
    enum class Kind
    {
        set,          // variable = literal | payload | expression
        append_digit, // string: append; decimal: cash-register shift
        go_to,
        toggle,
        back
    };

    Kind kind = Kind::set;
    std::string target; // variable or page id
    std::optional<std::string> literal;
    bool from_payload = false;
    std::optional<Expression> expression;
    std::string digit;
};

struct Transition
{
    std::string page;
    Selector selector;
    ActionKind action = ActionKind::tap;
    std::optional<std::string> payload; // exact-match predicate when present
    std::vector<Effect> effects;
};

struct VariableDecl
{
    ValueType type = ValueType::string;
    Value initial;
};

struct AppModel
{
    std::string app_id;
    int screen_width = 0;
    int screen_height = 0;
    std::map<std::string, VariableDecl> variables;
    std::map<std::string, PageLayout> pages;
    std::vector<Transition> transitions;
    std::string initial_page;
};

[[nodiscard]] AppModel load_app_model(std::string_view document);

struct SimState
{
    std::string page;
    std::map<std::string, Value> bindings;
    std::vector<std::string> back_stack;

    bool operator==(const SimState&) const = default;
};

[[nodiscard]] SimState initial_state(const AppModel& model);

/// Materializes a page layout with the given bindings into a widget tree
/// rooted at a full-screen container.
[[nodiscard]] Widget render_tree(const AppModel& model, const SimState& state);

/// Deterministic PPM raster of a rendered tree.
[[nodiscard]] Screenshot render_screenshot(const AppModel& model, const Widget& root);

struct StepResult
{
    bool executed = false;
    std::string failure_reason;
    const Transition* transition = nullptr; // first matching transition, if any
};

/// Applies an action to the state. A resolved target with no matching
/// transition executes as a no-op.
StepResult apply_action(const AppModel& model, SimState& state, const Action& action);

} // namespace guimig
