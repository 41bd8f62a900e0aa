// SPDX-License-Identifier: Apache-2.0
#include <guimig/app_model.hpp>
#include <guimig/raster.hpp>

#include <algorithm>
#include <cctype>
#include <set>

namespace guimig
{

using nlohmann::json;

// ---------------------------------------------------------------------------
// Decimal
// ---------------------------------------------------------------------------

namespace
{

constexpr __int128 expr_scale = 1'000'000'000; // 1e-9 working precision

// Round half away from zero when dividing by a positive divisor.
__int128 div_round_half_up(__int128 value, __int128 divisor)
{
    const bool negative = value < 0;
    __int128 mag = negative ? -value : value;
    __int128 q = mag / divisor;
    if ((mag % divisor) * 2 >= divisor)
        ++q;
    return negative ? -q : q;
}

// Parses a decimal literal into units of 1e-9, rounding half up past nine digits.
std::optional<__int128> parse_scaled(std::string_view s)
{
    if (s.empty())
        return std::nullopt;
    bool negative = false;
    if (s.front() == '-' || s.front() == '+')
    {
        negative = s.front() == '-';
        s.remove_prefix(1);
    }
    if (s.empty())
        return std::nullopt;
    __int128 whole = 0;
    std::size_t i = 0;
    bool any = false;
    for (; i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])); ++i)
    {
        whole = whole * 10 + (s[i] - '0');
        any = true;
        if (whole > (__int128(1) << 90))
            return std::nullopt;
    }
    __int128 frac = 0;
    int frac_digits = 0;
    bool round_up = false;
    if (i < s.size() && s[i] == '.')
    {
        ++i;
        for (; i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])); ++i)
        {
            any = true;
            if (frac_digits < 9)
            {
                frac = frac * 10 + (s[i] - '0');
                ++frac_digits;
            }
            else if (frac_digits == 9)
            {
                round_up = s[i] >= '5';
                ++frac_digits;
            }
        }
    }
    if (!any || i != s.size())
        return std::nullopt;
    for (int d = std::min(frac_digits, 9); d < 9; ++d)
        frac *= 10;
    __int128 v = whole * expr_scale + frac + (round_up ? 1 : 0);
    return negative ? -v : v;
}

std::string to_string_i128(__int128 v)
{
    if (v == 0)
        return "0";
    bool neg = v < 0;
    if (neg)
        v = -v;
    std::string s;
    while (v > 0)
    {
        s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
        v /= 10;
    }
    if (neg)
        s.push_back('-');
    std::reverse(s.begin(), s.end());
    return s;
}

} // namespace

std::optional<Decimal> Decimal::parse(std::string_view s)
{
    auto scaled = parse_scaled(trim(s));
    if (!scaled)
        return std::nullopt;
    return Decimal::from_cents(static_cast<std::int64_t>(div_round_half_up(*scaled, expr_scale / 100)));
}

std::string Decimal::to_string() const
{
    const bool neg = _cents < 0;
    const auto mag = neg ? -static_cast<__int128>(_cents) : static_cast<__int128>(_cents);
    const auto frac = static_cast<int>(mag % 100);
    std::string out = (neg ? "-" : "") + to_string_i128(mag / 100) + ".";
    out += static_cast<char>('0' + frac / 10);
    out += static_cast<char>('0' + frac % 10);
    return out;
}

std::string format_value(const Value& v)
{
    if (const auto* s = std::get_if<std::string>(&v))
        return *s;
    if (const auto* d = std::get_if<Decimal>(&v))
        return d->to_string();
    return std::get<bool>(v) ? "true" : "false";
}

// ---------------------------------------------------------------------------
// Expression
// ---------------------------------------------------------------------------

struct Expression::Node
{
    enum class Kind
    {
        number,
        variable,
        add,
        sub,
        mul,
        div,
        neg
    };
    Kind kind = Kind::number;
    __int128 number = 0;
    std::string name;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
};

namespace
{

using NodePtr = std::shared_ptr<const Expression::Node>;

class ExprParser
{
  public:
    explicit ExprParser(std::string_view src): _src(src) {}

    NodePtr parse_all(std::vector<std::string>& vars)
    {
        _vars = &vars;
        auto n = parse_sum();
        skip();
        if (_pos != _src.size())
            fail("unexpected '" + std::string(1, _src[_pos]) + "'");
        return n;
    }

  private:
    [[noreturn]] void fail(const std::string& what) const
    {
        throw ParseError("expression '" + std::string(_src) + "': " + what, 0, "expr");
    }

    void skip()
    {
        while (_pos < _src.size() && std::isspace(static_cast<unsigned char>(_src[_pos])))
            ++_pos;
    }

    bool eat(char c)
    {
        skip();
        if (_pos < _src.size() && _src[_pos] == c)
        {
            ++_pos;
            return true;
        }
        return false;
    }

    static NodePtr binary(Expression::Node::Kind k, NodePtr l, NodePtr r)
    {
        auto n = std::make_shared<Expression::Node>();
        n->kind = k;
        n->lhs = std::move(l);
        n->rhs = std::move(r);
        return n;
    }

    NodePtr parse_sum()
    {
        auto lhs = parse_product();
        for (;;)
        {
            if (eat('+'))
                lhs = binary(Expression::Node::Kind::add, lhs, parse_product());
            else if (eat('-'))
                lhs = binary(Expression::Node::Kind::sub, lhs, parse_product());
            else
                return lhs;
        }
    }

    NodePtr parse_product()
    {
        auto lhs = parse_unary();
        for (;;)
        {
            if (eat('*'))
                lhs = binary(Expression::Node::Kind::mul, lhs, parse_unary());
            else if (eat('/'))
                lhs = binary(Expression::Node::Kind::div, lhs, parse_unary());
            else
                return lhs;
        }
    }

    NodePtr parse_unary()
    {
        if (eat('-'))
            return binary(Expression::Node::Kind::neg, parse_unary(), nullptr);
        return parse_primary();
    }

    NodePtr parse_primary()
    {
        skip();
        if (eat('('))
        {
            auto n = parse_sum();
            if (!eat(')'))
                fail("missing ')'");
            return n;
        }
        if (_pos >= _src.size())
            fail("unexpected end");
        const char c = _src[_pos];
        auto n = std::make_shared<Expression::Node>();
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
        {
            const auto start = _pos;
            while (_pos < _src.size() && (std::isdigit(static_cast<unsigned char>(_src[_pos])) || _src[_pos] == '.'))
                ++_pos;
            auto v = parse_scaled(_src.substr(start, _pos - start));
            if (!v)
                fail("bad number");
            n->kind = Expression::Node::Kind::number;
            n->number = *v;
            return n;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
        {
            const auto start = _pos;
            while (_pos < _src.size() && (std::isalnum(static_cast<unsigned char>(_src[_pos])) || _src[_pos] == '_'))
                ++_pos;
            n->kind = Expression::Node::Kind::variable;
            n->name = std::string(_src.substr(start, _pos - start));
            if (std::find(_vars->begin(), _vars->end(), n->name) == _vars->end())
                _vars->push_back(n->name);
            return n;
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    std::string_view _src;
    std::size_t _pos = 0;
    std::vector<std::string>* _vars = nullptr;
};

__int128 scaled_value(const Value& v)
{
    if (const auto* d = std::get_if<Decimal>(&v))
        return static_cast<__int128>(d->cents()) * (expr_scale / 100);
    if (const auto* b = std::get_if<bool>(&v))
        return *b ? expr_scale : 0;
    return parse_scaled(trim(std::get<std::string>(v))).value_or(0);
}

__int128 eval(const Expression::Node& n, const std::map<std::string, Value>& bindings)
{
    using K = Expression::Node::Kind;
    switch (n.kind)
    {
        case K::number: return n.number;
        case K::variable:
        {
            auto it = bindings.find(n.name);
            return it == bindings.end() ? 0 : scaled_value(it->second);
        }
        case K::add: return eval(*n.lhs, bindings) + eval(*n.rhs, bindings);
        case K::sub: return eval(*n.lhs, bindings) - eval(*n.rhs, bindings);
        case K::mul: return eval(*n.lhs, bindings) * eval(*n.rhs, bindings) / expr_scale;
        case K::div:
        {
            const auto d = eval(*n.rhs, bindings);
            return d == 0 ? 0 : eval(*n.lhs, bindings) * expr_scale / d;
        }
        case K::neg: return -eval(*n.lhs, bindings);
    }
    return 0;
}

} // namespace

Expression Expression::parse(std::string_view source)
{
    Expression e;
    e._source = std::string(source);
    ExprParser p(e._source);
    e._root = p.parse_all(e._variables);
    return e;
}

Decimal Expression::evaluate(const std::map<std::string, Value>& bindings) const
{
    return Decimal::from_cents(static_cast<std::int64_t>(div_round_half_up(eval(*_root, bindings), expr_scale / 100)));
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

namespace
{

std::optional<Value> coerce(ValueType type, const std::string& raw)
{
    switch (type)
    {
        case ValueType::string: return Value {raw};
        case ValueType::decimal:
            if (auto d = Decimal::parse(raw))
                return Value {*d};
            return std::nullopt;
        case ValueType::boolean:
            if (raw == "true")
                return Value {true};
            if (raw == "false")
                return Value {false};
            return std::nullopt;
    }
    return std::nullopt;
}

WidgetFlags flags_from_json(const json& f)
{
    WidgetFlags flags;
    flags.clickable = f.value("clickable", false);
    flags.long_clickable = f.value("long_clickable", false);
    flags.editable = f.value("editable", false);
    flags.scrollable = f.value("scrollable", false);
    flags.checkable = f.value("checkable", false);
    flags.enabled = f.value("enabled", true);
    flags.visible = f.value("visible", true);
    return flags;
}

WidgetTemplate template_from_json(const json& j, const std::string& path)
{
    if (!j.is_object())
        throw ParseError("expected widget object", 0, path);
    WidgetTemplate t;
    t.resource_id = j.value("resource_id", "");
    t.text = j.value("text", "");
    if (auto it = j.find("var_ref"); it != j.end() && !it->is_null())
        t.var_ref = it->get<std::string>();
    t.format = j.value("format", "{}");
    t.content_desc = j.value("content_desc", "");
    t.class_name = j.value("class_name", "android.view.View");
    const auto& b = j.at("bounds");
    if (!b.is_array() || b.size() != 4)
        throw ParseError("bounds must be [x1,y1,x2,y2]", 0, path + ".bounds");
    t.bounds = {b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
    if (auto it = j.find("flags"); it != j.end())
        t.flags = flags_from_json(*it);
    if (auto it = j.find("children"); it != j.end())
        for (std::size_t i = 0; i < it->size(); ++i)
            t.children.push_back(template_from_json((*it)[i], path + ".children[" + std::to_string(i) + "]"));
    return t;
}

Effect effect_from_json(const json& j, const std::string& path)
{
    Effect e;
    if (auto it = j.find("set"); it != j.end())
    {
        e.kind = Effect::Kind::set;
        e.target = it->get<std::string>();
        if (auto v = j.find("value"); v != j.end())
            e.literal = v->is_string() ? v->get<std::string>() : v->dump();
        e.from_payload = j.value("from_payload", false);
        if (auto x = j.find("expr"); x != j.end())
            e.expression = Expression::parse(x->get<std::string>());
        const int sources = (e.literal ? 1 : 0) + (e.from_payload ? 1 : 0) + (e.expression ? 1 : 0);
        if (sources != 1)
            throw ParseError("set needs exactly one of value, from_payload, expr", 0, path);
    }
    else if (auto it2 = j.find("append_digit"); it2 != j.end())
    {
        e.kind = Effect::Kind::append_digit;
        e.target = it2->get<std::string>();
        e.digit = j.value("digit", "");
        e.from_payload = j.value("from_payload", false);
        if (e.digit.empty() == !e.from_payload)
            throw ParseError("append_digit needs digit or from_payload", 0, path);
    }
    else if (auto it3 = j.find("goto"); it3 != j.end())
    {
        e.kind = Effect::Kind::go_to;
        e.target = it3->get<std::string>();
    }
    else if (auto it4 = j.find("toggle"); it4 != j.end())
    {
        e.kind = Effect::Kind::toggle;
        e.target = it4->get<std::string>();
    }
    else if (j.contains("back"))
        e.kind = Effect::Kind::back;
    else
        throw ParseError("unknown effect", 0, path);
    return e;
}

} // namespace

AppModel load_app_model(std::string_view document)
{
    json j;
    try
    {
        j = json::parse(document);
    }
    catch (const json::parse_error& e)
    {
        throw ParseError(e.what(), 0, "app-model");
    }

    AppModel m;
    std::vector<std::string> errors;
    try
    {
        m.app_id = j.value("app_id", "");
        const auto& screen = j.at("screen");
        m.screen_width = screen.at("w").get<int>();
        m.screen_height = screen.at("h").get<int>();

        const auto variables = j.value("variables", json::object());
        for (const auto& [name, decl]: variables.items())
        {
            VariableDecl v;
            const auto type = decl.at("type").get<std::string>();
            if (type == "string")
                v.type = ValueType::string;
            else if (type == "decimal")
                v.type = ValueType::decimal;
            else if (type == "boolean")
                v.type = ValueType::boolean;
            else
            {
                errors.push_back("variable '" + name + "': unknown type '" + type + "'");
                continue;
            }
            const auto& init = decl.at("initial");
            auto value = coerce(v.type, init.is_string() ? init.get<std::string>() : init.dump());
            if (!value)
            {
                errors.push_back("variable '" + name + "': initial value does not match type");
                continue;
            }
            v.initial = *value;
            m.variables.emplace(name, std::move(v));
        }

        for (const auto& [id, page]: j.at("pages").items())
        {
            PageLayout layout;
            layout.activity = page.value("activity", "");
            const auto& widgets = page.at("widgets");
            for (std::size_t i = 0; i < widgets.size(); ++i)
                layout.widgets.push_back(
                    template_from_json(widgets[i], "pages." + id + ".widgets[" + std::to_string(i) + "]"));
            m.pages.emplace(id, std::move(layout));
        }

        const auto& initial = j.at("initial_page");
        if (initial.is_string())
            m.initial_page = initial.get<std::string>();
        else if (initial.is_array() && initial.size() == 1)
            m.initial_page = initial[0].get<std::string>();
        else
            errors.push_back("exactly one initial page required, got " + std::to_string(initial.size()));

        const auto transitions = j.value("transitions", json::array());
        for (std::size_t i = 0; i < transitions.size(); ++i)
        {
            const auto path = "transitions[" + std::to_string(i) + "]";
            const auto& t = transitions[i];
            Transition tr;
            tr.page = t.at("page").get<std::string>();
            if (auto it = t.find("selector"); it != t.end())
                tr.selector = selector_from_json(*it, path + ".selector");
            const auto action = t.at("action").get<std::string>();
            auto kind = parse_action_kind(action);
            if (!kind)
                throw ParseError("unknown action '" + action + "'", 0, path + ".action");
            tr.action = *kind;
            if (auto it = t.find("payload"); it != t.end() && !it->is_null())
                tr.payload = it->get<std::string>();
            const auto effects = t.value("effects", json::array());
            for (std::size_t k = 0; k < effects.size(); ++k)
                tr.effects.push_back(effect_from_json(effects[k], path + ".effects[" + std::to_string(k) + "]"));
            m.transitions.push_back(std::move(tr));
        }
    }
    catch (const json::exception& e)
    {
        throw ParseError(e.what(), 0, "app-model");
    }

    // Cross-reference checks.
    if (!m.initial_page.empty() && !m.pages.contains(m.initial_page))
        errors.push_back("initial page '" + m.initial_page + "' is not defined");

    auto check_var_refs = [&](const std::vector<WidgetTemplate>& ws, const std::string& page, auto&& self) -> void {
        for (const auto& w: ws)
        {
            if (w.var_ref && !m.variables.contains(*w.var_ref))
                errors.push_back("page '" + page + "': widget references undeclared variable '" + *w.var_ref + "'");
            self(w.children, page, self);
        }
    };
    for (const auto& [id, layout]: m.pages)
        check_var_refs(layout.widgets, id, check_var_refs);

    const auto init = initial_state(m);
    for (std::size_t i = 0; i < m.transitions.size(); ++i)
    {
        const auto& t = m.transitions[i];
        const auto at = "transition " + std::to_string(i);
        if (!m.pages.contains(t.page))
        {
            errors.push_back(at + ": unknown page '" + t.page + "'");
            continue;
        }
        if (needs_selector(t.action))
        {
            SimState probe = init;
            probe.page = t.page;
            if (!resolve(render_tree(m, probe), t.selector))
                errors.push_back(at + ": selector " + t.selector.describe() + " does not resolve on page '"
                                 + t.page + "'");
        }
        for (const auto& e: t.effects)
        {
            switch (e.kind)
            {
                case Effect::Kind::go_to:
                    if (!m.pages.contains(e.target))
                        errors.push_back(at + ": goto unknown page '" + e.target + "'");
                    break;
                case Effect::Kind::back: break;
                default:
                {
                    auto it = m.variables.find(e.target);
                    if (it == m.variables.end())
                    {
                        errors.push_back(at + ": undeclared variable '" + e.target + "'");
                        break;
                    }
                    if (e.kind == Effect::Kind::toggle && it->second.type != ValueType::boolean)
                        errors.push_back(at + ": toggle on non-boolean '" + e.target + "'");
                    if (e.kind == Effect::Kind::append_digit && it->second.type == ValueType::boolean)
                        errors.push_back(at + ": append_digit on boolean '" + e.target + "'");
                    if (e.literal && !coerce(it->second.type, *e.literal))
                        errors.push_back(at + ": value does not match type of '" + e.target + "'");
                    if (e.expression)
                    {
                        if (it->second.type == ValueType::boolean)
                            errors.push_back(at + ": expression assigned to boolean '" + e.target + "'");
                        for (const auto& v: e.expression->variables())
                            if (!m.variables.contains(v))
                                errors.push_back(at + ": undeclared variable '" + v + "' in expression");
                    }
                }
            }
        }
    }

    if (!errors.empty())
        throw ValidationError(std::move(errors));
    return m;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

SimState initial_state(const AppModel& model)
{
    SimState s;
    s.page = model.initial_page;
    for (const auto& [name, decl]: model.variables)
        s.bindings.emplace(name, decl.initial);
    return s;
}

namespace
{

Widget materialize(const WidgetTemplate& t, const std::map<std::string, Value>& bindings)
{
    Widget w;
    w.resource_id = t.resource_id;
    w.content_desc = t.content_desc;
    w.class_name = t.class_name;
    w.bounds = t.bounds;
    w.flags = t.flags;
    w.text = t.text;
    if (t.var_ref)
    {
        auto it = bindings.find(*t.var_ref);
        const auto value = it == bindings.end() ? std::string {} : format_value(it->second);
        w.text = t.format;
        if (auto pos = w.text.find("{}"); pos != std::string::npos)
            w.text.replace(pos, 2, value);
    }
    for (const auto& c: t.children)
        w.children.push_back(materialize(c, bindings));
    return w;
}

Rgb fill_for(const Widget& w)
{
    const auto h = fnv1a(w.class_name + '\x1f' + w.text);
    // Keep fills light so the black borders stay visible.
    return {static_cast<std::uint8_t>(128 | (h & 0x7F)), static_cast<std::uint8_t>(128 | ((h >> 8) & 0x7F)),
            static_cast<std::uint8_t>(128 | ((h >> 16) & 0x7F))};
}

void paint(Raster& r, const Widget& w, bool is_root)
{
    if (!w.flags.visible)
        return;
    if (!is_root)
    {
        r.fill_rect(w.bounds, fill_for(w));
        r.stroke_rect(w.bounds, {0, 0, 0}, 1);
    }
    for (const auto& c: w.children)
        paint(r, c, false);
}

void apply_effect(const AppModel& model, SimState& state, const Effect& e, const Action& action)
{
    switch (e.kind)
    {
        case Effect::Kind::go_to:
            state.back_stack.push_back(state.page);
            state.page = e.target;
            return;
        case Effect::Kind::back:
            if (!state.back_stack.empty())
            {
                state.page = state.back_stack.back();
                state.back_stack.pop_back();
            }
            return;
        case Effect::Kind::toggle:
        {
            auto& v = state.bindings[e.target];
            if (auto* b = std::get_if<bool>(&v))
                *b = !*b;
            return;
        }
        case Effect::Kind::append_digit:
        {
            const auto digit = e.from_payload ? action.payload.value_or("") : e.digit;
            if (digit.size() != 1 || !std::isdigit(static_cast<unsigned char>(digit[0])))
                return;
            auto& v = state.bindings[e.target];
            if (auto* s = std::get_if<std::string>(&v))
                *s += digit;
            else if (auto* d = std::get_if<Decimal>(&v))
                *d = Decimal::from_cents(d->cents() * 10 + (digit[0] - '0'));
            return;
        }
        case Effect::Kind::set:
        {
            const auto type = model.variables.at(e.target).type;
            auto& v = state.bindings[e.target];
            if (e.expression)
            {
                const auto d = e.expression->evaluate(state.bindings);
                if (type == ValueType::string)
                    v = d.to_string();
                else
                    v = d;
                return;
            }
            const auto raw = e.from_payload ? action.payload.value_or("") : e.literal.value_or("");
            if (auto value = coerce(type, raw))
                v = *value;
            return;
        }
    }
}

} // namespace

Widget render_tree(const AppModel& model, const SimState& state)
{
    Widget root;
    root.class_name = "android.widget.FrameLayout";
    root.bounds = {0, 0, model.screen_width, model.screen_height};
    if (auto it = model.pages.find(state.page); it != model.pages.end())
        for (const auto& t: it->second.widgets)
            root.children.push_back(materialize(t, state.bindings));
    assign_node_paths(root);
    return root;
}

Screenshot render_screenshot(const AppModel& model, const Widget& root)
{
    Raster r(model.screen_width, model.screen_height, {245, 245, 245});
    paint(r, root, true);
    return {r.to_ppm(), model.screen_width, model.screen_height, "ppm"};
}

StepResult apply_action(const AppModel& model, SimState& state, const Action& action)
{
    StepResult result;
    if (action.kind == ActionKind::wait)
    {
        result.executed = true;
        return result;
    }

    const auto tree = render_tree(model, state);
    const Widget* target = nullptr;
    if (needs_selector(action.kind))
    {
        if (!action.selector)
        {
            result.failure_reason = "selector unresolved";
            return result;
        }
        target = resolve(tree, *action.selector);
        if (!target)
        {
            result.failure_reason = "selector unresolved";
            return result;
        }
        if (!target->flags.visible)
        {
            result.failure_reason = "widget not visible";
            return result;
        }
        if (!target->flags.enabled)
        {
            result.failure_reason = "widget disabled";
            return result;
        }
    }
    result.executed = true;

    for (const auto& t: model.transitions)
    {
        if (t.page != state.page || t.action != action.kind)
            continue;
        if (t.payload && t.payload != action.payload)
            continue;
        if (target)
        {
            const auto* bound = resolve(tree, t.selector);
            if (!bound || bound->node_path != target->node_path)
                continue;
        }
        result.transition = &t;
        for (const auto& e: t.effects)
            apply_effect(model, state, e, action);
        return result;
    }

    if (action.kind == ActionKind::key_event && action.payload == "back" && !state.back_stack.empty())
    {
        state.page = state.back_stack.back();
        state.back_stack.pop_back();
    }
    return result;
}

} // namespace guimig
