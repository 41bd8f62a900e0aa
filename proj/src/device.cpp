// SPDX-License-Identifier: Apache-2.0
#include <guimig/device.hpp>

namespace guimig
{

SimulatedDevice::SimulatedDevice(std::shared_ptr<const AppModel> model):
    _model(std::move(model)), _state(initial_state(*_model))
{
}

GuiPage SimulatedDevice::capture_page()
{
    GuiPage page;
    page.sequence_no = ++_captures;
    if (auto it = _model->pages.find(_state.page); it != _model->pages.end())
        page.activity = it->second.activity;
    page.root = render_tree(*_model, _state);
    page.screenshot = render_screenshot(*_model, page.root);
    return page;
}

ExecutionOutcome SimulatedDevice::execute_action(const Action& action)
{
    ExecutionOutcome out;
    out.before = capture_page();
    auto step = apply_action(*_model, _state, action);
    out.executed = step.executed;
    if (!step.executed)
    {
        out.failure_reason = step.failure_reason;
        out.after = out.before;
        return out;
    }
    out.after = capture_page();
    return out;
}

void SimulatedDevice::reset()
{
    _state = initial_state(*_model);
}

std::vector<ExecutionOutcome> replay_prefix(DeviceSession& session, const std::vector<Action>& actions)
{
    session.reset();
    std::vector<ExecutionOutcome> out;
    for (const auto& a: actions)
    {
        out.push_back(session.execute_action(a));
        if (!out.back().executed)
            break;
    }
    return out;
}

VisualExecutionLog record_execution_log(DeviceSession& session, const TestCase& tc)
{
    session.reset();
    VisualExecutionLog log;
    const auto indices = tc.action_event_indices();
    std::size_t next = 0;
    for (std::size_t i = 0; i < tc.events.size(); ++i)
    {
        if (const auto* a = std::get_if<Action>(&tc.events[i]))
        {
            auto o = session.execute_action(*a);
            if (!o.executed)
                throw ValidationError({"source action " + std::to_string(next) + " does not execute: "
                                       + o.failure_reason + " (event " + std::to_string(i) + ")"});
            log.entries.push_back({indices[next++], std::move(o.before), std::move(o.after)});
        }
        else
        {
            const auto& oracle = std::get<OracleEvent>(tc.events[i]);
            const auto page = log.entries.empty() ? session.capture_page() : log.entries.back().after;
            if (!oracle_holds(oracle, page.root))
                throw ValidationError({"source oracle fails: " + describe(oracle) + " (event " + std::to_string(i) + ")"});
        }
    }
    return log;
}

} // namespace guimig
