// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <guimig/app_model.hpp>
#include <guimig/model.hpp>

#include <memory>
#include <string>
#include <vector>

namespace guimig
{

/// Device bridge failure (timeout, connection refused, bad response).
/// Distinct from an action that simply could not be executed.
class TransportError: public Error
{
  public:
    using Error::Error;
};

struct ExecutionOutcome
{
    bool executed = false;
    std::string failure_reason; // empty iff executed
    GuiPage before;
    GuiPage after; // == before when not executed
};

enum class Backend
{
    live,
    simulated
};

/// One app under automation. Single owner; capture counter is monotonic.
class DeviceSession
{
  public:
    virtual ~DeviceSession() = default;

    [[nodiscard]] virtual Backend backend() const noexcept = 0;
    [[nodiscard]] virtual const std::string& app_id() const noexcept = 0;
    [[nodiscard]] virtual std::uint64_t capture_count() const noexcept = 0;

    virtual GuiPage capture_page() = 0;
    virtual ExecutionOutcome execute_action(const Action& action) = 0;

    /// Returns the app to its initial state.
    virtual void reset() = 0;
};

class SimulatedDevice final: public DeviceSession
{
  public:
    explicit SimulatedDevice(std::shared_ptr<const AppModel> model);

    [[nodiscard]] Backend backend() const noexcept override { return Backend::simulated; }
    [[nodiscard]] const std::string& app_id() const noexcept override { return _model->app_id; }
    [[nodiscard]] std::uint64_t capture_count() const noexcept override { return _captures; }

    GuiPage capture_page() override;
    ExecutionOutcome execute_action(const Action& action) override;
    void reset() override;

    [[nodiscard]] const SimState& state() const noexcept { return _state; }
    [[nodiscard]] const AppModel& model() const noexcept { return *_model; }

  private:
    std::shared_ptr<const AppModel> _model;
    SimState _state;
    std::uint64_t _captures = 0;
};

/// Resets the app, then executes actions in order, stopping after the first
/// one that does not execute.
std::vector<ExecutionOutcome> replay_prefix(DeviceSession& session, const std::vector<Action>& actions);

/// Runs a recorded test from reset and keeps the page pair around every
/// action. Oracles are checked on the way; ValidationError when an action does
/// not execute or an oracle fails.
[[nodiscard]] VisualExecutionLog record_execution_log(DeviceSession& session, const TestCase& tc);

} // namespace guimig
