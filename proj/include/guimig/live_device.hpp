// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <guimig/device.hpp>

#include <string>
#include <string_view>

namespace guimig
{

/// Parses a UIAutomator hierarchy dump. A single top-level node becomes the
/// root; several are wrapped in a synthetic container spanning their union.
[[nodiscard]] Widget parse_uiautomator_xml(std::string_view xml);

/// Parses "[x1,y1][x2,y2]". Negative coordinates clamp to 0 and inverted
/// extents collapse to zero width/height.
[[nodiscard]] Bounds parse_uiautomator_bounds(std::string_view s);

struct LiveBridgeConfig
{
    std::string base_url = "http://127.0.0.1:9008"; // scheme://host:port
    int timeout_ms = 10000;
};

/// Thin client for an on-device automation bridge speaking plain HTTP:
///   GET  /hierarchy   -> UIAutomator XML dump
///   GET  /screenshot  -> PNG bytes (opaque; dimensions from X-Width/X-Height)
///   GET  /activity    -> current activity name (optional, empty on 404)
///   POST /input       -> JSON {kind, x, y, x2?, y2?, text?, key?, ms?}
///   POST /reset       -> JSON {app_id}
class LiveDevice final: public DeviceSession
{
  public:
    LiveDevice(std::string app_id, LiveBridgeConfig config);
    ~LiveDevice() override;

    [[nodiscard]] Backend backend() const noexcept override { return Backend::live; }
    [[nodiscard]] const std::string& app_id() const noexcept override { return _app_id; }
    [[nodiscard]] std::uint64_t capture_count() const noexcept override { return _captures; }

    GuiPage capture_page() override;
    ExecutionOutcome execute_action(const Action& action) override;
    void reset() override;

  private:
    struct Impl;
    std::string _app_id;
    std::unique_ptr<Impl> _impl;
    std::uint64_t _captures = 0;
};

} // namespace guimig
