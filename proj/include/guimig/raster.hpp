// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <guimig/model.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace guimig
{

struct Rgb
{
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
};

/// 8-bit RGB image backed by a flat buffer. Drawing clips to the canvas.
class Raster
{
  public:
    Raster(int width, int height, Rgb fill);

    [[nodiscard]] static std::optional<Raster> from_ppm(std::string_view bytes);
    [[nodiscard]] std::string to_ppm() const;

    [[nodiscard]] int width() const noexcept { return _width; }
    [[nodiscard]] int height() const noexcept { return _height; }

    void set(int x, int y, Rgb c);
    [[nodiscard]] Rgb get(int x, int y) const;
    void fill_rect(const Bounds& b, Rgb c);
    void stroke_rect(const Bounds& b, Rgb c, int thickness = 1);

    /// Draws a decimal number with a built-in 3x5 digit font at the given scale.
    void draw_number(int x, int y, unsigned number, Rgb c, int scale = 2);

  private:
    int _width;
    int _height;
    std::vector<std::uint8_t> _pixels;
};

} // namespace guimig
