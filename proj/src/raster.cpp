// SPDX-License-Identifier: Apache-2.0
#include <guimig/raster.hpp>

#include <algorithm>
#include <array>
#include <cctype>

namespace guimig
{

namespace
{

// 3x5 glyphs, one row per entry, bit 2 = leftmost column.
constexpr std::array<std::array<std::uint8_t, 5>, 10> digit_font {{
    {7, 5, 5, 5, 7}, // 0
    {2, 6, 2, 2, 7}, // 1
    {7, 1, 7, 4, 7}, // 2
    {7, 1, 7, 1, 7}, // 3
    {5, 5, 7, 1, 1}, // 4
    {7, 4, 7, 1, 7}, // 5
    {7, 4, 7, 5, 7}, // 6
    {7, 1, 1, 1, 1}, // 7
    {7, 5, 7, 5, 7}, // 8
    {7, 5, 7, 1, 7}, // 9
}};

} // namespace

Raster::Raster(int width, int height, Rgb fill):
    _width(std::max(width, 0)), _height(std::max(height, 0)),
    _pixels(static_cast<std::size_t>(_width) * static_cast<std::size_t>(_height) * 3)
{
    for (std::size_t i = 0; i < _pixels.size(); i += 3)
    {
        _pixels[i] = fill.r;
        _pixels[i + 1] = fill.g;
        _pixels[i + 2] = fill.b;
    }
}

std::optional<Raster> Raster::from_ppm(std::string_view bytes)
{
    // P6 <ws> width <ws> height <ws> maxval <single ws> data
    std::size_t pos = 0;
    auto skip_ws = [&] {
        while (pos < bytes.size())
        {
            if (bytes[pos] == '#')
                while (pos < bytes.size() && bytes[pos] != '\n')
                    ++pos;
            else if (std::isspace(static_cast<unsigned char>(bytes[pos])))
                ++pos;
            else
                break;
        }
    };
    auto read_int = [&]() -> std::optional<int> {
        skip_ws();
        int v = 0;
        std::size_t start = pos;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos])))
            v = v * 10 + (bytes[pos++] - '0');
        if (pos == start)
            return std::nullopt;
        return v;
    };
    if (bytes.substr(0, 2) != "P6")
        return std::nullopt;
    pos = 2;
    auto w = read_int();
    auto h = read_int();
    auto maxval = read_int();
    if (!w || !h || !maxval || *maxval != 255 || pos >= bytes.size())
        return std::nullopt;
    ++pos;
    const auto need = static_cast<std::size_t>(*w) * static_cast<std::size_t>(*h) * 3;
    if (bytes.size() - pos != need)
        return std::nullopt;
    Raster r(*w, *h, {});
    std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), r._pixels.begin());
    return r;
}

std::string Raster::to_ppm() const
{
    std::string out = "P6\n" + std::to_string(_width) + " " + std::to_string(_height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(_pixels.data()), _pixels.size());
    return out;
}

void Raster::set(int x, int y, Rgb c)
{
    if (x < 0 || y < 0 || x >= _width || y >= _height)
        return;
    const auto i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(_width) + static_cast<std::size_t>(x)) * 3;
    _pixels[i] = c.r;
    _pixels[i + 1] = c.g;
    _pixels[i + 2] = c.b;
}

Rgb Raster::get(int x, int y) const
{
    if (x < 0 || y < 0 || x >= _width || y >= _height)
        return {};
    const auto i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(_width) + static_cast<std::size_t>(x)) * 3;
    return {_pixels[i], _pixels[i + 1], _pixels[i + 2]};
}

void Raster::fill_rect(const Bounds& b, Rgb c)
{
    const int x1 = std::max(b.x1, 0), y1 = std::max(b.y1, 0);
    const int x2 = std::min(b.x2, _width), y2 = std::min(b.y2, _height);
    for (int y = y1; y < y2; ++y)
        for (int x = x1; x < x2; ++x)
            set(x, y, c);
}

void Raster::stroke_rect(const Bounds& b, Rgb c, int thickness)
{
    if (b.x2 <= b.x1 || b.y2 <= b.y1)
        return;
    for (int t = 0; t < thickness; ++t)
    {
        for (int x = b.x1 + t; x < b.x2 - t; ++x)
        {
            set(x, b.y1 + t, c);
            set(x, b.y2 - 1 - t, c);
        }
        for (int y = b.y1 + t; y < b.y2 - t; ++y)
        {
            set(b.x1 + t, y, c);
            set(b.x2 - 1 - t, y, c);
        }
    }
}

void Raster::draw_number(int x, int y, unsigned number, Rgb c, int scale)
{
    const auto digits = std::to_string(number);
    for (std::size_t i = 0; i < digits.size(); ++i)
    {
        const auto& glyph = digit_font[static_cast<std::size_t>(digits[i] - '0')];
        const int ox = x + static_cast<int>(i) * 4 * scale;
        for (int row = 0; row < 5; ++row)
            for (int col = 0; col < 3; ++col)
                if (glyph[static_cast<std::size_t>(row)] & (4 >> col))
                    fill_rect({ox + col * scale, y + row * scale, ox + (col + 1) * scale, y + (row + 1) * scale}, c);
    }
}

} // namespace guimig
