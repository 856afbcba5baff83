#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cavityforge {

/// Dense row-major 2D array.
template <class T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height),
          data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
        assert(width >= 0 && height >= 0);
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }

    T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
    const T& operator()(int x, int y) const noexcept { return data_[index(x, y)]; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }

    std::span<T> row(int y) noexcept {
        return std::span<T>(data_).subspan(index(0, y), static_cast<std::size_t>(width_));
    }
    std::span<const T> row(int y) const noexcept {
        return std::span<const T>(data_).subspan(index(0, y), static_cast<std::size_t>(width_));
    }

    void fill(const T& v) { std::fill(data_.begin(), data_.end(), v); }

    bool operator==(const Grid&) const = default;

private:
    std::size_t index(int x, int y) const noexcept {
        assert(contains(x, y));
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;

/// Inclusive integer pixel rectangle.
struct PixelBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = -1;
    int y1 = -1;

    int width() const noexcept { return x1 - x0 + 1; }
    int height() const noexcept { return y1 - y0 + 1; }
    bool empty() const noexcept { return x1 < x0 || y1 < y0; }

    bool intersects(const PixelBox& o) const noexcept {
        return !(o.x0 > x1 || o.x1 < x0 || o.y0 > y1 || o.y1 < y0);
    }
    bool contains(const PixelBox& o) const noexcept {
        return o.x0 >= x0 && o.x1 <= x1 && o.y0 >= y0 && o.y1 <= y1;
    }
    PixelBox dilated(int by) const noexcept { return {x0 - by, y0 - by, x1 + by, y1 + by}; }
    PixelBox clipped(int width, int height) const noexcept {
        return {std::max(x0, 0), std::max(y0, 0), std::min(x1, width - 1), std::min(y1, height - 1)};
    }
    bool inside(int width, int height) const noexcept {
        return x0 >= 0 && y0 >= 0 && x1 < width && y1 < height;
    }

    bool operator==(const PixelBox&) const = default;
};

/// Tight bounding box of the nonzero cells, empty box when the mask is empty.
inline PixelBox tight_bbox(const Mask& mask) {
    PixelBox box{mask.width(), mask.height(), -1, -1};
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask(x, y)) {
                box.x0 = std::min(box.x0, x);
                box.y0 = std::min(box.y0, y);
                box.x1 = std::max(box.x1, x);
                box.y1 = std::max(box.y1, y);
            }
        }
    }
    if (box.x1 < 0) return PixelBox{};
    return box;
}

}  // namespace cavityforge
