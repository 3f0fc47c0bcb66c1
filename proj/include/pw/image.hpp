#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace pw {

/// Row-major H x W grid of metric depths with an explicit validity mask.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> valid;

    DepthMap() = default;
    DepthMap(int w, int h, double fill = 0.0, bool is_valid = false)
        : width(w), height(h), values(std::size_t(w) * h, fill), valid(std::size_t(w) * h, is_valid ? 1 : 0) {}

    std::size_t index(int row, int col) const { return std::size_t(row) * width + col; }
    double at(int row, int col) const { return values[index(row, col)]; }
    bool is_valid(int row, int col) const { return valid[index(row, col)] != 0; }
    std::size_t size() const { return values.size(); }
    std::size_t valid_count() const;

    /// Throws ValidationError unless every valid entry is finite and > 0.
    void validate() const;
};

/// Row-major H x W x 3 colour image, channels in [0, 1].
struct ColorImage {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    ColorImage() = default;
    ColorImage(int w, int h, double fill = 0.0) : width(w), height(h), values(std::size_t(w) * h * 3, fill) {}

    std::size_t index(int row, int col) const { return (std::size_t(row) * width + col) * 3; }
    std::array<double, 3> pixel(int row, int col) const {
        const auto i = index(row, col);
        return {values[i], values[i + 1], values[i + 2]};
    }
    void set_pixel(int row, int col, const std::array<double, 3>& rgb) {
        const auto i = index(row, col);
        values[i] = rgb[0];
        values[i + 1] = rgb[1];
        values[i + 2] = rgb[2];
    }

    void validate() const;
};

/// Backward flow: displacement in the source frame at which each target pixel finds its content.
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<double> values;  // interleaved (dx, dy)

    FlowField() = default;
    FlowField(int w, int h, double fill = 0.0) : width(w), height(h), values(std::size_t(w) * h * 2, fill) {}

    std::size_t index(int row, int col) const { return (std::size_t(row) * width + col) * 2; }
    double dx(int row, int col) const { return values[index(row, col)]; }
    double dy(int row, int col) const { return values[index(row, col) + 1]; }

    void validate() const;
};

/// Per-pixel weights in [0, 1]; also used for binary hole / inpaint masks.
struct WeightMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    WeightMap() = default;
    WeightMap(int w, int h, double fill = 0.0) : width(w), height(h), values(std::size_t(w) * h, fill) {}

    std::size_t index(int row, int col) const { return std::size_t(row) * width + col; }
    double at(int row, int col) const { return values[index(row, col)]; }
    double mean() const;

    void validate() const;
};

/// Throws DimensionError with `what` in the message if the two resolutions differ.
void require_same_size(int w0, int h0, int w1, int h1, const char* what);

template <class A, class B>
void require_same_size(const A& a, const B& b, const char* what) {
    require_same_size(a.width, a.height, b.width, b.height, what);
}

}  // namespace pw
