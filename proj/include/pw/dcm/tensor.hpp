#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace pw::dcm {

/// Dense NCHW tensor of doubles.
struct Tensor {
    std::array<int, 4> shape{0, 0, 0, 0};
    std::vector<double> data;

    Tensor() = default;
    Tensor(int n, int c, int h, int w, double fill = 0.0)
        : shape{n, c, h, w}, data(std::size_t(n) * c * h * w, fill) {}

    int n() const { return shape[0]; }
    int c() const { return shape[1]; }
    int h() const { return shape[2]; }
    int w() const { return shape[3]; }
    std::size_t size() const { return data.size(); }
    std::size_t plane() const { return std::size_t(h()) * w(); }

    double& at(int b, int ch, int y, int x) { return data[((std::size_t(b) * c() + ch) * h() + y) * w() + x]; }
    double at(int b, int ch, int y, int x) const { return data[((std::size_t(b) * c() + ch) * h() + y) * w() + x]; }

    double* sample(int b) { return data.data() + std::size_t(b) * c() * plane(); }
    const double* sample(int b) const { return data.data() + std::size_t(b) * c() * plane(); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    std::string shape_string() const;
};

/// A named trainable tensor. Gradients live in a parallel list (see Gradients).
struct Parameter {
    std::string name;
    Tensor value;
};

using Gradients = std::vector<Tensor>;

}  // namespace pw::dcm
