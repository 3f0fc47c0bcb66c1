#include "pw/image.hpp"

#include <cmath>
#include <string>

#include "pw/errors.hpp"

namespace pw {

std::size_t DepthMap::valid_count() const {
    std::size_t n = 0;
    for (auto v : valid) n += v != 0;
    return n;
}

void DepthMap::validate() const {
    if (width <= 0 || height <= 0) throw ValidationError("depth map has empty resolution");
    if (values.size() != size_t(width) * height || valid.size() != values.size())
        throw ValidationError("depth map buffers do not match resolution");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (valid[i] && !(std::isfinite(values[i]) && values[i] > 0.0))
            throw ValidationError("depth map has a valid entry that is not finite and positive at index " +
                                  std::to_string(i));
    }
}

void ColorImage::validate() const {
    if (width <= 0 || height <= 0) throw ValidationError("colour image has empty resolution");
    if (values.size() != size_t(width) * height * 3) throw ValidationError("colour buffer does not match resolution");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]) || values[i] < 0.0 || values[i] > 1.0)
            throw ValidationError("colour value outside [0,1] at index " + std::to_string(i));
    }
}

void FlowField::validate() const {
    if (values.size() != size_t(width) * height * 2) throw ValidationError("flow buffer does not match resolution");
    for (double v : values)
        if (!std::isfinite(v)) throw ValidationError("flow field contains a non-finite displacement");
}

double WeightMap::mean() const {
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (double v : values) s += v;
    return s / double(values.size());
}

void WeightMap::validate() const {
    if (values.size() != size_t(width) * height) throw ValidationError("weight buffer does not match resolution");
    for (double v : values)
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("weight outside [0,1]");
}

void require_same_size(int w0, int h0, int w1, int h1, const char* what) {
    if (w0 != w1 || h0 != h1) {
        throw DimensionError(std::string(what) + ": resolution mismatch (" + std::to_string(w0) + "x" +
                             std::to_string(h0) + " vs " + std::to_string(w1) + "x" + std::to_string(h1) + ")");
    }
}

}  // namespace pw
