#pragma once

#include <vector>

#include "pw/image.hpp"

namespace pw {

/// Row `row` of every frame stacked over time: T x W, invalid where the source pixel is.
DepthMap xt_slice(const std::vector<DepthMap>& frames, int row);

/// Mean |D_{t+1}(x) - D_t(x)| over one row (default H / 2), pooled over every (t, x) valid in both
/// frames. Throws DegenerateError when no such pair exists.
double xt_slice_tv(const std::vector<DepthMap>& frames);
double xt_slice_tv(const std::vector<DepthMap>& frames, int row);

}  // namespace pw
