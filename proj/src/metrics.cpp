#include "pw/metrics.hpp"

#include <cmath>

#include "pw/errors.hpp"

namespace pw {

DepthMap xt_slice(const std::vector<DepthMap>& frames, int row) {
    if (frames.empty()) throw DegenerateError("xt_slice: no frames");
    const int w = frames.front().width;
    DepthMap out(w, int(frames.size()));
    for (std::size_t t = 0; t < frames.size(); ++t) {
        require_same_size(frames[t], frames.front(), "xt_slice");
        if (row < 0 || row >= frames[t].height) throw DimensionError("xt_slice: row outside the frame");
        for (int x = 0; x < w; ++x) {
            const auto src = frames[t].index(row, x);
            const auto dst = out.index(int(t), x);
            out.values[dst] = frames[t].valid[src] ? frames[t].values[src] : 0.0;
            out.valid[dst] = frames[t].valid[src];
        }
    }
    return out;
}

double xt_slice_tv(const std::vector<DepthMap>& frames) {
    if (frames.empty()) throw DegenerateError("xt_slice_tv needs at least 2 frames");
    return xt_slice_tv(frames, frames.front().height / 2);
}

double xt_slice_tv(const std::vector<DepthMap>& frames, int row) {
    if (frames.size() < 2) throw DegenerateError("xt_slice_tv needs at least 2 frames");
    const DepthMap slice = xt_slice(frames, row);
    double sum = 0.0;
    std::size_t count = 0;
    for (int t = 0; t + 1 < slice.height; ++t)
        for (int x = 0; x < slice.width; ++x) {
            if (!slice.is_valid(t, x) || !slice.is_valid(t + 1, x)) continue;
            sum += std::abs(slice.at(t + 1, x) - slice.at(t, x));
            ++count;
        }
    if (count == 0) throw DegenerateError("xt_slice_tv: no pixel valid in consecutive frames");
    return sum / double(count);
}

}  // namespace pw
