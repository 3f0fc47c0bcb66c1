#include "pw/dcm/ops.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "pw/errors.hpp"

namespace pw::dcm {

std::string Tensor::shape_string() const {
    return "[" + std::to_string(shape[0]) + "," + std::to_string(shape[1]) + "," + std::to_string(shape[2]) + "," +
           std::to_string(shape[3]) + "]";
}

namespace ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

/// Unfolds one C x H x W sample into a (C*k*k) x (out_h*out_w) column matrix.
void im2col(const double* img, int channels, int h, int w, ConvSpec s, int out_h, int out_w, double* cols) {
    const int k = s.kernel;
    const std::size_t p = std::size_t(out_h) * out_w;
    for (int c = 0; c < channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* row = cols + (std::size_t(c * k + ky) * k + kx) * p;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * s.stride - s.pad + ky;
                    double* dst = row + std::size_t(oy) * out_w;
                    if (iy < 0 || iy >= h) {
                        for (int ox = 0; ox < out_w; ++ox) dst[ox] = 0.0;
                        continue;
                    }
                    const double* src = img + (std::size_t(c) * h + iy) * w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * s.stride - s.pad + kx;
                        dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

/// Adjoint of im2col: scatters columns back, accumulating into img.
void col2im(const double* cols, int channels, int h, int w, ConvSpec s, int out_h, int out_w, double* img) {
    const int k = s.kernel;
    const std::size_t p = std::size_t(out_h) * out_w;
    for (int c = 0; c < channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* row = cols + (std::size_t(c * k + ky) * k + kx) * p;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * s.stride - s.pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    double* dst = img + (std::size_t(c) * h + iy) * w;
                    const double* src = row + std::size_t(oy) * out_w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * s.stride - s.pad + kx;
                        if (ix >= 0 && ix < w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

int conv_out(int in, ConvSpec s) { return (in + 2 * s.pad - s.kernel) / s.stride + 1; }
int tconv_out(int in, ConvSpec s) { return (in - 1) * s.stride - 2 * s.pad + s.kernel; }

void require(bool ok, const std::string& what) {
    if (!ok) throw DimensionError(what);
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, ConvSpec spec) {
    const int cout = weight.n();
    const int cin = weight.c();
    require(x.c() == cin && weight.h() == spec.kernel && weight.w() == spec.kernel,
            "conv2d: weight " + weight.shape_string() + " incompatible with input " + x.shape_string());
    const int oh = conv_out(x.h(), spec);
    const int ow = conv_out(x.w(), spec);
    const std::size_t p = std::size_t(oh) * ow;
    const std::size_t kk = std::size_t(cin) * spec.kernel * spec.kernel;
    Tensor y(x.n(), cout, oh, ow);
    std::vector<double> cols(kk * p);
    ConstMapMat wm(weight.data.data(), cout, Eigen::Index(kk));
    for (int b = 0; b < x.n(); ++b) {
        im2col(x.sample(b), cin, x.h(), x.w(), spec, oh, ow, cols.data());
        MapMat ym(y.sample(b), cout, Eigen::Index(p));
        ym.noalias() = wm * ConstMapMat(cols.data(), Eigen::Index(kk), Eigen::Index(p));
        if (bias.size() != 0)
            for (int c = 0; c < cout; ++c) ym.row(c).array() += bias.data[std::size_t(c)];
    }
    return y;
}

Tensor conv2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out, ConvSpec spec,
                       Tensor& grad_weight, Tensor& grad_bias) {
    const int cout = weight.n();
    const int cin = weight.c();
    const int oh = grad_out.h();
    const int ow = grad_out.w();
    const std::size_t p = std::size_t(oh) * ow;
    const std::size_t kk = std::size_t(cin) * spec.kernel * spec.kernel;
    Tensor gx(x.n(), cin, x.h(), x.w());
    std::vector<double> cols(kk * p);
    std::vector<double> gcols(kk * p);
    ConstMapMat wm(weight.data.data(), cout, Eigen::Index(kk));
    MapMat gw(grad_weight.data.data(), cout, Eigen::Index(kk));
    for (int b = 0; b < x.n(); ++b) {
        im2col(x.sample(b), cin, x.h(), x.w(), spec, oh, ow, cols.data());
        ConstMapMat g(grad_out.sample(b), cout, Eigen::Index(p));
        gw.noalias() += g * ConstMapMat(cols.data(), Eigen::Index(kk), Eigen::Index(p)).transpose();
        if (grad_bias.size() != 0)
            for (int c = 0; c < cout; ++c) grad_bias.data[std::size_t(c)] += g.row(c).sum();
        MapMat gc(gcols.data(), Eigen::Index(kk), Eigen::Index(p));
        gc.noalias() = wm.transpose() * g;
        col2im(gcols.data(), cin, x.h(), x.w(), spec, oh, ow, gx.sample(b));
    }
    return gx;
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor& bias, ConvSpec spec) {
    const int cin = weight.n();
    const int cout = weight.c();
    require(x.c() == cin && weight.h() == spec.kernel && weight.w() == spec.kernel,
            "conv_transpose2d: weight " + weight.shape_string() + " incompatible with input " + x.shape_string());
    const int oh = tconv_out(x.h(), spec);
    const int ow = tconv_out(x.w(), spec);
    const std::size_t pin = x.plane();
    const std::size_t kk = std::size_t(cout) * spec.kernel * spec.kernel;
    Tensor y(x.n(), cout, oh, ow);
    std::vector<double> cols(kk * pin);
    ConstMapMat wm(weight.data.data(), cin, Eigen::Index(kk));
    for (int b = 0; b < x.n(); ++b) {
        MapMat cm(cols.data(), Eigen::Index(kk), Eigen::Index(pin));
        cm.noalias() = wm.transpose() * ConstMapMat(x.sample(b), cin, Eigen::Index(pin));
        double* out = y.sample(b);
        col2im(cols.data(), cout, oh, ow, spec, x.h(), x.w(), out);
        for (int c = 0; c < cout && bias.size() != 0; ++c) {
            double* plane = out + std::size_t(c) * y.plane();
            for (std::size_t i = 0; i < y.plane(); ++i) plane[i] += bias.data[std::size_t(c)];
        }
    }
    return y;
}

Tensor conv_transpose2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out, ConvSpec spec,
                                 Tensor& grad_weight, Tensor& grad_bias) {
    const int cin = weight.n();
    const int cout = weight.c();
    const std::size_t pin = x.plane();
    const std::size_t kk = std::size_t(cout) * spec.kernel * spec.kernel;
    Tensor gx(x.n(), cin, x.h(), x.w());
    std::vector<double> cols(kk * pin);
    ConstMapMat wm(weight.data.data(), cin, Eigen::Index(kk));
    MapMat gw(grad_weight.data.data(), cin, Eigen::Index(kk));
    for (int b = 0; b < x.n(); ++b) {
        im2col(grad_out.sample(b), cout, grad_out.h(), grad_out.w(), spec, x.h(), x.w(), cols.data());
        ConstMapMat gcols(cols.data(), Eigen::Index(kk), Eigen::Index(pin));
        ConstMapMat xm(x.sample(b), cin, Eigen::Index(pin));
        MapMat(gx.sample(b), cin, Eigen::Index(pin)).noalias() = wm * gcols;
        gw.noalias() += xm * gcols.transpose();
        const double* g = grad_out.sample(b);
        for (int c = 0; c < cout && grad_bias.size() != 0; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i < grad_out.plane(); ++i) s += g[std::size_t(c) * grad_out.plane() + i];
            grad_bias.data[std::size_t(c)] += s;
        }
    }
    return gx;
}

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, InstanceNormCache* cache) {
    Tensor y(x.n(), x.c(), x.h(), x.w());
    Tensor xhat(x.n(), x.c(), x.h(), x.w());
    std::vector<double> inv_std(std::size_t(x.n()) * x.c());
    const std::size_t m = x.plane();
    for (int b = 0; b < x.n(); ++b) {
        for (int c = 0; c < x.c(); ++c) {
            const std::size_t off = (std::size_t(b) * x.c() + c) * m;
            double mean = 0.0;
            for (std::size_t i = 0; i < m; ++i) mean += x.data[off + i];
            mean /= double(m);
            double var = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double d = x.data[off + i] - mean;
                var += d * d;
            }
            var /= double(m);
            const double is = 1.0 / std::sqrt(var + kInstanceNormEpsilon);
            inv_std[std::size_t(b) * x.c() + c] = is;
            const double g = gamma.data[std::size_t(c)];
            const double be = beta.data[std::size_t(c)];
            for (std::size_t i = 0; i < m; ++i) {
                const double xh = (x.data[off + i] - mean) * is;
                xhat.data[off + i] = xh;
                y.data[off + i] = g * xh + be;
            }
        }
    }
    if (cache != nullptr) {
        cache->normalized = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

Tensor instance_norm_backward(const InstanceNormCache& cache, const Tensor& gamma, const Tensor& grad_out,
                              Tensor& grad_gamma, Tensor& grad_beta) {
    const Tensor& xhat = cache.normalized;
    Tensor gx(xhat.n(), xhat.c(), xhat.h(), xhat.w());
    const std::size_t m = xhat.plane();
    const double inv_m = 1.0 / double(m);
    for (int b = 0; b < xhat.n(); ++b) {
        for (int c = 0; c < xhat.c(); ++c) {
            const std::size_t off = (std::size_t(b) * xhat.c() + c) * m;
            const double g = gamma.data[std::size_t(c)];
            double sum_g = 0.0;
            double sum_gx = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double go = grad_out.data[off + i];
                grad_gamma.data[std::size_t(c)] += go * xhat.data[off + i];
                grad_beta.data[std::size_t(c)] += go;
                sum_g += go * g;
                sum_gx += go * g * xhat.data[off + i];
            }
            const double is = cache.inv_std[std::size_t(b) * xhat.c() + c];
            for (std::size_t i = 0; i < m; ++i) {
                const double gxh = grad_out.data[off + i] * g;
                gx.data[off + i] = is * (gxh - inv_m * sum_g - xhat.data[off + i] * inv_m * sum_gx);
            }
        }
    }
    return gx;
}

Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data) v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!(x.data[i] > 0.0)) g.data[i] = 0.0;
    return g;
}

Tensor silu(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data) v = v / (1.0 + std::exp(-v));
    return y;
}

Tensor silu_backward(const Tensor& x, const Tensor& grad_out) {
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-x.data[i]));
        g.data[i] *= s * (1.0 + x.data[i] * (1.0 - s));
    }
    return g;
}

Tensor tanh(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data) v = std::tanh(v);
    return y;
}

Tensor tanh_backward(const Tensor& y, const Tensor& grad_out) {
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= 1.0 - y.data[i] * y.data[i];
    return g;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "add: shape mismatch " + a.shape_string() + " vs " + b.shape_string());
    Tensor y = a;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += b.data[i];
    return y;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require(a.n() == b.n() && a.h() == b.h() && a.w() == b.w(),
            "concat_channels: shape mismatch " + a.shape_string() + " vs " + b.shape_string());
    Tensor y(a.n(), a.c() + b.c(), a.h(), a.w());
    const std::size_t sa = std::size_t(a.c()) * a.plane();
    const std::size_t sb = std::size_t(b.c()) * b.plane();
    for (int n = 0; n < a.n(); ++n) {
        std::copy(a.sample(n), a.sample(n) + sa, y.sample(n));
        std::copy(b.sample(n), b.sample(n) + sb, y.sample(n) + sa);
    }
    return y;
}

void split_channels(const Tensor& grad, int channels_a, Tensor& grad_a, Tensor& grad_b) {
    grad_a = Tensor(grad.n(), channels_a, grad.h(), grad.w());
    grad_b = Tensor(grad.n(), grad.c() - channels_a, grad.h(), grad.w());
    const std::size_t sa = std::size_t(channels_a) * grad.plane();
    const std::size_t sb = grad_b.size() / std::size_t(std::max(1, grad.n()));
    for (int n = 0; n < grad.n(); ++n) {
        std::copy(grad.sample(n), grad.sample(n) + sa, grad_a.sample(n));
        std::copy(grad.sample(n) + sa, grad.sample(n) + sa + sb, grad_b.sample(n));
    }
}

}  // namespace ops
}  // namespace pw::dcm
