#include <cmath>

#include "elseg/autoenc.hpp"
#include "elseg/error.hpp"

namespace elseg::ae {
namespace {

void conv_forward(const Layer& L, const Tensor& x, Tensor& y) {
    const int kh = L.spec.kernel_h, kw = L.spec.kernel_w;
    const int sh = L.spec.stride_h, sw = L.spec.stride_w;
    const int ci_n = L.in.c, co_n = L.out.c;
    const double* W = L.weights.data();
    for (int oy = 0; oy < L.out.h; ++oy) {
        for (int ox = 0; ox < L.out.w; ++ox) {
            double* yo = &y.data[(static_cast<std::size_t>(oy) * L.out.w + ox) * co_n];
            for (int co = 0; co < co_n; ++co) {
                yo[co] = L.bias[co];
            }
            for (int ky = 0; ky < kh; ++ky) {
                const int iy = oy * sh + ky - L.pad_top;
                if (iy < 0 || iy >= L.in.h) continue;
                for (int kx = 0; kx < kw; ++kx) {
                    const int ix = ox * sw + kx - L.pad_left;
                    if (ix < 0 || ix >= L.in.w) continue;
                    const double* xi = &x.data[(static_cast<std::size_t>(iy) * L.in.w + ix) * ci_n];
                    const double* wk = W + static_cast<std::size_t>(ky * kw + kx) * ci_n * co_n;
                    for (int ci = 0; ci < ci_n; ++ci) {
                        const double v = xi[ci];
                        const double* wr = wk + static_cast<std::size_t>(ci) * co_n;
                        for (int co = 0; co < co_n; ++co) {
                            yo[co] += v * wr[co];
                        }
                    }
                }
            }
        }
    }
}

void conv_backward(const Layer& L, const Tensor& x, const Tensor& dz, std::vector<double>& dW,
                   std::vector<double>& db, Tensor& dx) {
    const int kh = L.spec.kernel_h, kw = L.spec.kernel_w;
    const int sh = L.spec.stride_h, sw = L.spec.stride_w;
    const int ci_n = L.in.c, co_n = L.out.c;
    const double* W = L.weights.data();
    for (int oy = 0; oy < L.out.h; ++oy) {
        for (int ox = 0; ox < L.out.w; ++ox) {
            const double* g = &dz.data[(static_cast<std::size_t>(oy) * L.out.w + ox) * co_n];
            for (int co = 0; co < co_n; ++co) {
                db[co] += g[co];
            }
            for (int ky = 0; ky < kh; ++ky) {
                const int iy = oy * sh + ky - L.pad_top;
                if (iy < 0 || iy >= L.in.h) continue;
                for (int kx = 0; kx < kw; ++kx) {
                    const int ix = ox * sw + kx - L.pad_left;
                    if (ix < 0 || ix >= L.in.w) continue;
                    const std::size_t xoff = (static_cast<std::size_t>(iy) * L.in.w + ix) * ci_n;
                    const double* xi = &x.data[xoff];
                    double* dxi = &dx.data[xoff];
                    const std::size_t woff = static_cast<std::size_t>(ky * kw + kx) * ci_n * co_n;
                    for (int ci = 0; ci < ci_n; ++ci) {
                        const double v = xi[ci];
                        const double* wr = W + woff + static_cast<std::size_t>(ci) * co_n;
                        double* dwr = dW.data() + woff + static_cast<std::size_t>(ci) * co_n;
                        double acc = 0.0;
                        for (int co = 0; co < co_n; ++co) {
                            dwr[co] += v * g[co];
                            acc += wr[co] * g[co];
                        }
                        dxi[ci] += acc;
                    }
                }
            }
        }
    }
}

// Transposed convolution: input pixel i scatters to output i*stride + k - pad.
void deconv_forward(const Layer& L, const Tensor& x, Tensor& y) {
    const int kh = L.spec.kernel_h, kw = L.spec.kernel_w;
    const int sh = L.spec.stride_h, sw = L.spec.stride_w;
    const int ci_n = L.in.c, co_n = L.out.c;
    const double* W = L.weights.data();
    for (std::size_t p = 0; p < L.out.count() / co_n; ++p) {
        for (int co = 0; co < co_n; ++co) {
            y.data[p * co_n + co] = L.bias[co];
        }
    }
    for (int iy = 0; iy < L.in.h; ++iy) {
        for (int ix = 0; ix < L.in.w; ++ix) {
            const double* xi = &x.data[(static_cast<std::size_t>(iy) * L.in.w + ix) * ci_n];
            for (int ky = 0; ky < kh; ++ky) {
                const int oy = iy * sh + ky - L.pad_top;
                if (oy < 0 || oy >= L.out.h) continue;
                for (int kx = 0; kx < kw; ++kx) {
                    const int ox = ix * sw + kx - L.pad_left;
                    if (ox < 0 || ox >= L.out.w) continue;
                    double* yo = &y.data[(static_cast<std::size_t>(oy) * L.out.w + ox) * co_n];
                    const double* wk = W + static_cast<std::size_t>(ky * kw + kx) * ci_n * co_n;
                    for (int ci = 0; ci < ci_n; ++ci) {
                        const double v = xi[ci];
                        const double* wr = wk + static_cast<std::size_t>(ci) * co_n;
                        for (int co = 0; co < co_n; ++co) {
                            yo[co] += v * wr[co];
                        }
                    }
                }
            }
        }
    }
}

void deconv_backward(const Layer& L, const Tensor& x, const Tensor& dz, std::vector<double>& dW,
                     std::vector<double>& db, Tensor& dx) {
    const int kh = L.spec.kernel_h, kw = L.spec.kernel_w;
    const int sh = L.spec.stride_h, sw = L.spec.stride_w;
    const int ci_n = L.in.c, co_n = L.out.c;
    const double* W = L.weights.data();
    for (std::size_t p = 0; p < L.out.count() / co_n; ++p) {
        for (int co = 0; co < co_n; ++co) {
            db[co] += dz.data[p * co_n + co];
        }
    }
    for (int iy = 0; iy < L.in.h; ++iy) {
        for (int ix = 0; ix < L.in.w; ++ix) {
            const std::size_t xoff = (static_cast<std::size_t>(iy) * L.in.w + ix) * ci_n;
            const double* xi = &x.data[xoff];
            double* dxi = &dx.data[xoff];
            for (int ky = 0; ky < kh; ++ky) {
                const int oy = iy * sh + ky - L.pad_top;
                if (oy < 0 || oy >= L.out.h) continue;
                for (int kx = 0; kx < kw; ++kx) {
                    const int ox = ix * sw + kx - L.pad_left;
                    if (ox < 0 || ox >= L.out.w) continue;
                    const double* g = &dz.data[(static_cast<std::size_t>(oy) * L.out.w + ox) * co_n];
                    const std::size_t woff = static_cast<std::size_t>(ky * kw + kx) * ci_n * co_n;
                    for (int ci = 0; ci < ci_n; ++ci) {
                        const double v = xi[ci];
                        const double* wr = W + woff + static_cast<std::size_t>(ci) * co_n;
                        double* dwr = dW.data() + woff + static_cast<std::size_t>(ci) * co_n;
                        double acc = 0.0;
                        for (int co = 0; co < co_n; ++co) {
                            dwr[co] += v * g[co];
                            acc += wr[co] * g[co];
                        }
                        dxi[ci] += acc;
                    }
                }
            }
        }
    }
}

void dense_forward(const Layer& L, const Tensor& x, Tensor& y) {
    const std::size_t n_in = L.in.count(), n_out = L.out.count();
    for (std::size_t o = 0; o < n_out; ++o) {
        y.data[o] = L.bias[o];
    }
    for (std::size_t i = 0; i < n_in; ++i) {
        const double v = x.data[i];
        if (v == 0.0) continue;
        const double* wr = &L.weights[i * n_out];
        for (std::size_t o = 0; o < n_out; ++o) {
            y.data[o] += v * wr[o];
        }
    }
}

void dense_backward(const Layer& L, const Tensor& x, const Tensor& dz, std::vector<double>& dW,
                    std::vector<double>& db, Tensor& dx) {
    const std::size_t n_in = L.in.count(), n_out = L.out.count();
    for (std::size_t o = 0; o < n_out; ++o) {
        db[o] += dz.data[o];
    }
    for (std::size_t i = 0; i < n_in; ++i) {
        const double v = x.data[i];
        const double* wr = &L.weights[i * n_out];
        double* dwr = &dW[i * n_out];
        double acc = 0.0;
        for (std::size_t o = 0; o < n_out; ++o) {
            dwr[o] += v * dz.data[o];
            acc += wr[o] * dz.data[o];
        }
        dx.data[i] += acc;
    }
}

void activate(Activation a, double alpha, const Tensor& z, Tensor& y) {
    switch (a) {
    case Activation::none:
        y.data = z.data;
        break;
    case Activation::leaky_relu:
        for (std::size_t i = 0; i < z.data.size(); ++i) {
            const double v = z.data[i];
            y.data[i] = v > 0.0 ? v : alpha * v;
        }
        break;
    case Activation::sigmoid:
        for (std::size_t i = 0; i < z.data.size(); ++i) {
            y.data[i] = 1.0 / (1.0 + std::exp(-z.data[i]));
        }
        break;
    }
}

/// dL/dz from dL/dy, given z and y = act(z).
Tensor activation_backward(Activation a, double alpha, const Tensor& z, const Tensor& y, const Tensor& dy) {
    Tensor dz(dy.shape);
    switch (a) {
    case Activation::none:
        dz.data = dy.data;
        break;
    case Activation::leaky_relu:
        for (std::size_t i = 0; i < dy.data.size(); ++i) {
            dz.data[i] = z.data[i] > 0.0 ? dy.data[i] : alpha * dy.data[i];
        }
        break;
    case Activation::sigmoid:
        for (std::size_t i = 0; i < dy.data.size(); ++i) {
            dz.data[i] = dy.data[i] * y.data[i] * (1.0 - y.data[i]);
        }
        break;
    }
    return dz;
}

Tensor run(const Model& m, const Tensor& x, Trace* trace) {
    if (x.shape != m.input_shape || x.data.size() != x.shape.count()) {
        throw ArgumentError("forward: input shape " + to_string(x.shape) + " does not match model input " +
                            to_string(m.input_shape));
    }
    if (trace) {
        trace->inputs.clear();
        trace->preact.clear();
    }
    Tensor cur = x;
    for (const Layer& L : m.layers) {
        Tensor z(L.out);
        switch (L.spec.kind) {
        case LayerKind::conv:
            conv_forward(L, cur, z);
            break;
        case LayerKind::deconv:
            deconv_forward(L, cur, z);
            break;
        case LayerKind::dense:
            dense_forward(L, cur, z);
            break;
        case LayerKind::flatten:
            z.data = cur.data;
            break;
        }
        Tensor y(L.out);
        activate(L.spec.activation, m.leaky_alpha, z, y);
        if (trace) {
            trace->inputs.push_back(std::move(cur));
            trace->preact.push_back(std::move(z));
        }
        cur = std::move(y);
    }
    if (trace) {
        trace->output = cur;
    }
    return cur;
}

}  // namespace

Tensor forward(const Model& m, const Tensor& x) { return run(m, x, nullptr); }

Tensor forward(const Model& m, const Tensor& x, Trace& trace) { return run(m, x, &trace); }

Gradients Gradients::zeros_like(const Model& m) {
    Gradients g;
    for (const Layer& L : m.layers) {
        g.weights.emplace_back(L.weights.size(), 0.0);
        g.bias.emplace_back(L.bias.size(), 0.0);
    }
    return g;
}

void Gradients::add(const Gradients& o, double scale) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (std::size_t i = 0; i < weights[l].size(); ++i) weights[l][i] += scale * o.weights[l][i];
        for (std::size_t i = 0; i < bias[l].size(); ++i) bias[l][i] += scale * o.bias[l][i];
    }
}

Tensor backward(const Model& m, const Trace& trace, const Tensor& d_output, Gradients& grads) {
    Tensor dy = d_output;
    for (std::size_t l = m.layers.size(); l-- > 0;) {
        const Layer& L = m.layers[l];
        const Tensor& x = trace.inputs[l];
        const Tensor& z = trace.preact[l];
        const Tensor& y = (l + 1 < m.layers.size()) ? trace.inputs[l + 1] : trace.output;
        Tensor dz = activation_backward(L.spec.activation, m.leaky_alpha, z, y, dy);
        Tensor dx(L.in);
        switch (L.spec.kind) {
        case LayerKind::conv:
            conv_backward(L, x, dz, grads.weights[l], grads.bias[l], dx);
            break;
        case LayerKind::deconv:
            deconv_backward(L, x, dz, grads.weights[l], grads.bias[l], dx);
            break;
        case LayerKind::dense:
            dense_backward(L, x, dz, grads.weights[l], grads.bias[l], dx);
            break;
        case LayerKind::flatten:
            dx.data = dz.data;
            break;
        }
        dy = std::move(dx);
    }
    return dy;
}

Tensor tensor_from_image(const Image& img) {
    Tensor t(Shape{img.height, img.width, 1});
    t.data = img.data;
    return t;
}

Image image_from_tensor(const Tensor& t) {
    if (t.shape.c != 1) {
        throw ArgumentError("image_from_tensor: expected a single channel");
    }
    Image img(t.shape.w, t.shape.h);
    img.data = t.data;
    return img;
}

double loss(const Model& m, const Tensor& x, const ssim::SsimParams& p) {
    const Tensor y = forward(m, x);
    return -ssim::mean_ssim(image_from_tensor(x), image_from_tensor(y), p);
}

double loss_and_gradient(const Model& m, const Tensor& x, const ssim::SsimParams& p, Gradients& grads) {
    Trace trace;
    const Tensor y = forward(m, x, trace);
    const auto g = ssim::mean_ssim_with_gradient(image_from_tensor(x), image_from_tensor(y), p);
    Tensor dy(y.shape);
    for (std::size_t i = 0; i < dy.data.size(); ++i) {
        dy.data[i] = -g.d_b[i];
    }
    backward(m, trace, dy, grads);
    return -g.mean;
}

}  // namespace elseg::ae
