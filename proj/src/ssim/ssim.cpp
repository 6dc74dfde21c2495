#include "elseg/ssim.hpp"

#include <algorithm>
#include <cmath>

#include "elseg/error.hpp"

namespace elseg::ssim {
namespace {

void check_pair(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height) {
        throw ArgumentError("ssim: image dimensions differ (" + std::to_string(a.width) + "x" +
                            std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                            std::to_string(b.height) + ")");
    }
    if (a.empty()) {
        throw ArgumentError("ssim: empty images");
    }
}

/// Separable Gaussian filter with mirror padding, and its adjoint.
class Filter {
public:
    Filter(int width, int height, const SsimParams& p)
        : w_(width), h_(height), taps_(gaussian_taps(p.window_size, p.sigma())),
          radius_(p.window_size / 2) {
        col_idx_ = table(w_);
        row_idx_ = table(h_);
    }

    std::vector<double> apply(const std::vector<double>& src) const {
        const std::size_t n = taps_.size();
        std::vector<double> tmp(src.size()), out(src.size());
        for (int y = 0; y < h_; ++y) {
            const double* row = src.data() + static_cast<std::size_t>(y) * w_;
            for (int x = 0; x < w_; ++x) {
                const int* idx = col_idx_.data() + static_cast<std::size_t>(x) * n;
                double acc = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    acc += taps_[k] * row[idx[k]];
                }
                tmp[static_cast<std::size_t>(y) * w_ + x] = acc;
            }
        }
        for (int y = 0; y < h_; ++y) {
            const int* idx = row_idx_.data() + static_cast<std::size_t>(y) * n;
            for (int x = 0; x < w_; ++x) {
                double acc = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    acc += taps_[k] * tmp[static_cast<std::size_t>(idx[k]) * w_ + x];
                }
                out[static_cast<std::size_t>(y) * w_ + x] = acc;
            }
        }
        return out;
    }

    std::vector<double> adjoint(const std::vector<double>& src) const {
        const std::size_t n = taps_.size();
        std::vector<double> tmp(src.size(), 0.0), out(src.size(), 0.0);
        for (int y = 0; y < h_; ++y) {
            const int* idx = row_idx_.data() + static_cast<std::size_t>(y) * n;
            for (int x = 0; x < w_; ++x) {
                const double v = src[static_cast<std::size_t>(y) * w_ + x];
                for (std::size_t k = 0; k < n; ++k) {
                    tmp[static_cast<std::size_t>(idx[k]) * w_ + x] += taps_[k] * v;
                }
            }
        }
        for (int y = 0; y < h_; ++y) {
            double* row = out.data() + static_cast<std::size_t>(y) * w_;
            for (int x = 0; x < w_; ++x) {
                const int* idx = col_idx_.data() + static_cast<std::size_t>(x) * n;
                const double v = tmp[static_cast<std::size_t>(y) * w_ + x];
                for (std::size_t k = 0; k < n; ++k) {
                    row[idx[k]] += taps_[k] * v;
                }
            }
        }
        return out;
    }

private:
    std::vector<int> table(int len) const {
        const std::size_t n = taps_.size();
        std::vector<int> t(static_cast<std::size_t>(len) * n);
        for (int i = 0; i < len; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                t[static_cast<std::size_t>(i) * n + k] = mirror_index(i + static_cast<int>(k) - radius_, len);
            }
        }
        return t;
    }

    int w_, h_;
    std::vector<double> taps_;
    int radius_;
    std::vector<int> col_idx_, row_idx_;
};

struct Moments {
    std::vector<double> mu_a, mu_b, e_aa, e_bb, e_ab;
};

Moments moments(const Filter& f, const Image& a, const Image& b) {
    std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        aa[i] = a.data[i] * a.data[i];
        bb[i] = b.data[i] * b.data[i];
        ab[i] = a.data[i] * b.data[i];
    }
    return {f.apply(a.data), f.apply(b.data), f.apply(aa), f.apply(bb), f.apply(ab)};
}

}  // namespace

void SsimParams::validate() const {
    if (window_size < 3 || window_size % 2 == 0) {
        throw ArgumentError("ssim window size must be odd and >= 3");
    }
    if (!(k1 > 0.0) || !(k2 > 0.0) || !(dynamic_range > 0.0)) {
        throw ArgumentError("ssim constants k1, k2 and dynamic range must be positive");
    }
}

SsimParams loss_preset(double dynamic_range) {
    return SsimParams{7, 0.0, 0.001, 0.03, dynamic_range};
}

SsimParams disparity_preset(double dynamic_range) {
    return SsimParams{11, 0.0, 0.001, 0.05, dynamic_range};
}

int mirror_index(int i, int n) {
    if (n == 1) {
        return 0;
    }
    const int period = 2 * n;
    i %= period;
    if (i < 0) {
        i += period;
    }
    return i < n ? i : period - 1 - i;
}

std::vector<double> gaussian_taps(int size, double sigma) {
    if (size < 3 || size % 2 == 0) {
        throw ArgumentError("gaussian window size must be odd and >= 3");
    }
    if (!(sigma > 0.0)) {
        throw ArgumentError("gaussian sigma must be positive");
    }
    const int r = size / 2;
    std::vector<double> g(static_cast<std::size_t>(size));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
        g[static_cast<std::size_t>(i + r)] = v;
        sum += v;
    }
    for (double& v : g) {
        v /= sum;
    }
    return g;
}

Window gaussian_window(int size, double sigma) {
    const auto g = gaussian_taps(size, sigma);
    Window w;
    w.size = size;
    w.weights.resize(static_cast<std::size_t>(size) * size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            w.weights[static_cast<std::size_t>(y) * size + x] = g[y] * g[x];
        }
    }
    return w;
}

DisparityMap ssim_map(const Image& a, const Image& b, const SsimParams& p) {
    p.validate();
    check_pair(a, b);
    const Filter f(a.width, a.height, p);
    const Moments m = moments(f, a, b);
    const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
    const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);

    DisparityMap out{a.width, a.height, std::vector<double>(a.size())};
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double mu_a = m.mu_a[i], mu_b = m.mu_b[i];
        const double var_a = m.e_aa[i] - mu_a * mu_a;
        const double var_b = m.e_bb[i] - mu_b * mu_b;
        const double cov = m.e_ab[i] - mu_a * mu_b;
        const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
        const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
        out.values[i] = std::clamp(num / den, -1.0, 1.0);
    }
    return out;
}

double mean_ssim(const Image& a, const Image& b, const SsimParams& p) {
    const auto m = ssim_map(a, b, p);
    double sum = 0.0;
    for (double v : m.values) {
        sum += v;
    }
    return sum / static_cast<double>(m.values.size());
}

SsimGradient mean_ssim_with_gradient(const Image& a, const Image& b, const SsimParams& p) {
    p.validate();
    check_pair(a, b);
    const Filter f(a.width, a.height, p);
    const Moments m = moments(f, a, b);
    const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
    const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
    const std::size_t n = a.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    // Per-pixel sensitivities to mu_b, E[b^2] and E[ab].
    std::vector<double> d_mu(n), d_bb(n), d_ab(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double mu_a = m.mu_a[i], mu_b = m.mu_b[i];
        const double var_a = m.e_aa[i] - mu_a * mu_a;
        const double var_b = m.e_bb[i] - mu_b * mu_b;
        const double cov = m.e_ab[i] - mu_a * mu_b;
        const double l_num = 2.0 * mu_a * mu_b + c1;
        const double s_num = 2.0 * cov + c2;
        const double l_den = mu_a * mu_a + mu_b * mu_b + c1;
        const double s_den = var_a + var_b + c2;
        const double den = l_den * s_den;
        const double s = l_num * s_num / den;
        sum += s;

        const double ds_lnum = s_num / den;
        const double ds_snum = l_num / den;
        const double ds_lden = -s / l_den;
        const double ds_sden = -s / s_den;
        d_mu[i] = inv_n * (2.0 * mu_a * ds_lnum - 2.0 * mu_a * ds_snum + 2.0 * mu_b * ds_lden -
                           2.0 * mu_b * ds_sden);
        d_bb[i] = inv_n * ds_sden;
        d_ab[i] = inv_n * 2.0 * ds_snum;
    }

    const auto g_mu = f.adjoint(d_mu);
    const auto g_bb = f.adjoint(d_bb);
    const auto g_ab = f.adjoint(d_ab);
    SsimGradient out;
    out.mean = sum * inv_n;
    out.d_b.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.d_b[i] = g_mu[i] + 2.0 * b.data[i] * g_bb[i] + a.data[i] * g_ab[i];
    }
    return out;
}

Image disparity_heatmap(const DisparityMap& m) {
    Image img(m.width, m.height);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        img.data[i] = 255.0 * (1.0 - m.values[i]) / 2.0;
    }
    return img;
}

}  // namespace elseg::ssim
