#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "ccgm/core/errors.hpp"
#include "ccgm/core/rng.hpp"
#include "ccgm/core/tensor.hpp"

namespace ccgm::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using MatMap = Eigen::Map<Mat<S>>;
template <typename S>
using ConstMatMap = Eigen::Map<const Mat<S>>;

template <typename S>
struct Param {
    std::string name;
    TensorT<S> value;
    TensorT<S> grad;

    void init(std::string n, std::initializer_list<std::size_t> shape) {
        name = std::move(n);
        value = TensorT<S>(shape);
        grad = TensorT<S>(shape);
    }
    void zero_grad() { grad.fill(S(0)); }
};

template <typename S>
void fill_normal(TensorT<S>& t, Rng& rng, double stddev) {
    for (auto& v : t.flat()) v = static_cast<S>(rng.normal() * stddev);
}

// ---------------------------------------------------------------------------
// Linear: y = x W^T + b, x is N x in.

template <typename S>
class Linear {
public:
    Linear() = default;
    Linear(std::string name, std::size_t in, std::size_t out, Rng& rng, bool bias = true)
        : in_(in), out_(out), has_bias_(bias) {
        w_.init(name + ".w", {out, in});
        fill_normal(w_.value, rng, std::sqrt(2.0 / static_cast<double>(in)));
        if (has_bias_) b_.init(name + ".b", {out});
    }

    TensorT<S> forward(const TensorT<S>& x) {
        x_ = x;
        const std::size_t n = x.dim(0);
        TensorT<S> y({n, out_});
        ConstMatMap<S> xm(x.data(), in_, n);   // column-major view: features x samples
        ConstMatMap<S> wm(w_.value.data(), in_, out_);
        MatMap<S> ym(y.data(), out_, n);
        // Per-sample products keep batched evaluation bit-identical to
        // stacked single-sample calls.
        for (std::size_t s = 0; s < n; ++s)
            ym.col(static_cast<Eigen::Index>(s)).noalias() =
                wm.transpose() * xm.col(static_cast<Eigen::Index>(s));
        if (has_bias_) {
            ConstMatMap<S> bm(b_.value.data(), out_, 1);
            ym.colwise() += bm.col(0);
        }
        return y;
    }

    TensorT<S> backward(const TensorT<S>& dy) {
        const std::size_t n = dy.dim(0);
        TensorT<S> dx({n, in_});
        ConstMatMap<S> dym(dy.data(), out_, n);
        ConstMatMap<S> xm(x_.data(), in_, n);
        ConstMatMap<S> wm(w_.value.data(), in_, out_);
        MatMap<S> dwm(w_.grad.data(), in_, out_);
        MatMap<S> dxm(dx.data(), in_, n);
        dwm.noalias() += xm * dym.transpose();
        dxm.noalias() = wm * dym;
        if (has_bias_) {
            MatMap<S> dbm(b_.grad.data(), out_, 1);
            dbm.col(0) += dym.rowwise().sum();
        }
        return dx;
    }

    Param<S>& weight() { return w_; }
    Param<S>& bias() { return b_; }
    bool has_bias() const { return has_bias_; }
    std::size_t in() const { return in_; }
    std::size_t out() const { return out_; }

    void collect(std::vector<Param<S>*>& out) {
        out.push_back(&w_);
        if (has_bias_) out.push_back(&b_);
    }

private:
    std::size_t in_ = 0, out_ = 0;
    bool has_bias_ = true;
    Param<S> w_, b_;
    TensorT<S> x_;
};

// ---------------------------------------------------------------------------
// Conv2d with zero padding; weight is OC x IC x KH x KW.

template <typename S>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t k,
           std::size_t stride, std::size_t pad, Rng& rng)
        : ic_(in_ch), oc_(out_ch), k_(k), stride_(stride), pad_(pad) {
        w_.init(name + ".w", {oc_, ic_, k_, k_});
        fill_normal(w_.value, rng, std::sqrt(2.0 / static_cast<double>(ic_ * k_ * k_)));
        b_.init(name + ".b", {oc_});
    }

    std::size_t out_side(std::size_t side) const { return (side + 2 * pad_ - k_) / stride_ + 1; }

    TensorT<S> forward(const TensorT<S>& x) {
        x_ = x;
        const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
        const std::size_t oh = out_side(h), ow = out_side(w);
        TensorT<S> col = im2col(x);
        TensorT<S> y({n, oc_, oh, ow});
        const std::size_t kdim = ic_ * k_ * k_;
        const std::size_t p = oh * ow;
        ConstMatMap<S> wm(w_.value.data(), kdim, oc_);
        Mat<S> prod(p, oc_);
        for (std::size_t s = 0; s < n; ++s) {
            // Per-sample product: batched evaluation stays bit-identical to
            // stacked single-sample calls. The row-major (p x kdim) slice of
            // the col buffer reads as its transpose under a column-major map.
            ConstMatMap<S> colm(col.data() + s * p * kdim, kdim, p);
            prod.noalias() = colm.transpose() * wm;
            for (std::size_t c = 0; c < oc_; ++c)
                for (std::size_t i = 0; i < p; ++i)
                    y[((s * oc_ + c) * p) + i] =
                        prod(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) +
                        b_.value[c];
        }
        return y;
    }

    TensorT<S> backward(const TensorT<S>& dy, bool want_dx = true) {
        const std::size_t n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
        const std::size_t oh = out_side(h), ow = out_side(w);
        const std::size_t kdim = ic_ * k_ * k_;
        const std::size_t p = oh * ow;
        const std::size_t cols = n * p;

        Mat<S> dyb(cols, oc_);
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t c = 0; c < oc_; ++c)
                for (std::size_t i = 0; i < p; ++i)
                    dyb(static_cast<Eigen::Index>(s * p + i), static_cast<Eigen::Index>(c)) =
                        dy[((s * oc_ + c) * p) + i];

        TensorT<S> col = im2col(x_);
        ConstMatMap<S> colm(col.data(), kdim, cols);
        MatMap<S> dwm(w_.grad.data(), kdim, oc_);
        dwm.noalias() += colm * dyb;
        MatMap<S> dbm(b_.grad.data(), oc_, 1);
        dbm.col(0) += dyb.colwise().sum().transpose();

        if (!want_dx) return TensorT<S>();
        ConstMatMap<S> wm(w_.value.data(), kdim, oc_);
        Mat<S> dcol(cols, kdim);
        dcol.noalias() = dyb * wm.transpose();
        return col2im(dcol, n, h, w);
    }

    // Effective-weight hook used by the spectral-norm wrapper.
    Param<S>& weight() { return w_; }
    Param<S>& bias() { return b_; }
    std::size_t in_channels() const { return ic_; }
    std::size_t kernel() const { return k_; }

    void collect(std::vector<Param<S>*>& out) {
        out.push_back(&w_);
        out.push_back(&b_);
    }

private:
    // Row-major col buffer: rows = n*oh*ow, cols = ic*k*k.
    TensorT<S> im2col(const TensorT<S>& x) const {
        const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
        const std::size_t oh = out_side(h), ow = out_side(w);
        const std::size_t kdim = ic_ * k_ * k_;
        TensorT<S> col({n * oh * ow, kdim});
        S* out = col.data();
        for (std::size_t s = 0; s < n; ++s) {
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    for (std::size_t c = 0; c < ic_; ++c) {
                        for (std::size_t ky = 0; ky < k_; ++ky) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(oy * stride_ + ky) -
                                static_cast<std::ptrdiff_t>(pad_);
                            for (std::size_t kx = 0; kx < k_; ++kx) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * stride_ + kx) -
                                    static_cast<std::ptrdiff_t>(pad_);
                                S v = S(0);
                                if (iy >= 0 && iy < static_cast<std::ptrdiff_t>(h) && ix >= 0 &&
                                    ix < static_cast<std::ptrdiff_t>(w)) {
                                    v = x(s, c, static_cast<std::size_t>(iy),
                                          static_cast<std::size_t>(ix));
                                }
                                *out++ = v;
                            }
                        }
                    }
                }
            }
        }
        return col;
    }

    TensorT<S> col2im(const Mat<S>& dcol, std::size_t n, std::size_t h, std::size_t w) const {
        const std::size_t oh = out_side(h), ow = out_side(w);
        TensorT<S> dx({n, ic_, h, w});
        for (std::size_t s = 0; s < n; ++s) {
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    const auto row = static_cast<Eigen::Index>((s * oh + oy) * ow + ox);
                    std::size_t kidx = 0;
                    for (std::size_t c = 0; c < ic_; ++c) {
                        for (std::size_t ky = 0; ky < k_; ++ky) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(oy * stride_ + ky) -
                                static_cast<std::ptrdiff_t>(pad_);
                            for (std::size_t kx = 0; kx < k_; ++kx, ++kidx) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * stride_ + kx) -
                                    static_cast<std::ptrdiff_t>(pad_);
                                if (iy >= 0 && iy < static_cast<std::ptrdiff_t>(h) && ix >= 0 &&
                                    ix < static_cast<std::ptrdiff_t>(w)) {
                                    dx(s, c, static_cast<std::size_t>(iy),
                                       static_cast<std::size_t>(ix)) +=
                                        dcol(row, static_cast<Eigen::Index>(kidx));
                                }
                            }
                        }
                    }
                }
            }
        }
        return dx;
    }

    std::size_t ic_ = 0, oc_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
    Param<S> w_, b_;
    TensorT<S> x_;
};

// ---------------------------------------------------------------------------
// BatchNorm2d with running statistics for inference mode.

template <typename S>
class BatchNorm2d {
public:
    BatchNorm2d() = default;
    BatchNorm2d(std::string name, std::size_t channels) : c_(channels) {
        gamma_.init(name + ".gamma", {c_});
        gamma_.value.fill(S(1));
        beta_.init(name + ".beta", {c_});
        running_mean_.assign(c_, 0.0);
        running_var_.assign(c_, 1.0);
    }

    TensorT<S> forward(const TensorT<S>& x, bool training) {
        const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
        const auto m = static_cast<double>(n * h * w);
        TensorT<S> y({n, c_, h, w});
        if (training) {
            mean_.assign(c_, 0.0);
            var_.assign(c_, 0.0);
            for (std::size_t s = 0; s < n; ++s)
                for (std::size_t c = 0; c < c_; ++c)
                    for (std::size_t i = 0; i < h * w; ++i)
                        mean_[c] += x[(s * c_ + c) * h * w + i];
            for (auto& v : mean_) v /= m;
            for (std::size_t s = 0; s < n; ++s)
                for (std::size_t c = 0; c < c_; ++c)
                    for (std::size_t i = 0; i < h * w; ++i) {
                        const double d = x[(s * c_ + c) * h * w + i] - mean_[c];
                        var_[c] += d * d;
                    }
            for (auto& v : var_) v /= m;
            for (std::size_t c = 0; c < c_; ++c) {
                running_mean_[c] = (1.0 - kMomentum) * running_mean_[c] + kMomentum * mean_[c];
                running_var_[c] = (1.0 - kMomentum) * running_var_[c] + kMomentum * var_[c];
            }
            inv_std_.resize(c_);
            for (std::size_t c = 0; c < c_; ++c) inv_std_[c] = 1.0 / std::sqrt(var_[c] + kEps);
            xhat_ = TensorT<S>({n, c_, h, w});
            for (std::size_t s = 0; s < n; ++s)
                for (std::size_t c = 0; c < c_; ++c)
                    for (std::size_t i = 0; i < h * w; ++i) {
                        const std::size_t idx = (s * c_ + c) * h * w + i;
                        const double xh = (x[idx] - mean_[c]) * inv_std_[c];
                        xhat_[idx] = static_cast<S>(xh);
                        y[idx] = static_cast<S>(xh * gamma_.value[c] + beta_.value[c]);
                    }
        } else {
            for (std::size_t s = 0; s < n; ++s)
                for (std::size_t c = 0; c < c_; ++c) {
                    const double inv = 1.0 / std::sqrt(running_var_[c] + kEps);
                    for (std::size_t i = 0; i < h * w; ++i) {
                        const std::size_t idx = (s * c_ + c) * h * w + i;
                        y[idx] = static_cast<S>((x[idx] - running_mean_[c]) * inv *
                                                    gamma_.value[c] +
                                                beta_.value[c]);
                    }
                }
        }
        return y;
    }

    TensorT<S> backward(const TensorT<S>& dy) {
        const std::size_t n = dy.dim(0), h = dy.dim(2), w = dy.dim(3);
        const auto m = static_cast<double>(n * h * w);
        TensorT<S> dx({n, c_, h, w});
        for (std::size_t c = 0; c < c_; ++c) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (std::size_t s = 0; s < n; ++s)
                for (std::size_t i = 0; i < h * w; ++i) {
                    const std::size_t idx = (s * c_ + c) * h * w + i;
                    sum_dy += dy[idx];
                    sum_dy_xhat += dy[idx] * static_cast<double>(xhat_[idx]);
                }
            gamma_.grad[c] += static_cast<S>(sum_dy_xhat);
            beta_.grad[c] += static_cast<S>(sum_dy);
            const double g = gamma_.value[c];
            for (std::size_t s = 0; s < n; ++s)
                for (std::size_t i = 0; i < h * w; ++i) {
                    const std::size_t idx = (s * c_ + c) * h * w + i;
                    const double t = m * dy[idx] - sum_dy -
                                     static_cast<double>(xhat_[idx]) * sum_dy_xhat;
                    dx[idx] = static_cast<S>(g * inv_std_[c] * t / m);
                }
        }
        return dx;
    }

    Param<S>& gamma() { return gamma_; }
    Param<S>& beta() { return beta_; }
    std::vector<double>& running_mean() { return running_mean_; }
    std::vector<double>& running_var() { return running_var_; }

    void collect(std::vector<Param<S>*>& out) {
        out.push_back(&gamma_);
        out.push_back(&beta_);
    }

    static constexpr double kMomentum = 0.1;
    static constexpr double kEps = 1e-5;

private:
    std::size_t c_ = 0;
    Param<S> gamma_, beta_;
    std::vector<double> running_mean_, running_var_;
    std::vector<double> mean_, var_, inv_std_;
    TensorT<S> xhat_;
};

// ---------------------------------------------------------------------------
// Elementwise activations.

template <typename S>
class LeakyReLU {
public:
    explicit LeakyReLU(double slope = 0.2) : slope_(static_cast<S>(slope)) {}
    TensorT<S> forward(const TensorT<S>& x) {
        x_ = x;
        TensorT<S> y = x;
        for (auto& v : y.flat()) v = v > S(0) ? v : slope_ * v;
        return y;
    }
    TensorT<S> backward(const TensorT<S>& dy) {
        TensorT<S> dx = dy;
        for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] = x_[i] > S(0) ? dy[i] : slope_ * dy[i];
        return dx;
    }

private:
    S slope_;
    TensorT<S> x_;
};

template <typename S>
class ReLU {
public:
    TensorT<S> forward(const TensorT<S>& x) {
        x_ = x;
        TensorT<S> y = x;
        for (auto& v : y.flat()) v = v > S(0) ? v : S(0);
        return y;
    }
    TensorT<S> backward(const TensorT<S>& dy) {
        TensorT<S> dx = dy;
        for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] = x_[i] > S(0) ? dy[i] : S(0);
        return dx;
    }

private:
    TensorT<S> x_;
};

template <typename S>
class Tanh {
public:
    TensorT<S> forward(const TensorT<S>& x) {
        y_ = x;
        for (auto& v : y_.flat()) v = std::tanh(v);
        return y_;
    }
    TensorT<S> backward(const TensorT<S>& dy) {
        TensorT<S> dx = dy;
        for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] = dy[i] * (S(1) - y_[i] * y_[i]);
        return dx;
    }

private:
    TensorT<S> y_;
};

// ---------------------------------------------------------------------------
// Nearest-neighbor 2x upsampling.

template <typename S>
class Upsample2x {
public:
    TensorT<S> forward(const TensorT<S>& x) {
        const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        TensorT<S> y({n, c, 2 * h, 2 * w});
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t yy = 0; yy < 2 * h; ++yy)
                    for (std::size_t xx = 0; xx < 2 * w; ++xx)
                        y(s, ch, yy, xx) = x(s, ch, yy / 2, xx / 2);
        return y;
    }
    TensorT<S> backward(const TensorT<S>& dy) {
        const std::size_t n = dy.dim(0), c = dy.dim(1), h = dy.dim(2) / 2, w = dy.dim(3) / 2;
        TensorT<S> dx({n, c, h, w});
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t yy = 0; yy < 2 * h; ++yy)
                    for (std::size_t xx = 0; xx < 2 * w; ++xx)
                        dx(s, ch, yy / 2, xx / 2) += dy(s, ch, yy, xx);
        return dx;
    }
};

// ---------------------------------------------------------------------------
// Spectral normalization. Owns the raw weight; before each forward the
// wrapped layer's weight is refreshed to raw / sigma(raw), with the power
// iteration warm-started and run to convergence so the effective weight's
// top singular value stays within tolerance of 1. After backward, the
// gradient w.r.t. the effective weight is mapped back onto the raw weight.

template <typename S>
class SpectralNorm {
public:
    SpectralNorm() = default;
    SpectralNorm(Param<S>& layer_weight, std::size_t out_dim, Rng& rng) : out_(out_dim) {
        raw_.init(layer_weight.name + ".raw", {});
        raw_.value = layer_weight.value;
        raw_.grad = layer_weight.value;
        raw_.grad.fill(S(0));
        rest_ = raw_.value.numel() / out_;
        u_ = Vec<double>(static_cast<Eigen::Index>(out_));
        for (Eigen::Index i = 0; i < u_.size(); ++i) u_[i] = rng.normal();
        u_.normalize();
    }

    // eff.value = raw / sigma(raw)
    void refresh(Param<S>& eff) {
        ConstMatMap<S> wm(raw_.value.data(), rest_, out_);
        Mat<double> wd = wm.template cast<double>();
        double sigma_prev = -1.0;
        for (int it = 0; it < kMaxIters; ++it) {
            v_ = wd * u_;
            const double vn = v_.norm();
            if (vn == 0.0) break;
            v_ /= vn;
            u_ = wd.transpose() * v_;
            const double un = u_.norm();
            if (un == 0.0) break;
            u_ /= un;
            sigma_ = (wd * u_).dot(v_);
            if (it > 0 && std::abs(sigma_ - sigma_prev) <= kTol * std::abs(sigma_)) break;
            sigma_prev = sigma_;
        }
        if (!(sigma_ > 0.0)) sigma_ = 1.0;
        eff.value = raw_.value;
        const auto inv = static_cast<S>(1.0 / sigma_);
        for (auto& v : eff.value.flat()) v *= inv;
    }

    // raw.grad += (G - <G, Wbar> v u^T) / sigma, where G = eff.grad; the
    // scratch gradient on the effective weight is consumed.
    void collect_grad(Param<S>& eff) {
        ConstMatMap<S> gm(eff.grad.data(), rest_, out_);
        ConstMatMap<S> wm(raw_.value.data(), rest_, out_);
        Mat<double> g = gm.template cast<double>();
        Mat<double> wbar = wm.template cast<double>() / sigma_;
        const double inner = (g.array() * wbar.array()).sum();
        Mat<double> dw = (g - inner * (v_ * u_.transpose())) / sigma_;
        MatMap<S> out(raw_.grad.data(), rest_, out_);
        out += dw.template cast<S>();
        eff.grad.fill(S(0));
    }

    double sigma() const { return sigma_; }

    // Accurate top singular value of the effective weight, for invariants.
    double measure_effective_sigma() const {
        Mat<double> wd;
        {
            ConstMatMap<S> wm(raw_.value.data(), rest_, out_);
            wd = wm.template cast<double>() / (sigma_ > 0.0 ? sigma_ : 1.0);
        }
        Vec<double> u = Vec<double>::Ones(static_cast<Eigen::Index>(out_)).normalized();
        double s = 0.0;
        for (int it = 0; it < 500; ++it) {
            Vec<double> v = (wd * u).normalized();
            u = (wd.transpose() * v).normalized();
            const double s_new = (wd * u).dot(v);
            if (it > 3 && std::abs(s_new - s) < 1e-12 * std::max(1.0, s_new)) {
                s = s_new;
                break;
            }
            s = s_new;
        }
        return s;
    }

    Param<S>& raw() { return raw_; }
    Vec<double>& u_state() { return u_; }

    static constexpr int kMaxIters = 100;
    static constexpr double kTol = 1e-5;

private:
    Param<S> raw_;
    std::size_t out_ = 0, rest_ = 0;
    Vec<double> u_ = Vec<double>::Zero(1);
    Vec<double> v_ = Vec<double>::Zero(1);
    double sigma_ = 1.0;
};

// ---------------------------------------------------------------------------
// Adam with decoupled per-parameter state.

template <typename S>
class Adam {
public:
    Adam() = default;
    Adam(std::vector<Param<S>*> params, double lr, double beta1, double beta2, double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(params_[i]->value.numel(), 0.0);
            v_[i].assign(params_[i]->value.numel(), 0.0);
        }
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = *params_[i];
            for (std::size_t j = 0; j < p.value.numel(); ++j) {
                const double g = p.grad[j];
                m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
                v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
                const double mhat = m_[i][j] / bc1;
                const double vhat = v_[i][j] / bc2;
                p.value[j] -= static_cast<S>(lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->zero_grad();
    }

    std::uint64_t step_count() const { return t_; }
    void restore_step_count(std::uint64_t t) { t_ = t; }
    std::vector<std::vector<double>>& first_moments() { return m_; }
    std::vector<std::vector<double>>& second_moments() { return v_; }
    const std::vector<Param<S>*>& params() const { return params_; }

private:
    std::vector<Param<S>*> params_;
    double lr_ = 1e-4, beta1_ = 0.5, beta2_ = 0.999, eps_ = 1e-8;
    std::vector<std::vector<double>> m_, v_;
    std::uint64_t t_ = 0;
};

}  // namespace ccgm::nn
