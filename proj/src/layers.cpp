#include "trio/layers.hpp"

#include "trio/error.hpp"

#include <cmath>

namespace trio::nets {

Tensor tensor_from_image(const Image& img) {
    Tensor t(img.c, img.h, img.w);
    for (int ch = 0; ch < img.c; ++ch) {
        for (int y = 0; y < img.h; ++y) {
            for (int x = 0; x < img.w; ++x) {
                t.at(ch, y, x) = static_cast<float>(img.at(y, x, ch)) / 255.0f;
            }
        }
    }
    return t;
}

Tensor tensor_from_stack(const imgproc::FilteredStack& stack) {
    const Image& o = stack.original;
    Tensor t(10, o.h, o.w);
    auto put = [&](int dst_ch, const Image& img, int src_ch) {
        for (int y = 0; y < img.h; ++y) {
            for (int x = 0; x < img.w; ++x) {
                t.at(dst_ch, y, x) = static_cast<float>(img.at(y, x, src_ch)) / 255.0f;
            }
        }
    };
    put(0, o, 0);
    put(1, o, 1);
    put(2, o, 2);
    put(3, stack.sobel_mag, 0);
    put(4, stack.posterized, 0);
    put(5, stack.posterized, 1);
    put(6, stack.posterized, 2);
    put(7, stack.embossed, 0);
    put(8, stack.embossed, 1);
    put(9, stack.embossed, 2);
    return t;
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(int in_c_, int out_c_, int k_, int stride_, int pad_)
    : in_c(in_c_), out_c(out_c_), k(k_), stride(stride_), pad(pad_) {
    weight.w.assign(static_cast<size_t>(out_c) * in_c * k * k, 0.0f);
    weight.g.assign(weight.w.size(), 0.0f);
    bias.w.assign(static_cast<size_t>(out_c), 0.0f);
    bias.g.assign(bias.w.size(), 0.0f);
}

void Conv2d::init_weights(Rng& rng) {
    const double std = std::sqrt(2.0 / (static_cast<double>(in_c) * k * k));
    for (auto& v : weight.w) v = static_cast<float>(rng.normal() * std);
    for (auto& v : bias.w) v = 0.0f;
}

Tensor Conv2d::forward(const Tensor& x, bool train, Rng*) {
    if (x.c != in_c) fail_train("conv2d: channel mismatch");
    const int oh = (x.h + 2 * pad - k) / stride + 1;
    const int ow = (x.w + 2 * pad - k) / stride + 1;
    Tensor y(out_c, oh, ow);
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < out_c; ++oc) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                float acc = bias.w[static_cast<size_t>(oc)];
                for (int ic = 0; ic < in_c; ++ic) {
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= x.h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= x.w) continue;
                            acc += weight.w[((static_cast<size_t>(oc) * in_c + ic) * k + ky) * k + kx] *
                                   x.at(ic, iy, ix);
                        }
                    }
                }
                y.at(oc, oy, ox) = acc;
            }
        }
    }
    if (train) cached_in_ = x;
    return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
    const Tensor& x = cached_in_;
    Tensor gx(x.c, x.h, x.w, 0.0f);

    // weight/bias grads: one thread owns each output channel's parameters
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < out_c; ++oc) {
        float gb = 0.0f;
        for (int oy = 0; oy < gy.h; ++oy) {
            for (int ox = 0; ox < gy.w; ++ox) gb += gy.at(oc, oy, ox);
        }
        bias.g[static_cast<size_t>(oc)] += gb;
        for (int ic = 0; ic < in_c; ++ic) {
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    float gw = 0.0f;
                    for (int oy = 0; oy < gy.h; ++oy) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= x.h) continue;
                        for (int ox = 0; ox < gy.w; ++ox) {
                            const int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= x.w) continue;
                            gw += gy.at(oc, oy, ox) * x.at(ic, iy, ix);
                        }
                    }
                    weight.g[((static_cast<size_t>(oc) * in_c + ic) * k + ky) * k + kx] += gw;
                }
            }
        }
    }

    // input grads: one thread owns each input channel
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < in_c; ++ic) {
        for (int oc = 0; oc < out_c; ++oc) {
            for (int oy = 0; oy < gy.h; ++oy) {
                for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= x.h) continue;
                    for (int ox = 0; ox < gy.w; ++ox) {
                        const float g = gy.at(oc, oy, ox);
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= x.w) continue;
                            gx.at(ic, iy, ix) +=
                                g * weight.w[((static_cast<size_t>(oc) * in_c + ic) * k + ky) * k + kx];
                        }
                    }
                }
            }
        }
    }
    return gx;
}

// ---------------------------------------------------------------------------
// ReLU / GAP / Dense / Dropout
// ---------------------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x, bool train, Rng*) {
    Tensor y = x;
    for (auto& v : y.v) v = v > 0.0f ? v : 0.0f;
    if (train) cached_in_ = x;
    return y;
}

Tensor ReLU::backward(const Tensor& gy) {
    Tensor gx = gy;
    for (size_t i = 0; i < gx.v.size(); ++i) {
        if (cached_in_.v[i] <= 0.0f) gx.v[i] = 0.0f;
    }
    return gx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool train, Rng*) {
    Tensor y(x.c, 1, 1);
    const float inv = 1.0f / (static_cast<float>(x.h) * x.w);
    for (int ch = 0; ch < x.c; ++ch) {
        float acc = 0.0f;
        for (int yy = 0; yy < x.h; ++yy) {
            for (int xx = 0; xx < x.w; ++xx) acc += x.at(ch, yy, xx);
        }
        y.at(ch, 0, 0) = acc * inv;
    }
    if (train) {
        in_c_ = x.c;
        in_h_ = x.h;
        in_w_ = x.w;
    }
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& gy) {
    Tensor gx(in_c_, in_h_, in_w_);
    const float inv = 1.0f / (static_cast<float>(in_h_) * in_w_);
    for (int ch = 0; ch < in_c_; ++ch) {
        const float g = gy.at(ch, 0, 0) * inv;
        for (int yy = 0; yy < in_h_; ++yy) {
            for (int xx = 0; xx < in_w_; ++xx) gx.at(ch, yy, xx) = g;
        }
    }
    return gx;
}

Dense::Dense(int in_dim_, int out_dim_) : in_dim(in_dim_), out_dim(out_dim_) {
    weight.w.assign(static_cast<size_t>(out_dim) * in_dim, 0.0f);
    weight.g.assign(weight.w.size(), 0.0f);
    bias.w.assign(static_cast<size_t>(out_dim), 0.0f);
    bias.g.assign(bias.w.size(), 0.0f);
}

void Dense::init_weights(Rng& rng) {
    const double std = std::sqrt(2.0 / in_dim);
    for (auto& v : weight.w) v = static_cast<float>(rng.normal() * std);
    for (auto& v : bias.w) v = 0.0f;
}

Tensor Dense::forward(const Tensor& x, bool train, Rng*) {
    if (static_cast<int>(x.size()) != in_dim) fail_train("dense: dimension mismatch");
    Tensor y(out_dim, 1, 1);
#pragma omp parallel for schedule(static)
    for (int o = 0; o < out_dim; ++o) {
        float acc = bias.w[static_cast<size_t>(o)];
        const float* wrow = &weight.w[static_cast<size_t>(o) * in_dim];
        for (int i = 0; i < in_dim; ++i) acc += wrow[i] * x.v[static_cast<size_t>(i)];
        y.v[static_cast<size_t>(o)] = acc;
    }
    if (train) cached_in_ = x;
    return y;
}

Tensor Dense::backward(const Tensor& gy) {
    Tensor gx(in_dim, 1, 1);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < in_dim; ++i) {
        float acc = 0.0f;
        for (int o = 0; o < out_dim; ++o) {
            acc += weight.w[static_cast<size_t>(o) * in_dim + i] * gy.v[static_cast<size_t>(o)];
        }
        gx.v[static_cast<size_t>(i)] = acc;
    }
#pragma omp parallel for schedule(static)
    for (int o = 0; o < out_dim; ++o) {
        const float g = gy.v[static_cast<size_t>(o)];
        bias.g[static_cast<size_t>(o)] += g;
        float* grow = &weight.g[static_cast<size_t>(o) * in_dim];
        for (int i = 0; i < in_dim; ++i) grow[i] += g * cached_in_.v[static_cast<size_t>(i)];
    }
    return gx;
}

Tensor Dropout::forward(const Tensor& x, bool train, Rng* rng) {
    if (!train || p_ <= 0.0) {
        mask_.clear();
        return x;
    }
    if (!rng) fail_train("dropout: training forward requires an RNG");
    Tensor y = x;
    mask_.resize(x.size());
    const float scale = static_cast<float>(1.0 / (1.0 - p_));
    for (size_t i = 0; i < y.v.size(); ++i) {
        const bool keep = rng->uniform01() >= p_;
        mask_[i] = keep ? scale : 0.0f;
        y.v[i] *= mask_[i];
    }
    return y;
}

Tensor Dropout::backward(const Tensor& gy) {
    if (mask_.empty()) return gy;
    Tensor gx = gy;
    for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] *= mask_[i];
    return gx;
}

// ---------------------------------------------------------------------------
// Net / Adam
// ---------------------------------------------------------------------------

Tensor Net::forward(const Tensor& x, bool train, Rng* rng) {
    Tensor cur = x;
    for (auto& layer : layers) cur = layer->forward(cur, train, rng);
    return cur;
}

Tensor Net::backward(const Tensor& gy) {
    Tensor cur = gy;
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) cur = (*it)->backward(cur);
    return cur;
}

std::vector<float> Net::features(const Tensor& x) {
    if (feature_layer < 0) fail_train("net has no feature tap");
    Tensor cur = x;
    for (int i = 0; i <= feature_layer; ++i) {
        cur = layers[static_cast<size_t>(i)]->forward(cur, false, nullptr);
    }
    return cur.v;
}

void Net::zero_grads() {
    for (auto& layer : layers) {
        for (auto* p : layer->params()) std::fill(p->g.begin(), p->g.end(), 0.0f);
    }
}

std::vector<Layer*> Net::param_layers() {
    std::vector<Layer*> out;
    for (auto& layer : layers) {
        if (!layer->params().empty()) out.push_back(layer.get());
    }
    return out;
}

size_t Net::param_count() {
    size_t n = 0;
    for (auto& layer : layers) {
        for (auto* p : layer->params()) n += p->w.size();
    }
    return n;
}

void Adam::bind(Net& net) {
    bound_.clear();
    for (auto& layer : net.layers) {
        for (auto* p : layer->params()) bound_.push_back(p);
    }
    state_.assign(bound_.size(), {});
    for (size_t i = 0; i < bound_.size(); ++i) {
        state_[i].m.assign(bound_[i]->w.size(), 0.0f);
        state_[i].v.assign(bound_[i]->w.size(), 0.0f);
    }
}

void Adam::step(Net& net) {
    if (bound_.empty()) bind(net);
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    size_t pi = 0;
    for (auto& layer : net.layers) {
        for (auto* p : layer->params()) {
            auto& st = state_[pi];
            ++pi;
            if (layer->frozen) continue;
            const double lr = lr_ * layer->lr_scale;
            for (size_t i = 0; i < p->w.size(); ++i) {
                const double g = p->g[i];
                st.m[i] = static_cast<float>(beta1_ * st.m[i] + (1.0 - beta1_) * g);
                st.v[i] = static_cast<float>(beta2_ * st.v[i] + (1.0 - beta2_) * g * g);
                const double mhat = st.m[i] / bc1;
                const double vhat = st.v[i] / bc2;
                p->w[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }
}

} // namespace trio::nets
