#include "trio/ref_kernels.hpp"

#include <algorithm>
#include <cmath>

namespace trio::ref {

namespace {

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

} // namespace

Image sobel_magnitude_ref(const Image& img) {
    static const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    static const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};

    // grayscale plane, luminance weights, rounded half-up
    std::vector<int> gray(static_cast<size_t>(img.h) * img.w);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            double lum;
            if (img.c == 1) {
                lum = img.at(y, x, 0);
            } else {
                lum = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) +
                      0.114 * img.at(y, x, 2);
            }
            gray[static_cast<size_t>(y) * img.w + x] = static_cast<int>(std::floor(lum + 0.5));
        }
    }

    Image out(img.h, img.w, 1);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            long long gx = 0, gy = 0;
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    const int yy = clampi(y + i - 1, 0, img.h - 1);
                    const int xx = clampi(x + j - 1, 0, img.w - 1);
                    const int v = gray[static_cast<size_t>(yy) * img.w + xx];
                    gx += static_cast<long long>(kx[i][j]) * v;
                    gy += static_cast<long long>(ky[i][j]) * v;
                }
            }
            double mag = std::sqrt(static_cast<double>(gx) * gx + static_cast<double>(gy) * gy);
            if (mag > 255.0) mag = 255.0;
            out.at(y, x, 0) = static_cast<uint8_t>(std::floor(mag + 0.5));
        }
    }
    return out;
}

Image posterize_ref(const Image& img, int bits) {
    // arithmetic route: floor-quantize to the level grid instead of masking
    const int step = 1 << (8 - bits);
    Image out(img.h, img.w, img.c);
    for (size_t i = 0; i < img.px.size(); ++i) {
        out.px[i] = static_cast<uint8_t>((img.px[i] / step) * step);
    }
    return out;
}

Image emboss_ref(const Image& img) {
    static const int kk[3][3] = {{-1, -1, 0}, {-1, 0, 1}, {0, 1, 1}};
    Image out(img.h, img.w, img.c);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            for (int ch = 0; ch < img.c; ++ch) {
                int acc = 128;
                for (int i = 0; i < 3; ++i) {
                    for (int j = 0; j < 3; ++j) {
                        const int yy = clampi(y + i - 1, 0, img.h - 1);
                        const int xx = clampi(x + j - 1, 0, img.w - 1);
                        acc += kk[i][j] * img.at(yy, xx, ch);
                    }
                }
                out.at(y, x, ch) = static_cast<uint8_t>(clampi(acc, 0, 255));
            }
        }
    }
    return out;
}

std::vector<double> covariance_ref(const std::vector<double>& X, int n, int d) {
    std::vector<double> mean(d, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) mean[j] += X[static_cast<size_t>(i) * d + j];
    }
    for (int j = 0; j < d; ++j) mean[j] /= n;

    std::vector<double> cov(static_cast<size_t>(d) * d, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int a = 0; a < d; ++a) {
            const double da = X[static_cast<size_t>(i) * d + a] - mean[a];
            for (int b = 0; b < d; ++b) {
                const double db = X[static_cast<size_t>(i) * d + b] - mean[b];
                cov[static_cast<size_t>(a) * d + b] += da * db;
            }
        }
    }
    for (auto& v : cov) v /= (n - 1);
    return cov;
}

std::vector<float> conv2d_forward_ref(const std::vector<float>& in, int in_c, int in_h,
                                      int in_w, const std::vector<float>& w,
                                      const std::vector<float>& b, int out_c, int k,
                                      int stride, int pad, int& out_h, int& out_w) {
    out_h = (in_h + 2 * pad - k) / stride + 1;
    out_w = (in_w + 2 * pad - k) / stride + 1;
    std::vector<float> out(static_cast<size_t>(out_c) * out_h * out_w, 0.0f);
    for (int oc = 0; oc < out_c; ++oc) {
        for (int oy = 0; oy < out_h; ++oy) {
            for (int ox = 0; ox < out_w; ++ox) {
                float acc = b[oc];
                for (int ic = 0; ic < in_c; ++ic) {
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx) {
                            const int iy = oy * stride + ky - pad;
                            const int ix = ox * stride + kx - pad;
                            if (iy < 0 || iy >= in_h || ix < 0 || ix >= in_w) continue;
                            acc += w[((static_cast<size_t>(oc) * in_c + ic) * k + ky) * k + kx] *
                                   in[(static_cast<size_t>(ic) * in_h + iy) * in_w + ix];
                        }
                    }
                }
                out[(static_cast<size_t>(oc) * out_h + oy) * out_w + ox] = acc;
            }
        }
    }
    return out;
}

std::vector<double> pairwise_sqdist_ref(const std::vector<double>& A, int n,
                                        const std::vector<double>& B, int m, int d) {
    std::vector<double> out(static_cast<size_t>(n) * m, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            double acc = 0.0;
            for (int t = 0; t < d; ++t) {
                const double diff = A[static_cast<size_t>(i) * d + t] - B[static_cast<size_t>(j) * d + t];
                acc += diff * diff;
            }
            out[static_cast<size_t>(i) * m + j] = acc;
        }
    }
    return out;
}

} // namespace trio::ref
