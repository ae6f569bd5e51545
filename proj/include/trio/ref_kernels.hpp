#pragma once

#include "trio/image.hpp"

#include <vector>

// Serial brute-force reference implementations. These are the independent
// route the tests compare the OpenMP kernels against (exact integer equality
// for the filters) and the baseline for the benchmark tool. Keep them naive:
// no shared helpers with the production kernels beyond the Image container.
namespace trio::ref {

Image sobel_magnitude_ref(const Image& img);

Image posterize_ref(const Image& img, int bits);

Image emboss_ref(const Image& img);

// Unbiased sample covariance (divides by n-1), two-pass textbook form.
// X is row-major n x d.
std::vector<double> covariance_ref(const std::vector<double>& X, int n, int d);

// Direct dense convolution forward: in CHW, weights [oc][ic][k][k], stride,
// zero padding. Returns CHW output.
std::vector<float> conv2d_forward_ref(const std::vector<float>& in, int in_c, int in_h,
                                      int in_w, const std::vector<float>& w,
                                      const std::vector<float>& b, int out_c, int k,
                                      int stride, int pad, int& out_h, int& out_w);

// All-pairs squared Euclidean distances between rows of A (n x d) and B (m x d).
std::vector<double> pairwise_sqdist_ref(const std::vector<double>& A, int n,
                                        const std::vector<double>& B, int m, int d);

} // namespace trio::ref
