// trio_bench — OpenMP kernels vs their serial reference implementations.
//
// Prints per-kernel timings, speedup, and a correctness column (max abs
// difference against the reference; integer kernels must report 0).

#include "trio/imgproc.hpp"
#include "trio/layers.hpp"
#include "trio/ref_kernels.hpp"
#include "trio/rng.hpp"

#include "CLI11.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int iters) {
    fn(); // warm-up
    const auto t0 = Clock::now();
    for (int i = 0; i < iters; ++i) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / iters;
}

trio::Image random_image(int h, int w, int c, trio::Rng& rng) {
    trio::Image img(h, w, c);
    for (auto& px : img.px) px = static_cast<uint8_t>(rng.below(256));
    return img;
}

void report(const std::string& name, double ref_ms, double omp_ms, double max_diff) {
    std::printf("%-22s %10.3f ms %10.3f ms %8.2fx %12g\n", name.c_str(), ref_ms, omp_ms,
                ref_ms / omp_ms, max_diff);
}

double image_diff(const trio::Image& a, const trio::Image& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.px.size(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a.px[i]) - b.px[i]));
    }
    return m;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel benchmark: OpenMP implementations vs serial references"};
    int size = 1024;
    int iters = 5;
    int threads = 0;
    app.add_option("--size", size, "Square image side for the pixel kernels");
    app.add_option("--iters", iters, "Timing iterations per kernel");
    app.add_option("--threads", threads, "OpenMP thread count (0 = runtime default)");
    CLI11_PARSE(app, argc, argv);

    if (threads > 0) omp_set_num_threads(threads);
    std::printf("threads: %d, image: %dx%d\n\n", omp_get_max_threads(), size, size);
    std::printf("%-22s %13s %13s %9s %12s\n", "kernel", "serial", "openmp", "speedup",
                "max|diff|");

    trio::Rng rng(7);
    const trio::Image img = random_image(size, size, 3, rng);

    {
        trio::Image out_ref, out_omp;
        const double ref = time_ms([&] { out_ref = trio::ref::sobel_magnitude_ref(img); }, iters);
        const double omp = time_ms([&] { out_omp = trio::imgproc::sobel_magnitude(img); }, iters);
        report("sobel_magnitude", ref, omp, image_diff(out_ref, out_omp));
    }
    {
        trio::Image out_ref, out_omp;
        const double ref = time_ms([&] { out_ref = trio::ref::emboss_ref(img); }, iters);
        const double omp = time_ms([&] { out_omp = trio::imgproc::emboss(img); }, iters);
        report("emboss", ref, omp, image_diff(out_ref, out_omp));
    }
    {
        trio::Image out_ref, out_omp;
        const double ref = time_ms([&] { out_ref = trio::ref::posterize_ref(img, 3); }, iters);
        const double omp = time_ms([&] { out_omp = trio::imgproc::posterize(img, 3); }, iters);
        report("posterize(bits=3)", ref, omp, image_diff(out_ref, out_omp));
    }
    {
        // CLAHE has no brute-force twin; report the OpenMP timing only.
        trio::Image out;
        const double omp = time_ms([&] { out = trio::imgproc::balance_histogram(img); }, iters);
        std::printf("%-22s %13s %10.3f ms %9s %12s\n", "clahe(8x8,2.0)", "-", omp, "-", "-");
    }
    {
        const auto spec = trio::imgproc::AugmentSpec{};
        trio::Image out;
        const double omp =
            time_ms([&] { out = trio::imgproc::augment(img, spec, 11, size); }, iters);
        std::printf("%-22s %13s %10.3f ms %9s %12s\n", "augment(full)", "-", omp, "-", "-");
    }
    {
        // convolution: library layer (OpenMP) vs naive reference
        const int in_c = 16, out_c = 32, hw = 128;
        trio::nets::Tensor x(in_c, hw, hw);
        for (auto& v : x.v) v = static_cast<float>(rng.uniform01());
        trio::nets::Conv2d conv(in_c, out_c, 3, 2, 1);
        conv.init_weights(rng);

        trio::nets::Tensor out_omp;
        std::vector<float> out_ref;
        int oh = 0, ow = 0;
        const double ref = time_ms(
            [&] {
                out_ref = trio::ref::conv2d_forward_ref(x.v, in_c, hw, hw, conv.weight.w,
                                                        conv.bias.w, out_c, 3, 2, 1, oh, ow);
            },
            iters);
        const double omp = time_ms([&] { out_omp = conv.forward(x, false, nullptr); }, iters);
        double max_diff = 0.0;
        for (size_t i = 0; i < out_ref.size(); ++i) {
            max_diff = std::max(max_diff,
                                std::abs(static_cast<double>(out_ref[i]) - out_omp.v[i]));
        }
        report("conv2d 16->32 s2", ref, omp, max_diff);
    }
    {
        const int n = 256, m = 256, d = 64;
        std::vector<double> A(static_cast<size_t>(n) * d), B(static_cast<size_t>(m) * d);
        for (auto& v : A) v = rng.uniform01();
        for (auto& v : B) v = rng.uniform01();
        std::vector<double> out_ref, out_omp(static_cast<size_t>(n) * m);
        const double ref =
            time_ms([&] { out_ref = trio::ref::pairwise_sqdist_ref(A, n, B, m, d); }, iters);
        const double omp = time_ms(
            [&] {
#pragma omp parallel for schedule(static)
                for (int i = 0; i < n; ++i) {
                    for (int j = 0; j < m; ++j) {
                        double acc = 0.0;
                        for (int t = 0; t < d; ++t) {
                            const double diff = A[static_cast<size_t>(i) * d + t] -
                                                B[static_cast<size_t>(j) * d + t];
                            acc += diff * diff;
                        }
                        out_omp[static_cast<size_t>(i) * m + j] = acc;
                    }
                }
            },
            iters);
        double max_diff = 0.0;
        for (size_t i = 0; i < out_ref.size(); ++i) {
            max_diff = std::max(max_diff, std::abs(out_ref[i] - out_omp[i]));
        }
        report("pairwise_sqdist", ref, omp, max_diff);
    }
    return 0;
}
