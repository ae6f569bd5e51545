#include "trio/image.hpp"

#include "trio/error.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <cmath>

namespace trio {

Image load_image(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (m.empty()) fail_data("cannot read image: " + path.string());
    Image img(m.rows, m.cols, 3);
    for (int y = 0; y < m.rows; ++y) {
        const auto* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < m.cols; ++x) {
            img.at(y, x, 0) = row[x][2]; // OpenCV decodes BGR
            img.at(y, x, 1) = row[x][1];
            img.at(y, x, 2) = row[x][0];
        }
    }
    return img;
}

void save_png(const std::filesystem::path& path, const Image& img) {
    if (img.empty()) fail_data("refusing to save empty image: " + path.string());
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    cv::Mat m;
    if (img.c == 3) {
        m.create(img.h, img.w, CV_8UC3);
        for (int y = 0; y < img.h; ++y) {
            auto* row = m.ptr<cv::Vec3b>(y);
            for (int x = 0; x < img.w; ++x) {
                row[x][0] = img.at(y, x, 2);
                row[x][1] = img.at(y, x, 1);
                row[x][2] = img.at(y, x, 0);
            }
        }
    } else if (img.c == 1) {
        m.create(img.h, img.w, CV_8UC1);
        for (int y = 0; y < img.h; ++y) {
            auto* row = m.ptr<uint8_t>(y);
            for (int x = 0; x < img.w; ++x) row[x] = img.at(y, x, 0);
        }
    } else {
        fail_data("unsupported channel count for PNG: " + std::to_string(img.c));
    }
    const std::filesystem::path tmp = path.string() + ".tmp.png";
    if (!cv::imwrite(tmp.string(), m)) fail_data("cannot write PNG: " + path.string());
    std::filesystem::rename(tmp, path);
}

Image to_gray(const Image& img) {
    if (img.c == 1) return img;
    Image g(img.h, img.w, 1);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            const double lum = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) +
                               0.114 * img.at(y, x, 2);
            g.at(y, x, 0) = static_cast<uint8_t>(std::floor(lum + 0.5));
        }
    }
    return g;
}

} // namespace trio
