#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "soma/tensor.hpp"

namespace soma {

// 8-bit RGB raster, row-major, interleaved channels.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // height * width * 3

    Image() = default;
    Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t& at(int x, int y, int c) {
        return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::uint8_t at(int x, int y, int c) const {
        return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    bool operator==(const Image& o) const {
        return width == o.width && height == o.height && rgb == o.rgb;
    }
};

Image hflip(const Image& img);

void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

// CHW tensor with values mapped from [0,255] to [-1,1].
template <class T>
Tensor<T> image_to_tensor(const Image& img) {
    Tensor<T> t({1, 3, img.height, img.width});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                t.at4(0, c, y, x) = static_cast<T>(img.at(x, y, c)) / T(127.5) - T(1);
    return t;
}

// Stacks images into a BCHW batch.
template <class T>
Tensor<T> images_to_batch(const std::vector<const Image*>& imgs) {
    if (imgs.empty()) throw std::invalid_argument("images_to_batch: empty");
    const int h = imgs[0]->height, w = imgs[0]->width;
    Tensor<T> t({static_cast<int>(imgs.size()), 3, h, w});
    for (std::size_t b = 0; b < imgs.size(); ++b) {
        const Image& img = *imgs[b];
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    t.at4(static_cast<int>(b), c, y, x) =
                        static_cast<T>(img.at(x, y, c)) / T(127.5) - T(1);
    }
    return t;
}

}  // namespace soma
