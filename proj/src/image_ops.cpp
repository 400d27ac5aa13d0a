#include "semjscc/image_ops.hpp"

#include <algorithm>
#include <cmath>

#include "semjscc/errors.hpp"

namespace semjscc {

Tensor bilinear_resize(const Tensor& img, int out_h, int out_w) {
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("bilinear_resize: bad target size");
    if (out_h == H && out_w == W) return img;
    Tensor out({C, out_h, out_w});
    const double sy = static_cast<double>(H) / out_h;
    const double sx = static_cast<double>(W) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(H - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, H - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(W - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, W - 1);
            const double wx = fx - x0;
            for (int c = 0; c < C; ++c) {
                const double top = img.at(c, y0, x0) * (1 - wx) + img.at(c, y0, x1) * wx;
                const double bot = img.at(c, y1, x0) * (1 - wx) + img.at(c, y1, x1) * wx;
                out.at(c, y, x) = top * (1 - wy) + bot * wy;
            }
        }
    }
    return out;
}

Tensor crop(const Tensor& img, int y0, int x0, int h, int w) {
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    if (y0 < 0 || x0 < 0 || h <= 0 || w <= 0 || y0 + h > H || x0 + w > W)
        throw std::invalid_argument("crop: window outside image");
    Tensor out({C, h, w});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
    return out;
}

Tensor center_crop(const Tensor& img, int h, int w) {
    return crop(img, (img.dim(1) - h) / 2, (img.dim(2) - w) / 2, h, w);
}

Tensor hflip(const Tensor& img) {
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    Tensor out(img.shape());
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) out.at(c, y, x) = img.at(c, y, W - 1 - x);
    return out;
}

Tensor to_grayscale(const Tensor& img) {
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    Tensor out(img.shape());
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double luma = 0.0;
            if (C == 3)
                luma = 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
            else
                for (int c = 0; c < C; ++c) luma += img.at(c, y, x) / C;
            for (int c = 0; c < C; ++c) out.at(c, y, x) = luma;
        }
    return out;
}

Tensor gaussian_blur(const Tensor& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(2.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& v : kernel) v /= sum;

    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    auto reflect = [](int i, int n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
        return std::clamp(i, 0, n - 1);
    };
    Tensor tmp(img.shape()), out(img.shape());
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[i + radius] * img.at(c, y, reflect(x + i, W));
                tmp.at(c, y, x) = acc;
            }
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[i + radius] * tmp.at(c, reflect(y + i, H), x);
                out.at(c, y, x) = acc;
            }
    return out;
}

void clamp01(Tensor& img) {
    for (long i = 0; i < img.numel(); ++i) img[i] = std::clamp(img[i], 0.0, 1.0);
}

Tensor random_resized_crop(const Tensor& img, Rng& rng, double min_scale) {
    const int H = img.dim(1), W = img.dim(2);
    const double area = static_cast<double>(H) * W;
    for (int attempt = 0; attempt < 10; ++attempt) {
        const double target = area * rng.uniform(min_scale, 1.0);
        const double aspect = std::exp(rng.uniform(std::log(0.75), std::log(4.0 / 3.0)));
        int w = static_cast<int>(std::lround(std::sqrt(target * aspect)));
        int h = static_cast<int>(std::lround(std::sqrt(target / aspect)));
        if (w < 1 || h < 1 || w > W || h > H) continue;
        const int y0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(H - h + 1)));
        const int x0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(W - w + 1)));
        return bilinear_resize(crop(img, y0, x0, h, w), H, W);
    }
    return img;
}

Tensor color_jitter(const Tensor& img, Rng& rng, double strength) {
    const int C = img.dim(0);
    Tensor out(img.shape());
    std::vector<double> gain(C);
    for (int c = 0; c < C; ++c) gain[c] = 1.0 + rng.uniform(-strength, strength);
    const double shift = rng.uniform(-strength, strength) * 0.5;
    const int HW = img.dim(1) * img.dim(2);
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < HW; ++i) {
            const long idx = static_cast<long>(c) * HW + i;
            out[idx] = img[idx] * gain[c] + shift;
        }
    clamp01(out);
    return out;
}

}  // namespace semjscc
