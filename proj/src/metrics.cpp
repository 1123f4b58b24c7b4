// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "invlab/metrics.hpp"

#include <cmath>

#include "invlab/errors.hpp"

namespace invlab {

double noise_gap(const Latent& z_T, const Latent& z_T_star) {
    require_same_shape(z_T, z_T_star, "noise_gap");
    double s = 0.0;
    for (std::size_t i = 0; i < z_T.size(); ++i) {
        const double d = z_T[i] - z_T_star[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double recon_error(const Latent& z0, const Latent& z_hat) {
    require_same_shape(z0, z_hat, "recon_error");
    if (z0.size() == 0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < z0.size(); ++i) {
        const double d = z0[i] - z_hat[i];
        s += d * d;
    }
    return s / double(z0.size());
}

double psnr(const Latent& z0, const Latent& z_hat, double peak) {
    if (!(peak > 0.0)) throw ParameterError("peak: must be positive");
    const double mse = recon_error(z0, z_hat);
    if (mse == 0.0) return kPsnrCap;
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Latent& a, const Latent& b, const SsimOptions& options) {
    require_same_shape(a, b, "ssim");
    if (!a.shape().is_image()) throw ShapeError("ssim: inputs must be image-shaped");
    const std::size_t h = a.shape().height();
    const std::size_t w = a.shape().width();
    const std::size_t win = options.window;
    if (win == 0) throw ParameterError("window: must be positive");
    if (h < win || w < win) throw ShapeError("ssim: image smaller than the window");

    const double c1 = (options.k1 * options.dynamic_range) * (options.k1 * options.dynamic_range);
    const double c2 = (options.k2 * options.dynamic_range) * (options.k2 * options.dynamic_range);
    const double n = double(win * win);

    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t y = 0; y + win <= h; ++y) {
        for (std::size_t x = 0; x + win <= w; ++x) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (std::size_t dy = 0; dy < win; ++dy) {
                for (std::size_t dx = 0; dx < win; ++dx) {
                    const std::size_t i = (y + dy) * w + (x + dx);
                    sa += a[i];
                    sb += b[i];
                    saa += a[i] * a[i];
                    sbb += b[i] * b[i];
                    sab += a[i] * b[i];
                }
            }
            const double ma = sa / n, mb = sb / n;
            const double va = saa / n - ma * ma;
            const double vb = sbb / n - mb * mb;
            const double cov = sab / n - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    }
    return total / double(count);
}

GapSummary summarize_gap(const Latent& z_T, const Latent& z_T_star, const Latent& z0, const Latent& z_hat,
                         double peak) {
    GapSummary g;
    g.d_noi = noise_gap(z_T, z_T_star);
    g.d_noi_rms = z_T.size() ? g.d_noi / std::sqrt(double(z_T.size())) : 0.0;
    g.d_rec = recon_error(z0, z_hat);
    g.psnr = psnr(z0, z_hat, peak);
    if (z0.shape().is_image() && z0.shape().height() >= 7 && z0.shape().width() >= 7) {
        g.ssim = ssim(z0, z_hat, SsimOptions{.dynamic_range = peak});
    }
    return g;
}

} // namespace invlab
