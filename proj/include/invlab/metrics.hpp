// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>

#include "invlab/latent.hpp"

namespace invlab {

// Reported by psnr() for identical inputs.
inline constexpr double kPsnrCap = 99.0;

struct SsimOptions {
    std::size_t window = 7;    // uniform window side
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

struct GapSummary {
    double d_noi = 0.0;        // ||z_T - z_T*||_2
    double d_noi_rms = 0.0;    // d_noi / sqrt(dim)
    double d_rec = 0.0;        // MSE(z_hat_0, z_0)
    double psnr = 0.0;
    std::optional<double> ssim; // image-shaped latents only
};

// ||z_T - z_T*||_2.
double noise_gap(const Latent& z_T, const Latent& z_T_star);

// Mean of squared entrywise differences.
double recon_error(const Latent& z0, const Latent& z_hat);

// 10 log10(peak^2 / MSE); kPsnrCap when the inputs are identical.
double psnr(const Latent& z0, const Latent& z_hat, double peak);

// Mean local SSIM over every window position (stride 1).
double ssim(const Latent& a, const Latent& b, const SsimOptions& options = {});

GapSummary summarize_gap(const Latent& z_T, const Latent& z_T_star, const Latent& z0, const Latent& z_hat,
                         double peak);

} // namespace invlab
