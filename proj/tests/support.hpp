// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "invlab/gaussian_mixture.hpp"
#include "invlab/latent.hpp"
#include "invlab/schedule.hpp"

namespace invlab::testing {

inline Latent random_latent(std::mt19937_64& rng, const Shape& shape, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    std::vector<double> v(shape.size());
    for (auto& x : v) x = n(rng);
    return Latent(shape, std::move(v));
}

inline Latent random_latent(std::mt19937_64& rng, std::size_t dim, double scale = 1.0) {
    return random_latent(rng, Shape::flat(dim), scale);
}

// Single N(0, I) component: eps*(z, t) = sqrt(1 - ab_t) z.
inline GaussianMixture affine_oracle(std::size_t dim, const NoiseSchedule& schedule) {
    return GaussianMixture::single(Latent(Shape::flat(dim)), 1.0, schedule);
}

// z* = C1 z_prev / (1 - C2 sqrt(1 - ab_t)).
inline Latent affine_fixed_point(const Latent& z_prev, const NoiseSchedule& schedule, int t) {
    const StepCoeffs k = coeffs(schedule, t);
    return scaled(k.c1 / (1.0 - k.c2 * std::sqrt(1.0 - schedule.alpha_bar(t))), z_prev);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double scale = 1e-12;
    for (std::size_t i = 0; i < a.size(); ++i) scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    return worst;
}

} // namespace invlab::testing
