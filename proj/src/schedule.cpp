// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "invlab/schedule.hpp"

#include <cmath>
#include <string>

#include "invlab/errors.hpp"

namespace invlab {

NoiseSchedule::NoiseSchedule(std::vector<double> alpha_bar) : alpha_bar_(std::move(alpha_bar)) {
    if (alpha_bar_.size() < 2) throw ParameterError("alpha_bar: need at least T+1 = 2 entries");
    if (alpha_bar_[0] != 1.0) throw ParameterError("alpha_bar[0] must equal 1");
    for (std::size_t t = 1; t < alpha_bar_.size(); ++t) {
        double a = alpha_bar_[t];
        if (!std::isfinite(a) || a <= 0.0 || a > 1.0) {
            throw ParameterError("alpha_bar[" + std::to_string(t) + "] outside (0, 1]");
        }
        if (!(a < alpha_bar_[t - 1])) {
            throw ParameterError("alpha_bar must be strictly decreasing at t=" + std::to_string(t));
        }
    }
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t < 0 || t > steps()) {
        throw IndexError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(steps()) + "]");
    }
    return alpha_bar_[static_cast<std::size_t>(t)];
}

NoiseSchedule make_linear_schedule(int steps, double beta_start, double beta_end) {
    if (steps < 1) throw ParameterError("T must be >= 1");
    if (!(beta_start > 0.0) || !std::isfinite(beta_start)) throw ParameterError("beta_start must be in (0, 1)");
    if (!(beta_end < 1.0) || !std::isfinite(beta_end)) throw ParameterError("beta_end must be in (0, 1)");
    if (beta_start > beta_end) throw ParameterError("beta_start must not exceed beta_end");

    std::vector<double> ab(static_cast<std::size_t>(steps) + 1);
    ab[0] = 1.0;
    for (int s = 1; s <= steps; ++s) {
        double beta = steps == 1 ? beta_start
                                 : beta_start + (beta_end - beta_start) * (s - 1) / double(steps - 1);
        ab[s] = ab[s - 1] * (1.0 - beta);
    }
    return NoiseSchedule(std::move(ab));
}

StepCoeffs coeffs(const NoiseSchedule& schedule, int t) {
    if (t < 1 || t > schedule.steps()) {
        throw IndexError("coeffs: timestep " + std::to_string(t) + " outside [1, " +
                         std::to_string(schedule.steps()) + "]");
    }
    const double a = schedule.alpha_bar(t);
    const double ap = schedule.alpha_bar(t - 1);
    const double c1 = std::sqrt(a) / std::sqrt(ap);
    const double c2 = std::sqrt(a) * (std::sqrt(1.0 / a - 1.0) - std::sqrt(1.0 / ap - 1.0));
    return {c1, c2};
}

Latent ddim_step(const Latent& z_t, const Latent& eps, const NoiseSchedule& schedule, int t) {
    require_same_shape(z_t, eps, "ddim_step");
    if (t < 1 || t > schedule.steps()) throw IndexError("ddim_step: timestep out of range");
    const double a = schedule.alpha_bar(t);
    const double ap = schedule.alpha_bar(t - 1);
    const double k_z = std::sqrt(ap) / std::sqrt(a);
    const double k_eps = std::sqrt(ap) * (std::sqrt(1.0 / ap - 1.0) - std::sqrt(1.0 / a - 1.0));
    return combine(k_z, z_t, k_eps, eps);
}

Latent ddim_invert_step_naive(const Latent& z_prev, const Latent& eps, const NoiseSchedule& schedule,
                              int t) {
    require_same_shape(z_prev, eps, "ddim_invert_step_naive");
    auto [c1, c2] = coeffs(schedule, t);
    return combine(c1, z_prev, c2, eps);
}

} // namespace invlab
