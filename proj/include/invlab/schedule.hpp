// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "invlab/latent.hpp"

namespace invlab {

// Cumulative signal-retention sequence. alpha_bar[0] = 1 is the data end and
// alpha_bar[T] the noise end; entries are strictly decreasing in (0, 1].
class NoiseSchedule {
public:
    explicit NoiseSchedule(std::vector<double> alpha_bar);

    int steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }
    double alpha_bar(int t) const;
    const std::vector<double>& alpha_bars() const { return alpha_bar_; }

    friend bool operator==(const NoiseSchedule&, const NoiseSchedule&) = default;

private:
    std::vector<double> alpha_bar_;
};

inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 0.02;
inline constexpr int kDefaultSteps = 50;

// alpha_bar[t] = prod_{s<=t} (1 - beta_s), beta linearly spaced over T steps.
NoiseSchedule make_linear_schedule(int steps, double beta_start = kDefaultBetaStart,
                                   double beta_end = kDefaultBetaEnd);

struct StepCoeffs {
    double c1;
    double c2;
};

// Inversion coefficients for the step t-1 -> t:
//   C1 = sqrt(ab_t)/sqrt(ab_{t-1}),
//   C2 = sqrt(ab_t) * (sqrt(1/ab_t - 1) - sqrt(1/ab_{t-1} - 1)).
StepCoeffs coeffs(const NoiseSchedule& schedule, int t);

// Deterministic DDIM sampling step z_t -> z_{t-1}.
Latent ddim_step(const Latent& z_t, const Latent& eps, const NoiseSchedule& schedule, int t);

// Practical inversion step z_{t-1} -> z_t = C1 z_{t-1} + C2 eps.
Latent ddim_invert_step_naive(const Latent& z_prev, const Latent& eps, const NoiseSchedule& schedule,
                              int t);

} // namespace invlab
