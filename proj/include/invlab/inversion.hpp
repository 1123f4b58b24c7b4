// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "invlab/denoiser.hpp"
#include "invlab/latent.hpp"
#include "invlab/schedule.hpp"

namespace invlab {

enum class ReferenceMode { Oracle, Whitened };

const char* to_string(ReferenceMode mode);
ReferenceMode parse_reference_mode(const std::string& s);

struct InversionConfig {
    int K = 5;                 // max optimization rounds per timestep
    double lambda = 2.0;       // reference correction strength
    double eta = 1e-3;         // fixed-point learning rate
    double delta = 1e-5;       // convergence threshold on L_fix
    double cfg_scale = 1.0;
    // Rounds after the first keep the refined z_t instead of re-deriving it
    // from z_{t-1} with the practical inversion step.
    bool carry_forward = true;
    // Use the corrected noise inside f_theta when measuring L_fix.
    bool corrected_fix = false;
    ReferenceMode reference_mode = ReferenceMode::Oracle;

    void validate() const;     // throws ParameterError
};

struct ReferenceNoise {
    Latent values;
    ReferenceMode provenance = ReferenceMode::Oracle;
};

enum class BreakReason { Converged, MaxRounds, SingleStep };
const char* to_string(BreakReason reason);

struct TimestepRecord {
    int t = 0;
    int iterations = 0;
    std::vector<double> l_ref;
    std::vector<double> l_fix;
    BreakReason reason = BreakReason::SingleStep;
};

struct InversionReport {
    std::string method;
    Latent z_T;
    std::vector<TimestepRecord> steps;
    double wall_time_s = 0.0;
    InversionConfig config;

    int total_iterations() const;
};

// Reference noise anchoring the correction. Oracle mode passes the known
// ground-truth noise through; whitened mode returns (z0 - mean)/std.
ReferenceNoise extract_reference(const Latent& z0, ReferenceMode mode,
                                 const std::optional<Latent>& ground_truth_eps = std::nullopt);

// L_ref = ||eps_raw - eps_ref||_2 (unsquared).
double reference_loss(const Latent& eps_raw, const ReferenceNoise& ref);

// One gradient step on L_ref with respect to eps_raw:
//   eps_hat = eps_raw - lambda * (eps_raw - eps_ref) / L_ref,
// and eps_raw unchanged when L_ref <= 1e-12.
Latent reference_correction(const Latent& eps_raw, const ReferenceNoise& ref, double lambda);

struct FixedPointLoss {
    double value = 0.0;
    Latent grad;
};

// L_fix(z) = ||C1 z_prev + C2 eps(z, t, c) - z||_2 and its gradient in z
// (zero when L_fix <= 1e-12). With `correction` set, f uses
// reference_correction(eps(z), *correction, lambda) and the gradient is
// chained through that map.
FixedPointLoss fixed_point_loss(const Latent& z, const Latent& z_prev, int t, const Denoiser& denoiser,
                                const Conditioning& c, const NoiseSchedule& schedule, double cfg_scale = 1.0,
                                const ReferenceNoise* correction = nullptr, double lambda = 0.0);

struct FixedPointResult {
    Latent z;
    int iterations = 0;
    std::vector<double> loss_trace;
    bool converged = false;
};

// Gradient descent on L_fix(z) = ||C1 z_prev + C2 eps(z, t, c) - z||_2 from
// z_init. Each iteration evaluates L_fix, stops if it is below delta, and
// otherwise takes one step of length min(eta, L_fix / ||grad||^2) along the
// negative gradient.
FixedPointResult fixed_point_refine(const Latent& z_init, const Latent& z_prev, int t, const Denoiser& denoiser,
                                    const Conditioning& c, const NoiseSchedule& schedule, double eta, int K,
                                    double delta, double cfg_scale = 1.0);

// Reference-guided noise correction + fixed-point latent refinement.
InversionReport dci_invert(const Latent& z0, const NoiseSchedule& schedule, const Denoiser& denoiser,
                           const Conditioning& source, const InversionConfig& config,
                           const ReferenceNoise& eps_ref);

// Practical inversion, eps evaluated at (z_{t-1}, t-1, c).
InversionReport ddim_invert(const Latent& z0, const NoiseSchedule& schedule, const Denoiser& denoiser,
                            const Conditioning& c, double cfg_scale = 1.0);

// Per timestep: start from the practical inversion step, then iterate
// z <- C1 z_{t-1} + C2 eps(z, t, c) up to K times or until successive
// iterates differ by less than delta.
InversionReport picard_invert(const Latent& z0, const NoiseSchedule& schedule, const Denoiser& denoiser,
                              const Conditioning& c, int K, double delta, double cfg_scale = 1.0);

// Deterministic sampling from timestep `from_t` (default T) down to 0.
Latent reconstruct(const Latent& z_T, const NoiseSchedule& schedule, const Denoiser& denoiser,
                   const Conditioning& c, double cfg_scale = 1.0, int from_t = -1);

struct EditResult {
    Latent edited;
    InversionReport report;
};

// Invert under c_src, sample under c_tgt.
EditResult edit_condition_swap(const Latent& z0, const NoiseSchedule& schedule, const Denoiser& denoiser,
                               const Conditioning& c_src, const Conditioning& c_tgt, const InversionConfig& config,
                               const ReferenceNoise& eps_ref);

// eps(z, t, c) honouring the guidance scale (plain predict when scale == 1).
Latent guided_predict(const Denoiser& denoiser, const Latent& z, int t, const Conditioning& c, double cfg_scale);

} // namespace invlab
