// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "invlab/config.hpp"
#include "invlab/denoiser.hpp"
#include "invlab/gaussian_mixture.hpp"

namespace invlab {

// One synthesized inversion problem with a known ideal terminal latent.
struct Instance {
    int id = 0;
    int component = 0;
    int label = 0;
    Conditioning ideal = Conditioning::null();    // used to generate z_0
    Conditioning prompt = Conditioning::null();   // handed to the inversion methods
    Latent z_T_star;
    Latent z0;
    std::vector<Latent> eps_trace;   // eps used at t = T, T-1, ..., 1
    Latent eps_forward;              // (z_T* - sqrt(ab_T) z_0) / sqrt(1 - ab_T)

    friend bool operator==(const Instance&, const Instance&) = default;
};

// Class-structured mixture: class bases ~ N(0, class_spread^2 I), component
// means = base + N(0, component_spread^2 I), uniform weights, component k in
// class k / components_per_class.
GaussianMixture build_mixture(const DatasetSpec& spec, const NoiseSchedule& schedule, std::uint64_t seed);

int component_label(const DatasetSpec& spec, int component);

// Instance n draws from stream n of the seed, so the result does not depend
// on evaluation order. Throws ParameterError for instances < 1 and
// NumericError when sampling diverges.
std::vector<Instance> synth_dataset(const DatasetSpec& spec, const NoiseSchedule& schedule,
                                    const Denoiser& denoiser, std::uint64_t seed, double cfg_scale = 1.0);

Instance synth_instance(const DatasetSpec& spec, const NoiseSchedule& schedule, const Denoiser& denoiser,
                        std::uint64_t seed, int id, double cfg_scale = 1.0);

} // namespace invlab
