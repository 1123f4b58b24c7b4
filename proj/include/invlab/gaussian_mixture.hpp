// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <vector>

#include "invlab/denoiser.hpp"

namespace invlab {

// Isotropic Gaussian mixture over z_0 with component labels. Acts as an exact
// noise predictor: eps*(z, t) = E[eps | z_t = z] under the diffused mixture.
//
// Conditioning:
//   null         all components with their weights
//   class label  only components carrying that label
//   embedding    per-component non-negative re-weighting (length = components)
class GaussianMixture final : public Denoiser {
public:
    GaussianMixture(std::vector<double> weights, std::vector<Latent> means, double sigma0,
                    std::vector<int> labels, NoiseSchedule schedule);

    // Single component N(mean, sigma0^2 I).
    static GaussianMixture single(Latent mean, double sigma0, NoiseSchedule schedule);

    Latent predict(const Latent& z, int t, const Conditioning& c) const override;
    Latent predict_vjp(const Latent& z, int t, const Conditioning& c, const Latent& u) const override;
    bool supports(ConditioningKind) const override { return true; }
    int steps() const override { return schedule_.steps(); }
    std::string name() const override { return "gm-oracle"; }

    // Posterior responsibilities of each component given z_t (zero for
    // components excluded by c).
    std::vector<double> responsibilities(const Latent& z, int t, const Conditioning& c) const;

    // Draw z_0 from the (conditioned) data mixture.
    Latent sample(std::mt19937_64& rng, const Conditioning& c) const;

    std::size_t components() const { return weights_.size(); }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<Latent>& means() const { return means_; }
    const std::vector<int>& labels() const { return labels_; }
    double sigma0() const { return sigma0_; }
    const Shape& shape() const { return means_.front().shape(); }
    const NoiseSchedule& schedule() const { return schedule_; }

    // Lower clamp on 1 - alpha_bar inside eps*.
    static constexpr double kVarianceFloor = 1e-12;

private:
    std::vector<double> effective_log_weights(const Conditioning& c) const;

    std::vector<double> weights_;
    std::vector<Latent> means_;
    double sigma0_;
    std::vector<int> labels_;
    NoiseSchedule schedule_;
};

} // namespace invlab
