// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "invlab/autodiff.hpp"
#include "invlab/denoiser.hpp"

namespace invlab {

// Small fully-connected noise predictor. Input is [z, temb(t/T), cond],
// hidden layers use tanh and the output layer is linear.
//
// Conditioning encoding (length cond_dim): class label k -> one-hot e_k,
// embedding -> copied verbatim, null -> zeros.
class MlpDenoiser final : public Denoiser {
public:
    static constexpr int kTimeFrequencies = 8;
    static constexpr std::size_t kTimeEmbeddingDim = 2 * kTimeFrequencies;

    // layer_sizes.front() must equal latent + time embedding + cond_dim and
    // layer_sizes.back() the latent size.
    MlpDenoiser(Shape latent_shape, std::size_t cond_dim, std::vector<std::size_t> layer_sizes,
                std::vector<double> parameters, int steps);

    // Random init (scaled uniform), deterministic for a given seed.
    static MlpDenoiser initialize(Shape latent_shape, std::size_t cond_dim, std::vector<std::size_t> hidden,
                                  int steps, std::uint64_t seed);

    Latent predict(const Latent& z, int t, const Conditioning& c) const override;
    Latent predict_vjp(const Latent& z, int t, const Conditioning& c, const Latent& u) const override;
    bool supports(ConditioningKind kind) const override;
    int steps() const override { return steps_; }
    std::string name() const override { return "mlp"; }

    // Records the forward pass on `tape`; z and params are existing nodes.
    ad::Var forward(ad::Tape& tape, ad::Var z, ad::Var params, int t, const Conditioning& c) const;

    std::vector<double> input_features(int t, const Conditioning& c) const; // [temb, cond]
    static std::vector<double> time_embedding(int t, int steps);

    const Shape& latent_shape() const { return latent_shape_; }
    std::size_t cond_dim() const { return cond_dim_; }
    const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
    const std::vector<double>& parameters() const { return parameters_; }
    static std::size_t parameter_count(const std::vector<std::size_t>& layer_sizes);

    // Text parameter file; see docs/formats.md.
    void save(std::ostream& out) const;
    void save(const std::filesystem::path& path) const;
    static MlpDenoiser load(std::istream& in);
    static MlpDenoiser load(const std::filesystem::path& path);

    friend bool operator==(const MlpDenoiser& a, const MlpDenoiser& b) {
        return a.latent_shape_ == b.latent_shape_ && a.cond_dim_ == b.cond_dim_ && a.layer_sizes_ == b.layer_sizes_ &&
               a.parameters_ == b.parameters_ && a.steps_ == b.steps_;
    }

private:
    Shape latent_shape_;
    std::size_t cond_dim_;
    std::vector<std::size_t> layer_sizes_;
    std::vector<double> parameters_;
    int steps_;
};

struct TrainingExample {
    Latent z0;
    Conditioning c;
};

struct TrainingOptions {
    int epochs = 10;
    double learning_rate = 1e-2;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    double null_probability = 0.0;       // label dropout so the net also learns eps(z, t, null)
    std::vector<std::size_t> hidden = {64};
};

struct TrainingResult {
    MlpDenoiser denoiser;
    std::vector<double> loss_trace;      // mean loss per epoch
};

// Plain SGD on the denoising objective mean ||eps_pred(z_t, t, c) - eps||^2 with
// t ~ U{1..T}. Throws TrainingError when the loss becomes non-finite.
TrainingResult train_mlp_denoiser(const std::vector<TrainingExample>& dataset, const NoiseSchedule& schedule,
                                  std::size_t cond_dim, const TrainingOptions& options);

// Same, continuing from an existing network.
TrainingResult train_mlp_denoiser(const std::vector<TrainingExample>& dataset, const NoiseSchedule& schedule,
                                  MlpDenoiser init, const TrainingOptions& options);

} // namespace invlab
