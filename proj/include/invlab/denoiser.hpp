// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "invlab/latent.hpp"
#include "invlab/schedule.hpp"

namespace invlab {

enum class ConditioningKind { ClassLabel, Embedding, Null };

// Control input c. Exactly the fields belonging to `kind` are populated.
class Conditioning {
public:
    static Conditioning null() { return Conditioning(ConditioningKind::Null, std::nullopt, {}); }
    static Conditioning class_label(int label);
    static Conditioning embedding(std::vector<double> values);

    ConditioningKind kind() const { return kind_; }
    int label() const;
    const std::vector<double>& embedding() const;
    std::string to_string() const;

    friend bool operator==(const Conditioning&, const Conditioning&) = default;

private:
    Conditioning(ConditioningKind kind, std::optional<int> label, std::vector<double> embedding)
        : kind_(kind), label_(label), embedding_(std::move(embedding)) {}

    ConditioningKind kind_;
    std::optional<int> label_;
    std::vector<double> embedding_;
};

const char* to_string(ConditioningKind kind);

// Noise predictor eps_theta(z, t, c). Implementations are immutable once
// built and may be shared across threads.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    virtual Latent predict(const Latent& z, int t, const Conditioning& c) const = 0;

    // u^T * d eps / d z. The default is central finite differences with step
    // kFiniteDiffStep (2 * dim predictions).
    virtual Latent predict_vjp(const Latent& z, int t, const Conditioning& c, const Latent& u) const;

    virtual bool supports(ConditioningKind kind) const = 0;

    // Number of diffusion steps T the predictor was built for.
    virtual int steps() const = 0;

    virtual std::string name() const = 0;

    static constexpr double kFiniteDiffStep = 1e-5;

protected:
    void check_inputs(const Latent& z, int t, const Conditioning& c) const;
};

Latent finite_diff_vjp(const Denoiser& denoiser, const Latent& z, int t, const Conditioning& c,
                       const Latent& u, double step = Denoiser::kFiniteDiffStep);

// eps_null + scale * (eps_c - eps_null).
Latent cfg_predict(const Denoiser& denoiser, const Latent& z, int t, const Conditioning& c, double scale);

// Same composition for the vector-Jacobian product (the map is linear in eps).
Latent cfg_predict_vjp(const Denoiser& denoiser, const Latent& z, int t, const Conditioning& c, double scale,
                       const Latent& u);

} // namespace invlab
