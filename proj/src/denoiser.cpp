// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "invlab/denoiser.hpp"

#include <cmath>
#include <cstdio>

#include "invlab/errors.hpp"

namespace invlab {

Conditioning Conditioning::class_label(int label) {
    if (label < 0) throw ParameterError("conditioning label must be non-negative");
    return Conditioning(ConditioningKind::ClassLabel, label, {});
}

Conditioning Conditioning::embedding(std::vector<double> values) {
    if (values.empty()) throw ParameterError("conditioning embedding must be non-empty");
    for (double v : values) {
        if (!std::isfinite(v)) throw ParameterError("conditioning embedding must be finite");
    }
    return Conditioning(ConditioningKind::Embedding, std::nullopt, std::move(values));
}

int Conditioning::label() const {
    if (kind_ != ConditioningKind::ClassLabel) throw ContractError("conditioning has no class label");
    return *label_;
}

const std::vector<double>& Conditioning::embedding() const {
    if (kind_ != ConditioningKind::Embedding) throw ContractError("conditioning has no embedding");
    return embedding_;
}

std::string Conditioning::to_string() const {
    switch (kind_) {
    case ConditioningKind::Null:
        return "null";
    case ConditioningKind::ClassLabel:
        return "label:" + std::to_string(*label_);
    case ConditioningKind::Embedding: {
        std::string s = "embedding:";
        for (std::size_t i = 0; i < embedding_.size(); ++i) {
            if (i) s += ',';
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.6g", embedding_[i]);
            s += buf;
        }
        return s;
    }
    }
    return "?";
}

const char* to_string(ConditioningKind kind) {
    switch (kind) {
    case ConditioningKind::ClassLabel:
        return "class-label";
    case ConditioningKind::Embedding:
        return "embedding";
    case ConditioningKind::Null:
        return "null";
    }
    return "?";
}

void Denoiser::check_inputs(const Latent& z, int t, const Conditioning& c) const {
    if (t < 0 || t > steps()) {
        throw IndexError(name() + ": timestep " + std::to_string(t) + " outside [0, " + std::to_string(steps()) + "]");
    }
    if (!supports(c.kind())) {
        throw ContractError(name() + ": conditioning kind '" + to_string(c.kind()) + "' is not supported");
    }
    if (!z.all_finite()) throw NumericError(name() + ": non-finite latent");
}

Latent Denoiser::predict_vjp(const Latent& z, int t, const Conditioning& c, const Latent& u) const {
    return finite_diff_vjp(*this, z, t, c, u);
}

Latent finite_diff_vjp(const Denoiser& denoiser, const Latent& z, int t, const Conditioning& c,
                       const Latent& u, double step) {
    require_same_shape(z, u, "predict_vjp");
    Latent out(z.shape());
    Latent probe = z;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double zi = probe[i];
        probe[i] = zi + step;
        Latent plus = denoiser.predict(probe, t, c);
        probe[i] = zi - step;
        Latent minus = denoiser.predict(probe, t, c);
        probe[i] = zi;
        double s = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) s += u[j] * (plus[j] - minus[j]);
        out[i] = s / (2.0 * step);
    }
    return out;
}

Latent cfg_predict(const Denoiser& denoiser, const Latent& z, int t, const Conditioning& c, double scale) {
    if (!denoiser.supports(ConditioningKind::Null)) {
        throw ContractError(denoiser.name() + ": classifier-free guidance needs null conditioning support");
    }
    Latent eps_null = denoiser.predict(z, t, Conditioning::null());
    if (c.kind() == ConditioningKind::Null) return eps_null;
    Latent eps_c = denoiser.predict(z, t, c);
    return combine(1.0 - scale, eps_null, scale, eps_c);
}

Latent cfg_predict_vjp(const Denoiser& denoiser, const Latent& z, int t, const Conditioning& c, double scale,
                       const Latent& u) {
    if (!denoiser.supports(ConditioningKind::Null)) {
        throw ContractError(denoiser.name() + ": classifier-free guidance needs null conditioning support");
    }
    Latent v_null = denoiser.predict_vjp(z, t, Conditioning::null(), u);
    if (c.kind() == ConditioningKind::Null) return v_null;
    Latent v_c = denoiser.predict_vjp(z, t, c, u);
    return combine(1.0 - scale, v_null, scale, v_c);
}

} // namespace invlab
