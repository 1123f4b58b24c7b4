// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "invlab/gaussian_mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "invlab/errors.hpp"

namespace invlab {

GaussianMixture::GaussianMixture(std::vector<double> weights, std::vector<Latent> means, double sigma0,
                                 std::vector<int> labels, NoiseSchedule schedule)
    : weights_(std::move(weights)), means_(std::move(means)), sigma0_(sigma0), labels_(std::move(labels)),
      schedule_(std::move(schedule)) {
    if (weights_.empty()) throw ParameterError("weights: mixture needs at least one component");
    if (means_.size() != weights_.size()) throw ParameterError("means: count must match weights");
    if (labels_.empty()) labels_.assign(weights_.size(), 0);
    if (labels_.size() != weights_.size()) throw ParameterError("labels: count must match weights");
    double total = 0.0;
    for (double w : weights_) {
        if (!(w > 0.0) || !std::isfinite(w)) throw ParameterError("weights: must be positive");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ParameterError("weights: must sum to 1");
    if (!(sigma0_ > 0.0) || !std::isfinite(sigma0_)) throw ParameterError("sigma0: must be positive");
    for (const auto& m : means_) {
        if (m.shape() != means_.front().shape()) throw ParameterError("means: all means must share one shape");
    }
    for (int l : labels_) {
        if (l < 0) throw ParameterError("labels: must be non-negative");
    }
}

GaussianMixture GaussianMixture::single(Latent mean, double sigma0, NoiseSchedule schedule) {
    return GaussianMixture({1.0}, {std::move(mean)}, sigma0, {0}, std::move(schedule));
}

std::vector<double> GaussianMixture::effective_log_weights(const Conditioning& c) const {
    const double ninf = -std::numeric_limits<double>::infinity();
    std::vector<double> lw(weights_.size(), ninf);
    bool any = false;
    switch (c.kind()) {
    case ConditioningKind::Null:
        for (std::size_t k = 0; k < weights_.size(); ++k) lw[k] = std::log(weights_[k]);
        any = true;
        break;
    case ConditioningKind::ClassLabel:
        for (std::size_t k = 0; k < weights_.size(); ++k) {
            if (labels_[k] == c.label()) {
                lw[k] = std::log(weights_[k]);
                any = true;
            }
        }
        break;
    case ConditioningKind::Embedding: {
        const auto& e = c.embedding();
        if (e.size() != weights_.size()) {
            throw ContractError("gm-oracle: embedding length must equal the component count");
        }
        for (std::size_t k = 0; k < weights_.size(); ++k) {
            if (e[k] < 0.0) throw ContractError("gm-oracle: embedding weights must be non-negative");
            if (e[k] > 0.0) {
                lw[k] = std::log(weights_[k]) + std::log(e[k]);
                any = true;
            }
        }
        break;
    }
    }
    if (!any) throw ContractError("gm-oracle: conditioning " + c.to_string() + " selects no component");
    return lw;
}

std::vector<double> GaussianMixture::responsibilities(const Latent& z, int t, const Conditioning& c) const {
    check_inputs(z, t, c);
    require_same_shape(z, means_.front(), "gm-oracle");
    const double a = schedule_.alpha_bar(t);
    const double v = std::max(1.0 - a, kVarianceFloor);
    const double var = a * sigma0_ * sigma0_ + v;
    const double sa = std::sqrt(a);

    std::vector<double> logit = effective_log_weights(c);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < logit.size(); ++k) {
        if (!std::isfinite(logit[k])) continue;
        const auto mu = means_[k].values();
        double d2 = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double d = z[i] - sa * mu[i];
            d2 += d * d;
        }
        logit[k] -= 0.5 * d2 / var;
        best = std::max(best, logit[k]);
    }
    std::vector<double> r(logit.size(), 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < logit.size(); ++k) {
        if (!std::isfinite(logit[k])) continue;
        r[k] = std::exp(logit[k] - best);
        total += r[k];
    }
    for (double& x : r) x /= total;
    return r;
}

Latent GaussianMixture::predict(const Latent& z, int t, const Conditioning& c) const {
    const std::vector<double> r = responsibilities(z, t, c);
    const double a = schedule_.alpha_bar(t);
    const double v = std::max(1.0 - a, kVarianceFloor);
    const double var = a * sigma0_ * sigma0_ + v;
    const double sa = std::sqrt(a);
    const double gain = std::sqrt(v) / var;

    Latent out(z.shape());
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = z[i];
    for (std::size_t k = 0; k < r.size(); ++k) {
        if (r[k] == 0.0) continue;
        const auto mu = means_[k].values();
        const double w = sa * r[k];
        for (std::size_t i = 0; i < o.size(); ++i) o[i] -= w * mu[i];
    }
    for (double& x : o) x *= gain;
    return out;
}

// J = (s/var) (I - (a/var) Cov_r(mu)), symmetric, so u^T J = J u.
Latent GaussianMixture::predict_vjp(const Latent& z, int t, const Conditioning& c, const Latent& u) const {
    require_same_shape(z, u, "predict_vjp");
    const std::vector<double> r = responsibilities(z, t, c);
    const double a = schedule_.alpha_bar(t);
    const double v = std::max(1.0 - a, kVarianceFloor);
    const double var = a * sigma0_ * sigma0_ + v;
    const double gain = std::sqrt(v) / var;
    const std::size_t n = z.size();

    std::vector<double> mean_mu(n, 0.0);
    for (std::size_t k = 0; k < r.size(); ++k) {
        if (r[k] == 0.0) continue;
        const auto mu = means_[k].values();
        for (std::size_t i = 0; i < n; ++i) mean_mu[i] += r[k] * mu[i];
    }

    Latent out = u;
    auto o = out.values();
    for (std::size_t k = 0; k < r.size(); ++k) {
        if (r[k] == 0.0) continue;
        const auto mu = means_[k].values();
        double proj = 0.0;
        for (std::size_t i = 0; i < n; ++i) proj += (mu[i] - mean_mu[i]) * u[i];
        const double w = (a / var) * r[k] * proj;
        for (std::size_t i = 0; i < n; ++i) o[i] -= w * (mu[i] - mean_mu[i]);
    }
    for (double& x : o) x *= gain;
    return out;
}

Latent GaussianMixture::sample(std::mt19937_64& rng, const Conditioning& c) const {
    std::vector<double> lw = effective_log_weights(c);
    std::vector<double> p(lw.size());
    for (std::size_t k = 0; k < lw.size(); ++k) p[k] = std::isfinite(lw[k]) ? std::exp(lw[k]) : 0.0;
    std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
    const std::size_t k = pick(rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    Latent out = means_[k];
    for (double& x : out.values()) x += sigma0_ * normal(rng);
    return out;
}

} // namespace invlab
