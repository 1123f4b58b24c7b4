// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "invlab/dataset.hpp"

#include <cmath>

#include "invlab/errors.hpp"
#include "invlab/inversion.hpp"
#include "invlab/rng.hpp"

namespace invlab {

namespace {

constexpr std::uint64_t kMixtureStream = 0xffffffffffffffffULL;

Conditioning make_conditioning(const std::string& kind, const DatasetSpec& spec, int component) {
    if (kind == "null") return Conditioning::null();
    if (kind == "class") return Conditioning::class_label(component_label(spec, component));
    std::vector<double> onehot(static_cast<std::size_t>(spec.components()), 0.0);
    onehot[static_cast<std::size_t>(component)] = 1.0;
    return Conditioning::embedding(std::move(onehot));
}

} // namespace

int component_label(const DatasetSpec& spec, int component) { return component / spec.components_per_class; }

GaussianMixture build_mixture(const DatasetSpec& spec, const NoiseSchedule& schedule, std::uint64_t seed) {
    if (spec.classes < 1 || spec.components_per_class < 1) throw ParameterError("dataset: empty mixture");
    Rng rng = Rng(seed).split(kMixtureStream);
    const std::size_t d = spec.shape.size();
    std::vector<std::vector<double>> bases;
    for (int c = 0; c < spec.classes; ++c) {
        auto b = rng.normals(d);
        for (auto& x : b) x *= spec.class_spread;
        bases.push_back(std::move(b));
    }
    const int m = spec.components();
    std::vector<Latent> means;
    std::vector<int> labels;
    for (int k = 0; k < m; ++k) {
        const int label = component_label(spec, k);
        auto v = rng.normals(d);
        for (std::size_t i = 0; i < d; ++i) v[i] = bases[static_cast<std::size_t>(label)][i] + spec.component_spread * v[i];
        means.emplace_back(spec.shape, std::move(v));
        labels.push_back(label);
    }
    std::vector<double> weights(static_cast<std::size_t>(m), 1.0 / m);
    return GaussianMixture(std::move(weights), std::move(means), spec.sigma0, std::move(labels), schedule);
}

Instance synth_instance(const DatasetSpec& spec, const NoiseSchedule& schedule, const Denoiser& denoiser,
                        std::uint64_t seed, int id, double cfg_scale) {
    Rng rng = Rng(seed).split(static_cast<std::uint64_t>(id));
    Instance inst;
    inst.id = id;
    inst.component = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.components())));
    inst.label = component_label(spec, inst.component);
    inst.ideal = make_conditioning(spec.ideal, spec, inst.component);
    inst.prompt = make_conditioning(spec.prompt, spec, inst.component);
    inst.z_T_star = Latent(spec.shape, rng.normals(spec.shape.size()));

    const int T = schedule.steps();
    Latent z = inst.z_T_star;
    inst.eps_trace.reserve(static_cast<std::size_t>(T));
    for (int t = T; t >= 1; --t) {
        Latent eps = guided_predict(denoiser, z, t, inst.ideal, cfg_scale);
        z = ddim_step(z, eps, schedule, t);
        if (!z.all_finite()) {
            throw NumericError("synth_dataset: sampling diverged at t=" + std::to_string(t) + " for instance " +
                               std::to_string(id));
        }
        inst.eps_trace.push_back(std::move(eps));
    }
    inst.z0 = std::move(z);

    const double ab = schedule.alpha_bar(T);
    inst.eps_forward = scaled(1.0 / std::sqrt(1.0 - ab), combine(1.0, inst.z_T_star, -std::sqrt(ab), inst.z0));
    return inst;
}

std::vector<Instance> synth_dataset(const DatasetSpec& spec, const NoiseSchedule& schedule, const Denoiser& denoiser,
                                    std::uint64_t seed, double cfg_scale) {
    if (spec.instances < 1) throw ParameterError("dataset.instances must be >= 1");
    std::vector<Instance> out;
    out.reserve(static_cast<std::size_t>(spec.instances));
    for (int n = 0; n < spec.instances; ++n) out.push_back(synth_instance(spec, schedule, denoiser, seed, n, cfg_scale));
    return out;
}

} // namespace invlab
