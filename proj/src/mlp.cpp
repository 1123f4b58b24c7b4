// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "invlab/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "invlab/errors.hpp"

namespace invlab {

namespace {

constexpr const char* kMagic = "invlab-mlp";
constexpr int kFormatVersion = 1;

} // namespace

std::size_t MlpDenoiser::parameter_count(const std::vector<std::size_t>& layer_sizes) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) n += layer_sizes[l + 1] * (layer_sizes[l] + 1);
    return n;
}

MlpDenoiser::MlpDenoiser(Shape latent_shape, std::size_t cond_dim, std::vector<std::size_t> layer_sizes,
                         std::vector<double> parameters, int steps)
    : latent_shape_(std::move(latent_shape)), cond_dim_(cond_dim), layer_sizes_(std::move(layer_sizes)),
      parameters_(std::move(parameters)), steps_(steps) {
    const std::size_t d = latent_shape_.size();
    if (d == 0) throw ParameterError("latent_shape: must be non-empty");
    if (steps_ < 1) throw ParameterError("steps: must be >= 1");
    if (layer_sizes_.size() < 2) throw ParameterError("layer_sizes: need input and output sizes");
    for (std::size_t s : layer_sizes_) {
        if (s == 0) throw ParameterError("layer_sizes: entries must be positive");
    }
    if (layer_sizes_.front() != d + kTimeEmbeddingDim + cond_dim_) {
        throw ParameterError("layer_sizes: input size must equal latent + time embedding + cond_dim");
    }
    if (layer_sizes_.back() != d) throw ParameterError("layer_sizes: output size must equal latent size");
    if (parameters_.size() != parameter_count(layer_sizes_)) {
        throw ParameterError("parameters: count does not match layer_sizes");
    }
    for (double p : parameters_) {
        if (!std::isfinite(p)) throw ParameterError("parameters: must be finite");
    }
}

MlpDenoiser MlpDenoiser::initialize(Shape latent_shape, std::size_t cond_dim, std::vector<std::size_t> hidden,
                                    int steps, std::uint64_t seed) {
    const std::size_t d = latent_shape.size();
    std::vector<std::size_t> sizes;
    sizes.push_back(d + kTimeEmbeddingDim + cond_dim);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(d);

    std::mt19937_64 rng(seed);
    std::vector<double> params;
    params.reserve(parameter_count(sizes));
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const double bound = std::sqrt(1.0 / double(sizes[l]));
        std::uniform_real_distribution<double> uni(-bound, bound);
        for (std::size_t i = 0; i < sizes[l + 1] * sizes[l]; ++i) params.push_back(uni(rng));
        for (std::size_t i = 0; i < sizes[l + 1]; ++i) params.push_back(0.0);
    }
    return MlpDenoiser(std::move(latent_shape), cond_dim, std::move(sizes), std::move(params), steps);
}

bool MlpDenoiser::supports(ConditioningKind kind) const {
    if (kind == ConditioningKind::Null) return true;
    return cond_dim_ > 0;
}

std::vector<double> MlpDenoiser::time_embedding(int t, int steps) {
    std::vector<double> out(kTimeEmbeddingDim);
    const double x = double(t) / double(steps);
    for (int k = 0; k < kTimeFrequencies; ++k) {
        const double w = std::numbers::pi * double(1 << k) * x;
        out[2 * k] = std::sin(w);
        out[2 * k + 1] = std::cos(w);
    }
    return out;
}

std::vector<double> MlpDenoiser::input_features(int t, const Conditioning& c) const {
    std::vector<double> f = time_embedding(t, steps_);
    std::vector<double> cond(cond_dim_, 0.0);
    switch (c.kind()) {
    case ConditioningKind::Null:
        break;
    case ConditioningKind::ClassLabel:
        if (static_cast<std::size_t>(c.label()) >= cond_dim_) {
            throw ContractError("mlp: class label " + std::to_string(c.label()) + " exceeds cond_dim");
        }
        cond[static_cast<std::size_t>(c.label())] = 1.0;
        break;
    case ConditioningKind::Embedding:
        if (c.embedding().size() != cond_dim_) throw ContractError("mlp: embedding length must equal cond_dim");
        cond = c.embedding();
        break;
    }
    f.insert(f.end(), cond.begin(), cond.end());
    return f;
}

Latent MlpDenoiser::predict(const Latent& z, int t, const Conditioning& c) const {
    check_inputs(z, t, c);
    if (z.shape() != latent_shape_) throw ShapeError("mlp: latent shape mismatch");
    std::vector<double> x(z.data());
    const std::vector<double> extra = input_features(t, c);
    x.insert(x.end(), extra.begin(), extra.end());

    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
        const std::size_t in = layer_sizes_[l];
        const std::size_t out = layer_sizes_[l + 1];
        const double* w = parameters_.data() + off;
        const double* b = w + out * in;
        std::vector<double> y(out);
        for (std::size_t r = 0; r < out; ++r) {
            double s = b[r];
            for (std::size_t k = 0; k < in; ++k) s += w[r * in + k] * x[k];
            y[r] = (l + 2 < layer_sizes_.size()) ? std::tanh(s) : s;
        }
        x = std::move(y);
        off += out * (in + 1);
    }
    return Latent(latent_shape_, std::move(x));
}

ad::Var MlpDenoiser::forward(ad::Tape& tape, ad::Var z, ad::Var params, int t, const Conditioning& c) const {
    const std::vector<double>& p = tape.value(params);
    if (p.size() != parameters_.size()) throw ShapeError("mlp: parameter node has the wrong length");
    const ad::Var extra = tape.constant(input_features(t, c));
    const ad::Var parts[] = {z, extra};
    ad::Var x = tape.concat(parts);

    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
        const std::size_t in = layer_sizes_[l];
        const std::size_t out = layer_sizes_[l + 1];
        const ad::Var w = tape.slice(params, off, out * in);
        const ad::Var b = tape.slice(params, off + out * in, out);
        x = tape.add(tape.matvec(w, x, out, in), b);
        if (l + 2 < layer_sizes_.size()) x = tape.tanh(x);
        off += out * (in + 1);
    }
    return x;
}

Latent MlpDenoiser::predict_vjp(const Latent& z, int t, const Conditioning& c, const Latent& u) const {
    check_inputs(z, t, c);
    require_same_shape(z, u, "predict_vjp");
    ad::Tape tape;
    const ad::Var zv = tape.leaf(z.data());
    const ad::Var pv = tape.constant(parameters_);
    const ad::Var out = forward(tape, zv, pv, t, c);
    const ad::Var uv = tape.constant(u.data());
    const ad::Var s = tape.dot(uv, out);
    ad::Gradients g = tape.grad(s);
    return Latent(latent_shape_, std::move(g.at(zv)));
}

void MlpDenoiser::save(std::ostream& out) const {
    out << kMagic << ' ' << kFormatVersion << '\n';
    out << "latent_shape " << latent_shape_.dims.size();
    for (std::size_t d : latent_shape_.dims) out << ' ' << d;
    out << '\n';
    out << "cond_dim " << cond_dim_ << '\n';
    out << "steps " << steps_ << '\n';
    out << "layer_sizes " << layer_sizes_.size();
    for (std::size_t s : layer_sizes_) out << ' ' << s;
    out << '\n';
    out << "parameters " << parameters_.size() << '\n';
    char buf[64];
    for (double p : parameters_) {
        std::snprintf(buf, sizeof(buf), "%a\n", p);
        out << buf;
    }
}

void MlpDenoiser::save(const std::filesystem::path& path) const {
    std::ofstream f(path);
    if (!f) throw FileError("cannot open " + path.string() + " for writing");
    save(f);
    if (!f) throw FileError("failed writing " + path.string());
}

MlpDenoiser MlpDenoiser::load(std::istream& in) {
    auto expect = [&](const char* key) {
        std::string k;
        if (!(in >> k) || k != key) throw FileError(std::string("mlp file: expected '") + key + "'");
    };
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kMagic) throw FileError("mlp file: bad header");
    if (version != kFormatVersion) throw FileError("mlp file: unsupported version " + std::to_string(version));

    expect("latent_shape");
    std::size_t rank = 0;
    in >> rank;
    Shape shape;
    shape.dims.resize(rank);
    for (auto& d : shape.dims) in >> d;
    expect("cond_dim");
    std::size_t cond_dim = 0;
    in >> cond_dim;
    expect("steps");
    int steps = 0;
    in >> steps;
    expect("layer_sizes");
    std::size_t nl = 0;
    in >> nl;
    std::vector<std::size_t> sizes(nl);
    for (auto& s : sizes) in >> s;
    expect("parameters");
    std::size_t np = 0;
    in >> np;
    if (!in) throw FileError("mlp file: truncated header");
    std::vector<double> params(np);
    std::string tok;
    for (auto& p : params) {
        if (!(in >> tok)) throw FileError("mlp file: truncated parameter list");
        p = std::strtod(tok.c_str(), nullptr);
    }
    return MlpDenoiser(std::move(shape), cond_dim, std::move(sizes), std::move(params), steps);
}

MlpDenoiser MlpDenoiser::load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw FileError("cannot open " + path.string());
    return load(f);
}

TrainingResult train_mlp_denoiser(const std::vector<TrainingExample>& dataset, const NoiseSchedule& schedule,
                                  std::size_t cond_dim, const TrainingOptions& options) {
    if (dataset.empty()) throw ParameterError("dataset: must be non-empty");
    MlpDenoiser init = MlpDenoiser::initialize(dataset.front().z0.shape(), cond_dim, options.hidden,
                                               schedule.steps(), options.seed);
    return train_mlp_denoiser(dataset, schedule, std::move(init), options);
}

TrainingResult train_mlp_denoiser(const std::vector<TrainingExample>& dataset, const NoiseSchedule& schedule,
                                  MlpDenoiser init, const TrainingOptions& options) {
    if (dataset.empty()) throw ParameterError("dataset: must be non-empty");
    if (options.epochs < 0) throw ParameterError("epochs: must be >= 0");
    if (!(options.learning_rate > 0.0)) throw ParameterError("learning_rate: must be positive");
    if (options.batch_size == 0) throw ParameterError("batch_size: must be positive");
    if (init.steps() != schedule.steps()) throw ParameterError("schedule: T does not match the network");
    for (const auto& ex : dataset) {
        if (ex.z0.shape() != init.latent_shape()) throw ShapeError("dataset: inconsistent latent shapes");
    }

    const std::size_t d = init.latent_shape().size();
    std::vector<double> params = init.parameters();
    std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_int_distribution<int> pick_t(1, schedule.steps());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<double> loss_trace;
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        try {
            for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
                const std::size_t end = std::min(order.size(), start + options.batch_size);
                std::vector<double> grad(params.size(), 0.0);
                for (std::size_t i = start; i < end; ++i) {
                    const TrainingExample& ex = dataset[order[i]];
                    const int t = pick_t(rng);
                    const double a = schedule.alpha_bar(t);
                    std::vector<double> eps(d), zt(d);
                    for (std::size_t j = 0; j < d; ++j) {
                        eps[j] = normal(rng);
                        zt[j] = std::sqrt(a) * ex.z0[j] + std::sqrt(1.0 - a) * eps[j];
                    }
                    const bool drop = options.null_probability > 0.0 && unit(rng) < options.null_probability;
                    const Conditioning& c = drop ? Conditioning::null() : ex.c;

                    ad::Tape tape;
                    const ad::Var zv = tape.constant(zt);
                    const ad::Var pv = tape.leaf(params);
                    const ad::Var out = init.forward(tape, zv, pv, t, c);
                    const ad::Var diff = tape.sub(out, tape.constant(eps));
                    const ad::Var loss = tape.scale(tape.sum_squares(diff), 1.0 / double(d));
                    epoch_loss += tape.scalar(loss);
                    const ad::Gradients g = tape.grad(loss);
                    const auto& gp = g.at(pv);
                    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += gp[k];
                }
                const double step = options.learning_rate / double(end - start);
                for (std::size_t k = 0; k < params.size(); ++k) params[k] -= step * grad[k];
                for (double p : params) {
                    if (!std::isfinite(p)) throw NumericError("parameters diverged");
                }
            }
        } catch (const NumericError& e) {
            throw TrainingError(std::string("training diverged: ") + e.what(), epoch);
        }
        epoch_loss /= double(dataset.size());
        if (!std::isfinite(epoch_loss)) throw TrainingError("training loss is not finite", epoch);
        loss_trace.push_back(epoch_loss);
        init = MlpDenoiser(init.latent_shape(), init.cond_dim(), init.layer_sizes(), params, init.steps());
    }
    return TrainingResult{std::move(init), std::move(loss_trace)};
}

} // namespace invlab
