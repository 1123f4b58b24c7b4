// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "invlab/inversion.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "invlab/errors.hpp"

namespace invlab {

namespace {

constexpr double kGuard = 1e-12;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_compatible(const Denoiser& denoiser, const NoiseSchedule& schedule) {
    if (denoiser.steps() != schedule.steps()) {
        throw ContractError(denoiser.name() + ": built for T=" + std::to_string(denoiser.steps()) +
                            " but the schedule has T=" + std::to_string(schedule.steps()));
    }
}

Latent guided_vjp(const Denoiser& denoiser, const Latent& z, int t, const Conditioning& c, double cfg_scale,
                  const Latent& u) {
    if (cfg_scale == 1.0) return denoiser.predict_vjp(z, t, c, u);
    return cfg_predict_vjp(denoiser, z, t, c, cfg_scale, u);
}

// State of one fixed-point evaluation at z.
struct FixEval {
    double loss = 0.0;
    Latent grad;       // d L_fix / d z
};

// L_fix and its gradient. With `correction` set, f uses the corrected noise
// eps_hat(z) and the gradient is chained through the correction map.
FixEval evaluate_fix(const Latent& z, const Latent& z_prev, int t, StepCoeffs k, const Denoiser& denoiser,
                     const Conditioning& c, double cfg_scale, const ReferenceNoise* correction, double lambda) {
    Latent eps = guided_predict(denoiser, z, t, c, cfg_scale);
    Latent eps_used = correction ? reference_correction(eps, *correction, lambda) : eps;
    Latent r = combine(k.c1, z_prev, k.c2, eps_used);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= z[i];
    FixEval out;
    out.loss = norm2(r);
    out.grad = Latent(z.shape());
    if (out.loss <= kGuard) return out;

    Latent rhat = scaled(1.0 / out.loss, r);
    Latent v = rhat;
    if (correction) {
        const double l_ref = reference_loss(eps, *correction);
        if (l_ref > kGuard) {
            // P = I - (lambda / L_ref)(I - u u^T), u = (eps - eps_ref) / L_ref.
            Latent u = scaled(1.0 / l_ref, eps - correction->values);
            const double proj = dot(u, rhat);
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = rhat[i] - (lambda / l_ref) * (rhat[i] - proj * u[i]);
        }
    }
    Latent jt = guided_vjp(denoiser, z, t, c, cfg_scale, v);
    out.grad = combine(k.c2, jt, -1.0, rhat);
    return out;
}

// z <- z - min(eta, L / ||g||^2) g.
void descend(Latent& z, const FixEval& e, double eta) {
    const double g2 = dot(e.grad, e.grad);
    if (e.loss <= kGuard || g2 <= 0.0) return;
    const double step = std::min(eta, e.loss / g2);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] -= step * e.grad[i];
}

void require_finite_state(const Latent& z, int t, int round, double l_ref, double l_fix) {
    if (!z.all_finite() || !std::isfinite(l_fix) || !std::isfinite(l_ref)) {
        throw InversionError("inversion diverged at t=" + std::to_string(t) + " round " + std::to_string(round), t,
                             round, l_ref, l_fix);
    }
}

} // namespace

const char* to_string(ReferenceMode mode) {
    return mode == ReferenceMode::Oracle ? "oracle" : "whitened";
}

ReferenceMode parse_reference_mode(const std::string& s) {
    if (s == "oracle") return ReferenceMode::Oracle;
    if (s == "whitened") return ReferenceMode::Whitened;
    throw ParameterError("reference_mode: expected 'oracle' or 'whitened', got '" + s + "'");
}

const char* to_string(BreakReason reason) {
    switch (reason) {
    case BreakReason::Converged:
        return "converged";
    case BreakReason::MaxRounds:
        return "max_rounds";
    case BreakReason::SingleStep:
        return "single_step";
    }
    return "?";
}

void InversionConfig::validate() const {
    if (K < 1) throw ParameterError("K: must be >= 1");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ParameterError("lambda: must be >= 0");
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ParameterError("eta: must be > 0");
    if (!(delta > 0.0) || !std::isfinite(delta)) throw ParameterError("delta: must be > 0");
    if (!std::isfinite(cfg_scale)) throw ParameterError("cfg_scale: must be finite");
}

int InversionReport::total_iterations() const {
    return std::accumulate(steps.begin(), steps.end(), 0,
                           [](int acc, const TimestepRecord& r) { return acc + r.iterations; });
}

ReferenceNoise extract_reference(const Latent& z0, ReferenceMode mode, const std::optional<Latent>& ground_truth_eps) {
    if (mode == ReferenceMode::Oracle) {
        if (!ground_truth_eps) throw ContractError("extract_reference: oracle mode needs the ground-truth noise");
        require_same_shape(z0, *ground_truth_eps, "extract_reference");
        return {*ground_truth_eps, ReferenceMode::Oracle};
    }
    const double n = double(z0.size());
    const double mean = std::accumulate(z0.values().begin(), z0.values().end(), 0.0) / n;
    double var = 0.0;
    for (double v : z0.values()) var += (v - mean) * (v - mean);
    var /= n;
    if (!(var > 0.0)) throw ContractError("extract_reference: whitening needs a non-constant latent");
    const double inv_std = 1.0 / std::sqrt(var);
    Latent out(z0.shape());
    for (std::size_t i = 0; i < z0.size(); ++i) out[i] = (z0[i] - mean) * inv_std;
    return {std::move(out), ReferenceMode::Whitened};
}

double reference_loss(const Latent& eps_raw, const ReferenceNoise& ref) {
    require_same_shape(eps_raw, ref.values, "reference_loss");
    double s = 0.0;
    for (std::size_t i = 0; i < eps_raw.size(); ++i) {
        const double d = eps_raw[i] - ref.values[i];
        s += d * d;
    }
    return std::sqrt(s);
}

Latent reference_correction(const Latent& eps_raw, const ReferenceNoise& ref, double lambda) {
    if (!(lambda >= 0.0)) throw ParameterError("lambda: must be >= 0");
    const double l_ref = reference_loss(eps_raw, ref);
    if (l_ref <= kGuard || lambda == 0.0) return eps_raw;
    Latent out = eps_raw;
    const double k = lambda / l_ref;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= k * (eps_raw[i] - ref.values[i]);
    return out;
}

Latent guided_predict(const Denoiser& denoiser, const Latent& z, int t, const Conditioning& c, double cfg_scale) {
    if (cfg_scale == 1.0) return denoiser.predict(z, t, c);
    return cfg_predict(denoiser, z, t, c, cfg_scale);
}

FixedPointLoss fixed_point_loss(const Latent& z, const Latent& z_prev, int t, const Denoiser& denoiser,
                                const Conditioning& c, const NoiseSchedule& schedule, double cfg_scale,
                                const ReferenceNoise* correction, double lambda) {
    require_same_shape(z, z_prev, "fixed_point_loss");
    require_compatible(denoiser, schedule);
    FixEval e = evaluate_fix(z, z_prev, t, coeffs(schedule, t), denoiser, c, cfg_scale, correction, lambda);
    return {e.loss, std::move(e.grad)};
}

FixedPointResult fixed_point_refine(const Latent& z_init, const Latent& z_prev, int t, const Denoiser& denoiser,
                                    const Conditioning& c, const NoiseSchedule& schedule, double eta, int K,
                                    double delta, double cfg_scale) {
    require_same_shape(z_init, z_prev, "fixed_point_refine");
    require_compatible(denoiser, schedule);
    if (!(eta > 0.0)) throw ParameterError("eta: must be > 0");
    if (K < 1) throw ParameterError("K: must be >= 1");
    const StepCoeffs k = coeffs(schedule, t);

    FixedPointResult out{z_init, 0, {}, false};
    for (int i = 1; i <= K; ++i) {
        FixEval e;
        try {
            e = evaluate_fix(out.z, z_prev, t, k, denoiser, c, cfg_scale, nullptr, 0.0);
        } catch (const NumericError&) {
            throw InversionError("fixed_point_refine: non-finite evaluation at t=" + std::to_string(t), t, i, 0.0,
                                 NAN);
        }
        require_finite_state(out.z, t, i, 0.0, e.loss);
        out.iterations = i;
        out.loss_trace.push_back(e.loss);
        if (e.loss < delta) {
            out.converged = true;
            break;
        }
        descend(out.z, e, eta);
    }
    return out;
}

InversionReport dci_invert(const Latent& z0, const NoiseSchedule& schedule, const Denoiser& denoiser,
                           const Conditioning& source, const InversionConfig& config, const ReferenceNoise& eps_ref) {
    config.validate();
    require_compatible(denoiser, schedule);
    require_same_shape(z0, eps_ref.values, "dci_invert");
    const auto start = Clock::now();

    InversionReport report;
    report.method = "dci";
    report.config = config;
    Latent z = z0;
    for (int t = 1; t <= schedule.steps(); ++t) {
        const StepCoeffs k = coeffs(schedule, t);
        const Latent z_prev = z;
        TimestepRecord rec;
        rec.t = t;
        rec.reason = BreakReason::MaxRounds;
        Latent z_t;
        int round = 0;
        double l_ref = 0.0;
        double l_fix = 0.0;
        try {
            for (round = 1; round <= config.K; ++round) {
                if (round == 1 || !config.carry_forward) {
                    z_t = combine(k.c1, z_prev, k.c2, guided_predict(denoiser, z_prev, t - 1, source, config.cfg_scale));
                }
                const Latent eps_raw = guided_predict(denoiser, z_t, t, source, config.cfg_scale);
                l_ref = reference_loss(eps_raw, eps_ref);
                const Latent eps_hat = reference_correction(eps_raw, eps_ref, config.lambda);
                z_t = combine(k.c1, z_prev, k.c2, eps_hat);

                const FixEval e = evaluate_fix(z_t, z_prev, t, k, denoiser, source, config.cfg_scale,
                                               config.corrected_fix ? &eps_ref : nullptr, config.lambda);
                l_fix = e.loss;
                descend(z_t, e, config.eta);
                require_finite_state(z_t, t, round, l_ref, l_fix);

                rec.iterations = round;
                rec.l_ref.push_back(l_ref);
                rec.l_fix.push_back(l_fix);
                if (l_fix < config.delta) {
                    rec.reason = BreakReason::Converged;
                    break;
                }
            }
        } catch (const InversionError&) {
            throw;
        } catch (const NumericError& e) {
            throw InversionError(std::string("dci: ") + e.what() + " at t=" + std::to_string(t), t, round, l_ref, l_fix);
        }
        report.steps.push_back(std::move(rec));
        z = std::move(z_t);
    }
    report.z_T = std::move(z);
    report.wall_time_s = seconds_since(start);
    return report;
}

InversionReport ddim_invert(const Latent& z0, const NoiseSchedule& schedule, const Denoiser& denoiser,
                            const Conditioning& c, double cfg_scale) {
    require_compatible(denoiser, schedule);
    const auto start = Clock::now();
    InversionReport report;
    report.method = "ddim";
    report.config.K = 1;
    report.config.lambda = 0.0;
    report.config.cfg_scale = cfg_scale;
    Latent z = z0;
    for (int t = 1; t <= schedule.steps(); ++t) {
        try {
            z = ddim_invert_step_naive(z, guided_predict(denoiser, z, t - 1, c, cfg_scale), schedule, t);
        } catch (const NumericError& e) {
            throw InversionError(std::string("ddim: ") + e.what(), t, 1, 0.0, NAN);
        }
        require_finite_state(z, t, 1, 0.0, 0.0);
        report.steps.push_back(TimestepRecord{t, 1, {}, {}, BreakReason::SingleStep});
    }
    report.z_T = std::move(z);
    report.wall_time_s = seconds_since(start);
    return report;
}

InversionReport picard_invert(const Latent& z0, const NoiseSchedule& schedule, const Denoiser& denoiser,
                              const Conditioning& c, int K, double delta, double cfg_scale) {
    require_compatible(denoiser, schedule);
    if (K < 1) throw ParameterError("K: must be >= 1");
    if (!(delta > 0.0)) throw ParameterError("delta: must be > 0");
    const auto start = Clock::now();
    InversionReport report;
    report.method = "picard";
    report.config.K = K;
    report.config.lambda = 0.0;
    report.config.delta = delta;
    report.config.cfg_scale = cfg_scale;
    Latent z = z0;
    for (int t = 1; t <= schedule.steps(); ++t) {
        const StepCoeffs k = coeffs(schedule, t);
        const Latent z_prev = z;
        TimestepRecord rec{t, 0, {}, {}, BreakReason::MaxRounds};
        try {
            Latent cur = combine(k.c1, z_prev, k.c2, guided_predict(denoiser, z_prev, t - 1, c, cfg_scale));
            for (int i = 1; i <= K; ++i) {
                Latent next = combine(k.c1, z_prev, k.c2, guided_predict(denoiser, cur, t, c, cfg_scale));
                const double diff = norm2(next - cur);
                cur = std::move(next);
                require_finite_state(cur, t, i, 0.0, diff);
                rec.iterations = i;
                rec.l_fix.push_back(diff);
                if (diff < delta) {
                    rec.reason = BreakReason::Converged;
                    break;
                }
            }
            z = std::move(cur);
        } catch (const InversionError&) {
            throw;
        } catch (const NumericError& e) {
            throw InversionError(std::string("picard: ") + e.what(), t, rec.iterations + 1, 0.0, NAN);
        }
        report.steps.push_back(std::move(rec));
    }
    report.z_T = std::move(z);
    report.wall_time_s = seconds_since(start);
    return report;
}

Latent reconstruct(const Latent& z_T, const NoiseSchedule& schedule, const Denoiser& denoiser, const Conditioning& c,
                   double cfg_scale, int from_t) {
    require_compatible(denoiser, schedule);
    if (from_t < 0) from_t = schedule.steps();
    if (from_t > schedule.steps()) throw IndexError("reconstruct: from_t exceeds T");
    Latent z = z_T;
    for (int t = from_t; t >= 1; --t) {
        try {
            z = ddim_step(z, guided_predict(denoiser, z, t, c, cfg_scale), schedule, t);
        } catch (const NumericError& e) {
            throw NumericError(std::string("reconstruct: sampling diverged at t=") + std::to_string(t) + ": " + e.what());
        }
        if (!z.all_finite()) throw NumericError("reconstruct: sampling diverged at t=" + std::to_string(t));
    }
    return z;
}

EditResult edit_condition_swap(const Latent& z0, const NoiseSchedule& schedule, const Denoiser& denoiser,
                               const Conditioning& c_src, const Conditioning& c_tgt, const InversionConfig& config,
                               const ReferenceNoise& eps_ref) {
    if (!denoiser.supports(c_src.kind()) || !denoiser.supports(c_tgt.kind())) {
        throw ContractError("edit_condition_swap: denoiser does not support both conditionings");
    }
    InversionReport report = dci_invert(z0, schedule, denoiser, c_src, config, eps_ref);
    Latent edited = reconstruct(report.z_T, schedule, denoiser, c_tgt, config.cfg_scale);
    report.method = "edit";
    return {std::move(edited), std::move(report)};
}

} // namespace invlab
