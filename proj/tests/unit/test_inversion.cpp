// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "invlab/errors.hpp"
#include "invlab/inversion.hpp"
#include "invlab/metrics.hpp"
#include "invlab/mlp.hpp"
#include "support.hpp"

using namespace invlab;
using invlab::testing::affine_fixed_point;
using invlab::testing::affine_oracle;
using invlab::testing::max_rel_err;
using invlab::testing::random_latent;

namespace {

struct Synth {
    Latent z_T_star;
    Latent z0;
    ReferenceNoise ref;
};

Synth synthesize(const Denoiser& den, const NoiseSchedule& s, const Conditioning& c, std::mt19937_64& rng,
                 std::size_t dim) {
    Synth out;
    out.z_T_star = random_latent(rng, dim);
    out.z0 = reconstruct(out.z_T_star, s, den, c);
    const double ab = s.alpha_bar(s.steps());
    const Latent eps = scaled(1.0 / std::sqrt(1.0 - ab), combine(1.0, out.z_T_star, -std::sqrt(ab), out.z0));
    out.ref = extract_reference(out.z0, ReferenceMode::Oracle, eps);
    return out;
}

} // namespace

TEST_SUITE("inversion") {

TEST_CASE("config validation") {
    InversionConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.K == 5);
    CHECK(c.lambda == 2.0);
    CHECK(c.eta == 1e-3);
    CHECK(c.delta == 1e-5);
    c.K = 0;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = {};
    c.lambda = -1;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = {};
    c.eta = 0;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = {};
    c.delta = 0;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    CHECK(parse_reference_mode("whitened") == ReferenceMode::Whitened);
    CHECK_THROWS_AS(parse_reference_mode("encoder"), ParameterError);
}

TEST_CASE("reference extraction") {
    const Latent e = Latent::flat({0.3, -0.1});
    const auto oracle = extract_reference(Latent::flat({1.0, 2.0}), ReferenceMode::Oracle, e);
    CHECK(oracle.values == e);
    CHECK(oracle.provenance == ReferenceMode::Oracle);
    CHECK_THROWS_AS(extract_reference(Latent::flat({1.0, 2.0}), ReferenceMode::Oracle), ContractError);

    const auto white = extract_reference(Latent::flat({1.0, 3.0}), ReferenceMode::Whitened);
    CHECK(white.values[0] == doctest::Approx(-1.0));
    CHECK(white.values[1] == doctest::Approx(1.0));
    CHECK(white.provenance == ReferenceMode::Whitened);
    CHECK_THROWS_AS(extract_reference(Latent::flat({2.0, 2.0, 2.0}), ReferenceMode::Whitened), ContractError);
}

TEST_CASE("reference correction examples") {
    const Latent raw = Latent::flat({1.0, 0.0, 0.0, 0.0});
    const ReferenceNoise zero{Latent(Shape::flat(4)), ReferenceMode::Oracle};
    const Latent half = reference_correction(raw, zero, 0.5);
    CHECK(half == Latent::flat({0.5, 0.0, 0.0, 0.0}));
    CHECK(reference_loss(raw, zero) == 1.0);
    CHECK(reference_correction(raw, ReferenceNoise{raw, ReferenceMode::Oracle}, 3.0) == raw);
    std::mt19937_64 rng(1);
    for (int i = 0; i < 10; ++i) {
        const Latent a = random_latent(rng, 6);
        const ReferenceNoise r{random_latent(rng, 6), ReferenceMode::Oracle};
        CHECK(reference_correction(a, r, 0.0) == a);
        // Moves exactly lambda toward the reference.
        const Latent moved = reference_correction(a, r, 0.4);
        CHECK(norm2(moved - a) == doctest::Approx(0.4).epsilon(1e-12));
        CHECK(reference_loss(moved, r) == doctest::Approx(reference_loss(a, r) - 0.4).epsilon(1e-12));
    }
    CHECK_THROWS_AS(reference_correction(raw, ReferenceNoise{Latent(Shape::flat(3)), ReferenceMode::Oracle}, 1.0),
                    ShapeError);
}

TEST_CASE("fixed-point refinement stops immediately at a fixed point") {
    const auto s = make_linear_schedule(50);
    const auto gm = affine_oracle(4, s);
    std::mt19937_64 rng(2);
    const Latent z_prev = random_latent(rng, 4);
    const Latent star = affine_fixed_point(z_prev, s, 17);
    const auto r = fixed_point_refine(star, z_prev, 17, gm, Conditioning::null(), s, 1e-3, 5, 1e-5);
    CHECK(r.iterations == 1);
    CHECK(r.converged);
    CHECK(r.z == star);
}

TEST_CASE("fixed-point refinement reaches the closed-form fixed point") {
    const auto s = make_linear_schedule(50);
    const auto gm = affine_oracle(8, s);
    std::mt19937_64 rng(3);
    for (int t = 1; t <= 50; ++t) {
        const Latent z_prev = random_latent(rng, 8);
        const Latent init = ddim_invert_step_naive(z_prev, gm.predict(z_prev, t - 1, Conditioning::null()), s, t);
        const auto r = fixed_point_refine(init, z_prev, t, gm, Conditioning::null(), s, 1e-3, 10, 1e-6);
        CHECK(r.iterations <= 10);
        CHECK(max_abs_diff(r.z, affine_fixed_point(z_prev, s, t)) <= 1e-6);
    }
}

TEST_CASE("property: L_fix decreases strictly on the affine oracle until convergence") {
    const auto s = make_linear_schedule(50);
    const auto gm = affine_oracle(6, s);
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        const int t = 1 + trial % 50;
        const Latent z_prev = random_latent(rng, 6);
        const Latent init = combine(1.0, affine_fixed_point(z_prev, s, t), 1.0, random_latent(rng, 6, 0.01));
        const auto r = fixed_point_refine(init, z_prev, t, gm, Conditioning::null(), s, 1e-3, 20, 1e-12);
        for (std::size_t i = 1; i < r.loss_trace.size(); ++i) CHECK(r.loss_trace[i] < r.loss_trace[i - 1]);
    }
}

TEST_CASE("vanishing learning rate barely moves the latent") {
    const auto s = make_linear_schedule(50);
    const auto gm = affine_oracle(4, s);
    std::mt19937_64 rng(5);
    const Latent z_prev = random_latent(rng, 4);
    const Latent init = random_latent(rng, 4);
    const auto r = fixed_point_refine(init, z_prev, 9, gm, Conditioning::null(), s, 1e-12, 5, 1e-9);
    CHECK(r.iterations == 5);
    CHECK(norm2(r.z - init) <= 1e-6);
}

TEST_CASE("fixed-point loss gradient matches central differences") {
    const auto s = make_linear_schedule(50);
    std::mt19937_64 rng(6);
    const GaussianMixture gm({0.5, 0.5}, {random_latent(rng, 5), random_latent(rng, 5)}, 0.5, {0, 1}, s);
    for (int trial = 0; trial < 20; ++trial) {
        const int t = 1 + (trial * 3) % 50;
        const Latent z_prev = random_latent(rng, 5);
        const Latent z = random_latent(rng, 5);
        const ReferenceNoise ref{random_latent(rng, 5), ReferenceMode::Oracle};
        for (const ReferenceNoise* corr : {static_cast<const ReferenceNoise*>(nullptr), &ref}) {
            const auto exact = fixed_point_loss(z, z_prev, t, gm, Conditioning::null(), s, 1.0, corr, 0.7);
            const auto fd = ad::finite_diff_grad(
                [&](std::span<const double> v) {
                    return fixed_point_loss(Latent(z.shape(), std::vector<double>(v.begin(), v.end())), z_prev, t,
                                            gm, Conditioning::null(), s, 1.0, corr, 0.7)
                        .value;
                },
                z.data());
            CHECK(max_rel_err(exact.grad.data(), fd) <= 1e-4);
        }
    }
}

TEST_CASE("dci report invariants") {
    const auto s = make_linear_schedule(50);
    std::mt19937_64 rng(7);
    const GaussianMixture gm({0.5, 0.5}, {random_latent(rng, 8), random_latent(rng, 8)}, 0.3, {0, 1}, s);
    const Synth inst = synthesize(gm, s, Conditioning::class_label(0), rng, 8);
    for (bool carry : {true, false}) {
        for (bool corrected : {false, true}) {
            InversionConfig cfg;
            cfg.carry_forward = carry;
            cfg.corrected_fix = corrected;
            const auto rep = dci_invert(inst.z0, s, gm, Conditioning::null(), cfg, inst.ref);
            REQUIRE(rep.steps.size() == 50);
            CHECK(rep.z_T.all_finite());
            for (const auto& st : rep.steps) {
                CHECK(st.iterations >= 1);
                CHECK(st.iterations <= cfg.K);
                CHECK(st.l_fix.size() == static_cast<std::size_t>(st.iterations));
                for (double l : st.l_fix) CHECK((std::isfinite(l) && l >= 0.0));
                if (st.reason == BreakReason::Converged) CHECK(st.l_fix.back() < cfg.delta);
                CHECK((st.l_fix.back() < cfg.delta || st.iterations == cfg.K));
            }
        }
    }
}

TEST_CASE("dci with lambda=0, K=1 and vanishing eta equals one Picard iteration") {
    const auto s = make_linear_schedule(50);
    std::mt19937_64 rng(8);
    const GaussianMixture gm({0.3, 0.7}, {random_latent(rng, 6), random_latent(rng, 6)}, 0.4, {0, 0}, s);
    const Synth inst = synthesize(gm, s, Conditioning::null(), rng, 6);
    InversionConfig cfg;
    cfg.lambda = 0.0;
    cfg.K = 1;
    cfg.eta = 1e-12;
    const auto dci = dci_invert(inst.z0, s, gm, Conditioning::null(), cfg, inst.ref);
    const auto picard = picard_invert(inst.z0, s, gm, Conditioning::null(), 1, 1e-12);
    CHECK(max_abs_diff(dci.z_T, picard.z_T) <= 1e-8);
    // The naive baseline evaluates eps at (z_{t-1}, t-1) and is a different trajectory.
    const auto ddim = ddim_invert(inst.z0, s, gm, Conditioning::null());
    CHECK(max_abs_diff(dci.z_T, ddim.z_T) > 1e-6);
}

TEST_CASE("lambda=0 dci is the same run as the fixed-point-only baseline at any K") {
    const auto s = make_linear_schedule(20);
    std::mt19937_64 rng(9);
    const GaussianMixture gm({1.0}, {random_latent(rng, 4)}, 0.5, {0}, s);
    const Synth inst = synthesize(gm, s, Conditioning::null(), rng, 4);
    InversionConfig a;
    a.lambda = 0.0;
    const auto r1 = dci_invert(inst.z0, s, gm, Conditioning::null(), a, inst.ref);
    const ReferenceNoise other{random_latent(rng, 4), ReferenceMode::Oracle};
    const auto r2 = dci_invert(inst.z0, s, gm, Conditioning::null(), a, other);
    CHECK(r1.z_T == r2.z_T);
}

TEST_CASE("fixed-point inversion lands closer to the ideal noise than naive inversion on the affine oracle") {
    const auto s = make_linear_schedule(50);
    const auto gm = affine_oracle(8, s);
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 10; ++trial) {
        const Synth inst = synthesize(gm, s, Conditioning::null(), rng, 8);
        InversionConfig cfg;
        cfg.lambda = 0.0;
        const auto dci = dci_invert(inst.z0, s, gm, Conditioning::null(), cfg, inst.ref);
        const auto ddim = ddim_invert(inst.z0, s, gm, Conditioning::null());
        CHECK(noise_gap(dci.z_T, inst.z_T_star) < noise_gap(ddim.z_T, inst.z_T_star));
    }
}

TEST_CASE("naive inversion on a one-step schedule is one practical step") {
    const auto s = make_linear_schedule(1, 0.3, 0.3);
    const auto gm = affine_oracle(3, s);
    const Latent z0 = Latent::flat({0.5, -1.0, 2.0});
    const auto rep = ddim_invert(z0, s, gm, Conditioning::null());
    CHECK(rep.z_T == ddim_invert_step_naive(z0, gm.predict(z0, 0, Conditioning::null()), s, 1));
    CHECK(rep.steps.size() == 1);
    CHECK(rep.steps[0].reason == BreakReason::SingleStep);
}

TEST_CASE("naive inversion round trip is not exact") {
    const auto s = make_linear_schedule(50);
    std::mt19937_64 rng(11);
    const GaussianMixture gm({0.5, 0.5}, {random_latent(rng, 4), random_latent(rng, 4)}, 0.3, {0, 1}, s);
    for (int trial = 0; trial < 10; ++trial) {
        const Synth inst = synthesize(gm, s, Conditioning::null(), rng, 4);
        const auto rep = ddim_invert(inst.z0, s, gm, Conditioning::null());
        CHECK(recon_error(inst.z0, reconstruct(rep.z_T, s, gm, Conditioning::null())) > 0.0);
    }
}

TEST_CASE("picard iteration on the affine oracle") {
    const auto s = make_linear_schedule(50);
    const auto gm = affine_oracle(5, s);
    std::mt19937_64 rng(12);
    const Latent z0 = random_latent(rng, 5);
    const auto rep = picard_invert(z0, s, gm, Conditioning::null(), 50, 1e-14);
    Latent z = z0;
    for (int t = 1; t <= 50; ++t) z = affine_fixed_point(z, s, t);
    CHECK(max_abs_diff(rep.z_T, z) <= 1e-6);
    for (const auto& st : rep.steps) {
        for (std::size_t i = 1; i < st.l_fix.size(); ++i) CHECK(st.l_fix[i] <= st.l_fix[i - 1]);
    }

    const auto one = picard_invert(z0, s, gm, Conditioning::null(), 1, 1e-14);
    Latent manual = z0;
    for (int t = 1; t <= 50; ++t) {
        const Latent naive = ddim_invert_step_naive(manual, gm.predict(manual, t - 1, Conditioning::null()), s, t);
        manual = ddim_invert_step_naive(manual, gm.predict(naive, t, Conditioning::null()), s, t);
    }
    CHECK(max_abs_diff(one.z_T, manual) <= 1e-12);
}

TEST_CASE("reconstruct edge cases and linearity") {
    const auto s = make_linear_schedule(50);
    const auto gm = affine_oracle(4, s);
    std::mt19937_64 rng(13);
    const Latent z = random_latent(rng, 4);
    CHECK(reconstruct(z, s, gm, Conditioning::null(), 1.0, 0) == z);
    CHECK_THROWS_AS(reconstruct(z, s, gm, Conditioning::null(), 1.0, 51), IndexError);
    for (int trial = 0; trial < 10; ++trial) {
        const Latent a = random_latent(rng, 4), b = random_latent(rng, 4);
        const double x = 0.3 + trial, y = -1.2;
        const Latent lhs = reconstruct(combine(x, a, y, b), s, gm, Conditioning::null());
        const Latent rhs = combine(x, reconstruct(a, s, gm, Conditioning::null()), y,
                                   reconstruct(b, s, gm, Conditioning::null()));
        CHECK(max_abs_diff(lhs, rhs) <= 1e-9);
    }
}

TEST_CASE("mismatched schedule and denoiser are rejected") {
    const auto gm = affine_oracle(2, make_linear_schedule(10));
    const auto s = make_linear_schedule(20);
    CHECK_THROWS_AS(ddim_invert(Latent::flat({1.0, 2.0}), s, gm, Conditioning::null()), ContractError);
    CHECK_THROWS_AS(reconstruct(Latent::flat({1.0, 2.0}), s, gm, Conditioning::null()), ContractError);
}

TEST_CASE("exploding denoiser surfaces an inversion error with context") {
    const auto s = make_linear_schedule(10);
    // Huge weights overflow tanh-free output layers quickly.
    auto net = MlpDenoiser::initialize(Shape::flat(2), 0, {}, 10, 1);
    std::vector<double> p(net.parameters().size(), 1e300);
    const MlpDenoiser big(net.latent_shape(), 0, net.layer_sizes(), p, 10);
    try {
        ddim_invert(Latent::flat({1e10, 1e10}), s, big, Conditioning::null());
        FAIL("expected InversionError");
    } catch (const InversionError& e) {
        CHECK(e.timestep() >= 1);
    }
    const ReferenceNoise ref{Latent::flat({0.0, 0.0}), ReferenceMode::Oracle};
    try {
        dci_invert(Latent::flat({1e10, 1e10}), s, big, Conditioning::null(), InversionConfig{}, ref);
        FAIL("expected InversionError");
    } catch (const InversionError& e) {
        CHECK(e.timestep() == 1);
        CHECK(e.round() == 1);
    }
}

TEST_CASE("condition-swap editing") {
    const auto s = make_linear_schedule(50);
    const GaussianMixture gm({0.5, 0.5}, {Latent::flat({2.0, 0.0}), Latent::flat({-2.0, 0.0})}, 0.3, {0, 1}, s);
    std::mt19937_64 rng(14);
    const Synth inst = synthesize(gm, s, Conditioning::class_label(0), rng, 2);
    const auto src = Conditioning::class_label(0);
    InversionConfig cfg;
    const auto same = edit_condition_swap(inst.z0, s, gm, src, src, cfg, inst.ref);
    const auto plain = dci_invert(inst.z0, s, gm, src, cfg, inst.ref);
    CHECK(same.edited == reconstruct(plain.z_T, s, gm, src));
    for (double lambda : {0.0, 2.0}) {
        cfg.lambda = lambda;
        const auto r = edit_condition_swap(inst.z0, s, gm, src, Conditioning::class_label(1), cfg, inst.ref);
        CHECK(r.edited.all_finite());
        CHECK(r.report.steps.size() == 50);
    }
}

} // TEST_SUITE
