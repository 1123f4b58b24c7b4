// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "invlab/autodiff.hpp"
#include "invlab/errors.hpp"
#include "support.hpp"

using namespace invlab;
using namespace invlab::ad;
using invlab::testing::max_rel_err;

namespace {

std::vector<double> normals(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

// Two-layer tanh network with a scalar head, recorded on `tape`.
Var two_layer(Tape& tape, Var x, Var w1, Var b1, Var w2, std::size_t in, std::size_t hidden) {
    Var h = tape.tanh(tape.add(tape.matvec(w1, x, hidden, in), b1));
    return tape.sum(tape.matvec(w2, h, 1, hidden));
}

double two_layer_value(std::span<const double> x, const std::vector<double>& w1, const std::vector<double>& b1,
                       const std::vector<double>& w2, std::size_t in, std::size_t hidden) {
    double out = 0.0;
    for (std::size_t r = 0; r < hidden; ++r) {
        double a = b1[r];
        for (std::size_t c = 0; c < in; ++c) a += w1[r * in + c] * x[c];
        out += w2[r] * std::tanh(a);
    }
    return out;
}

} // namespace

TEST_SUITE("autodiff") {

TEST_CASE("sum of squares and norm examples") {
    Tape t;
    Var x = t.leaf({1.0, 2.0});
    auto g = t.grad(t.sum_squares(x));
    CHECK(g.at(x) == std::vector<double>{2.0, 4.0});

    Tape t2;
    Var y = t2.leaf({3.0, 4.0});
    Var n = t2.norm2(y);
    CHECK(t2.scalar(n) == doctest::Approx(5.0));
    auto g2 = t2.grad(n);
    CHECK(g2.at(y)[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(g2.at(y)[1] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("norm gradient is zero at the origin guard") {
    Tape t;
    Var x = t.leaf({0.0, 0.0, 0.0});
    auto g = t.grad(t.norm2(x));
    CHECK(g.at(x) == std::vector<double>{0.0, 0.0, 0.0});
    Tape t2;
    Var y = t2.leaf({1e-13, 0.0});
    CHECK(t2.grad(t2.norm2(y)).at(y) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("property: sum-of-squares gradient is exactly 2x") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto v = normals(rng, 7, 3.0);
        Tape t;
        Var x = t.leaf(v);
        const auto g = t.grad(t.sum_squares(x)).at(x);
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(g[i] == 2.0 * v[i]);
    }
}

TEST_CASE("non-scalar output is a contract error") {
    Tape t;
    Var x = t.leaf({1.0, 2.0});
    CHECK_THROWS_AS(t.grad(t.tanh(x)), ContractError);
    CHECK_THROWS_AS(t.scalar(x), ContractError);
}

TEST_CASE("non-finite values are rejected") {
    Tape t;
    CHECK_THROWS_AS(t.leaf({1.0, NAN}), NumericError);
    Var x = t.leaf({-1.0});
    CHECK_THROWS_AS(t.sqrt(x), NumericError);
}

TEST_CASE("finite_diff_grad examples") {
    const std::vector<double> x = {3.0};
    const auto g = finite_diff_grad([](std::span<const double> v) { return v[0] * v[0]; }, x, 1e-5);
    CHECK(std::abs(g[0] - 6.0) <= 1e-6);
    const std::vector<double> y = {0.3, -1.0, 2.0};
    for (double d : finite_diff_grad([](std::span<const double>) { return 4.2; }, y)) CHECK(std::abs(d) <= 1e-9);
    CHECK_THROWS_AS(finite_diff_grad([](std::span<const double> v) { return std::log(v[0]); }, std::vector<double>{0.0}),
                    NumericError);
}

TEST_CASE("each primitive matches central differences") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 25; ++trial) {
        const auto a0 = normals(rng, 4);
        const auto b0 = normals(rng, 4);
        const auto w0 = normals(rng, 12);
        auto build = [&](Tape& t, Var a) {
            Var b = t.constant(b0);
            Var w = t.constant(w0);
            Var s = t.add(t.mul(a, b), t.scale(t.sub(a, b), 0.7));
            Var m = t.matvec(w, t.tanh(s), 3, 4);
            Var q = t.sqrt(t.add_scalar(t.mul(a, a), 1.0));
            Var cat = t.concat(std::vector<Var>{m, t.slice(q, 1, 2)});
            Var out = t.add(t.dot(cat, cat), t.norm2(t.sub(a, b)));
            return t.add(out, t.scale(t.sum(q), 0.1));
        };
        Tape tape;
        Var a = tape.leaf(a0);
        const auto g = tape.grad(build(tape, a)).at(a);
        const auto fd = finite_diff_grad(
            [&](std::span<const double> v) {
                Tape t;
                Var x = t.leaf(std::vector<double>(v.begin(), v.end()), false);
                return t.scalar(build(t, x));
            },
            a0);
        CHECK(max_rel_err(g, fd) <= 1e-4);
    }
}

TEST_CASE("random two-layer tanh networks match central differences") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<std::size_t> size(2, 6);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t in = size(rng), hidden = size(rng);
        const auto x0 = normals(rng, in);
        const auto w1 = normals(rng, hidden * in, 0.8);
        const auto b1 = normals(rng, hidden, 0.3);
        const auto w2 = normals(rng, hidden);
        Tape t;
        Var x = t.leaf(x0);
        Var w = t.leaf(w1);
        Var b = t.leaf(b1);
        Var v = t.leaf(w2);
        Var out = two_layer(t, x, w, b, v, in, hidden);
        CHECK(t.scalar(out) == doctest::Approx(two_layer_value(x0, w1, b1, w2, in, hidden)).epsilon(1e-12));
        const auto g = t.grad(out);
        const auto fd =
            finite_diff_grad([&](std::span<const double> v) { return two_layer_value(v, w1, b1, w2, in, hidden); }, x0);
        CHECK(max_rel_err(g.at(x), fd) <= 1e-4);
        const auto fdw = finite_diff_grad(
            [&](std::span<const double> v) {
                return two_layer_value(x0, std::vector<double>(v.begin(), v.end()), b1, w2, in, hidden);
            },
            w1);
        CHECK(max_rel_err(g.at(w), fdw) <= 1e-4);
    }
}

TEST_CASE("property: backward pass is linear in the output") {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const auto v = normals(rng, 5);
        const double a = 1.5, b = -0.25;
        Tape t;
        Var x = t.leaf(v);
        Var f = t.sum(t.tanh(x));
        Var g = t.norm2(t.mul(x, x));
        const auto gf = t.grad(f).at(x);
        const auto gg = t.grad(g).at(x);
        const auto gc = t.grad(t.add(t.scale(f, a), t.scale(g, b))).at(x);
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(gc[i] == doctest::Approx(a * gf[i] + b * gg[i]).epsilon(1e-14));
    }
}

TEST_CASE("only leaves that require gradients are reported") {
    Tape t;
    Var x = t.leaf({1.0});
    Var c = t.constant({2.0});
    auto g = t.grad(t.sum(t.mul(x, c)));
    CHECK(g.count(x) == 1);
    CHECK(g.count(c) == 0);
    CHECK(g.at(x)[0] == 2.0);
}

} // TEST_SUITE
