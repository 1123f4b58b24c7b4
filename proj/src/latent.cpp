// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "invlab/latent.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "invlab/errors.hpp"

namespace invlab {

std::size_t Shape::size() const {
    if (dims.empty()) return 0;
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string Shape::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) out += 'x';
        out += std::to_string(dims[i]);
    }
    return out;
}

Latent::Latent(Shape shape) : shape_(std::move(shape)), values_(shape_.size(), 0.0) {}

Latent::Latent(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_.size()) {
        throw ShapeError("latent length " + std::to_string(values_.size()) +
                         " does not match shape " + shape_.to_string());
    }
    if (!all_finite()) throw NumericError("latent contains non-finite values");
}

Latent Latent::flat(std::vector<double> values) {
    auto n = values.size();
    return Latent(Shape::flat(n), std::move(values));
}

bool Latent::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void require_same_shape(const Latent& a, const Latent& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape().to_string() + " vs " +
                         b.shape().to_string());
    }
}

Latent combine(double a, const Latent& x, double b, const Latent& y) {
    require_same_shape(x, y, "combine");
    Latent out(x.shape());
    auto o = out.values();
    auto xs = x.values();
    auto ys = y.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = a * xs[i] + b * ys[i];
    return out;
}

Latent scaled(double a, const Latent& x) {
    Latent out = x;
    for (double& v : out.values()) v *= a;
    return out;
}

Latent operator+(const Latent& x, const Latent& y) { return combine(1.0, x, 1.0, y); }
Latent operator-(const Latent& x, const Latent& y) { return combine(1.0, x, -1.0, y); }

double dot(const Latent& x, const Latent& y) {
    require_same_shape(x, y, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double norm2(const Latent& x) {
    double s = 0.0;
    for (double v : x.values()) s += v * v;
    return std::sqrt(s);
}

double max_abs_diff(const Latent& x, const Latent& y) {
    require_same_shape(x, y, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
    return m;
}

} // namespace invlab
