// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace invlab {

// Dimension descriptor of a latent: {n} for flat toy vectors, {height, width}
// for single-channel toy images.
struct Shape {
    std::vector<std::size_t> dims;

    static Shape flat(std::size_t n) { return Shape{{n}}; }
    static Shape image(std::size_t height, std::size_t width) { return Shape{{height, width}}; }

    std::size_t size() const;
    bool is_image() const { return dims.size() == 2; }
    std::size_t height() const { return is_image() ? dims[0] : 1; }
    std::size_t width() const { return is_image() ? dims[1] : dims.at(0); }
    std::string to_string() const;

    friend bool operator==(const Shape&, const Shape&) = default;
};

// A real-valued latent z_t of any timestep.
class Latent {
public:
    Latent() = default;
    explicit Latent(Shape shape);                       // zero-filled
    Latent(Shape shape, std::vector<double> values);    // validates length and finiteness
    static Latent flat(std::vector<double> values);

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return values_.size(); }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    const std::vector<double>& data() const { return values_; }

    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    bool all_finite() const;

    friend bool operator==(const Latent&, const Latent&) = default;

private:
    Shape shape_;
    std::vector<double> values_;
};

// Throws ShapeError naming `what` when the shapes differ.
void require_same_shape(const Latent& a, const Latent& b, const char* what);

// a*x + b*y, shapes must match.
Latent combine(double a, const Latent& x, double b, const Latent& y);
Latent scaled(double a, const Latent& x);
Latent operator+(const Latent& x, const Latent& y);
Latent operator-(const Latent& x, const Latent& y);

double dot(const Latent& x, const Latent& y);
double norm2(const Latent& x);
double max_abs_diff(const Latent& x, const Latent& y);

} // namespace invlab
