// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <vector>

namespace invlab::ad {

// Handle to a node on a Tape.
struct Var {
    std::size_t id;
    friend auto operator<=>(const Var&, const Var&) = default;
};

// Gradients of a scalar output with respect to every leaf created with
// requires_grad = true.
using Gradients = std::map<Var, std::vector<double>>;

// Minimal reverse-mode engine over vector-valued nodes. Nodes are appended in
// evaluation order, so the node list is always topologically sorted.
//
// Scalars are nodes of length 1; `scale`/`add` accept a length-1 operand and
// broadcast it.
class Tape {
public:
    Var leaf(std::vector<double> values, bool requires_grad = true);
    Var constant(std::vector<double> values) { return leaf(std::move(values), false); }

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);                    // elementwise
    Var scale(Var a, double k);
    Var add_scalar(Var a, double k);
    Var matvec(Var w, Var x, std::size_t rows, std::size_t cols); // w row-major rows x cols
    Var tanh(Var a);
    Var sqrt(Var a);                          // elementwise
    Var sum(Var a);                           // scalar
    Var sum_squares(Var a);                   // scalar
    Var dot(Var a, Var b);                    // scalar
    Var norm2(Var a);                         // scalar, zero gradient when ||a|| <= kNormGuard
    Var concat(std::span<const Var> parts);
    Var slice(Var a, std::size_t offset, std::size_t length);

    const std::vector<double>& value(Var v) const { return nodes_.at(v.id).value; }
    double scalar(Var v) const;
    std::size_t size() const { return nodes_.size(); }

    // One backward sweep from a scalar output. Throws ContractError otherwise.
    Gradients grad(Var output) const;

    static constexpr double kNormGuard = 1e-12;

private:
    enum class Op { Leaf, Add, Sub, Mul, Scale, AddScalar, MatVec, Tanh, Sqrt, Sum, SumSquares, Dot, Norm2, Concat, Slice };

    struct Node {
        Op op;
        std::vector<std::size_t> inputs;
        std::vector<double> value;
        double k = 0.0;            // Scale factor
        std::size_t rows = 0;      // MatVec; Slice offset
        std::size_t cols = 0;
        bool requires_grad = false;
    };

    Var push(Node node);
    const Node& at(Var v) const { return nodes_.at(v.id); }

    std::vector<Node> nodes_;
};

// Central-difference gradient of f at x. Throws NumericError when f is not
// finite at any probe.
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double step = 1e-5);

} // namespace invlab::ad
