// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "invlab/autodiff.hpp"

#include <cmath>
#include <string>

#include "invlab/errors.hpp"

namespace invlab::ad {

namespace {

void require_finite(const std::vector<double>& v, const char* op) {
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericError(std::string("tape: non-finite value in ") + op);
    }
}

// Broadcasting helper: length-1 operands act as scalars.
double at_bcast(const std::vector<double>& v, std::size_t i) { return v.size() == 1 ? v[0] : v[i]; }

std::size_t bcast_size(const std::vector<double>& a, const std::vector<double>& b, const char* op) {
    if (a.size() == b.size()) return a.size();
    if (a.size() == 1) return b.size();
    if (b.size() == 1) return a.size();
    throw ShapeError(std::string("tape: length mismatch in ") + op);
}

// Accumulate `g` (length n) into the adjoint of an operand of length m (m == n or 1).
void accumulate(std::vector<double>& adj, const std::vector<double>& g) {
    if (adj.size() == g.size()) {
        for (std::size_t i = 0; i < g.size(); ++i) adj[i] += g[i];
    } else {
        double s = 0.0;
        for (double x : g) s += x;
        adj[0] += s;
    }
}

} // namespace

Var Tape::push(Node node) {
    for (std::size_t in : node.inputs) {
        if (in >= nodes_.size()) throw ContractError("tape: input node does not precede its consumer");
    }
    require_finite(node.value, "node");
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
}

Var Tape::leaf(std::vector<double> values, bool requires_grad) {
    Node n{Op::Leaf, {}, std::move(values)};
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    const auto& x = at(a).value;
    const auto& y = at(b).value;
    std::vector<double> out(bcast_size(x, y, "add"));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = at_bcast(x, i) + at_bcast(y, i);
    return push(Node{Op::Add, {a.id, b.id}, std::move(out)});
}

Var Tape::sub(Var a, Var b) {
    const auto& x = at(a).value;
    const auto& y = at(b).value;
    std::vector<double> out(bcast_size(x, y, "sub"));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = at_bcast(x, i) - at_bcast(y, i);
    return push(Node{Op::Sub, {a.id, b.id}, std::move(out)});
}

Var Tape::mul(Var a, Var b) {
    const auto& x = at(a).value;
    const auto& y = at(b).value;
    std::vector<double> out(bcast_size(x, y, "mul"));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = at_bcast(x, i) * at_bcast(y, i);
    return push(Node{Op::Mul, {a.id, b.id}, std::move(out)});
}

Var Tape::scale(Var a, double k) {
    std::vector<double> out = at(a).value;
    for (double& v : out) v *= k;
    Node n{Op::Scale, {a.id}, std::move(out)};
    n.k = k;
    return push(std::move(n));
}

Var Tape::add_scalar(Var a, double k) {
    std::vector<double> out = at(a).value;
    for (double& v : out) v += k;
    return push(Node{Op::AddScalar, {a.id}, std::move(out)});
}

Var Tape::matvec(Var w, Var x, std::size_t rows, std::size_t cols) {
    const auto& wv = at(w).value;
    const auto& xv = at(x).value;
    if (wv.size() != rows * cols || xv.size() != cols) throw ShapeError("tape: matvec dimension mismatch");
    std::vector<double> out(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = wv.data() + r * cols;
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) s += row[c] * xv[c];
        out[r] = s;
    }
    Node n{Op::MatVec, {w.id, x.id}, std::move(out)};
    n.rows = rows;
    n.cols = cols;
    return push(std::move(n));
}

Var Tape::tanh(Var a) {
    std::vector<double> out = at(a).value;
    for (double& v : out) v = std::tanh(v);
    return push(Node{Op::Tanh, {a.id}, std::move(out)});
}

Var Tape::sqrt(Var a) {
    std::vector<double> out = at(a).value;
    for (double& v : out) {
        if (v < 0.0) throw NumericError("tape: sqrt of negative value");
        v = std::sqrt(v);
    }
    return push(Node{Op::Sqrt, {a.id}, std::move(out)});
}

Var Tape::sum(Var a) {
    double s = 0.0;
    for (double v : at(a).value) s += v;
    return push(Node{Op::Sum, {a.id}, {s}});
}

Var Tape::sum_squares(Var a) {
    double s = 0.0;
    for (double v : at(a).value) s += v * v;
    return push(Node{Op::SumSquares, {a.id}, {s}});
}

Var Tape::dot(Var a, Var b) {
    const auto& x = at(a).value;
    const auto& y = at(b).value;
    if (x.size() != y.size()) throw ShapeError("tape: dot length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return push(Node{Op::Dot, {a.id, b.id}, {s}});
}

Var Tape::norm2(Var a) {
    double s = 0.0;
    for (double v : at(a).value) s += v * v;
    return push(Node{Op::Norm2, {a.id}, {std::sqrt(s)}});
}

Var Tape::concat(std::span<const Var> parts) {
    Node n{Op::Concat, {}, {}};
    for (Var p : parts) {
        n.inputs.push_back(p.id);
        const auto& v = at(p).value;
        n.value.insert(n.value.end(), v.begin(), v.end());
    }
    return push(std::move(n));
}

Var Tape::slice(Var a, std::size_t offset, std::size_t length) {
    const auto& v = at(a).value;
    if (offset + length > v.size()) throw ShapeError("tape: slice out of range");
    Node n{Op::Slice, {a.id}, std::vector<double>(v.begin() + offset, v.begin() + offset + length)};
    n.rows = offset;
    return push(std::move(n));
}

double Tape::scalar(Var v) const {
    const auto& val = at(v).value;
    if (val.size() != 1) throw ContractError("tape: node is not a scalar");
    return val[0];
}

Gradients Tape::grad(Var output) const {
    if (output.id >= nodes_.size()) throw ContractError("tape: unknown output node");
    if (at(output).value.size() != 1) throw ContractError("tape: grad requires a scalar output");

    std::vector<std::vector<double>> adj(output.id + 1);
    adj[output.id] = {1.0};
    auto adjoint = [&](std::size_t id) -> std::vector<double>& {
        if (adj[id].empty()) adj[id].assign(nodes_[id].value.size(), 0.0);
        return adj[id];
    };

    for (std::size_t id = output.id + 1; id-- > 0;) {
        if (adj[id].empty()) continue;
        const Node& n = nodes_[id];
        const std::vector<double> g = adj[id];
        switch (n.op) {
        case Op::Leaf:
            break;
        case Op::Add:
            accumulate(adjoint(n.inputs[0]), g);
            accumulate(adjoint(n.inputs[1]), g);
            break;
        case Op::Sub: {
            accumulate(adjoint(n.inputs[0]), g);
            std::vector<double> neg = g;
            for (double& v : neg) v = -v;
            accumulate(adjoint(n.inputs[1]), neg);
            break;
        }
        case Op::Mul: {
            const auto& x = nodes_[n.inputs[0]].value;
            const auto& y = nodes_[n.inputs[1]].value;
            std::vector<double> gx(g.size()), gy(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) {
                gx[i] = g[i] * at_bcast(y, i);
                gy[i] = g[i] * at_bcast(x, i);
            }
            accumulate(adjoint(n.inputs[0]), gx);
            accumulate(adjoint(n.inputs[1]), gy);
            break;
        }
        case Op::Scale: {
            auto& a = adjoint(n.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) a[i] += n.k * g[i];
            break;
        }
        case Op::AddScalar:
            accumulate(adjoint(n.inputs[0]), g);
            break;
        case Op::MatVec: {
            const auto& w = nodes_[n.inputs[0]].value;
            const auto& x = nodes_[n.inputs[1]].value;
            auto& aw = adjoint(n.inputs[0]);
            auto& ax = adjoint(n.inputs[1]);
            for (std::size_t r = 0; r < n.rows; ++r) {
                const double gr = g[r];
                const double* row = w.data() + r * n.cols;
                double* arow = aw.data() + r * n.cols;
                for (std::size_t c = 0; c < n.cols; ++c) {
                    arow[c] += gr * x[c];
                    ax[c] += gr * row[c];
                }
            }
            break;
        }
        case Op::Tanh: {
            auto& a = adjoint(n.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) a[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
            break;
        }
        case Op::Sqrt: {
            auto& a = adjoint(n.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (n.value[i] <= 0.0) throw NumericError("tape: sqrt gradient at zero");
                a[i] += g[i] * 0.5 / n.value[i];
            }
            break;
        }
        case Op::Sum: {
            auto& a = adjoint(n.inputs[0]);
            for (double& v : a) v += g[0];
            break;
        }
        case Op::SumSquares: {
            const auto& x = nodes_[n.inputs[0]].value;
            auto& a = adjoint(n.inputs[0]);
            for (std::size_t i = 0; i < x.size(); ++i) a[i] += 2.0 * x[i] * g[0];
            break;
        }
        case Op::Dot: {
            const auto& x = nodes_[n.inputs[0]].value;
            const auto& y = nodes_[n.inputs[1]].value;
            auto& ax = adjoint(n.inputs[0]);
            for (std::size_t i = 0; i < x.size(); ++i) ax[i] += g[0] * y[i];
            auto& ay = adjoint(n.inputs[1]);
            for (std::size_t i = 0; i < x.size(); ++i) ay[i] += g[0] * x[i];
            break;
        }
        case Op::Norm2: {
            const double r = n.value[0];
            if (r <= kNormGuard) break;
            const auto& x = nodes_[n.inputs[0]].value;
            auto& a = adjoint(n.inputs[0]);
            for (std::size_t i = 0; i < x.size(); ++i) a[i] += g[0] * x[i] / r;
            break;
        }
        case Op::Slice: {
            auto& a = adjoint(n.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) a[n.rows + i] += g[i];
            break;
        }
        case Op::Concat: {
            std::size_t off = 0;
            for (std::size_t in : n.inputs) {
                auto& a = adjoint(in);
                for (std::size_t i = 0; i < a.size(); ++i) a[i] += g[off + i];
                off += a.size();
            }
            break;
        }
        }
    }

    Gradients out;
    for (std::size_t id = 0; id <= output.id; ++id) {
        const Node& n = nodes_[id];
        if (n.op != Op::Leaf || !n.requires_grad) continue;
        out[Var{id}] = adj[id].empty() ? std::vector<double>(n.value.size(), 0.0) : adj[id];
    }
    return out;
}

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double step) {
    if (!(step > 0.0)) throw ParameterError("finite_diff_grad: step must be positive");
    std::vector<double> probe(x.begin(), x.end());
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = probe[i];
        probe[i] = xi + step;
        const double fp = f(probe);
        probe[i] = xi - step;
        const double fm = f(probe);
        probe[i] = xi;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("finite_diff_grad: non-finite evaluation at coordinate " + std::to_string(i));
        }
        g[i] = (fp - fm) / (2.0 * step);
    }
    return g;
}

} // namespace invlab::ad
