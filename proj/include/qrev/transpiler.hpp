// Copyright 2026 The qrev Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file
 * Lowering to the {id, x, sx, rz, cnot} basis on a coupling map.
 *
 * Pipeline: SWAP translation -> greedy routing -> per-wire fusion of
 * single-qubit runs into RZ.SX.RZ.SX.RZ -> (level 1) peephole shortening.
 * The global phase of every rewrite is accumulated in the circuit, so the
 * output unitary equals the input unitary exactly (after undoing the layout),
 * not merely up to phase.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <utility>
#include <vector>

#include "qrev/circuit.hpp"
#include "qrev/error.hpp"
#include "qrev/simulator.hpp"

namespace qrev {

/// Undirected physical connectivity.
class CouplingMap {
  public:
    CouplingMap() = default;
    CouplingMap(std::size_t n_physical, std::vector<std::pair<std::size_t, std::size_t>> edges)
        : n_physical_(n_physical) {
        for (auto [a, b] : edges) {
            if (a >= n_physical || b >= n_physical || a == b) {
                throw DimensionError("coupling edge (" + std::to_string(a) + "," + std::to_string(b) +
                                     ") is invalid");
            }
            edges_.emplace_back(std::min(a, b), std::max(a, b));
        }
        std::sort(edges_.begin(), edges_.end());
        edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    }

    /// Path graph 0 - 1 - ... - (n-1).
    static CouplingMap linear(std::size_t n) {
        std::vector<std::pair<std::size_t, std::size_t>> e;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            e.emplace_back(i, i + 1);
        }
        return CouplingMap(n, std::move(e));
    }

    std::size_t n_physical() const noexcept {
        return n_physical_;
    }
    const std::vector<std::pair<std::size_t, std::size_t>> &edges() const noexcept {
        return edges_;
    }
    bool coupled(std::size_t a, std::size_t b) const {
        auto key = std::make_pair(std::min(a, b), std::max(a, b));
        return std::binary_search(edges_.begin(), edges_.end(), key);
    }

    /// BFS shortest path a -> b inclusive; empty if unreachable.
    std::vector<std::size_t> shortest_path(std::size_t a, std::size_t b) const {
        std::vector<std::size_t> prev(n_physical_, n_physical_);
        std::deque<std::size_t> queue{a};
        prev[a] = a;
        while (!queue.empty()) {
            std::size_t u = queue.front();
            queue.pop_front();
            if (u == b) {
                break;
            }
            for (auto [x, y] : edges_) {
                std::size_t v = x == u ? y : (y == u ? x : n_physical_);
                if (v < n_physical_ && prev[v] == n_physical_) {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if (prev[b] == n_physical_) {
            return {};
        }
        std::vector<std::size_t> path{b};
        while (path.back() != a) {
            path.push_back(prev[path.back()]);
        }
        std::reverse(path.begin(), path.end());
        return path;
    }

    bool connected() const {
        for (std::size_t q = 1; q < n_physical_; ++q) {
            if (shortest_path(0, q).empty()) {
                return false;
            }
        }
        return true;
    }

    bool operator==(const CouplingMap &) const = default;

  private:
    std::size_t n_physical_ = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges_;
};

struct TranspileOptions {
    int optimization_level = 1;
    /// Unset means a linear map as wide as the circuit.
    std::optional<CouplingMap> coupling;
    double zero_tol = 1e-9;

    CouplingMap coupling_for(std::size_t n_qubits) const {
        return coupling ? *coupling : CouplingMap::linear(n_qubits);
    }
    bool operator==(const TranspileOptions &) const = default;
};

struct TranspileResult {
    Circuit circuit;
    /// Initial logical -> physical assignment (always trivial here).
    std::vector<std::size_t> layout;
    /// Logical -> physical after routing SWAPs.
    std::vector<std::size_t> final_layout;
};

/// U = e^{i phase} RZ(a) SX RZ(b) SX RZ(c); execution order is c, b, a.
struct ZsxAngles {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double phase = 0.0;
};

inline Mat2 recompose(const ZsxAngles &z) {
    Mat2 sx = sx_matrix();
    return scaled(rz_matrix(z.a) * sx * rz_matrix(z.b) * sx * rz_matrix(z.c), std::polar(1.0, z.phase));
}

/// ZSX synthesis of a 2x2 unitary.
///
/// ZYZ angles are taken on a fixed branch (theta in [0, pi], phi and lambda in
/// (-pi, pi]) and converted with RY(theta) ~ SX RZ(theta + pi) SX RZ(pi) up
/// to phase, so the map from unitaries (mod phase) to angle triples is a
/// function. The phase is read off tr(V^dagger U) afterwards.
inline ZsxAngles decompose_1q(const Mat2 &u) {
    Mat2 check = adjoint(u) * u;
    if (max_abs_diff(check, kIdentity2) > 1e-9) {
        throw DimensionError("decompose_1q: matrix is not unitary");
    }
    Complex det = u[0] * u[3] - u[1] * u[2];
    Complex inv_root = 1.0 / std::sqrt(det);
    Mat2 v = scaled(u, inv_root);
    double theta = 2.0 * std::atan2(std::abs(v[2]), std::abs(v[0]));
    double sum_half = std::arg(v[3]);
    double diff_half = std::arg(v[2]);
    double phi = normalize_angle(sum_half + diff_half);
    double lam = normalize_angle(sum_half - diff_half);
    ZsxAngles z;
    z.a = normalize_angle(phi + kPi);
    z.b = normalize_angle(theta + kPi);
    z.c = lam;
    Complex tr{0, 0};
    Mat2 w = recompose(z);
    for (std::size_t i = 0; i < 4; ++i) {
        tr += std::conj(w[i]) * u[i];
    }
    z.phase = normalize_angle(std::arg(tr));
    return z;
}

namespace detail {

/// Mutable gate list used by the rewrite passes.
struct GateBuffer {
    std::size_t n_qubits;
    std::vector<Gate> gates;
    double phase;

    explicit GateBuffer(const Circuit &c) : n_qubits(c.n_qubits()), gates(c.gates()), phase(c.global_phase()) {
    }
    GateBuffer(std::size_t n, double ph) : n_qubits(n), phase(ph) {
    }
    Circuit to_circuit() const {
        Circuit out(n_qubits, phase);
        for (const Gate &g : gates) {
            out.add(g);
        }
        return out;
    }
};

inline void check_bound(const Circuit &c) {
    if (c.has_unbound()) {
        throw BindError("circuit has unbound parameters");
    }
}

/// Emits the synthesis of `u` on wire q. `shorten` selects the level-1 form.
inline void emit_1q(GateBuffer &out, std::size_t q, const Mat2 &u, bool shorten, double zero_tol) {
    if (shorten && std::abs(u[2]) <= zero_tol && std::abs(u[1]) <= zero_tol) {
        double t = normalize_angle(std::arg(u[3]) - std::arg(u[0]));
        out.gates.push_back(Gate::rz(q, t));
        out.phase = normalize_angle(out.phase + std::arg(u[0]) + t / 2.0);
        return;
    }
    ZsxAngles z = decompose_1q(u);
    out.gates.push_back(Gate::rz(q, z.c));
    out.gates.push_back(Gate::sx(q));
    out.gates.push_back(Gate::rz(q, z.b));
    out.gates.push_back(Gate::sx(q));
    out.gates.push_back(Gate::rz(q, z.a));
    out.phase = normalize_angle(out.phase + z.phase);
}

}  // namespace detail

/// Fuses every maximal single-qubit run on each wire into one synthesized
/// pattern. A run is flushed just before the next two-qubit gate touching its
/// wire; trailing runs are flushed in wire order.
inline Circuit fuse_1q_runs(const Circuit &c, double zero_tol, bool shorten) {
    detail::check_bound(c);
    detail::GateBuffer out(c.n_qubits(), c.global_phase());
    std::vector<std::vector<Gate>> pending(c.n_qubits());
    auto flush = [&](std::size_t q) {
        if (pending[q].empty()) {
            return;
        }
        detail::emit_1q(out, q, product_1q(pending[q]), shorten, zero_tol);
        pending[q].clear();
    };
    for (const Gate &g : c.gates()) {
        if (g.arity() == 1) {
            pending[g.qubits[0]].push_back(g);
            continue;
        }
        flush(g.qubits[0]);
        flush(g.qubits[1]);
        out.gates.push_back(g);
    }
    for (std::size_t q = 0; q < c.n_qubits(); ++q) {
        flush(q);
    }
    return out.to_circuit();
}

/// Merges RZs that are adjacent on a wire. Angle sums that leave (-pi, pi]
/// move the resulting sign into the global phase.
inline Circuit merge_rz(const Circuit &c) {
    detail::check_bound(c);
    detail::GateBuffer out(c.n_qubits(), c.global_phase());
    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::vector<std::size_t> last(c.n_qubits(), kNone);
    for (const Gate &g : c.gates()) {
        if (g.kind == GateKind::RZ) {
            std::size_t q = g.qubits[0];
            if (last[q] != kNone && out.gates[last[q]].kind == GateKind::RZ) {
                Gate &prev = out.gates[last[q]];
                double sum = prev.angle + g.angle;
                double n = normalize_angle(sum);
                if (std::fmod(std::abs(std::round((sum - n) / kTwoPi)), 2.0) == 1.0) {
                    out.phase = normalize_angle(out.phase + kPi);
                }
                prev.angle = n;
                continue;
            }
        }
        out.gates.push_back(g);
        for (std::size_t q : g.wires()) {
            last[q] = out.gates.size() - 1;
        }
    }
    return out.to_circuit();
}

/// Removes ID gates and rotations whose angle is within zero_tol of 0.
inline Circuit drop_identity(const Circuit &c, double zero_tol) {
    detail::check_bound(c);
    detail::GateBuffer out(c.n_qubits(), c.global_phase());
    for (const Gate &g : c.gates()) {
        if (g.kind == GateKind::ID) {
            continue;
        }
        if (is_rotation(g.kind) && std::abs(g.angle) <= zero_tol) {
            continue;
        }
        out.gates.push_back(g);
    }
    return out.to_circuit();
}

/// merge_rz and drop_identity to a fixpoint.
inline Circuit optimize_1q(const Circuit &c, double zero_tol) {
    Circuit cur = c;
    while (true) {
        Circuit next = drop_identity(merge_rz(cur), zero_tol);
        if (next == cur) {
            return next;
        }
        cur = std::move(next);
    }
}

/// Replaces each SWAP(a, b) by CNOT(a,b) CNOT(b,a) CNOT(a,b).
inline Circuit expand_swaps(const Circuit &c) {
    Circuit out(c.n_qubits(), c.global_phase());
    for (const Gate &g : c.gates()) {
        if (g.kind == GateKind::SWAP) {
            auto [a, b] = g.qubits;
            out.add(Gate::cnot(a, b)).add(Gate::cnot(b, a)).add(Gate::cnot(a, b));
        } else {
            out.add(g);
        }
    }
    return out;
}

struct RoutedCircuit {
    Circuit circuit;
    /// Logical -> physical after all inserted SWAPs.
    std::vector<std::size_t> final_layout;
};

/// Greedy nearest-neighbour routing: for every uncoupled CNOT, the control is
/// swapped one step at a time along a shortest path towards the target.
inline RoutedCircuit route(const Circuit &c, const CouplingMap &coupling) {
    if (c.n_qubits() > coupling.n_physical()) {
        throw TranspileError("circuit needs " + std::to_string(c.n_qubits()) + " qubits, coupling map has " +
                             std::to_string(coupling.n_physical()));
    }
    if (!coupling.connected()) {
        throw TranspileError("coupling graph is disconnected");
    }
    const std::size_t n = coupling.n_physical();
    std::vector<std::size_t> pos(n), at(n);
    for (std::size_t i = 0; i < n; ++i) {
        pos[i] = at[i] = i;
    }
    Circuit out(n, c.global_phase());
    for (Gate g : c.gates()) {
        if (g.kind == GateKind::SWAP) {
            throw TranspileError("route expects SWAPs to be expanded first");
        }
        if (g.kind != GateKind::CNOT) {
            g.qubits[0] = pos[g.qubits[0]];
            out.add(g);
            continue;
        }
        std::size_t p1 = pos[g.qubits[0]], p2 = pos[g.qubits[1]];
        while (!coupling.coupled(p1, p2)) {
            std::size_t next = coupling.shortest_path(p1, p2)[1];
            out.add(Gate::cnot(p1, next)).add(Gate::cnot(next, p1)).add(Gate::cnot(p1, next));
            std::swap(at[p1], at[next]);
            pos[at[p1]] = p1;
            pos[at[next]] = next;
            p1 = next;
        }
        out.add(Gate::cnot(p1, p2));
    }
    return {std::move(out), std::move(pos)};
}

inline TranspileResult transpile(const Circuit &c, const TranspileOptions &opts) {
    detail::check_bound(c);
    if (opts.optimization_level != 0 && opts.optimization_level != 1) {
        throw TranspileError("optimization_level must be 0 or 1");
    }
    if (!(opts.zero_tol > 0.0)) {
        throw TranspileError("zero_tol must be positive");
    }
    CouplingMap coupling = opts.coupling_for(c.n_qubits());
    RoutedCircuit routed = route(expand_swaps(c), coupling);
    const bool level1 = opts.optimization_level == 1;
    Circuit lowered = fuse_1q_runs(routed.circuit, opts.zero_tol, level1);
    if (level1) {
        lowered = optimize_1q(lowered, opts.zero_tol);
    }
    std::vector<std::size_t> layout(coupling.n_physical());
    for (std::size_t i = 0; i < layout.size(); ++i) {
        layout[i] = i;
    }
    return {std::move(lowered), std::move(layout), std::move(routed.final_layout)};
}

inline bool is_basis_gate(GateKind k) {
    return k == GateKind::ID || k == GateKind::X || k == GateKind::SX || k == GateKind::RZ || k == GateKind::CNOT;
}

/// Permutation matrix P with P|x> = |y>, y_{layout[l]} = x_l.
inline UnitaryMatrix permutation_matrix(const std::vector<std::size_t> &layout) {
    const std::size_t n = layout.size();
    const std::size_t dim = std::size_t{1} << n;
    UnitaryMatrix p(dim);
    for (std::size_t x = 0; x < dim; ++x) {
        std::size_t y = 0;
        for (std::size_t l = 0; l < n; ++l) {
            if (x >> l & 1U) {
                y |= std::size_t{1} << layout[l];
            }
        }
        p(y, x) = 1.0;
    }
    return p;
}

}  // namespace qrev
