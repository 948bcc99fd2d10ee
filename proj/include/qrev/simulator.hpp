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
 * Dense statevector simulation and unitary extraction.
 *
 * Qubit ordering is little-endian everywhere: qubit q is bit q of the basis
 * index, so |01> in ket notation with q0 = 1 is basis index 1.
 */
#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "qrev/circuit.hpp"
#include "qrev/error.hpp"

namespace qrev {

using Complex = std::complex<double>;

inline constexpr std::size_t kMaxStatevectorQubits = 20;
inline constexpr std::size_t kMaxUnitaryQubits = 10;

/// Row-major 2x2 complex matrix {m00, m01, m10, m11}.
using Mat2 = std::array<Complex, 4>;

inline constexpr Mat2 kIdentity2 = {Complex{1, 0}, Complex{0, 0}, Complex{0, 0}, Complex{1, 0}};

inline Mat2 operator*(const Mat2 &a, const Mat2 &b) {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3]};
}

inline Mat2 adjoint(const Mat2 &a) {
    return {std::conj(a[0]), std::conj(a[2]), std::conj(a[1]), std::conj(a[3])};
}

inline Mat2 scaled(const Mat2 &a, Complex s) {
    return {a[0] * s, a[1] * s, a[2] * s, a[3] * s};
}

inline double max_abs_diff(const Mat2 &a, const Mat2 &b) {
    double m = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

/// 2 - |tr(a^dagger b)|: zero iff a and b agree up to a global phase.
inline double phase_invariant_distance(const Mat2 &a, const Mat2 &b) {
    Complex tr = std::conj(a[0]) * b[0] + std::conj(a[2]) * b[2] + std::conj(a[1]) * b[1] + std::conj(a[3]) * b[3];
    return 2.0 - std::abs(tr);
}

inline Mat2 rx_matrix(double theta) {
    double c = std::cos(theta / 2), s = std::sin(theta / 2);
    return {Complex{c, 0}, Complex{0, -s}, Complex{0, -s}, Complex{c, 0}};
}

inline Mat2 ry_matrix(double theta) {
    double c = std::cos(theta / 2), s = std::sin(theta / 2);
    return {Complex{c, 0}, Complex{-s, 0}, Complex{s, 0}, Complex{c, 0}};
}

inline Mat2 rz_matrix(double theta) {
    return {std::polar(1.0, -theta / 2), Complex{0, 0}, Complex{0, 0}, std::polar(1.0, theta / 2)};
}

inline Mat2 sx_matrix() {
    return {Complex{0.5, 0.5}, Complex{0.5, -0.5}, Complex{0.5, -0.5}, Complex{0.5, 0.5}};
}

/// Matrix of a bound single-qubit gate.
inline Mat2 gate_matrix(const Gate &g) {
    if (g.param_tag) {
        throw BindError("gate has an unbound parameter");
    }
    switch (g.kind) {
        case GateKind::RX: return rx_matrix(g.angle);
        case GateKind::RY: return ry_matrix(g.angle);
        case GateKind::RZ: return rz_matrix(g.angle);
        case GateKind::X: return {Complex{0, 0}, Complex{1, 0}, Complex{1, 0}, Complex{0, 0}};
        case GateKind::SX: return sx_matrix();
        case GateKind::ID: return kIdentity2;
        case GateKind::H: {
            double r = 1.0 / std::numbers::sqrt2;
            return {Complex{r, 0}, Complex{r, 0}, Complex{r, 0}, Complex{-r, 0}};
        }
        case GateKind::CNOT:
        case GateKind::SWAP: break;
    }
    throw DimensionError("gate_matrix: not a single-qubit gate");
}

/// Product of single-qubit gates in execution order (first gate rightmost).
inline Mat2 product_1q(std::span<const Gate> gates) {
    Mat2 u = kIdentity2;
    for (const Gate &g : gates) {
        u = gate_matrix(g) * u;
    }
    return u;
}

/// Normalized amplitude vector over 2^n basis states.
class Statevector {
  public:
    /// |0...0> on n qubits.
    explicit Statevector(std::size_t n_qubits) : Statevector(n_qubits, 0) {
    }

    /// Computational basis state |index>.
    Statevector(std::size_t n_qubits, std::size_t index) : n_qubits_(n_qubits) {
        if (n_qubits == 0 || n_qubits > kMaxStatevectorQubits) {
            throw ResourceError("statevector width " + std::to_string(n_qubits) + " outside [1, " +
                                std::to_string(kMaxStatevectorQubits) + "]");
        }
        amps_.assign(std::size_t{1} << n_qubits, Complex{0, 0});
        if (index >= amps_.size()) {
            throw DimensionError("basis index out of range");
        }
        amps_[index] = 1.0;
    }

    /// Takes arbitrary amplitudes; they must already have unit norm.
    static Statevector from_amplitudes(std::vector<Complex> amps) {
        if (amps.size() < 2 || !std::has_single_bit(amps.size())) {
            throw DimensionError("amplitude count must be a power of two >= 2");
        }
        Statevector s(static_cast<std::size_t>(std::countr_zero(amps.size())));
        s.amps_ = std::move(amps);
        if (std::abs(s.norm() - 1.0) > 1e-9) {
            throw DimensionError("amplitudes are not normalized");
        }
        return s;
    }

    std::size_t n_qubits() const noexcept {
        return n_qubits_;
    }
    std::size_t dim() const noexcept {
        return amps_.size();
    }
    const std::vector<Complex> &amplitudes() const noexcept {
        return amps_;
    }
    Complex operator[](std::size_t i) const {
        return amps_[i];
    }
    double norm() const noexcept {
        double s = 0.0;
        for (const Complex &a : amps_) {
            s += std::norm(a);
        }
        return std::sqrt(s);
    }

    void apply_1q(std::size_t q, const Mat2 &u) {
        const std::size_t mask = std::size_t{1} << q;
        for (std::size_t i = 0; i < amps_.size(); ++i) {
            if (i & mask) {
                continue;
            }
            Complex a0 = amps_[i], a1 = amps_[i | mask];
            amps_[i] = u[0] * a0 + u[1] * a1;
            amps_[i | mask] = u[2] * a0 + u[3] * a1;
        }
    }

    void apply_cnot(std::size_t control, std::size_t target) {
        const std::size_t cm = std::size_t{1} << control, tm = std::size_t{1} << target;
        for (std::size_t i = 0; i < amps_.size(); ++i) {
            if ((i & cm) && !(i & tm)) {
                std::swap(amps_[i], amps_[i | tm]);
            }
        }
    }

    void apply_swap(std::size_t a, std::size_t b) {
        const std::size_t am = std::size_t{1} << a, bm = std::size_t{1} << b;
        for (std::size_t i = 0; i < amps_.size(); ++i) {
            if ((i & am) && !(i & bm)) {
                std::swap(amps_[i], amps_[(i & ~am) | bm]);
            }
        }
    }

    void apply(const Gate &g) {
        switch (g.kind) {
            case GateKind::CNOT: apply_cnot(g.qubits[0], g.qubits[1]); break;
            case GateKind::SWAP: apply_swap(g.qubits[0], g.qubits[1]); break;
            default: apply_1q(g.qubits[0], gate_matrix(g)); break;
        }
    }

    void scale(Complex s) {
        for (Complex &a : amps_) {
            a *= s;
        }
    }

    /// <psi| Z_q |psi>.
    double expval_z(std::size_t q) const {
        const std::size_t mask = std::size_t{1} << q;
        double e = 0.0;
        for (std::size_t i = 0; i < amps_.size(); ++i) {
            e += (i & mask) ? -std::norm(amps_[i]) : std::norm(amps_[i]);
        }
        return e;
    }

  private:
    std::size_t n_qubits_;
    std::vector<Complex> amps_;
};

/// Dense row-major 2^n x 2^n matrix.
class UnitaryMatrix {
  public:
    explicit UnitaryMatrix(std::size_t dim) : dim_(dim), data_(dim * dim, Complex{0, 0}) {
    }
    static UnitaryMatrix identity(std::size_t dim) {
        UnitaryMatrix m(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            m(i, i) = 1.0;
        }
        return m;
    }
    static UnitaryMatrix from_mat2(const Mat2 &u) {
        UnitaryMatrix m(2);
        m(0, 0) = u[0];
        m(0, 1) = u[1];
        m(1, 0) = u[2];
        m(1, 1) = u[3];
        return m;
    }
    Mat2 to_mat2() const {
        if (dim_ != 2) {
            throw DimensionError("not a 2x2 matrix");
        }
        return {data_[0], data_[1], data_[2], data_[3]};
    }

    std::size_t dim() const noexcept {
        return dim_;
    }
    Complex &operator()(std::size_t r, std::size_t c) {
        return data_[r * dim_ + c];
    }
    Complex operator()(std::size_t r, std::size_t c) const {
        return data_[r * dim_ + c];
    }

    UnitaryMatrix operator*(const UnitaryMatrix &o) const {
        if (o.dim_ != dim_) {
            throw DimensionError("matrix product: dim mismatch");
        }
        UnitaryMatrix r(dim_);
        for (std::size_t i = 0; i < dim_; ++i) {
            for (std::size_t k = 0; k < dim_; ++k) {
                Complex a = (*this)(i, k);
                if (a == Complex{0, 0}) {
                    continue;
                }
                for (std::size_t j = 0; j < dim_; ++j) {
                    r(i, j) += a * o(k, j);
                }
            }
        }
        return r;
    }

    UnitaryMatrix adjoint() const {
        UnitaryMatrix r(dim_);
        for (std::size_t i = 0; i < dim_; ++i) {
            for (std::size_t j = 0; j < dim_; ++j) {
                r(j, i) = std::conj((*this)(i, j));
            }
        }
        return r;
    }

    /// tr(this^dagger * o).
    Complex inner(const UnitaryMatrix &o) const {
        if (o.dim_ != dim_) {
            throw DimensionError("inner: dim mismatch");
        }
        Complex t{0, 0};
        for (std::size_t i = 0; i < data_.size(); ++i) {
            t += std::conj(data_[i]) * o.data_[i];
        }
        return t;
    }

    double max_abs_diff(const UnitaryMatrix &o) const {
        if (o.dim_ != dim_) {
            throw DimensionError("max_abs_diff: dim mismatch");
        }
        double m = 0.0;
        for (std::size_t i = 0; i < data_.size(); ++i) {
            m = std::max(m, std::abs(data_[i] - o.data_[i]));
        }
        return m;
    }

    /// max |(U^dagger U - I)_ij|.
    double unitarity_error() const {
        return (adjoint() * *this).max_abs_diff(identity(dim_));
    }

  private:
    std::size_t dim_;
    std::vector<Complex> data_;
};

namespace detail {

inline void check_runnable(const Circuit &c) {
    if (c.has_unbound()) {
        throw BindError("circuit has unbound parameters");
    }
}

}  // namespace detail

/// e^{i phase} * (gate product) * init.
inline Statevector run(const Circuit &c, Statevector init) {
    detail::check_runnable(c);
    if (init.n_qubits() != c.n_qubits()) {
        throw DimensionError("statevector has " + std::to_string(init.n_qubits()) + " qubits, circuit has " +
                             std::to_string(c.n_qubits()));
    }
    for (const Gate &g : c.gates()) {
        init.apply(g);
    }
    if (c.global_phase() != 0.0) {
        init.scale(std::polar(1.0, c.global_phase()));
    }
    return init;
}

inline Statevector run(const Circuit &c) {
    return run(c, Statevector(c.n_qubits()));
}

/// Full unitary including the global phase; column j is run(c, |j>).
inline UnitaryMatrix unitary_of(const Circuit &c) {
    detail::check_runnable(c);
    if (c.n_qubits() > kMaxUnitaryQubits) {
        throw ResourceError("unitary_of is capped at " + std::to_string(kMaxUnitaryQubits) + " qubits");
    }
    const std::size_t dim = std::size_t{1} << c.n_qubits();
    UnitaryMatrix u(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        Statevector col = run(c, Statevector(c.n_qubits(), j));
        for (std::size_t i = 0; i < dim; ++i) {
            u(i, j) = col[i];
        }
    }
    return u;
}

inline double expval_z(const Circuit &c, std::size_t qubit, const Statevector &init) {
    if (qubit >= c.n_qubits()) {
        throw DimensionError("measured qubit out of range");
    }
    return run(c, init).expval_z(qubit);
}

/// True iff U and V differ only by a global phase: ||tr(U^dagger V)| - dim| <= tol * dim.
inline bool equiv_up_to_phase(const UnitaryMatrix &u, const UnitaryMatrix &v, double tol) {
    if (u.dim() != v.dim()) {
        throw DimensionError("equiv_up_to_phase: dim mismatch");
    }
    double d = static_cast<double>(u.dim());
    return std::abs(std::abs(u.inner(v)) - d) <= tol * d;
}

}  // namespace qrev
