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

#include "qrev/simulator.hpp"

#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace qrev;

namespace {

Circuit one_qubit(std::initializer_list<Gate> gates, std::size_t n = 1) {
    Circuit c(n);
    for (const Gate &g : gates) {
        c.add(g);
    }
    return c;
}

}  // namespace

TEST(run, x_flips_zero) {
    Statevector s = run(one_qubit({Gate::x(0)}));
    EXPECT_NEAR(std::abs(s[1] - Complex{1, 0}), 0.0, 1e-15);
    EXPECT_EQ(std::abs(s[0]), 0.0);
}

TEST(run, sx_squared_is_x) {
    Statevector s = run(one_qubit({Gate::sx(0), Gate::sx(0)}));
    EXPECT_NEAR(std::abs(s[1] - Complex{1, 0}), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(s[0]), 0.0, 1e-15);
}

TEST(run, cnot_basis_action) {
    // |01> with q0 = 1 is index 1; CNOT(q0 -> q1) gives index 3.
    Circuit c = one_qubit({Gate::cnot(0, 1)}, 2);
    Statevector s = run(c, Statevector(2, 1));
    EXPECT_NEAR(std::abs(s[3] - Complex{1, 0}), 0.0, 1e-15);
}

TEST(run, errors) {
    Circuit tagged(1);
    tagged.add(Gate::tagged(GateKind::RX, 0, 0));
    EXPECT_THROW(run(tagged), BindError);
    EXPECT_THROW(run(Circuit(2), Statevector(3)), DimensionError);
    EXPECT_THROW(Statevector(21), ResourceError);
}

TEST(run, applies_global_phase) {
    Circuit c(1, 0.4);
    Statevector s = run(c);
    EXPECT_NEAR(std::abs(s[0] - std::polar(1.0, 0.4)), 0.0, 1e-15);
}

TEST(unitary_of, empty_is_identity) {
    EXPECT_EQ(unitary_of(Circuit(1)).max_abs_diff(UnitaryMatrix::identity(2)), 0.0);
}

TEST(unitary_of, rz_definition) {
    double t = 0.83;
    UnitaryMatrix u = unitary_of(one_qubit({Gate::rz(0, t)}));
    EXPECT_NEAR(std::abs(u(0, 0) - std::polar(1.0, -t / 2)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(u(1, 1) - std::polar(1.0, t / 2)), 0.0, 1e-15);
    EXPECT_EQ(std::abs(u(0, 1)), 0.0);
}

TEST(unitary_of, width_cap) {
    EXPECT_THROW(unitary_of(Circuit(11)), ResourceError);
}

TEST(unitary_of, matches_dense_oracle) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 1 + rng() % 3;
        Circuit c = oracle::random_circuit(rng, n, 1 + rng() % 12);
        ASSERT_LT(oracle::max_diff(unitary_of(c), oracle::oracle_unitary(c)), 1e-12) << serialize(c);
    }
}

TEST(unitary_of, random_three_gate_two_qubit) {
    Circuit c(2);
    c.add(Gate::ry(0, 0.3)).add(Gate::cnot(0, 1)).add(Gate::rx(1, -1.2));
    EXPECT_LT(oracle::max_diff(unitary_of(c), oracle::oracle_unitary(c)), 1e-12);
}

TEST(unitary_of, composition) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 1 + rng() % 3;
        Circuit a = oracle::random_circuit(rng, n, rng() % 10);
        Circuit b = oracle::random_circuit(rng, n, rng() % 10);
        Circuit ab = a;
        ab.append(b);
        ASSERT_LT(unitary_of(ab).max_abs_diff(unitary_of(b) * unitary_of(a)), 1e-9);
    }
}

TEST(run, norm_preservation) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 1 + rng() % 6;
        Circuit c = oracle::random_circuit(rng, n, rng() % 40);
        ASSERT_NEAR(run(c).norm(), 1.0, 1e-9);
    }
}

TEST(expval_z, examples) {
    EXPECT_EQ(expval_z(Circuit(1), 0, Statevector(1)), 1.0);
    EXPECT_EQ(expval_z(one_qubit({Gate::x(0)}), 0, Statevector(1)), -1.0);
    EXPECT_NEAR(expval_z(one_qubit({Gate::ry(0, kPi / 2)}), 0, Statevector(1)), 0.0, 1e-12);
}

TEST(expval_z, matches_dense_oracle) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 1 + rng() % 3;
        Circuit c = oracle::random_circuit(rng, n, rng() % 15);
        std::size_t q = rng() % n;
        auto u = oracle::oracle_unitary(c);
        // psi' = U|0>, <Z_q> = sum |psi'_i|^2 * (+-1)
        double e = 0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            e += std::norm(u[i][0]) * ((i >> q & 1U) ? -1.0 : 1.0);
        }
        ASSERT_NEAR(expval_z(c, q, Statevector(n)), e, 1e-12);
    }
}

TEST(equiv_up_to_phase, examples) {
    std::mt19937_64 rng(1);
    Circuit c = oracle::random_circuit(rng, 2, 10);
    UnitaryMatrix u = unitary_of(c);
    EXPECT_TRUE(equiv_up_to_phase(u, u, 1e-9));
    Circuit shifted = c;
    shifted.add_phase(0.3);
    EXPECT_TRUE(equiv_up_to_phase(u, unitary_of(shifted), 1e-9));
    EXPECT_FALSE(equiv_up_to_phase(UnitaryMatrix::identity(2), unitary_of(one_qubit({Gate::x(0)})), 1e-9));
    EXPECT_THROW(equiv_up_to_phase(u, UnitaryMatrix::identity(2), 1e-9), DimensionError);
}

TEST(unitary, unitarity_of_random_circuits) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        Circuit c = oracle::random_circuit(rng, 3, 30);
        ASSERT_LT(unitary_of(c).unitarity_error(), 1e-9);
    }
}
