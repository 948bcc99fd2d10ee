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

#include "qrev/transpiler.hpp"

#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace qrev;

namespace {

std::vector<GateKind> kinds_of(const Circuit &c) {
    std::vector<GateKind> k;
    for (const Gate &g : c) {
        k.push_back(g.kind);
    }
    return k;
}

// Recomposition oracle: multiply the five matrices independently of
// qrev::recompose.
Mat2 oracle_recompose(const ZsxAngles &z) {
    Circuit c(1, z.phase);
    c.add(Gate::rz(0, z.c)).add(Gate::sx(0)).add(Gate::rz(0, z.b)).add(Gate::sx(0)).add(Gate::rz(0, z.a));
    auto d = oracle::oracle_unitary(c);
    return {d[0][0], d[0][1], d[1][0], d[1][1]};
}

/// U_out must equal P_final * U_in including the tracked global phase.
double semantic_error(const Circuit &in, const TranspileResult &r) {
    UnitaryMatrix expected = permutation_matrix(r.final_layout) * unitary_of(in);
    return unitary_of(r.circuit).max_abs_diff(expected);
}

TranspileOptions level(int l) {
    TranspileOptions o;
    o.optimization_level = l;
    return o;
}

const std::vector<GateKind> kZsx = {GateKind::RZ, GateKind::SX, GateKind::RZ, GateKind::SX, GateKind::RZ};

}  // namespace

TEST(decompose_1q, identity) {
    ZsxAngles z = decompose_1q(kIdentity2);
    EXPECT_LT(max_abs_diff(oracle_recompose(z), kIdentity2), 1e-9);
}

TEST(decompose_1q, rotation_product) {
    Mat2 u = rx_matrix(0.4) * ry_matrix(1.1) * rz_matrix(-0.9);
    ZsxAngles z = decompose_1q(u);
    EXPECT_LT(max_abs_diff(oracle_recompose(z), u), 1e-9);
}

TEST(decompose_1q, rz) {
    ZsxAngles z = decompose_1q(rz_matrix(0.7));
    Mat2 expected = {std::polar(1.0, -0.35), Complex{0, 0}, Complex{0, 0}, std::polar(1.0, 0.35)};
    EXPECT_LT(max_abs_diff(oracle_recompose(z), expected), 1e-9);
}

TEST(decompose_1q, angles_are_canonical) {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 1000; ++i) {
        ZsxAngles z = decompose_1q(oracle::haar_2x2(rng));
        for (double a : {z.a, z.b, z.c, z.phase}) {
            ASSERT_GT(a, -kPi);
            ASSERT_LE(a, kPi);
        }
        // theta = b - pi (mod 2pi) lies in [0, pi], i.e. b in [-pi, 0] or b == pi.
        ASSERT_TRUE(z.b <= 1e-12 || z.b == kPi) << z.b;
    }
}

TEST(decompose_1q, rejects_non_unitary) {
    Mat2 m = {Complex{2, 0}, Complex{0, 0}, Complex{0, 0}, Complex{1, 0}};
    EXPECT_THROW(decompose_1q(m), DimensionError);
}

TEST(decompose_1q, phase_invariant_angles) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        Mat2 u = oracle::haar_2x2(rng);
        ZsxAngles z1 = decompose_1q(u);
        ZsxAngles z2 = decompose_1q(scaled(u, std::polar(1.0, 1.234)));
        ASSERT_LT(wrapped_distance(z1.a, z2.a), 1e-9);
        ASSERT_LT(wrapped_distance(z1.b, z2.b), 1e-9);
        ASSERT_LT(wrapped_distance(z1.c, z2.c), 1e-9);
    }
}

TEST(decompose_1q, haar_recomposition_property) {
    std::mt19937_64 rng(100000);
    double worst = 0;
    for (int i = 0; i < 100000; ++i) {
        Mat2 u = oracle::haar_2x2(rng);
        worst = std::max(worst, max_abs_diff(recompose(decompose_1q(u)), u));
    }
    EXPECT_LE(worst, 1e-9);
}

TEST(transpile, rotation_template_yields_zsx_pattern) {
    Circuit c(1);
    c.add(Gate::rx(0, 0.41)).add(Gate::ry(0, 1.13)).add(Gate::rz(0, -0.77));
    TranspileResult r = transpile(c, level(1));
    EXPECT_EQ(kinds_of(r.circuit), kZsx);
    EXPECT_LT(semantic_error(c, r), 1e-9);
}

TEST(transpile, basis_rz_passes_through) {
    Circuit c(1);
    c.add(Gate::rz(0, 0.7));
    TranspileResult r = transpile(c, level(1));
    ASSERT_EQ(r.circuit.size(), 1U);
    EXPECT_EQ(r.circuit[0].kind, GateKind::RZ);
    EXPECT_NEAR(r.circuit[0].angle, 0.7, 1e-12);
    EXPECT_NEAR(r.circuit.global_phase(), 0.0, 1e-12);
}

TEST(transpile, long_range_cnot_is_routed) {
    Circuit c(3);
    c.add(Gate::h(0)).add(Gate::cnot(0, 2)).add(Gate::rx(2, 0.3));
    TranspileResult r = transpile(c, level(1));
    std::size_t cnots = 0;
    for (const Gate &g : r.circuit) {
        if (g.kind == GateKind::CNOT) {
            ++cnots;
            EXPECT_EQ(std::max(g.qubits[0], g.qubits[1]) - std::min(g.qubits[0], g.qubits[1]), 1U);
        }
    }
    EXPECT_EQ(cnots, 4U);
    EXPECT_LT(semantic_error(c, r), 1e-9);
    // Same check through the phase-insensitive comparison on 8x8 unitaries.
    EXPECT_TRUE(
        equiv_up_to_phase(unitary_of(r.circuit), permutation_matrix(r.final_layout) * unitary_of(c), 1e-9));
}

TEST(transpile, errors) {
    Circuit tagged(1);
    tagged.add(Gate::tagged(GateKind::RX, 0, 0));
    EXPECT_THROW(transpile(tagged, level(1)), BindError);
    TranspileOptions narrow;
    narrow.coupling = CouplingMap::linear(2);
    EXPECT_THROW(transpile(Circuit(3), narrow), TranspileError);
    EXPECT_THROW(transpile(Circuit(1), level(2)), TranspileError);
}

TEST(merge_rz, additive) {
    Circuit c(1);
    c.add(Gate::rz(0, 1.0)).add(Gate::rz(0, 2.5));
    Circuit m = merge_rz(c);
    ASSERT_EQ(m.size(), 1U);
    // 3.5 leaves (-pi, pi]; the merged gate is RZ(3.5 - 2pi) with a pi phase.
    EXPECT_NEAR(m[0].angle, 3.5 - kTwoPi, 1e-12);
    EXPECT_LT(unitary_of(m).max_abs_diff(UnitaryMatrix::from_mat2(rz_matrix(3.5))), 1e-12);
}

TEST(merge_rz, full_turn_is_dropped_with_phase) {
    Circuit c(1);
    c.add(Gate::rz(0, kPi)).add(Gate::rz(0, kPi));
    Circuit m = drop_identity(merge_rz(c), 1e-9);
    EXPECT_TRUE(m.empty());
    // RZ(2pi) = -I.
    EXPECT_NEAR(std::abs(m.global_phase()), kPi, 1e-12);
    EXPECT_LT(unitary_of(m).max_abs_diff(UnitaryMatrix::from_mat2(rz_matrix(kTwoPi))), 1e-9);
}

TEST(merge_rz, across_other_wires) {
    Circuit c(2);
    c.add(Gate::rz(0, 0.2)).add(Gate::x(1)).add(Gate::rz(0, 0.3)).add(Gate::cnot(0, 1)).add(Gate::rz(0, 0.1));
    Circuit m = merge_rz(c);
    EXPECT_EQ(m.size(), 4U);
    EXPECT_NEAR(m[0].angle, 0.5, 1e-15);
    EXPECT_LT(unitary_of(m).max_abs_diff(unitary_of(c)), 1e-12);
}

TEST(fuse_1q_runs, xx_is_empty_at_level1) {
    Circuit c(1);
    c.add(Gate::x(0)).add(Gate::x(0));
    Circuit f = optimize_1q(fuse_1q_runs(c, 1e-9, true), 1e-9);
    EXPECT_TRUE(f.empty());
    EXPECT_LT(unitary_of(f).max_abs_diff(unitary_of(c)), 1e-9);
    EXPECT_TRUE(transpile(c, level(1)).circuit.empty());
}

TEST(drop_identity, removes_id_and_zero_rotations) {
    Circuit c(1);
    c.add(Gate::id(0)).add(Gate::rx(0, 1e-12)).add(Gate::ry(0, 0.5)).add(Gate::rz(0, kTwoPi));
    Circuit d = drop_identity(c, 1e-9);
    ASSERT_EQ(d.size(), 1U);
    EXPECT_EQ(d[0].kind, GateKind::RY);
    EXPECT_LT(unitary_of(d).max_abs_diff(unitary_of(c)), 1e-9);
}

TEST(route, coupled_cnot_unchanged) {
    Circuit c(2);
    c.add(Gate::cnot(0, 1));
    RoutedCircuit r = route(c, CouplingMap::linear(2));
    EXPECT_EQ(r.circuit, c);
    EXPECT_EQ(r.final_layout, (std::vector<std::size_t>{0, 1}));
}

TEST(route, long_range_cnot) {
    Circuit c(3);
    c.add(Gate::cnot(0, 2));
    RoutedCircuit r = route(c, CouplingMap::linear(3));
    Circuit expected(3);
    expected.add(Gate::cnot(0, 1)).add(Gate::cnot(1, 0)).add(Gate::cnot(0, 1)).add(Gate::cnot(1, 2));
    EXPECT_EQ(r.circuit, expected);
    EXPECT_EQ(r.final_layout, (std::vector<std::size_t>{1, 0, 2}));
    EXPECT_LT(unitary_of(r.circuit).max_abs_diff(permutation_matrix(r.final_layout) * unitary_of(c)), 1e-9);
}

TEST(route, no_cnot_unchanged) {
    Circuit c(3);
    c.add(Gate::h(0)).add(Gate::rx(2, 0.1));
    RoutedCircuit r = route(c, CouplingMap::linear(3));
    EXPECT_EQ(r.circuit, c);
    EXPECT_EQ(r.final_layout, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(route, disconnected_map) {
    Circuit c(3);
    c.add(Gate::cnot(0, 2));
    EXPECT_THROW(route(c, CouplingMap(3, {{0, 1}})), TranspileError);
}

TEST(transpile, semantics_property) {
    std::mt19937_64 rng(500);
    for (int trial = 0; trial < 500; ++trial) {
        std::size_t n = 1 + rng() % 4;
        Circuit c = oracle::random_circuit(rng, n, rng() % 41);
        for (int l : {0, 1}) {
            TranspileResult r = transpile(c, level(l));
            ASSERT_LT(semantic_error(c, r), 1e-9) << "level " << l << "\n" << serialize(c);
            CouplingMap map = CouplingMap::linear(n);
            for (const Gate &g : r.circuit) {
                ASSERT_TRUE(is_basis_gate(g.kind));
                if (g.kind == GateKind::CNOT) {
                    ASSERT_TRUE(map.coupled(g.qubits[0], g.qubits[1]));
                }
            }
        }
    }
}

TEST(transpile, level0_segments_are_full_patterns) {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 1 + rng() % 4;
        Circuit c = oracle::random_circuit(rng, n, rng() % 41);
        Circuit out = transpile(c, level(0)).circuit;
        std::vector<std::vector<GateKind>> run(n);
        auto check = [&](std::size_t q) {
            if (!run[q].empty()) {
                ASSERT_EQ(run[q], kZsx);
            }
            run[q].clear();
        };
        for (const Gate &g : out) {
            if (g.kind == GateKind::CNOT) {
                check(g.qubits[0]);
                check(g.qubits[1]);
            } else {
                run[g.qubits[0]].push_back(g.kind);
            }
        }
        for (std::size_t q = 0; q < n; ++q) {
            check(q);
        }
    }
}

TEST(optimize_1q, fixpoint_property) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 300; ++trial) {
        std::size_t n = 1 + rng() % 4;
        Circuit c = oracle::random_circuit(rng, n, rng() % 41);
        Circuit once = optimize_1q(fuse_1q_runs(route(expand_swaps(c), CouplingMap::linear(n)).circuit, 1e-9, true),
                                   1e-9);
        ASSERT_EQ(optimize_1q(once, 1e-9), once);
        ASSERT_EQ(transpile(c, level(1)).circuit, once);
    }
}

TEST(permutation_matrix, swaps_bits) {
    UnitaryMatrix p = permutation_matrix({1, 0});
    // |x> with x = q0 bit set (index 1) maps to q1 bit set (index 2)
    EXPECT_EQ(p(2, 1), Complex(1, 0));
    EXPECT_EQ(p(1, 2), Complex(1, 0));
    EXPECT_EQ(p(0, 0), Complex(1, 0));
}
