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

#include "qrev/structlut.hpp"

#include <gtest/gtest.h>

#include <random>

#include "qrev/qnn.hpp"
#include "test_support.hpp"

using namespace qrev;

namespace {

constexpr GateKind RX = GateKind::RX, RY = GateKind::RY, RZ = GateKind::RZ, SX = GateKind::SX;
const Signature kZsx = {RZ, SX, RZ, SX, RZ};

std::vector<RotationTemplate> all_orderings_up_to_3() {
    std::vector<RotationTemplate> out;
    const std::vector<GateKind> kinds = {RX, RY, RZ};
    for (GateKind a : kinds) {
        out.push_back({a});
    }
    for (GateKind a : kinds)
        for (GateKind b : kinds)
            if (a != b) out.push_back({a, b});
    for (GateKind a : kinds)
        for (GateKind b : kinds)
            for (GateKind c : kinds)
                if (a != b && b != c && a != c) out.push_back({a, b, c});
    return out;
}

std::vector<double> random_params(std::mt19937_64 &rng, std::size_t n) {
    std::vector<double> p(n);
    for (double &v : p) {
        v = oracle::uniform_angle(rng);
    }
    return p;
}

Circuit transpiled(const Circuit &c, int level = 1) {
    TranspileOptions o;
    o.optimization_level = level;
    return transpile(c, o).circuit;
}

}  // namespace

TEST(build_lut, xyz_template) {
    Lut lut = build_lut({{RX, RY, RZ}});
    const LutEntry *e = lut.find(kZsx);
    ASSERT_NE(e, nullptr);
    EXPECT_EQ(e->templ, (RotationTemplate{RX, RY, RZ}));
    EXPECT_EQ(e->k, 3U);
    EXPECT_EQ(e->rz_slots, (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_FALSE(e->ambiguous);
}

TEST(build_lut, rz_template) {
    Lut lut = build_lut({{RZ}});
    const LutEntry *e = lut.find({RZ});
    ASSERT_NE(e, nullptr);
    EXPECT_EQ(e->k, 1U);
    EXPECT_EQ(lut.entries.size(), 1U);
}

TEST(build_lut, reversed_orderings_share_the_full_pattern) {
    Lut lut = build_lut({{RZ, RY, RX}, {RX, RY, RZ}});
    const LutEntry *e = lut.find(kZsx);
    ASSERT_NE(e, nullptr);
    // Same k: kept in priority order, not flagged.
    EXPECT_EQ(e->candidates, (std::vector<RotationTemplate>{{RX, RY, RZ}, {RZ, RY, RX}}));
    EXPECT_EQ(e->templ, (RotationTemplate{RX, RY, RZ}));
    EXPECT_FALSE(e->ambiguous);
}

TEST(build_lut, sign_dependent_signatures) {
    Lut lut = build_lut({{RX, RY, RZ}, {RY, RZ}});
    const LutEntry *full = lut.find(kZsx);
    ASSERT_NE(full, nullptr);
    EXPECT_TRUE(full->ambiguous);
    EXPECT_EQ(full->candidates.front(), (RotationTemplate{RY, RZ}));
    const LutEntry *short4 = lut.find({SX, RZ, SX, RZ});
    ASSERT_NE(short4, nullptr);
    EXPECT_EQ(short4->templ, (RotationTemplate{RY, RZ}));
    EXPECT_EQ(short4->rz_slots, (std::vector<std::size_t>{1, 2}));
}

TEST(build_lut, rejects_bad_templates) {
    EXPECT_THROW(build_lut({}), ConfigError);
    EXPECT_THROW(build_lut({{}}), ConfigError);
    EXPECT_THROW(build_lut({{RX, RY, RZ, RX, RY}}), ConfigError);
    EXPECT_THROW(build_lut({{GateKind::SX}}), ConfigError);
}

TEST(lut_text, round_trip) {
    Lut lut = build_lut(all_orderings_up_to_3());
    EXPECT_EQ(parse_lut(serialize(lut)), lut);
    EXPECT_THROW(parse_lut(""), FormatError);
    EXPECT_THROW(parse_lut("lut v1 optimization_level=1 zero_tol=1e-9\nbogus\n"), FormatError);
    EXPECT_THROW(parse_lut("lut v1 optimization_level=1 zero_tol=1e-9\nentry sig=rz k=1 ambiguous=0\n"), FormatError);
}

TEST(segment, boundary_at_cnot) {
    Circuit c(2);
    c.add(Gate::rz(0, 0.3)).add(Gate::cnot(0, 1)).add(Gate::sx(0));
    auto s = segment(c);
    ASSERT_EQ(s[0].size(), 2U);
    EXPECT_EQ(s[0][0].kinds, Signature{RZ});
    EXPECT_EQ(s[0][0].rz_angles, std::vector<double>{0.3});
    EXPECT_EQ(s[0][1].kinds, Signature{SX});
    EXPECT_TRUE(s[0][1].rz_angles.empty());
    ASSERT_EQ(s[1].size(), 2U);
    EXPECT_TRUE(s[1][0].kinds.empty());
}

TEST(segment, transpiled_xyz) {
    Circuit c(1);
    c.add(Gate::rx(0, 0.4)).add(Gate::ry(0, 1.1)).add(Gate::rz(0, -0.9));
    auto s = segment(transpiled(c));
    ASSERT_EQ(s[0].size(), 1U);
    EXPECT_EQ(s[0][0].kinds, kZsx);
    EXPECT_EQ(s[0][0].rz_angles.size(), 3U);
    EXPECT_LT(phase_invariant_distance(s[0][0].unitary, rz_matrix(-0.9) * ry_matrix(1.1) * rx_matrix(0.4)), 1e-12);
}

TEST(segment, empty_circuit) {
    auto s = segment(Circuit(3));
    for (const auto &w : s) {
        ASSERT_EQ(w.size(), 1U);
        EXPECT_TRUE(w[0].kinds.empty());
    }
}

TEST(segment, rejects_non_basis) {
    Circuit c(1);
    c.add(Gate::h(0));
    EXPECT_THROW(segment(c), TranspileError);
}

TEST(unroute, swap_expansion) {
    Circuit c(2);
    c.add(Gate::cnot(0, 1)).add(Gate::cnot(1, 0)).add(Gate::cnot(0, 1));
    Unrouted u = unroute(c);
    EXPECT_TRUE(u.circuit.empty());
    EXPECT_EQ(u.layout, (std::vector<std::size_t>{1, 0}));
}

TEST(unroute, no_cnots_unchanged) {
    Circuit c(2);
    c.add(Gate::rz(0, 0.1)).add(Gate::sx(1));
    Unrouted u = unroute(c);
    EXPECT_EQ(u.circuit, c);
    EXPECT_EQ(u.layout, (std::vector<std::size_t>{0, 1}));
}

TEST(unroute, interleaved_gate_blocks_pattern) {
    Circuit c(2);
    c.add(Gate::cnot(0, 1)).add(Gate::sx(0)).add(Gate::cnot(1, 0)).add(Gate::cnot(0, 1));
    EXPECT_EQ(unroute(c).circuit, c);
}

TEST(unroute, long_range_cnot) {
    Circuit c(3);
    c.add(Gate::cnot(0, 2));
    Unrouted u = unroute(route(c, CouplingMap::linear(3)).circuit);
    EXPECT_EQ(u.circuit, c);
}

TEST(unroute, recovers_every_pair) {
    for (std::size_t n = 2; n <= 8; ++n) {
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = 0; b < n; ++b) {
                if (a == b) continue;
                Circuit c(n);
                c.add(Gate::rz(a, 0.3)).add(Gate::cnot(a, b)).add(Gate::sx(b));
                RoutedCircuit r = route(c, CouplingMap::linear(n));
                Unrouted u = unroute(r.circuit);
                ASSERT_EQ(u.circuit, c) << a << "->" << b << " on " << n;
                ASSERT_EQ(u.layout, r.final_layout);
            }
        }
    }
}

// A genuine CNOT(x,y) followed by a routed SWAP on the same pair can also be
// read as SWAP then CNOT(y,x); both readings are the same unitary, so random
// circuits are checked semantically.
TEST(unroute, inverts_routing_property) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 300; ++trial) {
        std::size_t n = 2 + rng() % 7;
        Circuit c(n);
        for (int i = 0; i < 12; ++i) {
            std::size_t a = rng() % n, b = rng() % n;
            if (a == b) {
                c.add(Gate::rz(a, 0.1 * (i + 1)));
            } else {
                c.add(Gate::cnot(a, b));
            }
        }
        RoutedCircuit r = route(c, CouplingMap::linear(n));
        Unrouted u = unroute(r.circuit);
        ASSERT_LT(unitary_of(r.circuit).max_abs_diff(permutation_matrix(u.layout) * unitary_of(u.circuit)), 1e-9);
        ASSERT_LT(unitary_of(u.circuit).max_abs_diff(
                      permutation_matrix(u.layout).adjoint() * permutation_matrix(r.final_layout) * unitary_of(c)),
                  1e-9);
    }
}

TEST(recover_structure, single_qubit_xyz) {
    Circuit c(1);
    c.add(Gate::rx(0, 0.4)).add(Gate::ry(0, 1.1)).add(Gate::rz(0, -0.9));
    RecoveredStructure rs = recover_structure(transpiled(c), build_lut({{RX, RY, RZ}}));
    Circuit expected(1);
    expected.add(Gate::tagged(RX, 0, 0)).add(Gate::tagged(RY, 0, 1)).add(Gate::tagged(RZ, 0, 2));
    EXPECT_EQ(rs.ansatz, expected);
    ASSERT_EQ(rs.segments.size(), 1U);
    EXPECT_EQ(rs.segments[0].rz_angles.size(), 3U);
}

TEST(recover_structure, two_qubit_one_layer) {
    AnsatzSpec spec{2, 1, {RX, RY, RZ}, Entangle::linear_chain};
    Circuit ansatz = build_ansatz(spec);
    std::mt19937_64 rng(1);
    Circuit victim = transpiled(bind(ansatz, ParamVector(random_params(rng, 6))));
    RecoveredStructure rs = recover_structure(victim, build_lut({{RX, RY, RZ}}));
    EXPECT_EQ(rs.ansatz.param_count(), 6U);
    EXPECT_TRUE(same_structure(rs.ansatz, ansatz));
    EXPECT_EQ(rs.ansatz, ansatz);
}

TEST(recover_structure, unmatched_segment) {
    Circuit victim(2);
    victim.add(Gate::cnot(0, 1)).add(Gate::sx(1)).add(Gate::sx(1)).add(Gate::sx(1)).add(Gate::sx(1));
    try {
        recover_structure(victim, build_lut({{RZ}}));
        FAIL() << "expected UnmatchedSegment";
    } catch (const UnmatchedSegment &e) {
        EXPECT_EQ(e.wire, 1U);
        EXPECT_EQ(e.position, 1U);
    }
}

TEST(recover_structure, ambiguity_resolution) {
    Lut lut = build_lut({{RX, RY, RZ}, {RY, RZ}});
    Circuit yz(1);
    yz.add(Gate::ry(0, -0.8)).add(Gate::rz(0, 0.5));
    Circuit victim = transpiled(yz);
    ASSERT_EQ(segment(victim)[0][0].kinds, kZsx);
    RecoverOptions strict;
    strict.resolve_ambiguity = false;
    EXPECT_THROW(recover_structure(victim, lut, strict), AmbiguousSegment);
    RecoveredStructure rs = recover_structure(victim, lut);
    ASSERT_EQ(rs.segments.size(), 1U);
    EXPECT_EQ(rs.segments[0].templ, (RotationTemplate{RY, RZ}));
    EXPECT_EQ(rs.notes.size(), 1U);

    Circuit xyz(1);
    xyz.add(Gate::rx(0, 0.7)).add(Gate::ry(0, -0.8)).add(Gate::rz(0, 0.5));
    EXPECT_EQ(recover_structure(transpiled(xyz), lut).segments[0].templ, (RotationTemplate{RX, RY, RZ}));
}

TEST(fit_template, reaches_members_and_rejects_others) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 20; ++i) {
        auto p = random_params(rng, 2);
        Mat2 u = template_unitary({RY, RZ}, p);
        EXPECT_LT(fit_template({RY, RZ}, u).distance, 1e-12);
        EXPECT_LT(fit_template({RX, RY, RZ}, u).distance, 1e-12);
        Mat2 generic = oracle::haar_2x2(rng);
        EXPECT_GT(fit_template({RY, RZ}, generic).distance, 1e-8);
    }
}

TEST(recover_structure, deterministic) {
    AnsatzSpec spec{3, 2, {RY, RZ}, Entangle::linear_chain};
    std::mt19937_64 rng(4);
    Circuit victim = transpiled(bind(build_ansatz(spec), ParamVector(random_params(rng, spec.param_count()))));
    Lut lut = build_lut({{RX, RY, RZ}, {RY, RZ}});
    EXPECT_EQ(serialize(recover_structure(victim, lut)), serialize(recover_structure(victim, lut)));
}

TEST(recover_structure, round_trip_property) {
    std::mt19937_64 rng(2025);
    for (const RotationTemplate &t : all_orderings_up_to_3()) {
        Lut lut = build_lut({t});
        for (std::size_t n = 1; n <= 4; ++n) {
            // A single wire has no CNOT to separate layers.
            for (std::size_t layers = 1; layers <= (n == 1 ? 1U : 3U); ++layers) {
                AnsatzSpec spec{n, layers, t, Entangle::linear_chain};
                Circuit ansatz = build_ansatz(spec);
                for (int draw = 0; draw < 100; ++draw) {
                    Circuit victim = transpiled(bind(ansatz, ParamVector(random_params(rng, spec.param_count()))));
                    RecoveredStructure rs = recover_structure(victim, lut);
                    ASSERT_TRUE(same_structure(rs.ansatz, ansatz))
                        << join_kinds(t) << " n=" << n << " layers=" << layers << "\n"
                        << serialize(rs.ansatz);
                }
            }
        }
    }
}

TEST(recover_structure, table_templates_with_combined_lut) {
    Lut lut = build_lut({{RX, RY, RZ}, {RY, RZ}});
    std::mt19937_64 rng(77);
    for (auto [n, t] : {std::pair<std::size_t, RotationTemplate>{2, {RX, RY, RZ}}, {4, {RY, RZ}}}) {
        for (std::size_t layers = 1; layers <= 3; ++layers) {
            AnsatzSpec spec{n, layers, t, Entangle::linear_chain};
            Circuit ansatz = build_ansatz(spec);
            for (int draw = 0; draw < 5; ++draw) {
                Circuit victim = transpiled(bind(ansatz, ParamVector(random_params(rng, spec.param_count()))));
                ASSERT_TRUE(same_structure(recover_structure(victim, lut).ansatz, ansatz));
            }
        }
    }
}

TEST(same_structure, detects_differences) {
    Circuit a(2), b(2), c(2);
    a.add(Gate::tagged(RX, 0, 0)).add(Gate::tagged(RY, 1, 1)).add(Gate::cnot(0, 1));
    b.add(Gate::tagged(RY, 1, 1)).add(Gate::tagged(RX, 0, 0)).add(Gate::cnot(0, 1));
    c.add(Gate::tagged(RX, 0, 0)).add(Gate::cnot(0, 1)).add(Gate::tagged(RY, 1, 1));
    EXPECT_TRUE(same_structure(a, b));
    EXPECT_FALSE(same_structure(a, c));
    Circuit d(2);
    d.add(Gate::tagged(RX, 0, 1)).add(Gate::tagged(RY, 1, 0)).add(Gate::cnot(0, 1));
    EXPECT_FALSE(same_structure(a, d));
    auto m = match_structure(a, d);
    ASSERT_TRUE(m.has_value());
    EXPECT_EQ(*m, (std::vector<std::size_t>{1, 0}));
}
