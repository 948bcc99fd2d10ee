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

#include <gtest/gtest.h>

#include "qrev/config.hpp"
#include "qrev/report.hpp"

namespace qrev {
namespace {

using config::json;

std::string error_of(const json &doc, const std::vector<std::string> &overrides = {}) {
    try {
        config::resolve(doc, overrides);
    } catch (const ConfigError &e) {
        return e.what();
    }
    return "";
}

TEST(Config, DefaultsResolveOnceSeeded) {
    EXPECT_NE(error_of(json::object()).find("field 'seed'"), std::string::npos);
    auto rc = config::resolve(json{{"seed", 5}}, {});
    EXPECT_EQ(rc.seed, 5u);
    EXPECT_EQ(rc.eval.spec.n_qubits, 2u);
    EXPECT_EQ(rc.eval.spec.rotations, (RotationTemplate{GateKind::RX, GateKind::RY, GateKind::RZ}));
    ASSERT_EQ(rc.shapes.size(), 1u);
    EXPECT_EQ(rc.methods, std::vector<Method>{Method::autoencoder});
    EXPECT_EQ(rc.eval.bf_scope, BruteForceScope::circuit);
    ASSERT_EQ(rc.countermeasures.size(), 1u);
}

TEST(Config, DocumentMergesDeepAndOverridesApplyInOrder) {
    json doc = {{"seed", 1}, {"ansatz", {{"layers", 3}}}};
    auto rc = config::resolve(doc, {"ansatz.qubits=4", "ansatz.qubits=3", "ansatz.rotations=[\"ry\",\"rz\"]"});
    EXPECT_EQ(rc.eval.spec.n_layers, 3u);
    EXPECT_EQ(rc.eval.spec.n_qubits, 3u);
    EXPECT_EQ(rc.eval.spec.rotations.size(), 2u);
    // Sibling keys survive the merge.
    EXPECT_EQ(rc.resolved["ansatz"]["entangle"], "linear_chain");
}

TEST(Config, OverrideValueFallsBackToString) {
    auto rc = config::resolve(json{{"seed", 1}}, {"out=runs/a", "recovery.bf_scope=segment"});
    EXPECT_EQ(rc.out, "runs/a");
    EXPECT_EQ(rc.eval.bf_scope, BruteForceScope::segment);
}

TEST(Config, ErrorsNameTheField) {
    json seeded = {{"seed", 1}};
    EXPECT_NE(error_of(seeded, {"ansatz.qubits=-1"}).find("'ansatz.qubits'"), std::string::npos);
    EXPECT_NE(error_of(seeded, {"ansatz.rotations=[\"rx\",\"h\"]"}).find("'ansatz.rotations[1]'"),
              std::string::npos);
    EXPECT_NE(error_of(seeded, {"recovery.step=0"}).find("'recovery.step'"), std::string::npos);
    EXPECT_NE(error_of(seeded, {"transpile.optimization_level=2"}).find("'transpile.optimization_level'"),
              std::string::npos);
    EXPECT_NE(error_of(seeded, {"recovery.methods=[\"magic\"]"}).find("'recovery.methods'"), std::string::npos);
    EXPECT_NE(error_of(seeded, {"data.source=idx", "data.images=/nonexistent"}).find("'data.images'"),
              std::string::npos);
    EXPECT_NE(error_of(json{{"seed", 1}, {"ansatz", {{"qbits", 2}}}}).find("'ansatz.qbits': unknown"),
              std::string::npos);
    EXPECT_NE(error_of(seeded, {"shapes=[{\"qubits\":2,\"layers\":1}]"}).find("'shapes[0].rotations'"),
              std::string::npos);
    EXPECT_NE(error_of(seeded, {"noequals"}).find("path=value"), std::string::npos);
    EXPECT_NE(error_of(json::array()).find("JSON object"), std::string::npos);
}

TEST(Config, CommentKeyIsIgnored) {
    auto a = config::resolve(json{{"seed", 1}, {"$comment", "license text"}}, {});
    auto b = config::resolve(json{{"seed", 1}}, {});
    EXPECT_EQ(a.resolved, b.resolved);
}

TEST(Config, CountermeasureGridIsCartesian) {
    auto rc = config::resolve(json{{"seed", 1}},
                              {"countermeasures.dummy_qubits=[0,2]", "countermeasures.extra_layers=[0,1,4]"});
    ASSERT_EQ(rc.countermeasures.size(), 6u);
    EXPECT_EQ(rc.countermeasures[5].dummy_qubits, 2u);
    EXPECT_EQ(rc.countermeasures[5].extra_layers, 4u);
    EXPECT_FALSE(error_of(json{{"seed", 1}}, {"countermeasures.extra_layers=[9]"}).empty());
}

TEST(Config, HashIsFnv1aAndIgnoresWorkersAndOut) {
    // FNV-1a 64 of the bytes {"x":1}, computed outside the library.
    EXPECT_EQ(config::config_hash(json{{"x", 1}, {"workers", 8}, {"out", "a"}}), 0xbdd3d53c3a0b3fd6ULL);
    EXPECT_EQ(config::hash_hex(0xbdd3d53c3a0b3fd6ULL), "bdd3d53c3a0b3fd6");
    auto a = config::resolve(json{{"seed", 1}}, {"workers=4", "out=x"});
    auto b = config::resolve(json{{"seed", 1}}, {"workers=1", "out=y"});
    auto c = config::resolve(json{{"seed", 2}}, {});
    EXPECT_EQ(config::config_hash(a.resolved), config::config_hash(b.resolved));
    EXPECT_NE(config::config_hash(a.resolved), config::config_hash(c.resolved));
}

TEST(Config, SyntheticDataHonoursSampleCap) {
    auto rc = config::resolve(json{{"seed", 3}}, {"data.samples=24"});
    Dataset d = config::load_data(rc, 3);
    EXPECT_EQ(d.size(), 24u);
}

TEST(Report, NumbersAndQuoting) {
    EXPECT_EQ(report::num(0.5), "5.000000e-01");
    EXPECT_EQ(report::csv_quote("plain"), "plain");
    EXPECT_EQ(report::csv_quote("a,b"), "\"a,b\"");
    EXPECT_EQ(report::csv_quote("say \"hi\""), "\"say \"\"hi\"\"\"");
}

TEST(Report, MergeConcatenatesAndRefusesMixedTranspileSettings) {
    json cfg = config::defaults();
    std::string h = "h1,h2\n";
    std::string merged = report::merge({{"a", h + "1,2\n", cfg}, {"b", h + "3,4\n", cfg}});
    EXPECT_EQ(merged, "h1,h2\n1,2\n3,4\n");

    json other = cfg;
    other["transpile"]["optimization_level"] = 0;
    EXPECT_THROW(report::merge({{"a", h + "1,2\n", cfg}, {"b", h + "3,4\n", other}}), ConfigError);
    EXPECT_THROW(report::merge({{"a", h, cfg}, {"b", "x\n", cfg}}), FormatError);
    EXPECT_THROW(report::merge({}), ConfigError);
}

}  // namespace
}  // namespace qrev
