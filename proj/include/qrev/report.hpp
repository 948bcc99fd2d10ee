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

// CSV and JSON renderings of recovery results. Deterministic fields and wall
// times are always written to separate documents.
#pragma once

#include <cstdio>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "qrev/recovery.hpp"

namespace qrev::report {

using json = nlohmann::json;

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6e", v);
    return buf;
}

inline std::string csv_quote(const std::string &s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c == '"' ? std::string("\"\"") : std::string(1, c);
    }
    return out + "\"";
}

inline const char *kRecoveryHeader =
    "config_hash,seed,classifier,qubits,layers,params,rotations,method,param_mean,param_std,"
    "acc_original,acc_recovered,acc_error_pct,acc_retrained,diff_acc_pct,bf_candidates";

inline std::string csv_row(const RecoveryReport &r, const std::string &hash, std::uint64_t seed) {
    std::ostringstream out;
    out << hash << "," << seed << "," << csv_quote(r.classifier()) << "," << r.n_qubits << "," << r.n_layers << ","
        << r.n_params << "," << csv_quote(join_kinds(r.rotations)) << "," << method_name(r.method) << ","
        << num(r.param_mean_error) << "," << num(r.param_error_std) << "," << num(r.accuracy_original) << ","
        << num(r.accuracy_recovered) << "," << num(r.acc_error_pct) << "," << num(r.acc_after_retraining) << ","
        << num(r.diff_acc_pct) << "," << r.bf_candidates;
    return out.str();
}

inline json times_json(const PhaseTimes &t) {
    return {{"victim_training_s", t.victim_training}, {"transpile_s", t.transpile},   {"lut_s", t.lut},
            {"structure_s", t.structure},             {"dataset_s", t.dataset},       {"ae_training_s", t.ae_training},
            {"recovery_s", t.recovery},               {"retraining_s", t.retraining}, {"parameter_recovery_s", t.parameter_recovery()}};
}

inline json to_json(const RecoveryReport &r) {
    return {{"classifier", r.classifier()},
            {"qubits", r.n_qubits},
            {"layers", r.n_layers},
            {"params", r.n_params},
            {"rotations", join_kinds(r.rotations)},
            {"method", method_name(r.method)},
            {"param_mean_error", r.param_mean_error},
            {"param_error_std", r.param_error_std},
            {"accuracy_original", r.accuracy_original},
            {"accuracy_recovered", r.accuracy_recovered},
            {"acc_error_pct", r.acc_error_pct},
            {"acc_after_retraining", r.acc_after_retraining},
            {"diff_acc_pct", r.diff_acc_pct},
            {"bf_candidates", r.bf_candidates},
            {"notes", r.notes},
            {"original_params", r.original.values()},
            {"recovered_params", r.recovered.values()}};
}

inline const char *kCountermeasureHeader =
    "config_hash,seed,dummy_qubits,extra_layers,method,qubits,transpiled_gates,recovered_params,segments,"
    "mean_segment_distance,bf_candidates";

inline std::string csv_row(const CountermeasureRow &r, const std::string &hash, std::uint64_t seed) {
    std::ostringstream out;
    out << hash << "," << seed << "," << r.cm.dummy_qubits << "," << r.cm.extra_layers << "," << method_name(r.method)
        << "," << r.n_qubits << "," << r.transpiled_gates << "," << r.recovered_params << "," << r.segments << ","
        << num(r.mean_segment_distance) << "," << r.bf_candidates;
    return out.str();
}

inline json to_json(const CountermeasureRow &r) {
    return {{"dummy_qubits", r.cm.dummy_qubits},
            {"extra_layers", r.cm.extra_layers},
            {"method", method_name(r.method)},
            {"qubits", r.n_qubits},
            {"transpiled_gates", r.transpiled_gates},
            {"recovered_params", r.recovered_params},
            {"segments", r.segments},
            {"mean_segment_distance", r.mean_segment_distance},
            {"bf_candidates", r.bf_candidates}};
}

/// Concatenates report tables that share a header. Runs whose echoed
/// transpile settings differ cannot be merged.
struct MergeInput {
    std::string name;
    std::string csv;
    json config;
};

inline std::string merge(const std::vector<MergeInput> &inputs) {
    if (inputs.empty()) {
        throw ConfigError("report: nothing to merge");
    }
    std::string header;
    json transpile;
    std::string body;
    for (const auto &in : inputs) {
        if (!in.config.contains("transpile")) {
            throw ConfigError("report: " + in.name + " has no transpile settings");
        }
        if (transpile.is_null()) {
            transpile = in.config["transpile"];
        } else if (in.config["transpile"] != transpile) {
            throw ConfigError("report: " + in.name + " was compiled with different transpile options (" +
                              in.config["transpile"].dump() + " vs " + transpile.dump() + ")");
        }
        std::istringstream lines(in.csv);
        std::string line;
        if (!std::getline(lines, line)) {
            throw FormatError("report: " + in.name + " is empty");
        }
        if (header.empty()) {
            header = line;
        } else if (line != header) {
            throw FormatError("report: " + in.name + " has a different column layout");
        }
        while (std::getline(lines, line)) {
            if (!line.empty()) {
                body += line + "\n";
            }
        }
    }
    return header + "\n" + body;
}

}  // namespace qrev::report
