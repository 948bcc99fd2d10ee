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
 * Run configuration: a JSON document merged over defaults, overridable by
 * dotted paths, validated with field paths in every message, and hashed for
 * provenance. The hash ignores `workers` and `out`, which cannot change
 * results.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "qrev/error.hpp"
#include "qrev/qnn.hpp"
#include "qrev/recovery.hpp"

namespace qrev::config {

using json = nlohmann::json;

inline json defaults() {
    return json::parse(R"({
      "workers": 0,
      "out": "out",
      "ansatz": {"qubits": 2, "layers": 1, "rotations": ["rx", "ry", "rz"], "entangle": "linear_chain"},
      "shapes": [],
      "transpile": {"optimization_level": 1, "coupling": "linear", "zero_tol": 1e-9},
      "data": {"source": "synthetic", "samples": 120, "eval_fraction": 0.25,
               "images": "", "labels": "", "keep": [0, 1]},
      "qnn": {"epochs": 20, "lr": 0.05, "retrain_epochs": 30, "retrain_lr": 0.05},
      "recovery": {"methods": ["ae"], "step": 0.1, "bf_scope": "circuit", "lut_templates": []},
      "autoencoder": {"epochs": 100, "batch_size": 1024, "validation_fraction": 0.2, "lr": 0.001},
      "countermeasures": {"dummy_qubits": [0], "extra_layers": [0]}
    })");
}

struct DataConfig {
    std::string source = "synthetic";
    std::size_t samples = 120;
    std::string images;
    std::string labels;
    std::array<int, 2> keep{0, 1};
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::string out;
    EvalConfig eval;
    /// Shapes for evaluate; a single entry equal to eval.spec when the
    /// document lists none.
    std::vector<AnsatzSpec> shapes;
    std::vector<Method> methods;
    DataConfig data;
    std::vector<Countermeasure> countermeasures;
    /// Defaults merged with the file and overrides.
    json resolved;
};

namespace detail {

/// Overlays `patch` on `base`; keys absent from `base` are rejected.
inline void merge_into(json &base, const json &patch, const std::string &path) {
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        std::string field = path.empty() ? it.key() : path + "." + it.key();
        if (it.key() == "seed" && path.empty()) {
            base["seed"] = it.value();
            continue;
        }
        if (!base.contains(it.key())) {
            throw ConfigError("field '" + field + "': unknown setting");
        }
        json &slot = base[it.key()];
        if (slot.is_object() && it.value().is_object()) {
            merge_into(slot, it.value(), field);
        } else if (slot.is_object() != it.value().is_object()) {
            throw ConfigError("field '" + field + "': expected " + (slot.is_object() ? "an object" : "a value"));
        } else {
            slot = it.value();
        }
    }
}

/// `prefix` names the subtree `doc` was taken from, for error messages.
inline const json &at(const json &doc, const std::string &path, const std::string &prefix = "") {
    const json *cur = &doc;
    std::size_t start = 0;
    while (start <= path.size()) {
        std::size_t dot = path.find('.', start);
        std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!cur->is_object() || !cur->contains(key)) {
            throw ConfigError("field '" + prefix + path + "': required");
        }
        cur = &(*cur)[key];
        if (dot == std::string::npos) {
            break;
        }
        start = dot + 1;
    }
    return *cur;
}

template <typename T>
T get(const json &doc, const std::string &path, const std::string &prefix = "") {
    const json &v = at(doc, path, prefix);
    const std::string name = prefix + path;
    try {
        if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t> || std::is_same_v<T, int>) {
            if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0 && !std::is_same_v<T, int>)) {
                throw ConfigError("field '" + name + "': expected a non-negative integer");
            }
        } else if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) {
                throw ConfigError("field '" + name + "': expected a number");
            }
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) {
                throw ConfigError("field '" + name + "': expected a string");
            }
        }
        return v.get<T>();
    } catch (const json::exception &e) {
        throw ConfigError("field '" + name + "': " + e.what());
    }
}

inline RotationTemplate get_rotations(const json &v, const std::string &path) {
    if (!v.is_array() || v.empty()) {
        throw ConfigError("field '" + path + "': expected a nonempty list of rotation names");
    }
    RotationTemplate out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        auto k = v[i].is_string() ? gate_from_name(v[i].get<std::string>()) : std::nullopt;
        if (!k || !is_rotation(*k)) {
            throw ConfigError("field '" + path + "[" + std::to_string(i) + "]': expected rx, ry or rz");
        }
        out.push_back(*k);
    }
    return out;
}

inline AnsatzSpec get_ansatz(const json &v, const std::string &path) {
    AnsatzSpec s;
    const std::string prefix = path + ".";
    s.n_qubits = get<std::size_t>(v, "qubits", prefix);
    s.n_layers = get<std::size_t>(v, "layers", prefix);
    s.rotations = get_rotations(at(v, "rotations", prefix), path + ".rotations");
    if (v.contains("entangle")) {
        try {
            s.entangle = entangle_from_name(get<std::string>(v, "entangle", prefix));
        } catch (const Error &e) {
            throw ConfigError("field '" + path + ".entangle': " + e.what());
        }
    }
    try {
        s.validate();
    } catch (const ConfigError &e) {
        throw ConfigError("field '" + path + "': " + e.what());
    }
    return s;
}

inline std::vector<std::size_t> get_sizes(const json &doc, const std::string &path) {
    const json &v = at(doc, path);
    if (!v.is_array()) {
        throw ConfigError("field '" + path + "': expected a list of integers");
    }
    std::vector<std::size_t> out;
    for (const auto &e : v) {
        if (!e.is_number_integer() || e.get<long long>() < 0) {
            throw ConfigError("field '" + path + "': expected non-negative integers");
        }
        out.push_back(e.get<std::size_t>());
    }
    return out;
}

}  // namespace detail

/// Applies "a.b.c=value". The value is read as JSON when it parses and as a
/// bare string otherwise.
inline void apply_override(json &doc, const std::string &assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not of the form path=value");
    }
    std::string path = assignment.substr(0, eq);
    std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) {
        value = text;
    }
    json *cur = &doc;
    std::size_t start = 0;
    while (true) {
        std::size_t dot = path.find('.', start);
        std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        bool last = dot == std::string::npos;
        if (!cur->is_object() || (!cur->contains(key) && !(last && cur == &doc && key == "seed"))) {
            throw ConfigError("field '" + path + "': unknown setting");
        }
        if (last) {
            (*cur)[key] = value;
            return;
        }
        cur = &(*cur)[key];
        start = dot + 1;
    }
}

/// Reads every field, checks ranges and paths, and returns the typed view.
inline RunConfig from_json(const json &resolved) {
    using detail::get;
    RunConfig rc;
    rc.resolved = resolved;
    if (!resolved.contains("seed")) {
        throw ConfigError("field 'seed': required");
    }
    rc.seed = get<std::uint64_t>(resolved, "seed");
    std::size_t workers = get<std::size_t>(resolved, "workers");
    rc.workers = workers == 0 ? default_workers() : workers;
    rc.out = get<std::string>(resolved, "out");
    if (rc.out.empty()) {
        throw ConfigError("field 'out': must not be empty");
    }

    EvalConfig &e = rc.eval;
    e.seed = rc.seed;
    e.workers = rc.workers;
    e.spec = detail::get_ansatz(detail::at(resolved, "ansatz"), "ansatz");
    const json &shapes = detail::at(resolved, "shapes");
    if (!shapes.is_array()) {
        throw ConfigError("field 'shapes': expected a list");
    }
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        rc.shapes.push_back(detail::get_ansatz(shapes[i], "shapes[" + std::to_string(i) + "]"));
    }
    if (rc.shapes.empty()) {
        rc.shapes.push_back(e.spec);
    }

    int level = get<int>(resolved, "transpile.optimization_level");
    if (level != 0 && level != 1) {
        throw ConfigError("field 'transpile.optimization_level': must be 0 or 1");
    }
    e.transpile.optimization_level = level;
    e.transpile.zero_tol = get<double>(resolved, "transpile.zero_tol");
    if (!(e.transpile.zero_tol > 0)) {
        throw ConfigError("field 'transpile.zero_tol': must be positive");
    }
    const json &coupling = detail::at(resolved, "transpile.coupling");
    if (!(coupling.is_string() && coupling.get<std::string>() == "linear")) {
        throw ConfigError("field 'transpile.coupling': only \"linear\" is supported");
    }

    rc.data.source = get<std::string>(resolved, "data.source");
    rc.data.samples = get<std::size_t>(resolved, "data.samples");
    e.eval_fraction = get<double>(resolved, "data.eval_fraction");
    if (!(e.eval_fraction > 0 && e.eval_fraction < 1)) {
        throw ConfigError("field 'data.eval_fraction': must be in (0, 1)");
    }
    rc.data.images = get<std::string>(resolved, "data.images");
    rc.data.labels = get<std::string>(resolved, "data.labels");
    auto keep = detail::get_sizes(resolved, "data.keep");
    if (keep.size() != 2 || keep[0] == keep[1] || keep[0] > 255 || keep[1] > 255) {
        throw ConfigError("field 'data.keep': expected two distinct labels");
    }
    rc.data.keep = {static_cast<int>(keep[0]), static_cast<int>(keep[1])};
    if (rc.data.source == "idx") {
        for (const auto &[path, name] : {std::pair{rc.data.images, "data.images"}, {rc.data.labels, "data.labels"}}) {
            if (!std::filesystem::exists(path)) {
                throw ConfigError(std::string("field '") + name + "': file '" + path + "' does not exist");
            }
        }
    } else if (rc.data.source != "synthetic") {
        throw ConfigError("field 'data.source': expected \"synthetic\" or \"idx\"");
    }
    if (rc.data.samples < 4) {
        throw ConfigError("field 'data.samples': need at least 4 samples");
    }

    e.qnn_epochs = get<std::size_t>(resolved, "qnn.epochs");
    e.qnn_lr = get<double>(resolved, "qnn.lr");
    e.retrain_epochs = get<std::size_t>(resolved, "qnn.retrain_epochs");
    e.retrain_lr = get<double>(resolved, "qnn.retrain_lr");

    const json &methods = detail::at(resolved, "recovery.methods");
    if (!methods.is_array() || methods.empty()) {
        throw ConfigError("field 'recovery.methods': expected a nonempty list");
    }
    for (const auto &m : methods) {
        try {
            rc.methods.push_back(method_from_name(m.is_string() ? m.get<std::string>() : ""));
        } catch (const ConfigError &err) {
            throw ConfigError(std::string("field 'recovery.methods': ") + err.what());
        }
    }
    e.step = get<double>(resolved, "recovery.step");
    if (!(e.step > 0 && e.step <= kPi)) {
        throw ConfigError("field 'recovery.step': must be in (0, pi]");
    }
    try {
        e.bf_scope = scope_from_name(get<std::string>(resolved, "recovery.bf_scope"));
    } catch (const ConfigError &err) {
        throw ConfigError(std::string("field 'recovery.bf_scope': ") + err.what());
    }
    const json &templates = detail::at(resolved, "recovery.lut_templates");
    if (!templates.is_array()) {
        throw ConfigError("field 'recovery.lut_templates': expected a list");
    }
    for (std::size_t i = 0; i < templates.size(); ++i) {
        std::string path = "recovery.lut_templates[" + std::to_string(i) + "]";
        RotationTemplate t = detail::get_rotations(templates[i], path);
        try {
            validate_template(t);
        } catch (const ConfigError &err) {
            throw ConfigError("field '" + path + "': " + err.what());
        }
        e.lut_templates.push_back(t);
    }

    e.ae.epochs = get<std::size_t>(resolved, "autoencoder.epochs");
    e.ae.batch_size = get<std::size_t>(resolved, "autoencoder.batch_size");
    e.ae.validation_fraction = get<double>(resolved, "autoencoder.validation_fraction");
    e.ae.lr = get<double>(resolved, "autoencoder.lr");
    e.ae.seed = rc.seed;
    if (e.ae.batch_size == 0) {
        throw ConfigError("field 'autoencoder.batch_size': must be positive");
    }
    if (!(e.ae.validation_fraction > 0 && e.ae.validation_fraction < 1)) {
        throw ConfigError("field 'autoencoder.validation_fraction': must be in (0, 1)");
    }

    auto dummies = detail::get_sizes(resolved, "countermeasures.dummy_qubits");
    auto extras = detail::get_sizes(resolved, "countermeasures.extra_layers");
    for (std::size_t d : dummies) {
        for (std::size_t x : extras) {
            Countermeasure cm{d, x};
            try {
                cm.validate();
            } catch (const ConfigError &err) {
                throw ConfigError(std::string("field 'countermeasures': ") + err.what());
            }
            rc.countermeasures.push_back(cm);
        }
    }
    return rc;
}

/// Defaults, then the document, then each override in order. A top-level
/// "$comment" key in the document is ignored.
inline RunConfig resolve(const json &document, const std::vector<std::string> &overrides) {
    if (!document.is_object()) {
        throw ConfigError("configuration must be a JSON object");
    }
    json doc = defaults();
    json body = document;
    // Free-text annotations (license headers, notes) never reach the run.
    body.erase("$comment");
    detail::merge_into(doc, body, "");
    for (const auto &o : overrides) {
        apply_override(doc, o);
    }
    return from_json(doc);
}

/// FNV-1a over the canonical dump, without `workers` and `out`.
inline std::uint64_t config_hash(const json &resolved) {
    json copy = resolved;
    copy.erase("workers");
    copy.erase("out");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : copy.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Synthetic blobs or an IDX pair, capped at data.samples, with one feature
/// per qubit.
inline Dataset load_data(const RunConfig &rc, std::size_t n_qubits) {
    if (rc.data.source == "synthetic") {
        return make_blobs(n_qubits, rc.data.samples, rc.seed);
    }
    Dataset d = load_idx(rc.data.images, rc.data.labels, rc.data.keep, n_qubits);
    if (d.size() > rc.data.samples) {
        d.resize(rc.data.samples);
    }
    return d;
}

}  // namespace qrev::config
