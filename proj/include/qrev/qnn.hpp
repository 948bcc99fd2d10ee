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
 * Victim binary classifiers: layered rotation ansatz with a CNOT chain,
 * RY(pi f) angle encoding, <Z> readout on qubit 0, and full-batch gradient
 * descent with parameter-shift gradients.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "qrev/circuit.hpp"
#include "qrev/error.hpp"
#include "qrev/parallel.hpp"
#include "qrev/simulator.hpp"

namespace qrev {

enum class Entangle { linear_chain, ring, none };

inline std::string_view entangle_name(Entangle e) {
    switch (e) {
        case Entangle::linear_chain: return "linear_chain";
        case Entangle::ring: return "ring";
        case Entangle::none: return "none";
    }
    return "?";
}

inline Entangle entangle_from_name(std::string_view s) {
    for (Entangle e : {Entangle::linear_chain, Entangle::ring, Entangle::none}) {
        if (entangle_name(e) == s) {
            return e;
        }
    }
    throw ConfigError("unknown entanglement '" + std::string(s) + "'");
}

struct AnsatzSpec {
    std::size_t n_qubits = 2;
    std::size_t n_layers = 1;
    std::vector<GateKind> rotations = {GateKind::RX, GateKind::RY, GateKind::RZ};
    Entangle entangle = Entangle::linear_chain;

    std::size_t param_count() const {
        return n_qubits * n_layers * rotations.size();
    }

    void validate() const {
        if (n_qubits == 0 || n_qubits > kMaxStatevectorQubits) {
            throw ConfigError("ansatz.qubits must be in 1.." + std::to_string(kMaxStatevectorQubits));
        }
        if (n_layers == 0) {
            throw ConfigError("ansatz.layers must be positive");
        }
        if (rotations.empty()) {
            throw ConfigError("ansatz.rotations must be nonempty");
        }
        for (GateKind k : rotations) {
            if (!is_rotation(k)) {
                throw ConfigError("ansatz.rotations may only contain rx, ry, rz");
            }
        }
    }
};

/// Tag of rotation r on qubit q in layer l.
inline std::size_t ansatz_tag(const AnsatzSpec &s, std::size_t layer, std::size_t q, std::size_t r) {
    return (layer * s.n_qubits + q) * s.rotations.size() + r;
}

inline void add_entangler(Circuit &c, std::size_t n, Entangle e) {
    if (e == Entangle::none || n < 2) {
        return;
    }
    for (std::size_t q = 0; q + 1 < n; ++q) {
        c.add(Gate::cnot(q, q + 1));
    }
    if (e == Entangle::ring && n > 2) {
        c.add(Gate::cnot(n - 1, 0));
    }
}

inline Circuit build_ansatz(const AnsatzSpec &s) {
    s.validate();
    Circuit c(s.n_qubits);
    for (std::size_t l = 0; l < s.n_layers; ++l) {
        for (std::size_t q = 0; q < s.n_qubits; ++q) {
            for (std::size_t r = 0; r < s.rotations.size(); ++r) {
                c.add(Gate::tagged(s.rotations[r], q, ansatz_tag(s, l, q, r)));
            }
        }
        add_entangler(c, s.n_qubits, s.entangle);
    }
    return c;
}

struct Sample {
    std::vector<double> features;
    int label = 0;
};

using Dataset = std::vector<Sample>;

inline double target_of(int label) {
    return label == 0 ? 1.0 : -1.0;
}

/// RY(pi f_i) on qubit i.
inline Circuit encode(const std::vector<double> &features, std::size_t n_qubits) {
    if (features.size() != n_qubits) {
        throw DimensionError("expected " + std::to_string(n_qubits) + " features, got " +
                             std::to_string(features.size()));
    }
    Circuit c(n_qubits);
    for (std::size_t i = 0; i < n_qubits; ++i) {
        double f = features[i];
        if (!(f >= 0.0 && f <= 1.0)) {
            throw ConfigError("feature " + std::to_string(i) + " = " + format_double(f) + " outside [0, 1]");
        }
        c.add(Gate::ry(i, kPi * f));
    }
    return c;
}

inline Statevector encoded_state(const Sample &s, std::size_t n_qubits) {
    return run(encode(s.features, n_qubits), Statevector(n_qubits));
}

struct EpochLog {
    double loss = 0.0;
    double accuracy = 0.0;
};

struct TrainedQnn {
    AnsatzSpec spec;
    Circuit ansatz;
    ParamVector params;
    std::vector<EpochLog> log;
};

struct Prediction {
    double expval = 0.0;
    int label = 0;
};

inline Prediction predict_bound(const Circuit &bound, const Statevector &encoded) {
    double e = run(bound, encoded).expval_z(0);
    return {e, e >= 0.0 ? 0 : 1};
}

inline Prediction predict(const TrainedQnn &q, const Sample &s) {
    return predict_bound(bind(q.ansatz, q.params), encoded_state(s, q.spec.n_qubits));
}

inline double accuracy(const TrainedQnn &q, const Dataset &data, std::size_t workers = 1) {
    if (data.empty()) {
        throw ConfigError("accuracy needs a nonempty dataset");
    }
    Circuit bound = bind(q.ansatz, q.params);
    auto hits = parallel_map<int>(data.size(), workers, [&](std::size_t i) {
        return predict_bound(bound, encoded_state(data[i], q.spec.n_qubits)).label == data[i].label ? 1 : 0;
    });
    std::size_t total = 0;
    for (int h : hits) {
        total += static_cast<std::size_t>(h);
    }
    return static_cast<double>(total) / static_cast<double>(data.size());
}

/// Mean squared error of <Z_0> against the +-1 targets.
inline double qnn_loss(const Circuit &ansatz, const std::vector<double> &params, const std::vector<Statevector> &enc,
                       const Dataset &data, std::size_t workers = 1) {
    Circuit bound = bind(ansatz, ParamVector(params));
    auto sq = parallel_map<double>(data.size(), workers, [&](std::size_t i) {
        double d = predict_bound(bound, enc[i]).expval - target_of(data[i].label);
        return d * d;
    });
    double s = 0;
    for (double v : sq) {
        s += v;
    }
    return s / static_cast<double>(data.size());
}

/// d<Z_0>/d theta_j by the parameter-shift rule, for a circuit in which each
/// tag drives exactly one rotation.
inline std::vector<double> expval_gradient(const Circuit &ansatz, const std::vector<double> &params,
                                           const Statevector &init) {
    std::vector<double> g(params.size());
    std::vector<double> p = params;
    for (std::size_t j = 0; j < params.size(); ++j) {
        p[j] = params[j] + kPi / 2;
        double plus = run(bind(ansatz, ParamVector(p)), init).expval_z(0);
        p[j] = params[j] - kPi / 2;
        double minus = run(bind(ansatz, ParamVector(p)), init).expval_z(0);
        p[j] = params[j];
        g[j] = (plus - minus) / 2;
    }
    return g;
}

/// Gradient of qnn_loss. Per-sample terms are reduced in sample order.
inline std::vector<double> qnn_loss_gradient(const Circuit &ansatz, const std::vector<double> &params,
                                             const std::vector<Statevector> &enc, const Dataset &data,
                                             std::size_t workers = 1) {
    Circuit bound = bind(ansatz, ParamVector(params));
    auto per_sample = parallel_map<std::vector<double>>(data.size(), workers, [&](std::size_t i) {
        double e = predict_bound(bound, enc[i]).expval;
        std::vector<double> g = expval_gradient(ansatz, params, enc[i]);
        double scale = 2.0 * (e - target_of(data[i].label)) / static_cast<double>(data.size());
        for (double &v : g) {
            v *= scale;
        }
        return g;
    });
    std::vector<double> total(params.size(), 0.0);
    for (const auto &g : per_sample) {
        for (std::size_t j = 0; j < g.size(); ++j) {
            total[j] += g[j];
        }
    }
    return total;
}

inline std::vector<double> initial_qnn_params(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> p(n);
    for (double &v : p) {
        v = 0.01 * nd(rng);
    }
    return p;
}

/// Full-batch gradient descent from q.params; appends to q.log.
inline void continue_training(TrainedQnn &q, const Dataset &data, std::size_t epochs, double lr,
                              std::size_t workers = 1) {
    if (data.empty()) {
        throw ConfigError("training needs a nonempty dataset");
    }
    std::vector<Statevector> enc;
    enc.reserve(data.size());
    for (const Sample &s : data) {
        enc.push_back(encoded_state(s, q.spec.n_qubits));
    }
    std::vector<double> p = q.params.values();
    for (std::size_t e = 0; e < epochs; ++e) {
        std::vector<double> g = qnn_loss_gradient(q.ansatz, p, enc, data, workers);
        for (std::size_t j = 0; j < p.size(); ++j) {
            p[j] -= lr * g[j];
        }
        q.params = ParamVector(p);
        p = q.params.values();
        q.log.push_back({qnn_loss(q.ansatz, p, enc, data, workers), accuracy(q, data, workers)});
    }
}

inline TrainedQnn train_qnn(const AnsatzSpec &spec, const Dataset &data, std::size_t epochs, double lr = 0.05,
                            std::uint64_t seed = 0, std::size_t workers = 1) {
    TrainedQnn q;
    q.spec = spec;
    q.ansatz = build_ansatz(spec);
    q.params = ParamVector(initial_qnn_params(spec.param_count(), seed));
    continue_training(q, data, epochs, lr, workers);
    return q;
}

// ---------------------------------------------------------------------------
// Data.
// ---------------------------------------------------------------------------

/// Two seeded Gaussian blobs in [0,1]^n: label 0 around 0.25, label 1 around
/// 0.75, sigma 0.12, clipped. Labels alternate.
inline Dataset make_blobs(std::size_t n_features, std::size_t n_samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.12);
    Dataset d(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        d[i].label = static_cast<int>(i % 2);
        double centre = d[i].label == 0 ? 0.25 : 0.75;
        d[i].features.resize(n_features);
        for (double &f : d[i].features) {
            f = std::clamp(centre + nd(rng), 0.0, 1.0);
        }
    }
    return d;
}

struct Split {
    Dataset train;
    Dataset eval;
};

/// Seeded shuffle, then the last floor(n * eval_fraction) samples are held out.
inline Split split_dataset(const Dataset &d, double eval_fraction, std::uint64_t seed) {
    if (!(eval_fraction >= 0.0 && eval_fraction < 1.0)) {
        throw ConfigError("eval_fraction must be in [0, 1)");
    }
    std::vector<std::size_t> idx(d.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        idx[i] = i;
    }
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_eval = static_cast<std::size_t>(std::floor(static_cast<double>(d.size()) * eval_fraction + 1e-9));
    Split s;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        (i < idx.size() - n_eval ? s.train : s.eval).push_back(d[idx[i]]);
    }
    return s;
}

namespace detail {

inline std::vector<unsigned char> read_bytes(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw FormatError("cannot open " + path);
    }
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline std::uint32_t be32(const std::vector<unsigned char> &b, std::size_t off, const std::string &path) {
    if (off + 4 > b.size()) {
        throw FormatError(path + ": truncated header");
    }
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
           std::uint32_t{b[off + 3]};
}

}  // namespace detail

/// Pooling grid for n features: rows * cols == n with rows the largest
/// divisor not above sqrt(n).
inline std::pair<std::size_t, std::size_t> pooling_grid(std::size_t n) {
    std::size_t rows = 1;
    for (std::size_t r = 1; r * r <= n; ++r) {
        if (n % r == 0) {
            rows = r;
        }
    }
    return {rows, n / rows};
}

/// Average-pools an h x w byte image into n block means scaled to [0,1].
inline std::vector<double> pool_image(const unsigned char *pixels, std::size_t h, std::size_t w, std::size_t n) {
    auto [rows, cols] = pooling_grid(n);
    if (rows > h || cols > w) {
        throw ConfigError("cannot pool a " + std::to_string(h) + "x" + std::to_string(w) + " image into " +
                          std::to_string(n) + " blocks");
    }
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t br = 0; br < rows; ++br) {
        for (std::size_t bc = 0; bc < cols; ++bc) {
            std::size_t r0 = br * h / rows, r1 = (br + 1) * h / rows;
            std::size_t c0 = bc * w / cols, c1 = (bc + 1) * w / cols;
            double sum = 0;
            for (std::size_t r = r0; r < r1; ++r) {
                for (std::size_t c = c0; c < c1; ++c) {
                    sum += pixels[r * w + c];
                }
            }
            out.push_back(sum / (255.0 * static_cast<double>((r1 - r0) * (c1 - c0))));
        }
    }
    return out;
}

/// Reads an IDX image/label pair, keeps labels a and b (relabelled 0 and 1)
/// and pools each image into n_features block means.
inline Dataset load_idx(const std::string &images_path, const std::string &labels_path, std::array<int, 2> keep,
                        std::size_t n_features) {
    auto img = detail::read_bytes(images_path);
    auto lab = detail::read_bytes(labels_path);
    if (detail::be32(img, 0, images_path) != 0x00000803U) {
        throw FormatError(images_path + ": bad magic, expected 0x00000803");
    }
    if (detail::be32(lab, 0, labels_path) != 0x00000801U) {
        throw FormatError(labels_path + ": bad magic, expected 0x00000801");
    }
    std::size_t count = detail::be32(img, 4, images_path);
    std::size_t h = detail::be32(img, 8, images_path);
    std::size_t w = detail::be32(img, 12, images_path);
    std::size_t n_labels = detail::be32(lab, 4, labels_path);
    if (count != n_labels) {
        throw FormatError("image count " + std::to_string(count) + " != label count " + std::to_string(n_labels));
    }
    if (img.size() < 16 + count * h * w) {
        throw FormatError(images_path + ": truncated pixel data");
    }
    if (lab.size() < 8 + count) {
        throw FormatError(labels_path + ": truncated label data");
    }
    Dataset d;
    for (std::size_t i = 0; i < count; ++i) {
        int l = lab[8 + i];
        if (l != keep[0] && l != keep[1]) {
            continue;
        }
        d.push_back({pool_image(img.data() + 16 + i * h * w, h, w, n_features), l == keep[0] ? 0 : 1});
    }
    return d;
}

}  // namespace qrev
