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
 * Parameter recovery: grid datasets mapping canonical transpiled angles back
 * to template angles, the per-template autoencoder, the grid brute force, the
 * end-to-end evaluation pipeline and the countermeasure benchmark.
 *
 * Every segment is described to the network by the three RZ angles of its
 * level-0 synthesis. Targets are reduced to one representative per class of
 * angle tuples that yield the same unitary up to phase, so the regression is
 * single-valued.
 */
#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qrev/circuit.hpp"
#include "qrev/error.hpp"
#include "qrev/neural.hpp"
#include "qrev/parallel.hpp"
#include "qrev/qnn.hpp"
#include "qrev/simulator.hpp"
#include "qrev/structlut.hpp"
#include "qrev/transpiler.hpp"

namespace qrev {

class Stopwatch {
  public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {
    }
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_;
};

/// Every ordering of distinct rotation kinds of length 1..max_len.
inline std::vector<RotationTemplate> all_orderings(std::size_t max_len = 3) {
    const std::array<GateKind, 3> rots = {GateKind::RX, GateKind::RY, GateKind::RZ};
    std::vector<RotationTemplate> out;
    std::vector<RotationTemplate> frontier = {{}};
    for (std::size_t len = 1; len <= std::min<std::size_t>(max_len, 3); ++len) {
        std::vector<RotationTemplate> next;
        for (const auto &t : frontier) {
            for (GateKind k : rots) {
                if (std::find(t.begin(), t.end(), k) == t.end()) {
                    RotationTemplate u = t;
                    u.push_back(k);
                    next.push_back(u);
                }
            }
        }
        out.insert(out.end(), next.begin(), next.end());
        frontier = std::move(next);
    }
    return out;
}

/// Execution-reversed template with the inverse of each rotation, i.e. the
/// ordering that undoes `t`.
inline RotationTemplate reversed_template(const RotationTemplate &t) {
    return RotationTemplate(t.rbegin(), t.rend());
}

// ---------------------------------------------------------------------------
// Angle grid and equivalent tuples.
// ---------------------------------------------------------------------------

/// {-pi + i step : i >= 0, value <= pi}, ascending.
inline std::vector<double> grid_axis(double step) {
    if (!(step > 0.0) || !std::isfinite(step)) {
        throw ConfigError("grid step must be positive");
    }
    std::vector<double> axis;
    for (std::size_t i = 0;; ++i) {
        double v = -kPi + static_cast<double>(i) * step;
        if (v > kPi) {
            break;
        }
        axis.push_back(v);
    }
    return axis;
}

/// Writes the i-th tuple of the k-fold grid in lexicographic order.
inline void grid_tuple(const std::vector<double> &axis, std::size_t k, std::size_t i, std::vector<double> &out) {
    out.resize(k);
    for (std::size_t j = k; j-- > 0;) {
        out[j] = axis[i % axis.size()];
        i /= axis.size();
    }
}

inline std::size_t grid_size(std::size_t points, std::size_t k) {
    std::size_t n = 1;
    for (std::size_t j = 0; j < k; ++j) {
        n *= points;
    }
    return n;
}

/// y -> sign * y + shift * pi, coordinatewise.
struct AngleSymmetry {
    std::vector<int> sign;
    std::vector<int> shift;

    std::vector<double> apply(std::span<const double> y) const {
        std::vector<double> out(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            out[i] = normalize_angle(sign[i] * y[i] + shift[i] * kPi);
        }
        return out;
    }
    bool operator==(const AngleSymmetry &) const = default;
};

/// Affine sign/shift maps under which the template unitary is unchanged up
/// to phase, found by testing all 4^k candidates on random probes. The
/// identity comes first.
inline std::vector<AngleSymmetry> symmetry_group(const RotationTemplate &templ) {
    validate_template(templ);
    const std::size_t k = templ.size();
    std::mt19937_64 rng(0x5eedULL);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    std::vector<std::vector<double>> probes(4, std::vector<double>(k));
    for (auto &p : probes) {
        for (double &v : p) {
            v = u(rng);
        }
    }
    std::vector<AngleSymmetry> group;
    for (std::size_t ms = 0; ms < (std::size_t{1} << k); ++ms) {
        for (std::size_t mt = 0; mt < (std::size_t{1} << k); ++mt) {
            AngleSymmetry g{std::vector<int>(k), std::vector<int>(k)};
            for (std::size_t i = 0; i < k; ++i) {
                g.sign[i] = (ms >> i & 1U) ? -1 : 1;
                g.shift[i] = static_cast<int>(mt >> i & 1U);
            }
            bool holds = true;
            for (const auto &p : probes) {
                if (phase_invariant_distance(template_unitary(templ, p), template_unitary(templ, g.apply(p))) > 1e-10) {
                    holds = false;
                    break;
                }
            }
            if (holds) {
                group.push_back(std::move(g));
            }
        }
    }
    return group;
}

/// The representative of y's class with the smallest sum of |angle|; ties
/// go to the lexicographically smallest tuple.
inline std::vector<double> principal_branch(const std::vector<AngleSymmetry> &group, std::span<const double> y) {
    std::vector<double> best(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        best[i] = normalize_angle(y[i]);
    }
    auto cost = [](const std::vector<double> &v) {
        double s = 0;
        for (double a : v) {
            s += std::abs(a);
        }
        return s;
    };
    double best_cost = cost(best);
    for (const AngleSymmetry &g : group) {
        std::vector<double> v = g.apply(y);
        double c = cost(v);
        if (c < best_cost - 1e-12 || (std::abs(c - best_cost) <= 1e-12 && v < best)) {
            best = std::move(v);
            best_cost = c;
        }
    }
    return best;
}

/// Network input for a single-qubit unitary: the RZ angles of its level-0
/// synthesis in execution order.
inline std::array<double, 3> canonical_input(const Mat2 &u) {
    ZsxAngles z = decompose_1q(u);
    return {z.c, z.b, z.a};
}

// ---------------------------------------------------------------------------
// Dataset.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxDatasetK = 3;

struct ParamDataset {
    RotationTemplate templ;
    std::size_t k = 0;
    double step = 0.1;
    /// Always level 0: every row has exactly three angles.
    TranspileOptions opts;
    nn::Matrix x;
    nn::Matrix y;
    /// Rows whose X also occurs with a different target.
    std::size_t duplicate_x = 0;
    std::vector<AngleSymmetry> symmetries;
};

namespace detail {

inline std::size_t count_duplicate_x(const nn::Matrix &x, const nn::Matrix &y) {
    const double scale = 1e8;
    const long long top = std::llround(kPi * scale);
    auto key_of = [&](Eigen::Index r) {
        std::array<long long, 3> key{};
        for (Eigen::Index c = 0; c < std::min<Eigen::Index>(x.cols(), 3); ++c) {
            long long q = std::llround(normalize_angle(x(r, c)) * scale);
            key[static_cast<std::size_t>(c)] = q == -top ? top : q;
        }
        return key;
    };
    std::map<std::array<long long, 3>, Eigen::Index> first;
    std::size_t dup = 0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        auto [it, inserted] = first.emplace(key_of(r), r);
        if (inserted) {
            continue;
        }
        double diff = 0;
        for (Eigen::Index c = 0; c < y.cols(); ++c) {
            diff = std::max(diff, wrapped_distance(y(r, c), y(it->second, c)));
        }
        if (diff > 1e-6) {
            ++dup;
        }
    }
    return dup;
}

}  // namespace detail

/// Lexicographic grid over the template's angles. X is read from the
/// level-0 transpilation of the bound template; Y is the principal branch of
/// the grid tuple.
inline ParamDataset gen_dataset(const RotationTemplate &templ, double step = 0.1, std::size_t workers = 1) {
    validate_template(templ);
    if (templ.size() > kMaxDatasetK) {
        throw ConfigError("dataset generation supports templates of at most 3 rotations (grid grows as 63^k)");
    }
    ParamDataset ds;
    ds.templ = templ;
    ds.k = templ.size();
    ds.step = step;
    ds.opts.optimization_level = 0;
    ds.symmetries = symmetry_group(templ);
    const std::vector<double> axis = grid_axis(step);
    const std::size_t n = grid_size(axis.size(), ds.k);
    ds.x.resize(static_cast<Eigen::Index>(n), 3);
    ds.y.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(ds.k));
    parallel_for(n, workers, [&](std::size_t i) {
        std::vector<double> t;
        grid_tuple(axis, ds.k, i, t);
        Circuit c(1);
        for (std::size_t j = 0; j < ds.k; ++j) {
            c.add(Gate::rotation(templ[j], 0, t[j]));
        }
        Circuit out = transpile(c, ds.opts).circuit;
        auto r = static_cast<Eigen::Index>(i);
        Eigen::Index col = 0;
        for (const Gate &g : out) {
            if (g.kind == GateKind::RZ) {
                ds.x(r, col++) = g.angle;
            }
        }
        std::vector<double> canon = principal_branch(ds.symmetries, t);
        for (std::size_t j = 0; j < ds.k; ++j) {
            ds.y(r, static_cast<Eigen::Index>(j)) = canon[j];
        }
    });
    ds.duplicate_x = detail::count_duplicate_x(ds.x, ds.y);
    return ds;
}

namespace detail {

inline void write_matrix(std::ostringstream &out, const char *name, const nn::Matrix &m) {
    out << "array " << name << " " << m.rows() << " " << m.cols() << "\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            out << (c ? " " : "") << format_double(m(r, c));
        }
        out << "\n";
    }
}

inline nn::Matrix read_matrix(std::istringstream &in, const char *name) {
    std::string tag, got;
    long rows = -1, cols = -1;
    if (!(in >> tag >> got >> rows >> cols) || tag != "array" || got != name || rows < 0 || cols < 0) {
        throw FormatError(std::string("dataset: expected array ") + name);
    }
    nn::Matrix m(rows, cols);
    for (long r = 0; r < rows; ++r) {
        for (long c = 0; c < cols; ++c) {
            if (!(in >> m(r, c))) {
                throw FormatError(std::string("dataset: truncated array ") + name);
            }
        }
    }
    return m;
}

}  // namespace detail

inline std::string save_dataset(const ParamDataset &ds) {
    std::ostringstream out;
    out << "dataset v1 template=" << join_kinds(ds.templ) << " step=" << format_double(ds.step)
        << " duplicates=" << ds.duplicate_x << "\n";
    detail::write_matrix(out, "x", ds.x);
    detail::write_matrix(out, "y", ds.y);
    return out.str();
}

inline ParamDataset load_dataset(const std::string &text) {
    std::istringstream in(text);
    std::string magic, version, templ, step, dups;
    if (!(in >> magic >> version >> templ >> step >> dups) || magic != "dataset" || version != "v1" ||
        templ.rfind("template=", 0) != 0 || step.rfind("step=", 0) != 0 || dups.rfind("duplicates=", 0) != 0) {
        throw FormatError("dataset: bad header");
    }
    ParamDataset ds;
    try {
        ds.templ = split_kinds(templ.substr(9));
        ds.step = std::stod(step.substr(5));
        ds.duplicate_x = std::stoull(dups.substr(11));
    } catch (const std::exception &e) {
        throw FormatError(std::string("dataset: bad header field: ") + e.what());
    }
    ds.k = ds.templ.size();
    ds.opts.optimization_level = 0;
    ds.x = detail::read_matrix(in, "x");
    ds.y = detail::read_matrix(in, "y");
    if (ds.x.rows() != ds.y.rows() || ds.x.cols() != 3 || static_cast<std::size_t>(ds.y.cols()) != ds.k) {
        throw FormatError("dataset: inconsistent array shapes");
    }
    ds.symmetries = symmetry_group(ds.templ);
    return ds;
}

// ---------------------------------------------------------------------------
// Autoencoder recovery.
// ---------------------------------------------------------------------------

struct RecoveryModel {
    RotationTemplate templ;
    nn::Mlp net;
    nn::TrainTrace trace;
    /// Mean wrapped error on the validation rows, over all coordinates.
    double heldout_error = 0.0;
    std::size_t samples = 0;
    std::size_t duplicate_x = 0;
    double dataset_seconds = 0.0;
    double training_seconds = 0.0;
};

using ModelSet = std::map<RotationTemplate, RecoveryModel>;

inline double mean_wrapped_error(const nn::Matrix &pred, const nn::Matrix &truth) {
    double s = 0;
    for (Eigen::Index r = 0; r < pred.rows(); ++r) {
        for (Eigen::Index c = 0; c < pred.cols(); ++c) {
            s += wrapped_distance(pred(r, c), truth(r, c));
        }
    }
    return s / static_cast<double>(pred.size());
}

inline RecoveryModel train_recovery_model(const ParamDataset &ds, const nn::TrainConfig &cfg) {
    if (ds.x.rows() == 0) {
        throw ConfigError("recovery dataset is empty");
    }
    RecoveryModel m;
    m.templ = ds.templ;
    m.samples = static_cast<std::size_t>(ds.x.rows());
    m.duplicate_x = ds.duplicate_x;
    m.net = nn::build_autoencoder(static_cast<std::size_t>(ds.x.cols()), ds.k, cfg.seed);
    Stopwatch watch;
    m.trace = nn::train(m.net, ds.x, ds.y, cfg);
    m.training_seconds = watch.seconds();
    nn::DataSplit split = nn::split_indices(m.samples, cfg.validation_fraction, cfg.seed);
    nn::Matrix xv = nn::detail::gather_rows(ds.x, split.validation, 0, split.validation.size());
    nn::Matrix yv = nn::detail::gather_rows(ds.y, split.validation, 0, split.validation.size());
    m.heldout_error = mean_wrapped_error(m.net.predict(xv), yv);
    return m;
}

/// Dataset generation plus training, timed.
inline RecoveryModel build_recovery_model(const RotationTemplate &templ, double step, const nn::TrainConfig &cfg,
                                          std::size_t workers = 1) {
    Stopwatch watch;
    ParamDataset ds = gen_dataset(templ, step, workers);
    double dataset_seconds = watch.seconds();
    RecoveryModel m = train_recovery_model(ds, cfg);
    m.dataset_seconds = dataset_seconds;
    return m;
}

/// Runs every segment through its template's network (one batch per
/// template) and places the outputs at the segment's tags.
inline ParamVector recover_params_ae(const RecoveredStructure &rs, const ModelSet &models) {
    std::vector<double> out(rs.ansatz.param_count(), 0.0);
    std::map<RotationTemplate, std::vector<const RecoveredSegment *>> by_template;
    for (const RecoveredSegment &s : rs.segments) {
        by_template[s.templ].push_back(&s);
    }
    for (const auto &[templ, segs] : by_template) {
        auto it = models.find(templ);
        if (it == models.end()) {
            throw ConfigError("no recovery model for template " + join_kinds(templ));
        }
        nn::Matrix x(static_cast<Eigen::Index>(segs.size()), 3);
        for (std::size_t i = 0; i < segs.size(); ++i) {
            auto in = canonical_input(segs[i]->unitary);
            for (Eigen::Index c = 0; c < 3; ++c) {
                x(static_cast<Eigen::Index>(i), c) = in[static_cast<std::size_t>(c)];
            }
        }
        nn::Matrix y = it->second.net.predict(x);
        for (std::size_t i = 0; i < segs.size(); ++i) {
            for (std::size_t j = 0; j < templ.size(); ++j) {
                out[segs[i]->first_tag + j] = y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
        }
    }
    return ParamVector(out);
}

// ---------------------------------------------------------------------------
// Brute force.
// ---------------------------------------------------------------------------

enum class BruteForceScope {
    /// Transpile only the candidate segment.
    segment,
    /// Re-transpile the whole recovered circuit for every candidate and read
    /// the segment back out of it, as a black-box comparison would.
    circuit,
};

inline std::string_view scope_name(BruteForceScope s) {
    return s == BruteForceScope::segment ? "segment" : "circuit";
}

inline BruteForceScope scope_from_name(std::string_view s) {
    if (s == "segment") {
        return BruteForceScope::segment;
    }
    if (s == "circuit") {
        return BruteForceScope::circuit;
    }
    throw ConfigError("unknown brute-force scope '" + std::string(s) + "'");
}

struct BruteForceOptions {
    double step = 0.1;
    BruteForceScope scope = BruteForceScope::segment;
    /// The victim's compilation options.
    TranspileOptions transpile;
    std::size_t workers = 1;
    /// Scores closer than this count as tied.
    double tie_tol = 1e-12;
};

struct BruteForceResult {
    ParamVector params;
    /// Candidate transpilations evaluated, over all segments.
    std::size_t candidates = 0;
    /// Best score of each segment, in segment order.
    std::vector<double> distances;
};

namespace detail {

struct PhysicalSlot {
    std::size_t wire = 0;
    std::size_t position = 0;
};

/// Where each recovered segment sits in the routed victim.
inline std::vector<PhysicalSlot> physical_slots(const RecoveredStructure &rs, const Circuit &victim) {
    Unrouted u = unroute(victim);
    std::vector<std::size_t> cnots_before(victim.size());
    std::vector<std::size_t> count(victim.n_qubits(), 0);
    for (std::size_t i = 0; i < victim.size(); ++i) {
        const Gate &g = victim[i];
        if (g.kind == GateKind::CNOT) {
            ++count[g.qubits[0]];
            ++count[g.qubits[1]];
        } else {
            cnots_before[i] = count[g.qubits[0]];
        }
    }
    std::map<std::pair<std::size_t, std::size_t>, PhysicalSlot> first_gate;
    std::vector<std::size_t> pos(u.circuit.n_qubits(), 0);
    for (std::size_t i = 0; i < u.circuit.size(); ++i) {
        const Gate &g = u.circuit[i];
        if (g.kind == GateKind::CNOT) {
            ++pos[g.qubits[0]];
            ++pos[g.qubits[1]];
            continue;
        }
        std::size_t src = u.source[i];
        first_gate.emplace(std::make_pair(g.qubits[0], pos[g.qubits[0]]),
                           PhysicalSlot{victim[src].qubits[0], cnots_before[src]});
    }
    std::vector<PhysicalSlot> out;
    for (const RecoveredSegment &s : rs.segments) {
        auto it = first_gate.find({s.wire, s.position});
        if (it == first_gate.end()) {
            throw StructureMismatch("segment on wire " + std::to_string(s.wire) + " position " +
                                    std::to_string(s.position) + " is not present in the victim");
        }
        out.push_back(it->second);
    }
    return out;
}

inline std::vector<std::pair<std::size_t, std::size_t>> cnot_skeleton(const Circuit &c) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const Gate &g : c) {
        if (g.kind == GateKind::CNOT) {
            out.emplace_back(g.qubits[0], g.qubits[1]);
        }
    }
    return out;
}

inline std::size_t argmin_with_ties(const std::vector<double> &scores, double tie_tol) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] < scores[best] - tie_tol) {
            best = i;
        }
    }
    return best;
}

}  // namespace detail

/// Per segment, in tag order: score every grid tuple of the segment's
/// template by 2 - |tr(U^dagger V)| against the victim segment and keep the
/// best, earliest tuple winning ties. Circuit scope fixes already-solved
/// segments at their recovered values and unsolved ones at zero.
inline BruteForceResult recover_params_bf(const RecoveredStructure &rs, const Circuit &victim,
                                          const BruteForceOptions &o) {
    if (victim.n_qubits() != rs.ansatz.n_qubits()) {
        throw DimensionError("victim and recovered structure differ in width");
    }
    const std::vector<double> axis = grid_axis(o.step);
    std::vector<double> p(rs.ansatz.param_count(), 0.0);
    std::vector<detail::PhysicalSlot> slots;
    if (o.scope == BruteForceScope::circuit) {
        slots = detail::physical_slots(rs, victim);
        Circuit probe = transpile(bind(rs.ansatz, ParamVector(p)), o.transpile).circuit;
        if (detail::cnot_skeleton(probe) != detail::cnot_skeleton(victim)) {
            throw StructureMismatch("recovered circuit does not route like the victim");
        }
    }
    TranspileOptions single = o.transpile;
    single.coupling.reset();

    BruteForceResult r;
    for (std::size_t si = 0; si < rs.segments.size(); ++si) {
        const RecoveredSegment &seg = rs.segments[si];
        const std::size_t k = seg.templ.size();
        const std::size_t n = grid_size(axis.size(), k);
        std::vector<double> scores = parallel_map<double>(n, o.workers, [&](std::size_t i) {
            std::vector<double> t;
            grid_tuple(axis, k, i, t);
            Mat2 u;
            if (o.scope == BruteForceScope::segment) {
                Circuit c(1);
                for (std::size_t j = 0; j < k; ++j) {
                    c.add(Gate::rotation(seg.templ[j], 0, t[j]));
                }
                u = product_1q(transpile(c, single).circuit.gates());
            } else {
                std::vector<double> q = p;
                std::copy(t.begin(), t.end(), q.begin() + static_cast<std::ptrdiff_t>(seg.first_tag));
                Circuit out = transpile(bind(rs.ansatz, ParamVector(q)), o.transpile).circuit;
                u = segment(out)[slots[si].wire][slots[si].position].unitary;
            }
            return phase_invariant_distance(u, seg.unitary);
        });
        std::size_t best = detail::argmin_with_ties(scores, o.tie_tol);
        std::vector<double> t;
        grid_tuple(axis, k, best, t);
        std::copy(t.begin(), t.end(), p.begin() + static_cast<std::ptrdiff_t>(seg.first_tag));
        r.candidates += n;
        r.distances.push_back(scores[best]);
    }
    r.params = ParamVector(p);
    return r;
}

// ---------------------------------------------------------------------------
// End-to-end evaluation.
// ---------------------------------------------------------------------------

enum class Method { autoencoder, brute_force };

inline std::string_view method_name(Method m) {
    return m == Method::autoencoder ? "ae" : "brute";
}

inline Method method_from_name(std::string_view s) {
    if (s == "ae" || s == "autoencoder") {
        return Method::autoencoder;
    }
    if (s == "brute" || s == "brute_force") {
        return Method::brute_force;
    }
    throw ConfigError("unknown recovery method '" + std::string(s) + "'");
}

struct EvalConfig {
    AnsatzSpec spec;
    TranspileOptions transpile;
    /// Adversary's LUT templates; empty means every ordering of up to three
    /// distinct rotations.
    std::vector<RotationTemplate> lut_templates;
    double eval_fraction = 0.25;
    std::size_t qnn_epochs = 20;
    double qnn_lr = 0.05;
    std::size_t retrain_epochs = 30;
    double retrain_lr = 0.05;
    double step = 0.1;
    nn::TrainConfig ae;
    BruteForceScope bf_scope = BruteForceScope::circuit;
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    std::vector<RotationTemplate> lut_or_default() const {
        return lut_templates.empty() ? all_orderings(3) : lut_templates;
    }
};

/// Wall-clock seconds per phase.
struct PhaseTimes {
    double victim_training = 0.0;
    double transpile = 0.0;
    double lut = 0.0;
    double structure = 0.0;
    double dataset = 0.0;
    double ae_training = 0.0;
    double recovery = 0.0;
    double retraining = 0.0;

    /// Adversary cost of parameter recovery: dataset, training, inference
    /// (or the whole grid search).
    double parameter_recovery() const {
        return dataset + ae_training + recovery;
    }
};

struct RecoveryReport {
    std::size_t n_qubits = 0;
    std::size_t n_layers = 0;
    std::size_t n_params = 0;
    RotationTemplate rotations;
    Method method = Method::autoencoder;
    double param_mean_error = 0.0;
    double param_error_std = 0.0;
    double accuracy_original = 0.0;
    double accuracy_recovered = 0.0;
    double acc_error_pct = 0.0;
    double acc_after_retraining = 0.0;
    double diff_acc_pct = 0.0;
    std::size_t bf_candidates = 0;
    std::vector<std::string> notes;
    /// Indexed by the victim's tags.
    ParamVector original;
    ParamVector recovered;
    PhaseTimes times;

    std::string classifier() const {
        return std::to_string(n_qubits) + "Q; " + std::to_string(n_layers) + "-layer";
    }
};

inline std::pair<double, double> mean_std(const std::vector<double> &v) {
    if (v.empty()) {
        return {0.0, 0.0};
    }
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) {
        ss += (x - mean) * (x - mean);
    }
    return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

/// Makes sure `models` has a network for every template in `rs`, training
/// the missing ones. Returns dataset and training seconds for the templates
/// used, whether trained now or earlier.
inline std::pair<double, double> ensure_models(const RecoveredStructure &rs, ModelSet &models, double step,
                                               const nn::TrainConfig &cfg, std::size_t workers) {
    std::map<RotationTemplate, bool> used;
    for (const auto &s : rs.segments) {
        used[s.templ] = true;
    }
    double dataset = 0, training = 0;
    for (const auto &[templ, flag] : used) {
        (void)flag;
        auto it = models.find(templ);
        if (it == models.end()) {
            it = models.emplace(templ, build_recovery_model(templ, step, cfg, workers)).first;
        }
        dataset += it->second.dataset_seconds;
        training += it->second.training_seconds;
    }
    return {dataset, training};
}

inline Lut build_eval_lut(const EvalConfig &cfg) {
    return build_lut(cfg.lut_or_default(), cfg.transpile.optimization_level, cfg.transpile.zero_tol);
}

/// Trains the victim, compiles it, recovers structure and parameters, and
/// scores the copy on the held-out split before and after retraining.
/// `models` caches networks across calls; null trains fresh ones.
inline RecoveryReport evaluate(const EvalConfig &cfg, const Dataset &data, Method method, ModelSet *models = nullptr,
                               const Lut *lut = nullptr) {
    cfg.spec.validate();
    Split split = split_dataset(data, cfg.eval_fraction, cfg.seed);
    if (split.train.empty() || split.eval.empty()) {
        throw ConfigError("evaluation needs nonempty train and eval splits");
    }
    RecoveryReport rep;
    rep.n_qubits = cfg.spec.n_qubits;
    rep.n_layers = cfg.spec.n_layers;
    rep.n_params = cfg.spec.param_count();
    rep.rotations = cfg.spec.rotations;
    rep.method = method;

    Stopwatch watch;
    TrainedQnn victim = train_qnn(cfg.spec, split.train, cfg.qnn_epochs, cfg.qnn_lr, cfg.seed, cfg.workers);
    rep.times.victim_training = watch.seconds();
    rep.original = victim.params;

    watch = Stopwatch();
    Circuit compiled = transpile(bind(victim.ansatz, victim.params), cfg.transpile).circuit;
    rep.times.transpile = watch.seconds();

    watch = Stopwatch();
    std::optional<Lut> own;
    if (!lut) {
        own = build_eval_lut(cfg);
        lut = &*own;
    }
    rep.times.lut = watch.seconds();

    watch = Stopwatch();
    RecoveredStructure rs = recover_structure(compiled, *lut);
    rep.times.structure = watch.seconds();
    rep.notes = rs.notes;
    auto map = match_structure(victim.ansatz, rs.ansatz);
    if (!map) {
        throw StructureMismatch("recovered structure of " + rep.classifier() + " differs from the victim");
    }

    ParamVector recovered;
    if (method == Method::autoencoder) {
        ModelSet local;
        ModelSet &set = models ? *models : local;
        auto [ds, tr] = ensure_models(rs, set, cfg.step, cfg.ae, cfg.workers);
        rep.times.dataset = ds;
        rep.times.ae_training = tr;
        watch = Stopwatch();
        recovered = recover_params_ae(rs, set);
        rep.times.recovery = watch.seconds();
    } else {
        BruteForceOptions o;
        o.step = cfg.step;
        o.scope = cfg.bf_scope;
        o.transpile = cfg.transpile;
        o.workers = cfg.workers;
        watch = Stopwatch();
        BruteForceResult bf = recover_params_bf(rs, compiled, o);
        rep.times.recovery = watch.seconds();
        rep.bf_candidates = bf.candidates;
        recovered = bf.params;
    }

    std::vector<double> by_victim_tag(rep.original.size());
    std::vector<double> errors(rep.original.size());
    for (std::size_t t = 0; t < by_victim_tag.size(); ++t) {
        by_victim_tag[t] = recovered[(*map)[t]];
        errors[t] = wrapped_distance(by_victim_tag[t], rep.original[t]);
    }
    rep.recovered = ParamVector(by_victim_tag);
    std::tie(rep.param_mean_error, rep.param_error_std) = mean_std(errors);

    TrainedQnn copy{cfg.spec, victim.ansatz, rep.recovered, {}};
    rep.accuracy_original = accuracy(victim, split.eval, cfg.workers);
    rep.accuracy_recovered = accuracy(copy, split.eval, cfg.workers);
    rep.acc_error_pct = 100.0 * std::abs(rep.accuracy_original - rep.accuracy_recovered);
    watch = Stopwatch();
    if (cfg.retrain_epochs > 0) {
        continue_training(copy, split.train, cfg.retrain_epochs, cfg.retrain_lr, cfg.workers);
    }
    rep.times.retraining = watch.seconds();
    rep.acc_after_retraining = accuracy(copy, split.eval, cfg.workers);
    rep.diff_acc_pct = 100.0 * std::abs(rep.accuracy_original - rep.acc_after_retraining);
    return rep;
}

// ---------------------------------------------------------------------------
// Countermeasures.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxCountermeasure = 4;

struct Countermeasure {
    std::size_t dummy_qubits = 0;
    std::size_t extra_layers = 0;

    void validate() const {
        if (dummy_qubits > kMaxCountermeasure || extra_layers > kMaxCountermeasure) {
            throw ConfigError("countermeasure sizes are capped at " + std::to_string(kMaxCountermeasure));
        }
    }
    bool operator==(const Countermeasure &) const = default;
};

namespace detail {

/// Victim entangler on wires [0, n) followed by a chain over the dummies.
inline std::vector<std::pair<std::size_t, std::size_t>> augmented_entangler(const AnsatzSpec &spec, std::size_t d) {
    Circuit c(spec.n_qubits + d);
    add_entangler(c, spec.n_qubits, spec.entangle);
    for (std::size_t i = 0; i + 1 < d; ++i) {
        c.add(Gate::cnot(spec.n_qubits + i, spec.n_qubits + i + 1));
    }
    return cnot_skeleton(c);
}

}  // namespace detail

/// Function-preserving augmentation of a bound victim. Dummy qubits sit on
/// wires n..n+d-1 with random rotations and a CNOT chain of their own. Extra
/// layers are e random layers L over all wires followed by L^dagger, so the
/// appended block is the identity.
inline Circuit augment(const AnsatzSpec &spec, const ParamVector &params, const Countermeasure &cm,
                       std::uint64_t seed) {
    spec.validate();
    cm.validate();
    if (params.size() != spec.param_count()) {
        throw DimensionError("augment: parameter count does not match the ansatz");
    }
    const std::size_t n = spec.n_qubits, d = cm.dummy_qubits, width = n + d;
    const std::size_t r = spec.rotations.size();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    const auto ent = detail::augmented_entangler(spec, d);
    Circuit c(width);
    for (std::size_t l = 0; l < spec.n_layers; ++l) {
        for (std::size_t q = 0; q < width; ++q) {
            for (std::size_t j = 0; j < r; ++j) {
                double a = q < n ? params[ansatz_tag(spec, l, q, j)] : u(rng);
                c.add(Gate::rotation(spec.rotations[j], q, a));
            }
        }
        for (auto [a, b] : ent) {
            c.add(Gate::cnot(a, b));
        }
    }
    std::vector<std::vector<double>> extra(cm.extra_layers, std::vector<double>(width * r));
    for (auto &layer : extra) {
        for (double &a : layer) {
            a = u(rng);
        }
    }
    for (const auto &layer : extra) {
        for (std::size_t q = 0; q < width; ++q) {
            for (std::size_t j = 0; j < r; ++j) {
                c.add(Gate::rotation(spec.rotations[j], q, layer[q * r + j]));
            }
        }
        for (auto [a, b] : ent) {
            c.add(Gate::cnot(a, b));
        }
    }
    for (auto it = extra.rbegin(); it != extra.rend(); ++it) {
        for (auto e = ent.rbegin(); e != ent.rend(); ++e) {
            c.add(Gate::cnot(e->first, e->second));
        }
        for (std::size_t q = 0; q < width; ++q) {
            for (std::size_t j = r; j-- > 0;) {
                c.add(Gate::rotation(spec.rotations[j], q, -(*it)[q * r + j]));
            }
        }
    }
    return c;
}

struct CountermeasureRow {
    Countermeasure cm;
    Method method = Method::autoencoder;
    std::size_t n_qubits = 0;
    std::size_t transpiled_gates = 0;
    std::size_t recovered_params = 0;
    std::size_t segments = 0;
    /// Mean over segments of the phase-invariant distance between the
    /// recovered template and the victim segment.
    double mean_segment_distance = 0.0;
    std::size_t bf_candidates = 0;
    PhaseTimes times;
};

/// Trains the base victim once, then recovers every augmented variant with
/// every method. Autoencoder rows charge the dataset and training time of
/// the networks they use, whether trained in this call or cached.
inline std::vector<CountermeasureRow> bench_countermeasures(const EvalConfig &cfg, const Dataset &data,
                                                            const std::vector<Countermeasure> &grid,
                                                            const std::vector<Method> &methods,
                                                            ModelSet *models = nullptr) {
    cfg.spec.validate();
    for (const auto &cm : grid) {
        cm.validate();
    }
    Split split = split_dataset(data, cfg.eval_fraction, cfg.seed);
    if (split.train.empty()) {
        throw ConfigError("countermeasure benchmark needs training data");
    }
    Stopwatch watch;
    TrainedQnn victim = train_qnn(cfg.spec, split.train, cfg.qnn_epochs, cfg.qnn_lr, cfg.seed, cfg.workers);
    const double victim_seconds = watch.seconds();
    watch = Stopwatch();
    Lut lut = build_eval_lut(cfg);
    const double lut_seconds = watch.seconds();
    ModelSet local;
    ModelSet &set = models ? *models : local;

    std::vector<CountermeasureRow> rows;
    for (const auto &cm : grid) {
        Circuit aug = augment(cfg.spec, victim.params, cm, cfg.seed + 1);
        watch = Stopwatch();
        Circuit compiled = transpile(aug, cfg.transpile).circuit;
        const double transpile_seconds = watch.seconds();
        for (Method method : methods) {
            CountermeasureRow row;
            row.cm = cm;
            row.method = method;
            row.n_qubits = aug.n_qubits();
            row.transpiled_gates = compiled.size();
            row.times.victim_training = victim_seconds;
            row.times.lut = lut_seconds;
            row.times.transpile = transpile_seconds;
            watch = Stopwatch();
            RecoveredStructure rs = recover_structure(compiled, lut);
            row.times.structure = watch.seconds();
            row.recovered_params = rs.ansatz.param_count();
            row.segments = rs.segments.size();
            ParamVector p;
            if (method == Method::autoencoder) {
                std::tie(row.times.dataset, row.times.ae_training) =
                    ensure_models(rs, set, cfg.step, cfg.ae, cfg.workers);
                watch = Stopwatch();
                p = recover_params_ae(rs, set);
                row.times.recovery = watch.seconds();
            } else {
                BruteForceOptions o;
                o.step = cfg.step;
                o.scope = cfg.bf_scope;
                o.transpile = cfg.transpile;
                o.workers = cfg.workers;
                watch = Stopwatch();
                BruteForceResult bf = recover_params_bf(rs, compiled, o);
                row.times.recovery = watch.seconds();
                row.bf_candidates = bf.candidates;
                p = bf.params;
            }
            double total = 0;
            for (const auto &s : rs.segments) {
                std::span<const double> a(p.values().data() + s.first_tag, s.templ.size());
                total += phase_invariant_distance(template_unitary(s.templ, a), s.unitary);
            }
            row.mean_segment_distance = rs.segments.empty() ? 0.0 : total / static_cast<double>(rs.segments.size());
            rows.push_back(row);
        }
    }
    return rows;
}

/// Classifier shapes whose parameter count pins them down: two qubits with
/// three rotations per qubit, four and eight qubits with two, one to three
/// layers each.
inline std::vector<AnsatzSpec> table_shapes() {
    std::vector<AnsatzSpec> out;
    for (std::size_t n : {2, 4, 8}) {
        for (std::size_t l = 1; l <= 3; ++l) {
            AnsatzSpec s;
            s.n_qubits = n;
            s.n_layers = l;
            s.rotations = n == 2 ? RotationTemplate{GateKind::RX, GateKind::RY, GateKind::RZ}
                                 : RotationTemplate{GateKind::RY, GateKind::RZ};
            out.push_back(s);
        }
    }
    return out;
}

}  // namespace qrev
