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
 * Structure recovery from transpiled circuits.
 *
 * A LUT maps the gate-kind signature of a single-qubit run (the basis gates on
 * one wire between two CNOTs) back to the rotation ordering that produced it.
 * Signatures are generated by transpiling every template with probe angles.
 *
 * Several templates can share a signature. For example RY(t).RZ(p) lowers to
 * sx,rz,sx,rz when t > 0 but to the full rz,sx,rz,sx,rz pattern when t < 0,
 * which is also what RX.RY.RZ lowers to. Such entries keep every candidate and
 * recover_structure picks the smallest template whose rotations can reproduce
 * the segment's unitary.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qrev/circuit.hpp"
#include "qrev/error.hpp"
#include "qrev/simulator.hpp"
#include "qrev/transpiler.hpp"

namespace qrev {

using Signature = std::vector<GateKind>;
using RotationTemplate = std::vector<GateKind>;

struct LutEntry {
    Signature signature;
    /// Primary template: first candidate.
    RotationTemplate templ;
    std::size_t k = 0;
    /// Canonical slot (0: before the first SX, 1: between, 2: after) of each
    /// RZ in the signature. Slots not listed are fixed at zero.
    std::vector<std::size_t> rz_slots;
    /// Every template producing this signature, ascending k then priority.
    /// Templates that produced it only from degenerate probe angles follow
    /// the generic ones.
    std::vector<RotationTemplate> candidates;
    /// Candidates disagree on k.
    bool ambiguous = false;

    bool operator==(const LutEntry &) const = default;
};

struct Lut {
    std::map<Signature, LutEntry> entries;
    std::vector<RotationTemplate> templates;
    int optimization_level = 1;
    double zero_tol = 1e-9;

    const LutEntry *find(const Signature &s) const {
        auto it = entries.find(s);
        return it == entries.end() ? nullptr : &it->second;
    }

    bool operator==(const Lut &) const = default;
};

/// One maximal single-qubit run on a wire.
struct Segment {
    std::size_t wire = 0;
    /// Index of the run on its wire; CNOT endpoints advance it.
    std::size_t position = 0;
    Signature kinds;
    std::vector<double> rz_angles;
    /// Fused unitary of the run (identity when empty).
    Mat2 unitary = kIdentity2;
};

struct RecoveredSegment {
    std::size_t wire = 0;
    std::size_t position = 0;
    RotationTemplate templ;
    std::size_t first_tag = 0;
    Signature signature;
    std::vector<double> rz_angles;
    std::vector<std::size_t> rz_slots;
    Mat2 unitary = kIdentity2;
};

struct RecoveredStructure {
    Circuit ansatz;
    /// Segments in tag order; together they cover tags 0..param_count-1.
    std::vector<RecoveredSegment> segments;
    /// Logical qubit l of the recovered circuit sits on physical layout[l].
    std::vector<std::size_t> layout;
    /// Human-readable notes on candidate resolution.
    std::vector<std::string> notes;
};

struct RecoverOptions {
    /// Resolve multi-candidate entries by fitting; when false an entry whose
    /// candidates differ in k raises AmbiguousSegment.
    bool resolve_ambiguity = true;
    /// Largest phase-invariant distance accepted as an exact fit.
    double fit_tol = 1e-12;
};

inline const std::vector<double> &generic_probe_angles() {
    static const std::vector<double> v = {0.41, -0.77, 1.13};
    return v;
}

inline const std::vector<double> &degenerate_probe_angles() {
    static const std::vector<double> v = {0.0, kPi / 2, -kPi / 2, kPi};
    return v;
}

/// Templates ordered for tie-breaking: RX,RY,RZ first, RY,RZ second, the rest
/// in their given order.
inline std::vector<RotationTemplate> priority_order(const std::vector<RotationTemplate> &templates) {
    const RotationTemplate xyz = {GateKind::RX, GateKind::RY, GateKind::RZ};
    const RotationTemplate yz = {GateKind::RY, GateKind::RZ};
    std::vector<RotationTemplate> out;
    for (const auto &preferred : {xyz, yz}) {
        if (std::find(templates.begin(), templates.end(), preferred) != templates.end()) {
            out.push_back(preferred);
        }
    }
    for (const auto &t : templates) {
        if (std::find(out.begin(), out.end(), t) == out.end()) {
            out.push_back(t);
        }
    }
    return out;
}

inline Mat2 template_unitary(const RotationTemplate &templ, std::span<const double> angles) {
    Mat2 u = kIdentity2;
    for (std::size_t i = 0; i < templ.size(); ++i) {
        u = gate_matrix(Gate::rotation(templ[i], 0, angles[i])) * u;
    }
    return u;
}

inline std::vector<std::size_t> rz_slots_of(const Signature &s) {
    std::vector<std::size_t> slots;
    std::size_t sx_seen = 0;
    for (GateKind k : s) {
        if (k == GateKind::SX) {
            ++sx_seen;
        } else if (k == GateKind::RZ) {
            slots.push_back(std::min<std::size_t>(sx_seen, 2));
        }
    }
    return slots;
}

inline Signature signature_of(const RotationTemplate &templ, std::span<const double> angles, int level,
                              double zero_tol) {
    Circuit c(1);
    for (std::size_t i = 0; i < templ.size(); ++i) {
        c.add(Gate::rotation(templ[i], 0, angles[i]));
    }
    TranspileOptions opts;
    opts.optimization_level = level;
    opts.zero_tol = zero_tol;
    Signature s;
    for (const Gate &g : transpile(c, opts).circuit) {
        s.push_back(g.kind);
    }
    return s;
}

inline void validate_template(const RotationTemplate &t) {
    if (t.empty() || t.size() > 4) {
        throw ConfigError("template length must be in 1..4, got " + std::to_string(t.size()));
    }
    for (GateKind k : t) {
        if (!is_rotation(k)) {
            throw ConfigError("template contains non-rotation gate " + std::string(gate_name(k)));
        }
    }
}

inline Lut build_lut(const std::vector<RotationTemplate> &templates, int optimization_level = 1,
                     double zero_tol = 1e-9) {
    if (templates.empty()) {
        throw ConfigError("build_lut needs at least one template");
    }
    for (const auto &t : templates) {
        validate_template(t);
    }
    Lut lut;
    lut.templates = priority_order(templates);
    lut.optimization_level = optimization_level;
    lut.zero_tol = zero_tol;

    std::vector<double> all = generic_probe_angles();
    const auto &degenerate = degenerate_probe_angles();
    all.insert(all.end(), degenerate.begin(), degenerate.end());
    const std::size_t n_generic = generic_probe_angles().size();

    // signature -> (template index, generic?)
    std::map<Signature, std::vector<std::pair<std::size_t, bool>>> seen;
    for (std::size_t ti = 0; ti < lut.templates.size(); ++ti) {
        const auto &t = lut.templates[ti];
        std::map<Signature, bool> from_this;
        std::vector<std::size_t> idx(t.size(), 0);
        std::vector<double> angles(t.size());
        while (true) {
            bool generic = true;
            for (std::size_t i = 0; i < t.size(); ++i) {
                angles[i] = all[idx[i]];
                generic = generic && idx[i] < n_generic;
            }
            Signature s = signature_of(t, angles, optimization_level, zero_tol);
            // Identity runs leave no gates, so they never reach a lookup.
            if (!s.empty()) {
                from_this[s] = from_this[s] || generic;
            }
            std::size_t d = 0;
            while (d < t.size() && ++idx[d] == all.size()) {
                idx[d++] = 0;
            }
            if (d == t.size()) {
                break;
            }
        }
        for (const auto &[s, generic] : from_this) {
            seen[s].push_back({ti, generic});
        }
    }

    for (auto &[s, producers] : seen) {
        std::stable_sort(producers.begin(), producers.end(), [&](const auto &a, const auto &b) {
            if (a.second != b.second) {
                return a.second;
            }
            return lut.templates[a.first].size() < lut.templates[b.first].size();
        });
        LutEntry e;
        e.signature = s;
        e.rz_slots = rz_slots_of(s);
        for (const auto &[ti, generic] : producers) {
            e.candidates.push_back(lut.templates[ti]);
        }
        for (const auto &c : e.candidates) {
            e.ambiguous = e.ambiguous || c.size() != e.candidates.front().size();
        }
        e.templ = e.candidates.front();
        e.k = e.templ.size();
        lut.entries.emplace(s, std::move(e));
    }
    return lut;
}

// ---------------------------------------------------------------------------
// Persistence: one record per line.
//
//   lut v1 optimization_level=1 zero_tol=1.0000000000000001e-09
//   template rx,ry,rz
//   entry sig=rz,sx,rz,sx,rz k=3 slots=0,1,2 ambiguous=1 cand=rx,ry,rz;ry,rz
// ---------------------------------------------------------------------------

namespace detail {

inline std::string join_sizes(const std::vector<std::size_t> &v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i ? "," : "") + std::to_string(v[i]);
    }
    return out;
}

inline std::vector<std::size_t> split_sizes(const std::string &text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoul(tok, &used));
            if (used != tok.size()) {
                throw std::invalid_argument(tok);
            }
        } catch (const std::logic_error &) {
            throw FormatError("bad integer list '" + text + "'");
        }
    }
    return out;
}

inline std::map<std::string, std::string> key_values(std::istringstream &in, std::size_t line_no) {
    std::map<std::string, std::string> kv;
    std::string tok;
    while (in >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) {
            throw FormatError("line " + std::to_string(line_no) + ": expected key=value, got '" + tok + "'");
        }
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

inline const std::string &require(const std::map<std::string, std::string> &kv, const std::string &key,
                                  std::size_t line_no) {
    auto it = kv.find(key);
    if (it == kv.end()) {
        throw FormatError("line " + std::to_string(line_no) + ": missing '" + key + "'");
    }
    return it->second;
}

}  // namespace detail

inline std::string serialize(const Lut &lut) {
    std::ostringstream out;
    out << "lut v1 optimization_level=" << lut.optimization_level << " zero_tol=" << format_double(lut.zero_tol)
        << "\n";
    for (const auto &t : lut.templates) {
        out << "template " << join_kinds(t) << "\n";
    }
    for (const auto &[s, e] : lut.entries) {
        out << "entry sig=" << join_kinds(s) << " k=" << e.k << " slots=" << detail::join_sizes(e.rz_slots)
            << " ambiguous=" << (e.ambiguous ? 1 : 0) << " cand=";
        for (std::size_t i = 0; i < e.candidates.size(); ++i) {
            out << (i ? ";" : "") << join_kinds(e.candidates[i]);
        }
        out << "\n";
    }
    return out.str();
}

inline Lut parse_lut(const std::string &text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    Lut lut;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string head;
        if (!(ls >> head)) {
            continue;
        }
        if (!header) {
            std::string version;
            ls >> version;
            if (head != "lut" || version != "v1") {
                throw FormatError("line " + std::to_string(line_no) + ": expected 'lut v1' header");
            }
            auto kv = detail::key_values(ls, line_no);
            try {
                lut.optimization_level = std::stoi(detail::require(kv, "optimization_level", line_no));
                lut.zero_tol = std::stod(detail::require(kv, "zero_tol", line_no));
            } catch (const std::logic_error &) {
                throw FormatError("line " + std::to_string(line_no) + ": bad header value");
            }
            header = true;
        } else if (head == "template") {
            std::string t;
            ls >> t;
            lut.templates.push_back(split_kinds(t));
        } else if (head == "entry") {
            auto kv = detail::key_values(ls, line_no);
            LutEntry e;
            e.signature = split_kinds(detail::require(kv, "sig", line_no));
            e.rz_slots = detail::split_sizes(kv.count("slots") ? kv.at("slots") : "");
            e.ambiguous = detail::require(kv, "ambiguous", line_no) == "1";
            std::stringstream cs(detail::require(kv, "cand", line_no));
            std::string c;
            while (std::getline(cs, c, ';')) {
                e.candidates.push_back(split_kinds(c));
            }
            if (e.candidates.empty()) {
                throw FormatError("line " + std::to_string(line_no) + ": entry without candidates");
            }
            e.templ = e.candidates.front();
            e.k = e.templ.size();
            if (std::to_string(e.k) != detail::require(kv, "k", line_no)) {
                throw FormatError("line " + std::to_string(line_no) + ": k disagrees with first candidate");
            }
            lut.entries[e.signature] = std::move(e);
        } else {
            throw FormatError("line " + std::to_string(line_no) + ": unknown record '" + head + "'");
        }
    }
    if (!header) {
        throw FormatError("empty LUT");
    }
    return lut;
}

// ---------------------------------------------------------------------------
// Parsing transpiled circuits.
// ---------------------------------------------------------------------------

/// Splits every wire at CNOT endpoints. Each wire yields (number of CNOTs on
/// it + 1) segments, some possibly empty.
inline std::vector<std::vector<Segment>> segment(const Circuit &c) {
    std::vector<std::vector<Segment>> out(c.n_qubits());
    std::vector<std::vector<Gate>> run(c.n_qubits());
    auto close = [&](std::size_t q) {
        Segment s;
        s.wire = q;
        s.position = out[q].size();
        for (const Gate &g : run[q]) {
            s.kinds.push_back(g.kind);
            if (g.kind == GateKind::RZ) {
                s.rz_angles.push_back(g.angle);
            }
        }
        s.unitary = product_1q(run[q]);
        out[q].push_back(std::move(s));
        run[q].clear();
    };
    for (const Gate &g : c) {
        if (!is_basis_gate(g.kind) || g.param_tag) {
            throw TranspileError("segment expects a bound basis-gate circuit, found " + std::string(gate_name(g.kind)));
        }
        if (g.kind == GateKind::CNOT) {
            close(g.qubits[0]);
            close(g.qubits[1]);
        } else {
            run[g.qubits[0]].push_back(g);
        }
    }
    for (std::size_t q = 0; q < c.n_qubits(); ++q) {
        close(q);
    }
    return out;
}

struct Unrouted {
    Circuit circuit;
    /// Logical wire l ended on physical wire layout[l].
    std::vector<std::size_t> layout;
    /// source[i]: index in the routed circuit of output gate i.
    std::vector<std::size_t> source;
};

/// Replaces CNOT triples (a,b),(b,a),(a,b) that have nothing else on a or b in
/// between by a relabeling of all later gates.
inline Unrouted unroute(const Circuit &c) {
    const std::size_t n = c.n_qubits();
    const auto &gates = c.gates();
    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    // next_on[i][s]: index of the next gate after i on wire gates[i].qubits[s].
    std::vector<std::array<std::size_t, 2>> next_on(gates.size(), {kNone, kNone});
    std::vector<std::size_t> last(n, kNone);
    for (std::size_t i = gates.size(); i-- > 0;) {
        const Gate &g = gates[i];
        for (std::size_t s = 0; s < g.arity(); ++s) {
            next_on[i][s] = last[g.qubits[s]];
        }
        for (std::size_t s = 0; s < g.arity(); ++s) {
            last[g.qubits[s]] = i;
        }
    }
    auto next_touching = [&](std::size_t i) { return std::min(next_on[i][0], next_on[i][1]); };

    std::vector<std::size_t> logical_at(n);
    for (std::size_t p = 0; p < n; ++p) {
        logical_at[p] = p;
    }
    std::vector<bool> consumed(gates.size(), false);
    std::vector<std::size_t> source;
    Circuit out(n, c.global_phase());
    for (std::size_t i = 0; i < gates.size(); ++i) {
        if (consumed[i]) {
            continue;
        }
        Gate g = gates[i];
        if (g.kind == GateKind::CNOT) {
            std::size_t a = g.qubits[0], b = g.qubits[1];
            std::size_t j = next_touching(i);
            if (j != kNone && gates[j] == Gate::cnot(b, a)) {
                std::size_t k = next_touching(j);
                if (k != kNone && gates[k] == Gate::cnot(a, b)) {
                    consumed[j] = consumed[k] = true;
                    std::swap(logical_at[a], logical_at[b]);
                    continue;
                }
            }
        }
        for (std::size_t s = 0; s < g.arity(); ++s) {
            g.qubits[s] = logical_at[g.qubits[s]];
        }
        out.add(g);
        source.push_back(i);
    }
    std::vector<std::size_t> layout(n);
    for (std::size_t p = 0; p < n; ++p) {
        layout[logical_at[p]] = p;
    }
    return {std::move(out), std::move(layout), std::move(source)};
}

// ---------------------------------------------------------------------------
// Candidate fitting.
// ---------------------------------------------------------------------------

namespace detail {

/// Nelder-Mead on f: R^d -> R from `start`, standard coefficients.
inline std::vector<double> nelder_mead(const std::function<double(const std::vector<double> &)> &f,
                                       std::vector<double> start, double step, std::size_t max_iter) {
    const std::size_t d = start.size();
    std::vector<std::vector<double>> simplex(d + 1, start);
    for (std::size_t i = 0; i < d; ++i) {
        simplex[i + 1][i] += step;
    }
    std::vector<double> values(d + 1);
    for (std::size_t i = 0; i <= d; ++i) {
        values[i] = f(simplex[i]);
    }
    std::vector<std::size_t> order(d + 1);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        for (std::size_t i = 0; i <= d; ++i) {
            order[i] = i;
        }
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[d - 1];
        if (values[worst] - values[best] < 1e-18) {
            break;
        }
        std::vector<double> centroid(d, 0.0);
        for (std::size_t i = 0; i <= d; ++i) {
            if (i != worst) {
                for (std::size_t j = 0; j < d; ++j) {
                    centroid[j] += simplex[i][j] / static_cast<double>(d);
                }
            }
        }
        auto along = [&](double t) {
            std::vector<double> p(d);
            for (std::size_t j = 0; j < d; ++j) {
                p[j] = centroid[j] + t * (simplex[worst][j] - centroid[j]);
            }
            return p;
        };
        std::vector<double> reflected = along(-1.0);
        double fr = f(reflected);
        if (fr < values[best]) {
            std::vector<double> expanded = along(-2.0);
            double fe = f(expanded);
            if (fe < fr) {
                simplex[worst] = std::move(expanded);
                values[worst] = fe;
            } else {
                simplex[worst] = std::move(reflected);
                values[worst] = fr;
            }
        } else if (fr < values[second]) {
            simplex[worst] = std::move(reflected);
            values[worst] = fr;
        } else {
            std::vector<double> contracted = fr < values[worst] ? along(-0.5) : along(0.5);
            double fc = f(contracted);
            if (fc < std::min(fr, values[worst])) {
                simplex[worst] = std::move(contracted);
                values[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= d; ++i) {
                    if (i == best) {
                        continue;
                    }
                    for (std::size_t j = 0; j < d; ++j) {
                        simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
                    }
                    values[i] = f(simplex[i]);
                }
            }
        }
    }
    return *std::min_element(simplex.begin(), simplex.end(), [&](const auto &a, const auto &b) {
        return values[&a - &simplex[0]] < values[&b - &simplex[0]];
    });
}

}  // namespace detail

struct TemplateFit {
    std::vector<double> angles;
    double distance = 0.0;
};

/// Best angles for `templ` to reproduce `target` up to phase: coarse grid at
/// pi/8, then Nelder-Mead from the three best grid points.
inline TemplateFit fit_template(const RotationTemplate &templ, const Mat2 &target) {
    const std::size_t k = templ.size();
    auto cost = [&](const std::vector<double> &a) { return phase_invariant_distance(template_unitary(templ, a), target); };
    constexpr std::size_t kGrid = 16;
    std::vector<std::pair<double, std::vector<double>>> starts;
    std::vector<std::size_t> idx(k, 0);
    std::vector<double> a(k);
    while (true) {
        for (std::size_t i = 0; i < k; ++i) {
            a[i] = -kPi + kTwoPi * static_cast<double>(idx[i]) / kGrid;
        }
        starts.emplace_back(cost(a), a);
        std::size_t d = 0;
        while (d < k && ++idx[d] == kGrid) {
            idx[d++] = 0;
        }
        if (d == k) {
            break;
        }
    }
    std::partial_sort(starts.begin(), starts.begin() + std::min<std::size_t>(3, starts.size()), starts.end(),
                      [](const auto &x, const auto &y) { return x.first < y.first; });
    TemplateFit best{{}, 1e300};
    for (std::size_t s = 0; s < std::min<std::size_t>(3, starts.size()); ++s) {
        std::vector<double> p = detail::nelder_mead(cost, starts[s].second, kPi / 16, 4000);
        p = detail::nelder_mead(cost, p, 1e-3, 4000);
        double v = cost(p);
        if (v < best.distance) {
            best = {p, v};
        }
    }
    for (double &x : best.angles) {
        x = normalize_angle(x);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Structure recovery.
// ---------------------------------------------------------------------------

inline RecoveredStructure recover_structure(const Circuit &victim, const Lut &lut, const RecoverOptions &opts = {}) {
    Unrouted u = unroute(victim);
    const std::size_t n = u.circuit.n_qubits();
    RecoveredStructure rs;
    rs.layout = u.layout;
    Circuit ansatz(n);
    std::size_t next_tag = 0;

    std::vector<std::vector<Gate>> run(n);
    std::vector<std::size_t> position(n, 0);

    auto flush = [&](std::size_t q) {
        if (run[q].empty()) {
            return;
        }
        Signature sig;
        std::vector<double> angles;
        for (const Gate &g : run[q]) {
            sig.push_back(g.kind);
            if (g.kind == GateKind::RZ) {
                angles.push_back(g.angle);
            }
        }
        Mat2 unitary = product_1q(run[q]);
        run[q].clear();
        const LutEntry *e = lut.find(sig);
        if (!e) {
            throw UnmatchedSegment(q, position[q], join_kinds(sig));
        }
        RotationTemplate chosen = e->templ;
        if (e->candidates.size() > 1) {
            std::string listing;
            for (const auto &c : e->candidates) {
                listing += (listing.empty() ? "" : " | ") + join_kinds(c);
            }
            if (!opts.resolve_ambiguity) {
                if (e->ambiguous) {
                    throw AmbiguousSegment("wire " + std::to_string(q) + " position " + std::to_string(position[q]) +
                                           ": signature [" + join_kinds(sig) + "] matches " + listing);
                }
            } else {
                bool found = false;
                for (const auto &c : e->candidates) {
                    if (fit_template(c, unitary).distance <= opts.fit_tol) {
                        chosen = c;
                        found = true;
                        break;
                    }
                }
                if (!found) {
                    throw AmbiguousSegment("wire " + std::to_string(q) + " position " + std::to_string(position[q]) +
                                           ": no candidate of [" + join_kinds(sig) + "] reproduces the segment (" +
                                           listing + ")");
                }
                rs.notes.push_back("wire " + std::to_string(q) + " position " + std::to_string(position[q]) + ": [" +
                                   join_kinds(sig) + "] -> " + join_kinds(chosen) + " among " + listing);
            }
        }
        RecoveredSegment seg;
        seg.wire = q;
        seg.position = position[q];
        seg.templ = chosen;
        seg.first_tag = next_tag;
        seg.signature = sig;
        seg.rz_angles = std::move(angles);
        seg.rz_slots = e->rz_slots;
        seg.unitary = unitary;
        for (GateKind k : chosen) {
            ansatz.add(Gate::tagged(k, q, next_tag++));
        }
        rs.segments.push_back(std::move(seg));
    };

    for (const Gate &g : u.circuit) {
        if (!is_basis_gate(g.kind) || g.param_tag) {
            throw TranspileError("recover_structure expects a transpiled circuit, found " +
                                 std::string(gate_name(g.kind)));
        }
        if (g.kind == GateKind::CNOT) {
            // Flushing every wire keeps tags qubit-major within a layer.
            for (std::size_t q = 0; q < n; ++q) {
                flush(q);
            }
            ansatz.add(g);
            ++position[g.qubits[0]];
            ++position[g.qubits[1]];
        } else {
            run[g.qubits[0]].push_back(g);
        }
    }
    for (std::size_t q = 0; q < n; ++q) {
        flush(q);
    }
    rs.ansatz = std::move(ansatz);
    return rs;
}

// ---------------------------------------------------------------------------
// Structural comparison.
// ---------------------------------------------------------------------------

/// Gates sorted by ASAP moment, then by lowest wire. Two circuits have the
/// same gate dependency graph exactly when these lists agree.
inline std::vector<Gate> canonical_order(const Circuit &c) {
    std::vector<std::size_t> depth(c.n_qubits(), 0);
    std::vector<std::pair<std::size_t, std::size_t>> keys;
    keys.reserve(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        const Gate &g = c[i];
        std::size_t m = 0;
        for (std::size_t q : g.wires()) {
            m = std::max(m, depth[q]);
        }
        for (std::size_t q : g.wires()) {
            depth[q] = m + 1;
        }
        keys.emplace_back(m, i);
    }
    std::stable_sort(keys.begin(), keys.end(), [&](const auto &a, const auto &b) {
        if (a.first != b.first) {
            return a.first < b.first;
        }
        return std::min(c[a.second].qubits[0], c[a.second].arity() == 2 ? c[a.second].qubits[1] : c.n_qubits()) <
               std::min(c[b.second].qubits[0], c[b.second].arity() == 2 ? c[b.second].qubits[1] : c.n_qubits());
    });
    std::vector<Gate> out;
    out.reserve(c.size());
    for (const auto &kv : keys) {
        out.push_back(c[kv.second]);
    }
    return out;
}

/// If `a` and `b` have the same gate dependency graph (kinds, wires, CNOT
/// orientation), returns map[tag in a] = tag in b. Angles are ignored.
inline std::optional<std::vector<std::size_t>> match_structure(const Circuit &a, const Circuit &b) {
    if (a.n_qubits() != b.n_qubits() || a.size() != b.size()) {
        return std::nullopt;
    }
    std::vector<Gate> ca = canonical_order(a), cb = canonical_order(b);
    std::vector<std::size_t> map(a.param_count(), static_cast<std::size_t>(-1));
    for (std::size_t i = 0; i < ca.size(); ++i) {
        const Gate &x = ca[i], &y = cb[i];
        if (x.kind != y.kind || x.qubits != y.qubits || x.param_tag.has_value() != y.param_tag.has_value()) {
            return std::nullopt;
        }
        if (x.param_tag) {
            map[*x.param_tag] = *y.param_tag;
        }
    }
    return map;
}

/// Same dependency graph and identical tag numbering.
inline bool same_structure(const Circuit &a, const Circuit &b) {
    auto m = match_structure(a, b);
    if (!m) {
        return false;
    }
    for (std::size_t i = 0; i < m->size(); ++i) {
        if ((*m)[i] != i) {
            return false;
        }
    }
    return true;
}

inline std::string serialize(const RecoveredStructure &rs) {
    std::ostringstream out;
    out << "layout " << detail::join_sizes(rs.layout) << "\n";
    for (const auto &s : rs.segments) {
        out << "segment wire=" << s.wire << " position=" << s.position << " tags=" << s.first_tag << ".."
            << s.first_tag + s.templ.size() << " template=" << join_kinds(s.templ) << " sig=" << join_kinds(s.signature)
            << " slots=" << detail::join_sizes(s.rz_slots) << " rz=";
        for (std::size_t i = 0; i < s.rz_angles.size(); ++i) {
            out << (i ? "," : "") << format_double(s.rz_angles[i]);
        }
        out << "\n";
    }
    for (const auto &note : rs.notes) {
        out << "note " << note << "\n";
    }
    out << serialize(rs.ansatz);
    return out.str();
}

}  // namespace qrev
