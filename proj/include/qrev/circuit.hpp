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
 * Circuit intermediate representation: gates, circuits with a tracked global
 * phase, angle arithmetic, parameter binding and the line-oriented text format.
 *
 * Text format:
 *
 *     qubits 2
 *     phase 0
 *     rx q0, 0.5
 *     ry q1, param3      # trainable slot 3
 *     cnot q0, q1
 *
 * Angles are printed with 17 significant digits so that parse(serialize(c))
 * reproduces every field bit for bit.
 */
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qrev/error.hpp"

namespace qrev {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Maps any finite angle to its representative in (-pi, pi].
inline double normalize_angle(double a) {
    if (!std::isfinite(a)) {
        throw InvalidAngle("non-finite angle");
    }
    double r = std::remainder(a, kTwoPi);
    if (r <= -kPi) {
        r += kTwoPi;
    }
    return r;
}

/// |normalize(a - b)|, the distance between two angles on the circle.
inline double wrapped_distance(double a, double b) {
    return std::abs(normalize_angle(a - b));
}

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

enum class GateKind : std::uint8_t { RX, RY, RZ, X, SX, ID, H, CNOT, SWAP };

inline constexpr std::array<GateKind, 9> kAllGateKinds = {GateKind::RX, GateKind::RY, GateKind::RZ,
                                                          GateKind::X,  GateKind::SX, GateKind::ID,
                                                          GateKind::H,  GateKind::CNOT, GateKind::SWAP};

constexpr bool is_rotation(GateKind k) {
    return k == GateKind::RX || k == GateKind::RY || k == GateKind::RZ;
}

constexpr bool is_two_qubit(GateKind k) {
    return k == GateKind::CNOT || k == GateKind::SWAP;
}

constexpr std::string_view gate_name(GateKind k) {
    switch (k) {
        case GateKind::RX: return "rx";
        case GateKind::RY: return "ry";
        case GateKind::RZ: return "rz";
        case GateKind::X: return "x";
        case GateKind::SX: return "sx";
        case GateKind::ID: return "id";
        case GateKind::H: return "h";
        case GateKind::CNOT: return "cnot";
        case GateKind::SWAP: return "swap";
    }
    return "?";
}

inline std::optional<GateKind> gate_from_name(std::string_view name) {
    for (GateKind k : kAllGateKinds) {
        if (gate_name(k) == name) {
            return k;
        }
    }
    return std::nullopt;
}

/// Comma-joined gate names, e.g. "rz,sx,rz".
inline std::string join_kinds(std::span<const GateKind> kinds) {
    std::string out;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        if (i) {
            out += ',';
        }
        out += gate_name(kinds[i]);
    }
    return out;
}

/// Inverse of join_kinds. Empty text gives an empty list.
inline std::vector<GateKind> split_kinds(std::string_view text) {
    std::vector<GateKind> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find(',', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        auto k = gate_from_name(text.substr(pos, end - pos));
        if (!k) {
            throw FormatError("unknown gate name '" + std::string(text.substr(pos, end - pos)) + "'");
        }
        out.push_back(*k);
        pos = end + 1;
    }
    return out;
}

/// One gate. Rotations carry an angle (or a trainable slot); CNOT stores
/// {control, target}.
struct Gate {
    GateKind kind = GateKind::ID;
    std::array<std::size_t, 2> qubits{};
    double angle = 0.0;
    std::optional<std::size_t> param_tag;

    std::size_t arity() const noexcept {
        return is_two_qubit(kind) ? 2 : 1;
    }
    std::span<const std::size_t> wires() const noexcept {
        return {qubits.data(), arity()};
    }
    bool acts_on(std::size_t q) const noexcept {
        return qubits[0] == q || (arity() == 2 && qubits[1] == q);
    }
    bool operator==(const Gate &) const = default;

    static Gate one(GateKind k, std::size_t q) {
        Gate g;
        g.kind = k;
        g.qubits = {q, 0};
        return g;
    }
    static Gate rotation(GateKind k, std::size_t q, double angle) {
        Gate g = one(k, q);
        g.angle = angle;
        return g;
    }
    static Gate tagged(GateKind k, std::size_t q, std::size_t tag) {
        Gate g = one(k, q);
        g.param_tag = tag;
        return g;
    }
    static Gate rx(std::size_t q, double a) {
        return rotation(GateKind::RX, q, a);
    }
    static Gate ry(std::size_t q, double a) {
        return rotation(GateKind::RY, q, a);
    }
    static Gate rz(std::size_t q, double a) {
        return rotation(GateKind::RZ, q, a);
    }
    static Gate x(std::size_t q) {
        return one(GateKind::X, q);
    }
    static Gate sx(std::size_t q) {
        return one(GateKind::SX, q);
    }
    static Gate id(std::size_t q) {
        return one(GateKind::ID, q);
    }
    static Gate h(std::size_t q) {
        return one(GateKind::H, q);
    }
    static Gate cnot(std::size_t control, std::size_t target) {
        Gate g;
        g.kind = GateKind::CNOT;
        g.qubits = {control, target};
        return g;
    }
    static Gate swap(std::size_t a, std::size_t b) {
        Gate g;
        g.kind = GateKind::SWAP;
        g.qubits = {a, b};
        return g;
    }
};

/// Ordered trainable values indexed by param_tag, each kept in (-pi, pi].
class ParamVector {
  public:
    ParamVector() = default;
    explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {
        for (double &v : values_) {
            v = normalize_angle(v);
        }
    }
    std::size_t size() const noexcept {
        return values_.size();
    }
    bool empty() const noexcept {
        return values_.empty();
    }
    double operator[](std::size_t i) const {
        return values_[i];
    }
    const std::vector<double> &values() const noexcept {
        return values_;
    }
    bool operator==(const ParamVector &) const = default;

  private:
    std::vector<double> values_;
};

/// Gate list over a fixed-width register with a tracked global phase.
/// Gate order is execution order.
class Circuit {
  public:
    Circuit() : Circuit(1) {
    }
    explicit Circuit(std::size_t n_qubits, double global_phase = 0.0) : n_qubits_(n_qubits) {
        if (n_qubits == 0) {
            throw DimensionError("circuit needs at least one qubit");
        }
        global_phase_ = normalize_angle(global_phase);
    }

    std::size_t n_qubits() const noexcept {
        return n_qubits_;
    }
    const std::vector<Gate> &gates() const noexcept {
        return gates_;
    }
    std::size_t size() const noexcept {
        return gates_.size();
    }
    bool empty() const noexcept {
        return gates_.empty();
    }
    double global_phase() const noexcept {
        return global_phase_;
    }
    auto begin() const noexcept {
        return gates_.begin();
    }
    auto end() const noexcept {
        return gates_.end();
    }
    const Gate &operator[](std::size_t i) const {
        return gates_[i];
    }

    /// Appends a gate after validating it. Rotation angles are folded into
    /// (-pi, pi]; since R(a + 2pi) = -R(a) the dropped sign goes into the
    /// global phase so the circuit unitary is unchanged.
    Circuit &add(Gate g) {
        validate(g);
        if (is_rotation(g.kind)) {
            if (g.param_tag) {
                g.angle = 0.0;
            } else {
                double n = normalize_angle(g.angle);
                double turns = std::round((g.angle - n) / kTwoPi);
                if (std::fmod(std::abs(turns), 2.0) == 1.0) {
                    add_phase(kPi);
                }
                g.angle = n;
            }
        } else {
            g.angle = 0.0;
            g.param_tag.reset();
        }
        if (g.arity() == 1) {
            g.qubits[1] = 0;
        }
        gates_.push_back(g);
        return *this;
    }

    Circuit &add_phase(double delta) {
        global_phase_ = normalize_angle(global_phase_ + delta);
        return *this;
    }

    void set_global_phase(double phase) {
        global_phase_ = normalize_angle(phase);
    }

    /// Appends all gates of `other` (same width) and its phase.
    Circuit &append(const Circuit &other) {
        if (other.n_qubits_ != n_qubits_) {
            throw DimensionError("append: width mismatch");
        }
        for (const Gate &g : other.gates_) {
            add(g);
        }
        add_phase(other.global_phase_);
        return *this;
    }

    bool has_unbound() const noexcept {
        for (const Gate &g : gates_) {
            if (g.param_tag) {
                return true;
            }
        }
        return false;
    }

    /// One past the largest param_tag, i.e. the ParamVector length bind expects.
    std::size_t param_count() const noexcept {
        std::size_t n = 0;
        for (const Gate &g : gates_) {
            if (g.param_tag) {
                n = std::max(n, *g.param_tag + 1);
            }
        }
        return n;
    }

    bool operator==(const Circuit &) const = default;

  private:
    void validate(const Gate &g) const {
        for (std::size_t q : g.wires()) {
            if (q >= n_qubits_) {
                throw DimensionError("qubit index " + std::to_string(q) + " out of range for " +
                                     std::to_string(n_qubits_) + "-qubit circuit");
            }
        }
        if (g.arity() == 2 && g.qubits[0] == g.qubits[1]) {
            throw DimensionError("two-qubit gate on a repeated qubit");
        }
        if (!is_rotation(g.kind) && g.param_tag) {
            throw BindError("only rotations take a parameter");
        }
    }

    std::size_t n_qubits_;
    std::vector<Gate> gates_;
    double global_phase_ = 0.0;
};

/// Replaces every tagged angle with its value from `p`.
inline Circuit bind(const Circuit &c, const ParamVector &p) {
    Circuit out(c.n_qubits(), c.global_phase());
    for (Gate g : c.gates()) {
        if (g.param_tag) {
            if (*g.param_tag >= p.size()) {
                throw BindError("no value for param" + std::to_string(*g.param_tag));
            }
            g.angle = p[*g.param_tag];
            g.param_tag.reset();
        }
        out.add(g);
    }
    return out;
}

inline std::string serialize(const Circuit &c) {
    std::string out;
    out += "qubits " + std::to_string(c.n_qubits()) + "\n";
    out += "phase " + format_double(c.global_phase()) + "\n";
    for (const Gate &g : c.gates()) {
        out += gate_name(g.kind);
        out += " q" + std::to_string(g.qubits[0]);
        if (g.arity() == 2) {
            out += ", q" + std::to_string(g.qubits[1]);
        }
        if (is_rotation(g.kind)) {
            if (g.param_tag) {
                out += ", param" + std::to_string(*g.param_tag);
            } else {
                out += ", " + format_double(g.angle);
            }
        }
        out += '\n';
    }
    return out;
}

namespace detail {

/// Cursor over one line of the circuit text format.
class LineLexer {
  public:
    LineLexer(std::string_view text, std::size_t line) : text_(text), line_(line) {
    }

    void skip_space() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r')) {
            ++pos_;
        }
    }
    bool at_end() {
        skip_space();
        return pos_ >= text_.size();
    }
    std::size_t column() const {
        return pos_ + 1;
    }
    [[noreturn]] void fail(const std::string &what) const {
        throw ParseError(line_, column(), what);
    }
    std::string_view word() {
        skip_space();
        std::size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] != ' ' && text_[pos_] != '\t' && text_[pos_] != ',' &&
               text_[pos_] != '\r') {
            ++pos_;
        }
        return text_.substr(start, pos_ - start);
    }
    void expect_comma() {
        skip_space();
        if (pos_ >= text_.size() || text_[pos_] != ',') {
            fail("expected ','");
        }
        ++pos_;
    }
    std::size_t unsigned_int(std::string_view digits, std::size_t col) const {
        if (digits.empty() || digits.size() > 9) {
            throw ParseError(line_, col, "expected an index");
        }
        std::size_t v = 0;
        for (char ch : digits) {
            if (ch < '0' || ch > '9') {
                throw ParseError(line_, col, "expected an index");
            }
            v = v * 10 + static_cast<std::size_t>(ch - '0');
        }
        return v;
    }
    double real(std::string_view tok, std::size_t col) const {
        std::string s(tok);
        char *end = nullptr;
        double v = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
            throw ParseError(line_, col, "malformed angle '" + s + "'");
        }
        return v;
    }
    std::size_t qubit(std::size_t n_qubits) {
        skip_space();
        std::size_t col = column();
        std::string_view tok = word();
        if (tok.size() < 2 || tok[0] != 'q') {
            throw ParseError(line_, col, "expected qubit operand 'q<i>'");
        }
        std::size_t q = unsigned_int(tok.substr(1), col);
        if (q >= n_qubits) {
            throw ParseError(line_, col,
                             "qubit index " + std::to_string(q) + " out of range (" + std::to_string(n_qubits) +
                                 " qubits)");
        }
        return q;
    }

  private:
    std::string_view text_;
    std::size_t line_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses the text format. Errors carry line and column.
inline Circuit parse_circuit(std::string_view text) {
    std::optional<Circuit> circuit;
    bool have_phase = false;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        detail::LineLexer lex(line, line_no);
        if (lex.at_end()) {
            if (nl == text.size()) {
                break;
            }
            continue;
        }
        std::size_t head_col = lex.column();
        std::string_view head = lex.word();
        if (!circuit) {
            if (head != "qubits") {
                throw ParseError(line_no, head_col, "expected 'qubits <n>' header");
            }
            lex.skip_space();
            std::size_t col = lex.column();
            std::size_t n = lex.unsigned_int(lex.word(), col);
            if (n == 0) {
                throw ParseError(line_no, col, "qubit count must be positive");
            }
            circuit.emplace(n);
        } else if (!have_phase) {
            if (head != "phase") {
                throw ParseError(line_no, head_col, "expected 'phase <float>' header");
            }
            lex.skip_space();
            std::size_t col = lex.column();
            circuit->set_global_phase(lex.real(lex.word(), col));
            have_phase = true;
        } else {
            auto kind = gate_from_name(head);
            if (!kind) {
                throw ParseError(line_no, head_col, "unknown gate '" + std::string(head) + "'");
            }
            Gate g;
            g.kind = *kind;
            g.qubits[0] = lex.qubit(circuit->n_qubits());
            if (is_two_qubit(*kind)) {
                lex.expect_comma();
                std::size_t col = lex.column();
                g.qubits[1] = lex.qubit(circuit->n_qubits());
                if (g.qubits[1] == g.qubits[0]) {
                    throw ParseError(line_no, col, "two-qubit gate on a repeated qubit");
                }
            }
            if (is_rotation(*kind)) {
                lex.expect_comma();
                lex.skip_space();
                std::size_t col = lex.column();
                std::string_view tok = lex.word();
                if (tok.starts_with("param")) {
                    g.param_tag = lex.unsigned_int(tok.substr(5), col);
                } else {
                    g.angle = lex.real(tok, col);
                }
            }
            if (!lex.at_end()) {
                lex.fail("unexpected trailing text");
            }
            circuit->add(g);
        }
        if (!lex.at_end()) {
            lex.fail("unexpected trailing text");
        }
        if (nl == text.size()) {
            break;
        }
    }
    if (!circuit) {
        throw ParseError(line_no == 0 ? 1 : line_no, 1, "missing 'qubits <n>' header");
    }
    if (!have_phase) {
        throw ParseError(line_no, 1, "missing 'phase <float>' header");
    }
    return *circuit;
}

}  // namespace qrev
