#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "bits.hpp"

namespace vbbq {

struct CircuitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class GateKind : std::uint8_t { AND, XOR, NOT, CONST0, CONST1, COPY };

inline int arity(GateKind k) {
    switch (k) {
        case GateKind::AND:
        case GateKind::XOR: return 2;
        case GateKind::NOT:
        case GateKind::COPY: return 1;
        default: return 0;
    }
}

inline const char* gate_name(GateKind k) {
    switch (k) {
        case GateKind::AND: return "AND";
        case GateKind::XOR: return "XOR";
        case GateKind::NOT: return "NOT";
        case GateKind::CONST0: return "CONST0";
        case GateKind::CONST1: return "CONST1";
        case GateKind::COPY: return "COPY";
    }
    return "?";
}

struct Gate {
    GateKind kind;
    std::uint32_t in0 = 0, in1 = 0;
    std::uint32_t out = 0;
    bool operator==(const Gate&) const = default;
};

// Wires 0..n_inputs-1 are inputs; every gate defines exactly one new wire.
struct BooleanCircuit {
    std::size_t n_inputs = 0;
    std::size_t n_wires = 0;
    std::vector<Gate> gates;
    std::vector<std::uint32_t> output_wires;

    std::size_t n_outputs() const { return output_wires.size(); }
    bool operator==(const BooleanCircuit&) const = default;

    void validate() const {
        std::vector<std::uint8_t> defined(n_wires, 0);
        if (n_inputs > n_wires) throw CircuitError("more inputs than wires");
        for (std::size_t i = 0; i < n_inputs; ++i) defined[i] = 1;
        for (std::size_t g = 0; g < gates.size(); ++g) {
            const auto& gt = gates[g];
            int a = arity(gt.kind);
            if (a >= 1 && (gt.in0 >= n_wires || !defined[gt.in0]))
                throw CircuitError("gate " + std::to_string(g) + " reads undefined wire");
            if (a == 2 && (gt.in1 >= n_wires || !defined[gt.in1]))
                throw CircuitError("gate " + std::to_string(g) + " reads undefined wire");
            if (gt.out >= n_wires || defined[gt.out])
                throw CircuitError("gate " + std::to_string(g) + " redefines a wire");
            defined[gt.out] = 1;
        }
        for (auto w : output_wires)
            if (w >= n_wires || !defined[w]) throw CircuitError("output wire undefined");
    }
};

inline Bits eval(const BooleanCircuit& c, const Bits& x) {
    if (x.size() != c.n_inputs)
        throw std::invalid_argument("eval: input-arity error (expected " +
                                    std::to_string(c.n_inputs) + " bits, got " +
                                    std::to_string(x.size()) + ")");
    std::vector<std::uint8_t> w(c.n_wires, 0);
    std::copy(x.begin(), x.end(), w.begin());
    for (const auto& g : c.gates) {
        switch (g.kind) {
            case GateKind::AND: w[g.out] = w[g.in0] & w[g.in1]; break;
            case GateKind::XOR: w[g.out] = w[g.in0] ^ w[g.in1]; break;
            case GateKind::NOT: w[g.out] = w[g.in0] ^ 1; break;
            case GateKind::CONST0: w[g.out] = 0; break;
            case GateKind::CONST1: w[g.out] = 1; break;
            case GateKind::COPY: w[g.out] = w[g.in0]; break;
        }
    }
    Bits y(c.output_wires.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = w[c.output_wires[i]];
    return y;
}

// Bit-sliced evaluation: lane j of every word is an independent input.
inline std::vector<std::uint64_t> eval_lanes(const BooleanCircuit& c,
                                             const std::vector<std::uint64_t>& in) {
    if (in.size() != c.n_inputs) throw std::invalid_argument("eval_lanes: input-arity error");
    std::vector<std::uint64_t> w(c.n_wires, 0);
    std::copy(in.begin(), in.end(), w.begin());
    for (const auto& g : c.gates) {
        switch (g.kind) {
            case GateKind::AND: w[g.out] = w[g.in0] & w[g.in1]; break;
            case GateKind::XOR: w[g.out] = w[g.in0] ^ w[g.in1]; break;
            case GateKind::NOT: w[g.out] = ~w[g.in0]; break;
            case GateKind::CONST0: w[g.out] = 0; break;
            case GateKind::CONST1: w[g.out] = ~std::uint64_t(0); break;
            case GateKind::COPY: w[g.out] = w[g.in0]; break;
        }
    }
    std::vector<std::uint64_t> out(c.output_wires.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = w[c.output_wires[i]];
    return out;
}

// Row x of the result is eval(c, bits_from_uint(x, n_inputs)).
inline std::vector<Bits> truth_table(const BooleanCircuit& c, std::size_t max_inputs = 16) {
    if (c.n_inputs > max_inputs) throw CircuitError("truth_table: too many inputs");
    const std::uint64_t rows = std::uint64_t(1) << c.n_inputs;
    std::vector<Bits> table(rows, Bits(c.n_outputs()));
    for (std::uint64_t base = 0; base < rows; base += 64) {
        std::vector<std::uint64_t> in(c.n_inputs, 0);
        const std::uint64_t lanes = std::min<std::uint64_t>(64, rows - base);
        for (std::uint64_t l = 0; l < lanes; ++l)
            for (std::size_t i = 0; i < c.n_inputs; ++i)
                if (((base + l) >> i) & 1u) in[i] |= std::uint64_t(1) << l;
        auto out = eval_lanes(c, in);
        for (std::uint64_t l = 0; l < lanes; ++l)
            for (std::size_t j = 0; j < out.size(); ++j) table[base + l][j] = (out[j] >> l) & 1u;
    }
    return table;
}

// Longest input-to-output path counted in gates; every gate kind counts 1.
inline std::size_t depth(const BooleanCircuit& c) {
    std::vector<std::size_t> d(c.n_wires, 0);
    for (const auto& g : c.gates) {
        std::size_t m = 0;
        int a = arity(g.kind);
        if (a >= 1) m = d[g.in0];
        if (a == 2) m = std::max(m, d[g.in1]);
        d[g.out] = m + 1;
    }
    std::size_t best = 0;
    for (auto w : c.output_wires) best = std::max(best, d[w]);
    return best;
}

// ---------------------------------------------------------------------------
// Textual netlist

inline std::string to_netlist(const BooleanCircuit& c) {
    std::ostringstream os;
    os << "inputs " << c.n_inputs << " outputs " << c.n_outputs() << " wires " << c.n_wires
       << "\n";
    for (const auto& g : c.gates) {
        os << gate_name(g.kind);
        int a = arity(g.kind);
        if (a >= 1) os << ' ' << g.in0;
        if (a == 2) os << ' ' << g.in1;
        os << ' ' << g.out << "\n";
    }
    os << "outwires";
    for (auto w : c.output_wires) os << ' ' << w;
    os << "\n";
    return os.str();
}

inline BooleanCircuit parse_netlist(const std::string& text) {
    std::istringstream is(text);
    BooleanCircuit c;
    std::string tok;
    std::size_t n_out = 0;
    if (!(is >> tok) || tok != "inputs" || !(is >> c.n_inputs) || !(is >> tok) ||
        tok != "outputs" || !(is >> n_out) || !(is >> tok) || tok != "wires" || !(is >> c.n_wires))
        throw CircuitError("netlist: bad header");
    while (is >> tok) {
        if (tok == "outwires") {
            std::uint32_t w;
            for (std::size_t i = 0; i < n_out; ++i) {
                if (!(is >> w)) throw CircuitError("netlist: truncated outwires");
                c.output_wires.push_back(w);
            }
            if (is >> tok) throw CircuitError("netlist: trailing data");
            c.validate();
            return c;
        }
        Gate g{};
        if (tok == "AND") g.kind = GateKind::AND;
        else if (tok == "XOR") g.kind = GateKind::XOR;
        else if (tok == "NOT") g.kind = GateKind::NOT;
        else if (tok == "CONST0") g.kind = GateKind::CONST0;
        else if (tok == "CONST1") g.kind = GateKind::CONST1;
        else if (tok == "COPY") g.kind = GateKind::COPY;
        else throw CircuitError("netlist: unknown gate '" + tok + "'");
        int a = arity(g.kind);
        if (a >= 1 && !(is >> g.in0)) throw CircuitError("netlist: truncated gate");
        if (a == 2 && !(is >> g.in1)) throw CircuitError("netlist: truncated gate");
        if (!(is >> g.out)) throw CircuitError("netlist: truncated gate");
        c.gates.push_back(g);
    }
    throw CircuitError("netlist: missing outwires");
}

// ---------------------------------------------------------------------------
// Builder with constant folding. Signals < 0 are literals.

class CircuitBuilder {
public:
    using Sig = std::int64_t;
    static constexpr Sig ZERO = -1;
    static constexpr Sig ONE = -2;

    explicit CircuitBuilder(std::size_t n_inputs) : is_output_(n_inputs, 0) {
        c_.n_inputs = n_inputs;
        c_.n_wires = n_inputs;
    }

    Sig input(std::size_t i) const {
        if (i >= c_.n_inputs) throw std::out_of_range("builder: input index");
        return Sig(i);
    }
    static Sig lit(bool v) { return v ? ONE : ZERO; }
    static bool is_lit(Sig s) { return s < 0; }
    static bool lit_value(Sig s) { return s == ONE; }

    Sig XOR(Sig a, Sig b) {
        if (is_lit(a)) std::swap(a, b);
        if (is_lit(b)) return lit_value(b) ? NOT(a) : a;
        if (a == b) return ZERO;
        return emit(GateKind::XOR, a, b);
    }
    Sig AND(Sig a, Sig b) {
        if (is_lit(a)) std::swap(a, b);
        if (is_lit(b)) return lit_value(b) ? a : ZERO;
        if (a == b) return a;
        return emit(GateKind::AND, a, b);
    }
    Sig NOT(Sig a) {
        if (is_lit(a)) return lit(!lit_value(a));
        auto it = not_cache_.find(a);
        if (it != not_cache_.end()) return it->second;
        Sig r = emit(GateKind::NOT, a, 0);
        not_cache_[a] = r;
        not_cache_[r] = a;
        return r;
    }
    Sig OR(Sig a, Sig b) { return NOT(AND(NOT(a), NOT(b))); }
    Sig MUX(Sig s, Sig if1, Sig if0) { return XOR(if0, AND(s, XOR(if0, if1))); }

    // Materialized constant that later folding cannot see through.
    Sig constant_gate(bool v) { return emit(v ? GateKind::CONST1 : GateKind::CONST0, 0, 0); }
    Sig copy(Sig a) {
        if (is_lit(a)) return constant_gate(lit_value(a));
        return emit(GateKind::COPY, a, 0);
    }

    // Appends an output position. Literal outputs become CONST gates; an input
    // wire or a wire already used as an output gets a COPY, so output
    // positions map one-to-one onto gate outputs.
    void output(Sig s) {
        Sig w = s;
        if (is_lit(s)) w = constant_gate(lit_value(s));
        else if (std::size_t(s) < c_.n_inputs || is_output_[std::size_t(s)]) w = copy(s);
        is_output_[std::size_t(w)] = 1;
        c_.output_wires.push_back(std::uint32_t(w));
    }

    std::vector<Sig> embed(const BooleanCircuit& sub, const std::vector<Sig>& in) {
        if (in.size() != sub.n_inputs) throw std::invalid_argument("embed: arity");
        std::vector<Sig> w(sub.n_wires, ZERO);
        std::copy(in.begin(), in.end(), w.begin());
        for (const auto& g : sub.gates) {
            switch (g.kind) {
                case GateKind::AND: w[g.out] = AND(w[g.in0], w[g.in1]); break;
                case GateKind::XOR: w[g.out] = XOR(w[g.in0], w[g.in1]); break;
                case GateKind::NOT: w[g.out] = NOT(w[g.in0]); break;
                case GateKind::CONST0: w[g.out] = ZERO; break;
                case GateKind::CONST1: w[g.out] = ONE; break;
                case GateKind::COPY: w[g.out] = w[g.in0]; break;
            }
        }
        std::vector<Sig> out;
        for (auto o : sub.output_wires) out.push_back(w[o]);
        return out;
    }

    // 1 iff a == b bitwise.
    Sig equal(const std::vector<Sig>& a, const std::vector<Sig>& b) {
        if (a.size() != b.size()) throw std::invalid_argument("equal: width mismatch");
        std::vector<Sig> eq;
        for (std::size_t i = 0; i < a.size(); ++i) eq.push_back(NOT(XOR(a[i], b[i])));
        return and_tree(eq);
    }
    Sig equal_const(const std::vector<Sig>& a, std::uint64_t v) {
        std::vector<Sig> b;
        for (std::size_t i = 0; i < a.size(); ++i) b.push_back(lit((v >> i) & 1u));
        return equal(a, b);
    }
    Sig and_tree(std::vector<Sig> v) {
        if (v.empty()) return ONE;
        while (v.size() > 1) {
            std::vector<Sig> next;
            for (std::size_t i = 0; i + 1 < v.size(); i += 2) next.push_back(AND(v[i], v[i + 1]));
            if (v.size() % 2) next.push_back(v.back());
            v.swap(next);
        }
        return v[0];
    }

    std::size_t gate_count() const { return c_.gates.size(); }
    const BooleanCircuit& peek() const { return c_; }
    BooleanCircuit build() const {
        c_.validate();
        return c_;
    }

private:
    Sig emit(GateKind k, Sig a, Sig b) {
        Gate g{k, std::uint32_t(a < 0 ? 0 : a), std::uint32_t(b < 0 ? 0 : b),
               std::uint32_t(c_.n_wires)};
        c_.gates.push_back(g);
        is_output_.resize(c_.n_wires + 1, 0);
        return Sig(c_.n_wires++);
    }

    BooleanCircuit c_;
    std::vector<std::uint8_t> is_output_;  // by wire id
    std::unordered_map<Sig, Sig> not_cache_;
};

// ---------------------------------------------------------------------------
// Function specifications

enum class FunctionKind { POINT, MULTIBIT_POINT, ZERO, CC, MULTIBIT_CC };

struct FunctionSpec {
    FunctionKind kind = FunctionKind::ZERO;
    Bits y;                    // target
    Bits z;                    // payload for multi-bit variants
    std::optional<BooleanCircuit> f;  // inner function for CC variants
    std::size_t lambda = 0;   // input length
    std::size_t out_len = 1;  // ZERO output width
};

inline FunctionSpec point_spec(const Bits& y) {
    return {FunctionKind::POINT, y, {}, std::nullopt, y.size(), 1};
}
inline FunctionSpec mbpf_spec(const Bits& y, const Bits& z) {
    return {FunctionKind::MULTIBIT_POINT, y, z, std::nullopt, y.size(), z.size()};
}
inline FunctionSpec zero_spec(std::size_t lambda, std::size_t out_len) {
    return {FunctionKind::ZERO, {}, {}, std::nullopt, lambda, out_len};
}

inline BooleanCircuit build_function(const FunctionSpec& s) {
    using B = CircuitBuilder;
    B b(s.lambda);
    std::vector<B::Sig> x;
    for (std::size_t i = 0; i < s.lambda; ++i) x.push_back(b.input(i));
    auto eq_lit = [&](const std::vector<B::Sig>& v, const Bits& y) {
        if (v.size() != y.size()) throw std::invalid_argument("build_function: |y| mismatch");
        std::vector<B::Sig> lits;
        for (auto bit : y) lits.push_back(B::lit(bit));
        return b.equal(v, lits);
    };
    switch (s.kind) {
        case FunctionKind::ZERO:
            for (std::size_t i = 0; i < s.out_len; ++i) b.output(B::ZERO);
            break;
        case FunctionKind::POINT: b.output(eq_lit(x, s.y)); break;
        case FunctionKind::MULTIBIT_POINT: {
            auto m = eq_lit(x, s.y);
            for (auto bit : s.z) b.output(b.AND(m, B::lit(bit)));
            break;
        }
        case FunctionKind::CC:
        case FunctionKind::MULTIBIT_CC: {
            if (!s.f) throw std::invalid_argument("build_function: CC needs f");
            auto fx = b.embed(*s.f, x);
            auto m = eq_lit(fx, s.y);
            if (s.kind == FunctionKind::CC) b.output(m);
            else
                for (auto bit : s.z) b.output(b.AND(m, B::lit(bit)));
            break;
        }
    }
    return b.build();
}

// ---------------------------------------------------------------------------
// Reversible circuits

enum class RevKind : std::uint8_t { X, CNOT, CCX };

struct RevGate {
    RevKind kind;
    std::uint32_t c0 = 0, c1 = 0;  // controls (unused ones ignored)
    std::uint32_t t = 0;
    bool operator==(const RevGate&) const = default;
};

struct ReversibleCircuit {
    std::size_t n_wires = 0;
    std::vector<RevGate> gates;
    std::vector<std::uint32_t> input_wires;
    std::vector<std::uint32_t> ancilla_wires;
    std::vector<std::uint32_t> output_wires;
};

inline void apply(const RevGate& g, std::vector<std::uint8_t>& s) {
    switch (g.kind) {
        case RevKind::X: s[g.t] ^= 1; break;
        case RevKind::CNOT: s[g.t] ^= s[g.c0]; break;
        case RevKind::CCX: s[g.t] ^= s[g.c0] & s[g.c1]; break;
    }
}

inline void run_reversible(const ReversibleCircuit& r, std::vector<std::uint8_t>& state) {
    if (state.size() != r.n_wires) throw std::invalid_argument("run_reversible: width");
    for (const auto& g : r.gates) apply(g, state);
}

inline ReversibleCircuit inverse(const ReversibleCircuit& r) {
    ReversibleCircuit inv = r;
    std::reverse(inv.gates.begin(), inv.gates.end());
    return inv;
}

// Runs r on x (placed on input_wires, ancillas 0) and reads output_wires.
inline Bits eval_reversible(const ReversibleCircuit& r, const Bits& x) {
    if (x.size() != r.input_wires.size()) throw std::invalid_argument("eval_reversible: arity");
    std::vector<std::uint8_t> s(r.n_wires, 0);
    for (std::size_t i = 0; i < x.size(); ++i) s[r.input_wires[i]] = x[i];
    run_reversible(r, s);
    Bits y;
    for (auto w : r.output_wires) y.push_back(s[w]);
    return y;
}

// Layer depth where gates that merely read a wire commute with each other.
inline std::size_t depth(const ReversibleCircuit& r) {
    std::vector<std::size_t> wr(r.n_wires, 0), rd(r.n_wires, 0);
    std::size_t best = 0;
    for (const auto& g : r.gates) {
        std::size_t start = std::max(wr[g.t], rd[g.t]);
        if (g.kind != RevKind::X) start = std::max(start, wr[g.c0]);
        if (g.kind == RevKind::CCX) start = std::max(start, wr[g.c1]);
        wr[g.t] = start + 1;
        if (g.kind != RevKind::X) rd[g.c0] = std::max(rd[g.c0], start + 1);
        if (g.kind == RevKind::CCX) rd[g.c1] = std::max(rd[g.c1], start + 1);
        best = std::max(best, start + 1);
    }
    return best;
}

// depth(compile_reversible(c)) <= kReversibleDepthFactor * depth(c)
inline constexpr std::size_t kReversibleDepthFactor = 2;

// One fresh 0-ancilla per live gate: AND -> CCX, XOR -> 2 CNOT, NOT -> CNOT + X,
// COPY -> CNOT, CONST1 -> X, CONST0 -> nothing. Gates that reach no output are
// dropped, so the depth bound holds against depth(c).
inline ReversibleCircuit compile_reversible(const BooleanCircuit& c) {
    ReversibleCircuit r;
    r.n_wires = c.n_wires;
    for (std::size_t i = 0; i < c.n_inputs; ++i) r.input_wires.push_back(std::uint32_t(i));
    std::vector<std::uint8_t> live(c.n_wires, 0);
    for (auto w : c.output_wires) live[w] = 1;
    for (auto it = c.gates.rbegin(); it != c.gates.rend(); ++it) {
        if (!live[it->out]) continue;
        int a = arity(it->kind);
        if (a >= 1) live[it->in0] = 1;
        if (a == 2) live[it->in1] = 1;
    }
    for (const auto& g : c.gates) {
        r.ancilla_wires.push_back(g.out);  // dead wires stay 0
        if (!live[g.out]) continue;
        switch (g.kind) {
            case GateKind::AND: r.gates.push_back({RevKind::CCX, g.in0, g.in1, g.out}); break;
            case GateKind::XOR:
                r.gates.push_back({RevKind::CNOT, g.in0, 0, g.out});
                r.gates.push_back({RevKind::CNOT, g.in1, 0, g.out});
                break;
            case GateKind::NOT:
                r.gates.push_back({RevKind::CNOT, g.in0, 0, g.out});
                r.gates.push_back({RevKind::X, 0, 0, g.out});
                break;
            case GateKind::COPY: r.gates.push_back({RevKind::CNOT, g.in0, 0, g.out}); break;
            case GateKind::CONST1: r.gates.push_back({RevKind::X, 0, 0, g.out}); break;
            case GateKind::CONST0: break;
        }
    }
    r.output_wires = c.output_wires;
    return r;
}

}  // namespace vbbq
