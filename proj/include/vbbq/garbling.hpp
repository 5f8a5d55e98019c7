#pragma once

// Point-and-permute garbling, four rows per binary gate, two per unary gate,
// no free-XOR, no row reduction.
//
// Labels: label_v for wire w is 16 bytes from PRF(seed, "vbbq/gc/label", w);
// the permute bit p_w is the LSB of label_0, and LSB(label_1) = 1 - p_w.
// Row (u, v) of gate g, u = LSB of the left active label, v = LSB of the right:
//   row = (label_out || 0xA5) XOR PRF(key = la || lb, "vbbq/gc/row", 4g + 2u + v)[0..17)
// Unary gates use key = la and row index u. A CONST gate stores its active
// output label in the clear (its value is public anyway).

#include <array>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "bits.hpp"
#include "circuit_ir.hpp"
#include "prf.hpp"

namespace vbbq::gc {

struct GarbleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kLabelBytes = 16;  // kappa = 128
inline constexpr std::size_t kRowBytes = kLabelBytes + 1;
inline constexpr std::uint8_t kCheck = 0xA5;
inline constexpr std::uint32_t kNoOutput = 0xFFFFFFFFu;

using Label = std::array<std::uint8_t, kLabelBytes>;
using Row = std::array<std::uint8_t, kRowBytes>;

inline int lsb(const Label& l) { return l[0] & 1; }

struct WireLabels {
    Label label0{}, label1{};
    int permute_bit() const { return lsb(label0); }
    const Label& of(int v) const { return v ? label1 : label0; }
};

inline WireLabels wire_labels(const Bytes& seed, std::uint32_t wire) {
    auto d = prf(seed, "vbbq/gc/label", wire);
    WireLabels w;
    std::memcpy(w.label0.data(), d.data(), kLabelBytes);
    std::memcpy(w.label1.data(), d.data() + kLabelBytes, kLabelBytes);
    int p = d[32] & 1;
    w.label0[0] = std::uint8_t((w.label0[0] & 0xFE) | p);
    w.label1[0] = std::uint8_t((w.label1[0] & 0xFE) | (p ^ 1));
    return w;
}

inline Row row_pad(const Label& a, const Label* b, std::uint64_t ctr) {
    std::uint8_t key[2 * kLabelBytes];
    std::memcpy(key, a.data(), kLabelBytes);
    std::size_t klen = kLabelBytes;
    if (b) {
        std::memcpy(key + kLabelBytes, b->data(), kLabelBytes);
        klen = 2 * kLabelBytes;
    }
    Row r;
    prf_into(key, klen, "vbbq/gc/row", ctr, nullptr, 0, r.data(), r.size());
    return r;
}

inline Row seal_row(const Label& out, const Row& pad) {
    Row r;
    for (std::size_t i = 0; i < kLabelBytes; ++i) r[i] = out[i] ^ pad[i];
    r[kLabelBytes] = kCheck ^ pad[kLabelBytes];
    return r;
}

struct GarbledGate {
    std::uint32_t index = 0;
    GateKind kind = GateKind::AND;
    std::uint32_t in0 = 0, in1 = 0, out = 0;
    std::uint32_t out_pos = kNoOutput;  // output position if the gate feeds one
    std::uint8_t decode = 0;            // permute bit of out, present when out_pos set
    std::vector<Row> rows;

    bool operator==(const GarbledGate&) const = default;

    Bytes serialize() const {
        Bytes b;
        put_le(b, index, 4);
        b.push_back(std::uint8_t(kind));
        put_le(b, in0, 4);
        put_le(b, in1, 4);
        put_le(b, out, 4);
        put_le(b, out_pos, 4);
        b.push_back(decode);
        b.push_back(std::uint8_t(rows.size()));
        for (const auto& r : rows) b.insert(b.end(), r.begin(), r.end());
        return b;
    }
    static GarbledGate parse(const Bytes& b) {
        if (b.size() < 23) throw GarbleError("garbled gate: truncated");
        GarbledGate g;
        g.index = std::uint32_t(get_le(b, 0, 4));
        if (b[4] > std::uint8_t(GateKind::COPY)) throw GarbleError("garbled gate: bad kind");
        g.kind = GateKind(b[4]);
        g.in0 = std::uint32_t(get_le(b, 5, 4));
        g.in1 = std::uint32_t(get_le(b, 9, 4));
        g.out = std::uint32_t(get_le(b, 13, 4));
        g.out_pos = std::uint32_t(get_le(b, 17, 4));
        g.decode = b[21];
        std::size_t n = b[22];
        if (b.size() != 23 + n * kRowBytes) throw GarbleError("garbled gate: bad length");
        g.rows.resize(n);
        for (std::size_t i = 0; i < n; ++i) std::memcpy(g.rows[i].data(), b.data() + 23 + i * kRowBytes, kRowBytes);
        return g;
    }
};

inline std::size_t row_count(GateKind k) {
    switch (arity(k)) {
        case 2: return 4;
        case 1: return 2;
        default: return 1;
    }
}

struct GarbledCircuit {
    std::size_t n_inputs = 0;
    std::size_t n_wires = 0;
    std::vector<GarbledGate> gates;
    std::vector<WireLabels> input_labels;  // encode info
    std::vector<std::uint8_t> decode_bits; // decode info, by output position
    std::vector<std::uint32_t> output_wires;
    bool operator==(const GarbledCircuit& o) const {
        if (n_inputs != o.n_inputs || n_wires != o.n_wires || gates != o.gates ||
            output_wires != o.output_wires ||
            decode_bits != o.decode_bits || input_labels.size() != o.input_labels.size())
            return false;
        for (std::size_t i = 0; i < input_labels.size(); ++i)
            if (input_labels[i].label0 != o.input_labels[i].label0 ||
                input_labels[i].label1 != o.input_labels[i].label1)
                return false;
        return true;
    }
};

// wire id -> output position (each gate output feeds at most one position when
// built by CircuitBuilder; for arbitrary circuits the first position wins and
// decode_bits still covers every position)
inline std::unordered_map<std::uint32_t, std::uint32_t> output_positions(const BooleanCircuit& c) {
    std::unordered_map<std::uint32_t, std::uint32_t> m;
    for (std::size_t p = 0; p < c.output_wires.size(); ++p) m.emplace(c.output_wires[p], std::uint32_t(p));
    return m;
}

// Garbles gate i given its wires' labels. The only inputs are seed, i, the gate
// and its output position.
inline GarbledGate garble_gate_local(const Gate& g, std::uint32_t i, std::uint32_t out_pos,
                                     const Bytes& seed) {
    GarbledGate gg;
    gg.index = i;
    gg.kind = g.kind;
    gg.in0 = g.in0;
    gg.in1 = g.in1;
    gg.out = g.out;
    gg.out_pos = out_pos;
    const WireLabels out = wire_labels(seed, g.out);
    if (out_pos != kNoOutput) gg.decode = std::uint8_t(out.permute_bit());
    const int a = arity(g.kind);
    if (a == 0) {
        int v = g.kind == GateKind::CONST1;
        gg.rows.push_back(seal_row(out.of(v), Row{}));
        return gg;
    }
    const WireLabels A = wire_labels(seed, g.in0);
    if (a == 1) {
        gg.rows.resize(2);
        for (int va = 0; va < 2; ++va) {
            int v = g.kind == GateKind::NOT ? (va ^ 1) : va;
            const Label& la = A.of(va);
            gg.rows[lsb(la)] = seal_row(out.of(v), row_pad(la, nullptr, 4ull * i + lsb(la)));
        }
        return gg;
    }
    const WireLabels B = wire_labels(seed, g.in1);
    gg.rows.resize(4);
    for (int va = 0; va < 2; ++va)
        for (int vb = 0; vb < 2; ++vb) {
            int v = g.kind == GateKind::AND ? (va & vb) : (va ^ vb);
            const Label& la = A.of(va);
            const Label& lb = B.of(vb);
            int r = 2 * lsb(la) + lsb(lb);
            gg.rows[r] = seal_row(out.of(v), row_pad(la, &lb, 4ull * i + r));
        }
    return gg;
}

inline GarbledGate garble_gate(const BooleanCircuit& c, std::size_t i, const Bytes& seed) {
    if (i >= c.gates.size()) throw std::out_of_range("garble_gate: index out of range");
    auto pos = output_positions(c);
    auto it = pos.find(c.gates[i].out);
    return garble_gate_local(c.gates[i], std::uint32_t(i), it == pos.end() ? kNoOutput : it->second, seed);
}

inline GarbledCircuit garble(const BooleanCircuit& c, const Bytes& seed) {
    GarbledCircuit gc;
    gc.n_inputs = c.n_inputs;
    gc.n_wires = c.n_wires;
    auto pos = output_positions(c);
    gc.gates.reserve(c.gates.size());
    for (std::size_t i = 0; i < c.gates.size(); ++i) {
        auto it = pos.find(c.gates[i].out);
        gc.gates.push_back(garble_gate_local(c.gates[i], std::uint32_t(i),
                                             it == pos.end() ? kNoOutput : it->second, seed));
    }
    for (std::size_t i = 0; i < c.n_inputs; ++i) gc.input_labels.push_back(wire_labels(seed, std::uint32_t(i)));
    for (auto w : c.output_wires) gc.decode_bits.push_back(std::uint8_t(wire_labels(seed, w).permute_bit()));
    gc.output_wires = c.output_wires;
    return gc;
}

inline std::vector<Label> encode(const GarbledCircuit& gc, const Bits& x) {
    if (x.size() != gc.n_inputs) throw std::invalid_argument("encode: input-arity error");
    std::vector<Label> v;
    for (std::size_t i = 0; i < x.size(); ++i) v.push_back(gc.input_labels[i].of(x[i]));
    return v;
}

// Returns the active label of every wire; output labels are read off by position.
inline std::vector<Label> evaluate_wires(const std::vector<GarbledGate>& gates, std::size_t n_wires,
                                         const std::vector<Label>& input) {
    std::vector<Label> w(n_wires);
    std::vector<std::uint8_t> have(n_wires, 0);
    for (std::size_t i = 0; i < input.size(); ++i) {
        w[i] = input[i];
        have[i] = 1;
    }
    auto open = [](const Row& row, const Row& pad) {
        Label l;
        for (std::size_t i = 0; i < kLabelBytes; ++i) l[i] = row[i] ^ pad[i];
        if ((row[kLabelBytes] ^ pad[kLabelBytes]) != kCheck)
            throw GarbleError("evaluation error: row did not open under the active labels");
        return l;
    };
    for (const auto& g : gates) {
        if (g.out >= n_wires || have[g.out]) throw GarbleError("evaluation error: bad output wire");
        const int a = arity(g.kind);
        if (g.rows.size() != row_count(g.kind)) throw GarbleError("evaluation error: bad row count");
        if ((a >= 1 && (g.in0 >= n_wires || !have[g.in0])) || (a == 2 && (g.in1 >= n_wires || !have[g.in1])))
            throw GarbleError("evaluation error: input label missing");
        if (a == 0) {
            w[g.out] = open(g.rows[0], Row{});
        } else if (a == 1) {
            const Label& la = w[g.in0];
            w[g.out] = open(g.rows[lsb(la)], row_pad(la, nullptr, 4ull * g.index + lsb(la)));
        } else {
            const Label& la = w[g.in0];
            const Label& lb = w[g.in1];
            int r = 2 * lsb(la) + lsb(lb);
            w[g.out] = open(g.rows[r], row_pad(la, &lb, 4ull * g.index + r));
        }
        have[g.out] = 1;
    }
    return w;
}

inline std::vector<Label> evaluate(const GarbledCircuit& gc, const std::vector<Label>& input) {
    if (input.size() != gc.n_inputs) throw GarbleError("evaluation error: input label count");
    auto w = evaluate_wires(gc.gates, gc.n_wires, input);
    std::vector<Label> out;
    for (auto o : gc.output_wires) {
        if (o >= gc.n_wires) throw GarbleError("evaluation error: output wire");
        out.push_back(w[o]);
    }
    return out;
}

// Output wires and decode bits recovered from the per-gate out_pos fields, for
// circuits whose outputs are all distinct gate outputs (the block format).
inline void outputs_from_gates(GarbledCircuit& gc) {
    std::size_t n = 0;
    for (const auto& g : gc.gates)
        if (g.out_pos != kNoOutput) n = std::max<std::size_t>(n, g.out_pos + 1);
    gc.output_wires.assign(n, 0);
    gc.decode_bits.assign(n, 0);
    std::vector<std::uint8_t> seen(n, 0);
    for (const auto& g : gc.gates)
        if (g.out_pos != kNoOutput) {
            if (seen[g.out_pos]) throw GarbleError("garbled circuit: duplicate output position");
            seen[g.out_pos] = 1;
            gc.output_wires[g.out_pos] = g.out;
            gc.decode_bits[g.out_pos] = g.decode;
        }
    for (auto v : seen)
        if (!v) throw GarbleError("garbled circuit: output position missing");
}

inline Bits decode(const GarbledCircuit& gc, const std::vector<Label>& out) {
    if (out.size() != gc.decode_bits.size()) throw std::invalid_argument("decode: width mismatch");
    Bits y(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) y[i] = std::uint8_t(lsb(out[i]) ^ gc.decode_bits[i]);
    return y;
}

// Privacy simulator: sees the topology and the output only. One random label
// per wire is "active"; each gate's row selected by the active LSBs encrypts
// the active output label, the other rows are random. input_labels carry the
// active label in both slots (there is only one encoded input to evaluate).
inline GarbledCircuit simulate(const BooleanCircuit& topology, const Bits& output, const Bytes& seed) {
    if (output.size() != topology.n_outputs()) throw std::invalid_argument("simulate: output width");
    auto active = [&](std::uint32_t w) {
        auto d = prf(seed, "vbbq/gc/sim-label", w);
        Label l;
        std::memcpy(l.data(), d.data(), kLabelBytes);
        return l;
    };
    auto pos = output_positions(topology);
    GarbledCircuit gc;
    gc.n_inputs = topology.n_inputs;
    gc.n_wires = topology.n_wires;
    for (std::size_t i = 0; i < topology.gates.size(); ++i) {
        const Gate& g = topology.gates[i];
        GarbledGate gg;
        gg.index = std::uint32_t(i);
        gg.kind = g.kind;
        gg.in0 = g.in0;
        gg.in1 = g.in1;
        gg.out = g.out;
        auto it = pos.find(g.out);
        gg.out_pos = it == pos.end() ? kNoOutput : it->second;
        Label out = active(g.out);
        if (gg.out_pos != kNoOutput) gg.decode = std::uint8_t(lsb(out) ^ output[gg.out_pos]);
        gg.rows.resize(row_count(g.kind));
        for (std::size_t r = 0; r < gg.rows.size(); ++r) {
            auto d = prf(seed, "vbbq/gc/sim-row", 4ull * i + r);
            std::memcpy(gg.rows[r].data(), d.data(), kRowBytes);
        }
        const int a = arity(g.kind);
        if (a == 0) {
            gg.rows[0] = seal_row(out, Row{});
        } else if (a == 1) {
            Label la = active(g.in0);
            gg.rows[lsb(la)] = seal_row(out, row_pad(la, nullptr, 4ull * i + lsb(la)));
        } else {
            Label la = active(g.in0), lb = active(g.in1);
            int r = 2 * lsb(la) + lsb(lb);
            gg.rows[r] = seal_row(out, row_pad(la, &lb, 4ull * i + r));
        }
        gc.gates.push_back(std::move(gg));
    }
    for (std::size_t i = 0; i < topology.n_inputs; ++i) {
        Label l = active(std::uint32_t(i));
        gc.input_labels.push_back({l, l});
    }
    gc.output_wires = topology.output_wires;
    gc.decode_bits.resize(topology.n_outputs());
    for (std::size_t p = 0; p < topology.output_wires.size(); ++p)
        gc.decode_bits[p] = std::uint8_t(lsb(active(topology.output_wires[p])) ^ output[p]);
    return gc;
}

}  // namespace vbbq::gc
