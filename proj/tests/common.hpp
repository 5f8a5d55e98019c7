#pragma once

#include <vbbq/circuit_ir.hpp>
#include <vbbq/prf.hpp>

namespace vbbq::testutil {

// Random circuit over {AND, XOR, NOT} with the given number of inputs and gates;
// outputs are the last n_out wires.
inline BooleanCircuit random_circuit(Rng& rng, std::size_t n_in, std::size_t n_gates, std::size_t n_out) {
    BooleanCircuit c;
    c.n_inputs = n_in;
    c.n_wires = n_in;
    for (std::size_t g = 0; g < n_gates; ++g) {
        Gate gt{};
        switch (rng.below(3)) {
            case 0: gt.kind = GateKind::AND; break;
            case 1: gt.kind = GateKind::XOR; break;
            default: gt.kind = GateKind::NOT; break;
        }
        gt.in0 = std::uint32_t(rng.below(c.n_wires));
        gt.in1 = std::uint32_t(rng.below(c.n_wires));
        if (gt.kind == GateKind::NOT) gt.in1 = 0;
        gt.out = std::uint32_t(c.n_wires++);
        c.gates.push_back(gt);
    }
    for (std::size_t k = 0; k < n_out; ++k) c.output_wires.push_back(std::uint32_t(c.n_wires - 1 - k));
    return c;
}

// Circuit with an exact depth: a chain of `depth` dependent gates over the
// inputs plus some random side gates that stay shallower.
inline BooleanCircuit chain_circuit(Rng& rng, std::size_t n_in, std::size_t depth) {
    BooleanCircuit c;
    c.n_inputs = n_in;
    c.n_wires = n_in;
    std::uint32_t cur = 0;
    for (std::size_t g = 0; g < depth; ++g) {
        Gate gt{};
        gt.kind = rng.bit() ? GateKind::AND : GateKind::XOR;
        gt.in0 = cur;
        gt.in1 = std::uint32_t(rng.below(n_in));
        gt.out = std::uint32_t(c.n_wires++);
        c.gates.push_back(gt);
        cur = gt.out;
    }
    c.output_wires.push_back(cur);
    for (std::size_t i = 1; i < n_in; ++i) c.output_wires.push_back(std::uint32_t(i));
    return c;
}

}  // namespace vbbq::testutil
