//! Shared randomized-circuit machinery for the integration suites.
//! Everything is seeded; reruns are bit-identical.

#![allow(dead_code)]

use aroundc::classify::{DiagonalSpec, PermutationSpec};
use aroundc::ir::{a, q, Circuit, GateKind, Instruction, QubitId};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_angle(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)
}

/// Any of the eight built-in gates.
pub fn random_builtin(rng: &mut ChaCha8Rng) -> GateKind {
    match rng.gen_range(0..8) {
        0 => GateKind::X,
        1 => GateKind::Y,
        2 => GateKind::Z,
        3 => GateKind::H,
        4 => GateKind::RX(random_angle(rng)),
        5 => GateKind::RY(random_angle(rng)),
        6 => GateKind::RZ(random_angle(rng)),
        _ => GateKind::P(random_angle(rng)),
    }
}

/// A diagonal built-in gate.
pub fn random_diagonal_gate(rng: &mut ChaCha8Rng) -> GateKind {
    match rng.gen_range(0..3) {
        0 => GateKind::Z,
        1 => GateKind::RZ(random_angle(rng)),
        _ => GateKind::P(random_angle(rng)),
    }
}

/// A structurally permutation-classified gate application on `qubits`.
pub fn random_permutation_instr(rng: &mut ChaCha8Rng, qubits: &[QubitId]) -> Instruction {
    let t = *qubits.choose(rng).unwrap();
    match rng.gen_range(0..4) {
        0 => Instruction::apply(GateKind::X, t),
        1 => Instruction::apply(GateKind::Y, t),
        2 if qubits.len() >= 2 => {
            let c = *qubits.iter().filter(|x| **x != t).choose(rng).unwrap();
            Instruction::Controlled { controls: vec![c], body: vec![Instruction::apply(GateKind::X, t)] }
        }
        _ => Instruction::apply(random_diagonal_gate(rng), t),
    }
}

/// A flat sequence of built-in gate applications.
pub fn random_builtin_seq(rng: &mut ChaCha8Rng, qubits: &[QubitId], len: usize) -> Vec<Instruction> {
    (0..len)
        .map(|_| Instruction::apply(random_builtin(rng), *qubits.choose(rng).unwrap()))
        .collect()
}

/// A random instruction tree over the given qubits: applies, control blocks
/// (controls disjoint from the written qubits), and around blocks.
pub fn random_instrs(rng: &mut ChaCha8Rng, qubits: &[QubitId], depth: usize, budget: &mut usize) -> Vec<Instruction> {
    let len = rng.gen_range(1..=3.min(*budget).max(1));
    let mut out = Vec::new();
    for _ in 0..len {
        if *budget == 0 {
            break;
        }
        *budget -= 1;
        let structural = depth > 0 && qubits.len() >= 2 && rng.gen_bool(0.35);
        if !structural {
            out.push(Instruction::apply(random_builtin(rng), *qubits.choose(rng).unwrap()));
            continue;
        }
        if rng.gen_bool(0.5) {
            // control block: reserve one qubit as control
            let ci = rng.gen_range(0..qubits.len());
            let control = qubits[ci];
            let rest: Vec<QubitId> = qubits.iter().copied().filter(|x| *x != control).collect();
            let body = random_instrs(rng, &rest, depth - 1, budget);
            if body.is_empty() {
                continue;
            }
            out.push(Instruction::Controlled { controls: vec![control], body });
        } else {
            let outer = random_instrs(rng, qubits, depth - 1, budget);
            let body = random_instrs(rng, qubits, depth - 1, budget);
            out.push(Instruction::Around { outer, body });
        }
    }
    out
}

/// A random circuit on `n` main qubits with structural nesting.
pub fn random_circuit(rng: &mut ChaCha8Rng, n: usize, gate_budget: usize, name: &str) -> Circuit {
    let qubits: Vec<QubitId> = (0..n as u32).map(q).collect();
    let mut budget = gate_budget;
    let instrs = random_instrs(rng, &qubits, 3, &mut budget);
    let c = Circuit::new(name, n, instrs);
    c.validate().expect("generated circuit is valid");
    c
}

/// Random signed permutation on `dim` indices.
pub fn random_permutation_spec(rng: &mut ChaCha8Rng, dim: usize) -> PermutationSpec {
    let mut perm: Vec<usize> = (0..dim).collect();
    perm.shuffle(rng);
    let phases: Vec<f64> = (0..dim).map(|_| random_angle(rng)).collect();
    PermutationSpec { perm, phases }
}

pub fn random_diagonal_spec(rng: &mut ChaCha8Rng, dim: usize) -> DiagonalSpec {
    DiagonalSpec { phases: (0..dim).map(|_| random_angle(rng)).collect() }
}

/// A random circuit shaped like the aux-allocation theorem: aux qubits enter
/// in |0..0>, a controlled permutation computes into them, the body uses
/// them only diagonally or as controls, and the conjugation uncomputes.
///
/// `n` controls, `m` payload targets, `aux` aux qubits; main register is
/// controls then targets.
pub fn random_theorem3_circuit(rng: &mut ChaCha8Rng, n: usize, m: usize, aux: usize, name: &str) -> Circuit {
    let controls: Vec<QubitId> = (0..n as u32).map(q).collect();
    let targets: Vec<QubitId> = (n as u32..(n + m) as u32).map(q).collect();
    let auxs: Vec<QubitId> = (0..aux as u32).map(a).collect();

    let p_len = rng.gen_range(1..=4);
    let perm_instrs: Vec<Instruction> = (0..p_len).map(|_| random_permutation_instr(rng, &auxs)).collect();
    let computed: Instruction = Instruction::Controlled { controls: controls.clone(), body: perm_instrs };

    let mut body = Vec::new();
    let d_len = rng.gen_range(0..=3);
    for _ in 0..d_len {
        body.push(Instruction::apply(random_diagonal_gate(rng), *auxs.choose(rng).unwrap()));
    }
    let payload_len = rng.gen_range(1..=3);
    body.push(Instruction::Controlled {
        controls: auxs.clone(),
        body: random_builtin_seq(rng, &targets, payload_len),
    });

    let scope = Instruction::AuxScope {
        aux: auxs,
        body: vec![Instruction::Around { outer: vec![computed], body }],
    };
    let c = Circuit::new(name, n + m, vec![scope]);
    c.validate().expect("theorem-3 shape is valid");
    c
}

/// A random aux scope that may or may not be safe: half the time it injects
/// an adversarial write (H/X on aux, or a body write to a conjugator qubit).
pub fn random_adversarial_scope(rng: &mut ChaCha8Rng, name: &str) -> Circuit {
    let n = rng.gen_range(2..=3usize);
    let main: Vec<QubitId> = (0..n as u32).map(q).collect();
    let aux0 = a(0);
    let mut body = Vec::new();
    let conjugated = rng.gen_bool(0.7);
    if conjugated {
        let mut inner = Vec::new();
        if rng.gen_bool(0.5) {
            inner.push(Instruction::apply(random_diagonal_gate(rng), aux0));
        }
        inner.push(Instruction::Controlled {
            controls: vec![aux0],
            body: vec![Instruction::apply(random_builtin(rng), main[n - 1])],
        });
        match rng.gen_range(0..3) {
            // body writes a conjugator control: leaks
            0 => inner.push(Instruction::apply(GateKind::X, main[0])),
            // body applies a non-diagonal to the aux: leaks
            1 => inner.push(Instruction::apply(GateKind::H, aux0)),
            _ => {}
        }
        body.push(Instruction::Around {
            outer: vec![Instruction::Controlled { controls: vec![main[0], main[1]], body: vec![Instruction::apply(GateKind::X, aux0)] }],
            body: inner,
        });
    } else {
        match rng.gen_range(0..3) {
            0 => body.push(Instruction::apply(GateKind::H, aux0)),
            1 => body.push(Instruction::apply(GateKind::X, aux0)),
            _ => body.push(Instruction::apply(random_diagonal_gate(rng), aux0)),
        }
        body.push(Instruction::Controlled {
            controls: vec![aux0],
            body: vec![Instruction::apply(random_builtin(rng), main[0])],
        });
    }
    Circuit::new(name, n, vec![Instruction::AuxScope { aux: vec![aux0], body }])
}
