//! Dense complex linear algebra and the equivalence oracle.
//!
//! Everything here is deliberately desk-scale: full unitaries are capped at
//! 12 qubits (4096 x 4096) and statevectors at ~20 qubits. Gates are embedded
//! with explicit index bookkeeping instead of repeated Kronecker products, so
//! non-adjacent targets cost nothing extra.
//!
//! With the `parallel` feature (on by default) the unitary builder evolves
//! matrix columns with rayon and statevector kernels split amplitude blocks
//! across threads. Both paths are deterministic: every amplitude is computed
//! from the same inputs in the same order, so parallel and sequential results
//! are bit-identical. The `*_seq` entry points always use the sequential
//! path; the benches compare the two.

use std::fmt;

use num_complex::Complex64;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::ir::{Circuit, GateKind, Instruction, QubitId};
use crate::passes::library;

pub type Complex = Complex64;

const ZERO: Complex = Complex::new(0.0, 0.0);
const ONE: Complex = Complex::new(1.0, 0.0);

/// The single numeric tolerance knob shared across the crate.
pub const TOLERANCE: f64 = 1e-9;

/// Full-unitary construction refuses above this register width.
pub const MAX_MATRIX_QUBITS: usize = 12;

/// Statevector evolution refuses above this register width.
pub const MAX_STATE_QUBITS: usize = 20;

#[cfg(feature = "parallel")]
const PAR_MIN_DIM: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq)]
pub enum NumericsError {
    TooLarge { qubits: usize, max: usize },
    UnresolvedAux { qubit: QubitId, total_qubits: usize },
    DimensionMismatch { expected: usize, got: usize },
    QubitOutOfRange { qubit: QubitId, num_main: usize },
    UnknownGate(String),
    NotNormalized,
}

impl fmt::Display for NumericsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumericsError::TooLarge { qubits, max } => {
                write!(f, "register of {qubits} qubits exceeds the cap of {max}")
            }
            NumericsError::UnresolvedAux { qubit, total_qubits } => {
                write!(f, "aux qubit {qubit} does not fit in a register of {total_qubits} wires")
            }
            NumericsError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            NumericsError::QubitOutOfRange { qubit, num_main } => {
                write!(f, "qubit {qubit} outside main register of {num_main}")
            }
            NumericsError::UnknownGate(id) => write!(f, "unknown library gate `{id}`"),
            NumericsError::NotNormalized => write!(f, "statevector norm differs from 1"),
        }
    }
}

impl std::error::Error for NumericsError {}

/// Dense complex matrix of power-of-two dimension, stored column-major so
/// the unitary builder can evolve columns in place.
///
/// Basis convention: qubit (wire) 0 is the most significant bit of the basis
/// index, so controls placed on leading wires form the leading tensor factor.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    dim: usize,
    cols: Vec<Complex>,
}

impl UnitaryMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut cols = vec![ZERO; dim * dim];
        for i in 0..dim {
            cols[i * dim + i] = ONE;
        }
        UnitaryMatrix { dim, cols }
    }

    /// Builds from row-major nested vectors (handy for literal matrices in
    /// tests and the gate library).
    pub fn from_rows(rows: Vec<Vec<Complex>>) -> Self {
        let dim = rows.len();
        let mut m = UnitaryMatrix { dim, cols: vec![ZERO; dim * dim] };
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "matrix rows must be square");
            for (c, v) in row.iter().enumerate() {
                m.set(r, c, *v);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex {
        self.cols[col * self.dim + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex) {
        self.cols[col * self.dim + row] = value;
    }

    /// Matrix product `self * other` (apply `other` first).
    pub fn mul(&self, other: &UnitaryMatrix) -> UnitaryMatrix {
        assert_eq!(self.dim, other.dim, "matrix dimensions must match");
        let dim = self.dim;
        let mut out = UnitaryMatrix { dim, cols: vec![ZERO; dim * dim] };
        for c in 0..dim {
            for k in 0..dim {
                let v = other.get(k, c);
                if v.norm_sqr() == 0.0 {
                    continue;
                }
                for r in 0..dim {
                    let acc = out.get(r, c) + self.get(r, k) * v;
                    out.set(r, c, acc);
                }
            }
        }
        out
    }

    /// Matrix-vector product against a state of matching dimension.
    pub fn mul_state(&self, state: &StateVector) -> StateVector {
        assert_eq!(self.dim, state.amps.len(), "state dimension must match");
        let mut amps = vec![ZERO; self.dim];
        for c in 0..self.dim {
            let v = state.amps[c];
            if v.norm_sqr() == 0.0 {
                continue;
            }
            let col = &self.cols[c * self.dim..(c + 1) * self.dim];
            for (r, entry) in col.iter().enumerate() {
                amps[r] += entry * v;
            }
        }
        StateVector { num_qubits: state.num_qubits, amps }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> UnitaryMatrix {
        let dim = self.dim;
        let mut out = UnitaryMatrix { dim, cols: vec![ZERO; dim * dim] };
        for r in 0..dim {
            for c in 0..dim {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    /// Frobenius-norm check of `U * U† == I` within `tol`.
    pub fn is_unitary(&self, tol: f64) -> bool {
        let dim = self.dim;
        let mut acc = 0.0;
        for r in 0..dim {
            for c in 0..dim {
                let mut p = ZERO;
                for k in 0..dim {
                    p += self.get(r, k) * self.get(c, k).conj();
                }
                let expect = if r == c { ONE } else { ZERO };
                acc += (p - expect).norm_sqr();
            }
        }
        acc.sqrt() <= tol
    }

    /// Largest entrywise distance to another matrix of the same dimension.
    pub fn max_entry_distance(&self, other: &UnitaryMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "matrix dimensions must match");
        let mut max = 0.0f64;
        for i in 0..self.cols.len() {
            max = max.max((self.cols[i] - other.cols[i]).norm());
        }
        max
    }

    /// Embeds this `2^k`-dimensional gate at the given wires of an `n`-wire
    /// register (identity elsewhere). `wires[0]` is the most significant
    /// sub-index bit.
    pub fn embed(&self, wires: &[usize], n: usize) -> UnitaryMatrix {
        let dim = 1usize << n;
        assert_eq!(self.dim, 1usize << wires.len(), "gate size must match wire count");
        let mut out = UnitaryMatrix { dim, cols: vec![ZERO; dim * dim] };
        for c in 0..dim {
            let col = &mut out.cols[c * dim..(c + 1) * dim];
            col[c] = ONE;
            apply_multi(col, n, wires, self, 0);
        }
        out
    }

    /// The controlled extension: block-diagonal, identity on every control
    /// subspace except the all-ones block, which carries this matrix. The
    /// controls are the leading tensor factor.
    pub fn controlled(&self, num_controls: usize) -> UnitaryMatrix {
        let dim = self.dim << num_controls;
        let mut out = UnitaryMatrix::identity(dim);
        let base = dim - self.dim;
        for r in 0..self.dim {
            for c in 0..self.dim {
                out.set(base + r, base + c, self.get(r, c));
            }
        }
        out
    }

    /// The induced map on the main register when the trailing `aux` wires
    /// enter and leave in |0...0>. Meaningful only when the circuit restores
    /// its aux qubits; pair with [`aux_restored`].
    pub fn projected_main_block(&self, main: usize, aux: usize) -> UnitaryMatrix {
        assert_eq!(self.dim, 1usize << (main + aux));
        let mdim = 1usize << main;
        let mut out = UnitaryMatrix { dim: mdim, cols: vec![ZERO; mdim * mdim] };
        for c in 0..mdim {
            for r in 0..mdim {
                out.set(r, c, self.get(r << aux, c << aux));
            }
        }
        out
    }
}

/// A normalized state over `num_qubits` wires, wire 0 most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex>,
}

impl StateVector {
    /// Computational basis state |index>.
    pub fn basis(num_qubits: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << num_qubits];
        amps[index] = ONE;
        StateVector { num_qubits, amps }
    }

    /// Builds from raw amplitudes; fails unless the squared-amplitude sum is
    /// 1 within [`TOLERANCE`].
    pub fn from_amplitudes(amps: Vec<Complex>) -> Result<Self, NumericsError> {
        let dim = amps.len();
        if !dim.is_power_of_two() {
            return Err(NumericsError::DimensionMismatch { expected: dim.next_power_of_two(), got: dim });
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > TOLERANCE {
            return Err(NumericsError::NotNormalized);
        }
        Ok(StateVector { num_qubits: dim.trailing_zeros() as usize, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex] {
        &self.amps
    }

    /// Largest amplitude distance to another state of the same size.
    pub fn max_distance(&self, other: &StateVector) -> f64 {
        assert_eq!(self.num_qubits, other.num_qubits);
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquivalenceMode {
    Exact,
    GlobalPhase,
}

/// Oracle equality of two equal-dimension matrices, either exact or up to a
/// single global phase. Canonicalization for the phase mode divides each
/// matrix by its first entry of magnitude above the tolerance, scanning in
/// row-major order.
pub fn equivalent(u: &UnitaryMatrix, v: &UnitaryMatrix, mode: EquivalenceMode) -> bool {
    equivalent_with_tol(u, v, mode, TOLERANCE)
}

pub fn equivalent_with_tol(u: &UnitaryMatrix, v: &UnitaryMatrix, mode: EquivalenceMode, tol: f64) -> bool {
    if u.dim() != v.dim() {
        return false;
    }
    match mode {
        EquivalenceMode::Exact => u.max_entry_distance(v) <= tol,
        EquivalenceMode::GlobalPhase => {
            let pu = first_significant(u, tol);
            let pv = first_significant(v, tol);
            match (pu, pv) {
                (None, None) => true,
                (Some((ru, cu)), Some((rv, cv))) if (ru, cu) == (rv, cv) => {
                    let fu = u.get(ru, cu);
                    let fv = v.get(rv, cv);
                    let dim = u.dim();
                    for r in 0..dim {
                        for c in 0..dim {
                            if (u.get(r, c) / fu - v.get(r, c) / fv).norm() > tol {
                                return false;
                            }
                        }
                    }
                    true
                }
                _ => false,
            }
        }
    }
}

fn first_significant(m: &UnitaryMatrix, tol: f64) -> Option<(usize, usize)> {
    for r in 0..m.dim() {
        for c in 0..m.dim() {
            if m.get(r, c).norm() > tol {
                return Some((r, c));
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Gate resolution and evolution kernels
// ---------------------------------------------------------------------------

fn builtin_matrix(gate: &GateKind, dagger: bool) -> Option<[[Complex; 2]; 2]> {
    let i = Complex::new(0.0, 1.0);
    let m = match gate {
        GateKind::X => [[ZERO, ONE], [ONE, ZERO]],
        GateKind::Y => [[ZERO, -i], [i, ZERO]],
        GateKind::Z => [[ONE, ZERO], [ZERO, -ONE]],
        GateKind::H => {
            let s = Complex::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            [[s, s], [s, -s]]
        }
        GateKind::RX(t) => {
            let t = if dagger { -t } else { *t };
            let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
            [[Complex::new(c, 0.0), Complex::new(0.0, -s)], [Complex::new(0.0, -s), Complex::new(c, 0.0)]]
        }
        GateKind::RY(t) => {
            let t = if dagger { -t } else { *t };
            let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
            [[Complex::new(c, 0.0), Complex::new(-s, 0.0)], [Complex::new(s, 0.0), Complex::new(c, 0.0)]]
        }
        GateKind::RZ(t) => {
            let t = if dagger { -t } else { *t };
            [[(-i * t / 2.0).exp(), ZERO], [ZERO, (i * t / 2.0).exp()]]
        }
        GateKind::P(t) => {
            let t = if dagger { -t } else { *t };
            [[ONE, ZERO], [ZERO, (i * t).exp()]]
        }
        GateKind::Library(_) => return None,
    };
    // The named Paulis and H are self-inverse; rotations were negated above.
    Some(m)
}

fn wire_of(qid: QubitId, num_main: usize) -> usize {
    match qid {
        QubitId::Main(i) => i as usize,
        QubitId::Aux(j) => num_main + j as usize,
    }
}

fn wires_mask(wires: &[usize], n: usize) -> usize {
    wires.iter().map(|w| 1usize << (n - 1 - w)).fold(0, |acc, b| acc | b)
}

/// In-place 2x2 gate at `wire`, restricted to indices where every bit of
/// `ctrl_mask` is set.
fn apply_single(amps: &mut [Complex], n: usize, wire: usize, m: &[[Complex; 2]; 2], ctrl_mask: usize, par: bool) {
    let stride = 1usize << (n - 1 - wire);
    let block = stride << 1;
    let run = |chunk_idx: usize, chunk: &mut [Complex]| {
        let base = chunk_idx * block;
        let (lo, hi) = chunk.split_at_mut(stride);
        for off in 0..stride {
            if (base + off) & ctrl_mask == ctrl_mask {
                let a0 = lo[off];
                let a1 = hi[off];
                lo[off] = m[0][0] * a0 + m[0][1] * a1;
                hi[off] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    };
    #[cfg(feature = "parallel")]
    if par && amps.len() >= PAR_MIN_DIM {
        amps.par_chunks_mut(block)
            .enumerate()
            .for_each(|(idx, chunk)| run(idx, chunk));
        return;
    }
    let _ = par;
    for (idx, chunk) in amps.chunks_mut(block).enumerate() {
        run(idx, chunk);
    }
}

/// In-place `2^k` gate at `wires` (wires[0] = most significant sub-bit),
/// restricted by `ctrl_mask`. Gather/scatter over each block of the
/// non-target space.
fn apply_multi(amps: &mut [Complex], n: usize, wires: &[usize], g: &UnitaryMatrix, ctrl_mask: usize) {
    let k = wires.len();
    let sub = 1usize << k;
    debug_assert_eq!(g.dim(), sub);
    let offsets: Vec<usize> = (0..sub)
        .map(|j| {
            let mut off = 0usize;
            for (t, w) in wires.iter().enumerate() {
                if (j >> (k - 1 - t)) & 1 == 1 {
                    off |= 1usize << (n - 1 - w);
                }
            }
            off
        })
        .collect();
    let targets_mask = wires_mask(wires, n);
    let mut scratch = vec![ZERO; sub];
    for base in 0..amps.len() {
        if base & targets_mask != 0 || base & ctrl_mask != ctrl_mask {
            continue;
        }
        for j in 0..sub {
            scratch[j] = amps[base | offsets[j]];
        }
        for r in 0..sub {
            let mut acc = ZERO;
            for (c, v) in scratch.iter().enumerate() {
                acc += g.get(r, c) * v;
            }
            amps[base | offsets[r]] = acc;
        }
    }
}

/// Walks a sequence over a raw amplitude buffer. `dagger` runs the inverse:
/// reversed order, each gate inverted; `Around` keeps its shape with only
/// the body daggered.
fn evolve_seq(
    amps: &mut [Complex],
    n: usize,
    num_main: usize,
    instrs: &[Instruction],
    ctrl_mask: usize,
    dagger: bool,
    par: bool,
) {
    if dagger {
        for instr in instrs.iter().rev() {
            evolve_one(amps, n, num_main, instr, ctrl_mask, true, par);
        }
    } else {
        for instr in instrs {
            evolve_one(amps, n, num_main, instr, ctrl_mask, false, par);
        }
    }
}

fn evolve_one(
    amps: &mut [Complex],
    n: usize,
    num_main: usize,
    instr: &Instruction,
    ctrl_mask: usize,
    dagger: bool,
    par: bool,
) {
    match instr {
        Instruction::Apply { gate, targets } => {
            if let Some(m) = builtin_matrix(gate, dagger) {
                apply_single(amps, n, wire_of(targets[0], num_main), &m, ctrl_mask, par);
            } else if let GateKind::Library(id) = gate {
                let entry = library::entry(id).expect("prevalidated library gate");
                let wires: Vec<usize> = targets.iter().map(|t| wire_of(*t, num_main)).collect();
                if dagger && !entry.self_inverse() {
                    apply_multi(amps, n, &wires, &entry.matrix().dagger(), ctrl_mask);
                } else {
                    apply_multi(amps, n, &wires, entry.matrix(), ctrl_mask);
                }
            }
        }
        Instruction::Controlled { controls, body } => {
            let wires: Vec<usize> = controls.iter().map(|c| wire_of(*c, num_main)).collect();
            let mask = ctrl_mask | wires_mask(&wires, n);
            evolve_seq(amps, n, num_main, body, mask, dagger, par);
        }
        Instruction::Around { outer, body } => {
            // (A† B A)† = A† B† A: the conjugator runs unchanged either way.
            evolve_seq(amps, n, num_main, outer, ctrl_mask, false, par);
            evolve_seq(amps, n, num_main, body, ctrl_mask, dagger, par);
            evolve_seq(amps, n, num_main, outer, ctrl_mask, true, par);
        }
        Instruction::AuxScope { body, .. } => {
            evolve_seq(amps, n, num_main, body, ctrl_mask, dagger, par);
        }
    }
}

/// Checks that every reference fits the register and every library id is
/// registered, so the per-column evolution can run infallibly.
fn prevalidate(instrs: &[Instruction], num_main: usize, total: usize) -> Result<(), NumericsError> {
    let check = |qid: &QubitId| -> Result<(), NumericsError> {
        match qid {
            QubitId::Main(i) => {
                if (*i as usize) < num_main {
                    Ok(())
                } else {
                    Err(NumericsError::QubitOutOfRange { qubit: *qid, num_main })
                }
            }
            QubitId::Aux(j) => {
                if num_main + (*j as usize) < total {
                    Ok(())
                } else {
                    Err(NumericsError::UnresolvedAux { qubit: *qid, total_qubits: total })
                }
            }
        }
    };
    for instr in instrs {
        match instr {
            Instruction::Apply { gate, targets } => {
                for t in targets {
                    check(t)?;
                }
                match gate {
                    GateKind::Library(id) => {
                        let entry =
                            library::entry(id).ok_or_else(|| NumericsError::UnknownGate(id.clone()))?;
                        if entry.qubits() != targets.len() {
                            return Err(NumericsError::DimensionMismatch {
                                expected: entry.qubits(),
                                got: targets.len(),
                            });
                        }
                    }
                    _ => {
                        if targets.len() != 1 {
                            return Err(NumericsError::DimensionMismatch { expected: 1, got: targets.len() });
                        }
                    }
                }
            }
            Instruction::Controlled { controls, body } => {
                for c in controls {
                    check(c)?;
                }
                prevalidate(body, num_main, total)?;
            }
            Instruction::Around { outer, body } => {
                prevalidate(outer, num_main, total)?;
                prevalidate(body, num_main, total)?;
            }
            Instruction::AuxScope { body, .. } => prevalidate(body, num_main, total)?,
        }
    }
    Ok(())
}

/// Builds the full unitary of a circuit over `total_qubits` wires: main
/// qubits first, aux slots above them. Controlled blocks realize the
/// block-diagonal controlled form directly; around blocks expand to
/// conjugator, body, inverse conjugator.
pub fn unitary(circuit: &Circuit, total_qubits: usize) -> Result<UnitaryMatrix, NumericsError> {
    unitary_impl(circuit, total_qubits, cfg!(feature = "parallel"))
}

/// Sequential reference path of [`unitary`]; bit-identical results.
pub fn unitary_seq(circuit: &Circuit, total_qubits: usize) -> Result<UnitaryMatrix, NumericsError> {
    unitary_impl(circuit, total_qubits, false)
}

fn unitary_impl(circuit: &Circuit, total_qubits: usize, par: bool) -> Result<UnitaryMatrix, NumericsError> {
    if total_qubits > MAX_MATRIX_QUBITS {
        return Err(NumericsError::TooLarge { qubits: total_qubits, max: MAX_MATRIX_QUBITS });
    }
    if circuit.num_main > total_qubits {
        return Err(NumericsError::TooLarge { qubits: circuit.num_main, max: total_qubits });
    }
    prevalidate(&circuit.instructions, circuit.num_main, total_qubits)?;
    let dim = 1usize << total_qubits;
    let mut cols = vec![ZERO; dim * dim];
    let evolve_col = |c: usize, col: &mut [Complex]| {
        col[c] = ONE;
        evolve_seq(col, total_qubits, circuit.num_main, &circuit.instructions, 0, false, false);
    };
    #[cfg(feature = "parallel")]
    if par {
        cols.par_chunks_mut(dim)
            .enumerate()
            .for_each(|(c, col)| evolve_col(c, col));
        return Ok(UnitaryMatrix { dim, cols });
    }
    let _ = par;
    for (c, col) in cols.chunks_mut(dim).enumerate() {
        evolve_col(c, col);
    }
    Ok(UnitaryMatrix { dim, cols })
}

/// Gate-by-gate statevector evolution. Agrees with `unitary(...) * state`
/// wherever the matrix cap permits building the full unitary.
pub fn apply(circuit: &Circuit, state: &StateVector) -> Result<StateVector, NumericsError> {
    apply_impl(circuit, state, cfg!(feature = "parallel"))
}

/// Sequential reference path of [`apply`]; bit-identical results.
pub fn apply_seq(circuit: &Circuit, state: &StateVector) -> Result<StateVector, NumericsError> {
    apply_impl(circuit, state, false)
}

fn apply_impl(circuit: &Circuit, state: &StateVector, par: bool) -> Result<StateVector, NumericsError> {
    let n = state.num_qubits();
    if n > MAX_STATE_QUBITS {
        return Err(NumericsError::TooLarge { qubits: n, max: MAX_STATE_QUBITS });
    }
    if circuit.total_qubits() > n {
        return Err(NumericsError::DimensionMismatch { expected: circuit.total_qubits(), got: n });
    }
    prevalidate(&circuit.instructions, circuit.num_main, n)?;
    let mut amps = state.amps.clone();
    evolve_seq(&mut amps, n, circuit.num_main, &circuit.instructions, 0, false, par);
    Ok(StateVector { num_qubits: n, amps })
}

/// True iff for every main-register basis input with the aux region in
/// |0...0>, the output keeps every aux-not-zero amplitude below the
/// tolerance. Runs one statevector per main basis state.
pub fn aux_restored(circuit: &Circuit, main: usize, aux: usize) -> Result<bool, NumericsError> {
    if circuit.num_main != main {
        return Err(NumericsError::DimensionMismatch { expected: circuit.num_main, got: main });
    }
    if circuit.aux_peak() > aux {
        return Err(NumericsError::UnresolvedAux {
            qubit: QubitId::Aux(circuit.aux_peak() as u32 - 1),
            total_qubits: main + aux,
        });
    }
    let total = main + aux;
    let within_caps = total <= MAX_MATRIX_QUBITS || (total <= MAX_STATE_QUBITS && main <= 10);
    if !within_caps {
        return Err(NumericsError::TooLarge { qubits: total, max: MAX_STATE_QUBITS });
    }
    prevalidate(&circuit.instructions, main, total)?;
    if aux == 0 {
        return Ok(true);
    }
    let aux_mask = (1usize << aux) - 1;
    let restored = |m: usize| -> bool {
        let mut amps = vec![ZERO; 1usize << total];
        amps[m << aux] = ONE;
        evolve_seq(&mut amps, total, main, &circuit.instructions, 0, false, false);
        amps.iter()
            .enumerate()
            .all(|(idx, amp)| idx & aux_mask == 0 || amp.norm() <= TOLERANCE)
    };
    #[cfg(feature = "parallel")]
    {
        return Ok((0..1usize << main).into_par_iter().all(restored));
    }
    #[allow(unreachable_code)]
    Ok((0..1usize << main).all(restored))
}

/// Outcome of checking a rewrite against its input circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyOutcome {
    Equivalent,
    /// The induced maps on the main register differ.
    MainBlockMismatch,
    /// One side fails to restore its aux region, so the subspace comparison
    /// is not defined. `side` names the offender.
    AuxNotRestored { side: &'static str },
}

/// Oracle check that a rewritten circuit preserves the input's semantics.
///
/// Without aux qubits the full unitaries must match exactly. With aux
/// involved (including aux freshly introduced by the rewrite), both sides
/// must restore the aux region from |0...0> and their induced maps on the
/// main register must agree up to a global phase.
pub fn verify_rewrite(before: &Circuit, after: &Circuit) -> Result<VerifyOutcome, NumericsError> {
    if before.num_main != after.num_main {
        return Err(NumericsError::DimensionMismatch { expected: before.num_main, got: after.num_main });
    }
    let aux = before.aux_peak().max(after.aux_peak());
    let total = before.num_main + aux;
    if total > MAX_MATRIX_QUBITS {
        return Err(NumericsError::TooLarge { qubits: total, max: MAX_MATRIX_QUBITS });
    }
    let ub = unitary(before, total)?;
    let ua = unitary(after, total)?;
    if aux == 0 {
        return Ok(if equivalent(&ub, &ua, EquivalenceMode::Exact) {
            VerifyOutcome::Equivalent
        } else {
            VerifyOutcome::MainBlockMismatch
        });
    }
    if !aux_restored(before, before.num_main, aux)? {
        return Ok(VerifyOutcome::AuxNotRestored { side: "input" });
    }
    if !aux_restored(after, after.num_main, aux)? {
        return Ok(VerifyOutcome::AuxNotRestored { side: "output" });
    }
    let bb = ub.projected_main_block(before.num_main, aux);
    let ba = ua.projected_main_block(after.num_main, aux);
    Ok(if equivalent(&bb, &ba, EquivalenceMode::GlobalPhase) {
        VerifyOutcome::Equivalent
    } else {
        VerifyOutcome::MainBlockMismatch
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{a, around, ccx, controlled, cx, h, q, rz, x, z, Circuit, Instruction};

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn single_circuit(n: usize, instrs: Vec<Instruction>) -> Circuit {
        Circuit::new("t", n, instrs)
    }

    /// Independent construction: embed a gate by explicit Kronecker products
    /// against identity, moving the target to the front with a basis
    /// permutation. Cross-validates the index-bookkeeping path.
    fn kron(a: &UnitaryMatrix, b: &UnitaryMatrix) -> UnitaryMatrix {
        let (da, db) = (a.dim(), b.dim());
        let dim = da * db;
        let mut out = UnitaryMatrix::identity(dim);
        for ra in 0..da {
            for ca in 0..da {
                for rb in 0..db {
                    for cb in 0..db {
                        out.set(ra * db + rb, ca * db + cb, a.get(ra, ca) * b.get(rb, cb));
                    }
                }
            }
        }
        out
    }

    fn basis_swap_to_front(wire: usize, n: usize) -> UnitaryMatrix {
        // Permutation matrix relabeling basis states so `wire` becomes wire 0.
        let dim = 1usize << n;
        let mut out = UnitaryMatrix { dim, cols: vec![ZERO; dim * dim] };
        for idx in 0..dim {
            let bit = (idx >> (n - 1 - wire)) & 1;
            let mut rest = idx & !(1 << (n - 1 - wire));
            // compact remaining bits, then prepend the extracted bit
            let mut compacted = 0usize;
            let mut out_pos = n - 2;
            for w in 0..n {
                if w == wire {
                    continue;
                }
                let b = (rest >> (n - 1 - w)) & 1;
                compacted |= b << out_pos;
                out_pos = out_pos.wrapping_sub(1);
            }
            rest = compacted;
            let to = (bit << (n - 1)) | rest;
            out.set(to, idx, ONE);
        }
        out
    }

    fn naive_single_gate_unitary(m: [[Complex; 2]; 2], wire: usize, n: usize) -> UnitaryMatrix {
        let g = UnitaryMatrix::from_rows(vec![vec![m[0][0], m[0][1]], vec![m[1][0], m[1][1]]]);
        let perm = basis_swap_to_front(wire, n);
        let big = kron(&g, &UnitaryMatrix::identity(1 << (n - 1)));
        perm.dagger().mul(&big).mul(&perm)
    }

    #[test]
    fn cnot_matrix_matches_definition() {
        let circ = single_circuit(2, vec![cx(q(0), q(1))]);
        let u = unitary(&circ, 2).unwrap();
        let expect = UnitaryMatrix::from_rows(vec![
            vec![ONE, ZERO, ZERO, ZERO],
            vec![ZERO, ONE, ZERO, ZERO],
            vec![ZERO, ZERO, ZERO, ONE],
            vec![ZERO, ZERO, ONE, ZERO],
        ]);
        assert!(equivalent(&u, &expect, EquivalenceMode::Exact));
    }

    #[test]
    fn apply_x_flips_basis() {
        let circ = single_circuit(1, vec![x(q(0))]);
        let out = apply(&circ, &StateVector::basis(1, 0)).unwrap();
        assert!((out.amplitudes()[1] - ONE).norm() <= TOLERANCE);
    }

    #[test]
    fn embedding_matches_naive_kronecker_route() {
        // every builtin at every wire of a 3-qubit register
        let gates = [
            GateKind::X,
            GateKind::Y,
            GateKind::Z,
            GateKind::H,
            GateKind::RX(0.37),
            GateKind::RY(-1.2),
            GateKind::RZ(2.4),
            GateKind::P(0.9),
        ];
        for gate in gates {
            for wire in 0..3usize {
                let circ = single_circuit(3, vec![Instruction::apply(gate.clone(), q(wire as u32))]);
                let fast = unitary(&circ, 3).unwrap();
                let naive = naive_single_gate_unitary(builtin_matrix(&gate, false).unwrap(), wire, 3);
                assert!(
                    equivalent(&fast, &naive, EquivalenceMode::Exact),
                    "gate {gate:?} wire {wire} disagrees with kronecker construction"
                );
            }
        }
    }

    #[test]
    fn adjoint_times_forward_is_identity() {
        let instrs = vec![h(q(0)), cx(q(0), q(1)), rz(0.7, q(1)), ccx(q(0), q(1), q(2))];
        let circ = single_circuit(3, instrs.clone());
        let inv = single_circuit(3, crate::ir::adjoint(&instrs));
        let prod = unitary(&inv, 3).unwrap().mul(&unitary(&circ, 3).unwrap());
        assert!(equivalent(&prod, &UnitaryMatrix::identity(8), EquivalenceMode::Exact));
    }

    #[test]
    fn around_denotes_conjugation() {
        let outer = vec![h(q(0)), cx(q(0), q(1))];
        let body = vec![rz(1.1, q(1))];
        let circ = single_circuit(2, vec![around(outer.clone(), body.clone())]);
        let u = unitary(&circ, 2).unwrap();
        let ua = unitary(&single_circuit(2, outer), 2).unwrap();
        let ub = unitary(&single_circuit(2, body), 2).unwrap();
        let expect = ua.dagger().mul(&ub).mul(&ua);
        assert!(equivalent(&u, &expect, EquivalenceMode::Exact));
    }

    #[test]
    fn around_of_empty_body_is_identity() {
        let circ = single_circuit(2, vec![around(vec![h(q(0)), cx(q(0), q(1))], vec![])]);
        let u = unitary(&circ, 2).unwrap();
        assert!(equivalent(&u, &UnitaryMatrix::identity(4), EquivalenceMode::Exact));
    }

    #[test]
    fn controlled_merge_equals_merged_controls() {
        let nested = controlled(vec![q(0)], vec![controlled(vec![q(1)], vec![x(q(2))]).unwrap()]).unwrap();
        let merged = controlled(vec![q(0), q(1)], vec![x(q(2))]).unwrap();
        let un = unitary(&single_circuit(3, vec![nested]), 3).unwrap();
        let um = unitary(&single_circuit(3, vec![merged]), 3).unwrap();
        assert!(equivalent(&un, &um, EquivalenceMode::Exact));
    }

    #[test]
    fn controlled_is_block_diagonal_per_definition() {
        let base = single_circuit(1, vec![h(q(0))]);
        let u1 = unitary(&base, 1).unwrap();
        let expect = u1.controlled(2);
        let circ = single_circuit(3, vec![controlled(vec![q(0), q(1)], vec![h(q(2))]).unwrap()]);
        let got = unitary(&circ, 3).unwrap();
        assert!(equivalent(&got, &expect, EquivalenceMode::Exact));
    }

    #[test]
    fn global_phase_equivalence() {
        let id = UnitaryMatrix::identity(4);
        let mut phased = UnitaryMatrix::identity(4);
        let ph = (Complex::new(0.0, 1.0) * std::f64::consts::PI / 5.0).exp();
        for r in 0..4 {
            phased.set(r, r, ph);
        }
        assert!(equivalent(&id, &phased, EquivalenceMode::GlobalPhase));
        assert!(!equivalent(&id, &phased, EquivalenceMode::Exact));
    }

    #[test]
    fn relative_phase_is_not_global_phase() {
        let mut v = UnitaryMatrix::identity(4);
        v.set(2, 2, -ONE);
        assert!(!equivalent(&UnitaryMatrix::identity(4), &v, EquivalenceMode::GlobalPhase));
    }

    #[test]
    fn unitarity_invariant_holds_for_ir_products() {
        let circ = single_circuit(
            3,
            vec![h(q(0)), cx(q(0), q(1)), rz(0.3, q(2)), ccx(q(0), q(1), q(2)), h(q(2))],
        );
        let u = unitary(&circ, 3).unwrap();
        assert!(u.is_unitary(TOLERANCE));
    }

    #[test]
    fn diagonal_on_controls_commutes_with_controlled_u() {
        // D on the control wires commutes with C^n U, for random D and U.
        let mut seed = 0x1234_5678_9abc_def0u64;
        let mut next_angle = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 33) as f64 / (1u64 << 31) as f64 * std::f64::consts::TAU - std::f64::consts::PI
        };
        for _ in 0..20 {
            let d = single_circuit(
                3,
                vec![
                    rz(next_angle(), q(0)),
                    Instruction::apply(GateKind::P(next_angle()), q(1)),
                    z(q(0)),
                ],
            );
            let cu = single_circuit(
                3,
                vec![controlled(
                    vec![q(0), q(1)],
                    vec![h(q(2)), Instruction::apply(GateKind::RY(next_angle()), q(2))],
                )
                .unwrap()],
            );
            let ud = unitary(&d, 3).unwrap();
            let ucu = unitary(&cu, 3).unwrap();
            assert!(equivalent(&ud.mul(&ucu), &ucu.mul(&ud), EquivalenceMode::Exact));
        }
    }

    #[test]
    fn too_large_register_is_refused() {
        let circ = single_circuit(13, vec![x(q(0))]);
        assert!(matches!(unitary(&circ, 13), Err(NumericsError::TooLarge { .. })));
    }

    #[test]
    fn unresolved_aux_is_reported() {
        let circ = Circuit::new("t", 1, vec![Instruction::AuxScope { aux: vec![a(0)], body: vec![x(a(0))] }]);
        assert!(matches!(unitary(&circ, 1), Err(NumericsError::UnresolvedAux { .. })));
    }

    #[test]
    fn aux_restored_rejects_h_on_aux() {
        let circ = Circuit::new("leak", 1, vec![Instruction::AuxScope { aux: vec![a(0)], body: vec![h(a(0))] }]);
        assert_eq!(aux_restored(&circ, 1, 1), Ok(false));
    }

    #[test]
    fn aux_restored_accepts_compute_uncompute() {
        let toffoli = ccx(q(0), q(1), a(0));
        let circ = Circuit::new(
            "ok",
            3,
            vec![Instruction::AuxScope {
                aux: vec![a(0)],
                body: vec![around(vec![toffoli], vec![cx(a(0), q(2))])],
            }],
        );
        assert_eq!(aux_restored(&circ, 3, 1), Ok(true));
    }

    #[test]
    fn parallel_and_sequential_paths_agree_exactly() {
        let circ = single_circuit(
            4,
            vec![
                h(q(0)),
                cx(q(0), q(1)),
                ccx(q(0), q(1), q(2)),
                rz(0.7, q(3)),
                around(vec![h(q(2))], vec![cx(q(2), q(3))]),
            ],
        );
        let u_par = unitary(&circ, 4).unwrap();
        let u_seq = unitary_seq(&circ, 4).unwrap();
        assert_eq!(u_par, u_seq);
        let s = StateVector::basis(4, 5);
        assert_eq!(apply(&circ, &s).unwrap(), apply_seq(&circ, &s).unwrap());
    }

    #[test]
    fn statevector_norm_is_enforced() {
        let bad = StateVector::from_amplitudes(vec![c(0.5, 0.0), c(0.5, 0.0)]);
        assert_eq!(bad.unwrap_err(), NumericsError::NotNormalized);
    }
}
