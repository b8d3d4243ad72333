//! Gate-class analysis.
//!
//! Every gate or instruction sequence is assigned a class in
//! {Permutation, Diagonal, General}. A diagonal is a permutation whose index
//! function is the identity, so Diagonal refines Permutation and passes that
//! need "permutation" accept both. Classification is sound but incomplete:
//! General is always a safe answer, and structurally opaque sequences fall
//! back to a matrix check only up to [`MATRIX_FALLBACK_QUBITS`] qubits.

use std::collections::BTreeSet;
use std::fmt;

use crate::ir::{Circuit, GateKind, Instruction, QubitId};
use crate::numerics::{self, Complex, UnitaryMatrix, TOLERANCE};
use crate::passes::library;

/// Structural fallback cap: above this many (compacted) qubits the analysis
/// stays pessimistic and reports General.
pub const MATRIX_FALLBACK_QUBITS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateClass {
    /// Exactly one significant entry per row and per column (phases allowed).
    Permutation,
    /// Significant entries only on the main diagonal. A refinement of
    /// Permutation (index function = identity).
    Diagonal,
    /// No structural guarantee.
    General,
}

impl GateClass {
    /// True for Permutation or Diagonal.
    pub fn is_permutation(&self) -> bool {
        matches!(self, GateClass::Permutation | GateClass::Diagonal)
    }

    /// Class of a product of two operators of the given classes.
    pub fn compose(self, other: GateClass) -> GateClass {
        use GateClass::*;
        match (self, other) {
            (Diagonal, Diagonal) => Diagonal,
            (a, b) if a.is_permutation() && b.is_permutation() => Permutation,
            _ => General,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifyError {
    UnknownGate(String),
    NotPermutation,
}

impl fmt::Display for ClassifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifyError::UnknownGate(id) => write!(f, "unknown gate identifier `{id}`"),
            ClassifyError::NotPermutation => {
                write!(f, "matrix has a row or column without exactly one significant entry")
            }
        }
    }
}

impl std::error::Error for ClassifyError {}

/// A permutation gate in index-function form: maps |k> to
/// `exp(i*phases[k]) |perm[k]>`.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationSpec {
    pub perm: Vec<usize>,
    pub phases: Vec<f64>,
}

impl PermutationSpec {
    /// Rebuilds the dense matrix this spec describes.
    pub fn to_matrix(&self) -> UnitaryMatrix {
        let dim = self.perm.len();
        let mut m = UnitaryMatrix::identity(dim);
        for r in 0..dim {
            for c in 0..dim {
                m.set(r, c, Complex::new(0.0, 0.0));
            }
        }
        for (k, &pk) in self.perm.iter().enumerate() {
            m.set(pk, k, (Complex::new(0.0, 1.0) * self.phases[k]).exp());
        }
        m
    }
}

/// A diagonal gate as per-index phase angles: |k> picks up `exp(i*phases[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalSpec {
    pub phases: Vec<f64>,
}

impl DiagonalSpec {
    pub fn to_matrix(&self) -> UnitaryMatrix {
        let dim = self.phases.len();
        let mut m = UnitaryMatrix::identity(dim);
        for (k, &ph) in self.phases.iter().enumerate() {
            m.set(k, k, (Complex::new(0.0, 1.0) * ph).exp());
        }
        m
    }
}

/// Class of a single gate kind. Library gates use their registered class.
pub fn classify_gate(gate: &GateKind) -> Result<GateClass, ClassifyError> {
    Ok(match gate {
        GateKind::X | GateKind::Y => GateClass::Permutation,
        GateKind::Z | GateKind::RZ(_) | GateKind::P(_) => GateClass::Diagonal,
        GateKind::H | GateKind::RX(_) | GateKind::RY(_) => GateClass::General,
        GateKind::Library(id) => library::entry(id)
            .ok_or_else(|| ClassifyError::UnknownGate(id.clone()))?
            .gate_class(),
    })
}

/// Structural class of one instruction: controlled blocks inherit the body's
/// class when it is permutation-like, and an around block composes as
/// class(A) * class(B) * class(A) since the adjoint preserves class.
fn classify_structural(instr: &Instruction) -> GateClass {
    match instr {
        Instruction::Apply { gate, .. } => classify_gate(gate).unwrap_or(GateClass::General),
        Instruction::Controlled { body, .. } => {
            let inner = classify_structural_seq(body);
            if inner.is_permutation() {
                inner
            } else {
                GateClass::General
            }
        }
        Instruction::Around { outer, body } => {
            let ca = classify_structural_seq(outer);
            let cb = classify_structural_seq(body);
            ca.compose(cb).compose(ca)
        }
        Instruction::AuxScope { body, .. } => classify_structural_seq(body),
    }
}

/// Structural class of a sequence: the composition of its instruction
/// classes (the empty product is the identity, hence Diagonal).
pub fn classify_structural_seq(instrs: &[Instruction]) -> GateClass {
    instrs
        .iter()
        .fold(GateClass::Diagonal, |acc, i| acc.compose(classify_structural(i)))
}

/// Class of an instruction sequence: structural rules first, then a dense
/// matrix check over the compacted qubits when the sequence is small enough,
/// else the pessimistic General.
pub fn classify_instrs(instrs: &[Instruction]) -> GateClass {
    let structural = classify_structural_seq(instrs);
    if structural != GateClass::General {
        return structural;
    }
    match fallback_matrix(instrs) {
        Some(u) => {
            if is_diagonal_matrix(&u, TOLERANCE) {
                GateClass::Diagonal
            } else if is_permutation_matrix(&u, TOLERANCE) {
                GateClass::Permutation
            } else {
                GateClass::General
            }
        }
        None => GateClass::General,
    }
}

/// Builds the sequence's unitary over a compacted register (referenced
/// qubits relabeled to wires 0..q-1); permutation/diagonal structure is
/// invariant under the relabeling.
fn fallback_matrix(instrs: &[Instruction]) -> Option<UnitaryMatrix> {
    let mut qubits: BTreeSet<QubitId> = crate::ir::qubits_touched(instrs).into_iter().collect();
    if qubits.is_empty() {
        qubits.insert(QubitId::Main(0));
    }
    if qubits.len() > MATRIX_FALLBACK_QUBITS {
        return None;
    }
    let order: Vec<QubitId> = qubits.into_iter().collect();
    let remap = |qid: QubitId| -> QubitId {
        let pos = order.iter().position(|x| *x == qid).expect("qubit collected above");
        QubitId::Main(pos as u32)
    };
    let remapped = remap_instrs(instrs, &remap);
    let circ = Circuit::new("classify-fallback", order.len(), remapped);
    numerics::unitary(&circ, order.len()).ok()
}

fn remap_instrs(instrs: &[Instruction], remap: &impl Fn(QubitId) -> QubitId) -> Vec<Instruction> {
    instrs
        .iter()
        .map(|instr| match instr {
            Instruction::Apply { gate, targets } => Instruction::Apply {
                gate: gate.clone(),
                targets: targets.iter().map(|t| remap(*t)).collect(),
            },
            Instruction::Controlled { controls, body } => Instruction::Controlled {
                controls: controls.iter().map(|c| remap(*c)).collect(),
                body: remap_instrs(body, remap),
            },
            Instruction::Around { outer, body } => Instruction::Around {
                outer: remap_instrs(outer, remap),
                body: remap_instrs(body, remap),
            },
            Instruction::AuxScope { body, .. } => Instruction::AuxScope {
                aux: Vec::new(),
                body: remap_instrs(body, remap),
            },
        })
        .collect()
}

/// One significant entry per row and per column.
pub fn is_permutation_matrix(u: &UnitaryMatrix, tol: f64) -> bool {
    let dim = u.dim();
    let mut row_seen = vec![false; dim];
    for c in 0..dim {
        let mut hits = 0;
        for (r, seen) in row_seen.iter_mut().enumerate() {
            if u.get(r, c).norm() > tol {
                hits += 1;
                if hits > 1 || *seen {
                    return false;
                }
                *seen = true;
            }
        }
        if hits != 1 {
            return false;
        }
    }
    true
}

/// Off-diagonal magnitudes all below `tol`.
pub fn is_diagonal_matrix(u: &UnitaryMatrix, tol: f64) -> bool {
    let dim = u.dim();
    for c in 0..dim {
        for r in 0..dim {
            if r != c && u.get(r, c).norm() > tol {
                return false;
            }
        }
    }
    true
}

/// Extracts the index function and phases of a permutation matrix;
/// [`ClassifyError::NotPermutation`] when a row or column carries any number
/// of significant entries other than one.
pub fn extract_permutation(u: &UnitaryMatrix) -> Result<PermutationSpec, ClassifyError> {
    let dim = u.dim();
    let mut perm = vec![usize::MAX; dim];
    let mut phases = vec![0.0; dim];
    let mut row_seen = vec![false; dim];
    for c in 0..dim {
        let mut found = None;
        for r in 0..dim {
            if u.get(r, c).norm() > TOLERANCE {
                if found.is_some() {
                    return Err(ClassifyError::NotPermutation);
                }
                found = Some(r);
            }
        }
        let r = found.ok_or(ClassifyError::NotPermutation)?;
        if row_seen[r] {
            return Err(ClassifyError::NotPermutation);
        }
        row_seen[r] = true;
        perm[c] = r;
        phases[c] = u.get(r, c).arg();
    }
    Ok(PermutationSpec { perm, phases })
}
