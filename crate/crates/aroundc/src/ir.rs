//! Circuit intermediate representation.
//!
//! A circuit is a tree of [`Instruction`]s: plain gate applications, control
//! blocks, `around` (conjugation) blocks, and auxiliary-qubit scopes. The
//! `around` node stores its outer sequence once; the closing uncompute half
//! is always implicit. IR values are immutable after construction — rewrite
//! passes return new circuits.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A logical qubit reference: either a position in the main register or a
/// slot in the auxiliary region (which sits above the main register once
/// resolved to wires).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QubitId {
    Main(u32),
    Aux(u32),
}

impl QubitId {
    pub fn main(index: u32) -> Self {
        QubitId::Main(index)
    }

    pub fn aux(index: u32) -> Self {
        QubitId::Aux(index)
    }

    pub fn index(&self) -> u32 {
        match self {
            QubitId::Main(i) | QubitId::Aux(i) => *i,
        }
    }

    pub fn is_aux(&self) -> bool {
        matches!(self, QubitId::Aux(_))
    }
}

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QubitId::Main(i) => write!(f, "q{i}"),
            QubitId::Aux(i) => write!(f, "aux{i}"),
        }
    }
}

/// Shorthand for `QubitId::Main(i)`.
pub fn q(index: u32) -> QubitId {
    QubitId::Main(index)
}

/// Shorthand for `QubitId::Aux(i)`.
pub fn a(index: u32) -> QubitId {
    QubitId::Aux(index)
}

/// A gate kind: one of the eight built-in single-qubit gates, or a gate
/// registered in the library (multi-qubit, e.g. the Toffoli variants).
/// Rotation and phase kinds carry exactly one angle in radians; angles are
/// stored raw (no normalization mod 2π) so `adjoint(adjoint(g)) == g`
/// exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GateKind {
    X,
    Y,
    Z,
    H,
    RX(f64),
    RY(f64),
    RZ(f64),
    P(f64),
    Library(String),
}

impl GateKind {
    /// Number of qubits the gate acts on, if known without the library.
    /// Library gates report `None`; resolve through the registry.
    pub fn builtin_arity(&self) -> Option<usize> {
        match self {
            GateKind::Library(_) => None,
            _ => Some(1),
        }
    }

    /// The inverse gate, when it is again a single named gate.
    /// X, Y, Z, H are self-inverse; rotations and phases negate their angle.
    /// Library gates are handled at the instruction level (they may expand).
    pub fn adjoint_builtin(&self) -> Option<GateKind> {
        match self {
            GateKind::X | GateKind::Y | GateKind::Z | GateKind::H => Some(self.clone()),
            GateKind::RX(t) => Some(GateKind::RX(-t)),
            GateKind::RY(t) => Some(GateKind::RY(-t)),
            GateKind::RZ(t) => Some(GateKind::RZ(-t)),
            GateKind::P(t) => Some(GateKind::P(-t)),
            GateKind::Library(_) => None,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            GateKind::X => "x",
            GateKind::Y => "y",
            GateKind::Z => "z",
            GateKind::H => "h",
            GateKind::RX(_) => "rx",
            GateKind::RY(_) => "ry",
            GateKind::RZ(_) => "rz",
            GateKind::P(_) => "p",
            GateKind::Library(id) => id,
        }
    }
}

/// One node of the circuit tree.
///
/// `Around { outer, body }` denotes `adjoint(outer) ∘ body ∘ outer` as an
/// operator: `outer` runs first, then `body`, then the implicit inverse of
/// `outer`. The uncompute half is never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Instruction {
    Apply {
        gate: GateKind,
        targets: Vec<QubitId>,
    },
    Controlled {
        controls: Vec<QubitId>,
        body: Vec<Instruction>,
    },
    Around {
        outer: Vec<Instruction>,
        body: Vec<Instruction>,
    },
    AuxScope {
        aux: Vec<QubitId>,
        body: Vec<Instruction>,
    },
}

/// A purely unitary circuit: a main register of `num_main` qubits plus
/// whatever auxiliary slots its scopes declare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub name: String,
    pub num_main: usize,
    pub instructions: Vec<Instruction>,
}

/// IR construction and validation errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IrError {
    /// A control qubit is also acted on inside the controlled body.
    Overlap(QubitId),
    /// Empty control list.
    NoControls,
    /// A main-register reference at or above `num_main`.
    QubitOutOfRange(QubitId),
    /// An aux qubit referenced outside any scope declaring it.
    UndeclaredAux(QubitId),
    /// The same qubit appears twice in a target or control list.
    DuplicateQubit(QubitId),
    /// A built-in gate applied to a target count other than one.
    BadArity { gate: String, got: usize },
    /// An aux scope redeclares a qubit already live in an enclosing scope.
    AuxShadowed(QubitId),
}

impl fmt::Display for IrError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IrError::Overlap(qid) => {
                write!(f, "control qubit {qid} is also acted on inside the controlled body")
            }
            IrError::NoControls => write!(f, "controlled block requires at least one control"),
            IrError::QubitOutOfRange(qid) => write!(f, "qubit {qid} is outside the main register"),
            IrError::UndeclaredAux(qid) => {
                write!(f, "aux qubit {qid} referenced outside the scope declaring it")
            }
            IrError::DuplicateQubit(qid) => write!(f, "qubit {qid} listed more than once"),
            IrError::BadArity { gate, got } => {
                write!(f, "gate {gate} expects 1 target, got {got}")
            }
            IrError::AuxShadowed(qid) => {
                write!(f, "aux qubit {qid} shadows one declared by an enclosing scope")
            }
        }
    }
}

impl std::error::Error for IrError {}

impl Instruction {
    pub fn apply(gate: GateKind, target: QubitId) -> Instruction {
        Instruction::Apply { gate, targets: vec![target] }
    }
}

/// Single-gate constructors used pervasively by builders and tests.
pub fn x(t: QubitId) -> Instruction {
    Instruction::apply(GateKind::X, t)
}
pub fn y(t: QubitId) -> Instruction {
    Instruction::apply(GateKind::Y, t)
}
pub fn z(t: QubitId) -> Instruction {
    Instruction::apply(GateKind::Z, t)
}
pub fn h(t: QubitId) -> Instruction {
    Instruction::apply(GateKind::H, t)
}
pub fn rx(theta: f64, t: QubitId) -> Instruction {
    Instruction::apply(GateKind::RX(theta), t)
}
pub fn ry(theta: f64, t: QubitId) -> Instruction {
    Instruction::apply(GateKind::RY(theta), t)
}
pub fn rz(theta: f64, t: QubitId) -> Instruction {
    Instruction::apply(GateKind::RZ(theta), t)
}
pub fn p(lambda: f64, t: QubitId) -> Instruction {
    Instruction::apply(GateKind::P(lambda), t)
}

/// A CNOT in canonical form: a single-controlled X. This is also the shape
/// the flattened gate set uses for two-qubit gates.
pub fn cx(control: QubitId, target: QubitId) -> Instruction {
    Instruction::Controlled { controls: vec![control], body: vec![x(target)] }
}

/// A Toffoli in canonical structural form (two controls on an X).
pub fn ccx(c0: QubitId, c1: QubitId, target: QubitId) -> Instruction {
    Instruction::Controlled { controls: vec![c0, c1], body: vec![x(target)] }
}

/// The set of qubits written by a sequence: every target of an `Apply`,
/// recursively through all block bodies and around outers. Controls of
/// nested blocks are reads, not writes.
pub fn qubits_written(instrs: &[Instruction]) -> HashSet<QubitId> {
    let mut out = HashSet::new();
    collect_written(instrs, &mut out);
    out
}

fn collect_written(instrs: &[Instruction], out: &mut HashSet<QubitId>) {
    for instr in instrs {
        match instr {
            Instruction::Apply { targets, .. } => out.extend(targets.iter().copied()),
            Instruction::Controlled { body, .. } => collect_written(body, out),
            Instruction::Around { outer, body } => {
                collect_written(outer, out);
                collect_written(body, out);
            }
            Instruction::AuxScope { body, .. } => collect_written(body, out),
        }
    }
}

/// Every qubit referenced by the sequence, whether as control or target.
pub fn qubits_touched(instrs: &[Instruction]) -> HashSet<QubitId> {
    let mut out = HashSet::new();
    collect_touched(instrs, &mut out);
    out
}

fn collect_touched(instrs: &[Instruction], out: &mut HashSet<QubitId>) {
    for instr in instrs {
        match instr {
            Instruction::Apply { targets, .. } => out.extend(targets.iter().copied()),
            Instruction::Controlled { controls, body } => {
                out.extend(controls.iter().copied());
                collect_touched(body, out);
            }
            Instruction::Around { outer, body } => {
                collect_touched(outer, out);
                collect_touched(body, out);
            }
            Instruction::AuxScope { body, .. } => collect_touched(body, out),
        }
    }
}

/// Builds a control block. Fails with [`IrError::Overlap`] when a control
/// qubit is also written inside the body; nesting controlled blocks is fine
/// and semantically merges the control sets.
pub fn controlled(controls: Vec<QubitId>, instrs: Vec<Instruction>) -> Result<Instruction, IrError> {
    if controls.is_empty() {
        return Err(IrError::NoControls);
    }
    let mut seen = HashSet::new();
    for c in &controls {
        if !seen.insert(*c) {
            return Err(IrError::DuplicateQubit(*c));
        }
    }
    let written = qubits_written(&instrs);
    for c in &controls {
        if written.contains(c) {
            return Err(IrError::Overlap(*c));
        }
    }
    Ok(Instruction::Controlled { controls, body: instrs })
}

/// Builds a conjugation block denoting `adjoint(outer) ∘ body ∘ outer`.
pub fn around(outer: Vec<Instruction>, body: Vec<Instruction>) -> Instruction {
    Instruction::Around { outer, body }
}

/// The inverse of an instruction sequence: reversed order, each gate
/// replaced by its inverse. `Around` keeps its shape (the conjugation of an
/// inverse is a conjugation): `adjoint(Around(o, b)) = Around(o, adjoint(b))`.
///
/// Library gates verified self-inverse at registration map to themselves;
/// any other library gate is replaced by the adjoint of its exact expansion.
pub fn adjoint(instrs: &[Instruction]) -> Vec<Instruction> {
    let mut out = Vec::with_capacity(instrs.len());
    for instr in instrs.iter().rev() {
        match instr {
            Instruction::Apply { gate, targets } => match gate.adjoint_builtin() {
                Some(inv) => out.push(Instruction::Apply { gate: inv, targets: targets.clone() }),
                None => {
                    if let GateKind::Library(id) = gate {
                        out.extend(crate::passes::library::adjoint_library_apply(id, targets));
                    }
                }
            },
            Instruction::Controlled { controls, body } => out.push(Instruction::Controlled {
                controls: controls.clone(),
                body: adjoint(body),
            }),
            Instruction::Around { outer, body } => out.push(Instruction::Around {
                outer: outer.clone(),
                body: adjoint(body),
            }),
            Instruction::AuxScope { aux, body } => out.push(Instruction::AuxScope {
                aux: aux.clone(),
                body: adjoint(body),
            }),
        }
    }
    out
}

impl Circuit {
    pub fn new(name: impl Into<String>, num_main: usize, instructions: Vec<Instruction>) -> Self {
        Circuit { name: name.into(), num_main, instructions }
    }

    /// High-water mark of the auxiliary region: one past the largest aux
    /// index referenced anywhere in the circuit (declared or applied).
    pub fn aux_peak(&self) -> usize {
        fn note(qids: &[QubitId], peak: &mut usize) {
            for qid in qids {
                if let QubitId::Aux(i) = qid {
                    *peak = (*peak).max(*i as usize + 1);
                }
            }
        }
        fn walk(instrs: &[Instruction], peak: &mut usize) {
            for instr in instrs {
                match instr {
                    Instruction::Apply { targets, .. } => note(targets, peak),
                    Instruction::Controlled { controls, body } => {
                        note(controls, peak);
                        walk(body, peak);
                    }
                    Instruction::Around { outer, body } => {
                        walk(outer, peak);
                        walk(body, peak);
                    }
                    Instruction::AuxScope { aux, body } => {
                        note(aux, peak);
                        walk(body, peak);
                    }
                }
            }
        }
        let mut peak = 0;
        walk(&self.instructions, &mut peak);
        peak
    }

    /// Width of the full register: main qubits plus the aux high-water mark.
    pub fn total_qubits(&self) -> usize {
        self.num_main + self.aux_peak()
    }

    /// Checks the IR invariants: every reference is inside the main register
    /// or declared by an enclosing aux scope, built-in gates have exactly one
    /// target, control lists do not overlap written qubits, and aux scopes do
    /// not shadow live aux qubits.
    pub fn validate(&self) -> Result<(), IrError> {
        let mut live_aux: Vec<QubitId> = Vec::new();
        self.validate_seq(&self.instructions, &mut live_aux)
    }

    fn validate_ref(&self, qid: QubitId, live_aux: &[QubitId]) -> Result<(), IrError> {
        match qid {
            QubitId::Main(i) => {
                if (i as usize) < self.num_main {
                    Ok(())
                } else {
                    Err(IrError::QubitOutOfRange(qid))
                }
            }
            QubitId::Aux(_) => {
                if live_aux.contains(&qid) {
                    Ok(())
                } else {
                    Err(IrError::UndeclaredAux(qid))
                }
            }
        }
    }

    fn validate_seq(&self, instrs: &[Instruction], live_aux: &mut Vec<QubitId>) -> Result<(), IrError> {
        for instr in instrs {
            match instr {
                Instruction::Apply { gate, targets } => {
                    if let Some(arity) = gate.builtin_arity() {
                        if targets.len() != arity {
                            return Err(IrError::BadArity {
                                gate: gate.name().to_string(),
                                got: targets.len(),
                            });
                        }
                    }
                    let mut seen = HashSet::new();
                    for t in targets {
                        self.validate_ref(*t, live_aux)?;
                        if !seen.insert(*t) {
                            return Err(IrError::DuplicateQubit(*t));
                        }
                    }
                }
                Instruction::Controlled { controls, body } => {
                    if controls.is_empty() {
                        return Err(IrError::NoControls);
                    }
                    let mut seen = HashSet::new();
                    for c in controls {
                        self.validate_ref(*c, live_aux)?;
                        if !seen.insert(*c) {
                            return Err(IrError::DuplicateQubit(*c));
                        }
                    }
                    let written = qubits_written(body);
                    for c in controls {
                        if written.contains(c) {
                            return Err(IrError::Overlap(*c));
                        }
                    }
                    self.validate_seq(body, live_aux)?;
                }
                Instruction::Around { outer, body } => {
                    self.validate_seq(outer, live_aux)?;
                    self.validate_seq(body, live_aux)?;
                }
                Instruction::AuxScope { aux, body } => {
                    for id in aux {
                        if !id.is_aux() {
                            return Err(IrError::QubitOutOfRange(*id));
                        }
                        if live_aux.contains(id) {
                            return Err(IrError::AuxShadowed(*id));
                        }
                    }
                    let base = live_aux.len();
                    live_aux.extend(aux.iter().copied());
                    self.validate_seq(body, live_aux)?;
                    live_aux.truncate(base);
                }
            }
        }
        Ok(())
    }
}
