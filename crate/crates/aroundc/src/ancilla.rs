//! Scoped auxiliary-qubit management.
//!
//! Clean aux qubits start in |0>, get computed into by a conjugation, and
//! must be provably back in |0> before their slot returns to the free list.
//! The checker is purely structural — class lattice plus a usage walk, no
//! matrices — so it runs at any circuit size and stays deliberately
//! pessimistic: everything it accepts restores its aux qubits (the oracle
//! check `aux_restored` agrees), while some safe circuits are rejected.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use crate::classify::{classify_gate, classify_instrs, GateClass};
use crate::ir::{qubits_touched, Circuit, Instruction, QubitId};

/// A named aux-allocation rule: maps the invoking operation's argument count
/// to a qubit count. The V-chain uses "one aux if there are more than two
/// controls".
#[derive(Clone)]
pub struct AuxRequest {
    name: String,
    sizing: fn(usize) -> usize,
}

impl AuxRequest {
    pub fn new(name: impl Into<String>, sizing: fn(usize) -> usize) -> Self {
        AuxRequest { name: name.into(), sizing }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn qubits_for(&self, arg_count: usize) -> usize {
        (self.sizing)(arg_count)
    }
}

impl fmt::Debug for AuxRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AuxRequest").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AncillaError {
    PoolExhausted { requested: usize, available: usize },
    /// Release attempted while the owning scope's verdict is rejected.
    UnsafeRelease { violations: usize },
    /// Release of a qubit that is not currently in use.
    DoubleFree(QubitId),
    /// Pool operations take aux-kind qubits only.
    NotAux(QubitId),
}

impl fmt::Display for AncillaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AncillaError::PoolExhausted { requested, available } => {
                write!(f, "aux pool exhausted: requested {requested}, {available} free")
            }
            AncillaError::UnsafeRelease { violations } => {
                write!(f, "refusing to release aux qubits: safety verdict carries {violations} violation(s)")
            }
            AncillaError::DoubleFree(q) => write!(f, "aux qubit {q} is not in use"),
            AncillaError::NotAux(q) => write!(f, "{q} is not an aux qubit"),
        }
    }
}

impl std::error::Error for AncillaError {}

/// Free-list allocator over the auxiliary region. Allocation hands out the
/// lowest free indices; release returns them for reuse by sibling scopes.
#[derive(Debug, Clone)]
pub struct AuxPool {
    capacity: usize,
    free: BTreeSet<u32>,
    in_use: BTreeSet<u32>,
    peak_in_use: usize,
}

impl AuxPool {
    pub fn new(capacity: usize) -> Self {
        AuxPool {
            capacity,
            free: (0..capacity as u32).collect(),
            in_use: BTreeSet::new(),
            peak_in_use: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn free_count(&self) -> usize {
        self.free.len()
    }

    pub fn in_use_count(&self) -> usize {
        self.in_use.len()
    }

    /// High-water mark of simultaneous allocations.
    pub fn peak_in_use(&self) -> usize {
        self.peak_in_use
    }

    /// Adds `extra` fresh slots above the current capacity. The simulator
    /// treats grown qubits as starting in |0>.
    pub fn grow(&mut self, extra: usize) {
        for i in 0..extra {
            self.free.insert((self.capacity + i) as u32);
        }
        self.capacity += extra;
    }

    /// Moves the `n` lowest free slots to in-use and returns them, in index
    /// order.
    pub fn allocate(&mut self, n: usize) -> Result<Vec<QubitId>, AncillaError> {
        if n > self.free.len() {
            return Err(AncillaError::PoolExhausted { requested: n, available: self.free.len() });
        }
        let picked: Vec<u32> = self.free.iter().take(n).copied().collect();
        for idx in &picked {
            self.free.remove(idx);
            self.in_use.insert(*idx);
        }
        self.peak_in_use = self.peak_in_use.max(self.in_use.len());
        Ok(picked.into_iter().map(QubitId::Aux).collect())
    }

    /// Returns qubits to the free list. Requires the accepted verdict of the
    /// scope that owned them; rejected scopes must not recycle their qubits.
    pub fn release(&mut self, qs: &[QubitId], verdict: &SafetyVerdict) -> Result<(), AncillaError> {
        if !verdict.accepted {
            return Err(AncillaError::UnsafeRelease { violations: verdict.violations.len() });
        }
        for q in qs {
            match q {
                QubitId::Aux(idx) => {
                    if !self.in_use.contains(idx) {
                        return Err(AncillaError::DoubleFree(*q));
                    }
                }
                QubitId::Main(_) => return Err(AncillaError::NotAux(*q)),
            }
        }
        for q in qs {
            let idx = q.index();
            self.in_use.remove(&idx);
            self.free.insert(idx);
        }
        Ok(())
    }
}

/// One checker failure: where in the instruction tree, and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub reason: String,
}

/// Outcome of the static aux-safety check. `accepted` iff no violations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafetyVerdict {
    pub accepted: bool,
    pub violations: Vec<Violation>,
}

impl SafetyVerdict {
    fn from_violations(violations: Vec<Violation>) -> Self {
        SafetyVerdict { accepted: violations.is_empty(), violations }
    }

    /// An accepted verdict for scopes with nothing to check.
    pub fn accepted() -> Self {
        SafetyVerdict { accepted: true, violations: Vec::new() }
    }
}

/// Statically checks that a scope's body returns its aux qubits to |0>.
///
/// The walk accepts a use of an aux qubit when (a) a diagonal gate targets
/// it, (b) it serves purely as a control, or (c) a conjugation acts on it
/// with a permutation-like conjugator and the conjugation body passes the
/// same check with the conjugator's qubits added to the protected set. That
/// last widening is what makes the verdict sound: a body write to any qubit
/// the conjugator acts on — aux or not — would break the uncompute
/// cancellation, so it is flagged.
pub fn check_aux_safety(aux: &[QubitId], body: &[Instruction]) -> SafetyVerdict {
    let mut violations = Vec::new();
    let protected: HashSet<QubitId> = aux.iter().copied().collect();
    let mut path = vec!["scope".to_string()];
    walk(&protected, body, &mut path, &mut violations);
    SafetyVerdict::from_violations(violations)
}

fn note(path: &[String], reason: String, violations: &mut Vec<Violation>) {
    violations.push(Violation { path: path.join("/"), reason });
}

fn walk(
    protected: &HashSet<QubitId>,
    instrs: &[Instruction],
    path: &mut Vec<String>,
    violations: &mut Vec<Violation>,
) {
    for (i, instr) in instrs.iter().enumerate() {
        path.push(i.to_string());
        match instr {
            Instruction::Apply { gate, targets } => {
                for t in targets {
                    if protected.contains(t)
                        && classify_gate(gate).unwrap_or(GateClass::General) != GateClass::Diagonal
                    {
                        note(
                            path,
                            format!("non-diagonal gate {} targets {t} outside a permutation conjugation", gate.name()),
                            violations,
                        );
                    }
                }
            }
            Instruction::Controlled { body, .. } => {
                // control positions are always fine; keep checking the body
                path.push("ctrl.body".into());
                walk(protected, body, path, violations);
                path.pop();
            }
            Instruction::Around { outer, body } => {
                let touched = qubits_touched(outer);
                if touched.is_disjoint(protected) {
                    path.push("around.body".into());
                    walk(protected, body, path, violations);
                    path.pop();
                } else {
                    if !classify_instrs(outer).is_permutation() {
                        note(
                            path,
                            "conjugator acting on a protected qubit is not permutation-classified".into(),
                            violations,
                        );
                    }
                    let extended: HashSet<QubitId> = protected.union(&touched).copied().collect();
                    path.push("around.body".into());
                    walk(&extended, body, path, violations);
                    path.pop();
                }
            }
            Instruction::AuxScope { aux, body } => {
                for q in aux {
                    if protected.contains(q) {
                        note(path, format!("nested scope redeclares live aux qubit {q}"), violations);
                    }
                }
                path.push("aux.body".into());
                walk(protected, body, path, violations);
                path.pop();
            }
        }
        path.pop();
    }
}

/// Checks every aux scope in a circuit and aggregates the verdicts.
pub fn check_circuit(circuit: &Circuit) -> SafetyVerdict {
    let mut violations = Vec::new();
    fn visit(instrs: &[Instruction], prefix: &mut Vec<String>, violations: &mut Vec<Violation>) {
        for (i, instr) in instrs.iter().enumerate() {
            prefix.push(i.to_string());
            match instr {
                Instruction::AuxScope { aux, body } => {
                    let verdict = check_aux_safety(aux, body);
                    for v in verdict.violations {
                        violations.push(Violation {
                            path: format!("{}/{}", prefix.join("/"), v.path),
                            reason: v.reason,
                        });
                    }
                    visit(body, prefix, violations);
                }
                Instruction::Controlled { body, .. } => visit(body, prefix, violations),
                Instruction::Around { outer, body } => {
                    visit(outer, prefix, violations);
                    visit(body, prefix, violations);
                }
                Instruction::Apply { .. } => {}
            }
            prefix.pop();
        }
    }
    let mut prefix = Vec::new();
    visit(&circuit.instructions, &mut prefix, &mut violations);
    SafetyVerdict::from_violations(violations)
}
