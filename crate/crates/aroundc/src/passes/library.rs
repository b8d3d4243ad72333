//! The gate library: exact Toffoli, relative-phase Toffoli, and the
//! controlled single-qubit expansion identities used by flattening.
//!
//! The library is built once, lazily, and every registered identity is
//! re-verified against the dense oracle during registration: the exact
//! Toffoli ladder must reproduce the textbook matrix, the relative-phase
//! ladder must reproduce its signed-permutation matrix, and the approximate
//! variant must equal `D_p * exact` for the stored diagonal defect.
//! Registration panics on any mismatch rather than serving a wrong gate.
//!
//! Expansion templates are written over formal qubits `q0..q[k-1]`; they are
//! instantiated by substituting the caller's qubits positionally and must
//! contain only built-in gates (so building their matrices never re-enters
//! the library).

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, PI};

use once_cell::sync::Lazy;

use crate::classify::{DiagonalSpec, GateClass};
use crate::ir::{cx, h, p, q, ry, rz, GateKind, Instruction, QubitId};
use crate::numerics::{self, equivalent, Complex, EquivalenceMode, UnitaryMatrix, TOLERANCE};

/// Identifier of the exact Toffoli entry.
pub const CCX: &str = "ccx";
/// Identifier of the relative-phase Toffoli entry.
pub const RCCX: &str = "rccx";

#[derive(Debug, Clone)]
pub struct GateLibraryEntry {
    id: &'static str,
    qubits: usize,
    exact: Vec<Instruction>,
    approx: Option<Vec<Instruction>>,
    gate_class: GateClass,
    approx_defect: Option<DiagonalSpec>,
    /// Library id whose exact expansion is this entry's approx expansion.
    approx_id: Option<&'static str>,
    matrix: UnitaryMatrix,
    self_inverse: bool,
}

impl GateLibraryEntry {
    pub fn id(&self) -> &'static str {
        self.id
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    /// The exact expansion over formal qubits `q0..`.
    pub fn exact(&self) -> &[Instruction] {
        &self.exact
    }

    /// The approximate (relative-phase) expansion, when one is registered.
    pub fn approx(&self) -> Option<&[Instruction]> {
        self.approx.as_deref()
    }

    pub fn gate_class(&self) -> GateClass {
        self.gate_class
    }

    /// Diagonal defect `D_p` with `approx == D_p * exact`.
    pub fn approx_defect(&self) -> Option<&DiagonalSpec> {
        self.approx_defect.as_ref()
    }

    /// Library gate realizing the approximate expansion, when one exists.
    pub fn approx_id(&self) -> Option<&'static str> {
        self.approx_id
    }

    /// The registered semantic unitary (built from the exact expansion).
    pub fn matrix(&self) -> &UnitaryMatrix {
        &self.matrix
    }

    pub fn self_inverse(&self) -> bool {
        self.self_inverse
    }
}

pub struct GateLibrary {
    entries: BTreeMap<&'static str, GateLibraryEntry>,
}

impl GateLibrary {
    pub fn get(&self, id: &str) -> Option<&GateLibraryEntry> {
        self.entries.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }
}

static LIBRARY: Lazy<GateLibrary> = Lazy::new(register_library);

/// The immutable, startup-built library shared by the whole compiler.
pub fn library() -> &'static GateLibrary {
    &LIBRARY
}

/// Lookup shorthand.
pub fn entry(id: &str) -> Option<&'static GateLibraryEntry> {
    LIBRARY.get(id)
}

/// Substitutes actual qubits for the formal `q0..q[k-1]` of a template.
pub fn instantiate(template: &[Instruction], actual: &[QubitId]) -> Vec<Instruction> {
    fn remap(instrs: &[Instruction], actual: &[QubitId]) -> Vec<Instruction> {
        instrs
            .iter()
            .map(|instr| match instr {
                Instruction::Apply { gate, targets } => Instruction::Apply {
                    gate: gate.clone(),
                    targets: targets.iter().map(|t| actual[t.index() as usize]).collect(),
                },
                Instruction::Controlled { controls, body } => Instruction::Controlled {
                    controls: controls.iter().map(|c| actual[c.index() as usize]).collect(),
                    body: remap(body, actual),
                },
                Instruction::Around { outer, body } => Instruction::Around {
                    outer: remap(outer, actual),
                    body: remap(body, actual),
                },
                Instruction::AuxScope { aux, body } => Instruction::AuxScope {
                    aux: aux.clone(),
                    body: remap(body, actual),
                },
            })
            .collect()
    }
    remap(template, actual)
}

/// Inverse of a library-gate application. Entries verified self-inverse at
/// registration map to themselves; anything else inverts its exact
/// expansion. Unknown ids are returned unchanged (they fail later, at
/// resolution).
pub fn adjoint_library_apply(id: &str, targets: &[QubitId]) -> Vec<Instruction> {
    match entry(id) {
        Some(e) if e.self_inverse() => vec![Instruction::Apply {
            gate: GateKind::Library(id.to_string()),
            targets: targets.to_vec(),
        }],
        Some(e) => crate::ir::adjoint(&instantiate(e.exact(), targets)),
        None => vec![Instruction::Apply {
            gate: GateKind::Library(id.to_string()),
            targets: targets.to_vec(),
        }],
    }
}

/// The standard exact Toffoli ladder over `(q0, q1) -> q2`:
/// 6 CX, 2 H, and 7 phase-type gates (T = P(pi/4)).
fn exact_toffoli_template() -> Vec<Instruction> {
    let t = |tq: QubitId| p(FRAC_PI_4, tq);
    let tdg = |tq: QubitId| p(-FRAC_PI_4, tq);
    vec![
        h(q(2)),
        cx(q(1), q(2)),
        tdg(q(2)),
        cx(q(0), q(2)),
        t(q(2)),
        cx(q(1), q(2)),
        tdg(q(2)),
        cx(q(0), q(2)),
        t(q(1)),
        t(q(2)),
        cx(q(0), q(1)),
        h(q(2)),
        t(q(0)),
        tdg(q(1)),
        cx(q(0), q(1)),
    ]
}

/// The relative-phase Toffoli ladder over `(q0, q1) -> q2`: 3 CX and 4 RY.
/// Its unitary is the Toffoli swap with an extra -1 on |010>.
fn relative_phase_toffoli_template() -> Vec<Instruction> {
    vec![
        ry(-FRAC_PI_4, q(2)),
        cx(q(0), q(2)),
        ry(-FRAC_PI_4, q(2)),
        cx(q(1), q(2)),
        ry(FRAC_PI_4, q(2)),
        cx(q(0), q(2)),
        ry(FRAC_PI_4, q(2)),
    ]
}

fn toffoli_matrix() -> UnitaryMatrix {
    // Identity except |110> <-> |111>.
    let mut m = UnitaryMatrix::identity(8);
    let zero = Complex::new(0.0, 0.0);
    let one = Complex::new(1.0, 0.0);
    m.set(6, 6, zero);
    m.set(7, 7, zero);
    m.set(6, 7, one);
    m.set(7, 6, one);
    m
}

fn relative_phase_toffoli_matrix() -> UnitaryMatrix {
    let mut m = toffoli_matrix();
    m.set(2, 2, Complex::new(-1.0, 0.0));
    m
}

fn template_unitary(template: &[Instruction], qubits: usize) -> UnitaryMatrix {
    let circ = crate::ir::Circuit::new("library-template", qubits, template.to_vec());
    numerics::unitary(&circ, qubits).expect("library templates must be well-formed built-in circuits")
}

/// Expansion of a single-controlled built-in gate into built-ins plus CX,
/// via the textbook conjugation identities. Verified at registration.
pub fn expand_controlled_builtin(gate: &GateKind, control: QubitId, target: QubitId) -> Option<Vec<Instruction>> {
    let seq = match gate {
        GateKind::X => vec![cx(control, target)],
        GateKind::Y => vec![p(-PI / 2.0, target), cx(control, target), p(PI / 2.0, target)],
        GateKind::Z => vec![h(target), cx(control, target), h(target)],
        GateKind::H => vec![ry(FRAC_PI_4, target), cx(control, target), ry(-FRAC_PI_4, target)],
        GateKind::RZ(theta) => vec![
            rz(theta / 2.0, target),
            cx(control, target),
            rz(-theta / 2.0, target),
            cx(control, target),
        ],
        GateKind::RY(theta) => vec![
            ry(theta / 2.0, target),
            cx(control, target),
            ry(-theta / 2.0, target),
            cx(control, target),
        ],
        GateKind::RX(theta) => vec![
            h(target),
            rz(theta / 2.0, target),
            cx(control, target),
            rz(-theta / 2.0, target),
            cx(control, target),
            h(target),
        ],
        GateKind::P(lambda) => vec![
            p(lambda / 2.0, control),
            p(lambda / 2.0, target),
            cx(control, target),
            p(-lambda / 2.0, target),
            cx(control, target),
        ],
        GateKind::Library(_) => return None,
    };
    Some(seq)
}

fn verify_controlled_expansions() {
    let samples = [
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::H,
        GateKind::RX(0.7321),
        GateKind::RY(-1.234),
        GateKind::RZ(2.5),
        GateKind::P(0.9817),
        GateKind::RX(PI),
        GateKind::RZ(-PI / 3.0),
        GateKind::P(PI),
    ];
    for gate in samples {
        let expansion = expand_controlled_builtin(&gate, q(0), q(1)).expect("built-in expansion");
        let got = template_unitary(&expansion, 2);
        let base = template_unitary(&[Instruction::apply(gate.clone(), q(0))], 1);
        let expect = base.controlled(1);
        if !equivalent(&got, &expect, EquivalenceMode::Exact) {
            panic!("gate library registration failed: controlled-{} expansion does not match", gate.name());
        }
    }
}

/// Builds and verifies the library. Called once through [`library`]; exposed
/// so tests can rebuild and re-check registration from scratch.
pub fn register_library() -> GateLibrary {
    let ccx_exact = exact_toffoli_template();
    let ccx_matrix = template_unitary(&ccx_exact, 3);
    if !equivalent(&ccx_matrix, &toffoli_matrix(), EquivalenceMode::Exact) {
        panic!("gate library registration failed: exact toffoli ladder does not match its matrix");
    }

    let rccx_exact = relative_phase_toffoli_template();
    let rccx_matrix = template_unitary(&rccx_exact, 3);
    if !equivalent(&rccx_matrix, &relative_phase_toffoli_matrix(), EquivalenceMode::Exact) {
        panic!("gate library registration failed: relative-phase toffoli ladder does not match its matrix");
    }

    // D_p with a pi phase at |010>: rccx == D_p * ccx.
    let defect = DiagonalSpec { phases: vec![0.0, 0.0, PI, 0.0, 0.0, 0.0, 0.0, 0.0] };
    if !equivalent(&defect.to_matrix().mul(&ccx_matrix), &rccx_matrix, EquivalenceMode::Exact) {
        panic!("gate library registration failed: stored defect does not relate the toffoli variants");
    }

    let self_inverse = |m: &UnitaryMatrix| {
        equivalent(&m.mul(m), &UnitaryMatrix::identity(m.dim()), EquivalenceMode::Exact)
    };

    for (id, m) in [(CCX, &ccx_matrix), (RCCX, &rccx_matrix)] {
        if !crate::classify::is_permutation_matrix(m, TOLERANCE) {
            panic!("gate library registration failed: {id} must be a permutation gate");
        }
    }

    verify_controlled_expansions();

    let mut entries = BTreeMap::new();
    entries.insert(
        RCCX,
        GateLibraryEntry {
            id: RCCX,
            qubits: 3,
            self_inverse: self_inverse(&rccx_matrix),
            exact: rccx_exact.clone(),
            approx: None,
            gate_class: GateClass::Permutation,
            approx_defect: None,
            approx_id: None,
            matrix: rccx_matrix,
        },
    );
    entries.insert(
        CCX,
        GateLibraryEntry {
            id: CCX,
            qubits: 3,
            self_inverse: self_inverse(&ccx_matrix),
            exact: ccx_exact,
            approx: Some(rccx_exact),
            gate_class: GateClass::Permutation,
            approx_defect: Some(defect),
            approx_id: Some(RCCX),
            matrix: ccx_matrix,
        },
    );
    GateLibrary { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{x, Circuit};

    #[test]
    fn exact_toffoli_matches_frozen_matrix() {
        let e = entry(CCX).unwrap();
        assert!(equivalent(e.matrix(), &toffoli_matrix(), EquivalenceMode::Exact));
    }

    #[test]
    fn relative_phase_toffoli_matches_frozen_matrix() {
        let e = entry(RCCX).unwrap();
        assert!(equivalent(e.matrix(), &relative_phase_toffoli_matrix(), EquivalenceMode::Exact));
        // -1 sits exactly at basis index 2, and 6 <-> 7 swap.
        assert!((e.matrix().get(2, 2) - Complex::new(-1.0, 0.0)).norm() <= TOLERANCE);
        assert!((e.matrix().get(7, 6) - Complex::new(1.0, 0.0)).norm() <= TOLERANCE);
        assert!((e.matrix().get(6, 7) - Complex::new(1.0, 0.0)).norm() <= TOLERANCE);
        assert!(e.matrix().get(6, 6).norm() <= TOLERANCE);
    }

    #[test]
    fn approx_equals_defect_times_exact() {
        let e = entry(CCX).unwrap();
        let defect = e.approx_defect().unwrap().to_matrix();
        let approx = template_unitary(e.approx().unwrap(), 3);
        assert!(equivalent(&approx, &defect.mul(e.matrix()), EquivalenceMode::Exact));
    }

    #[test]
    fn toffoli_variants_differ_beyond_global_phase() {
        let ccx = entry(CCX).unwrap();
        let rccx = entry(RCCX).unwrap();
        assert!(!equivalent(ccx.matrix(), rccx.matrix(), EquivalenceMode::GlobalPhase));
    }

    #[test]
    fn both_entries_are_self_inverse() {
        assert!(entry(CCX).unwrap().self_inverse());
        assert!(entry(RCCX).unwrap().self_inverse());
    }

    #[test]
    fn library_gate_resolves_through_unitary_builder() {
        let circ = Circuit::new(
            "lib",
            3,
            vec![Instruction::Apply {
                gate: GateKind::Library(CCX.into()),
                targets: vec![q(0), q(1), q(2)],
            }],
        );
        let u = numerics::unitary(&circ, 3).unwrap();
        assert!(equivalent(&u, &toffoli_matrix(), EquivalenceMode::Exact));
    }

    #[test]
    fn instantiate_remaps_positionally() {
        let tpl = vec![cx(q(0), q(2)), x(q(1))];
        let got = instantiate(&tpl, &[q(5), q(3), q(7)]);
        assert_eq!(got, vec![cx(q(5), q(7)), x(q(3))]);
    }
}
