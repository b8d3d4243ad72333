//! Gate statistics over flattened circuits.
//!
//! `cx` counts single-controlled X pairs (the two-qubit gate of the target
//! set); the per-kind counters cover the uncontrolled built-ins. Depth is
//! the longest chain in the qubit dependency DAG.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::ir::{Circuit, GateKind, Instruction, QubitId};
use crate::passes::PassReport;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GateCounts {
    pub cx: usize,
    pub h: usize,
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub rx: usize,
    pub ry: usize,
    pub rz: usize,
    pub p: usize,
}

impl GateCounts {
    pub fn total(&self) -> usize {
        self.cx + self.h + self.x + self.y + self.z + self.rx + self.ry + self.rz + self.p
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PassSummary {
    pub pass: String,
    pub examined: usize,
    pub rewritten: usize,
}

impl From<&PassReport> for PassSummary {
    fn from(r: &PassReport) -> Self {
        PassSummary { pass: r.pass_name.clone(), examined: r.sites_examined, rewritten: r.sites_rewritten }
    }
}

/// The stats record; serializes to the stable JSON schema (field order as
/// declared).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GateStats {
    pub name: String,
    pub qubits_main: usize,
    pub qubits_aux_peak: usize,
    pub depth: usize,
    pub counts: GateCounts,
    pub total_gates: usize,
    pub passes: Vec<PassSummary>,
}

impl GateStats {
    pub fn with_passes(mut self, reports: &[PassReport]) -> Self {
        self.passes = reports.iter().map(PassSummary::from).collect();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize to plain JSON")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotFlattenedError {
    pub detail: String,
}

impl fmt::Display for NotFlattenedError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "circuit is not flattened: {}", self.detail)
    }
}

impl std::error::Error for NotFlattenedError {}

/// Exact gate counts and depth of a flattened circuit. Composite nodes
/// (around, aux scopes, multi-controls, library gates) are a contract
/// violation and error out.
pub fn stats(circuit: &Circuit) -> Result<GateStats, NotFlattenedError> {
    let mut counts = GateCounts::default();
    let mut depth: HashMap<QubitId, usize> = HashMap::new();
    let mut max_depth = 0usize;
    let touch = |qs: &[QubitId], depth: &mut HashMap<QubitId, usize>, max_depth: &mut usize| {
        let d = 1 + qs.iter().map(|q| depth.get(q).copied().unwrap_or(0)).max().unwrap_or(0);
        for q in qs {
            depth.insert(*q, d);
        }
        *max_depth = (*max_depth).max(d);
    };
    for instr in &circuit.instructions {
        match instr {
            Instruction::Apply { gate, targets } => {
                match gate {
                    GateKind::X => counts.x += 1,
                    GateKind::Y => counts.y += 1,
                    GateKind::Z => counts.z += 1,
                    GateKind::H => counts.h += 1,
                    GateKind::RX(_) => counts.rx += 1,
                    GateKind::RY(_) => counts.ry += 1,
                    GateKind::RZ(_) => counts.rz += 1,
                    GateKind::P(_) => counts.p += 1,
                    GateKind::Library(id) => {
                        return Err(NotFlattenedError { detail: format!("library gate `{id}` present") })
                    }
                }
                touch(targets, &mut depth, &mut max_depth);
            }
            Instruction::Controlled { controls, body } => {
                let is_cx = controls.len() == 1
                    && matches!(body.as_slice(), [Instruction::Apply { gate: GateKind::X, targets }] if targets.len() == 1);
                if !is_cx {
                    return Err(NotFlattenedError { detail: "composite controlled block present".into() });
                }
                counts.cx += 1;
                let target = match &body[0] {
                    Instruction::Apply { targets, .. } => targets[0],
                    _ => unreachable!(),
                };
                touch(&[controls[0], target], &mut depth, &mut max_depth);
            }
            Instruction::Around { .. } => {
                return Err(NotFlattenedError { detail: "around block present".into() })
            }
            Instruction::AuxScope { .. } => {
                return Err(NotFlattenedError { detail: "aux scope present".into() })
            }
        }
    }
    Ok(GateStats {
        name: circuit.name.clone(),
        qubits_main: circuit.num_main,
        qubits_aux_peak: circuit.aux_peak(),
        depth: max_depth,
        total_gates: counts.total(),
        counts,
        passes: Vec::new(),
    })
}
