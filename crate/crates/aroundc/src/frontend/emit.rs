//! Renders a circuit back into the textual format.
//!
//! Angles are printed with 17 significant digits so re-parsing reproduces
//! the exact f64. Aux scopes get generated names; a flattened circuit whose
//! gates reference aux wires without any surviving scope is wrapped in one
//! synthetic scope covering the aux region, so the emitted text always
//! re-parses.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::ir::{Circuit, GateKind, Instruction, QubitId};

struct NameGen {
    counter: usize,
}

const RESERVED: &[&str] = &["x", "y", "z", "h", "p", "q", "rx", "ry", "rz", "pi", "ctrl", "aux", "around", "qubits"];

impl NameGen {
    fn new() -> Self {
        NameGen { counter: 0 }
    }

    fn next(&mut self) -> String {
        loop {
            let mut n = self.counter;
            self.counter += 1;
            let mut name = String::new();
            loop {
                name.insert(0, (b'a' + (n % 26) as u8) as char);
                n /= 26;
                if n == 0 {
                    break;
                }
                n -= 1;
            }
            if !RESERVED.contains(&name.as_str()) {
                return name;
            }
        }
    }
}

fn angle(v: f64) -> String {
    format!("{v:.16e}")
}

/// True when some aux reference is not covered by an enclosing scope (the
/// usual state of a flattened circuit).
fn has_bare_aux_refs(instrs: &[Instruction], live: &mut HashSet<QubitId>) -> bool {
    let bare = |qid: &QubitId, live: &HashSet<QubitId>| qid.is_aux() && !live.contains(qid);
    for instr in instrs {
        match instr {
            Instruction::Apply { targets, .. } => {
                if targets.iter().any(|t| bare(t, live)) {
                    return true;
                }
            }
            Instruction::Controlled { controls, body } => {
                if controls.iter().any(|c| bare(c, live)) || has_bare_aux_refs(body, live) {
                    return true;
                }
            }
            Instruction::Around { outer, body } => {
                if has_bare_aux_refs(outer, live) || has_bare_aux_refs(body, live) {
                    return true;
                }
            }
            Instruction::AuxScope { aux, body } => {
                for q in aux {
                    live.insert(*q);
                }
                let found = has_bare_aux_refs(body, live);
                for q in aux {
                    live.remove(q);
                }
                if found {
                    return true;
                }
            }
        }
    }
    false
}

struct Emitter {
    out: String,
    frames: Vec<(String, Vec<QubitId>)>,
    names: NameGen,
}

impl Emitter {
    fn qref(&self, qid: QubitId) -> String {
        match qid {
            QubitId::Main(i) => format!("q{i}"),
            QubitId::Aux(_) => {
                for (name, ids) in self.frames.iter().rev() {
                    if let Some(pos) = ids.iter().position(|x| *x == qid) {
                        return format!("{name}{pos}");
                    }
                }
                unreachable!("aux reference without covering scope; emit wraps bare refs")
            }
        }
    }

    fn line(&mut self, indent: usize, text: &str) {
        for _ in 0..indent {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn emit_seq(&mut self, instrs: &[Instruction], indent: usize) {
        for instr in instrs {
            self.emit_instr(instr, indent);
        }
    }

    fn emit_instr(&mut self, instr: &Instruction, indent: usize) {
        match instr {
            Instruction::Apply { gate, targets } => {
                let t = self.qref(targets[0]);
                let text = match gate {
                    GateKind::X | GateKind::Y | GateKind::Z | GateKind::H => {
                        format!("{} {t}", gate.name())
                    }
                    GateKind::RX(v) | GateKind::RY(v) | GateKind::RZ(v) | GateKind::P(v) => {
                        format!("{} {} {t}", gate.name(), angle(*v))
                    }
                    GateKind::Library(id) => {
                        // no surface syntax for library gates: emit the
                        // registered exact expansion instead
                        match crate::passes::library::entry(id) {
                            Some(entry) => {
                                let expansion = crate::passes::library::instantiate(entry.exact(), targets);
                                self.emit_seq(&expansion, indent);
                                return;
                            }
                            None => format!("# unknown library gate {id}"),
                        }
                    }
                };
                self.line(indent, &text);
            }
            Instruction::Controlled { controls, body } => {
                let refs: Vec<String> = controls.iter().map(|c| self.qref(*c)).collect();
                self.line(indent, &format!("ctrl {} {{", refs.join(", ")));
                self.emit_seq(body, indent + 1);
                self.line(indent, "}");
            }
            Instruction::Around { outer, body } => {
                self.line(indent, "around {");
                self.emit_seq(outer, indent + 1);
                self.line(indent, "} {");
                self.emit_seq(body, indent + 1);
                self.line(indent, "}");
            }
            Instruction::AuxScope { aux, body } => {
                let name = self.names.next();
                self.line(indent, &format!("aux {name}[{}] {{", aux.len()));
                self.frames.push((name, aux.clone()));
                self.emit_seq(body, indent + 1);
                self.frames.pop();
                self.line(indent, "}");
            }
        }
    }
}

/// Renders a circuit as source text that parses back to the same semantics.
pub fn emit_text(circuit: &Circuit) -> String {
    let mut em = Emitter { out: String::new(), frames: Vec::new(), names: NameGen::new() };
    let _ = writeln!(em.out, "# {}", circuit.name);
    let _ = writeln!(em.out, "qubits {}", circuit.num_main);
    let mut live = HashSet::new();
    let needs_wrapper = has_bare_aux_refs(&circuit.instructions, &mut live) && circuit.aux_peak() > 0;
    if needs_wrapper {
        let peak = circuit.aux_peak();
        let name = em.names.next();
        let ids: Vec<QubitId> = (0..peak as u32).map(QubitId::Aux).collect();
        em.line(0, &format!("aux {name}[{peak}] {{"));
        em.frames.push((name, ids));
        em.emit_seq(&circuit.instructions, 1);
        em.frames.pop();
        em.line(0, "}");
    } else {
        em.emit_seq(&circuit.instructions, 0);
    }
    em.out
}
