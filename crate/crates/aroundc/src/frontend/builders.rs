//! Circuit builders: the V-chain multi-controlled X and the R_XX example.

use crate::ancilla::{check_aux_safety, AuxPool, AuxRequest};
use crate::ir::{adjoint, around, ccx, cx, h, q, rz, x, Circuit, Instruction, QubitId};

/// Builds the V-chain decomposition of an `n`-controlled X over main qubits
/// `q0..q[n-1]` (controls) and `q[n]` (target).
///
/// For more than two controls each recursion level requests one clean aux
/// qubit, conjugates by a Toffoli computing the first two controls into it,
/// and recurses with the aux as a control. Scopes run the full ancilla
/// protocol: allocate, build, static safety check, verdict-gated release.
pub fn build_v_chain(n_controls: usize) -> Circuit {
    let mut pool = AuxPool::new(0);
    build_v_chain_with_pool(n_controls, &mut pool)
}

/// [`build_v_chain`] against a caller-owned pool, so allocation behavior
/// (peak use, final state) stays observable.
pub fn build_v_chain_with_pool(n_controls: usize, pool: &mut AuxPool) -> Circuit {
    assert!(n_controls >= 1, "need at least one control");
    let controls: Vec<QubitId> = (0..n_controls as u32).map(q).collect();
    let target = q(n_controls as u32);
    let request = AuxRequest::new("a", |c| usize::from(c > 2));
    let instr = v_chain_rec(&controls, target, &request, pool);
    Circuit::new(format!("v_chain_{n_controls}"), n_controls + 1, vec![instr])
}

fn v_chain_rec(controls: &[QubitId], target: QubitId, request: &AuxRequest, pool: &mut AuxPool) -> Instruction {
    let want = request.qubits_for(controls.len());
    if want == 0 {
        return Instruction::Controlled { controls: controls.to_vec(), body: vec![x(target)] };
    }
    let aux = match pool.allocate(want) {
        Ok(ids) => ids,
        Err(_) => {
            pool.grow(want);
            pool.allocate(want).expect("pool grown to cover the request")
        }
    };
    let head = aux[0];
    let mut inner_controls = vec![head];
    inner_controls.extend_from_slice(&controls[2..]);
    let inner = v_chain_rec(&inner_controls, target, request, pool);
    let body = vec![around(vec![ccx(controls[0], controls[1], head)], vec![inner])];
    let verdict = check_aux_safety(&aux, &body);
    pool.release(&aux, &verdict)
        .expect("v-chain scope satisfies the aux safety conditions by construction");
    Instruction::AuxScope { aux, body }
}

/// R_XX via conjugation: `around { h q0; h q1; cx q0 q1 } { rz angle q1 }`.
pub fn build_rxx_around(angle: f64) -> Circuit {
    Circuit::new(
        "rxx",
        2,
        vec![around(vec![h(q(0)), h(q(1)), cx(q(0), q(1))], vec![rz(angle, q(1))])],
    )
}

/// R_XX with the conjugation written out by hand: U, RZ, adjoint(U).
pub fn build_rxx_explicit(angle: f64) -> Circuit {
    let u = vec![h(q(0)), h(q(1)), cx(q(0), q(1))];
    let mut instrs = u.clone();
    instrs.push(rz(angle, q(1)));
    instrs.extend(adjoint(&u));
    Circuit::new("rxx_explicit", 2, instrs)
}
