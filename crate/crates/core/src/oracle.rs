//! Exhaustive minimal-complexity search, independent of the game board.

use std::collections::HashSet;

use crate::circuit::{Action, Circuit, Op};
use crate::error::Result;
use crate::field::Modulus;
use crate::poly::FieldPolynomial;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleResult {
    pub complexity: usize,
    pub witness: Vec<Action>,
}

/// Iterative deepening over action sequences. Each appended gate must compute
/// a polynomial not yet present in the circuit. Returns `None` when no circuit
/// with at most `c_max` gates computes `target`.
pub fn brute_force_min_complexity(
    target: &FieldPolynomial,
    n_vars: usize,
    modulus: Modulus,
    c_max: usize,
) -> Result<Option<OracleResult>> {
    let mut circuit = Circuit::new(n_vars, modulus)?;
    if circuit.find(target).is_some() {
        return Ok(Some(OracleResult {
            complexity: 0,
            witness: Vec::new(),
        }));
    }
    for budget in 1..=c_max {
        let mut present: HashSet<FieldPolynomial> = circuit.polys().cloned().collect();
        if search(&mut circuit, &mut present, target, budget)? {
            return Ok(Some(OracleResult {
                complexity: budget,
                witness: circuit.actions(),
            }));
        }
    }
    Ok(None)
}

fn search(
    circuit: &mut Circuit,
    present: &mut HashSet<FieldPolynomial>,
    target: &FieldPolynomial,
    remaining: usize,
) -> Result<bool> {
    let len = circuit.len();
    for i in 0..len {
        for j in i..len {
            for op in Op::ALL {
                let f = op.apply(circuit.poly(i)?, circuit.poly(j)?)?;
                if present.contains(&f) {
                    continue;
                }
                if remaining == 1 {
                    if &f == target {
                        circuit.append_gate(op, i, j)?;
                        return Ok(true);
                    }
                    continue;
                }
                let mut next = circuit.clone();
                next.append_gate(op, i, j)?;
                present.insert(f.clone());
                if search(&mut next, present, target, remaining - 1)? {
                    *circuit = next;
                    return Ok(true);
                }
                present.remove(&f);
            }
        }
    }
    Ok(false)
}
