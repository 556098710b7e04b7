//! Reference polynomial families and constructions used as targets and oracles.

use itertools::Itertools;

use crate::circuit::{Circuit, Op};
use crate::error::{Error, Result};
use crate::field::Modulus;
use crate::poly::{FieldPolynomial, Monomial};

/// Largest permanent size accepted (`n^2` variables).
pub const MAX_PERMANENT_SIZE: usize = 4;

/// `e_k(x0, ..., x{n-1})`, built with `e_k(x1..xm) = e_k(x1..x{m-1}) + x_m * e_{k-1}(x1..x{m-1})`.
///
/// `e_0 = 1` and `e_k = 0` for `k > n`.
pub fn elementary_symmetric(n: usize, k: usize, modulus: Modulus) -> Result<FieldPolynomial> {
    // row[j] holds e_j over the variables consumed so far
    let mut row: Vec<FieldPolynomial> = (0..=k)
        .map(|j| {
            if j == 0 {
                FieldPolynomial::one(n, modulus)
            } else {
                FieldPolynomial::zero(n, modulus)
            }
        })
        .collect();
    for m in 0..n {
        let x = FieldPolynomial::variable(n, modulus, m)?;
        for j in (1..=k).rev() {
            let shifted = x.mul(&row[j - 1])?;
            row[j] = row[j].add(&shifted)?;
        }
    }
    Ok(row.swap_remove(k))
}

/// `per_n = sum over permutations s of prod_i x_{i, s(i)}`, with `x_{i,j}` stored as variable `i*n + j`.
pub fn permanent_polynomial(n: usize, modulus: Modulus) -> Result<FieldPolynomial> {
    if n == 0 {
        return Err(Error::Domain("permanent size must be at least 1".into()));
    }
    if n > MAX_PERMANENT_SIZE {
        return Err(Error::Capacity(format!(
            "permanent of size {n} needs {} variables (limit {})",
            n * n,
            MAX_PERMANENT_SIZE * MAX_PERMANENT_SIZE
        )));
    }
    let n_vars = n * n;
    let terms = (0..n).permutations(n).map(|sigma| {
        let mut exps = vec![0u16; n_vars];
        for (i, &j) in sigma.iter().enumerate() {
            exps[i * n + j] = 1;
        }
        (Monomial::from_exponents(&exps), 1u64)
    });
    FieldPolynomial::from_terms(n_vars, modulus, terms)
}

/// Appends a Horner evaluation `a0 + x(a1 + x(... + x*ad))` and returns the output node.
///
/// Emits exactly `d` multiplications and `d` additions for `d + 1` coefficient
/// nodes, including additions whose coefficient node computes zero.
pub fn horner_reference_circuit(
    circuit: &mut Circuit,
    coefficient_nodes: &[usize],
    x_node: usize,
) -> Result<usize> {
    let Some((&top, rest)) = coefficient_nodes.split_last() else {
        return Err(Error::Domain(
            "Horner scheme needs at least one coefficient".into(),
        ));
    };
    for &id in coefficient_nodes.iter().chain(std::iter::once(&x_node)) {
        circuit.gate(id)?;
    }
    let mut t = top;
    for &a in rest.iter().rev() {
        let m = circuit.append_gate(Op::Mul, x_node, t)?;
        t = circuit.append_gate(Op::Add, a, m)?;
    }
    Ok(t)
}
