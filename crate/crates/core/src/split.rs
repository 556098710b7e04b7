//! Seeded train/evaluation partition of target polynomials.

use sha2::{Digest, Sha256};

use crate::board::GameBoard;
use crate::poly::FieldPolynomial;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Eval,
}

/// Hash of the seed and the canonical polynomial string mapped to `[0, 1)`.
fn unit_hash(f: &FieldPolynomial, seed: u64) -> f64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(f.to_string().as_bytes());
    let d = h.finalize();
    let v = u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"));
    (v >> 11) as f64 / (1u64 << 53) as f64
}

pub fn split_of(f: &FieldPolynomial, seed: u64, eval_fraction: f64) -> Split {
    if unit_hash(f, seed) < eval_fraction {
        Split::Eval
    } else {
        Split::Train
    }
}

/// Board node ids at `depth` that fall in `split`.
pub fn nodes_in_split(
    board: &GameBoard,
    depth: usize,
    split: Split,
    seed: u64,
    eval_fraction: f64,
) -> Vec<usize> {
    board
        .nodes_at_depth(depth)
        .into_iter()
        .filter(|&i| split_of(&board.nodes()[i].polynomial, seed, eval_fraction) == split)
        .collect()
}
