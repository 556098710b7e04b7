//! Prime-field scalars.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Largest accepted modulus; keeps every product of two residues inside `u64`.
pub const MAX_MODULUS: u32 = (1 << 31) - 1;

/// A validated prime modulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Modulus(u32);

impl Modulus {
    pub fn new(p: u32) -> Result<Self> {
        if !(2..=MAX_MODULUS).contains(&p) {
            return config_err(format!("modulus {p} outside [2, {MAX_MODULUS}]"));
        }
        if !is_prime(p) {
            return config_err(format!("modulus {p} is not prime"));
        }
        Ok(Modulus(p))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn reduce(self, v: u64) -> u32 {
        (v % self.0 as u64) as u32
    }

    #[inline]
    pub fn add(self, a: u32, b: u32) -> u32 {
        let s = a as u64 + b as u64;
        if s >= self.0 as u64 {
            (s - self.0 as u64) as u32
        } else {
            s as u32
        }
    }

    #[inline]
    pub fn mul(self, a: u32, b: u32) -> u32 {
        self.reduce(a as u64 * b as u64)
    }

    pub fn element(self, value: u64) -> FieldElement {
        FieldElement {
            value: self.reduce(value),
            modulus: self,
        }
    }
}

impl TryFrom<u32> for Modulus {
    type Error = crate::Error;
    fn try_from(p: u32) -> Result<Self> {
        Modulus::new(p)
    }
}

impl From<Modulus> for u32 {
    fn from(m: Modulus) -> u32 {
        m.0
    }
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let p = p as u64;
    let mut d = 2u64;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// A residue in `[0, p)` tagged with its modulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u32,
    modulus: Modulus,
}

impl FieldElement {
    pub fn new(value: u64, modulus: Modulus) -> Self {
        modulus.element(value)
    }

    pub fn zero(modulus: Modulus) -> Self {
        FieldElement { value: 0, modulus }
    }

    pub fn one(modulus: Modulus) -> Self {
        FieldElement { value: 1, modulus }
    }

    pub fn value(self) -> u32 {
        self.value
    }

    pub fn modulus(self) -> Modulus {
        self.modulus
    }

    fn check(self, other: FieldElement) -> Result<()> {
        if self.modulus != other.modulus {
            return config_err(format!(
                "modulus mismatch: {} vs {}",
                self.modulus, other.modulus
            ));
        }
        Ok(())
    }

    pub fn add(self, other: FieldElement) -> Result<FieldElement> {
        self.check(other)?;
        Ok(FieldElement {
            value: self.modulus.add(self.value, other.value),
            modulus: self.modulus,
        })
    }

    pub fn mul(self, other: FieldElement) -> Result<FieldElement> {
        self.check(other)?;
        Ok(FieldElement {
            value: self.modulus.mul(self.value, other.value),
            modulus: self.modulus,
        })
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}
