//! Rank-1 constraint systems: sparse linear combinations, `A * B = C`
//! constraints, and their binary serialization.
//!
//! Wire 0 always carries the constant one. Public input wires follow, then
//! private input wires, then auxiliary (internal) wires.

use sha2::{Digest, Sha256};

use super::field::{Fe, MODULUS};
use super::ZkError;

/// Index of the constant-one wire.
pub const ONE: u32 = 0;

/// A sparse linear combination of wires, sorted by wire index, with no zero
/// coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinComb(Vec<(u32, Fe)>);

impl LinComb {
    pub fn zero() -> LinComb {
        LinComb(Vec::new())
    }

    pub fn wire(w: u32) -> LinComb {
        LinComb(vec![(w, Fe::ONE)])
    }

    pub fn constant(c: Fe) -> LinComb {
        if c.is_zero() {
            LinComb::zero()
        } else {
            LinComb(vec![(ONE, c)])
        }
    }

    pub fn one() -> LinComb {
        LinComb::constant(Fe::ONE)
    }

    pub fn terms(&self) -> &[(u32, Fe)] {
        &self.0
    }

    /// `Some(c)` when the combination only involves the constant wire.
    pub fn as_constant(&self) -> Option<Fe> {
        match self.0.as_slice() {
            [] => Some(Fe::ZERO),
            [(ONE, c)] => Some(*c),
            _ => None,
        }
    }

    pub fn scale(&self, k: Fe) -> LinComb {
        if k.is_zero() {
            return LinComb::zero();
        }
        LinComb(self.0.iter().map(|&(w, c)| (w, c * k)).collect())
    }

    /// `self + k * other`, merging sorted term lists.
    pub fn add_scaled(&self, other: &LinComb, k: Fe) -> LinComb {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let take_a = j == b.len() || (i < a.len() && a[i].0 < b[j].0);
            let take_b = i == a.len() || (j < b.len() && b[j].0 < a[i].0);
            if take_a {
                out.push(a[i]);
                i += 1;
            } else if take_b {
                out.push((b[j].0, b[j].1 * k));
                j += 1;
            } else {
                let c = a[i].1 + b[j].1 * k;
                if !c.is_zero() {
                    out.push((a[i].0, c));
                }
                i += 1;
                j += 1;
            }
        }
        out.retain(|(_, c)| !c.is_zero());
        LinComb(out)
    }

    pub fn add(&self, other: &LinComb) -> LinComb {
        self.add_scaled(other, Fe::ONE)
    }

    pub fn sub(&self, other: &LinComb) -> LinComb {
        self.add_scaled(other, -Fe::ONE)
    }

    pub fn eval(&self, values: &[Fe]) -> Fe {
        self.0.iter().map(|&(w, c)| c * values[w as usize]).sum()
    }

    fn max_wire(&self) -> Option<u32> {
        self.0.last().map(|(w, _)| *w)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub a: LinComb,
    pub b: LinComb,
    pub c: LinComb,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSystem {
    pub num_public: usize,
    pub num_private: usize,
    pub num_aux: usize,
    pub constraints: Vec<Constraint>,
}

/// A value for every wire: one, public inputs, private inputs, auxiliaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub values: Vec<Fe>,
}

const MAGIC: &[u8; 4] = b"R1CS";
const VERSION: u32 = 1;

impl ConstraintSystem {
    pub fn num_wires(&self) -> usize {
        1 + self.num_public + self.num_private + self.num_aux
    }

    /// Total number of nonzero entries across A, B and C.
    pub fn num_nonzero(&self) -> usize {
        self.constraints
            .iter()
            .map(|k| k.a.0.len() + k.b.0.len() + k.c.0.len())
            .sum()
    }

    pub fn is_satisfied(&self, assignment: &Assignment) -> bool {
        self.first_unsatisfied(assignment).is_none() && assignment.values.len() == self.num_wires()
    }

    /// Index of the first violated constraint, if any.
    pub fn first_unsatisfied(&self, assignment: &Assignment) -> Option<usize> {
        let v = &assignment.values;
        if v.len() != self.num_wires() || v[0] != Fe::ONE {
            return Some(0);
        }
        self.constraints
            .iter()
            .position(|k| k.a.eval(v) * k.b.eval(v) != k.c.eval(v))
    }

    /// Evaluates `(A z, B z, C z)` for a full assignment `z`.
    pub fn evaluate(&self, assignment: &Assignment) -> (Vec<Fe>, Vec<Fe>, Vec<Fe>) {
        let v = &assignment.values;
        let n = self.constraints.len();
        let (mut x, mut y, mut z) = (
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        );
        for k in &self.constraints {
            x.push(k.a.eval(v));
            y.push(k.b.eval(v));
            z.push(k.c.eval(v));
        }
        (x, y, z)
    }

    /// Header: magic, version, modulus, then wire and constraint counts; body:
    /// for each constraint the A, B and C term lists as `count, (wire, coeff)*`.
    /// All integers little-endian; coefficients are 16-byte canonical.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(36 + self.num_nonzero() * 20 + self.constraints.len() * 12);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&MODULUS.to_le_bytes());
        for n in [
            self.num_public,
            self.num_private,
            self.num_aux,
            self.constraints.len(),
        ] {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        for k in &self.constraints {
            for lc in [&k.a, &k.b, &k.c] {
                out.extend_from_slice(&(lc.0.len() as u32).to_le_bytes());
                for (w, c) in &lc.0 {
                    out.extend_from_slice(&w.to_le_bytes());
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ConstraintSystem, ZkError> {
        let bad = |what: &str| ZkError::MalformedConstraintSystem(what.to_string());
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4).ok_or_else(|| bad("truncated"))? != MAGIC {
            return Err(bad("magic"));
        }
        if cur.u32().ok_or_else(|| bad("truncated"))? != VERSION {
            return Err(bad("version"));
        }
        if cur.u128().ok_or_else(|| bad("truncated"))? != MODULUS {
            return Err(bad("field modulus"));
        }
        let mut counts = [0usize; 4];
        for c in &mut counts {
            *c = cur.u32().ok_or_else(|| bad("truncated"))? as usize;
        }
        let [num_public, num_private, num_aux, count] = counts;
        let wires = 1 + num_public + num_private + num_aux;
        let mut constraints = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let mut read_lc = || -> Result<LinComb, ZkError> {
                let terms = cur.u32().ok_or_else(|| bad("truncated"))? as usize;
                let mut lc: Vec<(u32, Fe)> = Vec::with_capacity(terms.min(1 << 16));
                for _ in 0..terms {
                    let w = cur.u32().ok_or_else(|| bad("truncated"))?;
                    let c = cur.u128().ok_or_else(|| bad("truncated"))?;
                    let c = Fe::from_le_bytes(c.to_le_bytes())
                        .ok_or_else(|| bad("non-canonical coefficient"))?;
                    if w as usize >= wires || c.is_zero() || lc.last().is_some_and(|(p, _)| *p >= w)
                    {
                        return Err(bad("term"));
                    }
                    lc.push((w, c));
                }
                Ok(LinComb(lc))
            };
            let a = read_lc()?;
            let b = read_lc()?;
            let c = read_lc()?;
            constraints.push(Constraint { a, b, c });
        }
        if cur.pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(ConstraintSystem {
            num_public,
            num_private,
            num_aux,
            constraints,
        })
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.to_bytes()).into()
    }

    /// Checks that every referenced wire exists.
    pub fn check_wires(&self) -> bool {
        let n = self.num_wires() as u32;
        self.constraints.iter().all(|k| {
            [&k.a, &k.b, &k.c]
                .iter()
                .all(|lc| lc.max_wire().is_none_or(|w| w < n))
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u128(&mut self) -> Option<u128> {
        self.take(16)
            .map(|b| u128::from_le_bytes(b.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (ConstraintSystem, Assignment) {
        // wires: 0 = one, 1 = public x, 2 = private y, 3 = aux x*y
        let cs = ConstraintSystem {
            num_public: 1,
            num_private: 1,
            num_aux: 1,
            constraints: vec![
                Constraint {
                    a: LinComb::wire(1),
                    b: LinComb::wire(2),
                    c: LinComb::wire(3),
                },
                Constraint {
                    a: LinComb::wire(3).add(&LinComb::constant(Fe::from_u64(1))),
                    b: LinComb::one(),
                    c: LinComb::constant(Fe::from_u64(13)),
                },
            ],
        };
        let values = [1u64, 3, 4, 12].map(Fe::from_u64).to_vec();
        (cs, Assignment { values })
    }

    #[test]
    fn satisfied_and_broken() {
        let (cs, mut a) = toy();
        assert!(cs.is_satisfied(&a));
        a.values[3] = Fe::from_u64(11);
        assert_eq!(cs.first_unsatisfied(&a), Some(0));
        assert!(!cs.is_satisfied(&a));
    }

    #[test]
    fn lincomb_merge_cancels() {
        let a = LinComb::wire(2).add(&LinComb::wire(5));
        let b = a.sub(&LinComb::wire(2));
        assert_eq!(b, LinComb::wire(5));
        assert_eq!(a.sub(&a), LinComb::zero());
        assert_eq!(
            LinComb::constant(Fe::from_u64(4)).as_constant(),
            Some(Fe::from_u64(4))
        );
        assert_eq!(LinComb::wire(1).as_constant(), None);
    }

    #[test]
    fn serialization_round_trip() {
        let (cs, _) = toy();
        let bytes = cs.to_bytes();
        assert_eq!(&bytes[..4], b"R1CS");
        assert_eq!(ConstraintSystem::from_bytes(&bytes).unwrap(), cs);
        assert!(ConstraintSystem::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(ConstraintSystem::from_bytes(&extra).is_err());
        assert!(cs.check_wires());
    }
}
