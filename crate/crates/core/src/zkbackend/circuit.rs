//! Compiles the per-chunk preimage relation into R1CS.
//!
//! Public wires (after the constant one): the 8 previous-state words, the 64
//! bytes of the redacted chunk, and the 8 next-state words. Private wires:
//! the deleted bytes, in position order. The interval layout is fixed at
//! compile time, so putting the deleted bytes back is pure wire routing.

use std::array;

use super::field::Fe;
use super::r1cs::{Assignment, Constraint, ConstraintSystem, LinComb};
use super::ZkError;
use crate::hashchain::{CHUNK_LEN, ROUND_CONSTANTS};
use crate::redactor::{ChunkStatement, ChunkWitness, DEL_DATA_LENGTH};

pub const NUM_PUBLIC: usize = 8 + CHUNK_LEN + 8;
const PREV_BASE: u32 = 1;
const CHUNK_BASE: u32 = 9;
const NEXT_BASE: u32 = 73;
const PRIVATE_BASE: u32 = 81;

/// Deleted byte ranges inside one chunk: sorted, disjoint, nonempty, within
/// `[0, 64)`, and at most [`DEL_DATA_LENGTH`] bytes in total.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ChunkLayout {
    intervals: Vec<(u8, u8)>,
}

impl ChunkLayout {
    pub fn new(mut intervals: Vec<(u8, u8)>) -> Result<ChunkLayout, ZkError> {
        intervals.sort();
        let mut total = 0usize;
        let mut prev_end = 0u8;
        for (i, &(s, e)) in intervals.iter().enumerate() {
            if s >= e || e as usize > CHUNK_LEN {
                return Err(ZkError::BadLayout(format!(
                    "interval {s}..{e} out of range"
                )));
            }
            if i > 0 && s < prev_end {
                return Err(ZkError::BadLayout(format!("interval {s}..{e} overlaps")));
            }
            prev_end = e;
            total += (e - s) as usize;
        }
        if total > DEL_DATA_LENGTH {
            return Err(ZkError::BadLayout(format!(
                "{total} deleted bytes exceed capacity"
            )));
        }
        Ok(ChunkLayout { intervals })
    }

    pub fn empty() -> ChunkLayout {
        ChunkLayout::default()
    }

    /// Reads the fixed-size `start`/`end` arrays: used pairs first, then
    /// `(0, 0)` padding.
    pub fn from_arrays(starts: &[u8; 64], ends: &[u8; 64]) -> Result<ChunkLayout, ZkError> {
        let used = starts
            .iter()
            .zip(ends)
            .position(|(s, e)| *s == 0 && *e == 0)
            .unwrap_or(64);
        if starts[used..].iter().chain(&ends[used..]).any(|&b| b != 0) {
            return Err(ZkError::BadLayout("padding after an unused pair".into()));
        }
        let intervals: Vec<(u8, u8)> = starts[..used]
            .iter()
            .copied()
            .zip(ends[..used].iter().copied())
            .collect();
        if intervals.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ZkError::BadLayout("pairs not in increasing order".into()));
        }
        ChunkLayout::new(intervals)
    }

    pub fn to_arrays(&self) -> ([u8; 64], [u8; 64]) {
        let mut starts = [0u8; 64];
        let mut ends = [0u8; 64];
        for (i, &(s, e)) in self.intervals.iter().enumerate() {
            starts[i] = s;
            ends[i] = e;
        }
        (starts, ends)
    }

    pub fn intervals(&self) -> &[(u8, u8)] {
        &self.intervals
    }

    pub fn deleted_len(&self) -> usize {
        self.intervals.iter().map(|(s, e)| (e - s) as usize).sum()
    }

    pub fn is_deleted(&self, pos: usize) -> bool {
        self.intervals
            .iter()
            .any(|&(s, e)| (s as usize..e as usize).contains(&pos))
    }

    /// Deleted positions in increasing order.
    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.intervals
            .iter()
            .flat_map(|&(s, e)| s as usize..e as usize)
    }
}

/// How the prover computes an auxiliary wire from earlier wires.
#[derive(Debug, Clone)]
enum Step {
    Product(LinComb, LinComb),
    /// Assigns `count` consecutive wires to the low bits of `source`.
    Bits(LinComb, u8),
}

/// A compiled constraint system together with the program that fills in its
/// auxiliary wires.
#[derive(Debug, Clone)]
pub struct ChunkCircuit {
    layout: ChunkLayout,
    cs: ConstraintSystem,
    program: Vec<Step>,
    digest: [u8; 32],
}

type Word = [LinComb; 32];

struct Builder {
    next_wire: u32,
    constraints: Vec<Constraint>,
    program: Vec<Step>,
}

impl Builder {
    fn alloc(&mut self) -> LinComb {
        let w = self.next_wire;
        self.next_wire += 1;
        LinComb::wire(w)
    }

    fn enforce(&mut self, a: LinComb, b: LinComb, c: LinComb) {
        self.constraints.push(Constraint { a, b, c });
    }

    fn enforce_equal(&mut self, lhs: &LinComb, rhs: &LinComb) {
        self.enforce(lhs.sub(rhs), LinComb::one(), LinComb::zero());
    }

    fn mul(&mut self, a: &LinComb, b: &LinComb) -> LinComb {
        if let Some(k) = a.as_constant() {
            return b.scale(k);
        }
        if let Some(k) = b.as_constant() {
            return a.scale(k);
        }
        self.program.push(Step::Product(a.clone(), b.clone()));
        let p = self.alloc();
        self.enforce(a.clone(), b.clone(), p.clone());
        p
    }

    /// Boolean wires for the low `count` bits of `value`, with the
    /// recomposition constraint.
    fn bits(&mut self, value: &LinComb, count: usize) -> Vec<LinComb> {
        self.program.push(Step::Bits(value.clone(), count as u8));
        let bits: Vec<LinComb> = (0..count).map(|_| self.alloc()).collect();
        let mut sum = LinComb::zero();
        let mut weight = Fe::ONE;
        for b in &bits {
            self.enforce(b.clone(), LinComb::one().sub(b), LinComb::zero());
            sum = sum.add_scaled(b, weight);
            weight = weight + weight;
        }
        self.enforce_equal(&sum, value);
        bits
    }

    fn xor(&mut self, a: &LinComb, b: &LinComb) -> LinComb {
        // a + b - 2ab
        let p = self.mul(a, b);
        a.add(b).add_scaled(&p, -Fe::from_u64(2))
    }

    fn xor3(&mut self, a: &LinComb, b: &LinComb, c: &LinComb) -> LinComb {
        let t = self.xor(a, b);
        self.xor(&t, c)
    }

    fn word_from_bits(bits: &[LinComb]) -> Word {
        array::from_fn(|i| bits[i].clone())
    }

    fn decompose_word(&mut self, value: &LinComb) -> Word {
        let bits = self.bits(value, 32);
        Self::word_from_bits(&bits)
    }

    /// `x >>> r` XOR `x >>> s` XOR (`x >> u` or `x >>> u`).
    fn sigma(&mut self, x: &Word, r: usize, s: usize, u: usize, shift: bool) -> Word {
        let at = |k: usize| x[k % 32].clone();
        array::from_fn::<usize, 32, _>(|i| i).map(|i| {
            let third = if shift {
                if i + u < 32 {
                    at(i + u)
                } else {
                    LinComb::zero()
                }
            } else {
                at(i + u)
            };
            self.xor3(&at(i + r), &at(i + s), &third)
        })
    }

    fn ch(&mut self, e: &Word, f: &Word, g: &Word) -> Word {
        // e ? f : g  ==  e * (f - g) + g
        array::from_fn::<usize, 32, _>(|i| i).map(|i| {
            let p = self.mul(&e[i], &f[i].sub(&g[i]));
            p.add(&g[i])
        })
    }

    fn maj(&mut self, a: &Word, b: &Word, c: &Word) -> Word {
        // ab + c * (a xor b)
        array::from_fn::<usize, 32, _>(|i| i).map(|i| {
            let ab = self.mul(&a[i], &b[i]);
            let axb = a[i].add(&b[i]).add_scaled(&ab, -Fe::from_u64(2));
            let q = self.mul(&c[i], &axb);
            ab.add(&q)
        })
    }

    /// Sum of words plus a constant modulo 2^32, via a range-checked carry.
    fn add_words(&mut self, summands: &[&Word], constant: u32) -> Word {
        let mut sum = LinComb::constant(Fe::from(constant));
        for w in summands {
            sum = sum.add(&word_value(w));
        }
        let terms = summands.len() as u64 + u64::from(constant != 0);
        let max = terms * u32::MAX as u64;
        let width = 64 - max.leading_zeros() as usize;
        let bits = self.bits(&sum, width.max(32));
        Self::word_from_bits(&bits[..32])
    }
}

fn word_value(w: &Word) -> LinComb {
    let mut acc = LinComb::zero();
    let mut weight = Fe::ONE;
    for b in w {
        acc = acc.add_scaled(b, weight);
        weight = weight + weight;
    }
    acc
}

/// Builds the constraint system for one layout. Deterministic: equal layouts
/// give identical systems.
pub fn compile_chunk_circuit(layout: &ChunkLayout) -> ChunkCircuit {
    let num_private = layout.deleted_len();
    let mut b = Builder {
        next_wire: PRIVATE_BASE + num_private as u32,
        constraints: Vec::new(),
        program: Vec::new(),
    };

    // Message bytes: public where kept, private where deleted. Deleted
    // positions must read zero in the public chunk.
    let mut private = PRIVATE_BASE;
    let mut byte_bits: Vec<Vec<LinComb>> = Vec::with_capacity(CHUNK_LEN);
    for pos in 0..CHUNK_LEN {
        let public = LinComb::wire(CHUNK_BASE + pos as u32);
        let source = if layout.is_deleted(pos) {
            b.enforce(public, LinComb::one(), LinComb::zero());
            private += 1;
            LinComb::wire(private - 1)
        } else {
            public
        };
        byte_bits.push(b.bits(&source, 8));
    }
    let mut w: Vec<Word> = (0..16)
        .map(|t| {
            // big-endian words: byte 4t is the most significant
            array::from_fn(|i| byte_bits[4 * t + 3 - i / 8][i % 8].clone())
        })
        .collect();

    let prev: Vec<Word> = (0..8)
        .map(|i| b.decompose_word(&LinComb::wire(PREV_BASE + i)))
        .collect();

    for t in 16..64 {
        let s1 = b.sigma(&w[t - 2], 17, 19, 10, true);
        let s0 = b.sigma(&w[t - 15], 7, 18, 3, true);
        let next = b.add_words(&[&s1, &w[t - 7], &s0, &w[t - 16]], 0);
        w.push(next);
    }

    let [mut va, mut vb, mut vc, mut vd, mut ve, mut vf, mut vg, mut vh]: [Word; 8] =
        array::from_fn(|i| prev[i].clone());
    for t in 0..64 {
        let s1 = b.sigma(&ve, 6, 11, 25, false);
        let ch = b.ch(&ve, &vf, &vg);
        let t1 = b.add_words(&[&vh, &s1, &ch, &w[t]], ROUND_CONSTANTS[t]);
        let s0 = b.sigma(&va, 2, 13, 22, false);
        let maj = b.maj(&va, &vb, &vc);
        let new_a = b.add_words(&[&t1, &s0, &maj], 0);
        let new_e = b.add_words(&[&vd, &t1], 0);
        vh = vg;
        vg = vf;
        vf = ve;
        ve = new_e;
        vd = vc;
        vc = vb;
        vb = va;
        va = new_a;
    }

    for (i, v) in [va, vb, vc, vd, ve, vf, vg, vh].iter().enumerate() {
        let out = b.add_words(&[&prev[i], v], 0);
        b.enforce_equal(&word_value(&out), &LinComb::wire(NEXT_BASE + i as u32));
    }

    let num_aux = (b.next_wire - PRIVATE_BASE) as usize - num_private;
    let cs = ConstraintSystem {
        num_public: NUM_PUBLIC,
        num_private,
        num_aux,
        constraints: b.constraints,
    };
    let digest = cs.digest();
    ChunkCircuit {
        layout: layout.clone(),
        cs,
        program: b.program,
        digest,
    }
}

/// Public input values in wire order.
pub fn public_inputs(statement: &ChunkStatement) -> Vec<Fe> {
    let mut out = Vec::with_capacity(NUM_PUBLIC);
    out.extend(statement.prev_state.0.iter().map(|&w| Fe::from(w)));
    out.extend(
        statement
            .redacted_chunk
            .0
            .iter()
            .map(|&b| Fe::from(b as u32)),
    );
    out.extend(statement.next_state.0.iter().map(|&w| Fe::from(w)));
    out
}

impl ChunkCircuit {
    pub fn layout(&self) -> &ChunkLayout {
        &self.layout
    }

    pub fn constraint_system(&self) -> &ConstraintSystem {
        &self.cs
    }

    /// SHA-256 of the serialized constraint system.
    pub fn digest(&self) -> [u8; 32] {
        self.digest
    }

    /// Fills every wire by forward evaluation.
    pub fn assign(
        &self,
        statement: &ChunkStatement,
        witness: &ChunkWitness,
    ) -> Result<Assignment, ZkError> {
        let layout = statement.layout()?;
        if layout != self.layout {
            return Err(ZkError::LayoutMismatch(
                "statement layout differs from circuit".into(),
            ));
        }
        if witness.deleted_data.len() != self.cs.num_private {
            return Err(ZkError::LayoutMismatch(format!(
                "witness has {} bytes, layout deletes {}",
                witness.deleted_data.len(),
                self.cs.num_private
            )));
        }
        let mut values = Vec::with_capacity(self.cs.num_wires());
        values.push(Fe::ONE);
        values.extend(public_inputs(statement));
        values.extend(witness.deleted_data.iter().map(|&b| Fe::from(b as u32)));
        for step in &self.program {
            match step {
                Step::Product(a, b) => {
                    let v = a.eval(&values) * b.eval(&values);
                    values.push(v);
                }
                Step::Bits(source, count) => {
                    let v = source.eval(&values).to_canonical();
                    values.extend((0..*count).map(|i| Fe::from(v >> i & 1 == 1)));
                }
            }
        }
        debug_assert_eq!(values.len(), self.cs.num_wires());
        Ok(Assignment { values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashchain::{sha_round, Chunk, ShaState};
    use crate::redactor::splice;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn statement_for(
        layout: &ChunkLayout,
        original: &Chunk,
        prev: ShaState,
    ) -> (ChunkStatement, ChunkWitness) {
        let mut redacted = *original;
        let mut deleted = Vec::new();
        for pos in layout.positions() {
            deleted.push(original.0[pos]);
            redacted.0[pos] = 0;
        }
        let (starts, ends) = layout.to_arrays();
        (
            ChunkStatement {
                chunk_index: 0,
                prev_state: prev,
                redacted_chunk: redacted,
                starts,
                ends,
                next_state: sha_round(&prev, original),
            },
            ChunkWitness {
                deleted_data: deleted,
            },
        )
    }

    #[test]
    fn layout_validation() {
        assert!(ChunkLayout::new(vec![(3, 3)]).is_err());
        assert!(ChunkLayout::new(vec![(0, 65)]).is_err());
        assert!(ChunkLayout::new(vec![(0, 10), (5, 12)]).is_err());
        assert!(ChunkLayout::new(vec![(0, 64)]).is_ok());
        let l = ChunkLayout::new(vec![(10, 12), (0, 4)]).unwrap();
        assert_eq!(l.intervals(), &[(0, 4), (10, 12)]);
        let (s, e) = l.to_arrays();
        assert_eq!(ChunkLayout::from_arrays(&s, &e).unwrap(), l);
        let mut bad_s = s;
        bad_s[5] = 9;
        assert!(ChunkLayout::from_arrays(&bad_s, &e).is_err());
    }

    #[test]
    fn empty_layout_proves_public_round() {
        let c = compile_chunk_circuit(&ChunkLayout::empty());
        assert_eq!(c.constraint_system().num_private, 0);
        assert!(c.constraint_system().check_wires());
        let chunk = Chunk([7u8; 64]);
        let (st, wit) = statement_for(&ChunkLayout::empty(), &chunk, ShaState::IV);
        let a = c.assign(&st, &wit).unwrap();
        assert!(c.constraint_system().is_satisfied(&a));
    }

    #[test]
    fn deterministic_compilation() {
        let l = ChunkLayout::new(vec![(0, 4)]).unwrap();
        let a = compile_chunk_circuit(&l);
        let b = compile_chunk_circuit(&l);
        assert_eq!(
            a.constraint_system().to_bytes(),
            b.constraint_system().to_bytes()
        );
        assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn honest_and_dishonest_assignments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = ChunkLayout::new(vec![(2, 9), (40, 64)]).unwrap();
        let c = compile_chunk_circuit(&l);
        let mut bytes = [0u8; 64];
        rng.fill(&mut bytes[..]);
        let chunk = Chunk(bytes);
        let prev = ShaState(rng.gen());
        let (st, wit) = statement_for(&l, &chunk, prev);
        let a = c.assign(&st, &wit).unwrap();
        assert!(c.constraint_system().is_satisfied(&a));

        // altered witness, downstream wires recomputed honestly
        let mut bad = wit.clone();
        bad.deleted_data[0] ^= 1;
        let a2 = c.assign(&st, &bad).unwrap();
        assert!(!c.constraint_system().is_satisfied(&a2));
        let respliced = splice(&st.redacted_chunk, &l, &bad.deleted_data).unwrap();
        assert_ne!(sha_round(&prev, &respliced), st.next_state);

        // one internal wire flipped without recomputation
        let mut a3 = a.clone();
        let idx = a3.values.len() / 2;
        a3.values[idx] += Fe::ONE;
        assert!(!c.constraint_system().is_satisfied(&a3));

        // nonzero public byte at a deleted position
        let mut st2 = st.clone();
        st2.redacted_chunk.0[3] = 1;
        let a4 = c.assign(&st2, &wit).unwrap();
        assert!(!c.constraint_system().is_satisfied(&a4));
    }

    #[test]
    fn witness_length_checked() {
        let l = ChunkLayout::new(vec![(0, 4)]).unwrap();
        let c = compile_chunk_circuit(&l);
        let (st, mut wit) = statement_for(&l, &Chunk([1; 64]), ShaState::IV);
        wit.deleted_data.pop();
        assert!(matches!(
            c.assign(&st, &wit),
            Err(ZkError::LayoutMismatch(_))
        ));
    }
}
