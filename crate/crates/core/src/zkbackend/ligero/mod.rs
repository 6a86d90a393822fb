//! Transparent argument for R1CS satisfiability in the style of Ligero,
//! compiled to a non-interactive proof with a hash transcript.
//!
//! The witness `w` and the vectors `x = Aw`, `y = Bw`, `z = Cw` are cut into
//! rows of `ELL` entries. Each row is Reed-Solomon encoded: message entries
//! sit on the even points of a subgroup of size `K = 2 ELL`, random values on
//! the odd points, and the interpolant is evaluated on a coset of size
//! `N = 4 K`. The columns of the encoded matrix are salted, hashed and
//! committed in a Merkle tree. Three random-combination tests follow:
//!
//! * code: a random combination of all rows has degree below `K`;
//! * linear: `x - Aw`, `y - Bw`, `z - Cw` vanish and `w` agrees with the
//!   public inputs, checked through one summation over the message points;
//! * quadratic: `x * y - z` vanishes on the message points.
//!
//! Each test is masked by a committed random row, and every claimed
//! polynomial is checked against the opened columns at `QUERIES` positions.

mod fft;
mod merkle;
mod transcript;

use std::sync::OnceLock;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use self::fft::Domain;
use self::merkle::{Hash, MerkleTree};
use self::transcript::Transcript;
use super::circuit::{public_inputs, ChunkCircuit};
use super::field::Fe;
use super::r1cs::ConstraintSystem;
use super::{BackendId, Proof, ProofBackend, Rejection, ZkError};
use crate::redactor::{ChunkStatement, ChunkWitness};

pub const MAGIC: &[u8; 4] = b"LIG1";
const DOMAIN_SEP: &[u8] = b"zkredact/ligero/v1";

const LOG_ELL: u32 = 10;
const ELL: usize = 1 << LOG_ELL;
const K: usize = 2 * ELL;
const N: usize = 4 * K;
const QUERIES: usize = 320;
const SALT_LEN: usize = 16;

const CODE_LEN: usize = K;
const LIN_LEN: usize = K + ELL - 1;
const QUAD_LEN: usize = 2 * K - 1;

pub struct LigeroBackend;

struct Domains {
    ell: Domain,
    k: Domain,
    n: Domain,
}

fn domains() -> &'static Domains {
    static D: OnceLock<Domains> = OnceLock::new();
    D.get_or_init(|| Domains {
        ell: Domain::new(LOG_ELL),
        k: Domain::new(LOG_ELL + 1),
        n: Domain::new(LOG_ELL + 3),
    })
}

/// Row bookkeeping for one constraint system.
#[derive(Debug, Clone, Copy)]
struct Shape {
    wire_rows: usize,
    constraint_rows: usize,
    num_constraints: usize,
}

impl Shape {
    fn of(cs: &ConstraintSystem) -> Shape {
        Shape {
            wire_rows: cs.num_wires().div_ceil(ELL),
            constraint_rows: cs.constraints.len().div_ceil(ELL).max(1),
            num_constraints: cs.constraints.len(),
        }
    }

    fn data_rows(&self) -> usize {
        self.wire_rows + 3 * self.constraint_rows
    }

    fn rows(&self) -> usize {
        self.data_rows() + 3
    }

    fn x(&self, j: usize) -> usize {
        self.wire_rows + j
    }

    fn y(&self, j: usize) -> usize {
        self.wire_rows + self.constraint_rows + j
    }

    fn z(&self, j: usize) -> usize {
        self.wire_rows + 2 * self.constraint_rows + j
    }

    fn code_mask(&self) -> usize {
        self.data_rows()
    }

    fn lin_mask(&self) -> usize {
        self.data_rows() + 1
    }

    fn quad_mask(&self) -> usize {
        self.data_rows() + 2
    }
}

struct Challenges {
    code: Vec<Fe>,
    quad: Vec<Fe>,
    rx: Vec<Fe>,
    ry: Vec<Fe>,
    rz: Vec<Fe>,
    public: Vec<Fe>,
}

fn draw(rng: &mut ChaCha20Rng, count: usize) -> Vec<Fe> {
    (0..count).map(|_| Fe::random(rng)).collect()
}

fn begin_transcript(circuit: &ChunkCircuit, statement: &ChunkStatement, root: &Hash) -> Transcript {
    let mut t = Transcript::new(DOMAIN_SEP);
    t.absorb(b"circuit", &circuit.digest());
    t.absorb_field(b"public", &public_inputs(statement));
    t.absorb(b"root", root);
    t
}

fn draw_challenges(t: &mut Transcript, shape: &Shape, cs: &ConstraintSystem) -> Challenges {
    let mut rng = t.challenge(b"tests");
    let m = shape.num_constraints;
    Challenges {
        code: draw(&mut rng, shape.data_rows()),
        quad: draw(&mut rng, shape.constraint_rows),
        rx: draw(&mut rng, m),
        ry: draw(&mut rng, m),
        rz: draw(&mut rng, m),
        public: draw(&mut rng, 1 + cs.num_public),
    }
}

fn absorb_polys(t: &mut Transcript, code: &[Fe], lin: &[Fe], quad: &[Fe]) {
    t.absorb_field(b"code", code);
    t.absorb_field(b"linear", lin);
    t.absorb_field(b"quadratic", quad);
}

fn draw_queries(t: &mut Transcript) -> Vec<usize> {
    let mut rng = t.challenge(b"queries");
    let mut picked = std::collections::BTreeSet::new();
    while picked.len() < QUERIES {
        picked.insert((rng.next_u64() % N as u64) as usize);
    }
    picked.into_iter().collect()
}

/// Per-row coefficient vectors of the linear test, and its target value.
fn linear_coefficients(
    cs: &ConstraintSystem,
    shape: &Shape,
    ch: &Challenges,
    public: &[Fe],
) -> (Vec<Vec<Fe>>, Fe) {
    let mut wires = vec![Fe::ZERO; shape.wire_rows * ELL];
    for (i, k) in cs.constraints.iter().enumerate() {
        for (lc, r) in [(&k.a, ch.rx[i]), (&k.b, ch.ry[i]), (&k.c, ch.rz[i])] {
            for &(w, c) in lc.terms() {
                wires[w as usize] -= c * r;
            }
        }
    }
    let mut target = ch.public[0];
    wires[0] += ch.public[0];
    for (i, (&r, &v)) in ch.public[1..].iter().zip(public).enumerate() {
        wires[1 + i] += r;
        target += r * v;
    }
    let mut rows: Vec<Vec<Fe>> = wires.chunks(ELL).map(<[Fe]>::to_vec).collect();
    for r in [&ch.rx, &ch.ry, &ch.rz] {
        let mut padded = r.clone();
        padded.resize(shape.constraint_rows * ELL, Fe::ZERO);
        rows.extend(padded.chunks(ELL).map(<[Fe]>::to_vec));
    }
    (rows, target)
}

/// Evaluations on the code coset of the polynomials of degree below `ELL`
/// that interpolate each coefficient row over the message points.
fn coefficient_evals(rows: Vec<Vec<Fe>>) -> Vec<Vec<Fe>> {
    let d = domains();
    rows.into_par_iter()
        .map(|mut row| {
            d.ell.ifft(&mut row);
            d.n.coset_fft(&row, Domain::coset_shift())
        })
        .collect()
}

fn encode_row(message: &[Fe], rng: &mut ChaCha20Rng) -> Vec<Fe> {
    let d = domains();
    let mut values = vec![Fe::ZERO; K];
    for j in 0..ELL {
        values[2 * j] = message.get(j).copied().unwrap_or(Fe::ZERO);
        values[2 * j + 1] = Fe::random(rng);
    }
    d.k.ifft(&mut values);
    d.n.coset_fft(&values, Domain::coset_shift())
}

fn column_bytes(matrix: &[Vec<Fe>], col: usize) -> Vec<u8> {
    matrix
        .iter()
        .flat_map(|row| row[col].to_le_bytes())
        .collect()
}

/// Interpolates coset evaluations and keeps the low `len` coefficients.
fn interpolate(evals: &[Fe], len: usize) -> Vec<Fe> {
    let mut coeffs = domains().n.coset_ifft(evals, Domain::coset_shift());
    debug_assert!(coeffs[len..].iter().all(|c| c.is_zero()));
    coeffs.truncate(len);
    coeffs
}

fn row_rng(seed: [u8; 32], stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::from_seed(seed);
    rng.set_stream(stream);
    rng
}

fn prove(
    circuit: &ChunkCircuit,
    statement: &ChunkStatement,
    witness: &ChunkWitness,
    seed: [u8; 32],
) -> Result<Vec<u8>, ZkError> {
    let cs = circuit.constraint_system();
    let assignment = circuit.assign(statement, witness)?;
    if let Some(constraint) = cs.first_unsatisfied(&assignment) {
        return Err(ZkError::UnsatisfiedWitness { constraint });
    }
    let shape = Shape::of(cs);
    let (x, y, z) = cs.evaluate(&assignment);

    let mut messages: Vec<&[Fe]> = assignment.values.chunks(ELL).collect();
    for v in [&x, &y, &z] {
        let mut rows: Vec<&[Fe]> = v.chunks(ELL).collect();
        rows.resize(shape.constraint_rows, &[]);
        messages.extend(rows);
    }
    debug_assert_eq!(messages.len(), shape.data_rows());

    let mut matrix: Vec<Vec<Fe>> = messages
        .par_iter()
        .enumerate()
        .map(|(r, msg)| encode_row(msg, &mut row_rng(seed, r as u64)))
        .collect();

    let d = domains();
    let shift = Domain::coset_shift();
    let mut mask_rng = row_rng(seed, shape.data_rows() as u64);
    let code_mask = draw(&mut mask_rng, CODE_LEN);
    let mut lin_mask = draw(&mut mask_rng, LIN_LEN);
    lin_mask[0] = -(lin_mask[ELL] + lin_mask[2 * ELL]);
    let s = draw(&mut mask_rng, QUAD_LEN - ELL);
    let mut quad_mask = vec![Fe::ZERO; QUAD_LEN];
    for (i, &c) in s.iter().enumerate() {
        quad_mask[i] -= c;
        quad_mask[i + ELL] += c;
    }
    for mask in [&code_mask, &lin_mask, &quad_mask] {
        matrix.push(d.n.coset_fft(mask, shift));
    }

    let mut salt_rng = row_rng(seed, shape.rows() as u64);
    let salts: Vec<[u8; SALT_LEN]> = (0..N)
        .map(|_| {
            let mut s = [0u8; SALT_LEN];
            salt_rng.fill_bytes(&mut s);
            s
        })
        .collect();
    let leaves: Vec<Hash> = (0..N)
        .into_par_iter()
        .map(|col| merkle::leaf(&salts[col], &column_bytes(&matrix, col)))
        .collect();
    let tree = MerkleTree::new(leaves);
    let root = tree.root();

    let public = public_inputs(statement);
    let mut t = begin_transcript(circuit, statement, &root);
    let ch = draw_challenges(&mut t, &shape, cs);
    let (coef_rows, _) = linear_coefficients(cs, &shape, &ch, &public);
    let coef_evals = coefficient_evals(coef_rows);

    let mut code = matrix[shape.code_mask()].clone();
    let mut lin = matrix[shape.lin_mask()].clone();
    let mut quad = matrix[shape.quad_mask()].clone();
    for (r, row) in matrix[..shape.data_rows()].iter().enumerate() {
        for i in 0..N {
            code[i] += ch.code[r] * row[i];
            lin[i] += coef_evals[r][i] * row[i];
        }
    }
    for j in 0..shape.constraint_rows {
        let (xr, yr, zr) = (
            &matrix[shape.x(j)],
            &matrix[shape.y(j)],
            &matrix[shape.z(j)],
        );
        for i in 0..N {
            quad[i] += ch.quad[j] * (xr[i] * yr[i] - zr[i]);
        }
    }
    let code = interpolate(&code, CODE_LEN);
    let lin = interpolate(&lin, LIN_LEN);
    let quad = interpolate(&quad, QUAD_LEN);
    absorb_polys(&mut t, &code, &lin, &quad);
    let queries = draw_queries(&mut t);

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for v in [ELL, QUERIES, shape.rows()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&root);
    for poly in [&code, &lin, &quad] {
        for c in poly.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for &q in &queries {
        out.extend_from_slice(&salts[q]);
        out.extend_from_slice(&column_bytes(&matrix, q));
    }
    let nodes = tree.open(&queries);
    out.extend_from_slice(&(nodes.len() as u32).to_le_bytes());
    for n in &nodes {
        out.extend_from_slice(n);
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], Rejection> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Rejection::new("proof truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, Rejection> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn fe(&mut self) -> Result<Fe, Rejection> {
        Fe::from_le_bytes(self.take(16)?.try_into().unwrap())
            .ok_or_else(|| Rejection::new("non-canonical field element"))
    }

    fn fes(&mut self, count: usize) -> Result<Vec<Fe>, Rejection> {
        (0..count).map(|_| self.fe()).collect()
    }
}

fn verify(
    circuit: &ChunkCircuit,
    statement: &ChunkStatement,
    bytes: &[u8],
) -> Result<(), Rejection> {
    let cs = circuit.constraint_system();
    let shape = Shape::of(cs);
    let rows = shape.rows();
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Rejection::new("not a sound-backend proof"));
    }
    if [r.u32()?, r.u32()?, r.u32()?] != [ELL as u32, QUERIES as u32, rows as u32] {
        return Err(Rejection::new("proof parameters do not match the circuit"));
    }
    let root: Hash = r.take(32)?.try_into().unwrap();
    let code = r.fes(CODE_LEN)?;
    let lin = r.fes(LIN_LEN)?;
    let quad = r.fes(QUAD_LEN)?;
    let mut salts = Vec::with_capacity(QUERIES);
    let mut columns = Vec::with_capacity(QUERIES);
    for _ in 0..QUERIES {
        salts.push(r.take(SALT_LEN)?);
        columns.push(r.fes(rows)?);
    }
    let node_count = r.u32()? as usize;
    if node_count > QUERIES * N.trailing_zeros() as usize {
        return Err(Rejection::new("too many Merkle nodes"));
    }
    let nodes: Vec<Hash> = (0..node_count)
        .map(|_| r.take(32).map(|s| s.try_into().unwrap()))
        .collect::<Result<_, _>>()?;
    if r.pos != bytes.len() {
        return Err(Rejection::new("trailing proof bytes"));
    }

    let public = public_inputs(statement);
    let mut t = begin_transcript(circuit, statement, &root);
    let ch = draw_challenges(&mut t, &shape, cs);
    absorb_polys(&mut t, &code, &lin, &quad);
    let queries = draw_queries(&mut t);

    let leaves: Vec<Hash> = salts
        .iter()
        .zip(&columns)
        .map(|(salt, col)| {
            let bytes: Vec<u8> = col.iter().flat_map(|v| v.to_le_bytes()).collect();
            merkle::leaf(salt, &bytes)
        })
        .collect();
    if !merkle::verify_batch(&root, N, &queries, &leaves, &nodes) {
        return Err(Rejection::new("column opening does not match commitment"));
    }

    let (coef_rows, target) = linear_coefficients(cs, &shape, &ch, &public);
    let sum = lin[0] + lin[ELL] + lin[2 * ELL];
    if Fe::from_u64(ELL as u64) * sum != target {
        return Err(Rejection::new("linear test: sum mismatch"));
    }
    for i in 0..ELL {
        let folded: Fe = quad[i..].iter().step_by(ELL).copied().sum();
        if !folded.is_zero() {
            return Err(Rejection::new("quadratic test: not divisible"));
        }
    }

    let d = domains();
    let shift = Domain::coset_shift();
    let coef_evals = coefficient_evals(coef_rows);
    let code_evals = d.n.coset_fft(&code, shift);
    let lin_evals = d.n.coset_fft(&lin, shift);
    let quad_evals = d.n.coset_fft(&quad, shift);
    for (&q, col) in queries.iter().zip(&columns) {
        let mut c = col[shape.code_mask()];
        let mut l = col[shape.lin_mask()];
        let mut p = col[shape.quad_mask()];
        for row in 0..shape.data_rows() {
            c += ch.code[row] * col[row];
            l += coef_evals[row][q] * col[row];
        }
        for j in 0..shape.constraint_rows {
            p += ch.quad[j] * (col[shape.x(j)] * col[shape.y(j)] - col[shape.z(j)]);
        }
        if c != code_evals[q] {
            return Err(Rejection::new(format!("code test fails at column {q}")));
        }
        if l != lin_evals[q] {
            return Err(Rejection::new(format!("linear test fails at column {q}")));
        }
        if p != quad_evals[q] {
            return Err(Rejection::new(format!(
                "quadratic test fails at column {q}"
            )));
        }
    }
    Ok(())
}

impl ProofBackend for LigeroBackend {
    fn id(&self) -> BackendId {
        BackendId::Sound
    }

    fn prove(
        &self,
        circuit: &ChunkCircuit,
        statement: &ChunkStatement,
        witness: &ChunkWitness,
        seed: [u8; 32],
    ) -> Result<Proof, ZkError> {
        Ok(Proof {
            bytes: prove(circuit, statement, witness, seed)?,
            backend_id: BackendId::Sound,
        })
    }

    fn verify(
        &self,
        circuit: &ChunkCircuit,
        statement: &ChunkStatement,
        proof: &Proof,
    ) -> Result<(), Rejection> {
        verify(circuit, statement, &proof.bytes)
    }
}
