//! Small-register quantum simulation used to check the graph rewriting
//! rules against actual state vectors.
//!
//! A rewrite is accepted when the simulated post-measurement state (outcome
//! `+1`, or `P_0` for the merge) equals the predicted graph state after some
//! product of single-qubit Clifford corrections on the measured qubit's
//! former neighbourhood.

use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graphstate::{QubitGraph, QubitId};

/// Largest register `graph_state_vector` accepts.
pub const MAX_VECTOR_QUBITS: usize = 10;
/// Largest graph `verify_rule` accepts.
pub const MAX_RULE_QUBITS: usize = 8;

const NORM_EPS: f64 = 1e-12;
const FIDELITY_TOL: f64 = 1e-8;

type Matrix2 = [[Complex64; 2]; 2];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn matrix(self) -> Matrix2 {
        let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
        match self {
            Pauli::I => [[o, z], [z, o]],
            Pauli::X => [[z, o], [o, z]],
            Pauli::Y => [[z, -i], [i, z]],
            Pauli::Z => [[o, z], [z, -o]],
        }
    }
}

/// Measurement basis for `project_pauli`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

/// Pure state on labelled qubits; bit `k` of an index is the qubit
/// `labels[k]`.
#[derive(Debug, Clone)]
pub struct StateVector {
    labels: Vec<QubitId>,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn labels(&self) -> &[QubitId] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    fn position(&self, q: QubitId) -> Result<usize> {
        self.labels.iter().position(|&l| l == q).ok_or(Error::QubitNotFound(q))
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
    }

    fn normalized(mut self) -> Result<Self> {
        let norm = self.norm();
        if norm < NORM_EPS {
            return Err(Error::ZeroNorm);
        }
        for a in &mut self.amps {
            *a /= norm;
        }
        Ok(self)
    }

    /// Applies a 2x2 unitary to qubit `q`.
    pub fn apply_single(&mut self, q: QubitId, m: &Matrix2) -> Result<()> {
        let p = self.position(q)?;
        self.apply_at(p, m);
        Ok(())
    }

    fn apply_at(&mut self, p: usize, m: &Matrix2) {
        let bit = 1usize << p;
        for x in 0..self.amps.len() {
            if x & bit == 0 {
                let (a0, a1) = (self.amps[x], self.amps[x | bit]);
                self.amps[x] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[x | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    pub fn apply_hadamard(&mut self, q: QubitId) -> Result<()> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        self.apply_single(q, &[[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]])
    }

    pub fn apply_cz(&mut self, a: QubitId, b: QubitId) -> Result<()> {
        let mask = (1usize << self.position(a)?) | (1usize << self.position(b)?);
        for (x, amp) in self.amps.iter_mut().enumerate() {
            if x & mask == mask {
                *amp = -*amp;
            }
        }
        Ok(())
    }

    /// `|<self|other>|^2`, assuming both are normalized over the same labels.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        if self.labels != other.labels {
            return 0.0;
        }
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    }

    /// `<self| P |self>` for a Pauli string given per position.
    fn expectation(&self, paulis: &[Pauli], negative: bool) -> Complex64 {
        let mut flip = 0usize;
        for (k, p) in paulis.iter().enumerate() {
            if matches!(p, Pauli::X | Pauli::Y) {
                flip |= 1 << k;
            }
        }
        let mut total = c(0.0, 0.0);
        for (x, amp) in self.amps.iter().enumerate() {
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            let mut phase = c(1.0, 0.0);
            for (k, p) in paulis.iter().enumerate() {
                let bit = (x >> k) & 1 == 1;
                match p {
                    Pauli::Z if bit => phase = -phase,
                    Pauli::Y => phase *= if bit { c(0.0, -1.0) } else { c(0.0, 1.0) },
                    _ => {}
                }
            }
            total += self.amps[x ^ flip].conj() * phase * amp;
        }
        if negative {
            -total
        } else {
            total
        }
    }
}

/// Graph state: CZ on every edge applied to `|+>` on every qubit. Qubits are
/// ordered by ascending id.
pub fn graph_state_vector(g: &QubitGraph) -> Result<StateVector> {
    let n = g.len();
    if n > MAX_VECTOR_QUBITS {
        return Err(Error::TooLarge {
            qubits: n,
            limit: MAX_VECTOR_QUBITS,
        });
    }
    let amp = c((0.5f64).powf(n as f64 / 2.0), 0.0);
    let mut sv = StateVector {
        labels: g.qubits().collect(),
        amps: vec![amp; 1 << n],
    };
    for (a, b) in g.edges() {
        sv.apply_cz(a, b)?;
    }
    Ok(sv)
}

/// Projects qubit `q` onto the `+1` eigenstate of `basis`, factors it out
/// and renormalizes.
pub fn project_pauli(sv: &StateVector, basis: Basis, q: QubitId) -> Result<StateVector> {
    let p = sv.position(q)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let eigen = match basis {
        Basis::X => [c(h, 0.0), c(h, 0.0)],
        Basis::Y => [c(h, 0.0), c(0.0, h)],
        Basis::Z => [c(1.0, 0.0), c(0.0, 0.0)],
    };
    let low = (1usize << p) - 1;
    let mut amps = vec![c(0.0, 0.0); sv.amps.len() / 2];
    for (y, out) in amps.iter_mut().enumerate() {
        let base = (y & low) | ((y & !low) << 1);
        *out = eigen[0].conj() * sv.amps[base] + eigen[1].conj() * sv.amps[base | (1 << p)];
    }
    let mut labels = sv.labels.clone();
    labels.remove(p);
    StateVector { labels, amps }.normalized()
}

/// Applies `P_0 = |0>_w<00|_{u,v} + |1>_w<11|_{u,v}`; `w` takes `u`'s label
/// and position.
pub fn project_merge(sv: &StateVector, u: QubitId, v: QubitId) -> Result<StateVector> {
    let pu = sv.position(u)?;
    let pv = sv.position(v)?;
    if pu == pv {
        return Err(Error::InvalidPair(u, v));
    }
    let low = (1usize << pv) - 1;
    let mut amps = vec![c(0.0, 0.0); sv.amps.len() / 2];
    for (y, out) in amps.iter_mut().enumerate() {
        // y indexes the register without v; u keeps its bit (shifted if above v)
        let x = (y & low) | ((y & !low) << 1);
        let ubit = (x >> pu) & 1;
        *out = sv.amps[x | (ubit << pv)];
    }
    let mut labels = sv.labels.clone();
    labels.remove(pv);
    StateVector { labels, amps }.normalized()
}

/// Binary symplectic stabilizer tableau; row `k` is `(-1)^sign X^x Z^z`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilizerTableau {
    labels: Vec<QubitId>,
    x: Vec<Vec<bool>>,
    z: Vec<Vec<bool>>,
    sign: Vec<bool>,
}

impl StabilizerTableau {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[QubitId] {
        &self.labels
    }

    /// Generator `k` as a Pauli string over positions, plus its sign.
    pub fn generator(&self, k: usize) -> (Vec<Pauli>, bool) {
        let paulis = self.x[k]
            .iter()
            .zip(&self.z[k])
            .map(|(&x, &z)| match (x, z) {
                (false, false) => Pauli::I,
                (true, false) => Pauli::X,
                (false, true) => Pauli::Z,
                (true, true) => Pauli::Y,
            })
            .collect();
        (paulis, self.sign[k])
    }

    fn commute(&self, a: usize, b: usize) -> bool {
        let mut parity = false;
        for q in 0..self.n() {
            parity ^= (self.x[a][q] & self.z[b][q]) ^ (self.z[a][q] & self.x[b][q]);
        }
        !parity
    }

    fn rank(&self) -> usize {
        let n = self.n();
        let mut rows: Vec<Vec<bool>> = (0..self.x.len())
            .map(|k| self.x[k].iter().chain(&self.z[k]).copied().collect())
            .collect();
        let mut rank = 0;
        for col in 0..2 * n {
            let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][col]) else {
                continue;
            };
            rows.swap(rank, pivot);
            for r in 0..rows.len() {
                if r != rank && rows[r][col] {
                    let src = rows[rank].clone();
                    for (d, s) in rows[r].iter_mut().zip(src) {
                        *d ^= s;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    /// Rows pairwise commute and are independent.
    pub fn is_valid(&self) -> bool {
        let m = self.x.len();
        (0..m).all(|a| (a + 1..m).all(|b| self.commute(a, b))) && self.rank() == m
    }

    /// Every generator has expectation `+1` on `sv` (labels must match).
    pub fn stabilizes(&self, sv: &StateVector, tol: f64) -> bool {
        sv.labels == self.labels
            && (0..self.x.len()).all(|k| {
                let (p, neg) = self.generator(k);
                (sv.expectation(&p, neg) - c(1.0, 0.0)).norm() < tol
            })
    }
}

/// One generator `X_v prod_{u in N(v)} Z_u` per qubit, all signs `+`.
pub fn graph_state_tableau(g: &QubitGraph) -> StabilizerTableau {
    let labels: Vec<QubitId> = g.qubits().collect();
    let n = labels.len();
    let mut x = vec![vec![false; n]; n];
    let mut z = vec![vec![false; n]; n];
    for (k, &v) in labels.iter().enumerate() {
        x[k][k] = true;
        for u in g.neighbors(v).unwrap() {
            let j = labels.binary_search(u).unwrap();
            z[k][j] = true;
        }
    }
    StabilizerTableau {
        labels,
        x,
        z,
        sign: vec![false; n],
    }
}

/// `i^phase X^x Z^z`, bit `k` standing for position `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct PauliWord {
    x: u32,
    z: u32,
    phase: u8,
}

impl PauliWord {
    fn mul(self, o: PauliWord) -> PauliWord {
        let swap = 2 * ((self.z & o.x).count_ones() % 2) as u8;
        PauliWord {
            x: self.x ^ o.x,
            z: self.z ^ o.z,
            phase: (self.phase + o.phase + swap) % 4,
        }
    }

    fn from_paulis(paulis: &[Pauli], negative: bool) -> PauliWord {
        let mut w = PauliWord {
            x: 0,
            z: 0,
            phase: if negative { 2 } else { 0 },
        };
        for (k, p) in paulis.iter().enumerate() {
            match p {
                Pauli::I => {}
                Pauli::X => w.x |= 1 << k,
                Pauli::Z => w.z |= 1 << k,
                Pauli::Y => {
                    w.x |= 1 << k;
                    w.z |= 1 << k;
                    w.phase = (w.phase + 1) % 4;
                }
            }
        }
        w
    }
}

fn drop_bit(bits: u32, p: usize) -> u32 {
    let low = (1u32 << p) - 1;
    (bits & low) | ((bits >> 1) & !low)
}

/// Every element of a stabilizer group, with its phase, over labelled
/// positions.
#[derive(Debug, Clone)]
pub struct StabilizerGroup {
    labels: Vec<QubitId>,
    elements: HashMap<(u32, u32), u8>,
}

impl StabilizerGroup {
    /// The `2^n` products of the graph-state generators.
    pub fn of_graph(g: &QubitGraph) -> Result<Self> {
        if g.len() > MAX_VECTOR_QUBITS {
            return Err(Error::TooLarge {
                qubits: g.len(),
                limit: MAX_VECTOR_QUBITS,
            });
        }
        let tableau = graph_state_tableau(g);
        let gens: Vec<PauliWord> = (0..tableau.n())
            .map(|k| {
                let (p, neg) = tableau.generator(k);
                PauliWord::from_paulis(&p, neg)
            })
            .collect();
        let mut elements = HashMap::with_capacity(1 << gens.len());
        let mut current = PauliWord { x: 0, z: 0, phase: 0 };
        elements.insert((0, 0), 0);
        // Gray code: step i toggles generator trailing_zeros(i)
        for i in 1u32..(1 << gens.len()) {
            current = current.mul(gens[i.trailing_zeros() as usize]);
            elements.insert((current.x, current.z), current.phase);
        }
        Ok(Self {
            labels: tableau.labels().to_vec(),
            elements,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    fn contains(&self, w: PauliWord) -> bool {
        self.elements.get(&(w.x, w.z)) == Some(&w.phase)
    }

    fn position(&self, q: QubitId) -> Result<usize> {
        self.labels.iter().position(|&l| l == q).ok_or(Error::QubitNotFound(q))
    }

    fn rebuild(&self, removed: usize, kept: impl Iterator<Item = PauliWord>) -> Self {
        let mut labels = self.labels.clone();
        labels.remove(removed);
        let elements = kept
            .map(|w| ((drop_bit(w.x, removed), drop_bit(w.z, removed)), w.phase))
            .collect();
        Self { labels, elements }
    }

    fn words(&self) -> impl Iterator<Item = PauliWord> + '_ {
        self.elements.iter().map(|(&(x, z), &phase)| PauliWord { x, z, phase })
    }

    /// Group of the state left after projecting `q` onto the `+1`
    /// eigenstate of `basis` and discarding it.
    pub fn after_pauli(&self, basis: Basis, q: QubitId) -> Result<Self> {
        let p = self.position(q)?;
        let bit = 1u32 << p;
        let (mx, mz) = match basis {
            Basis::X => (bit, 0),
            Basis::Y => (bit, bit),
            Basis::Z => (0, bit),
        };
        let minus = (PauliWord::from_paulis(
            &(0..self.labels.len())
                .map(|k| {
                    if k != p {
                        Pauli::I
                    } else {
                        match basis {
                            Basis::X => Pauli::X,
                            Basis::Y => Pauli::Y,
                            Basis::Z => Pauli::Z,
                        }
                    }
                })
                .collect::<Vec<_>>(),
            true,
        ))
        .phase;
        if self.elements.get(&(mx, mz)) == Some(&minus) {
            return Err(Error::ZeroNorm);
        }
        let kept = self.words().filter_map(move |w| {
            let on = (w.x & bit != 0, w.z & bit != 0);
            match (basis, on) {
                (_, (false, false)) => Some(w),
                (Basis::X, (true, false)) | (Basis::Z, (false, true)) => Some(w),
                // X Z = -i Y on the measured qubit
                (Basis::Y, (true, true)) => Some(PauliWord {
                    phase: (w.phase + 3) % 4,
                    ..w
                }),
                _ => None,
            }
        });
        Ok(self.rebuild(p, kept))
    }

    /// Group after `P_0` on `u`, `v`; the merged qubit sits at `u`'s
    /// position.
    pub fn after_merge(&self, u: QubitId, v: QubitId) -> Result<Self> {
        let pu = self.position(u)?;
        let pv = self.position(v)?;
        if pu == pv {
            return Err(Error::InvalidPair(u, v));
        }
        let (bu, bv) = (1u32 << pu, 1u32 << pv);
        if self.elements.get(&(0, bu | bv)) == Some(&2) {
            return Err(Error::ZeroNorm);
        }
        // on the code space Z_u = Z_v = Z_w and X_u X_v = X_w
        let kept = self.words().filter_map(move |w| {
            if (w.x & bu != 0) != (w.x & bv != 0) {
                return None;
            }
            let zw = (w.z & bu != 0) ^ (w.z & bv != 0);
            let z = (w.z & !bu & !bv) | if zw { bu } else { 0 };
            Some(PauliWord {
                x: w.x & !bv,
                z,
                phase: w.phase,
            })
        });
        Ok(self.rebuild(pv, kept))
    }
}

/// The 24 single-qubit Cliffords (modulo phase) with their action
/// `C^dagger P C` on X, Y and Z.
pub struct CliffordCatalog {
    pub matrices: Vec<Matrix2>,
    conj: Vec<[(Pauli, bool); 3]>,
}

fn mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn dagger(a: &Matrix2) -> Matrix2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

fn canonical(m: &Matrix2) -> Matrix2 {
    let lead = m.iter().flatten().find(|z| z.norm() > 1e-9).copied().unwrap();
    let phase = lead.conj() / lead.norm();
    let mut out = *m;
    for z in out.iter_mut().flatten() {
        *z *= phase;
    }
    out
}

fn close(a: &Matrix2, b: &Matrix2) -> bool {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .all(|(x, y)| (x - y).norm() < 1e-9)
}

impl CliffordCatalog {
    fn build() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let hadamard = [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]];
        let phase = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 1.0)]];
        let mut matrices = vec![Pauli::I.matrix()];
        let mut frontier = 0;
        while frontier < matrices.len() {
            let m = matrices[frontier];
            for g in [&hadamard, &phase] {
                let next = canonical(&mul(g, &m));
                if !matrices.iter().any(|x| close(x, &next)) {
                    matrices.push(next);
                }
            }
            frontier += 1;
        }
        assert_eq!(matrices.len(), 24, "single-qubit Clifford group modulo phase");
        let conj = matrices
            .iter()
            .map(|m| {
                [Pauli::X, Pauli::Y, Pauli::Z].map(|p| {
                    let image = mul(&dagger(m), &mul(&p.matrix(), m));
                    [Pauli::X, Pauli::Y, Pauli::Z]
                        .into_iter()
                        .find_map(|q| {
                            let qm = q.matrix();
                            if close(&image, &qm) {
                                Some((q, false))
                            } else if close(&image, &qm.map(|r| r.map(|z| -z))) {
                                Some((q, true))
                            } else {
                                None
                            }
                        })
                        .expect("Cliffords map Paulis to signed Paulis")
                })
            })
            .collect();
        Self { matrices, conj }
    }

    pub fn get() -> &'static CliffordCatalog {
        static CATALOG: OnceLock<CliffordCatalog> = OnceLock::new();
        CATALOG.get_or_init(CliffordCatalog::build)
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// `C_k^dagger P C_k` as a signed Pauli.
    pub fn conjugate(&self, k: usize, p: Pauli) -> (Pauli, bool) {
        match p {
            Pauli::I => (Pauli::I, false),
            Pauli::X => self.conj[k][0],
            Pauli::Y => self.conj[k][1],
            Pauli::Z => self.conj[k][2],
        }
    }
}

/// One of the four graph rewriting rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RewriteOp {
    MeasureZ(QubitId),
    MeasureY(QubitId),
    MeasureX { qubit: QubitId, helper: QubitId },
    Merge(QubitId, QubitId),
}

/// Searches for single-qubit Cliffords on `support` (positions of `sv`)
/// mapping `sv` onto `target`. Constraint propagation over the target's
/// stabilizer generators prunes the `24^|support|` candidates.
fn find_correction(
    sv: &StateVector,
    group: &StabilizerGroup,
    target_graph: &QubitGraph,
    support: &[usize],
) -> Result<bool> {
    let target = graph_state_vector(target_graph)?;
    let tableau = graph_state_tableau(target_graph);
    if tableau.labels() != sv.labels() || group.labels != sv.labels {
        return Ok(false);
    }
    let catalog = CliffordCatalog::get();
    let gens: Vec<(Vec<Pauli>, bool)> = (0..tableau.n()).map(|k| tableau.generator(k)).collect();
    // generator k becomes checkable once support[..=due[k]] is assigned
    let due: Vec<Option<usize>> = gens
        .iter()
        .map(|(p, _)| {
            support
                .iter()
                .enumerate()
                .filter(|(_, &pos)| p[pos] != Pauli::I)
                .map(|(i, _)| i)
                .max()
        })
        .collect();

    let satisfied = |k: usize, choice: &[usize]| -> bool {
        let (mut paulis, mut neg) = gens[k].clone();
        for (i, &pos) in support.iter().enumerate().take(choice.len()) {
            let (p, s) = catalog.conjugate(choice[i], paulis[pos]);
            paulis[pos] = p;
            neg ^= s;
        }
        group.contains(PauliWord::from_paulis(&paulis, neg))
    };

    if (0..gens.len()).any(|k| due[k].is_none() && !satisfied(k, &[])) {
        return Ok(false);
    }

    fn search(
        depth: usize,
        choice: &mut Vec<usize>,
        support: &[usize],
        due: &[Option<usize>],
        satisfied: &dyn Fn(usize, &[usize]) -> bool,
        accept: &dyn Fn(&[usize]) -> bool,
    ) -> bool {
        if depth == support.len() {
            return accept(choice);
        }
        for k in 0..CliffordCatalog::get().len() {
            choice.push(k);
            let ok = due
                .iter()
                .enumerate()
                .filter(|(_, d)| **d == Some(depth))
                .all(|(g, _)| satisfied(g, choice));
            if ok && search(depth + 1, choice, support, due, satisfied, accept) {
                return true;
            }
            choice.pop();
        }
        false
    }

    let accept = |choice: &[usize]| -> bool {
        let mut corrected = sv.clone();
        for (i, &pos) in support.iter().enumerate() {
            corrected.apply_at(pos, &catalog.matrices[choice[i]]);
        }
        corrected.fidelity(&target) > 1.0 - FIDELITY_TOL
    };

    let mut choice = Vec::with_capacity(support.len());
    Ok(search(0, &mut choice, support, &due, &satisfied, &accept))
}

/// Simulates `op` on the graph state of `g` and checks that the graph
/// predicted by the rewriting rule is reached up to local Clifford
/// corrections on the former neighbourhood.
pub fn verify_rule(g: &QubitGraph, op: RewriteOp) -> Result<bool> {
    if g.len() > MAX_RULE_QUBITS {
        return Err(Error::TooLarge {
            qubits: g.len(),
            limit: MAX_RULE_QUBITS,
        });
    }
    let sv = graph_state_vector(g)?;
    let group = StabilizerGroup::of_graph(g)?;
    let nbrs = |q: QubitId| -> Result<BTreeSet<QubitId>> { Ok(g.neighbors(q).ok_or(Error::QubitNotFound(q))?.clone()) };
    let pauli = |basis: Basis, v: QubitId| -> Result<(StateVector, StabilizerGroup)> {
        Ok((project_pauli(&sv, basis, v)?, group.after_pauli(basis, v)?))
    };
    let ((simulated, reduced), predicted, region) = match op {
        RewriteOp::MeasureZ(v) => (pauli(Basis::Z, v)?, g.measure_z(v)?, nbrs(v)?),
        RewriteOp::MeasureY(v) => (pauli(Basis::Y, v)?, g.measure_y(v)?, nbrs(v)?),
        RewriteOp::MeasureX { qubit, helper } => (pauli(Basis::X, qubit)?, g.measure_x(qubit, helper)?, nbrs(qubit)?),
        RewriteOp::Merge(u, v) => {
            let (predicted, w) = g.merge(u, v)?;
            let mut region: BTreeSet<QubitId> = nbrs(u)?.union(&nbrs(v)?).copied().collect();
            region.remove(&u);
            region.remove(&v);
            region.insert(w);
            ((project_merge(&sv, u, v)?, group.after_merge(u, v)?), predicted, region)
        }
    };
    let support: Vec<usize> = simulated
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, q)| region.contains(q))
        .map(|(k, _)| k)
        .collect();
    find_correction(&simulated, &reduced, &predicted, &support)
}

/// Pass counts for one rewriting rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RuleTally {
    pub checked: usize,
    pub passed: usize,
}

impl RuleTally {
    pub fn all_passed(&self) -> bool {
        self.checked == self.passed
    }

    fn add(self, other: RuleTally) -> RuleTally {
        RuleTally {
            checked: self.checked + other.checked,
            passed: self.passed + other.passed,
        }
    }
}

/// Outcome of a rule sweep; `merge_nonadjacent` covers the repeater use of
/// the merge on two unconnected qubits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RuleReport {
    pub rule1: RuleTally,
    pub rule2: RuleTally,
    pub rule3: RuleTally,
    pub rule4: RuleTally,
    pub merge_nonadjacent: RuleTally,
}

impl RuleReport {
    pub fn all_passed(&self) -> bool {
        [self.rule1, self.rule2, self.rule3, self.rule4, self.merge_nonadjacent]
            .iter()
            .all(RuleTally::all_passed)
    }

    pub fn combine(self, o: RuleReport) -> RuleReport {
        RuleReport {
            rule1: self.rule1.add(o.rule1),
            rule2: self.rule2.add(o.rule2),
            rule3: self.rule3.add(o.rule3),
            rule4: self.rule4.add(o.rule4),
            merge_nonadjacent: self.merge_nonadjacent.add(o.merge_nonadjacent),
        }
    }

    /// `rule1 PASS rule2 PASS rule3 PASS rule4 PASS`
    pub fn summary(&self) -> String {
        let word = |t: RuleTally| if t.all_passed() { "PASS" } else { "FAIL" };
        format!(
            "rule1 {} rule2 {} rule3 {} rule4 {}",
            word(self.rule1),
            word(self.rule2),
            word(self.rule3),
            word(self.rule4)
        )
    }
}

fn tally(ok: bool) -> RuleTally {
    RuleTally {
        checked: 1,
        passed: usize::from(ok),
    }
}

/// Checks every rule at every applicable site of `g`: each vertex for the
/// Pauli measurements (each neighbour as X helper), each edge and each
/// non-edge for the merge.
pub fn verify_all_sites(g: &QubitGraph) -> Result<RuleReport> {
    let mut r = RuleReport::default();
    let qubits: Vec<QubitId> = g.qubits().collect();
    for &v in &qubits {
        r.rule1 = r.rule1.add(tally(verify_rule(g, RewriteOp::MeasureZ(v))?));
        r.rule2 = r.rule2.add(tally(verify_rule(g, RewriteOp::MeasureY(v))?));
        let helpers: Vec<QubitId> = g.neighbors(v).unwrap().iter().copied().collect();
        if helpers.is_empty() {
            r.rule3 = r
                .rule3
                .add(tally(verify_rule(g, RewriteOp::MeasureX { qubit: v, helper: v })?));
        }
        for h in helpers {
            r.rule3 = r
                .rule3
                .add(tally(verify_rule(g, RewriteOp::MeasureX { qubit: v, helper: h })?));
        }
    }
    for (k, &u) in qubits.iter().enumerate() {
        for &v in &qubits[k + 1..] {
            let ok = verify_rule(g, RewriteOp::Merge(u, v))?;
            if g.has_edge(u, v) {
                r.rule4 = r.rule4.add(tally(ok));
            } else {
                r.merge_nonadjacent = r.merge_nonadjacent.add(tally(ok));
            }
        }
    }
    Ok(r)
}

/// Graph on qubits `0..n` whose edges are the set bits of `mask` over the
/// pairs `(i, j)`, `i < j`, in lexicographic order.
pub fn graph_from_mask(n: usize, mask: u64) -> QubitGraph {
    let mut g = QubitGraph::new();
    for k in 0..n {
        g.add_qubit(k);
    }
    let mut bit = 0;
    for i in 0..n {
        for j in i + 1..n {
            if mask >> bit & 1 == 1 {
                g.add_edge(i, j).unwrap();
            }
            bit += 1;
        }
    }
    g
}

/// Every labelled graph on `1..=max_n` vertices, every site.
pub fn exhaustive_sweep(max_n: usize) -> Result<RuleReport> {
    let jobs: Vec<(usize, u64)> = (1..=max_n)
        .flat_map(|n| (0..1u64 << (n * (n - 1) / 2)).map(move |m| (n, m)))
        .collect();
    jobs.par_iter()
        .map(|&(n, m)| verify_all_sites(&graph_from_mask(n, m)))
        .try_reduce(RuleReport::default, |a, b| Ok(a.combine(b)))
}

/// `count` random graphs with `min_n..=max_n` vertices and edge probability
/// one half, every site.
pub fn random_sweep<R: Rng + ?Sized>(count: usize, min_n: usize, max_n: usize, rng: &mut R) -> Result<RuleReport> {
    let graphs: Vec<QubitGraph> = (0..count)
        .map(|_| {
            let n = rng.random_range(min_n..=max_n);
            let mask = rng.random::<u64>() & ((1u64 << (n * (n - 1) / 2)) - 1);
            graph_from_mask(n, mask)
        })
        .collect();
    graphs
        .par_iter()
        .map(verify_all_sites)
        .try_reduce(RuleReport::default, |a, b| Ok(a.combine(b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge() -> QubitGraph {
        graph_from_mask(2, 1)
    }

    #[test]
    fn single_edge_vector() {
        let sv = graph_state_vector(&edge()).unwrap();
        let expected = [0.5, 0.5, 0.5, -0.5];
        for (a, e) in sv.amplitudes().iter().zip(expected) {
            assert!((a - c(e, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn hadamard_gives_epr_pair() {
        for q in [0, 1] {
            let mut sv = graph_state_vector(&edge()).unwrap();
            sv.apply_hadamard(q).unwrap();
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let expected = [h, 0.0, 0.0, h];
            for (a, e) in sv.amplitudes().iter().zip(expected) {
                assert!((a - c(e, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn lone_vertex_is_plus() {
        let sv = graph_state_vector(&graph_from_mask(1, 0)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(sv.amplitudes().iter().all(|a| (a - c(h, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn too_large_register() {
        assert!(matches!(
            graph_state_vector(&graph_from_mask(11, 0)),
            Err(Error::TooLarge { .. })
        ));
        assert!(matches!(
            verify_rule(&graph_from_mask(9, 0), RewriteOp::MeasureZ(0)),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn tableau_generators() {
        let t = graph_state_tableau(&graph_from_mask(1, 0));
        assert_eq!(t.generator(0), (vec![Pauli::X], false));
        let t = graph_state_tableau(&edge());
        assert_eq!(t.generator(0), (vec![Pauli::X, Pauli::Z], false));
        assert_eq!(t.generator(1), (vec![Pauli::Z, Pauli::X], false));
        let t = graph_state_tableau(&graph_from_mask(3, 0b111));
        assert_eq!(t.generator(1), (vec![Pauli::Z, Pauli::X, Pauli::Z], false));
        assert!(t.is_valid());
    }

    #[test]
    fn z_projection_of_plus_leaves_scalar() {
        let sv = graph_state_vector(&graph_from_mask(1, 0)).unwrap();
        let out = project_pauli(&sv, Basis::Z, 0).unwrap();
        assert_eq!(out.n(), 0);
        assert!((out.amplitudes()[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn z_projection_of_edge_leaves_plus() {
        let sv = graph_state_vector(&edge()).unwrap();
        let out = project_pauli(&sv, Basis::Z, 1).unwrap();
        let plus = graph_state_vector(&graph_from_mask(1, 0)).unwrap();
        assert!(out.fidelity(&plus) > 1.0 - 1e-12);
    }

    #[test]
    fn x_projection_on_path_middle_links_ends() {
        // path 0-1-2, measure 1 in X: the ends end up as a graph-state edge
        let g = graph_from_mask(3, 0b101);
        assert!(g.has_edge(0, 1) && g.has_edge(1, 2));
        assert!(verify_rule(&g, RewriteOp::MeasureX { qubit: 1, helper: 0 }).unwrap());
        let sv = project_pauli(&graph_state_vector(&g).unwrap(), Basis::X, 1).unwrap();
        let group = StabilizerGroup::of_graph(&g).unwrap().after_pauli(Basis::X, 1).unwrap();
        let predicted = g.measure_x(1, 0).unwrap();
        assert!(find_correction(&sv, &group, &predicted, &[0, 1]).unwrap());
    }

    #[test]
    fn zero_norm_projection() {
        let mut sv = graph_state_vector(&graph_from_mask(1, 0)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // |+> -> |0> via H, then projecting onto |1> would vanish; use X basis on |-> instead
        sv.apply_single(0, &[[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]])
            .unwrap();
        sv.apply_single(0, &Pauli::X.matrix()).unwrap();
        // now |1>: Z-projection onto |0> has zero norm
        assert_eq!(project_pauli(&sv, Basis::Z, 0).unwrap_err(), Error::ZeroNorm);
    }

    #[test]
    fn merge_of_plus_states() {
        let sv = graph_state_vector(&graph_from_mask(2, 0)).unwrap();
        let out = project_merge(&sv, 0, 1).unwrap();
        let plus = graph_state_vector(&graph_from_mask(1, 0)).unwrap();
        assert!(out.fidelity(&plus) > 1.0 - 1e-12);
    }

    #[test]
    fn merge_contracts_path() {
        // a-u-v-b as 0-1-2-3
        let mut g = QubitGraph::new();
        for k in 0..4 {
            g.add_qubit(k);
        }
        for (a, b) in [(0, 1), (1, 2), (2, 3)] {
            g.add_edge(a, b).unwrap();
        }
        assert!(verify_rule(&g, RewriteOp::Merge(1, 2)).unwrap());
    }

    #[test]
    fn merge_repeater_pattern() {
        // a-u  v-b, u and v unconnected
        let mut g = QubitGraph::new();
        for k in 0..4 {
            g.add_qubit(k);
        }
        g.add_edge(0, 1).unwrap();
        g.add_edge(2, 3).unwrap();
        assert!(verify_rule(&g, RewriteOp::Merge(1, 2)).unwrap());
        // the merged qubit then links a and b after an X measurement
        let (m, w) = g.merge(1, 2).unwrap();
        assert!(verify_rule(&m, RewriteOp::MeasureX { qubit: w, helper: 0 }).unwrap());
    }

    #[test]
    fn union_reading_of_merge_is_rejected() {
        // triangle: the union rule would keep edge a-w, which no local
        // correction can produce
        let g = graph_from_mask(3, 0b111);
        let sv = project_merge(&graph_state_vector(&g).unwrap(), 1, 2).unwrap();
        let group = StabilizerGroup::of_graph(&g).unwrap().after_merge(1, 2).unwrap();
        let mut union = QubitGraph::new();
        union.add_qubit(0);
        union.add_qubit(1);
        union.add_edge(0, 1).unwrap();
        assert!(!find_correction(&sv, &group, &union, &[0, 1]).unwrap());
        assert!(verify_rule(&g, RewriteOp::Merge(1, 2)).unwrap());
    }

    #[test]
    fn catalog_has_24_elements() {
        assert_eq!(CliffordCatalog::get().len(), 24);
    }

    #[test]
    fn small_exhaustive_sweep() {
        let r = exhaustive_sweep(3).unwrap();
        assert!(r.all_passed(), "{r:?}");
    }
}
