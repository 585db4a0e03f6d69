//! Loopy Laplacian (nodal admittance matrix) and Kron reduction.
//!
//! `Q_ij = -A_ij` off the diagonal and `Q_ii = sum_k A_ik` including the
//! shunt, so every row of `Q` sums to the bus shunt admittance.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::grid::{Bus, BusId, Line, LineKey, Network, NetworkError};

pub type CMatrix = DMatrix<Complex64>;
pub type CurrentVector = DVector<Complex64>;
pub type VoltageVector = DVector<Complex64>;
pub type PowerVector = DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
/// Reciprocal pivot-ratio below which a block counts as singular.
const RCOND_MIN: f64 = 1e-14;
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum KronError {
    #[error("ordering does not match the network buses: {0}")]
    Ordering(String),
    #[error("vector of length {got} does not match index of length {expected}")]
    Misaligned { expected: usize, got: usize },
    #[error("bus {0} is not in the Laplacian index")]
    UnknownBus(BusId),
    #[error("reference set must be non-empty")]
    EmptyReference,
    #[error("singular block {0}")]
    Singular(String),
    #[error("matrix is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Square complex admittance matrix with an index back to bus ids.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopyLaplacian {
    q: CMatrix,
    index: Vec<BusId>,
}

impl LoopyLaplacian {
    /// Wraps a matrix; symmetry is checked.
    pub fn new(q: CMatrix, index: Vec<BusId>) -> Result<Self, KronError> {
        if q.nrows() != q.ncols() || q.nrows() != index.len() {
            return Err(KronError::Ordering(format!("{}x{} matrix for {} ids", q.nrows(), q.ncols(), index.len())));
        }
        check_symmetric(&q)?;
        Ok(LoopyLaplacian { q, index })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.q
    }

    pub fn index(&self) -> &[BusId] {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn position(&self, id: &BusId) -> Option<usize> {
        self.index.iter().position(|x| x == id)
    }

    pub fn get(&self, a: &BusId, b: &BusId) -> Option<Complex64> {
        Some(self.q[(self.position(a)?, self.position(b)?)])
    }

    /// Number of non-zero off-diagonal entries in the row of `id`.
    pub fn degree(&self, id: &BusId) -> Option<usize> {
        let i = self.position(id)?;
        Some((0..self.len()).filter(|&j| j != i && self.q[(i, j)] != ZERO).count())
    }

    fn positions_of(&self, ids: &[BusId]) -> Result<Vec<usize>, KronError> {
        let lookup: BTreeMap<&BusId, usize> = self.index.iter().enumerate().map(|(i, b)| (b, i)).collect();
        ids.iter().map(|b| lookup.get(b).copied().ok_or_else(|| KronError::UnknownBus(b.clone()))).collect()
    }

    /// Restriction to the given ids, in the given order.
    pub fn submatrix(&self, ids: &[BusId]) -> Result<LoopyLaplacian, KronError> {
        let pos = self.positions_of(ids)?;
        let q = CMatrix::from_fn(pos.len(), pos.len(), |i, j| self.q[(pos[i], pos[j])]);
        Ok(LoopyLaplacian { q, index: ids.to_vec() })
    }

    /// Largest elementwise difference after aligning `other` to this index.
    pub fn max_abs_diff(&self, other: &LoopyLaplacian) -> Result<f64, KronError> {
        if self.len() != other.len() {
            return Err(KronError::Misaligned { expected: self.len(), got: other.len() });
        }
        let aligned = other.submatrix(&self.index)?;
        Ok(self.q.iter().zip(aligned.q.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }
}

fn check_symmetric(q: &CMatrix) -> Result<(), KronError> {
    for i in 0..q.nrows() {
        for j in i + 1..q.ncols() {
            let scale = q[(i, j)].norm().max(1.0);
            if (q[(i, j)] - q[(j, i)]).norm() > SYMMETRY_TOL * scale {
                return Err(KronError::Asymmetric(i, j));
            }
        }
    }
    Ok(())
}

/// Assembles `Q` in the supplied bus ordering.
pub fn build_loopy_laplacian(net: &Network, ordering: &[BusId]) -> Result<LoopyLaplacian, KronError> {
    let given: BTreeSet<&BusId> = ordering.iter().collect();
    if given.len() != ordering.len() || given.len() != net.bus_count() || !net.bus_ids().all(|b| given.contains(b)) {
        return Err(KronError::Ordering("ordering is not a permutation of the buses".into()));
    }
    let pos: BTreeMap<&BusId, usize> = ordering.iter().enumerate().map(|(i, b)| (b, i)).collect();
    let n = ordering.len();
    let mut q = CMatrix::zeros(n, n);
    for bus in net.buses() {
        let i = pos[&bus.id];
        q[(i, i)] += bus.shunt_admittance;
    }
    for (k, y) in net.lines() {
        let (i, j) = (pos[&k.a], pos[&k.b]);
        q[(i, j)] -= y;
        q[(j, i)] -= y;
        q[(i, i)] += y;
        q[(j, j)] += y;
    }
    Ok(LoopyLaplacian { q, index: ordering.to_vec() })
}

/// `build_loopy_laplacian` in ascending id order.
pub fn laplacian_of(net: &Network) -> LoopyLaplacian {
    let ordering: Vec<BusId> = net.bus_ids().cloned().collect();
    build_loopy_laplacian(net, &ordering).expect("ordering taken from the network")
}

/// Recovers lines and shunts: `A_ij = -Q_ij`, `A_ii = sum_k Q_ik`.
///
/// Buses get zero voltage and current; use [`adjacency_onto`] to keep the
/// attributes of an existing network.
pub fn adjacency_from_laplacian(q: &LoopyLaplacian) -> Result<Network, KronError> {
    check_symmetric(&q.q)?;
    let n = q.len();
    let mut buses = Vec::with_capacity(n);
    for i in 0..n {
        let shunt: Complex64 = q.q.row(i).iter().sum();
        buses.push(Bus::new(q.index[i].clone(), 0.0).with_shunt(shunt));
    }
    let mut lines = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if q.q[(i, j)] != ZERO {
                lines.push(Line { endpoints: LineKey::new(&q.index[i], &q.index[j]), admittance: -q.q[(i, j)] });
            }
        }
    }
    Ok(Network::from_parts(buses, lines)?)
}

/// Like [`adjacency_from_laplacian`] but copies voltage and current of
/// each bus from `attrs` when present.
pub fn adjacency_onto(q: &LoopyLaplacian, attrs: &Network) -> Result<Network, KronError> {
    let mut net = adjacency_from_laplacian(q)?;
    for id in q.index() {
        if let (Some(src), Some(dst)) = (attrs.bus(id), net.bus_mut(id)) {
            dst.nominal_voltage = src.nominal_voltage;
            dst.injected_current = src.injected_current;
        }
    }
    Ok(net)
}

/// LU-backed solver for a square complex block.
struct BlockSolver {
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl BlockSolver {
    fn new(block: CMatrix, name: &str) -> Result<Self, KronError> {
        if block.nrows() == 0 {
            return Ok(BlockSolver { lu: block.lu() });
        }
        let lu = block.lu();
        let u = lu.u();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..u.nrows() {
            let d = u[(i, i)].norm();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let ratio = lo / hi;
        if hi.is_nan() || hi <= 0.0 || ratio.is_nan() || ratio < RCOND_MIN {
            return Err(KronError::Singular(name.to_owned()));
        }
        Ok(BlockSolver { lu })
    }

    fn solve(&self, rhs: &CMatrix) -> CMatrix {
        if rhs.nrows() == 0 {
            return rhs.clone();
        }
        self.lu.solve(rhs).expect("pivots checked at construction")
    }
}

/// Result of eliminating the interior buses.
#[derive(Clone, Debug)]
pub struct KronResult {
    pub q_red: LoopyLaplacian,
    /// `-Q[a,i] Q[i,i]^-1`, shape `|alpha| x |interior|`.
    pub q_ac: CMatrix,
    pub alpha: Vec<BusId>,
    pub interior: Vec<BusId>,
}

/// Schur complement of `Q` onto the reference buses `alpha`.
///
/// References keep the relative order they have in `q`'s index. When
/// `alpha` covers every bus the result is `q` itself with an empty
/// accompanying matrix.
pub fn kron_reduce(q: &LoopyLaplacian, alpha: &BTreeSet<BusId>) -> Result<KronResult, KronError> {
    if alpha.is_empty() {
        return Err(KronError::EmptyReference);
    }
    if let Some(unknown) = alpha.iter().find(|b| q.position(b).is_none()) {
        return Err(KronError::UnknownBus(unknown.clone()));
    }
    let refs: Vec<BusId> = q.index.iter().filter(|b| alpha.contains(*b)).cloned().collect();
    let interior: Vec<BusId> = q.index.iter().filter(|b| !alpha.contains(*b)).cloned().collect();
    let ra = q.positions_of(&refs)?;
    let ri = q.positions_of(&interior)?;
    let pick = |rows: &[usize], cols: &[usize]| CMatrix::from_fn(rows.len(), cols.len(), |i, j| q.q[(rows[i], cols[j])]);

    let q_aa = pick(&ra, &ra);
    let q_ai = pick(&ra, &ri);
    let q_ia = pick(&ri, &ra);
    let q_ii = pick(&ri, &ri);

    let solver = BlockSolver::new(q_ii.clone(), "Q[interior, interior]")?;
    // Q_ii^-1 Q_ia, one right-hand side per reference column
    let x = solver.solve(&q_ia);
    let residual = (&q_ii * &x - &q_ia).norm();
    if residual > 1e-9 * q_ia.norm().max(1.0) {
        return Err(KronError::Singular(format!("Q[interior, interior] (residual {residual:e})")));
    }
    let mut q_red = q_aa - &q_ai * x;
    symmetrize(&mut q_red)?;
    // Q_ac^T = -Q_ii^-T Q_ai^T = -Q_ii^-1 Q_ia since Q is symmetric
    let q_ac = -solver.solve(&q_ai.transpose()).transpose();
    Ok(KronResult { q_red: LoopyLaplacian { q: q_red, index: refs.clone() }, q_ac, alpha: refs, interior })
}

fn symmetrize(m: &mut CMatrix) -> Result<(), KronError> {
    for i in 0..m.nrows() {
        for j in i + 1..m.ncols() {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            if (a - b).norm() > SYMMETRY_TOL * a.norm().max(1.0) {
                return Err(KronError::Asymmetric(i, j));
            }
            let avg = (a + b) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    Ok(())
}

/// What to eliminate with an explicit formula.
#[derive(Clone, Debug, PartialEq)]
pub enum Elimination {
    /// A bus of degree one or two.
    Node(BusId),
    /// The two degree-two corners of a sparsely connected triangle; `root`
    /// is the corner that stays.
    SparseTriangle { root: BusId, corners: (BusId, BusId) },
}

/// Eliminates with the closed-form degree-one, degree-two or
/// sparse-triangle update instead of a general factorization.
pub fn closed_form_eliminate(q: &LoopyLaplacian, what: &Elimination) -> Result<LoopyLaplacian, KronError> {
    match what {
        Elimination::Node(node) => {
            let n = q.position(node).ok_or_else(|| KronError::UnknownBus(node.clone()))?;
            let nbrs: Vec<usize> = (0..q.len()).filter(|&j| j != n && q.q[(n, j)] != ZERO).collect();
            let qnn = q.q[(n, n)];
            if qnn == ZERO {
                return Err(KronError::Singular(format!("Q[{node}, {node}]")));
            }
            let mut out = q.q.clone();
            match nbrs.as_slice() {
                [r] => {
                    let a = q.q[(*r, n)];
                    out[(*r, *r)] -= a * a / qnn;
                }
                [r, s] => {
                    let (a, b) = (q.q[(*r, n)], q.q[(*s, n)]);
                    out[(*r, *r)] -= a * a / qnn;
                    out[(*s, *s)] -= b * b / qnn;
                    out[(*r, *s)] -= a * b / qnn;
                    out[(*s, *r)] -= a * b / qnn;
                }
                _ => {
                    return Err(KronError::Unsupported(format!("bus {node} has degree {}; closed forms cover degree one and two", nbrs.len())));
                }
            }
            Ok(drop_rows(q, &out, &[n]))
        }
        Elimination::SparseTriangle { root, corners } => {
            let r = q.position(root).ok_or_else(|| KronError::UnknownBus(root.clone()))?;
            let c1 = q.position(&corners.0).ok_or_else(|| KronError::UnknownBus(corners.0.clone()))?;
            let c2 = q.position(&corners.1).ok_or_else(|| KronError::UnknownBus(corners.1.clone()))?;
            for c in [c1, c2] {
                let outside = (0..q.len()).filter(|&j| j != c && j != c1 && j != c2 && j != r && q.q[(c, j)] != ZERO).count();
                if outside > 0 || q.q[(c, r)] == ZERO {
                    return Err(KronError::Unsupported(format!("{{{root}, {}, {}}} is not a sparsely connected triangle", corners.0, corners.1)));
                }
            }
            if q.q[(c1, c2)] == ZERO {
                return Err(KronError::Unsupported("corners are not adjacent".into()));
            }
            let (a, b) = (q.q[(r, c1)], q.q[(r, c2)]);
            let (d1, d2, c) = (q.q[(c1, c1)], q.q[(c2, c2)], q.q[(c1, c2)]);
            let det = d1 * d2 - c * c;
            if det == ZERO {
                return Err(KronError::Singular("triangle corner block".into()));
            }
            let update = (a * (a * d2 - c * b) + b * (b * d1 - a * c)) / det;
            let mut out = q.q.clone();
            out[(r, r)] -= update;
            Ok(drop_rows(q, &out, &[c1, c2]))
        }
    }
}

fn drop_rows(q: &LoopyLaplacian, m: &CMatrix, drop: &[usize]) -> LoopyLaplacian {
    let keep: Vec<usize> = (0..q.len()).filter(|i| !drop.contains(i)).collect();
    let out = CMatrix::from_fn(keep.len(), keep.len(), |i, j| m[(keep[i], keep[j])]);
    LoopyLaplacian { q: out, index: keep.iter().map(|&i| q.index[i].clone()).collect() }
}

/// `C_red = C[alpha] + Q_ac C[interior]`, with `c` aligned to the index the
/// reduction started from (references and interior interleaved as there).
pub fn reduced_currents(kr: &KronResult, full_index: &[BusId], c: &CurrentVector) -> Result<CurrentVector, KronError> {
    if c.len() != full_index.len() || full_index.len() != kr.alpha.len() + kr.interior.len() {
        return Err(KronError::Misaligned { expected: full_index.len(), got: c.len() });
    }
    let pos: BTreeMap<&BusId, usize> = full_index.iter().enumerate().map(|(i, b)| (b, i)).collect();
    let lookup = |ids: &[BusId]| -> Result<CurrentVector, KronError> {
        let v = ids
            .iter()
            .map(|b| pos.get(b).map(|&i| c[i]).ok_or_else(|| KronError::UnknownBus(b.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CurrentVector::from_vec(v))
    };
    let c_alpha = lookup(&kr.alpha)?;
    let c_int = lookup(&kr.interior)?;
    Ok(c_alpha + &kr.q_ac * c_int)
}

/// Solves `Q V = C`.
pub fn solve_voltages(q: &LoopyLaplacian, c: &CurrentVector) -> Result<VoltageVector, KronError> {
    if c.len() != q.len() {
        return Err(KronError::Misaligned { expected: q.len(), got: c.len() });
    }
    let solver = BlockSolver::new(q.q.clone(), "Q")?;
    let rhs = CMatrix::from_column_slice(c.len(), 1, c.as_slice());
    let v = solver.solve(&rhs).column(0).into_owned();
    let residual = (&q.q * &v - c).norm();
    if residual > 1e-9 * c.norm().max(f64::MIN_POSITIVE) && c.norm() > 0.0 {
        return Err(KronError::Singular(format!("Q (residual {residual:e})")));
    }
    Ok(v)
}

/// `S = V ∘ conj(C)`.
pub fn power_injections(v: &VoltageVector, c: &CurrentVector) -> Result<PowerVector, KronError> {
    if v.len() != c.len() {
        return Err(KronError::Misaligned { expected: v.len(), got: c.len() });
    }
    Ok(v.zip_map(c, |vi, ci| vi * ci.conj()))
}

/// Current vector of a network in the given index order.
pub fn currents_of(net: &Network, index: &[BusId]) -> Result<CurrentVector, KronError> {
    let v = index
        .iter()
        .map(|b| net.bus(b).map(|bus| bus.injected_current).ok_or_else(|| KronError::UnknownBus(b.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CurrentVector::from_vec(v))
}

/// Sum of power injections and sum of their magnitudes for the network's
/// own currents.
pub fn net_power(net: &Network) -> Result<(Complex64, f64), KronError> {
    let q = laplacian_of(net);
    let c = currents_of(net, q.index())?;
    let v = solve_voltages(&q, &c)?;
    let s = power_injections(&v, &c)?;
    Ok((s.iter().sum(), s.iter().map(|x| x.norm()).sum()))
}
