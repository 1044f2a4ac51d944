use serde::Serialize;

use super::layout::{encode_distribution, RegisterLayout, StateVector};
use crate::error::{CoreError, Result};
use crate::linalg::{complete_orthonormal, max_abs_c, normal_eigen, orthonormal_span, unitarity_defect, CMatrix, RMatrix, C64, ONE, ZERO};
use crate::markov::{acceptance_table, ChainModel, ProposalKernel, TargetModel};

pub type UnitaryMatrix = CMatrix;

/// Real operator stored by columns as `(row, value)` lists.
#[derive(Debug, Clone)]
pub struct SparseOp {
    cols: Vec<Vec<(usize, f64)>>,
}

impl SparseOp {
    fn new(dim: usize) -> Self {
        Self { cols: vec![Vec::new(); dim] }
    }

    fn push(&mut self, row: usize, col: usize, v: f64) {
        if v != 0.0 {
            self.cols[col].push((row, v));
        }
    }

    pub fn dim(&self) -> usize {
        self.cols.len()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::new(self.dim());
        for (c, col) in self.cols.iter().enumerate() {
            for &(r, v) in col {
                t.cols[r].push((c, v));
            }
        }
        t
    }

    /// `self * m`.
    pub fn apply(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            for k in 0..m.nrows() {
                let a = m[(k, j)];
                if a == ZERO {
                    continue;
                }
                for &(r, v) in &self.cols[k] {
                    out[(r, j)] += a * v;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> CMatrix {
        self.apply(&CMatrix::identity(self.dim(), self.dim()))
    }
}

/// Where `B` takes its acceptance values from.
#[derive(Debug, Clone, Copy)]
pub enum AcceptanceSource<'a> {
    Exact(&'a TargetModel),
    /// An explicit `|Omega| x |Omega|` table such as the perturbed `A~`.
    Table(&'a RMatrix),
}

/// `V |x>|0> = |x> sum_m sqrt(q_m) |m>`, completed on `R_M` by Gram-Schmidt.
pub fn build_v(layout: &RegisterLayout) -> Result<SparseOp> {
    let w = layout.weights();
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(CoreError::NonNormalizable { row: 0, sum: total });
    }
    let amp: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let vm = complete_orthonormal(&amp);
    let k = layout.n_moves();
    let mut op = SparseOp::new(layout.dim());
    for s in 0..layout.n_states() {
        for m in 0..k {
            for mp in 0..k {
                for c in 0..2 {
                    op.push(layout.index(s, mp, c), layout.index(s, m, c), vm[(mp, m)]);
                }
            }
        }
    }
    Ok(op)
}

/// Acceptance table for every `(x, x + dx)` pair; moves that return to `x` accept with probability one.
fn move_acceptance(layout: &RegisterLayout, kernel: &ProposalKernel, source: AcceptanceSource) -> Result<Vec<f64>> {
    let table = match source {
        AcceptanceSource::Exact(model) => acceptance_table(model, kernel),
        AcceptanceSource::Table(a) => a.clone(),
    };
    let n = layout.n_states();
    if table.nrows() != n || table.ncols() != n {
        return Err(CoreError::Invalid("acceptance table does not match the layout".into()));
    }
    let mut out = Vec::with_capacity(n * layout.n_moves());
    for s in 0..n {
        for m in 0..layout.n_moves() {
            let y = layout.target(s, m);
            let a = if y == s { 1.0 } else { table[(s, y)] };
            if !(0.0..=1.0).contains(&a) {
                return Err(CoreError::AcceptanceOutOfRange { value: a });
            }
            out.push(a);
        }
    }
    Ok(out)
}

/// Controlled rotation `[[sqrt(1-A), -sqrt(A)], [sqrt(A), sqrt(1-A)]]` on `R_C`.
pub fn build_b(layout: &RegisterLayout, kernel: &ProposalKernel, source: AcceptanceSource) -> Result<SparseOp> {
    let acc = move_acceptance(layout, kernel, source)?;
    let mut op = SparseOp::new(layout.dim());
    for s in 0..layout.n_states() {
        for m in 0..layout.n_moves() {
            let a = acc[s * layout.n_moves() + m];
            let (c, sn) = ((1.0 - a).sqrt(), a.sqrt());
            let (i0, i1) = (layout.index(s, m, 0), layout.index(s, m, 1));
            op.push(i0, i0, c);
            op.push(i1, i0, sn);
            op.push(i0, i1, -sn);
            op.push(i1, i1, c);
        }
    }
    Ok(op)
}

/// `|x>|m>|1> -> |x + m>|m>|1>`.
pub fn build_f(layout: &RegisterLayout) -> SparseOp {
    let mut op = SparseOp::new(layout.dim());
    for s in 0..layout.n_states() {
        for m in 0..layout.n_moves() {
            op.push(layout.index(s, m, 0), layout.index(s, m, 0), 1.0);
            op.push(layout.index(layout.target(s, m), m, 1), layout.index(s, m, 1), 1.0);
        }
    }
    op
}

/// `|m>|1> -> |-m>|1>`.
pub fn build_s(layout: &RegisterLayout) -> SparseOp {
    let mut op = SparseOp::new(layout.dim());
    for s in 0..layout.n_states() {
        for m in 0..layout.n_moves() {
            op.push(layout.index(s, m, 0), layout.index(s, m, 0), 1.0);
            op.push(layout.index(s, layout.negation(m), 1), layout.index(s, m, 1), 1.0);
        }
    }
    op
}

/// `2 Lambda_0 - I` with `Lambda_0 = I (x) |0><0| (x) |0><0|`.
pub fn build_r(layout: &RegisterLayout) -> SparseOp {
    let mut op = SparseOp::new(layout.dim());
    for i in 0..layout.dim() {
        let (_, m, c) = layout.decompose(i);
        op.push(i, i, if m == 0 && c == 0 { 1.0 } else { -1.0 });
    }
    op
}

/// `U = R V^T B^T S F B V` together with the factor `V^T B^T S F B V`.
#[derive(Debug, Clone)]
pub struct WalkOperator {
    pub layout: RegisterLayout,
    pub u: UnitaryMatrix,
    /// `V^dagger B^dagger S F B V`, whose `A`-block is `D_P W D_P^{-1}`.
    pub core: CMatrix,
    pub sf_defect: f64,
}

pub fn build_walk_operator(layout: &RegisterLayout, kernel: &ProposalKernel, source: AcceptanceSource) -> Result<WalkOperator> {
    let v = build_v(layout)?;
    let b = build_b(layout, kernel, source)?;
    let f = build_f(layout);
    let s = build_s(layout);
    let r = build_r(layout);
    let dim = layout.dim();
    let bv = b.apply(&v.to_dense());
    let sf = s.apply(&f.to_dense());
    let core = v.transpose().apply(&b.transpose().apply(&(&sf * &bv)));
    let u = r.apply(&core);
    let sf_defect = max_abs_c(&(&sf * &sf - CMatrix::identity(dim, dim)));
    let defect = unitarity_defect(&u);
    if defect > 1e-10 {
        return Err(CoreError::Numerical(format!("walk operator unitarity defect {defect:e}")));
    }
    Ok(WalkOperator { layout: layout.clone(), u, core, sf_defect })
}

impl WalkOperator {
    /// `<y,0,0| V^dagger B^dagger S F B V |x,0,0>` as an `|Omega| x |Omega|` matrix.
    pub fn projected_block(&self) -> RMatrix {
        let n = self.layout.n_states();
        RMatrix::from_fn(n, n, |y, x| self.core[(self.layout.reference(y), self.layout.reference(x))].re)
    }

    pub fn apply(&self, v: &StateVector) -> StateVector {
        StateVector::from_amplitudes(&self.u * &v.amps)
    }
}

/// Results of the structural lemmas on one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub unitarity_defect: f64,
    /// `max |(SF)^2 - I|`.
    pub sf_defect: f64,
    /// `max |Pi_0 V^T B^T S F B V Pi_0 - D_P W D_P^{-1}|`.
    pub block_defect: f64,
    /// Largest mismatch between the block's eigenvalues and those of `W`.
    pub eigenvalue_defect: f64,
    /// `|U|P> - |P>|`.
    pub fixed_point_defect: f64,
}

impl LemmaReport {
    pub fn pass(&self) -> bool {
        self.unitarity_defect <= 1e-10
            && self.sf_defect <= 1e-12
            && self.block_defect <= 1e-10
            && self.eigenvalue_defect <= 1e-8
            && self.fixed_point_defect <= 1e-10
    }
}

pub fn lemma_checks(walk: &WalkOperator, chain: &ChainModel) -> Result<LemmaReport> {
    let block = walk.projected_block();
    let block_defect = (&block - chain.symmetrized()).amax();
    let (mut be, _) = crate::linalg::symmetric_eigen(&block);
    let mut we = chain.eigenvalues.clone();
    be.sort_by(f64::total_cmp);
    we.sort_by(f64::total_cmp);
    let eigenvalue_defect = be.iter().zip(&we).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let p = encode_distribution(&chain.pi, &walk.layout)?;
    let fixed_point_defect = (walk.apply(&p).amps - &p.amps).norm();
    Ok(LemmaReport {
        unitarity_defect: unitarity_defect(&walk.u),
        sf_defect: walk.sf_defect,
        block_defect,
        eigenvalue_defect,
        fixed_point_defect,
    })
}

/// Spectrum of `U` on `A + B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseGapReport {
    pub subspace_dim: usize,
    /// Eigenphases in `(-pi, pi]`, ascending.
    pub phases: Vec<f64>,
    pub unit_multiplicity: usize,
    /// `|<P,0,0|v>|^2` for the eigenvector with phase closest to zero.
    pub unit_overlap: f64,
    pub min_nonzero_phase: f64,
    /// `arccos(1 - Delta)`.
    pub bound: f64,
    pub invariance_residual: f64,
    pub pass: bool,
}

/// Orthonormal basis of `A + B`, `B = V^T B^T S F B V A`.
pub fn walk_subspace(walk: &WalkOperator) -> Result<CMatrix> {
    let n = walk.layout.n_states();
    let dim = walk.layout.dim();
    let mut cols = CMatrix::zeros(dim, 2 * n);
    for x in 0..n {
        cols[(walk.layout.reference(x), x)] = ONE;
        cols.set_column(n + x, &walk.core.column(walk.layout.reference(x)));
    }
    let basis = orthonormal_span(&cols, 1e-9);
    if basis.ncols() < n {
        return Err(CoreError::RankDeficient { expected: n, found: basis.ncols() });
    }
    Ok(basis)
}

pub fn verify_phase_gap(walk: &WalkOperator, chain: &ChainModel) -> Result<PhaseGapReport> {
    let y = walk_subspace(walk)?;
    let uy = &walk.u * &y;
    let h = y.adjoint() * &uy;
    let invariance_residual = (&uy - &y * &h).norm();
    let eig = normal_eigen(&h)?;
    let phases_raw: Vec<f64> = eig.values.iter().map(|z| z.arg()).collect();
    let unit = (0..phases_raw.len())
        .min_by(|&a, &b| phases_raw[a].abs().total_cmp(&phases_raw[b].abs()))
        .ok_or_else(|| CoreError::Numerical("empty walk subspace".into()))?;
    let p = encode_distribution(&chain.pi, &walk.layout)?;
    let v = &y * eig.vectors.column(unit);
    let unit_overlap = p.amps.dotc(&v).norm_sqr() / v.norm_squared();
    let unit_multiplicity = phases_raw.iter().filter(|t| t.abs() < 1e-7).count();
    let min_nonzero_phase = phases_raw
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != unit)
        .map(|(_, t)| t.abs())
        .fold(f64::INFINITY, f64::min);
    let bound = (1.0 - chain.gap).clamp(-1.0, 1.0).acos();
    let mut phases = phases_raw.clone();
    phases.sort_by(f64::total_cmp);
    let pass = unit_multiplicity == 1
        && unit_overlap >= 1.0 - 1e-9
        && min_nonzero_phase >= bound - 1e-8
        && invariance_residual <= 1e-9;
    Ok(PhaseGapReport {
        subspace_dim: y.ncols(),
        phases,
        unit_multiplicity,
        unit_overlap,
        min_nonzero_phase,
        bound,
        invariance_residual,
        pass,
    })
}

/// Amplitudes of a real vector as a state.
pub fn real_state(v: &[f64]) -> StateVector {
    StateVector::from_amplitudes(nalgebra::DVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0))))
}
