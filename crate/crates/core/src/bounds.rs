//! Dual feasible points: every Hermitian `Y` with `I ⊗ Y − C ⪰ 0` gives the
//! upper bound `tr Y` on the fidelity of any recovery against `C`.

use rayon::prelude::*;

use crate::channels::{compose_encoding, pauli_channel, PauliChannelSpec};
use crate::codes::{pauli_error_coefficients, PauliCoefficients, StabilizerCode, SyndromeDecomposition};
use crate::error::{QerError, Result};
use crate::fidelity::{build_data_matrix, DataMatrix, Ensemble};
use crate::opalg::{
    compress_second, hermitian_eigh, identity_kron, lift_dual, min_eig, re, svd_sorted, unflatten_rows,
    CMatrix, EigOptions, Operator,
};
use crate::recovery::{RecoveryElement, StructuredRecovery};

/// Minimum eigenvalue of `I ⊗ Y − C` accepted as feasible.
pub const FEAS_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct DualPoint {
    /// Dual variable on `H_C*`.
    pub y: CMatrix,
    pub bound: f64,
    /// `λ_min(I ⊗ Y − C)`.
    pub margin: f64,
    pub feasible: bool,
    pub provenance: String,
    /// Rank-one updates applied, for iterative constructions.
    pub updates: usize,
}

impl DualPoint {
    fn evaluate(y: CMatrix, c: &DataMatrix, provenance: &str, updates: usize) -> Result<Self> {
        let margin = check_feasible(&y, c)?;
        Ok(DualPoint {
            bound: y.trace().re,
            y,
            margin,
            feasible: margin >= -FEAS_TOL,
            provenance: provenance.to_string(),
            updates,
        })
    }
}

/// `λ_min(I ⊗ Y − C)`.
pub fn check_feasible(y: &CMatrix, c: &DataMatrix) -> Result<f64> {
    if y.shape() != (c.d_c, c.d_c) {
        return Err(QerError::Dimension(format!(
            "dual variable {:?} for code dimension {}",
            y.shape(),
            c.d_c
        )));
    }
    let z = identity_kron(c.d_s, y) - &c.c;
    Ok(min_eig(&Operator::new(z), EigOptions::default())?.value)
}

/// Concatenated partition bases, checked to form a unitary.
fn partition_unitary(d_c: usize, parts: &[CMatrix]) -> Result<(CMatrix, Vec<(usize, usize)>)> {
    let total: usize = parts.iter().map(|p| p.ncols()).sum();
    if total != d_c || parts.iter().any(|p| p.nrows() != d_c) {
        return Err(QerError::Partition(format!("blocks cover {total} of {d_c} dimensions")));
    }
    let mut v = CMatrix::zeros(d_c, d_c);
    let mut ranges = Vec::with_capacity(parts.len());
    let mut at = 0;
    for p in parts {
        v.columns_mut(at, p.ncols()).copy_from(p);
        ranges.push((at, p.ncols()));
        at += p.ncols();
    }
    let dev = (v.adjoint() * &v - CMatrix::identity(d_c, d_c)).norm();
    if dev > 1e-8 {
        return Err(QerError::Partition(format!("blocks are not orthonormal (deviation {dev:.2e})")));
    }
    Ok((v, ranges))
}

/// Row indices of `C̃` belonging to block `(start, len)` in the subspace-ordered basis.
fn block_rows(d_s: usize, d_c: usize, (start, len): (usize, usize)) -> Vec<usize> {
    (0..d_s).flat_map(|s| (start..start + len).map(move |c| s * d_c + c)).collect()
}

fn weighted_partition_dual(parts: &[CMatrix], weights: &[f64]) -> CMatrix {
    let d_c = parts[0].nrows();
    let mut y = CMatrix::zeros(d_c, d_c);
    for (p, &w) in parts.iter().zip(weights) {
        y += lift_dual(&(CMatrix::identity(p.ncols(), p.ncols()) * re(w)), p);
    }
    y
}

/// `Y = Σ_q w_q conj(P_q)` with `w_q` the largest absolute row sum over the
/// rows of block `q`; diagonally dominant, hence always feasible.
pub fn gersgorin_dual(c: &DataMatrix, parts: &[CMatrix]) -> Result<DualPoint> {
    let (v, ranges) = partition_unitary(c.d_c, parts)?;
    let ct = compress_second(&c.c, c.d_s, &v);
    let weights: Vec<f64> = ranges
        .iter()
        .map(|&r| {
            block_rows(c.d_s, c.d_c, r)
                .into_iter()
                .map(|i| ct.row(i).iter().map(|z| z.norm()).sum::<f64>())
                .fold(0.0, f64::max)
        })
        .collect();
    DualPoint::evaluate(weighted_partition_dual(parts, &weights), c, "gersgorin", 0)
}

/// `w_q = σ_max((I ⊗ conj P_q) C)`; not guaranteed feasible.
pub fn svd_dual(c: &DataMatrix, parts: &[CMatrix]) -> Result<DualPoint> {
    let (v, ranges) = partition_unitary(c.d_c, parts)?;
    let ct = compress_second(&c.c, c.d_s, &v);
    let weights: Vec<f64> = ranges
        .iter()
        .map(|&r| {
            let rows = block_rows(c.d_s, c.d_c, r);
            let b = ct.select_rows(rows.iter());
            let (vals, _) = hermitian_eigh(&(&b * b.adjoint()));
            vals[0].max(0.0).sqrt()
        })
        .collect();
    DualPoint::evaluate(weighted_partition_dual(parts, &weights), c, "svd", 0)
}

/// `Y₀ = Σ_q λ_max(C_qq) conj(P_q)`.
pub fn init_block_lambda_max(c: &DataMatrix, parts: &[CMatrix]) -> Result<CMatrix> {
    partition_unitary(c.d_c, parts)?;
    let weights: Vec<f64> = parts
        .iter()
        .map(|p| {
            let (vals, _) = hermitian_eigh(&compress_second(&c.c, c.d_s, p));
            vals[0].max(0.0)
        })
        .collect();
    Ok(weighted_partition_dual(parts, &weights))
}

/// Block-diagonal assembly of per-block duals given in basis coordinates.
pub fn init_block_sdp_duals(blocks: &[(CMatrix, CMatrix)], d_c: usize) -> Result<CMatrix> {
    let parts: Vec<CMatrix> = blocks.iter().map(|(b, _)| b.clone()).collect();
    partition_unitary(d_c, &parts)?;
    let mut y = CMatrix::zeros(d_c, d_c);
    for (basis, yq) in blocks {
        if yq.shape() != (basis.ncols(), basis.ncols()) {
            return Err(QerError::Partition("block dual does not match its subspace".into()));
        }
        y += lift_dual(yq, basis);
    }
    Ok(y)
}

#[derive(Clone, Copy, Debug)]
pub struct IterativeOptions {
    pub tol: f64,
    /// Cap on rank-one updates; `None` means `4·d_S·d`.
    pub max_updates: Option<usize>,
}

impl Default for IterativeOptions {
    fn default() -> Self {
        IterativeOptions { tol: FEAS_TOL, max_updates: None }
    }
}

/// Trace of each iterative run, for monotonicity checks.
#[derive(Clone, Debug, Default)]
pub struct IterationLog {
    pub bounds: Vec<f64>,
    pub min_eigs: Vec<f64>,
    pub schmidt: Vec<f64>,
}

/// Repairs `y` on the problem `(c, d_s, d)` by rank-one updates until
/// `λ_min(I ⊗ Y − C) ≥ −tol`. Returns the final `Y`, update count and margin.
fn iterate_dual(
    c: &CMatrix,
    d_s: usize,
    mut y: CMatrix,
    opts: IterativeOptions,
    mut log: Option<&mut IterationLog>,
) -> Result<(CMatrix, usize, f64)> {
    let d = y.nrows();
    let cap = opts.max_updates.unwrap_or(4 * d_s * d);
    let mut updates = 0;
    loop {
        let z = identity_kron(d_s, &y) - c;
        let pair = min_eig(&Operator::new(z), EigOptions::default())?;
        if let Some(l) = log.as_deref_mut() {
            l.bounds.push(y.trace().re);
            l.min_eigs.push(pair.value);
        }
        if pair.value >= -opts.tol || updates >= cap {
            return Ok((y, updates, pair.value));
        }
        let s = svd_sorted(&unflatten_rows(&pair.vector, d_s, d));
        let lead = s.sigma[0] * s.sigma[0];
        if lead < 1.0 / d_s as f64 - 1e-12 {
            return Err(QerError::Numerical(format!("Schmidt coefficient {lead} below 1/d_S")));
        }
        if let Some(l) = log.as_deref_mut() {
            l.schmidt.push(lead);
        }
        // |v⟩⟩ = Σ σ_i u_i ⊗ conj(v_i); the update acts on conj(v_1)
        let w = s.v.column(0).map(|z| z.conj());
        y += &w * w.adjoint() * re(pair.value.abs() / lead);
        y = (&y + y.adjoint()) * re(0.5);
        updates += 1;
    }
}

pub fn iterative_dual(c: &DataMatrix, y0: &CMatrix, opts: IterativeOptions) -> Result<DualPoint> {
    iterative_dual_logged(c, y0, opts, None)
}

pub fn iterative_dual_logged(
    c: &DataMatrix,
    y0: &CMatrix,
    opts: IterativeOptions,
    log: Option<&mut IterationLog>,
) -> Result<DualPoint> {
    if y0.shape() != (c.d_c, c.d_c) {
        return Err(QerError::Dimension("initial dual has the wrong size".into()));
    }
    let y0 = crate::opalg::symmetrize_checked(y0)?;
    let (y, updates, _) = iterate_dual(&c.c, c.d_s, y0, opts, log)?;
    DualPoint::evaluate(y, c, "iterative", updates)
}

/// Merges per-block duals pairwise, smallest blocks first, repairing each
/// union with the iterative method, then finishes with a global pass.
pub fn iterated_block_dual(c: &DataMatrix, blocks: &[(CMatrix, CMatrix)], opts: IterativeOptions) -> Result<DualPoint> {
    let parts: Vec<CMatrix> = blocks.iter().map(|(b, _)| b.clone()).collect();
    partition_unitary(c.d_c, &parts)?;
    let mut level: Vec<(CMatrix, CMatrix)> = blocks.to_vec();
    let mut updates = 0;
    while level.len() > 1 {
        level.sort_by_key(|(b, _)| b.ncols());
        let mut pairs = Vec::new();
        let mut it = level.into_iter();
        let mut carry = None;
        loop {
            match (it.next(), it.next()) {
                (Some(a), Some(b)) => pairs.push((a, b)),
                (Some(a), None) => {
                    carry = Some(a);
                    break;
                }
                _ => break,
            }
        }
        let merged: Vec<Result<((CMatrix, CMatrix), usize)>> = pairs
            .into_par_iter()
            .map(|((ba, ya), (bb, yb))| {
                let (da, db) = (ba.ncols(), bb.ncols());
                let mut basis = CMatrix::zeros(c.d_c, da + db);
                basis.columns_mut(0, da).copy_from(&ba);
                basis.columns_mut(da, db).copy_from(&bb);
                let mut y0 = CMatrix::zeros(da + db, da + db);
                y0.view_mut((0, 0), (da, da)).copy_from(&ya);
                y0.view_mut((da, da), (db, db)).copy_from(&yb);
                let cc = compress_second(&c.c, c.d_s, &basis);
                let (y, n, _) = iterate_dual(&cc, c.d_s, y0, opts, None)?;
                Ok(((basis, y), n))
            })
            .collect();
        level = Vec::new();
        for m in merged {
            let (blk, n) = m?;
            updates += n;
            level.push(blk);
        }
        level.extend(carry);
    }
    let (basis, y) = level.pop().ok_or_else(|| QerError::Partition("no blocks".into()))?;
    let y_full = lift_dual(&y, &basis);
    let (y, n, _) = iterate_dual(&c.c, c.d_s, y_full, opts, None)?;
    DualPoint::evaluate(y, c, "iterated_block", updates + n)
}

#[derive(Clone, Debug)]
pub struct PauliCertificate {
    pub recovery: StructuredRecovery,
    pub dual: DualPoint,
    pub coefficients: PauliCoefficients,
    /// `Σ_q max_p |a_pq|²`.
    pub value: f64,
}

/// Maximum-likelihood normalizer correction per syndrome, with the matching
/// dual point `Y = Σ_q |ã_q|² conj(P_q) / d_S`. Assumes the completely mixed
/// source ensemble.
pub fn pauli_certificate(
    code: &StabilizerCode,
    decomp: &SyndromeDecomposition,
    spec: &PauliChannelSpec,
) -> Result<(PauliCertificate, DataMatrix)> {
    let coefficients = pauli_error_coefficients(code, decomp, spec)?;
    let ch = compose_encoding(&pauli_channel(spec)?, &code.u_c)?;
    let c = build_data_matrix(&Ensemble::maximally_mixed(code.d_s()), &ch)?;
    let best = coefficients.most_likely();
    let d_s = code.d_s() as f64;
    let mut elements = Vec::with_capacity(best.len());
    let mut y = CMatrix::zeros(code.d_c(), code.d_c());
    for (q, &(p, w)) in best.iter().enumerate() {
        let r = decomp.normalizers[p].apply_columns(&decomp.encoders[q]).adjoint();
        elements.push(RecoveryElement { r: Operator::new(r), contribution: 0.0, rank: code.d_s() });
        y += decomp.projector(q).map(|z| z.conj()) * re(w / d_s);
    }
    let recovery = StructuredRecovery { elements, d_s: code.d_s(), d_c: code.d_c() }.with_contributions(&c);
    let dual = DualPoint::evaluate(y, &c, "pauli_cert", 0)?;
    let value = coefficients.optimal_fidelity();
    Ok((PauliCertificate { recovery, dual, coefficients, value }, c))
}
