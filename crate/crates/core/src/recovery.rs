//! Structured recoveries: EigQER, BlockEigQER, OrderQER and syndrome-based QEC.

use crate::channels::{apply_single, KrausChannel};
use crate::codes::{paulis_by_weight, StabilizerCode};
use crate::error::{QerError, Result};
use crate::fidelity::DataMatrix;
use crate::opalg::{
    closest_isometry, compress_second, dominant_eig, flatten_rows, hermitian_eigh, project_out_second,
    re, svd_sorted, top_eigs, unflatten_rows, CMatrix, CVector, EigOptions, Operator, Subspace,
};
use crate::sdp::{solve_block_sdp, SdpOptions};

/// Structural tolerance for recovery invariants.
pub const RECOVERY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct RecoveryElement {
    /// `R_k: H_C → H_S`, a partial isometry with `R_k R_k† = I_{d_k}` on its range.
    pub r: Operator,
    pub contribution: f64,
    pub rank: usize,
}

impl RecoveryElement {
    /// `P_k = R_k† R_k`.
    pub fn projector(&self) -> CMatrix {
        self.r.matrix().adjoint() * self.r.matrix()
    }

    /// Orthonormal basis of the support of `R_k` in `H_C`.
    pub fn support(&self) -> CMatrix {
        let s = svd_sorted(self.r.matrix());
        s.v.columns(0, self.rank).into_owned()
    }
}

#[derive(Clone, Debug)]
pub struct StructuredRecovery {
    pub elements: Vec<RecoveryElement>,
    pub d_s: usize,
    pub d_c: usize,
}

impl StructuredRecovery {
    pub fn covered_dim(&self) -> usize {
        self.elements.iter().map(|e| e.rank).sum()
    }

    /// Dimension of `range(I − Σ P_k)`.
    pub fn deficit_dim(&self) -> usize {
        self.d_c - self.covered_dim()
    }

    /// `I − Σ_k P_k`.
    pub fn completeness_deficit(&self) -> CMatrix {
        let mut m = CMatrix::identity(self.d_c, self.d_c);
        for e in &self.elements {
            m -= e.projector();
        }
        m
    }

    pub fn fidelity(&self, c: &DataMatrix) -> f64 {
        self.elements.iter().map(|e| c.element_fidelity(e.r.matrix())).sum()
    }

    /// Running totals of the contributions.
    pub fn cumulative(&self) -> Vec<f64> {
        self.elements
            .iter()
            .scan(0.0, |acc, e| {
                *acc += e.contribution;
                Some(*acc)
            })
            .collect()
    }

    /// Recomputes each contribution `⟨⟨R_k|C|R_k⟩⟩`.
    pub fn with_contributions(mut self, c: &DataMatrix) -> Self {
        for e in self.elements.iter_mut() {
            e.contribution = c.element_fidelity(e.r.matrix());
        }
        self
    }

    /// Choi matrix `Σ |R_k⟩⟩⟨⟨R_k|`.
    pub fn choi(&self) -> CMatrix {
        let n = self.d_s * self.d_c;
        let mut x = CMatrix::zeros(n, n);
        for e in &self.elements {
            let v = flatten_rows(e.r.matrix());
            x += &v * v.adjoint();
        }
        x
    }

    /// Support bases of the elements, followed by the uncovered complement
    /// when the recovery is incomplete.
    pub fn partition(&self) -> Vec<CMatrix> {
        let mut parts: Vec<CMatrix> = self.elements.iter().map(|e| e.support()).collect();
        if self.deficit_dim() > 0 {
            let used = Subspace::from_columns(self.d_c, &concat(self.d_c, &parts), 1e-10);
            let comp = used.complement();
            if comp.dim() > 0 {
                parts.push(comp.basis().clone());
            }
        }
        parts
    }

    /// Checks `R_k R_k† = I_{d_k}` pattern, `R_k† R_k = P_k` with mutually
    /// orthogonal `P_k`, Hilbert–Schmidt orthogonality of the elements and
    /// `Σ P_k ⪯ I`.
    pub fn check_invariants(&self) -> Result<()> {
        let projs: Vec<CMatrix> = self.elements.iter().map(|e| e.projector()).collect();
        for (k, e) in self.elements.iter().enumerate() {
            let rr = e.r.matrix() * e.r.matrix().adjoint();
            let (vals, _) = hermitian_eigh(&rr);
            let ones = vals.iter().filter(|v| (*v - 1.0).abs() < 1e-8).count();
            let zeros = vals.iter().filter(|v| v.abs() < 1e-8).count();
            if ones != e.rank || ones + zeros != self.d_s {
                return Err(QerError::NotIsometry { deviation: (ones as f64 - e.rank as f64).abs() });
            }
            let pk = &projs[k];
            let idem = (pk * pk - pk).norm();
            if idem > 1e-9 {
                return Err(QerError::NotIsometry { deviation: idem });
            }
            for (j, pj) in projs.iter().enumerate().take(k) {
                let overlap = (pj * pk).norm();
                let hs = self.elements[j]
                    .r
                    .iter()
                    .zip(e.r.iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum::<crate::opalg::C64>()
                    .norm();
                if overlap > 1e-8 || hs > 1e-8 {
                    return Err(QerError::Numerical(format!(
                        "recovery elements {j} and {k} overlap ({overlap:.2e}, {hs:.2e})"
                    )));
                }
            }
        }
        let (vals, _) = hermitian_eigh(&self.completeness_deficit());
        if vals.last().copied().unwrap_or(0.0) < -1e-8 {
            return Err(QerError::Numerical("projectors exceed the identity".into()));
        }
        Ok(())
    }
}

fn concat(rows: usize, parts: &[CMatrix]) -> CMatrix {
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut m = CMatrix::zeros(rows, cols);
    let mut at = 0;
    for p in parts {
        m.columns_mut(at, p.ncols()).copy_from(p);
        at += p.ncols();
    }
    m
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    /// Solved by the reduced SDP.
    Sdp,
    /// A single EigQER element.
    Element,
    /// Residual space with no data weight; completed canonically.
    Completion,
}

#[derive(Clone, Debug)]
pub struct RecoveryBlock {
    /// Orthonormal basis of `S_q` in `H_C`.
    pub basis: CMatrix,
    /// Choi matrix on `H_S ⊗ S_q*` in basis coordinates.
    pub x: CMatrix,
    /// Optimal dual on `S_q*` when the block came from an SDP.
    pub y: Option<CMatrix>,
    pub value: f64,
    pub kind: BlockKind,
}

impl RecoveryBlock {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

#[derive(Clone, Debug)]
pub struct BlockRecovery {
    pub blocks: Vec<RecoveryBlock>,
    pub d_s: usize,
    pub d_c: usize,
}

impl BlockRecovery {
    pub fn fidelity(&self, c: &DataMatrix) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let cq = compress_second(&c.c, c.d_s, &b.basis);
                b.x.iter().zip(cq.transpose().iter()).map(|(a, z)| (a * z).re).sum::<f64>()
            })
            .sum()
    }

    pub fn choi(&self) -> CMatrix {
        let n = self.d_s * self.d_c;
        let mut x = CMatrix::zeros(n, n);
        for b in &self.blocks {
            x += crate::opalg::lift_second(&b.x, self.d_s, &b.basis);
        }
        x
    }

    pub fn partition(&self) -> Vec<CMatrix> {
        self.blocks.iter().map(|b| b.basis.clone()).collect()
    }

    pub fn covered_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).sum()
    }

    /// Per-block dual variables in basis coordinates. Blocks without an SDP
    /// dual get `λ_max(C_qq)·I`.
    pub fn block_duals(&self, c: &DataMatrix) -> Vec<(CMatrix, CMatrix)> {
        self.blocks
            .iter()
            .map(|b| {
                let y = b.y.clone().unwrap_or_else(|| {
                    let (vals, _) = hermitian_eigh(&compress_second(&c.c, c.d_s, &b.basis));
                    CMatrix::identity(b.dim(), b.dim()) * re(vals[0].max(0.0))
                });
                (b.basis.clone(), y)
            })
            .collect()
    }

    /// Orthonormal, mutually orthogonal block bases; each block Choi PSD with
    /// `tr_{H_S} X_q = I`.
    pub fn check_invariants(&self) -> Result<()> {
        let all = concat(self.d_c, &self.partition());
        let gram = all.adjoint() * &all;
        let dev = (&gram - CMatrix::identity(gram.nrows(), gram.ncols())).norm();
        if dev > RECOVERY_TOL * 100.0 {
            return Err(QerError::Partition(format!("block bases not orthonormal ({dev:.2e})")));
        }
        for (q, b) in self.blocks.iter().enumerate() {
            let d = b.dim();
            let (vals, _) = hermitian_eigh(&b.x);
            if vals.last().copied().unwrap_or(0.0) < -1e-8 {
                return Err(QerError::Numerical(format!("block {q} Choi matrix not PSD")));
            }
            let pt = crate::opalg::ptrace_left(&Operator::new(b.x.clone()), self.d_s, d)?;
            let dev = pt.max_abs_diff(&Operator::identity(d));
            if dev > 1e-6 {
                return Err(QerError::NotTracePreserving { deviation: dev });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ChoiRecovery {
    pub x: CMatrix,
    pub d_s: usize,
    pub d_c: usize,
}

#[derive(Clone, Debug)]
pub enum Recovery {
    Structured(StructuredRecovery),
    Block(BlockRecovery),
    Choi(ChoiRecovery),
}

impl Recovery {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Recovery::Structured(s) => (s.d_s, s.d_c),
            Recovery::Block(b) => (b.d_s, b.d_c),
            Recovery::Choi(c) => (c.d_s, c.d_c),
        }
    }

    pub fn choi(&self) -> CMatrix {
        match self {
            Recovery::Structured(s) => s.choi(),
            Recovery::Block(b) => b.choi(),
            Recovery::Choi(c) => c.x.clone(),
        }
    }

    pub fn partition(&self) -> Vec<CMatrix> {
        match self {
            Recovery::Structured(s) => s.partition(),
            Recovery::Block(b) => b.partition(),
            Recovery::Choi(c) => vec![CMatrix::identity(c.d_c, c.d_c)],
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EigQerOptions {
    /// Singular values with `σ² ≥` this count toward the rank of `R_k`.
    pub rank_sv_threshold: f64,
    /// Stop after an element contributing less than this.
    pub early_stop_contribution: f64,
    pub max_elements: Option<usize>,
    pub eig: EigOptions,
}

impl Default for EigQerOptions {
    fn default() -> Self {
        EigQerOptions {
            rank_sv_threshold: 0.05,
            early_stop_contribution: 1e-5,
            max_elements: None,
            eig: EigOptions::default(),
        }
    }
}

impl EigQerOptions {
    /// Runs until the projectors span the code space.
    pub fn complete() -> Self {
        EigQerOptions { early_stop_contribution: 0.0, ..Self::default() }
    }
}

/// Relative size below which a dominant eigenvalue counts as zero.
const NULL_EIG: f64 = 1e-12;

pub fn eig_qer(c: &DataMatrix, opts: EigQerOptions) -> Result<StructuredRecovery> {
    let (elements, _) = eig_qer_on(c, c.c.clone(), &Subspace::empty(c.d_c), opts)?;
    Ok(StructuredRecovery { elements, d_s: c.d_s, d_c: c.d_c })
}

/// Greedy loop on `ck`, the data matrix with `excluded` already projected out.
/// Returns the elements and the subspace covered including `excluded`.
fn eig_qer_on(
    c: &DataMatrix,
    mut ck: CMatrix,
    excluded: &Subspace,
    opts: EigQerOptions,
) -> Result<(Vec<RecoveryElement>, Subspace)> {
    let (d_s, d_c) = (c.d_s, c.d_c);
    let floor = NULL_EIG * c.trace().max(f64::MIN_POSITIVE);
    let mut used = excluded.clone();
    let mut elements = Vec::new();
    while used.dim() < d_c {
        if opts.max_elements.is_some_and(|m| elements.len() >= m) {
            break;
        }
        let pair = dominant_eig(&Operator::new(ck.clone()), opts.eig)?;
        if pair.value <= floor {
            break;
        }
        let mut x = unflatten_rows(&pair.vector, d_s, d_c);
        // keep the support inside the uncovered space
        if used.dim() > 0 {
            let xp = (&x * used.basis()) * used.basis().adjoint();
            x -= xp;
        }
        let s = svd_sorted(&x);
        let remaining = d_c - used.dim();
        let rank = s
            .sigma
            .iter()
            .filter(|&&v| v * v >= opts.rank_sv_threshold)
            .count()
            .clamp(1, remaining.min(d_s));
        let mut support = s.v.columns(0, rank).into_owned();
        if used.dim() > 0 {
            let sub = used.extended(&support, 1e-6);
            if sub.dim() - used.dim() != rank {
                return Err(QerError::Numerical("EigQER support collapsed".into()));
            }
            support = sub.basis().columns(used.dim(), rank).into_owned();
            used = sub;
        } else {
            used = Subspace::from_columns(d_c, &support, 1e-6);
            support = used.basis().clone();
        }
        // closest isometry, expressed on the orthonormalized support
        let xs = &x * &support;
        let u = closest_isometry(&Operator::new(xs), rank)?;
        let r = Operator::new(u.matrix() * support.adjoint());
        let contribution = c.element_fidelity(r.matrix());
        elements.push(RecoveryElement { r, contribution, rank });
        ck = project_out_second(&ck, d_s, &support);
        if contribution < opts.early_stop_contribution {
            break;
        }
    }
    Ok((elements, used))
}

fn completion_block(c: &DataMatrix, basis: CMatrix) -> Result<RecoveryBlock> {
    let d = basis.ncols();
    let d_s = c.d_s;
    // every residual state is sent to |0⟩: Choi |0⟩⟨0| ⊗ I_d
    let mut x = CMatrix::zeros(d_s * d, d_s * d);
    for j in 0..d {
        x[(j, j)] = re(1.0);
    }
    let cq = compress_second(&c.c, d_s, &basis);
    let (vals, _) = hermitian_eigh(&cq);
    let y = CMatrix::identity(d, d) * re(vals[0].max(0.0));
    let value = x.iter().zip(cq.transpose().iter()).map(|(a, z)| (a * z).re).sum();
    Ok(RecoveryBlock { basis, x, y: Some(y), value, kind: BlockKind::Completion })
}

fn element_block(e: &RecoveryElement) -> RecoveryBlock {
    let basis = e.support();
    let v = flatten_rows(&(e.r.matrix() * &basis));
    RecoveryBlock {
        x: &v * v.adjoint(),
        basis,
        y: None,
        value: e.contribution,
        kind: BlockKind::Element,
    }
}

/// Columns of `sub` beyond the first `skip`.
fn new_columns(sub: &Subspace, skip: usize) -> CMatrix {
    sub.basis().columns(skip, sub.dim() - skip).into_owned()
}

pub fn block_eig_qer(c: &DataMatrix, m: usize, sdp: SdpOptions) -> Result<BlockRecovery> {
    let (d_s, d_c) = (c.d_s, c.d_c);
    let n = d_s * d_c;
    if m == 0 || m > n {
        return Err(QerError::Parameter(format!("block size {m} outside 1..={n}")));
    }
    let floor = NULL_EIG * c.trace().max(f64::MIN_POSITIVE);
    let mut ck = c.c.clone();
    let mut used = Subspace::empty(d_c);
    let mut blocks = Vec::new();
    while used.dim() < d_c {
        let pairs = top_eigs(&Operator::new(ck.clone()), m, EigOptions::default())?;
        let mut cands: Vec<CVector> = Vec::new();
        for p in pairs.iter().filter(|p| p.value > floor) {
            let s = svd_sorted(&unflatten_rows(&p.vector, d_s, d_c));
            let top = s.sigma[0];
            for (j, &sv) in s.sigma.iter().enumerate() {
                if sv > 1e-8 * top {
                    cands.push(s.v.column(j).into_owned());
                }
            }
        }
        if cands.is_empty() {
            break;
        }
        let sub = used.extended(&CMatrix::from_columns(&cands), 1e-10);
        if sub.dim() == used.dim() {
            break;
        }
        let basis = new_columns(&sub, used.dim());
        let res = solve_block_sdp(c, &basis, sdp)?;
        ck = project_out_second(&ck, d_s, &basis);
        blocks.push(RecoveryBlock { basis, x: res.x, y: Some(res.y), value: res.value, kind: BlockKind::Sdp });
        used = sub;
    }
    if used.dim() < d_c {
        blocks.push(completion_block(c, used.complement().basis().clone())?);
    }
    Ok(BlockRecovery { blocks, d_s, d_c })
}

/// How OrderQER treats the space left after the requested orders.
#[derive(Clone, Copy, Debug)]
pub enum Residual {
    /// Canonical completion with no optimization.
    Complete,
    /// Greedy EigQER on the projected data matrix.
    EigQer(EigQerOptions),
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Spanning vectors for errors of exactly `order` faulty qubits (order 1
/// also includes the no-error term). Element 0 of `qubit_channel` is the
/// no-error element.
pub fn order_vectors(u_c: &CMatrix, n: usize, qubit_channel: &KrausChannel, order: usize) -> Result<CMatrix> {
    let elems = qubit_channel.elements();
    if qubit_channel.dim_in() != 2 || elems.len() < 2 {
        return Err(QerError::Parameter("OrderQER needs a qubit channel with an error element".into()));
    }
    if u_c.nrows() != 1 << n {
        return Err(QerError::Dimension("encoding does not match the qubit count".into()));
    }
    if order == 0 || order > n {
        return Err(QerError::Parameter(format!("order {order} outside 1..={n}")));
    }
    let e0 = elems[0].matrix();
    let errs: Vec<&CMatrix> = elems[1..].iter().map(|e| e.matrix()).collect();
    let mut patterns: Vec<Vec<Option<usize>>> = Vec::new();
    if order == 1 {
        patterns.push(vec![None; n]);
    }
    for pos in combinations(n, order) {
        let mut choice = vec![0usize; order];
        loop {
            let mut pat = vec![None; n];
            for (slot, &p) in pos.iter().enumerate() {
                pat[p] = Some(choice[slot]);
            }
            patterns.push(pat);
            // odometer over error elements
            let mut i = 0;
            while i < order {
                choice[i] += 1;
                if choice[i] < errs.len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
            if i == order {
                break;
            }
        }
    }
    let mut cols = Vec::with_capacity(patterns.len() * u_c.ncols());
    for pat in &patterns {
        for m in 0..u_c.ncols() {
            let mut v = u_c.column(m).into_owned();
            for (j, slot) in pat.iter().enumerate() {
                let op = match slot {
                    None => e0,
                    Some(k) => errs[*k],
                };
                v = apply_single(&v, n, j, op);
            }
            cols.push(v);
        }
    }
    Ok(CMatrix::from_columns(&cols))
}

/// Relative norm below which an order-subspace vector is dropped.
pub const ORDER_DROP_TOL: f64 = 1e-8;

pub fn order_qer(
    u_c: &CMatrix,
    n: usize,
    qubit_channel: &KrausChannel,
    c: &DataMatrix,
    orders: &[usize],
    residual: Residual,
    sdp: SdpOptions,
) -> Result<BlockRecovery> {
    let (d_s, d_c) = (c.d_s, c.d_c);
    if u_c.shape() != (d_c, d_s) {
        return Err(QerError::Dimension("encoding does not match the data matrix".into()));
    }
    let mut sorted = orders.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut used = Subspace::empty(d_c);
    let mut ck = c.c.clone();
    let mut blocks = Vec::new();
    for &o in &sorted {
        let vecs = order_vectors(u_c, n, qubit_channel, o)?;
        let sub = used.extended(&vecs, ORDER_DROP_TOL);
        if sub.dim() == used.dim() {
            continue;
        }
        let basis = new_columns(&sub, used.dim());
        let res = solve_block_sdp(c, &basis, sdp)?;
        ck = project_out_second(&ck, d_s, &basis);
        blocks.push(RecoveryBlock { basis, x: res.x, y: Some(res.y), value: res.value, kind: BlockKind::Sdp });
        used = sub;
    }
    if let Residual::EigQer(opts) = residual {
        let (elements, covered) = eig_qer_on(c, ck, &used, opts)?;
        blocks.extend(elements.iter().map(element_block));
        used = covered;
    }
    if used.dim() < d_c {
        blocks.push(completion_block(c, used.complement().basis().clone())?);
    }
    Ok(BlockRecovery { blocks, d_s, d_c })
}

/// Syndrome measurement followed by the inverse of the lightest Pauli with
/// each syndrome (ties to the lexicographically smallest string), then `U_C†`.
pub fn standard_qec_recovery(code: &StabilizerCode) -> Result<StructuredRecovery> {
    let nsyn = code.num_syndromes();
    let mut chosen = vec![None; nsyn];
    let mut found = 0;
    for p in paulis_by_weight(code.n) {
        let q = p.syndrome(&code.generators);
        if chosen[q].is_none() {
            chosen[q] = Some(p);
            found += 1;
            if found == nsyn {
                break;
            }
        }
    }
    let u = code.u_c.matrix();
    let mut elements = Vec::with_capacity(nsyn);
    for (q, p) in chosen.into_iter().enumerate() {
        let p = p.ok_or_else(|| QerError::Stabilizer(format!("no Pauli reaches syndrome {q}")))?;
        // (E_q U_C)† = U_C† E_q† P_q since E_q U_C spans S_q
        let r = p.apply_columns(u).adjoint();
        elements.push(RecoveryElement { r: Operator::new(r), contribution: 0.0, rank: code.d_s() });
    }
    Ok(StructuredRecovery { elements, d_s: code.d_s(), d_c: code.d_c() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{amplitude_damping, compose_encoding, pauli_channel, tensor_pow, PauliChannelSpec};
    use crate::codes::{five_qubit_code, pauli_error_coefficients, random_code, steane_code, syndrome_decomposition};
    use crate::fidelity::{build_data_matrix, choi_fidelity, Ensemble};
    use crate::sdp::{solve_qer_sdp, QerSdpProblem};

    fn amp_data(code: &StabilizerCode, g: f64) -> DataMatrix {
        let ch = tensor_pow(&amplitude_damping(g).unwrap(), code.n, None).unwrap();
        build_data_matrix(&Ensemble::maximally_mixed(code.d_s()), &compose_encoding(&ch, &code.u_c).unwrap()).unwrap()
    }

    fn pauli_data(code: &StabilizerCode, spec: &PauliChannelSpec) -> DataMatrix {
        let ch = compose_encoding(&pauli_channel(spec).unwrap(), &code.u_c).unwrap();
        build_data_matrix(&Ensemble::maximally_mixed(code.d_s()), &ch).unwrap()
    }

    #[test]
    fn identity_channel_inverts_encoding() {
        let enc = random_code(3, 1, 4).unwrap();
        let ch = compose_encoding(&KrausChannel::identity(8), &enc.u_c).unwrap();
        let c = build_data_matrix(&Ensemble::maximally_mixed(2), &ch).unwrap();
        let rec = eig_qer(&c, EigQerOptions::default()).unwrap();
        assert_eq!(rec.elements.len(), 1);
        let r = rec.elements[0].r.matrix();
        // equal to U_C† up to a global phase
        let overlap = (r * enc.u_c.matrix()).trace();
        assert!((overlap.norm() - 2.0).abs() < 1e-10);
        let phase = overlap / re(overlap.norm());
        assert!((r - enc.u_c.matrix().adjoint() * phase).norm() < 1e-10);
        assert!((rec.fidelity(&c) - 1.0).abs() < 1e-10);
        assert_eq!(rec.deficit_dim(), 6);
        rec.check_invariants().unwrap();
    }

    #[test]
    fn eig_qer_optimal_on_depolarizing() {
        let code = five_qubit_code();
        let dec = syndrome_decomposition(&code).unwrap();
        for p in [0.05, 0.2] {
            let spec = PauliChannelSpec::depolarizing(p).unwrap().tensor_pow(5);
            let coef = pauli_error_coefficients(&code, &dec, &spec).unwrap();
            let c = pauli_data(&code, &spec);
            let rec = eig_qer(&c, EigQerOptions::complete()).unwrap();
            rec.check_invariants().unwrap();
            assert_eq!(rec.deficit_dim(), 0);
            assert!((rec.fidelity(&c) - coef.optimal_fidelity()).abs() < 1e-8);
            let contrib: Vec<f64> = rec.elements.iter().map(|e| e.contribution).collect();
            assert!(contrib.windows(2).all(|w| w[1] <= w[0] + 1e-9));
            let f = choi_fidelity(&rec.choi(), &c).unwrap();
            assert!((f - rec.fidelity(&c)).abs() < 1e-12);
        }
    }

    #[test]
    fn amplitude_damping_orderings() {
        let code = five_qubit_code();
        let c = amp_data(&code, 0.15);
        let full = eig_qer(&c, EigQerOptions::complete()).unwrap();
        full.check_invariants().unwrap();
        assert_eq!(full.deficit_dim(), 0);
        let early = eig_qer(&c, EigQerOptions { early_stop_contribution: 1e-3, ..EigQerOptions::default() }).unwrap();
        assert!(early.elements.len() < full.elements.len());
        assert!(early.fidelity(&c) <= full.fidelity(&c) + 1e-12);
        let capped = eig_qer(&c, EigQerOptions { max_elements: Some(3), ..EigQerOptions::complete() }).unwrap();
        assert_eq!(capped.elements.len(), 3);
        assert!((capped.cumulative()[2] - capped.fidelity(&c)).abs() < 1e-12);
        let qec = standard_qec_recovery(&code).unwrap();
        qec.check_invariants().unwrap();
        assert!(qec.fidelity(&c) <= full.fidelity(&c) + 1e-6);
        let partition = full.partition();
        assert_eq!(partition.iter().map(|p| p.ncols()).sum::<usize>(), 32);
    }

    #[test]
    fn standard_qec_noiseless_and_depolarizing() {
        let code = five_qubit_code();
        let c = amp_data(&code, 0.0);
        let qec = standard_qec_recovery(&code).unwrap();
        assert!((qec.fidelity(&c) - 1.0).abs() < 1e-12);
        assert_eq!(qec.deficit_dim(), 0);
        let dec = syndrome_decomposition(&code).unwrap();
        let spec = PauliChannelSpec::depolarizing(0.15).unwrap().tensor_pow(5);
        let coef = pauli_error_coefficients(&code, &dec, &spec).unwrap();
        assert!((qec.fidelity(&pauli_data(&code, &spec)) - coef.optimal_fidelity()).abs() < 1e-12);
    }

    #[test]
    fn full_block_equals_global_sdp() {
        let code = five_qubit_code();
        let c = amp_data(&code, 0.2);
        let opt = solve_qer_sdp(&QerSdpProblem::from_data(&c), SdpOptions::default()).unwrap();
        let block = block_eig_qer(&c, 64, SdpOptions::default()).unwrap();
        block.check_invariants().unwrap();
        assert_eq!(block.blocks.len(), 1);
        assert!((block.fidelity(&c) - opt.primal_value).abs() < 1e-6);
        let x = block.choi();
        assert!((choi_fidelity(&x, &c).unwrap() - block.fidelity(&c)).abs() < 1e-10);
        assert!(block_eig_qer(&c, 0, SdpOptions::default()).is_err());
        assert!(block_eig_qer(&c, 65, SdpOptions::default()).is_err());
    }

    #[test]
    fn small_blocks_cover_the_space() {
        let code = five_qubit_code();
        let c = amp_data(&code, 0.25);
        let eq = eig_qer(&c, EigQerOptions::complete()).unwrap().fidelity(&c);
        let mut last = 0.0;
        for m in [1, 2, 4] {
            let b = block_eig_qer(&c, m, SdpOptions::default()).unwrap();
            b.check_invariants().unwrap();
            assert_eq!(b.covered_dim(), 32);
            let f = b.fidelity(&c);
            let values: f64 = b.blocks.iter().map(|bl| bl.value).sum();
            assert!((values - f).abs() < 1e-8);
            // block SDPs stop at a relative gap of 1e-7
            assert!(f >= eq - 1e-7, "M={m}: {f} < {eq}");
            last = f;
        }
        assert!(last < 1.0);
    }

    #[test]
    fn random_code_larger_blocks_trend() {
        let enc = random_code(6, 2, 7).unwrap();
        for g in [0.05, 0.15] {
            let ch = tensor_pow(&amplitude_damping(g).unwrap(), 6, None).unwrap();
            let c = build_data_matrix(&Ensemble::maximally_mixed(4), &compose_encoding(&ch, &enc.u_c).unwrap()).unwrap();
            let f2 = block_eig_qer(&c, 2, SdpOptions::default()).unwrap().fidelity(&c);
            let f8 = block_eig_qer(&c, 8, SdpOptions::default()).unwrap().fidelity(&c);
            assert!(f8 >= f2 - 1e-9, "γ={g}: {f8} < {f2}");
        }
    }

    #[test]
    fn order_subspace_dimensions() {
        let code = steane_code();
        let amp = amplitude_damping(0.05).unwrap();
        let v1 = order_vectors(code.u_c.matrix(), 7, &amp, 1).unwrap();
        let v2 = order_vectors(code.u_c.matrix(), 7, &amp, 2).unwrap();
        assert_eq!(v1.ncols(), 16);
        assert_eq!(v2.ncols(), 42);
        let s1 = Subspace::from_columns(128, &v1, ORDER_DROP_TOL);
        assert_eq!(s1.dim(), 16);
        assert_eq!(s1.extended(&v2, ORDER_DROP_TOL).dim(), 58);
        assert!(order_vectors(code.u_c.matrix(), 7, &amp, 0).is_err());
        assert!(order_vectors(code.u_c.matrix(), 5, &amp, 1).is_err());
    }

    #[test]
    fn order_qer_on_steane() {
        let code = steane_code();
        let amp = amplitude_damping(0.05).unwrap();
        let c = amp_data(&code, 0.05);
        let u = code.u_c.matrix();
        let o1 = order_qer(u, 7, &amp, &c, &[1], Residual::Complete, SdpOptions::default()).unwrap();
        o1.check_invariants().unwrap();
        let dims: Vec<usize> = o1.blocks.iter().map(|b| b.dim()).collect();
        assert_eq!(dims, vec![16, 112]);
        let o12 = order_qer(u, 7, &amp, &c, &[2, 1], Residual::Complete, SdpOptions::default()).unwrap();
        o12.check_invariants().unwrap();
        let dims: Vec<usize> = o12.blocks.iter().map(|b| b.dim()).collect();
        assert_eq!(dims, vec![16, 42, 70]);
        let qec = standard_qec_recovery(&code).unwrap().fidelity(&c);
        let eq = eig_qer(&c, EigQerOptions::complete()).unwrap().fidelity(&c);
        let (f1, f12) = (o1.fidelity(&c), o12.fidelity(&c));
        assert!((f1 - qec).abs() < 0.01);
        assert!(f12 >= f1 - 1e-9);
        assert!((f12 - eq).abs() < 0.01);
        let with_eig = order_qer(u, 7, &amp, &c, &[1], Residual::EigQer(EigQerOptions::complete()), SdpOptions::default()).unwrap();
        with_eig.check_invariants().unwrap();
        assert_eq!(with_eig.covered_dim(), 128);
        assert!(with_eig.fidelity(&c) >= f1 - 1e-9);
    }

    #[test]
    fn steane_qec_below_eig_qer() {
        let code = steane_code();
        let c = amp_data(&code, 0.09);
        let qec = standard_qec_recovery(&code).unwrap().fidelity(&c);
        let eq = eig_qer(&c, EigQerOptions::complete()).unwrap();
        let total = eq.fidelity(&c);
        assert!(qec < total);
        let cum = eq.cumulative();
        assert!(cum.windows(2).all(|w| w[1] >= w[0]));
        assert!(total - cum[29] < 1e-3);
        eq.check_invariants().unwrap();
        assert_eq!(eq.covered_dim(), 128);
        assert_eq!(eq.deficit_dim(), 0);
    }
}
