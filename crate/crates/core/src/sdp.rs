//! Interior-point solver for the recovery SDP
//!
//! ```text
//! maximize tr X C   s.t.  tr_S X = I,  X ⪰ 0        (primal)
//! minimize tr Y     s.t.  I ⊗ Y − C ⪰ 0              (dual)
//! ```
//!
//! Feasible-start primal-dual path following with the HKM search direction
//! and a Mehrotra predictor-corrector. The Newton system reduces to a real
//! symmetric Schur complement in the `d²` real coordinates of `ΔY`.

use nalgebra::DMatrix;

use crate::error::{QerError, Result};
use crate::fidelity::DataMatrix;
use crate::opalg::{
    compress_second, hermitian_eigh, identity_kron, lift_second, ptrace_left, re, CMatrix, Operator,
    C64, ZERO,
};

#[derive(Clone, Copy, Debug)]
pub struct SdpOptions {
    /// Relative duality gap `tr Y − tr XC ≤ tol · max(1, |tr XC|)`.
    pub tol: f64,
    /// Bound on `‖tr_S X − I‖_F`.
    pub feas_tol: f64,
    pub max_iters: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions { tol: 1e-7, feas_tol: 1e-8, max_iters: 200 }
    }
}

#[derive(Clone, Debug)]
pub struct QerSdpProblem {
    /// Data matrix on `H_S ⊗ S*`, size `d_s·d_sub`.
    pub c: CMatrix,
    pub d_s: usize,
    pub d_sub: usize,
}

impl QerSdpProblem {
    pub fn new(c: CMatrix, d_s: usize, d_sub: usize) -> Result<Self> {
        if d_s == 0 || d_sub == 0 || c.shape() != (d_s * d_sub, d_s * d_sub) {
            return Err(QerError::Dimension(format!(
                "SDP data {:?} does not match d_S={d_s}, d_sub={d_sub}",
                c.shape()
            )));
        }
        let c = crate::opalg::symmetrize_checked(&c)?;
        Ok(QerSdpProblem { c, d_s, d_sub })
    }

    pub fn from_data(c: &DataMatrix) -> Self {
        QerSdpProblem { c: c.c.clone(), d_s: c.d_s, d_sub: c.d_c }
    }
}

#[derive(Clone, Debug)]
pub struct QerSdpSolution {
    pub x: CMatrix,
    pub y: CMatrix,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub primal_residual: f64,
    /// `λ_min(I ⊗ Y − C)`.
    pub dual_margin: f64,
    pub iterations: usize,
}

/// Orthonormal real basis of `d × d` Hermitian matrices: diagonal units, then
/// for each `a < b` the symmetric and antisymmetric pairs scaled by `1/√2`.
struct HermBasis {
    d: usize,
    /// `(a, b, kind)` with kind 0 diagonal, 1 symmetric, 2 antisymmetric.
    items: Vec<(usize, usize, u8)>,
}

impl HermBasis {
    fn new(d: usize) -> Self {
        let mut items: Vec<(usize, usize, u8)> = (0..d).map(|a| (a, a, 0)).collect();
        for a in 0..d {
            for b in a + 1..d {
                items.push((a, b, 1));
                items.push((a, b, 2));
            }
        }
        HermBasis { d, items }
    }

    fn len(&self) -> usize {
        self.items.len()
    }

    /// Nonzero entries `((row, col), value)` of basis element `j`.
    fn entries(&self, j: usize) -> [((usize, usize), C64); 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self.items[j] {
            (a, _, 0) => [((a, a), re(1.0)), ((a, a), ZERO)],
            (a, b, 1) => [((a, b), re(s)), ((b, a), re(s))],
            (a, b, _) => [((a, b), C64::new(0.0, s)), ((b, a), C64::new(0.0, -s))],
        }
    }

    /// Coordinates `Re tr(H_j M)` of a Hermitian matrix.
    fn coords(&self, m: &CMatrix) -> Vec<f64> {
        let s = std::f64::consts::SQRT_2;
        self.items
            .iter()
            .map(|&(a, b, kind)| match kind {
                0 => m[(a, a)].re,
                1 => s * m[(a, b)].re,
                _ => s * m[(a, b)].im,
            })
            .collect()
    }

    fn assemble(&self, y: &[f64]) -> CMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = CMatrix::zeros(self.d, self.d);
        for (&(a, b, kind), &v) in self.items.iter().zip(y) {
            match kind {
                0 => m[(a, a)] += re(v),
                1 => {
                    m[(a, b)] += re(v * s);
                    m[(b, a)] += re(v * s);
                }
                _ => {
                    m[(a, b)] += C64::new(0.0, v * s);
                    m[(b, a)] += C64::new(0.0, -v * s);
                }
            }
        }
        m
    }
}

fn herm(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * re(0.5)
}

fn inner_re(a: &CMatrix, b: &CMatrix) -> f64 {
    // Re tr(A B) for Hermitian arguments
    a.iter().zip(b.transpose().iter()).map(|(x, y)| (x * y).re).sum()
}

fn hermitian_inverse(m: &CMatrix) -> Result<CMatrix> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| QerError::Numerical("lost positive definiteness".into()))?;
    Ok(herm(&chol.inverse()))
}

/// Largest `α ≤ 1/frac` keeping `M + α Δ ⪰ 0`, scaled by `frac`.
fn step_length(m: &CMatrix, delta: &CMatrix, frac: f64) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| QerError::Numerical("iterate left the cone".into()))?;
    let l = chol.l();
    let li = l
        .clone()
        .try_inverse()
        .ok_or_else(|| QerError::Numerical("singular Cholesky factor".into()))?;
    let scaled = herm(&(&li * delta * li.adjoint()));
    let (vals, _) = hermitian_eigh(&scaled);
    let lo = *vals.last().expect("nonempty");
    Ok(if lo >= 0.0 { 1.0 } else { (frac * (-1.0 / lo)).min(1.0) })
}

struct Newton<'a> {
    d_s: usize,
    d: usize,
    basis: &'a HermBasis,
    x: &'a CMatrix,
    zi: CMatrix,
    factor: SchurFactor,
}

enum SchurFactor {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl<'a> Newton<'a> {
    fn new(d_s: usize, d: usize, basis: &'a HermBasis, x: &'a CMatrix, z: &CMatrix) -> Result<Self> {
        let zi = hermitian_inverse(z)?;
        // K[(a,b),(c,e)] = Σ_{s,t} X_st[a,c] Zi_ts[e,b], column-major vec index a + b·d
        let dd = d * d;
        let mut k = CMatrix::zeros(dd, dd);
        for s in 0..d_s {
            for t in 0..d_s {
                let xst = x.view((s * d, t * d), (d, d));
                let zts = zi.view((t * d, s * d), (d, d));
                for c in 0..d {
                    for a in 0..d {
                        let xv = xst[(a, c)];
                        if xv == ZERO {
                            continue;
                        }
                        for e in 0..d {
                            let col = c + e * d;
                            for b in 0..d {
                                k[(a + b * d, col)] += xv * zts[(e, b)];
                            }
                        }
                    }
                }
            }
        }
        let m = basis.len();
        let mut schur = DMatrix::<f64>::zeros(m, m);
        let ent: Vec<_> = (0..m).map(|j| basis.entries(j)).collect();
        for j in 0..m {
            for i in 0..=j {
                let mut acc = ZERO;
                // Re tr(H_i L0(H_j)) = Re Σ (H_i)_{ba} K[(a,b),(c,e)] (H_j)_{ce}
                for &((bi, ai), hi) in &ent[i] {
                    if hi == ZERO {
                        continue;
                    }
                    for &((c, e), hj) in &ent[j] {
                        if hj == ZERO {
                            continue;
                        }
                        acc += hi * k[(ai + bi * d, c + e * d)] * hj;
                    }
                }
                schur[(i, j)] = acc.re;
                schur[(j, i)] = acc.re;
            }
        }
        let factor = match schur.clone().cholesky() {
            Some(ch) => SchurFactor::Chol(ch),
            None => SchurFactor::Lu(schur.lu()),
        };
        Ok(Newton { d_s, d, basis, x, zi, factor })
    }

    /// Direction for target `σμ`, with optional second-order correction
    /// `ΔX_a ΔZ_a` and primal residual `rp`.
    fn direction(&self, sigma_mu: f64, corr: Option<&CMatrix>, rp: &CMatrix) -> Result<(CMatrix, CMatrix)> {
        let n = self.d_s * self.d;
        let mut g = &self.zi * re(sigma_mu) - self.x;
        if let Some(cm) = corr {
            g -= herm(&(cm * &self.zi));
        }
        let g = herm(&g);
        let tr_g = ptrace_left(&Operator::new(g.clone()), self.d_s, self.d)?.into_matrix();
        let rhs = herm(&(tr_g - rp));
        let r = nalgebra::DVector::from_vec(self.basis.coords(&rhs));
        let y = match &self.factor {
            SchurFactor::Chol(ch) => ch.solve(&r),
            SchurFactor::Lu(lu) => lu
                .solve(&r)
                .ok_or_else(|| QerError::Numerical("singular Schur complement".into()))?,
        };
        let dy = self.basis.assemble(y.as_slice());
        let dz = identity_kron(self.d_s, &dy);
        let dx = herm(&(g - self.x * &dz * &self.zi));
        debug_assert_eq!(dx.nrows(), n);
        Ok((dx, dy))
    }
}

pub fn solve_qer_sdp(prob: &QerSdpProblem, opts: SdpOptions) -> Result<QerSdpSolution> {
    let (d_s, d) = (prob.d_s, prob.d_sub);
    let n = d_s * d;
    let (vals, _) = hermitian_eigh(&prob.c);
    let lmax = vals[0].max(0.0);
    // work with C scaled to unit spectral radius
    let scale = if lmax > 0.0 { lmax } else { 1.0 };
    let c = &prob.c * re(1.0 / scale);
    let tol = opts.tol * (1.0 / scale).min(1.0);

    let basis = HermBasis::new(d);
    let ident_d = CMatrix::identity(d, d);
    let mut x = CMatrix::identity(n, n) * re(1.0 / d_s as f64);
    let mut y = &ident_d * re(1.5 * (lmax / scale) + 1e-6);
    let mut iterations = 0;
    loop {
        let z = herm(&(identity_kron(d_s, &y) - &c));
        let rp = &ident_d - ptrace_left(&Operator::new(x.clone()), d_s, d)?.into_matrix();
        let primal = inner_re(&x, &c);
        let dual = y.trace().re;
        let gap = dual - primal;
        let rp_norm = rp.norm();
        if gap <= tol * primal.abs().max(1.0) && rp_norm <= opts.feas_tol {
            let zf = identity_kron(d_s, &y) * re(scale) - &prob.c;
            let (zv, _) = hermitian_eigh(&herm(&zf));
            return Ok(QerSdpSolution {
                x,
                y: &y * re(scale),
                primal_value: primal * scale,
                dual_value: dual * scale,
                gap: gap * scale,
                primal_residual: rp_norm,
                dual_margin: *zv.last().expect("nonempty"),
                iterations,
            });
        }
        if iterations >= opts.max_iters {
            return Err(QerError::SdpNoConvergence {
                iterations,
                gap: gap * scale,
                primal_residual: rp_norm,
                dual_residual: 0.0,
            });
        }
        iterations += 1;

        let mu = inner_re(&x, &z) / n as f64;
        let newton = Newton::new(d_s, d, &basis, &x, &z)?;
        let (dxa, dya) = newton.direction(0.0, None, &rp)?;
        let dza = identity_kron(d_s, &dya);
        let ap = step_length(&x, &dxa, 1.0)?;
        let ad = step_length(&z, &dza, 1.0)?;
        let x_aff = &x + &dxa * re(ap);
        let z_aff = &z + &dza * re(ad);
        let mu_aff = inner_re(&x_aff, &z_aff) / n as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let corr = &dxa * &dza;
        let (dx, dy) = newton.direction(sigma * mu, Some(&corr), &rp)?;
        let dz = identity_kron(d_s, &dy);
        let ap = step_length(&x, &dx, 0.98)?;
        let ad = step_length(&z, &dz, 0.98)?;
        x = herm(&(&x + dx * re(ap)));
        y = herm(&(&y + dy * re(ad)));
    }
}

/// Optimal recovery and dual on a subspace `S` of `H_C`.
#[derive(Clone, Debug)]
pub struct BlockSdpResult {
    /// Orthonormal basis columns of `S` in `H_C`.
    pub basis: CMatrix,
    /// Choi matrix on `H_S ⊗ S*` in the basis coordinates.
    pub x: CMatrix,
    /// Dual variable on `S*` in the basis coordinates.
    pub y: CMatrix,
    pub value: f64,
    pub solution: QerSdpSolution,
}

impl BlockSdpResult {
    /// Choi matrix on the full `H_S ⊗ H_C*`.
    pub fn lifted_choi(&self, d_s: usize) -> CMatrix {
        lift_second(&self.x, d_s, &self.basis)
    }
}

/// Restricts `C` to `H_S ⊗ S*` and solves the reduced problem.
pub fn solve_block_sdp(c: &DataMatrix, basis: &CMatrix, opts: SdpOptions) -> Result<BlockSdpResult> {
    if basis.nrows() != c.d_c || basis.ncols() == 0 {
        return Err(QerError::Dimension(format!(
            "subspace basis {:?} for code dimension {}",
            basis.shape(),
            c.d_c
        )));
    }
    let reduced = compress_second(&c.c, c.d_s, basis);
    let prob = QerSdpProblem::new(herm(&reduced), c.d_s, basis.ncols())?;
    let solution = solve_qer_sdp(&prob, opts)?;
    Ok(BlockSdpResult {
        basis: basis.clone(),
        x: solution.x.clone(),
        y: solution.y.clone(),
        value: solution.primal_value,
        solution,
    })
}
