//! Choi matrices, the data matrix, and average entanglement fidelity.

use crate::channels::KrausChannel;
use crate::error::{QerError, Result};
use crate::opalg::{dket, flatten_rows, min_eig, ptrace_right, re, CMatrix, EigOptions, Operator};
use crate::recovery::Recovery;

/// Allowed excursion of a fidelity outside `[0, 1]` before it is an error.
pub const FIDELITY_SLACK: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct Ensemble {
    states: Vec<(CMatrix, f64)>,
    dim: usize,
}

impl Ensemble {
    pub fn new(states: Vec<(CMatrix, f64)>) -> Result<Self> {
        let dim = states
            .first()
            .map(|(r, _)| r.nrows())
            .ok_or_else(|| QerError::Parameter("empty ensemble".into()))?;
        let total: f64 = states.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 || states.iter().any(|(_, p)| *p < 0.0) {
            return Err(QerError::Parameter(format!("ensemble probabilities sum to {total}")));
        }
        for (rho, _) in &states {
            if rho.shape() != (dim, dim) {
                return Err(QerError::Dimension("ensemble states differ in dimension".into()));
            }
            let op = Operator::new(rho.clone());
            if op.hermitian_asymmetry() > 1e-12 || (rho.trace().re - 1.0).abs() > 1e-12 {
                return Err(QerError::Parameter("ensemble state is not a density matrix".into()));
            }
            if min_eig(&op, EigOptions::default())?.value < -1e-12 {
                return Err(QerError::Parameter("ensemble state is not positive".into()));
            }
        }
        Ok(Ensemble { states, dim })
    }

    /// The completely mixed state with probability one.
    pub fn maximally_mixed(dim: usize) -> Self {
        let rho = CMatrix::identity(dim, dim) * re(1.0 / dim as f64);
        Ensemble { states: vec![(rho, 1.0)], dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn states(&self) -> &[(CMatrix, f64)] {
        &self.states
    }

    /// `Σ p_i tr ρ_i²`.
    pub fn purity(&self) -> f64 {
        self.states.iter().map(|(r, p)| p * (r * r).trace().re).sum()
    }
}

/// `C = Σ_{ik} p_i |ρ_i E_k†⟩⟩⟨⟨ρ_i E_k†|` on `H_S ⊗ H_C*`, joint index `s·d_C + c`.
#[derive(Clone, Debug)]
pub struct DataMatrix {
    pub c: CMatrix,
    pub d_s: usize,
    pub d_c: usize,
}

impl DataMatrix {
    pub fn new(c: CMatrix, d_s: usize, d_c: usize) -> Result<Self> {
        if c.shape() != (d_s * d_c, d_s * d_c) {
            return Err(QerError::Dimension(format!(
                "data matrix {:?} does not match d_S={d_s}, d_C={d_c}",
                c.shape()
            )));
        }
        let asym = Operator::new(c.clone()).hermitian_asymmetry();
        if asym > 1e-12 {
            return Err(QerError::NotHermitian { asymmetry: asym });
        }
        Ok(DataMatrix { c, d_s, d_c })
    }

    pub fn dim(&self) -> usize {
        self.d_s * self.d_c
    }

    pub fn trace(&self) -> f64 {
        self.c.trace().re
    }

    pub fn scaled(&self, s: f64) -> DataMatrix {
        DataMatrix { c: &self.c * re(s), d_s: self.d_s, d_c: self.d_c }
    }

    /// Smallest eigenvalue, for PSD checks.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(min_eig(&Operator::new(self.c.clone()), EigOptions::default())?.value)
    }

    /// `⟨⟨R|C|R⟩⟩` for an operator `R: H_C → H_S`.
    pub fn element_fidelity(&self, r: &CMatrix) -> f64 {
        let v = flatten_rows(r);
        v.dotc(&(&self.c * &v)).re
    }
}

/// `Σ_k |A_k⟩⟩⟨⟨A_k|` on `K ⊗ H*`.
pub fn choi(ch: &KrausChannel) -> CMatrix {
    let n = ch.dim_in() * ch.dim_out();
    let mut b = CMatrix::zeros(n, ch.elements().len());
    for (k, e) in ch.elements().iter().enumerate() {
        b.set_column(k, &dket(e).coords);
    }
    &b * b.adjoint()
}

/// `A(ρ) = tr_{H*} (I ⊗ conj ρ) X`.
pub fn choi_apply(x: &CMatrix, dim_out: usize, rho: &CMatrix) -> Result<CMatrix> {
    let dim_in = rho.nrows();
    let lifted = crate::opalg::identity_kron(dim_out, &rho.map(|z| z.conj()));
    if lifted.shape() != x.shape() {
        return Err(QerError::Dimension(format!(
            "Choi matrix {:?} does not match a {dim_out}x{dim_in} map",
            x.shape()
        )));
    }
    Ok(ptrace_right(&Operator::new(lifted * x), dim_out, dim_in)?.into_matrix())
}

pub fn build_data_matrix(ens: &Ensemble, ch: &KrausChannel) -> Result<DataMatrix> {
    let (d_s, d_c) = (ch.dim_in(), ch.dim_out());
    if ens.dim() != d_s {
        return Err(QerError::Dimension(format!(
            "ensemble on dimension {}, channel input {d_s}",
            ens.dim()
        )));
    }
    let cols = ens.states().len() * ch.elements().len();
    let mut b = CMatrix::zeros(d_s * d_c, cols);
    let mut j = 0;
    for (rho, p) in ens.states() {
        let w = re(p.sqrt());
        for e in ch.elements() {
            b.set_column(j, &(flatten_rows(&(rho * e.matrix().adjoint())) * w));
            j += 1;
        }
    }
    let c = &b * b.adjoint();
    let c = (&c + c.adjoint()) * re(0.5);
    let dm = DataMatrix::new(c, d_s, d_c)?;
    let expect = ens.purity();
    if (dm.trace() - expect).abs() > 1e-10 * expect.max(1.0) {
        return Err(QerError::Numerical(format!(
            "data matrix trace {} differs from ensemble purity {expect}",
            dm.trace()
        )));
    }
    Ok(dm)
}

fn check_range(f: f64) -> Result<f64> {
    if !(-FIDELITY_SLACK..=1.0 + FIDELITY_SLACK).contains(&f) || f.is_nan() {
        return Err(QerError::Numerical(format!("fidelity {f} outside [0, 1]")));
    }
    Ok(f)
}

/// `tr X C`.
pub fn choi_fidelity(x: &CMatrix, c: &DataMatrix) -> Result<f64> {
    if x.shape() != c.c.shape() {
        return Err(QerError::Dimension(format!(
            "recovery Choi {:?} against data matrix {:?}",
            x.shape(),
            c.c.shape()
        )));
    }
    let f: f64 = x.iter().zip(c.c.transpose().iter()).map(|(a, b)| (a * b).re).sum();
    check_range(f)
}

/// Average entanglement fidelity of a recovery against a data matrix.
pub fn avg_ent_fidelity(rec: &Recovery, c: &DataMatrix) -> Result<f64> {
    let (d_s, d_c) = rec.dims();
    if (d_s, d_c) != (c.d_s, c.d_c) {
        return Err(QerError::Dimension(format!(
            "recovery for ({d_s}, {d_c}) against data matrix ({}, {})",
            c.d_s, c.d_c
        )));
    }
    match rec {
        Recovery::Structured(s) => check_range(s.elements.iter().map(|e| c.element_fidelity(e.r.matrix())).sum()),
        Recovery::Block(b) => check_range(b.fidelity(c)),
        Recovery::Choi(x) => choi_fidelity(&x.x, c),
    }
}

/// `Σ_i p_i Σ_k |tr ρ_i A_k|²`: fidelity of the bare channel with no recovery.
pub fn baseline_fidelity(ens: &Ensemble, ch: &KrausChannel) -> Result<f64> {
    if ch.dim_in() != ens.dim() || ch.dim_out() != ens.dim() {
        return Err(QerError::Dimension("baseline needs a channel on the source space".into()));
    }
    let f = ens
        .states()
        .iter()
        .map(|(rho, p)| {
            p * ch
                .elements()
                .iter()
                .map(|a| (rho * a.matrix()).trace().norm_sqr())
                .sum::<f64>()
        })
        .sum();
    check_range(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{amplitude_damping, compose_encoding, pauli_channel, xz_state, PauliChannelSpec};
    use crate::codes::{five_qubit_code, pauli_error_coefficients, syndrome_decomposition};
    use crate::opalg::{hermitian_eigh, ptrace_left};
    use crate::recovery::standard_qec_recovery;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(d: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let a = CMatrix::from_fn(d, d, |_, _| crate::opalg::c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let m = &a * a.adjoint();
        let t = m.trace();
        m / t
    }

    #[test]
    fn identity_choi_is_rank_one() {
        let x = choi(&KrausChannel::identity(2));
        assert!((x.trace().re - 2.0).abs() < 1e-14);
        let (vals, _) = hermitian_eigh(&x);
        assert!((vals[0] - 2.0).abs() < 1e-12);
        assert!(vals[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn amplitude_damping_choi() {
        let ch = amplitude_damping(0.3).unwrap();
        let x = choi(&ch);
        assert!((x.trace().re - 2.0).abs() < 1e-14);
        let (vals, _) = hermitian_eigh(&x);
        assert!(vals.iter().all(|v| *v > -1e-12));
        assert_eq!(vals.iter().filter(|v| **v > 1e-10).count(), 2);
        // CPTP: the trace over the output factor is the identity
        let pt = ptrace_left(&Operator::new(x), 2, 2).unwrap();
        assert!(pt.max_abs_diff(&Operator::identity(2)) < 1e-14);
    }

    #[test]
    fn choi_action_matches_kraus() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ch = amplitude_damping(0.37).unwrap();
        let x = choi(&ch);
        for _ in 0..20 {
            let rho = random_density(2, &mut rng);
            let out = choi_apply(&x, 2, &rho).unwrap();
            assert!((out - ch.apply(&rho)).norm() < 1e-13);
        }
        assert!(choi_apply(&x, 2, &CMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn identity_data_matrix() {
        let c = build_data_matrix(&Ensemble::maximally_mixed(2), &KrausChannel::identity(2)).unwrap();
        let rho = flatten_rows(&(CMatrix::identity(2, 2) * re(0.5)));
        assert!((&c.c - &rho * rho.adjoint()).norm() < 1e-15);
        assert!((c.trace() - 0.5).abs() < 1e-15);
        let perfect = crate::recovery::ChoiRecovery { x: choi(&KrausChannel::identity(2)), d_s: 2, d_c: 2 };
        let f = avg_ent_fidelity(&Recovery::Choi(perfect), &c).unwrap();
        assert!((f - 1.0).abs() < 1e-14);
    }

    #[test]
    fn data_matrix_trace_is_purity() {
        let code = five_qubit_code();
        let ch = compose_encoding(
            &crate::channels::tensor_pow(&amplitude_damping(0.2).unwrap(), 5, None).unwrap(),
            &code.u_c,
        )
        .unwrap();
        let c = build_data_matrix(&Ensemble::maximally_mixed(2), &ch).unwrap();
        assert!((c.trace() - 0.5).abs() < 1e-12);
        assert!(c.min_eigenvalue().unwrap() > -1e-10);
        let psi = xz_state(0.3);
        let pure = Ensemble::new(vec![(&psi * psi.adjoint(), 0.25), (CMatrix::identity(2, 2) * re(0.5), 0.75)]).unwrap();
        let c2 = build_data_matrix(&pure, &ch).unwrap();
        assert!((c2.trace() - (0.25 + 0.75 * 0.5)).abs() < 1e-12);
        assert!(build_data_matrix(&Ensemble::maximally_mixed(3), &ch).is_err());
    }

    #[test]
    fn ensemble_validation() {
        assert!(Ensemble::new(vec![]).is_err());
        assert!(Ensemble::new(vec![(CMatrix::identity(2, 2) * re(0.5), 0.9)]).is_err());
        assert!(Ensemble::new(vec![(CMatrix::identity(2, 2), 1.0)]).is_err());
        let neg = CMatrix::from_diagonal(&crate::opalg::CVector::from_vec(vec![re(1.5), re(-0.5)]));
        assert!(Ensemble::new(vec![(neg, 1.0)]).is_err());
    }

    #[test]
    fn unencoded_amplitude_damping_baseline() {
        let g: f64 = 0.09;
        let ens = Ensemble::maximally_mixed(2);
        let ch = amplitude_damping(g).unwrap();
        let f = baseline_fidelity(&ens, &ch).unwrap();
        let closed = ((1.0 + (1.0 - g).sqrt()) / 2.0).powi(2);
        assert!((f - closed).abs() < 1e-14);
        assert!((f - 0.954470).abs() < 1e-6);
        // same value as tr(X_id C) for the bare channel
        let c = build_data_matrix(&ens, &ch).unwrap();
        let x = choi(&KrausChannel::identity(2));
        assert!((choi_fidelity(&x, &c).unwrap() - f).abs() < 1e-14);
    }

    #[test]
    fn pauli_data_matrix_eigenvectors() {
        let code = five_qubit_code();
        let dec = syndrome_decomposition(&code).unwrap();
        let spec = PauliChannelSpec::depolarizing(0.1).unwrap().tensor_pow(5);
        let coef = pauli_error_coefficients(&code, &dec, &spec).unwrap();
        let ch = compose_encoding(&pauli_channel(&spec).unwrap(), &code.u_c).unwrap();
        let c = build_data_matrix(&Ensemble::maximally_mixed(2), &ch).unwrap();
        let rho = CMatrix::identity(2, 2) * re(0.5);
        for (p, ap) in dec.normalizers_logical.iter().enumerate() {
            for q in 0..dec.num_syndromes() {
                let v = flatten_rows(&(&rho * ap.adjoint() * dec.encoders[q].adjoint()));
                let lambda = coef.prob[p][q] / 2.0;
                assert!((&c.c * &v - &v * re(lambda)).norm() < 1e-12, "cell ({p}, {q})");
            }
        }
    }

    #[test]
    fn qec_on_depolarizing_is_exhaustive_optimum() {
        let code = five_qubit_code();
        let dec = syndrome_decomposition(&code).unwrap();
        for p in [0.01, 0.1] {
            let spec = PauliChannelSpec::depolarizing(p).unwrap().tensor_pow(5);
            let coef = pauli_error_coefficients(&code, &dec, &spec).unwrap();
            let ch = compose_encoding(&pauli_channel(&spec).unwrap(), &code.u_c).unwrap();
            let c = build_data_matrix(&Ensemble::maximally_mixed(2), &ch).unwrap();
            let rec = Recovery::Structured(standard_qec_recovery(&code).unwrap());
            let f = avg_ent_fidelity(&rec, &c).unwrap();
            assert!((f - coef.optimal_fidelity()).abs() < 1e-12);
            assert!((choi_fidelity(&rec.choi(), &c).unwrap() - f).abs() < 1e-12);
        }
    }

    #[test]
    fn fidelity_range_is_enforced() {
        let c = build_data_matrix(&Ensemble::maximally_mixed(2), &KrausChannel::identity(2)).unwrap();
        let x = choi(&KrausChannel::identity(2)) * re(3.0);
        assert!(matches!(choi_fidelity(&x, &c), Err(QerError::Numerical(_))));
        assert!(choi_fidelity(&CMatrix::identity(2, 2), &c).is_err());
    }
}
