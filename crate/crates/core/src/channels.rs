//! Qubit channel models as Kraus sets.

use crate::codes::Pauli;
use crate::error::{QerError, Result};
use crate::opalg::{re, CMatrix, CVector, Operator, C64, ONE};

/// Tolerance on `Σ E†E = I`.
pub const CPTP_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct KrausChannel {
    elements: Vec<Operator>,
    dim_in: usize,
    dim_out: usize,
}

impl KrausChannel {
    /// Validates shapes and trace preservation.
    pub fn new(elements: Vec<Operator>) -> Result<Self> {
        let ch = Self::unchecked(elements)?;
        let dev = ch.completeness_deviation();
        if dev > CPTP_TOL {
            return Err(QerError::NotTracePreserving { deviation: dev });
        }
        Ok(ch)
    }

    fn unchecked(elements: Vec<Operator>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| QerError::Parameter("channel needs at least one element".into()))?;
        let (dim_out, dim_in) = first.shape();
        if elements.iter().any(|e| e.shape() != (dim_out, dim_in)) {
            return Err(QerError::Dimension("Kraus elements differ in shape".into()));
        }
        Ok(KrausChannel { elements, dim_in, dim_out })
    }

    pub fn identity(dim: usize) -> Self {
        KrausChannel { elements: vec![Operator::identity(dim)], dim_in: dim, dim_out: dim }
    }

    pub fn elements(&self) -> &[Operator] {
        &self.elements
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    /// Largest entry of `|Σ E†E − I|`.
    pub fn completeness_deviation(&self) -> f64 {
        let mut sum = CMatrix::zeros(self.dim_in, self.dim_in);
        for e in &self.elements {
            sum += e.adjoint().matrix() * e.matrix();
        }
        Operator::new(sum).max_abs_diff(&Operator::identity(self.dim_in))
    }

    /// `ρ ↦ Σ E ρ E†`.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim_out, self.dim_out);
        for e in &self.elements {
            out += e.matrix() * rho * e.matrix().adjoint();
        }
        out
    }
}

/// Amplitude damping with decay probability `gamma`.
pub fn amplitude_damping(gamma: f64) -> Result<KrausChannel> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(QerError::Parameter(format!("gamma {gamma} outside [0, 1]")));
    }
    let e0 = Operator::from_real_rows(2, 2, &[1.0, 0.0, 0.0, (1.0 - gamma).sqrt()]);
    let e1 = Operator::from_real_rows(2, 2, &[0.0, gamma.sqrt(), 0.0, 0.0]);
    KrausChannel::new(vec![e0, e1])
}

/// Channel taking `|±θ/2⟩` to `|±(θ−φ)/2⟩`, where `|t⟩ = cos t|0⟩ + sin t|1⟩`.
///
/// Three elements: the `±` pair scaled by `α` and a diagonal element scaled
/// by `β`. The pair contributes `diag(2α²s², 2α²c²)` to `Σ E†E` and cancels
/// off the diagonal, so `α²` and `β²` solve a 2×2 linear system.
pub fn pure_state_rotation(theta: f64, phi: f64) -> Result<KrausChannel> {
    if !(theta > 0.0 && theta < std::f64::consts::PI) || !(0.0..=theta).contains(&phi) {
        return Err(QerError::Parameter(format!(
            "need 0 < theta < pi and 0 <= phi <= theta, got theta={theta}, phi={phi}"
        )));
    }
    let (s, cc) = ((theta / 2.0).sin(), (theta / 2.0).cos());
    let (sp, cp) = (((theta - phi) / 2.0).sin(), ((theta - phi) / 2.0).cos());
    // [2s²  c'²/c²] [α²]   [1]
    // [2c²  s'²/s²] [β²] = [1]
    let det = 2.0 * (sp * sp - cp * cp);
    let (a2, b2) = if det.abs() < 1e-14 {
        if phi == 0.0 {
            (0.0, 1.0)
        } else {
            return Err(QerError::Parameter(format!(
                "no CPTP normalization at theta={theta}, phi={phi}"
            )));
        }
    } else {
        (
            (sp * sp / (s * s) - cp * cp / (cc * cc)) / det,
            (2.0 * s * s - 2.0 * cc * cc) / det,
        )
    };
    if a2 < -1e-14 || b2 < -1e-14 {
        return Err(QerError::Parameter(format!(
            "no CPTP normalization at theta={theta}, phi={phi}"
        )));
    }
    let (alpha, beta) = (a2.max(0.0).sqrt(), b2.max(0.0).sqrt());
    let pair = |sign: f64| {
        Operator::from_real_rows(
            2,
            2,
            &[
                alpha * cp * s,
                sign * alpha * cp * cc,
                sign * alpha * sp * s,
                alpha * sp * cc,
            ],
        )
    };
    let diag = Operator::from_real_rows(2, 2, &[beta * cp / cc, 0.0, 0.0, beta * sp / s]);
    let ch = KrausChannel::unchecked(vec![pair(1.0), pair(-1.0), diag])?;
    let dev = ch.completeness_deviation();
    if dev > 1e-12 {
        return Err(QerError::NotTracePreserving { deviation: dev });
    }
    Ok(ch)
}

/// Scaled Pauli strings `{a_j P_j}` with `Σ|a_j|² = 1`.
#[derive(Clone, Debug)]
pub struct PauliChannelSpec {
    pub n: usize,
    pub terms: Vec<(Pauli, C64)>,
}

impl PauliChannelSpec {
    pub fn new(n: usize, terms: Vec<(Pauli, C64)>) -> Result<Self> {
        let norm: f64 = terms.iter().map(|(_, a)| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(QerError::Parameter(format!("Pauli amplitudes have squared norm {norm}")));
        }
        for (i, (p, _)) in terms.iter().enumerate() {
            if p.n() != n {
                return Err(QerError::Dimension(format!("Pauli {p} is not on {n} qubits")));
            }
            if terms[..i].iter().any(|(q, _)| q.same_string(p)) {
                return Err(QerError::Parameter(format!("repeated Pauli string {p}")));
            }
        }
        Ok(PauliChannelSpec { n, terms })
    }

    /// Single-qubit depolarizing amplitudes.
    pub fn depolarizing(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(QerError::Parameter(format!("p {p} outside [0, 1]")));
        }
        let a = (p / 3.0).sqrt();
        Self::new(
            1,
            ["I", "X", "Y", "Z"]
                .iter()
                .zip([(1.0 - p).sqrt(), a, a, a])
                .map(|(s, amp)| (Pauli::parse(s).expect("valid label"), re(amp)))
                .collect(),
        )
    }

    /// `n`-fold tensor power, terms in lexicographic index order.
    pub fn tensor_pow(&self, n: usize) -> Self {
        let mut terms = vec![(Pauli::identity(0), ONE)];
        for _ in 0..n {
            let mut next = Vec::with_capacity(terms.len() * self.terms.len());
            for (p, a) in &terms {
                for (q, b) in &self.terms {
                    next.push((p.tensor(q), a * b));
                }
            }
            terms = next;
        }
        PauliChannelSpec { n: self.n * n, terms }
    }

    /// Total weight `|a|²` of each distinct Pauli string.
    pub fn probabilities(&self) -> Vec<f64> {
        self.terms.iter().map(|(_, a)| a.norm_sqr()).collect()
    }
}

pub fn pauli_channel(spec: &PauliChannelSpec) -> Result<KrausChannel> {
    let elements = spec
        .terms
        .iter()
        .map(|(p, a)| Operator::new(p.matrix()).scale_c(*a))
        .collect();
    KrausChannel::new(elements)
}

/// `{√(1−p) I, √(p/3) X, √(p/3) Y, √(p/3) Z}`.
pub fn depolarizing(p: f64) -> Result<KrausChannel> {
    pauli_channel(&PauliChannelSpec::depolarizing(p)?)
}

/// All `n`-fold Kronecker products of the elements, first factor most
/// significant in the element index. `cap` bounds the element count.
pub fn tensor_pow(ch: &KrausChannel, n: usize, cap: Option<usize>) -> Result<KrausChannel> {
    if n == 0 {
        return Err(QerError::Parameter("tensor power needs n >= 1".into()));
    }
    let count = (ch.elements.len() as f64).powi(n as i32);
    if let Some(cap) = cap {
        if count > cap as f64 {
            return Err(QerError::ElementCap { count: count as usize, cap });
        }
    }
    let mut elements = ch.elements.clone();
    for _ in 1..n {
        let mut next = Vec::with_capacity(elements.len() * ch.elements.len());
        for a in &elements {
            for b in &ch.elements {
                next.push(a.kron(b));
            }
        }
        elements = next;
    }
    let dim_in = ch.dim_in.pow(n as u32);
    let dim_out = ch.dim_out.pow(n as u32);
    Ok(KrausChannel { elements, dim_in, dim_out })
}

/// `{E_k U_C}`: the encoded channel from the source space.
pub fn compose_encoding(ch: &KrausChannel, u_c: &Operator) -> Result<KrausChannel> {
    if ch.dim_in != u_c.rows() {
        return Err(QerError::Dimension(format!(
            "channel acts on dimension {}, encoding outputs {}",
            ch.dim_in,
            u_c.rows()
        )));
    }
    let dev = u_c.isometry_deviation();
    if dev > 1e-10 {
        return Err(QerError::NotIsometry { deviation: dev });
    }
    let elements = ch.elements.iter().map(|e| e * u_c).collect();
    Ok(KrausChannel { elements, dim_in: u_c.cols(), dim_out: ch.dim_out })
}

/// `op` applied to qubit `j` of an `n`-qubit state vector, first qubit most
/// significant.
pub(crate) fn apply_single(v: &CVector, n: usize, j: usize, op: &CMatrix) -> CVector {
    let bit = 1usize << (n - 1 - j);
    let mut out = CVector::zeros(v.len());
    for b in 0..v.len() {
        if b & bit != 0 {
            continue;
        }
        let (v0, v1) = (v[b], v[b | bit]);
        out[b] = op[(0, 0)] * v0 + op[(0, 1)] * v1;
        out[b | bit] = op[(1, 0)] * v0 + op[(1, 1)] * v1;
    }
    out
}

/// `{(A_{k_1} ⊗ … ⊗ A_{k_n}) U_C}` for a qubit channel, in the element order of
/// [`tensor_pow`], without forming the `2^n × 2^n` products.
pub fn encoded_tensor_pow(ch: &KrausChannel, n: usize, u_c: &Operator, cap: Option<usize>) -> Result<KrausChannel> {
    if ch.dim_in != 2 || ch.dim_out != 2 {
        return Err(QerError::Parameter("encoded tensor power needs a qubit channel".into()));
    }
    if u_c.rows() != 1 << n {
        return Err(QerError::Dimension(format!("encoding has {} rows for {n} qubits", u_c.rows())));
    }
    let count = (ch.elements.len() as f64).powi(n as i32);
    if let Some(cap) = cap {
        if count > cap as f64 {
            return Err(QerError::ElementCap { count: count as usize, cap });
        }
    }
    let dev = u_c.isometry_deviation();
    if dev > 1e-10 {
        return Err(QerError::NotIsometry { deviation: dev });
    }
    let mut current = vec![u_c.matrix().clone()];
    for j in 0..n {
        let mut next = Vec::with_capacity(current.len() * ch.elements.len());
        for m in &current {
            for e in &ch.elements {
                let cols: Vec<CVector> = m.column_iter().map(|c| apply_single(&c.into_owned(), n, j, e.matrix())).collect();
                next.push(CMatrix::from_columns(&cols));
            }
        }
        current = next;
    }
    let elements = current.into_iter().map(Operator::new).collect();
    Ok(KrausChannel { elements, dim_in: u_c.cols(), dim_out: 1 << n })
}

/// `|t⟩ = cos t|0⟩ + sin t|1⟩`.
pub fn xz_state(t: f64) -> CMatrix {
    CMatrix::from_column_slice(2, 1, &[re(t.cos()), re(t.sin())])
}


#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn amplitude_damping_endpoints() {
        let id = amplitude_damping(0.0).unwrap();
        assert!(id.elements()[0].max_abs_diff(&Operator::identity(2)) == 0.0);
        assert!(id.elements()[1].frobenius_norm() == 0.0);
        let full = amplitude_damping(1.0).unwrap();
        let e0 = Operator::from_real_rows(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let e1 = Operator::from_real_rows(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(full.elements()[0].max_abs_diff(&e0), 0.0);
        assert_eq!(full.elements()[1].max_abs_diff(&e1), 0.0);
        assert!(amplitude_damping(0.09).unwrap().completeness_deviation() < 1e-14);
        assert!(amplitude_damping(1.5).is_err());
    }

    #[test]
    fn rotation_maps_pure_states() {
        let theta = 5.0 * PI / 12.0;
        let phi = theta / 2.0;
        let ch = pure_state_rotation(theta, phi).unwrap();
        for sign in [1.0, -1.0] {
            let psi = xz_state(sign * theta / 2.0);
            let out = ch.apply(&(&psi * psi.adjoint()));
            let target = xz_state(sign * (theta - phi) / 2.0);
            let fid = (target.adjoint() * &out * &target)[(0, 0)].re;
            assert!((fid - 1.0).abs() < 1e-10, "fidelity {fid}");
        }
    }

    #[test]
    fn rotation_without_angle_is_identity_on_targets() {
        let theta = 5.0 * PI / 12.0;
        let ch = pure_state_rotation(theta, 0.0).unwrap();
        let psi = xz_state(theta / 2.0);
        let rho = &psi * psi.adjoint();
        assert!((ch.apply(&rho) - &rho).norm() < 1e-12);
    }

    #[test]
    fn rotation_closure_grid() {
        for i in 1..12 {
            let theta = PI * i as f64 / 12.0;
            for j in 0..=10 {
                let phi = theta * j as f64 / 10.0;
                match pure_state_rotation(theta, phi) {
                    Ok(ch) => assert!(ch.completeness_deviation() < 1e-12),
                    // only reachable when θ − φ crosses π/2
                    Err(_) => assert!(theta > PI / 2.0),
                }
            }
        }
        assert!(pure_state_rotation(0.0, 0.0).is_err());
        assert!(pure_state_rotation(1.0, 1.5).is_err());
    }

    #[test]
    fn depolarizing_elements() {
        let id = depolarizing(0.0).unwrap();
        assert!(id.elements()[0].max_abs_diff(&Operator::identity(2)) < 1e-15);
        let ch = depolarizing(0.3).unwrap();
        assert_eq!(ch.elements().len(), 4);
        assert!(ch.completeness_deviation() < 1e-15);
    }

    #[test]
    fn bit_flip_matches_explicit() {
        let p: f64 = 0.2;
        let spec = PauliChannelSpec::new(
            1,
            vec![
                (Pauli::parse("I").unwrap(), re((1.0 - p).sqrt())),
                (Pauli::parse("X").unwrap(), re(p.sqrt())),
            ],
        )
        .unwrap();
        let ch = pauli_channel(&spec).unwrap();
        let x = Operator::from_real_rows(2, 2, &[0.0, p.sqrt(), p.sqrt(), 0.0]);
        assert!(ch.elements()[1].max_abs_diff(&x) < 1e-15);
        assert!(PauliChannelSpec::new(1, vec![(Pauli::parse("X").unwrap(), re(0.5))]).is_err());
    }

    #[test]
    fn tensor_power_kronecker_order() {
        let ch = amplitude_damping(0.3).unwrap();
        let two = tensor_pow(&ch, 2, None).unwrap();
        assert_eq!(two.elements().len(), 4);
        assert!(two.completeness_deviation() < 1e-12);
        let e = ch.elements();
        let expect = e[0].kron(&e[1]);
        assert!(two.elements()[1].max_abs_diff(&expect) < 1e-15);
        assert!(tensor_pow(&ch, 1, None).unwrap().elements()[1].max_abs_diff(&e[1]) == 0.0);
        assert!(matches!(tensor_pow(&ch, 9, Some(100)), Err(QerError::ElementCap { .. })));
    }

    #[test]
    fn tensor_power_acts_factorwise() {
        let ch = amplitude_damping(0.25).unwrap();
        let three = tensor_pow(&ch, 3, None).unwrap();
        let rho1 = {
            let v = xz_state(0.4);
            &v * v.adjoint()
        };
        let one = ch.apply(&rho1);
        let product = one.kronecker(&one).kronecker(&one);
        let rho3 = rho1.kronecker(&rho1).kronecker(&rho1);
        assert!((three.apply(&rho3) - product).norm() < 1e-12);
    }

    #[test]
    fn encoding_composition() {
        let u = Operator::from_real_rows(4, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let ch = compose_encoding(&KrausChannel::identity(4), &u).unwrap();
        assert!(ch.elements()[0].max_abs_diff(&u) == 0.0);
        let damp = tensor_pow(&amplitude_damping(0.2).unwrap(), 2, None).unwrap();
        let enc = compose_encoding(&damp, &u).unwrap();
        assert!(enc.completeness_deviation() < 1e-12);
        assert!(compose_encoding(&damp, &Operator::identity(2)).is_err());
        assert!(compose_encoding(&damp, &u.scale(2.0)).is_err());
    }

    #[test]
    fn encoded_power_matches_dense_product() {
        let code = crate::codes::five_qubit_code();
        let ch = amplitude_damping(0.2).unwrap();
        let dense = compose_encoding(&tensor_pow(&ch, 5, None).unwrap(), &code.u_c).unwrap();
        let fast = encoded_tensor_pow(&ch, 5, &code.u_c, None).unwrap();
        assert_eq!(dense.elements().len(), fast.elements().len());
        for (a, b) in dense.elements().iter().zip(fast.elements()) {
            assert!(a.max_abs_diff(b) < 1e-14);
        }
        assert!(encoded_tensor_pow(&ch, 4, &code.u_c, None).is_err());
        assert!(encoded_tensor_pow(&ch, 5, &code.u_c, Some(10)).is_err());
    }
}
