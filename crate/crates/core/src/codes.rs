//! Stabilizer codes and syndrome-subspace bookkeeping.
//!
//! Qubit `j` of an `n`-qubit register is the `j`-th tensor factor, stored at
//! bit `n-1-j` of a computational basis index, so the first qubit is the most
//! significant. Syndrome index `q` lists the generator outcomes in declaration
//! order, first generator in the most significant bit, with a set bit meaning
//! eigenvalue −1.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channels::PauliChannelSpec;
use crate::error::{QerError, Result};
use crate::opalg::{hs_inner, re, CMatrix, CVector, Operator, C64, I, ONE};

/// `i^phase · ⊗_j σ_j`, with `σ_j ∈ {I, X, Y, Z}` read from the bit pair
/// `(x_j, z_j)` (`Y` for both set). Phases are exact quarter turns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Pauli {
    n: usize,
    x: u64,
    z: u64,
    phase: u8,
}

const MAX_QUBITS: usize = 32;

fn i_pow(k: u8) -> C64 {
    [ONE, I, -ONE, -I][(k % 4) as usize]
}

impl Pauli {
    pub fn identity(n: usize) -> Self {
        assert!(n <= MAX_QUBITS);
        Pauli { n, x: 0, z: 0, phase: 0 }
    }

    pub fn from_bits(n: usize, x: u64, z: u64) -> Self {
        assert!(n <= MAX_QUBITS);
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        Pauli { n, x: x & mask, z: z & mask, phase: 0 }
    }

    /// Parses a string over `IXYZ`, optionally prefixed by `+`, `-`, `i`, `-i`.
    pub fn parse(s: &str) -> Result<Self> {
        let (phase, body) = if let Some(rest) = s.strip_prefix("-i") {
            (3, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (2, rest)
        } else if let Some(rest) = s.strip_prefix('i') {
            (1, rest)
        } else {
            (0, s.strip_prefix('+').unwrap_or(s))
        };
        let n = body.chars().count();
        if n > MAX_QUBITS {
            return Err(QerError::Stabilizer(format!("Pauli string longer than {MAX_QUBITS}")));
        }
        let mut p = Pauli::identity(n);
        p.phase = phase;
        for (j, ch) in body.chars().enumerate() {
            let bit = 1u64 << (n - 1 - j);
            match ch {
                'I' => {}
                'X' => p.x |= bit,
                'Y' => {
                    p.x |= bit;
                    p.z |= bit
                }
                'Z' => p.z |= bit,
                _ => return Err(QerError::Stabilizer(format!("bad Pauli letter {ch:?} in {s:?}"))),
            }
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_bits(&self) -> u64 {
        self.x
    }

    pub fn z_bits(&self) -> u64 {
        self.z
    }

    pub fn phase(&self) -> C64 {
        i_pow(self.phase)
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    /// Same tensor string, ignoring the phase.
    pub fn same_string(&self, other: &Pauli) -> bool {
        self.n == other.n && self.x == other.x && self.z == other.z
    }

    /// Letter of qubit `j` as 0..4 for `I, X, Y, Z`.
    fn letter(&self, j: usize) -> u8 {
        let bit = 1u64 << (self.n - 1 - j);
        match (self.x & bit != 0, self.z & bit != 0) {
            (false, false) => 0,
            (true, false) => 1,
            (true, true) => 2,
            (false, true) => 3,
        }
    }

    pub fn commutes(&self, other: &Pauli) -> bool {
        assert_eq!(self.n, other.n);
        ((self.x & other.z) ^ (self.z & other.x)).count_ones().is_multiple_of(2)
    }

    pub fn mul(&self, other: &Pauli) -> Pauli {
        assert_eq!(self.n, other.n);
        let mut phase = self.phase + other.phase;
        for j in 0..self.n {
            // σ_a σ_b = i^g σ_{a·b}; cyclic X→Y→Z gives +1, anticyclic −1
            phase += match (self.letter(j), other.letter(j)) {
                (1, 2) | (2, 3) | (3, 1) => 1,
                (2, 1) | (3, 2) | (1, 3) => 3,
                _ => 0,
            };
        }
        Pauli { n: self.n, x: self.x ^ other.x, z: self.z ^ other.z, phase: phase % 4 }
    }

    pub fn adjoint(&self) -> Pauli {
        Pauli { phase: (4 - self.phase) % 4, ..*self }
    }

    pub fn tensor(&self, other: &Pauli) -> Pauli {
        Pauli {
            n: self.n + other.n,
            x: (self.x << other.n) | other.x,
            z: (self.z << other.n) | other.z,
            phase: (self.phase + other.phase) % 4,
        }
    }

    /// `P|b⟩ = coeff · |b ⊕ x⟩`.
    fn action(&self, b: u64) -> (u64, C64) {
        let y_count = (self.x & self.z).count_ones() as u8;
        let sign = (b & self.z).count_ones() % 2;
        let k = (self.phase + y_count + 2 * sign as u8) % 4;
        (b ^ self.x, i_pow(k))
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        let dim = 1usize << self.n;
        assert_eq!(v.len(), dim);
        let mut out = CVector::zeros(dim);
        for b in 0..dim {
            let (t, coeff) = self.action(b as u64);
            out[t as usize] += coeff * v[b];
        }
        out
    }

    /// Applies to every column.
    pub fn apply_columns(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            out.set_column(j, &self.apply(&m.column(j).into_owned()));
        }
        out
    }

    pub fn matrix(&self) -> CMatrix {
        let dim = 1usize << self.n;
        let mut m = CMatrix::zeros(dim, dim);
        for b in 0..dim {
            let (t, coeff) = self.action(b as u64);
            m[(t as usize, b)] = coeff;
        }
        m
    }

    /// Syndrome bits against `generators`: bit set where they anticommute.
    pub fn syndrome(&self, generators: &[Pauli]) -> usize {
        let r = generators.len();
        generators
            .iter()
            .enumerate()
            .filter(|(_, g)| !self.commutes(g))
            .map(|(j, _)| 1usize << (r - 1 - j))
            .sum()
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = ["", "i", "-", "-i"][self.phase as usize];
        let body: String = (0..self.n).map(|j| ['I', 'X', 'Y', 'Z'][self.letter(j) as usize]).collect();
        write!(f, "{prefix}{body}")
    }
}

/// All `n`-qubit Pauli strings ordered by weight, then lexicographically with
/// `I < X < Y < Z` and the first qubit most significant.
pub fn paulis_by_weight(n: usize) -> Vec<Pauli> {
    let total = 1usize << (2 * n);
    let mut all: Vec<(u32, usize, Pauli)> = (0..total)
        .map(|code| {
            let mut p = Pauli::identity(n);
            for j in 0..n {
                let digit = (code >> (2 * (n - 1 - j))) & 3;
                let bit = 1u64 << (n - 1 - j);
                match digit {
                    1 => p.x |= bit,
                    2 => {
                        p.x |= bit;
                        p.z |= bit
                    }
                    3 => p.z |= bit,
                    _ => {}
                }
            }
            (p.weight(), code, p)
        })
        .collect();
    all.sort_by_key(|&(w, code, _)| (w, code));
    all.into_iter().map(|(_, _, p)| p).collect()
}

/// An encoding isometry `U_C: C^{2^k} → C^{2^n}`.
#[derive(Clone, Debug)]
pub struct Encoding {
    pub n: usize,
    pub k: usize,
    pub u_c: Operator,
}

impl Encoding {
    pub fn d_s(&self) -> usize {
        1 << self.k
    }

    pub fn d_c(&self) -> usize {
        1 << self.n
    }
}

#[derive(Clone, Debug)]
pub struct StabilizerCode {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub generators: Vec<Pauli>,
    pub logical_x: Vec<Pauli>,
    pub logical_z: Vec<Pauli>,
    pub u_c: Operator,
}

impl StabilizerCode {
    /// Validates the commutation pattern and builds `U_C`.
    ///
    /// `|0_L⟩` is the normalized projection of the first computational basis
    /// state with nonzero overlap onto the `+1` eigenspace of every generator
    /// and logical `Z`, phased so its first nonzero entry is real positive.
    /// `|m⟩ = X̄^m |0_L⟩` with the first logical qubit most significant in `m`.
    pub fn new(name: &str, generators: &[&str], logical_x: &[&str], logical_z: &[&str]) -> Result<Self> {
        let parse = |v: &[&str]| v.iter().map(|s| Pauli::parse(s)).collect::<Result<Vec<_>>>();
        let generators = parse(generators)?;
        let logical_x = parse(logical_x)?;
        let logical_z = parse(logical_z)?;
        let n = generators
            .first()
            .map(|g| g.n())
            .ok_or_else(|| QerError::Stabilizer("no generators".into()))?;
        let k = logical_x.len();
        if logical_z.len() != k || generators.len() + k != n {
            return Err(QerError::Stabilizer(format!(
                "{} generators and {}/{} logicals do not fit {n} qubits",
                generators.len(),
                logical_x.len(),
                logical_z.len()
            )));
        }
        let all = generators.iter().chain(&logical_x).chain(&logical_z);
        if all.clone().any(|p| p.n() != n) {
            return Err(QerError::Stabilizer("operators on differing qubit counts".into()));
        }
        for (a, ga) in generators.iter().enumerate() {
            for gb in &generators[a + 1..] {
                if !ga.commutes(gb) {
                    return Err(QerError::Stabilizer(format!("generators {ga} and {gb} anticommute")));
                }
            }
            for l in logical_x.iter().chain(&logical_z) {
                if !ga.commutes(l) {
                    return Err(QerError::Stabilizer(format!("logical {l} anticommutes with {ga}")));
                }
            }
        }
        for i in 0..k {
            for j in 0..k {
                let want = i != j;
                if logical_x[i].commutes(&logical_z[j]) != want {
                    return Err(QerError::Stabilizer(format!(
                        "logical X{i} and Z{j} have the wrong commutation"
                    )));
                }
                if !logical_x[i].commutes(&logical_x[j]) || !logical_z[i].commutes(&logical_z[j]) {
                    return Err(QerError::Stabilizer("logicals of one type must commute".into()));
                }
            }
        }
        let u_c = build_encoder(n, k, &generators, &logical_x, &logical_z)?;
        Ok(StabilizerCode { name: name.to_string(), n, k, generators, logical_x, logical_z, u_c })
    }

    pub fn d_s(&self) -> usize {
        1 << self.k
    }

    pub fn d_c(&self) -> usize {
        1 << self.n
    }

    pub fn encoding(&self) -> Encoding {
        Encoding { n: self.n, k: self.k, u_c: self.u_c.clone() }
    }

    pub fn num_syndromes(&self) -> usize {
        1 << (self.n - self.k)
    }

    /// `A_p = X̄^{i} Z̄^{j}` with `p` written in binary as `i_1..i_k j_1..j_k`.
    pub fn normalizer(&self, p: usize) -> Pauli {
        let k = self.k;
        let mut a = Pauli::identity(self.n);
        for m in 0..k {
            if p >> (2 * k - 1 - m) & 1 == 1 {
                a = a.mul(&self.logical_x[m]);
            }
        }
        for m in 0..k {
            if p >> (k - 1 - m) & 1 == 1 {
                a = a.mul(&self.logical_z[m]);
            }
        }
        a
    }

    /// Whether `p` commutes with every logical operator.
    fn logically_trivial(&self, p: &Pauli) -> bool {
        self.logical_x.iter().chain(&self.logical_z).all(|l| l.commutes(p))
    }
}

fn build_encoder(n: usize, k: usize, gens: &[Pauli], lx: &[Pauli], lz: &[Pauli]) -> Result<Operator> {
    let dim = 1usize << n;
    let project = |v: CVector| {
        let mut v = v;
        for g in gens.iter().chain(lz) {
            v = (&v + g.apply(&v)) * re(0.5);
        }
        v
    };
    let mut zero = None;
    for b in 0..dim {
        let mut e = CVector::zeros(dim);
        e[b] = ONE;
        let v = project(e);
        let nrm = v.norm();
        if nrm > 1e-8 {
            zero = Some(v / re(nrm));
            break;
        }
    }
    let mut zero = zero.ok_or_else(|| QerError::Stabilizer("empty code space".into()))?;
    let first = zero.iter().find(|z| z.norm() > 1e-12).copied().unwrap_or(ONE);
    zero *= first.conj() / re(first.norm());
    let d_s = 1usize << k;
    let mut u = CMatrix::zeros(dim, d_s);
    for m in 0..d_s {
        let mut v = zero.clone();
        for (i, x) in lx.iter().enumerate() {
            if m >> (k - 1 - i) & 1 == 1 {
                v = x.apply(&v);
            }
        }
        u.set_column(m, &v);
    }
    let op = Operator::new(u);
    let dev = op.isometry_deviation();
    if dev > 1e-10 {
        return Err(QerError::NotIsometry { deviation: dev });
    }
    Ok(op)
}

/// The five-qubit perfect code.
pub fn five_qubit_code() -> StabilizerCode {
    StabilizerCode::new(
        "five_qubit",
        &["XZZXI", "IXZZX", "XIXZZ", "ZXIXZ"],
        &["XXXXX"],
        &["ZZZZZ"],
    )
    .expect("five-qubit code is valid")
}

pub fn steane_code() -> StabilizerCode {
    StabilizerCode::new(
        "steane",
        &["IIIXXXX", "IXXIIXX", "XIXIXIX", "IIIZZZZ", "IZZIIZZ", "ZIZIZIZ"],
        &["XXXXXXX"],
        &["ZZZZZZZ"],
    )
    .expect("Steane code is valid")
}

pub fn shor_code() -> StabilizerCode {
    StabilizerCode::new(
        "shor",
        &[
            "ZZIIIIIII",
            "IZZIIIIII",
            "IIIZZIIII",
            "IIIIZZIII",
            "IIIIIIZZI",
            "IIIIIIIZZ",
            "XXXXXXIII",
            "IIIXXXXXX",
        ],
        &["ZZZZZZZZZ"],
        &["XXXXXXXXX"],
    )
    .expect("Shor code is valid")
}

/// Isometry from orthonormalizing a seeded complex Gaussian `2^n × 2^k` matrix.
pub fn random_code(n: usize, k: usize, seed: u64) -> Result<Encoding> {
    if k >= n {
        return Err(QerError::Parameter(format!("need k < n, got [{n},{k}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = CMatrix::from_fn(1 << n, 1 << k, |_, _| {
        C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
    });
    let q = g.qr().q();
    Ok(Encoding { n, k, u_c: Operator::new(q) })
}

/// Syndrome subspaces `S_q` with bases `|m⟩_q = T_q |m⟩_0`, where `T_q` is the
/// lightest Pauli with syndrome `q` that commutes with every logical operator.
#[derive(Clone, Debug)]
pub struct SyndromeDecomposition {
    pub transfer: Vec<Pauli>,
    /// `U_Cq = T_q U_C`; its columns are the basis of `S_q`.
    pub encoders: Vec<CMatrix>,
    pub normalizers: Vec<Pauli>,
    /// `A_p^S = U_C† A_p U_C`.
    pub normalizers_logical: Vec<CMatrix>,
}

impl SyndromeDecomposition {
    pub fn num_syndromes(&self) -> usize {
        self.encoders.len()
    }

    pub fn projector(&self, q: usize) -> CMatrix {
        &self.encoders[q] * self.encoders[q].adjoint()
    }

    /// `W_{qq'} = Σ_m |m⟩_{q'} ⟨m|_q`.
    pub fn transfer_between(&self, q: usize, qp: usize) -> CMatrix {
        &self.encoders[qp] * self.encoders[q].adjoint()
    }
}

pub fn syndrome_decomposition(code: &StabilizerCode) -> Result<SyndromeDecomposition> {
    let nsyn = code.num_syndromes();
    let mut transfer: Vec<Option<Pauli>> = vec![None; nsyn];
    let mut found = 0;
    for p in paulis_by_weight(code.n) {
        let q = p.syndrome(&code.generators);
        if transfer[q].is_none() && code.logically_trivial(&p) {
            transfer[q] = Some(p);
            found += 1;
            if found == nsyn {
                break;
            }
        }
    }
    let transfer: Vec<Pauli> = transfer
        .into_iter()
        .enumerate()
        .map(|(q, t)| t.ok_or_else(|| QerError::Stabilizer(format!("no Pauli reaches syndrome {q}"))))
        .collect::<Result<_>>()?;
    let u = code.u_c.matrix();
    let encoders: Vec<CMatrix> = transfer.iter().map(|t| t.apply_columns(u)).collect();
    let normalizers: Vec<Pauli> = (0..1usize << (2 * code.k)).map(|p| code.normalizer(p)).collect();
    let normalizers_logical = normalizers.iter().map(|a| u.adjoint() * a.apply_columns(u)).collect();
    Ok(SyndromeDecomposition { transfer, encoders, normalizers, normalizers_logical })
}

/// Probability table `|a_pq|²`, indexed `[p][q]`.
#[derive(Clone, Debug)]
pub struct PauliCoefficients {
    pub prob: Vec<Vec<f64>>,
}

impl PauliCoefficients {
    /// `(p_q, |ã_q|²)` for each syndrome.
    pub fn most_likely(&self) -> Vec<(usize, f64)> {
        let nq = self.prob[0].len();
        (0..nq)
            .map(|q| {
                let mut best = (0, self.prob[0][q]);
                for (p, row) in self.prob.iter().enumerate().skip(1) {
                    if row[q] > best.1 {
                        best = (p, row[q]);
                    }
                }
                best
            })
            .collect()
    }

    /// `Σ_q max_p |a_pq|²`.
    pub fn optimal_fidelity(&self) -> f64 {
        self.most_likely().iter().map(|&(_, w)| w).sum()
    }
}

/// Classifies each scaled Pauli error `a E` by syndrome `q` and the normalizer
/// `A_p` with `E U_C ∝ A_p U_Cq`, accumulating `|a|²` per cell.
pub fn pauli_error_coefficients(
    code: &StabilizerCode,
    decomp: &SyndromeDecomposition,
    spec: &PauliChannelSpec,
) -> Result<PauliCoefficients> {
    if spec.n != code.n {
        return Err(QerError::Dimension(format!(
            "channel on {} qubits, code on {}",
            spec.n, code.n
        )));
    }
    let np = decomp.normalizers.len();
    let nq = decomp.num_syndromes();
    let d_s = code.d_s() as f64;
    let mut prob = vec![vec![0.0; nq]; np];
    let u = code.u_c.matrix();
    for (e, a) in &spec.terms {
        let q = e.syndrome(&code.generators);
        // U_Cq† E U_C = c A_p^S for exactly one p, |c| = 1
        let m = Operator::new(decomp.encoders[q].adjoint() * e.apply_columns(u));
        let mut hit = None;
        for (p, ap) in decomp.normalizers_logical.iter().enumerate() {
            let coeff = hs_inner(&Operator::new(ap.clone()), &m)? / re(d_s);
            if coeff.norm() > 0.5 {
                let resid = (m.matrix() - ap * coeff).norm();
                if resid > 1e-10 {
                    return Err(QerError::PauliDecomposition { residual: resid });
                }
                hit = Some(p);
                break;
            }
        }
        let p = hit.ok_or(QerError::PauliDecomposition { residual: m.frobenius_norm() })?;
        prob[p][q] += a.norm_sqr();
    }
    Ok(PauliCoefficients { prob })
}
