//! Parameter sweeps over recoveries and dual bounds, with CSV and SVG output.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::bounds::{
    gersgorin_dual, init_block_lambda_max, init_block_sdp_duals, iterated_block_dual, iterative_dual,
    pauli_certificate, svd_dual, DualPoint, IterativeOptions, FEAS_TOL,
};
use crate::channels::{
    amplitude_damping, depolarizing, encoded_tensor_pow, pure_state_rotation, tensor_pow, KrausChannel,
    PauliChannelSpec,
};
use crate::codes::{five_qubit_code, random_code, shor_code, steane_code, syndrome_decomposition, Encoding, StabilizerCode};
use crate::error::{QerError, Result};
use crate::fidelity::{baseline_fidelity, build_data_matrix, DataMatrix, Ensemble};
use crate::recovery::{
    block_eig_qer, eig_qer, order_qer, standard_qec_recovery, BlockRecovery, EigQerOptions, Residual,
    StructuredRecovery,
};
use crate::sdp::{solve_qer_sdp, QerSdpProblem, SdpOptions};

/// Slack for the post-run bound-versus-recovery check.
pub const SOUNDNESS_SLACK: f64 = 1e-6;

/// Smallest code length for which the full SDP needs `force_large_sdp`.
pub const LARGE_SDP_QUBITS: usize = 7;

pub const CSV_HEADER: [&str; 9] =
    ["code", "channel", "param_name", "param_value", "method", "value", "margin", "elements", "seconds"];

#[derive(Clone, Debug, PartialEq)]
pub enum CodeId {
    FiveQubit,
    Steane,
    Shor,
    Random { n: usize, k: usize, seed: u64 },
}

impl CodeId {
    pub fn stabilizer(&self) -> Option<StabilizerCode> {
        match self {
            CodeId::FiveQubit => Some(five_qubit_code()),
            CodeId::Steane => Some(steane_code()),
            CodeId::Shor => Some(shor_code()),
            CodeId::Random { .. } => None,
        }
    }

    pub fn encoding(&self) -> Result<Encoding> {
        match self {
            CodeId::Random { n, k, seed } => random_code(*n, *k, *seed),
            _ => Ok(self.stabilizer().expect("named codes are stabilizer codes").encoding()),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            CodeId::FiveQubit => 5,
            CodeId::Steane => 7,
            CodeId::Shor => 9,
            CodeId::Random { n, .. } => *n,
        }
    }
}

impl fmt::Display for CodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodeId::FiveQubit => write!(f, "five_qubit"),
            CodeId::Steane => write!(f, "steane"),
            CodeId::Shor => write!(f, "shor"),
            CodeId::Random { n, k, seed } => write!(f, "random:{n}:{k}:{seed}"),
        }
    }
}

impl FromStr for CodeId {
    type Err = QerError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "five_qubit" | "5" => Ok(CodeId::FiveQubit),
            "steane" | "7" => Ok(CodeId::Steane),
            "shor" | "9" => Ok(CodeId::Shor),
            _ => {
                let parts: Vec<&str> = s.split(':').collect();
                let bad = || QerError::Parameter(format!("unknown code '{s}' (five_qubit, steane, shor, random:N:K:SEED)"));
                if parts.len() != 4 || parts[0] != "random" {
                    return Err(bad());
                }
                let n = parts[1].parse().map_err(|_| bad())?;
                let k = parts[2].parse().map_err(|_| bad())?;
                let seed = parts[3].parse().map_err(|_| bad())?;
                Ok(CodeId::Random { n, k, seed })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChannelId {
    AmplitudeDamping,
    Depolarizing,
    PureStateRotation { theta: f64 },
}

impl ChannelId {
    pub fn param_name(&self) -> &'static str {
        match self {
            ChannelId::AmplitudeDamping => "gamma",
            ChannelId::Depolarizing => "p",
            ChannelId::PureStateRotation { .. } => "phi",
        }
    }

    pub fn qubit_channel(&self, x: f64) -> Result<KrausChannel> {
        match *self {
            ChannelId::AmplitudeDamping => amplitude_damping(x),
            ChannelId::Depolarizing => depolarizing(x),
            ChannelId::PureStateRotation { theta } => pure_state_rotation(theta, x),
        }
    }

    /// Default grid: `γ, p ∈ [0, 0.5]` in steps of 0.025; `φ ∈ [0, θ]` in twentieths.
    pub fn default_grid(&self) -> Vec<f64> {
        match *self {
            ChannelId::PureStateRotation { theta } => (0..=20).map(|i| theta * i as f64 / 20.0).collect(),
            _ => (0..=20).map(|i| 0.025 * i as f64).collect(),
        }
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelId::AmplitudeDamping => write!(f, "amplitude_damping"),
            ChannelId::Depolarizing => write!(f, "depolarizing"),
            ChannelId::PureStateRotation { theta } => write!(f, "pure_state_rotation:{theta}"),
        }
    }
}

impl FromStr for ChannelId {
    type Err = QerError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amplitude_damping" | "amp" => Ok(ChannelId::AmplitudeDamping),
            "depolarizing" | "dep" => Ok(ChannelId::Depolarizing),
            "pure_state_rotation" | "rotation" => {
                Ok(ChannelId::PureStateRotation { theta: 5.0 * std::f64::consts::PI / 12.0 })
            }
            _ => match s.strip_prefix("pure_state_rotation:") {
                Some(t) => t
                    .parse()
                    .map(|theta| ChannelId::PureStateRotation { theta })
                    .map_err(|_| QerError::Parameter(format!("bad rotation angle in '{s}'"))),
                None => Err(QerError::Parameter(format!(
                    "unknown channel '{s}' (amplitude_damping, depolarizing, pure_state_rotation[:THETA])"
                ))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Baseline,
    Qec,
    EigQer,
    BlockEig(usize),
    OrderQer(Vec<usize>),
    Optimal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DualInit {
    LambdaMax,
    Svd,
    BlockSdp(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BoundKind {
    Gersgorin,
    Svd,
    Iterative(DualInit),
    IteratedBlock(usize),
    PauliCert,
}

fn parse_suffix(s: &str, prefix: &str) -> Option<usize> {
    s.strip_prefix(prefix)?.parse().ok()
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Baseline => write!(f, "baseline"),
            Method::Qec => write!(f, "qec"),
            Method::EigQer => write!(f, "eigqer"),
            Method::BlockEig(m) => write!(f, "blockeig_m{m}"),
            Method::OrderQer(o) => {
                write!(f, "orderqer")?;
                for x in o {
                    write!(f, "_{x}")?;
                }
                Ok(())
            }
            Method::Optimal => write!(f, "optimal"),
        }
    }
}

impl FromStr for Method {
    type Err = QerError;

    fn from_str(s: &str) -> Result<Self> {
        let m = match s {
            "baseline" => Method::Baseline,
            "qec" => Method::Qec,
            "eigqer" => Method::EigQer,
            "optimal" => Method::Optimal,
            _ => {
                if let Some(m) = parse_suffix(s, "blockeig_m") {
                    Method::BlockEig(m)
                } else if let Some(rest) = s.strip_prefix("orderqer_") {
                    let orders: std::result::Result<Vec<usize>, _> = rest.split('_').map(str::parse).collect();
                    Method::OrderQer(orders.map_err(|_| QerError::Parameter(format!("bad orders in '{s}'")))?)
                } else {
                    return Err(QerError::Parameter(format!(
                        "unknown method '{s}' (baseline, qec, eigqer, blockeig_mM, orderqer_O1_O2.., optimal)"
                    )));
                }
            }
        };
        Ok(m)
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundKind::Gersgorin => write!(f, "gersgorin"),
            BoundKind::Svd => write!(f, "svd"),
            BoundKind::Iterative(DualInit::LambdaMax) => write!(f, "iterative_lambda_max"),
            BoundKind::Iterative(DualInit::Svd) => write!(f, "iterative_svd"),
            BoundKind::Iterative(DualInit::BlockSdp(m)) => write!(f, "iterative_blocksdp_m{m}"),
            BoundKind::IteratedBlock(m) => write!(f, "iterated_block_m{m}"),
            BoundKind::PauliCert => write!(f, "pauli_cert"),
        }
    }
}

impl FromStr for BoundKind {
    type Err = QerError;

    fn from_str(s: &str) -> Result<Self> {
        let b = match s {
            "gersgorin" => BoundKind::Gersgorin,
            "svd" => BoundKind::Svd,
            "iterative_lambda_max" => BoundKind::Iterative(DualInit::LambdaMax),
            "iterative_svd" => BoundKind::Iterative(DualInit::Svd),
            "pauli_cert" => BoundKind::PauliCert,
            _ => {
                if let Some(m) = parse_suffix(s, "iterative_blocksdp_m") {
                    BoundKind::Iterative(DualInit::BlockSdp(m))
                } else if let Some(m) = parse_suffix(s, "iterated_block_m") {
                    BoundKind::IteratedBlock(m)
                } else {
                    return Err(QerError::Parameter(format!(
                        "unknown bound '{s}' (gersgorin, svd, iterative_lambda_max, iterative_svd, \
                         iterative_blocksdp_mM, iterated_block_mM, pauli_cert)"
                    )));
                }
            }
        };
        Ok(b)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub code: CodeId,
    pub channel: ChannelId,
    pub grid: Vec<f64>,
    pub methods: Vec<Method>,
    pub bounds: Vec<BoundKind>,
    pub force_large_sdp: bool,
    /// Record wall-clock seconds; otherwise the column is 0.
    pub timing: bool,
    /// Worker threads; `None` uses the available parallelism.
    pub threads: Option<usize>,
    pub sdp: SdpOptions,
    pub iterative: IterativeOptions,
}

impl ExperimentSpec {
    pub fn new(code: CodeId, channel: ChannelId) -> Self {
        ExperimentSpec {
            grid: channel.default_grid(),
            code,
            channel,
            methods: Vec::new(),
            bounds: Vec::new(),
            force_large_sdp: false,
            timing: false,
            threads: None,
            sdp: SdpOptions::default(),
            iterative: IterativeOptions::default(),
        }
    }

    /// Checks grid domains and method compatibility without running anything.
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(QerError::Parameter("empty parameter grid".into()));
        }
        if self.methods.is_empty() && self.bounds.is_empty() {
            return Err(QerError::Parameter("no methods or bounds requested".into()));
        }
        for &x in &self.grid {
            self.channel.qubit_channel(x)?;
        }
        let enc = self.code.encoding()?;
        let dim = enc.d_s() * enc.d_c();
        let stabilizer = self.code.stabilizer().is_some();
        for m in &self.methods {
            match m {
                Method::Qec if !stabilizer => {
                    return Err(QerError::Parameter("standard QEC needs a stabilizer code".into()))
                }
                Method::BlockEig(b) if *b == 0 || *b > dim => {
                    return Err(QerError::Parameter(format!("block size {b} outside 1..={dim}")))
                }
                Method::OrderQer(o) if o.is_empty() || o.iter().any(|&x| x == 0 || x > enc.n) => {
                    return Err(QerError::Parameter(format!("orders {o:?} outside 1..={}", enc.n)))
                }
                Method::Optimal if enc.n >= LARGE_SDP_QUBITS && !self.force_large_sdp => {
                    return Err(QerError::Parameter(format!(
                        "full SDP on {} qubits refused without force_large_sdp",
                        enc.n
                    )))
                }
                _ => {}
            }
        }
        for b in &self.bounds {
            match b {
                BoundKind::PauliCert => {
                    if !stabilizer || self.channel != ChannelId::Depolarizing {
                        return Err(QerError::Parameter(
                            "pauli_cert needs a stabilizer code and a Pauli channel".into(),
                        ));
                    }
                }
                BoundKind::Iterative(DualInit::BlockSdp(m)) | BoundKind::IteratedBlock(m) if *m == 0 || *m > dim => {
                    return Err(QerError::Parameter(format!("block size {m} outside 1..={dim}")))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Recovery,
    Bound,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub code: String,
    pub channel: String,
    pub param_name: String,
    pub param_value: f64,
    pub method: String,
    pub kind: RowKind,
    pub value: Option<f64>,
    /// `λ_min(I ⊗ Y − C)` for bounds.
    pub margin: Option<f64>,
    /// Operator elements or blocks for recoveries, rank-one updates for bounds.
    pub elements: Option<usize>,
    pub seconds: f64,
    pub error: Option<String>,
}

impl Row {
    pub fn is_feasible_bound(&self) -> bool {
        self.kind == RowKind::Bound && self.margin.is_some_and(|m| m >= -FEAS_TOL) && self.value.is_some()
    }
}

#[derive(Clone, Debug, Default)]
pub struct SweepResult {
    pub rows: Vec<Row>,
    /// Bound-below-recovery and optimal-below-structured violations.
    pub violations: Vec<String>,
}

impl SweepResult {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

/// State shared between methods at one grid point.
struct Point<'a> {
    spec: &'a ExperimentSpec,
    enc: &'a Encoding,
    x: f64,
    c: DataMatrix,
    eig: Option<Result<StructuredRecovery>>,
    blocks: HashMap<usize, Result<BlockRecovery>>,
}

fn share<T: Clone>(r: &Result<T>) -> Result<T> {
    match r {
        Ok(v) => Ok(v.clone()),
        Err(e) => Err(QerError::Numerical(format!("dependency failed: {e}"))),
    }
}

impl<'a> Point<'a> {
    fn eig(&mut self) -> Result<StructuredRecovery> {
        if self.eig.is_none() {
            self.eig = Some(eig_qer(&self.c, EigQerOptions::complete()));
        }
        share(self.eig.as_ref().expect("just set"))
    }

    fn blocks(&mut self, m: usize) -> Result<BlockRecovery> {
        if !self.blocks.contains_key(&m) {
            let r = block_eig_qer(&self.c, m, self.spec.sdp);
            self.blocks.insert(m, r);
        }
        share(&self.blocks[&m])
    }

    fn method(&mut self, m: &Method) -> Result<(f64, Option<usize>, Option<DualPoint>)> {
        match m {
            Method::Baseline => {
                let ch = self.spec.channel.qubit_channel(self.x)?;
                let src = tensor_pow(&ch, self.enc.k, None)?;
                let f = baseline_fidelity(&Ensemble::maximally_mixed(self.enc.d_s()), &src)?;
                Ok((f, None, None))
            }
            Method::Qec => {
                let code = self.spec.code.stabilizer().expect("validated");
                let r = standard_qec_recovery(&code)?;
                Ok((r.fidelity(&self.c), Some(r.elements.len()), None))
            }
            Method::EigQer => {
                let r = self.eig()?;
                Ok((r.fidelity(&self.c), Some(r.elements.len()), None))
            }
            Method::BlockEig(b) => {
                let r = self.blocks(*b)?;
                Ok((r.fidelity(&self.c), Some(r.blocks.len()), None))
            }
            Method::OrderQer(orders) => {
                let ch = self.spec.channel.qubit_channel(self.x)?;
                let r = order_qer(
                    self.enc.u_c.matrix(),
                    self.enc.n,
                    &ch,
                    &self.c,
                    orders,
                    Residual::EigQer(EigQerOptions::complete()),
                    self.spec.sdp,
                )?;
                Ok((r.fidelity(&self.c), Some(r.blocks.len()), None))
            }
            Method::Optimal => {
                let sol = solve_qer_sdp(&QerSdpProblem::from_data(&self.c), self.spec.sdp)?;
                let dual = DualPoint {
                    bound: sol.dual_value,
                    y: sol.y,
                    margin: sol.dual_margin,
                    feasible: sol.dual_margin >= -FEAS_TOL,
                    provenance: "sdp".into(),
                    updates: 0,
                };
                Ok((sol.primal_value, None, Some(dual)))
            }
        }
    }

    fn bound(&mut self, b: &BoundKind) -> Result<DualPoint> {
        let opts = self.spec.iterative;
        match b {
            BoundKind::Gersgorin => {
                let parts = self.eig()?.partition();
                gersgorin_dual(&self.c, &parts)
            }
            BoundKind::Svd => {
                let parts = self.eig()?.partition();
                svd_dual(&self.c, &parts)
            }
            BoundKind::Iterative(init) => {
                let y0 = match init {
                    DualInit::LambdaMax => {
                        let parts = self.eig()?.partition();
                        init_block_lambda_max(&self.c, &parts)?
                    }
                    DualInit::Svd => {
                        let parts = self.eig()?.partition();
                        svd_dual(&self.c, &parts)?.y
                    }
                    DualInit::BlockSdp(m) => {
                        let duals = self.blocks(*m)?.block_duals(&self.c);
                        init_block_sdp_duals(&duals, self.c.d_c)?
                    }
                };
                iterative_dual(&self.c, &y0, opts)
            }
            BoundKind::IteratedBlock(m) => {
                let duals = self.blocks(*m)?.block_duals(&self.c);
                iterated_block_dual(&self.c, &duals, opts)
            }
            BoundKind::PauliCert => {
                let code = self.spec.code.stabilizer().expect("validated");
                let decomp = syndrome_decomposition(&code)?;
                let spec = PauliChannelSpec::depolarizing(self.x)?.tensor_pow(code.n);
                Ok(pauli_certificate(&code, &decomp, &spec)?.0.dual)
            }
        }
    }
}

fn data_matrix(enc: &Encoding, ch: &KrausChannel) -> Result<DataMatrix> {
    let encoded = encoded_tensor_pow(ch, enc.n, &enc.u_c, None)?;
    build_data_matrix(&Ensemble::maximally_mixed(enc.d_s()), &encoded)
}

fn run_point(spec: &ExperimentSpec, enc: &Encoding, x: f64) -> Vec<Row> {
    let base = |method: String, kind: RowKind| Row {
        code: spec.code.to_string(),
        channel: spec.channel.to_string(),
        param_name: spec.channel.param_name().to_string(),
        param_value: x,
        method,
        kind,
        value: None,
        margin: None,
        elements: None,
        seconds: 0.0,
        error: None,
    };
    let seconds = |t: Instant| if spec.timing { t.elapsed().as_secs_f64() } else { 0.0 };
    let c = match spec.channel.qubit_channel(x).and_then(|ch| data_matrix(enc, &ch)) {
        Ok(c) => c,
        Err(e) => {
            let mut rows = Vec::new();
            for m in &spec.methods {
                rows.push(Row { error: Some(e.to_string()), ..base(m.to_string(), RowKind::Recovery) });
            }
            for b in &spec.bounds {
                rows.push(Row { error: Some(e.to_string()), ..base(b.to_string(), RowKind::Bound) });
            }
            return rows;
        }
    };
    let mut point = Point { spec, enc, x, c, eig: None, blocks: HashMap::new() };
    let mut rows = Vec::new();
    for m in &spec.methods {
        let t = Instant::now();
        let mut row = base(m.to_string(), RowKind::Recovery);
        match point.method(m) {
            Ok((v, elements, dual)) => {
                row.value = Some(v);
                row.elements = elements;
                row.seconds = seconds(t);
                rows.push(row);
                if let Some(d) = dual {
                    let mut b = base(format!("{m}_dual"), RowKind::Bound);
                    b.value = Some(d.bound);
                    b.margin = Some(d.margin);
                    rows.push(b);
                }
            }
            Err(e) => {
                row.error = Some(e.to_string());
                rows.push(row);
            }
        }
    }
    for b in &spec.bounds {
        let t = Instant::now();
        let mut row = base(b.to_string(), RowKind::Bound);
        match point.bound(b) {
            Ok(d) => {
                row.value = Some(d.bound);
                row.margin = Some(d.margin);
                row.elements = Some(d.updates);
                row.seconds = seconds(t);
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        rows.push(row);
    }
    rows
}

/// Every feasible bound must dominate every recovery at the same grid point,
/// and the optimum must dominate the structured recoveries.
pub fn soundness_violations(rows: &[Row], slack: f64) -> Vec<String> {
    let mut out = Vec::new();
    let mut groups: Vec<(&str, &str, u64, Vec<&Row>)> = Vec::new();
    for r in rows {
        let key = (r.code.as_str(), r.channel.as_str(), r.param_value.to_bits());
        match groups.iter_mut().find(|g| (g.0, g.1, g.2) == key) {
            Some(g) => g.3.push(r),
            None => groups.push((key.0, key.1, key.2, vec![r])),
        }
    }
    for (_, _, _, group) in groups {
        let recs: Vec<&&Row> = group.iter().filter(|r| r.kind == RowKind::Recovery && r.value.is_some()).collect();
        let coded: Vec<&&&Row> = recs.iter().filter(|r| r.method != "baseline").collect();
        for b in group.iter().filter(|r| r.is_feasible_bound()) {
            let bv = b.value.expect("feasible bound has a value");
            for r in &coded {
                let rv = r.value.expect("filtered");
                if bv + slack < rv {
                    out.push(format!(
                        "{} {}={}: bound {} = {bv:.10} below {} = {rv:.10}",
                        b.code, b.param_name, b.param_value, b.method, r.method
                    ));
                }
            }
        }
        if let Some(opt) = recs.iter().find(|r| r.method == "optimal") {
            let ov = opt.value.expect("filtered");
            for r in &coded {
                let rv = r.value.expect("filtered");
                if ov + slack < rv {
                    out.push(format!(
                        "{} {}={}: optimal {ov:.10} below {} = {rv:.10}",
                        r.code, r.param_name, r.param_value, r.method
                    ));
                }
            }
        }
    }
    out
}

pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    spec.validate()?;
    let enc = spec.code.encoding()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = spec.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| QerError::Parameter(format!("thread pool: {e}")))?;
    let per_point: Vec<Vec<Row>> =
        pool.install(|| spec.grid.par_iter().map(|&x| run_point(spec, &enc, x)).collect());
    let rows: Vec<Row> = per_point.into_iter().flatten().collect();
    let violations = soundness_violations(&rows, SOUNDNESS_SLACK);
    Ok(SweepResult { rows, violations })
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_opt<T: FromStr>(s: &str) -> Result<Option<T>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| QerError::Parameter(format!("bad CSV field '{s}'")))
}

pub fn write_csv<W: std::io::Write>(rows: &[Row], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.code.clone(),
            r.channel.clone(),
            r.param_name.clone(),
            fmt_float(r.param_value),
            r.method.clone(),
            r.value.map(fmt_float).unwrap_or_default(),
            r.margin.map(fmt_float).unwrap_or_default(),
            r.elements.map(|e| e.to_string()).unwrap_or_default(),
            fmt_float(r.seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[Row], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(QerError::Parameter("no rows to write".into()));
    }
    write_csv(rows, std::fs::File::create(path)?)
}

/// Reads a table written by [`write_csv`]. Row kinds are inferred from the
/// margin column and errors are not stored.
pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<Row>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(QerError::Parameter(format!("unexpected CSV header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let margin: Option<f64> = parse_opt(&rec[6])?;
        rows.push(Row {
            code: rec[0].to_string(),
            channel: rec[1].to_string(),
            param_name: rec[2].to_string(),
            param_value: parse_opt(&rec[3])?.unwrap_or(f64::NAN),
            method: rec[4].to_string(),
            kind: if margin.is_some() { RowKind::Bound } else { RowKind::Recovery },
            value: parse_opt(&rec[5])?,
            margin,
            elements: parse_opt(&rec[7])?,
            seconds: parse_opt(&rec[8])?.unwrap_or(0.0),
            error: None,
        });
    }
    Ok(rows)
}

const PALETTE: [&str; 10] =
    ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line chart with one series per method or bound. Bounds are dashed;
/// infeasible bound points are omitted.
pub fn render_svg(rows: &[Row], title: &str) -> String {
    let (w, h) = (720.0, 480.0);
    let (left, right, top, bottom) = (70.0, 190.0, 40.0, 50.0);
    type Series = (String, RowKind, Vec<(f64, f64)>);
    let mut series: Vec<Series> = Vec::new();
    for r in rows {
        let Some(v) = r.value else { continue };
        if r.kind == RowKind::Bound && !r.is_feasible_bound() {
            continue;
        }
        match series.iter_mut().find(|s| s.0 == r.method) {
            Some(s) => s.2.push((r.param_value, v)),
            None => series.push((r.method.clone(), r.kind, vec![(r.param_value, v)])),
        }
    }
    for s in &mut series {
        s.2.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let pts = series.iter().flat_map(|s| s.2.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-6);
    y0 -= pad;
    y1 += pad;
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (y1 - y) / (y1 - y0) * ph;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    out.push_str(&format!("<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        left + pw / 2.0,
        xml_escape(title)
    ));
    out.push_str(&format!(
        "<rect x=\"{left}\" y=\"{top}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>\n"
    ));
    for i in 0..=5 {
        let fx = x0 + (x1 - x0) * i as f64 / 5.0;
        let fy = y0 + (y1 - y0) * i as f64 / 5.0;
        out.push_str(&format!(
            "<line x1=\"{0:.2}\" y1=\"{1}\" x2=\"{0:.2}\" y2=\"{2}\" stroke=\"black\"/>\
             <text x=\"{0:.2}\" y=\"{3}\" text-anchor=\"middle\">{4:.3}</text>\n",
            sx(fx),
            top + ph,
            top + ph + 5.0,
            top + ph + 20.0,
            fx
        ));
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1:.2}\" x2=\"{2}\" y2=\"{1:.2}\" stroke=\"#dddddd\"/>\
             <text x=\"{3}\" y=\"{4:.2}\" text-anchor=\"end\">{5:.4}</text>\n",
            left,
            sy(fy),
            left + pw,
            left - 6.0,
            sy(fy) + 4.0,
            fy
        ));
    }
    let xlabel = rows.first().map(|r| r.param_name.as_str()).unwrap_or("x");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        left + pw / 2.0,
        h - 12.0,
        xml_escape(xlabel)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {0})\">fidelity</text>\n",
        top + ph / 2.0
    ));
    for (i, (name, kind, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if *kind == RowKind::Bound { " stroke-dasharray=\"6 3\"" } else { "" };
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>\n",
            path.join(" ")
        ));
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        out.push_str(&format!(
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"{dash}/>\
             <text x=\"{}\" y=\"{}\">{}</text>\n",
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            xml_escape(name)
        ));
    }
    out.push_str("</svg>\n");
    out
}

pub fn emit_chart(rows: &[Row], path: &Path, title: &str) -> Result<()> {
    if rows.is_empty() {
        return Err(QerError::Parameter("no rows to chart".into()));
    }
    std::fs::write(path, render_svg(rows, title))?;
    Ok(())
}

/// Table of `(param, value)` for one method label.
pub fn series<'a>(rows: &'a [Row], method: &str) -> Vec<(f64, Option<f64>, &'a Row)> {
    rows.iter().filter(|r| r.method == method).map(|r| (r.param_value, r.value, r)).collect()
}
