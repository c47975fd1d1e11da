use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qer::sweep::{emit_chart, run_sweep, write_csv, BoundKind, ChannelId, CodeId, ExperimentSpec, Method};

/// Fidelity and dual-bound sweeps for channel-adapted recovery.
///
/// Exit status: 0 when every row succeeded and all bounds dominate all
/// recoveries, 1 on row failures or soundness violations, 2 on an invalid spec.
#[derive(Parser, Debug)]
#[command(name = "qer", version)]
struct Args {
    /// five_qubit, steane, shor or random:N:K:SEED
    #[arg(long, default_value = "five_qubit")]
    code: String,

    /// amplitude_damping, depolarizing or pure_state_rotation[:THETA]
    #[arg(long, default_value = "amplitude_damping")]
    channel: String,

    /// Comma-separated noise parameters; defaults to the channel's standard grid.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,

    /// Comma-separated recoveries: baseline, qec, eigqer, blockeig_mM,
    /// orderqer_O1_O2.., optimal
    #[arg(long, value_delimiter = ',', default_value = "baseline,qec,eigqer")]
    methods: Vec<String>,

    /// Comma-separated bounds: gersgorin, svd, iterative_lambda_max,
    /// iterative_svd, iterative_blocksdp_mM, iterated_block_mM, pauli_cert
    #[arg(long, value_delimiter = ',')]
    bounds: Vec<String>,

    /// CSV output path; standard output when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,

    /// SVG chart output path.
    #[arg(long)]
    chart: Option<PathBuf>,

    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,

    /// Record wall-clock seconds per row (output is then not reproducible).
    #[arg(long)]
    timing: bool,

    /// Allow the full-space SDP for codes of 7 or more qubits.
    #[arg(long)]
    force_large_sdp: bool,

    /// Relative duality gap for SDP solves.
    #[arg(long, default_value_t = 1e-7)]
    sdp_tol: f64,

    /// Feasibility tolerance for iterative dual repair.
    #[arg(long, default_value_t = 1e-8)]
    dual_tol: f64,
}

fn build_spec(args: &Args) -> qer::Result<ExperimentSpec> {
    let code: CodeId = args.code.parse()?;
    let channel: ChannelId = args.channel.parse()?;
    let mut spec = ExperimentSpec::new(code, channel);
    if !args.grid.is_empty() {
        spec.grid = args.grid.clone();
    }
    spec.methods = args.methods.iter().filter(|s| !s.is_empty()).map(|s| s.parse()).collect::<qer::Result<Vec<Method>>>()?;
    spec.bounds = args.bounds.iter().filter(|s| !s.is_empty()).map(|s| s.parse()).collect::<qer::Result<Vec<BoundKind>>>()?;
    spec.threads = args.threads;
    spec.timing = args.timing;
    spec.force_large_sdp = args.force_large_sdp;
    spec.sdp.tol = args.sdp_tol;
    spec.iterative.tol = args.dual_tol;
    if args.threads == Some(0) {
        return Err(qer::QerError::Parameter("--threads must be positive".into()));
    }
    spec.validate()?;
    Ok(spec)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let spec = match build_spec(&args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("invalid spec: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match run_sweep(&spec) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("invalid spec: {e}");
            return ExitCode::from(2);
        }
    };
    let written = match &args.csv {
        Some(path) => std::fs::File::create(path).map_err(qer::QerError::from).and_then(|f| write_csv(&result.rows, f)),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_csv(&result.rows, &mut lock).and_then(|_| lock.flush().map_err(Into::into))
        }
    };
    if let Err(e) = written {
        eprintln!("cannot write CSV: {e}");
        return ExitCode::from(1);
    }
    if let Some(path) = &args.chart {
        let title = format!("{} / {}", spec.code, spec.channel);
        if let Err(e) = emit_chart(&result.rows, path, &title) {
            eprintln!("cannot write chart: {e}");
            return ExitCode::from(1);
        }
    }
    for r in result.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("{} {}={}: {}", r.method, r.param_name, r.param_value, r.error.as_deref().unwrap_or(""));
    }
    for v in &result.violations {
        eprintln!("soundness: {v}");
    }
    if result.failed_rows() > 0 || !result.violations.is_empty() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
