use qer::sweep::*;

fn small_spec() -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(CodeId::FiveQubit, ChannelId::AmplitudeDamping);
    spec.grid = vec![0.0, 0.1, 0.25];
    spec.methods = vec![Method::Baseline, Method::Qec, Method::EigQer, Method::Optimal];
    spec.bounds = vec![BoundKind::Gersgorin, BoundKind::Iterative(DualInit::LambdaMax)];
    spec
}

fn csv_bytes(rows: &[Row]) -> Vec<u8> {
    let mut out = Vec::new();
    write_csv(rows, &mut out).unwrap();
    out
}

fn value(rows: &[Row], method: &str, x: f64) -> f64 {
    rows.iter().find(|r| r.method == method && r.param_value == x).unwrap().value.unwrap()
}

#[test]
fn five_qubit_amplitude_damping_sweep() {
    let res = run_sweep(&small_spec()).unwrap();
    assert_eq!(res.failed_rows(), 0);
    assert!(res.violations.is_empty(), "{:?}", res.violations);
    for r in res.rows.iter().filter(|r| r.param_value == 0.0 && r.kind == RowKind::Recovery) {
        assert!((r.value.unwrap() - 1.0).abs() < 1e-9, "{}", r.method);
    }
    for &g in &[0.0, 0.1, 0.25] {
        let closed = ((1.0 + (1.0f64 - g).sqrt()) / 2.0).powi(2);
        assert!((value(&res.rows, "baseline", g) - closed).abs() < 1e-12);
        let (q, e, o) = (value(&res.rows, "qec", g), value(&res.rows, "eigqer", g), value(&res.rows, "optimal", g));
        assert!(q <= e + 1e-6 && e <= o + 1e-6, "gamma {g}: {q} {e} {o}");
    }
    // 4 methods, the SDP dual row and 2 bounds per point
    assert_eq!(res.rows.len(), 3 * 7);
}

#[test]
fn csv_header_and_round_trip() {
    let res = run_sweep(&small_spec()).unwrap();
    let bytes = csv_bytes(&res.rows);
    let text = String::from_utf8(bytes.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), "code,channel,param_name,param_value,method,value,margin,elements,seconds");
    assert!(!text.contains('\r'));
    let back = read_csv(bytes.as_slice()).unwrap();
    assert_eq!(back.len(), res.rows.len());
    for (a, b) in res.rows.iter().zip(&back) {
        assert_eq!(a.param_value.to_bits(), b.param_value.to_bits());
        assert_eq!(a.value.map(f64::to_bits), b.value.map(f64::to_bits));
        assert_eq!(a.margin.map(f64::to_bits), b.margin.map(f64::to_bits));
        assert_eq!(a.elements, b.elements);
        assert_eq!(a.kind, b.kind);
    }
    assert_eq!(csv_bytes(&back), bytes);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let mut spec = ExperimentSpec::new(CodeId::Random { n: 3, k: 1, seed: 5 }, ChannelId::AmplitudeDamping);
    spec.methods = vec![Method::EigQer, Method::BlockEig(2), Method::OrderQer(vec![1])];
    spec.bounds = vec![BoundKind::Svd, BoundKind::IteratedBlock(2)];
    spec.threads = Some(1);
    let a = csv_bytes(&run_sweep(&spec).unwrap().rows);
    spec.threads = Some(4);
    let b = csv_bytes(&run_sweep(&spec).unwrap().rows);
    assert_eq!(a, b);
}

#[test]
fn chart_is_well_formed_svg() {
    let res = run_sweep(&small_spec()).unwrap();
    let svg = render_svg(&res.rows, "five_qubit & amplitude_damping");
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let lines = doc.descendants().filter(|n| n.has_tag_name("polyline")).count();
    assert_eq!(lines, 7);
}

#[test]
fn invalid_specs_are_rejected() {
    let mut spec = ExperimentSpec::new(CodeId::Steane, ChannelId::AmplitudeDamping);
    spec.methods = vec![Method::Optimal];
    assert!(spec.validate().is_err());
    spec.force_large_sdp = true;
    assert!(spec.validate().is_ok());

    let mut spec = ExperimentSpec::new(CodeId::Random { n: 3, k: 1, seed: 1 }, ChannelId::Depolarizing);
    spec.methods = vec![Method::Qec];
    assert!(spec.validate().is_err());

    let mut spec = ExperimentSpec::new(CodeId::FiveQubit, ChannelId::AmplitudeDamping);
    spec.bounds = vec![BoundKind::PauliCert];
    assert!(spec.validate().is_err());
    spec.bounds.clear();
    spec.methods = vec![Method::EigQer];
    spec.grid = vec![1.5];
    assert!(spec.validate().is_err());
    spec.grid.clear();
    assert!(run_sweep(&spec).is_err());
}

#[test]
fn labels_round_trip() {
    for s in ["baseline", "qec", "eigqer", "blockeig_m4", "orderqer_1_2", "optimal"] {
        assert_eq!(s.parse::<Method>().unwrap().to_string(), s);
    }
    for s in ["gersgorin", "svd", "iterative_lambda_max", "iterative_svd", "iterative_blocksdp_m2", "iterated_block_m8", "pauli_cert"] {
        assert_eq!(s.parse::<BoundKind>().unwrap().to_string(), s);
    }
    for s in ["five_qubit", "steane", "shor", "random:6:2:7"] {
        assert_eq!(s.parse::<CodeId>().unwrap().to_string(), s);
    }
    assert!("blockeig_mx".parse::<Method>().is_err());
    assert!("random:6:2".parse::<CodeId>().is_err());
    let ch: ChannelId = "pure_state_rotation".parse().unwrap();
    assert_eq!(ch.to_string().parse::<ChannelId>().unwrap(), ch);
}

#[test]
fn soundness_check_flags_low_bounds() {
    let mut res = run_sweep(&small_spec()).unwrap();
    let i = res.rows.iter().position(|r| r.method == "gersgorin" && r.param_value == 0.1).unwrap();
    res.rows[i].value = Some(0.5);
    let v = soundness_violations(&res.rows, SOUNDNESS_SLACK);
    assert!(v.iter().any(|m| m.contains("gersgorin")));
}

#[test]
fn pauli_certificate_sweep_has_zero_gap() {
    let mut spec = ExperimentSpec::new(CodeId::FiveQubit, ChannelId::Depolarizing);
    spec.grid = vec![0.01, 0.1];
    spec.methods = vec![Method::EigQer];
    spec.bounds = vec![BoundKind::PauliCert];
    let res = run_sweep(&spec).unwrap();
    for &p in &spec.grid {
        assert!((value(&res.rows, "eigqer", p) - value(&res.rows, "pauli_cert", p)).abs() < 1e-8);
    }
}
