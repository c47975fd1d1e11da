use qer::opalg::{c, closest_isometry, svd_sorted, CMatrix, Operator, C64};

fn load(name: &str, rows: usize, cols: usize) -> CMatrix {
    let path = format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"));
    let txt = std::fs::read_to_string(path).unwrap();
    let v: Vec<C64> = txt
        .lines()
        .map(|l| {
            let mut it = l.split(' ').map(|x| x.parse::<f64>().unwrap());
            c(it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    CMatrix::from_column_slice(rows, cols, &v)
}

// unit vector times a unit covector with a near-zero first row
#[test]
fn wide_rank_one_partial_isometry() {
    for name in ["wide_rank_one.txt", "wide_rank_one_b.txt"] {
        check_rank_one(load(name, 2, 128));
        check_rank_one(load(name, 2, 128).adjoint());
    }
}

fn check_rank_one(r: CMatrix) {
    let s = svd_sorted(&r);
    assert!((s.sigma[0] - 1.0).abs() < 1e-12, "{:?}", s.sigma);
    assert!(s.sigma[1] < 1e-12);
    let back = s.u.column(0) * s.v.column(0).adjoint() * c(s.sigma[0], 0.0);
    assert!((back - &r).norm() < 1e-12);
    let iso = closest_isometry(&Operator::new(r.clone()), 1).unwrap();
    assert!((iso.matrix() - &r).norm() < 1e-12);
    let sp = s.v.column(0) * s.v.column(0).adjoint();
    assert!((sp - r.adjoint() * &r).norm() < 1e-12);
    assert!((iso.matrix() - &r).norm() < 1e-12);
}
