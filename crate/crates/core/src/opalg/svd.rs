use super::{CMatrix, Operator};
use crate::error::{QerError, Result};

/// Thin SVD `X = U Σ V†` with singular values in descending order.
#[derive(Clone, Debug)]
pub struct SortedSvd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v: CMatrix,
}

pub fn svd_sorted(x: &CMatrix) -> SortedSvd {
    // nalgebra's implicit QR sweep can stall on a wrong value when tiny
    // off-diagonals sit next to a zero singular value at machine-epsilon
    // tolerance; a slightly looser deflation threshold avoids it, and each
    // attempt is checked by reconstruction
    let tall = x.nrows() >= x.ncols();
    let scale = x.norm().max(f64::MIN_POSITIVE);
    let mut best: Option<(f64, SortedSvd)> = None;
    for (direct, eps) in [(tall, 1e-14), (!tall, 1e-14), (tall, 1e-12)] {
        let Some(s) = oriented_svd(x, direct, eps) else { continue };
        let err = reconstruction_error(x, &s);
        if err <= 1e-12 * scale {
            return s;
        }
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, s));
        }
    }
    best.expect("at least one SVD attempt converges").1
}

fn oriented_svd(x: &CMatrix, direct: bool, eps: f64) -> Option<SortedSvd> {
    let m = if direct { x.clone() } else { x.adjoint() };
    let svd = m.try_svd(true, true, eps, 0)?;
    let u = svd.u?;
    let v_t = svd.v_t?;
    let r = svd.singular_values.len();
    let mut order: Vec<usize> = (0..r).collect();
    // stable sort keeps the routine's order among ties
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let left = CMatrix::from_fn(u.nrows(), r, |i, j| u[(i, order[j])]);
    let right = CMatrix::from_fn(v_t.ncols(), r, |i, j| v_t[(order[j], i)].conj());
    Some(if direct {
        SortedSvd { u: left, sigma, v: right }
    } else {
        SortedSvd { u: right, sigma, v: left }
    })
}

fn reconstruction_error(x: &CMatrix, s: &SortedSvd) -> f64 {
    let mut us = s.u.clone();
    for (j, &sv) in s.sigma.iter().enumerate() {
        us.column_mut(j).scale_mut(sv);
    }
    (x - us * s.v.adjoint()).norm()
}

/// Rank-`d` partial isometry nearest to `X` in Hilbert–Schmidt norm:
/// `R = U_d V_d†` from the leading `d` singular pairs.
pub fn closest_isometry(x: &Operator, d: usize) -> Result<Operator> {
    let max_rank = x.rows().min(x.cols());
    if d == 0 || d > max_rank {
        return Err(QerError::Parameter(format!(
            "target rank {d} outside 1..={max_rank}"
        )));
    }
    let s = svd_sorted(x.matrix());
    let r = s.u.columns(0, d) * s.v.columns(0, d).adjoint();
    Ok(Operator::new(r))
}
