use super::{re, CMatrix, CVector};

/// Subspace of `C^ambient` held as orthonormal basis columns.
#[derive(Clone, Debug)]
pub struct Subspace {
    ambient: usize,
    basis: CMatrix,
}

impl Subspace {
    pub fn empty(ambient: usize) -> Self {
        Subspace { ambient, basis: CMatrix::zeros(ambient, 0) }
    }

    pub fn full(ambient: usize) -> Self {
        Subspace { ambient, basis: CMatrix::identity(ambient, ambient) }
    }

    /// Orthonormalizes candidate columns with pivoted Gram–Schmidt. At each
    /// step the candidate with the largest remaining norm is taken; candidates
    /// whose remaining norm falls below `drop_tol` times their original norm
    /// are discarded.
    pub fn from_columns(ambient: usize, candidates: &CMatrix, drop_tol: f64) -> Self {
        Self::empty(ambient).extended(candidates, drop_tol)
    }

    /// Like [`Subspace::from_columns`], but candidates are first made
    /// orthogonal to the current basis. The current basis is kept as is.
    pub fn extended(&self, candidates: &CMatrix, drop_tol: f64) -> Self {
        assert_eq!(candidates.nrows(), self.ambient);
        let mut work: Vec<CVector> = (0..candidates.ncols())
            .map(|j| candidates.column(j).into_owned())
            .collect();
        let orig: Vec<f64> = work.iter().map(|v| v.norm()).collect();
        let mut cols: Vec<CVector> = (0..self.dim()).map(|j| self.basis.column(j).into_owned()).collect();
        for v in work.iter_mut() {
            for q in &cols {
                let coeff = q.dotc(v);
                *v -= q * coeff;
            }
        }
        let mut alive: Vec<bool> = orig.iter().map(|&n| n > 0.0).collect();
        loop {
            let mut best = None;
            let mut best_rel = drop_tol;
            for (j, v) in work.iter().enumerate() {
                if !alive[j] {
                    continue;
                }
                let rel = v.norm() / orig[j];
                if rel > best_rel {
                    best_rel = rel;
                    best = Some(j);
                }
            }
            let Some(j) = best else { break };
            alive[j] = false;
            let mut q = work[j].clone();
            // second pass against everything accepted so far
            for p in &cols {
                let coeff = p.dotc(&q);
                q -= p * coeff;
            }
            let n = q.norm();
            if n / orig[j] <= drop_tol {
                continue;
            }
            q /= re(n);
            for (i, v) in work.iter_mut().enumerate() {
                if alive[i] {
                    let coeff = q.dotc(v);
                    *v -= &q * coeff;
                }
            }
            cols.push(q);
        }
        let basis = if cols.is_empty() {
            CMatrix::zeros(self.ambient, 0)
        } else {
            CMatrix::from_columns(&cols)
        };
        Subspace { ambient: self.ambient, basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn projector(&self) -> CMatrix {
        &self.basis * self.basis.adjoint()
    }

    /// Component of `v` orthogonal to this subspace.
    pub fn reject(&self, v: &CVector) -> CVector {
        if self.dim() == 0 {
            return v.clone();
        }
        v - &self.basis * self.basis.ad_mul(v)
    }

    /// Orthogonal complement, spanned from the standard basis.
    pub fn complement(&self) -> Subspace {
        let all = self.extended(&CMatrix::identity(self.ambient, self.ambient), 1e-8);
        let basis = all.basis.columns(self.dim(), all.dim() - self.dim()).into_owned();
        Subspace { ambient: self.ambient, basis }
    }

    /// Direct sum with a subspace assumed orthogonal to this one.
    pub fn direct_sum(&self, other: &Subspace) -> Subspace {
        assert_eq!(self.ambient, other.ambient);
        let mut basis = CMatrix::zeros(self.ambient, self.dim() + other.dim());
        basis.columns_mut(0, self.dim()).copy_from(&self.basis);
        basis.columns_mut(self.dim(), other.dim()).copy_from(&other.basis);
        Subspace { ambient: self.ambient, basis }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opalg::{c, ONE, ZERO};

    #[test]
    fn drops_dependent_columns() {
        let cand = CMatrix::from_row_slice(3, 3, &[ONE, ONE, ZERO, ZERO, ZERO, ZERO, ZERO, ZERO, c(0.0, 2.0)]);
        let s = Subspace::from_columns(3, &cand, 1e-10);
        assert_eq!(s.dim(), 2);
        let g = s.basis().adjoint() * s.basis();
        assert!((g - CMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn complement_spans_rest() {
        let v = CMatrix::from_column_slice(4, 1, &[re(0.5), re(0.5), re(0.5), c(0.0, 0.5)]);
        let s = Subspace::from_columns(4, &v, 1e-10);
        let comp = s.complement();
        assert_eq!(comp.dim(), 3);
        let total = s.projector() + comp.projector();
        assert!((total - CMatrix::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn complement_of_coordinate_aligned_subspace() {
        let mut cand = CMatrix::zeros(6, 3);
        for (j, i) in [0, 2, 5].into_iter().enumerate() {
            cand[(i, j)] = ONE;
        }
        cand[(1, 0)] = re(1e-3);
        let s = Subspace::from_columns(6, &cand, 1e-10);
        let comp = s.complement();
        assert_eq!(comp.dim(), 3);
        let all = s.direct_sum(&comp);
        let g = all.basis().adjoint() * all.basis();
        assert!((g - CMatrix::identity(6, 6)).norm() < 1e-12);
    }

    #[test]
    fn extended_keeps_existing_basis() {
        let s = Subspace::from_columns(3, &CMatrix::from_column_slice(3, 1, &[ONE, ZERO, ZERO]), 1e-10);
        let cand = CMatrix::from_column_slice(3, 2, &[ONE, ONE, ZERO, ONE, ZERO, ZERO]);
        let t = s.extended(&cand, 1e-10);
        assert_eq!(t.dim(), 2);
        assert_eq!(t.basis().column(0), s.basis().column(0));
    }
}
