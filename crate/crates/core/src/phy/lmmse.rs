//! Linear MMSE estimation of unit-variance analog symbols.

use crate::{CMatrix, Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct LmmseOutput {
    /// n × L estimate, one column per observation.
    pub estimate: CMatrix,
    /// Total expected squared error over all `n·L` entries.
    pub mmse_theory: f64,
}

fn effective(ha: &CMatrix, rho: &[f64]) -> Result<CMatrix> {
    let n = ha.ncols();
    let scale = match rho.len() {
        1 => vec![rho[0]; n],
        l if l == n => rho.to_vec(),
        l => return Err(Error::dim("lmmse rho", format!("1 or {n}"), l)),
    };
    if scale.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::Domain("SNR must be non-negative".into()));
    }
    Ok(CMatrix::from_fn(ha.nrows(), n, |i, j| ha[(i, j)] * scale[j].sqrt()))
}

fn gram_plus_identity(a: &CMatrix) -> CMatrix {
    let mut g = a.adjoint() * a;
    for i in 0..g.nrows() {
        g[(i, i)] += C64::new(1.0, 0.0);
    }
    g
}

/// LMMSE estimate `x̂ = (I + AᴴA)^{-1} Aᴴ y` of each column of `Ya = A X + W`
/// with `A = Ha·diag(√ρ)`, unit-variance uncorrelated `X` and CN(0, 1) noise.
///
/// `rho` holds either one SNR for every stream or one per column of `Ha`.
/// The theoretical MMSE is `L·Σ_j 1/(1 + μ_j)` over the eigenvalues `μ_j` of
/// `AᴴA`, zeros included.
pub fn lmmse_estimate(ya: &CMatrix, ha: &CMatrix, rho: &[f64]) -> Result<LmmseOutput> {
    if ya.nrows() != ha.nrows() {
        return Err(Error::dim("lmmse observation rows", ha.nrows(), ya.nrows()));
    }
    let a = effective(ha, rho)?;
    let g = gram_plus_identity(&a);
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("I + AᴴA is not positive definite".into()))?;
    let estimate = chol.solve(&(a.adjoint() * ya));
    let mu = (a.adjoint() * &a).symmetric_eigenvalues();
    let per_column: f64 = mu.iter().map(|m| 1.0 / (1.0 + m.max(0.0))).sum();
    Ok(LmmseOutput {
        estimate,
        mmse_theory: ya.ncols() as f64 * per_column,
    })
}

/// `tr[(I + AᴴA)^{-1}]`, the per-column MMSE, from an explicit inverse.
pub fn mmse_trace(ha: &CMatrix, rho: &[f64]) -> Result<f64> {
    let a = effective(ha, rho)?;
    let inv = gram_plus_identity(&a)
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("I + AᴴA is not positive definite".into()))?
        .inverse();
    Ok((0..inv.nrows()).map(|i| inv[(i, i)].re).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Purpose};

    fn random(m: usize, n: usize, idx: u64) -> CMatrix {
        let mut g = rng::stream(21, idx, Purpose::Custom(3));
        CMatrix::from_fn(m, n, |_, _| rng::complex_normal(&mut g))
    }

    #[test]
    fn zero_snr_is_prior() {
        let h = random(4, 4, 0);
        let y = random(4, 3, 1);
        let out = lmmse_estimate(&y, &h, &[0.0]).unwrap();
        assert!(out.estimate.iter().all(|z| z.norm() == 0.0));
        assert!((out.mmse_theory - 12.0).abs() < 1e-12);
    }

    #[test]
    fn identity_channel_shrinks() {
        let h = CMatrix::identity(4, 4);
        let y = random(4, 1, 2);
        let out = lmmse_estimate(&y, &h, &[9.0]).unwrap();
        for i in 0..4 {
            let want = y[(i, 0)] * (3.0 / 10.0);
            assert!((out.estimate[(i, 0)] - want).norm() < 1e-14);
        }
        assert!((out.mmse_theory - 0.4).abs() < 1e-14);
    }

    #[test]
    fn push_through_form_agrees() {
        for t in 0..20 {
            let (m, n) = [(4, 4), (2, 4), (4, 2), (3, 3)][t % 4];
            let h = random(m, n, 10 + t as u64);
            let y = random(m, 2, 50 + t as u64);
            let rho = 7.5;
            let out = lmmse_estimate(&y, &h, &[rho]).unwrap();
            let mut g = &h * h.adjoint() * C64::new(rho, 0.0);
            for i in 0..m {
                g[(i, i)] += C64::new(1.0, 0.0);
            }
            let alt = h.adjoint() * g.try_inverse().unwrap() * &y * C64::new(rho.sqrt(), 0.0);
            assert!((alt - &out.estimate).norm() < 1e-10);
        }
    }

    #[test]
    fn eigen_and_trace_routes_agree() {
        for t in 0..100 {
            let (m, n) = [(4, 4), (2, 4), (4, 2)][t % 3];
            let h = random(m, n, 200 + t as u64);
            let rho = [1.0, 10.0, 100.0, 1e4][t % 4];
            let y = random(m, 1, 0);
            let theory = lmmse_estimate(&y, &h, &[rho]).unwrap().mmse_theory;
            let trace = mmse_trace(&h, &[rho]).unwrap();
            assert!((theory - trace).abs() < 1e-10, "{theory} vs {trace}");
        }
    }

    #[test]
    fn per_stream_snr() {
        let h = CMatrix::identity(2, 2);
        let y = CMatrix::from_element(2, 1, C64::new(1.0, 0.0));
        let out = lmmse_estimate(&y, &h, &[1.0, 4.0]).unwrap();
        assert!((out.estimate[(0, 0)].re - 0.5).abs() < 1e-14);
        assert!((out.estimate[(1, 0)].re - 0.4).abs() < 1e-14);
        assert!(lmmse_estimate(&y, &h, &[1.0, 2.0, 3.0]).is_err());
    }
}
