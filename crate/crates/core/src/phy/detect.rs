//! Joint detection of one QAM symbol per user from a single channel use.
//!
//! All detectors work with the effective columns `a_k = √ρ_k γ_k h_k`, so that
//! a candidate is a vector of odd-integer QAM levels and the received point is
//! `y = Σ_k a_k x_k + w`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use super::qam::QamSpec;
use crate::{CMatrix, Error, Result, C64};

/// Diagonal magnitude of `R` below which the real QR is treated as singular.
pub const RANK_TOL: f64 = 1e-10;

const LATTICE_BOUND: i32 = (1 << 30) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphereMode {
    /// Enumeration restricted to the QAM alphabet; equals exhaustive ML.
    Constellation,
    /// Closest point of the unbounded odd-integer lattice, clamped afterwards.
    NaiveLattice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontEnd {
    Zf,
    Mmse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SicOrdering {
    Natural,
    VBlast,
}

/// Per-user symbol indices plus the number of search-tree nodes visited.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Detection {
    pub indices: Vec<usize>,
    pub visited: u64,
}

struct RealQr {
    /// `Qᵀ`, 2K × 2M.
    qt: DMatrix<f64>,
    /// Upper-triangular `R`, 2K × 2K.
    r: DMatrix<f64>,
}

/// Detector for a fixed channel; the QR factorization is computed once and
/// reused for every channel use of the slot.
pub struct JointDetector {
    m: usize,
    specs: Vec<QamSpec>,
    cols: Vec<Vec<C64>>,
    qr: Option<RealQr>,
    col_energy: f64,
}

impl JointDetector {
    /// `h` is M × K (one antenna per user); `rho` and `specs` have one entry per user.
    pub fn new(h: &CMatrix, rho: &[f64], specs: &[QamSpec]) -> Result<Self> {
        let (m, k) = h.shape();
        if rho.len() != k {
            return Err(Error::dim("JointDetector rho", k, rho.len()));
        }
        if specs.len() != k {
            return Err(Error::dim("JointDetector specs", k, specs.len()));
        }
        if k == 0 || m == 0 {
            return Err(Error::Config("detector needs at least one user and antenna".into()));
        }
        let cols: Vec<Vec<C64>> = (0..k)
            .map(|u| {
                let s = rho[u].sqrt() * specs[u].gamma;
                (0..m).map(|i| h[(i, u)] * s).collect()
            })
            .collect();
        let col_energy = cols
            .iter()
            .zip(specs)
            .map(|(c, sp)| {
                let l = sp.max_level() as f64;
                2.0 * l * l * c.iter().map(|z| z.norm_sqr()).sum::<f64>()
            })
            .sum();
        let qr = real_qr(&cols, m);
        Ok(JointDetector {
            m,
            specs: specs.to_vec(),
            cols,
            qr,
            col_energy,
        })
    }

    pub fn users(&self) -> usize {
        self.specs.len()
    }

    pub fn specs(&self) -> &[QamSpec] {
        &self.specs
    }

    /// True when the real QR has a diagonal entry below [`RANK_TOL`].
    pub fn is_rank_deficient(&self) -> bool {
        self.qr.is_none()
    }

    /// `‖y − Σ_k a_k x_k‖²` for the candidate with the given symbol indices.
    pub fn metric(&self, y: &[C64], indices: &[usize]) -> f64 {
        let mut r = y.to_vec();
        for (u, &idx) in indices.iter().enumerate() {
            let p = self.specs[u].lattice_point(idx);
            for (ri, a) in r.iter_mut().zip(&self.cols[u]) {
                *ri -= *a * p;
            }
        }
        r.iter().map(|z| z.norm_sqr()).sum()
    }

    fn check_len(&self, y: &[C64]) -> Result<()> {
        if y.len() != self.m {
            return Err(Error::dim("received vector", self.m, y.len()));
        }
        Ok(())
    }

    /// Exhaustive ML over all candidates, scanned in lexicographic index order
    /// (user 0 most significant); the first minimizer wins ties.
    pub fn exhaustive(&self, y: &[C64]) -> Result<Detection> {
        self.check_len(y)?;
        let k = self.users();
        let m = self.m;
        let contrib: Vec<Vec<C64>> = (0..k)
            .map(|u| {
                let spec = &self.specs[u];
                let mut v = Vec::with_capacity(spec.size() * m);
                for s in 0..spec.size() {
                    let p = spec.lattice_point(s);
                    v.extend(self.cols[u].iter().map(|a| *a * p));
                }
                v
            })
            .collect();
        let mut digits = vec![0usize; k];
        let mut best_digits = digits.clone();
        let mut res = vec![C64::new(0.0, 0.0); (k + 1) * m];
        res[..m].copy_from_slice(y);
        let mut best = f64::INFINITY;
        let mut visited = 0u64;
        let mut from = 0;
        loop {
            for u in from..k {
                let (prev, next) = res.split_at_mut((u + 1) * m);
                let prev = &prev[u * m..];
                let c = &contrib[u][digits[u] * m..(digits[u] + 1) * m];
                for i in 0..m {
                    next[i] = prev[i] - c[i];
                }
            }
            visited += 1;
            let metric: f64 = res[k * m..].iter().map(|z| z.norm_sqr()).sum();
            if metric < best {
                best = metric;
                best_digits.copy_from_slice(&digits);
            }
            let mut u = k;
            loop {
                if u == 0 {
                    return Ok(Detection {
                        indices: best_digits,
                        visited,
                    });
                }
                u -= 1;
                digits[u] += 1;
                if digits[u] < self.specs[u].size() {
                    break;
                }
                digits[u] = 0;
            }
            from = u;
        }
    }

    /// Schnorr–Euchner sphere decoding with an infinite initial radius.
    ///
    /// In constellation mode every leaf within a relative slack of the best
    /// is re-scored with [`JointDetector::metric`], so the result, tie rule
    /// included, is that of [`JointDetector::exhaustive`]. A rank-deficient
    /// channel falls back to exhaustive search in constellation mode and is
    /// an error in lattice mode.
    pub fn sphere(&self, y: &[C64], mode: SphereMode) -> Result<Detection> {
        self.check_len(y)?;
        let qr = match (&self.qr, mode) {
            (Some(qr), _) => qr,
            (None, SphereMode::Constellation) => return self.exhaustive(y),
            (None, SphereMode::NaiveLattice) => {
                return Err(Error::RankDeficient(
                    "effective channel has an R diagonal below 1e-10".into(),
                ))
            }
        };
        let k = self.users();
        let n = 2 * k;
        let yr = DVector::from_iterator(
            2 * self.m,
            y.iter().map(|z| z.re).chain(y.iter().map(|z| z.im)),
        );
        let z = &qr.qt * yr;
        let bound: Vec<i32> = (0..n)
            .map(|d| match mode {
                SphereMode::Constellation => self.specs[d % k].max_level(),
                SphereMode::NaiveLattice => LATTICE_BOUND,
            })
            .collect();
        let abs_tol = 1e-10 * (y.iter().map(|v| v.norm_sqr()).sum::<f64>() + self.col_energy);

        let mut x = vec![0i32; n];
        let mut up = vec![0i32; n];
        let mut down = vec![0i32; n];
        let mut center = vec![0f64; n];
        let mut partial = vec![0f64; n + 1];
        let mut radius = f64::INFINITY;
        let mut best = f64::INFINITY;
        let mut leaves: Vec<(f64, Vec<i32>)> = Vec::new();
        let mut visited = 0u64;

        let r = &qr.r;
        let init = |d: usize, x: &[i32], center: &mut [f64], up: &mut [i32], down: &mut [i32]| {
            let mut acc = z[d];
            for j in d + 1..n {
                acc -= r[(d, j)] * x[j] as f64;
            }
            let c = acc / r[(d, d)];
            center[d] = c;
            let j = ((c - 1.0) / 2.0).round().clamp(-1e9, 1e9);
            let o = (2.0 * j + 1.0) as i64;
            let o = o.clamp(-(bound[d] as i64), bound[d] as i64) as i32;
            up[d] = o;
            down[d] = o - 2;
        };

        let mut d = n - 1;
        init(d, &x, &mut center, &mut up, &mut down);
        loop {
            let c = center[d];
            let can_up = up[d] <= bound[d];
            let can_down = down[d] >= -bound[d];
            let v = match (can_up, can_down) {
                (false, false) => None,
                (true, false) => Some(true),
                (false, true) => Some(false),
                (true, true) => Some((up[d] as f64 - c).abs() <= (c - down[d] as f64).abs()),
            };
            let v = match v {
                None => None,
                Some(true) => {
                    up[d] += 2;
                    Some(up[d] - 2)
                }
                Some(false) => {
                    down[d] -= 2;
                    Some(down[d] + 2)
                }
            };
            let mut ascend = v.is_none();
            if let Some(v) = v {
                visited += 1;
                let diff = r[(d, d)] * (v as f64 - c);
                let pd = partial[d + 1] + diff * diff;
                if pd > radius {
                    ascend = true;
                } else {
                    x[d] = v;
                    if d == 0 {
                        if pd < best {
                            best = pd;
                            radius = best * (1.0 + 1e-9) + abs_tol;
                        }
                        leaves.push((pd, x.clone()));
                    } else {
                        partial[d] = pd;
                        d -= 1;
                        init(d, &x, &mut center, &mut up, &mut down);
                    }
                }
            }
            if ascend {
                if d == n - 1 {
                    break;
                }
                d += 1;
            }
        }

        let to_indices = |x: &[i32]| -> Vec<usize> {
            (0..k)
                .map(|u| self.specs[u].index_of_levels(x[u], x[k + u]))
                .collect()
        };
        let indices = match mode {
            SphereMode::NaiveLattice => {
                let (_, xb) = leaves
                    .iter()
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .expect("the Babai point is always a leaf");
                to_indices(xb)
            }
            SphereMode::Constellation => {
                let mut winner: Option<(f64, Vec<usize>)> = None;
                for (pd, xl) in &leaves {
                    if *pd > radius {
                        continue;
                    }
                    let idx = to_indices(xl);
                    let metric = self.metric(y, &idx);
                    let better = match &winner {
                        None => true,
                        Some((bm, bi)) => metric < *bm || (metric == *bm && idx < *bi),
                    };
                    if better {
                        winner = Some((metric, idx));
                    }
                }
                winner.expect("constellation search visits at least one leaf").1
            }
        };
        Ok(Detection { indices, visited })
    }
}

/// Real-valued QR of the 2M × 2K matrix `[Re A, −Im A; Im A, Re A]`, with
/// real dimension `u` the I part and `K + u` the Q part of user `u`.
fn real_qr(cols: &[Vec<C64>], m: usize) -> Option<RealQr> {
    let k = cols.len();
    if m < k {
        return None;
    }
    let b = DMatrix::from_fn(2 * m, 2 * k, |i, j| {
        let (u, imag_part) = (j % k, j >= k);
        let a = if i < m { cols[u][i] } else { cols[u][i - m] };
        match (i < m, imag_part) {
            (true, false) => a.re,
            (false, false) => a.im,
            (true, true) => -a.im,
            (false, true) => a.re,
        }
    });
    let qr = b.qr();
    let r = qr.r();
    if (0..2 * k).any(|i| r[(i, i)].abs() < RANK_TOL || !r[(i, i)].is_finite()) {
        return None;
    }
    Some(RealQr {
        qt: qr.q().transpose(),
        r,
    })
}

/// Exhaustive joint ML with a common constellation for every user.
pub fn ml_joint_decode(y: &[C64], h: &CMatrix, rho: &[f64], spec: &QamSpec) -> Result<Vec<usize>> {
    let det = JointDetector::new(h, rho, &vec![*spec; h.ncols()])?;
    Ok(det.exhaustive(y)?.indices)
}

pub fn sphere_decode(
    y: &[C64],
    h: &CMatrix,
    rho: &[f64],
    spec: &QamSpec,
    mode: SphereMode,
) -> Result<Detection> {
    let det = JointDetector::new(h, rho, &vec![*spec; h.ncols()])?;
    det.sphere(y, mode)
}

/// Successive interference cancellation in the unit-energy symbol domain.
///
/// Each round applies the ZF or (bias-corrected) MMSE filter for the users
/// still undetected, slices one stream and cancels it. A numerically singular
/// filter marks every remaining user as an erasure, decoded as index 0.
pub fn sic_decode(
    y: &[C64],
    h: &CMatrix,
    rho: &[f64],
    specs: &[QamSpec],
    front_end: FrontEnd,
    ordering: SicOrdering,
) -> Result<Vec<usize>> {
    let (m, k) = h.shape();
    if y.len() != m {
        return Err(Error::dim("sic_decode y", m, y.len()));
    }
    if rho.len() != k || specs.len() != k {
        return Err(Error::dim("sic_decode users", k, rho.len().min(specs.len())));
    }
    let a = CMatrix::from_fn(m, k, |i, j| h[(i, j)] * rho[j].sqrt());
    let mut ycur = DVector::from_column_slice(y);
    let mut remaining: Vec<usize> = (0..k).collect();
    let mut out = vec![0usize; k];
    while !remaining.is_empty() {
        let ar = a.select_columns(remaining.iter());
        let mut g = ar.adjoint() * &ar;
        if front_end == FrontEnd::Mmse {
            for i in 0..g.nrows() {
                g[(i, i)] += C64::new(1.0, 0.0);
            }
        }
        let inv = match hermitian_inverse(&g) {
            Some(inv) => inv,
            None => break,
        };
        let pos = match ordering {
            SicOrdering::Natural => 0,
            SicOrdering::VBlast => {
                let mut p = 0;
                for i in 1..remaining.len() {
                    if inv[(i, i)].re < inv[(p, p)].re {
                        p = i;
                    }
                }
                p
            }
        };
        let user = remaining[pos];
        let w = inv.row(pos) * ar.adjoint();
        let mut est = (w * &ycur)[(0, 0)];
        if front_end == FrontEnd::Mmse {
            let gain = 1.0 - inv[(pos, pos)].re;
            if gain > 1e-12 {
                est /= gain;
            }
        }
        let idx = specs[user].slice(est);
        out[user] = idx;
        let sym = specs[user].symbol(idx);
        for i in 0..m {
            ycur[i] -= a[(i, user)] * sym;
        }
        remaining.remove(pos);
    }
    Ok(out)
}

fn hermitian_inverse(g: &CMatrix) -> Option<CMatrix> {
    let scale = (0..g.nrows()).map(|i| g[(i, i)].re).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    let chol = g.clone().cholesky()?;
    let l = chol.l_dirty();
    if (0..g.nrows()).any(|i| l[(i, i)].norm_sqr() < 1e-12 * scale) {
        return None;
    }
    let inv = chol.inverse();
    if inv.iter().all(|z: &Complex<f64>| z.re.is_finite() && z.im.is_finite()) {
        Some(inv)
    } else {
        None
    }
}
