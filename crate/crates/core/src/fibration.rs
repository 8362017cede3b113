//! The correspondence between fibrations `pi: M -> B` and subbundles of the
//! product bundle `M x B`: the graph construction, the submersion test, the
//! Lagrangian-fibration test on the kernel of `D pi`, and the bi-fibration
//! reparametrisation `Psi(alpha) = alpha o (p2 o alpha)^{-1}`.

use crate::complex::{Domain, FibreComplex, FibrePoint};
use crate::error::{Error, Result};
use crate::interp::{cubic_interp_eval, CircleLift, PeriodicSpline};
use crate::linalg::SmallMat;
use nalgebra::DMatrix;
use std::sync::Arc;

/// A smooth map from a periodic grid `M` to a base `B`, with exact or
/// finite-difference differential.
#[derive(Clone)]
pub struct FibrationMap {
    pub m_dim: usize,
    pub b_dim: usize,
    map: Arc<dyn Fn(&[f64]) -> FibrePoint + Send + Sync>,
    /// diff[row < b_dim][col < m_dim]
    diff: Option<Arc<dyn Fn(&[f64]) -> SmallMat + Send + Sync>>,
    pub fd_step: f64,
    pub domain: Domain,
}

impl FibrationMap {
    pub fn new(
        m_dim: usize,
        b_dim: usize,
        domain: Domain,
        map: Arc<dyn Fn(&[f64]) -> FibrePoint + Send + Sync>,
    ) -> Self {
        Self {
            m_dim,
            b_dim,
            map,
            diff: None,
            fd_step: crate::forms::DEFAULT_FD_STEP,
            domain,
        }
    }

    pub fn with_diff(mut self, diff: Arc<dyn Fn(&[f64]) -> SmallMat + Send + Sync>) -> Self {
        self.diff = Some(diff);
        self
    }

    pub fn apply(&self, m: &[f64]) -> FibrePoint {
        (self.map)(m)
    }

    pub fn differential(&self, m: &[f64]) -> SmallMat {
        if let Some(d) = &self.diff {
            return d(m);
        }
        let mut j = crate::linalg::zero_mat();
        for r in 0..self.b_dim {
            let comp = |x: &[f64]| (self.map)(x)[r];
            for c in 0..self.m_dim {
                j[r][c] = crate::forms::fd_partial(&comp, &self.domain, m, c, self.fd_step);
            }
        }
        j
    }
}

pub const SIGMA_MIN: f64 = 1e-6;

#[derive(Clone, Debug, serde::Serialize)]
pub struct SubmersionReport {
    pub pass: bool,
    pub min_singular_value: f64,
    /// grid points where the rank drops, with their smallest singular value
    pub failures: Vec<(Vec<f64>, f64)>,
}

/// Smallest singular value of `D pi` over the sample grid of `M`.
pub fn submersion_test(pi: &FibrationMap, grid: &FibreComplex) -> SubmersionReport {
    let mut min_sv = f64::INFINITY;
    let mut failures = Vec::new();
    let n0 = grid.cell_count(0);
    for cell in 0..n0 {
        let x = grid.cell_center(0, cell);
        let j = pi.differential(&x);
        let jm = DMatrix::from_fn(pi.b_dim, pi.m_dim, |r, c| j[r][c]);
        let sv = jm.svd(false, false).singular_values;
        let smallest = sv[sv.len() - 1];
        min_sv = min_sv.min(smallest);
        if smallest < SIGMA_MIN {
            failures.push((x.to_vec(), smallest));
        }
    }
    SubmersionReport {
        pass: failures.is_empty(),
        min_singular_value: min_sv,
        failures,
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct GraphReport {
    pub is_subbundle: bool,
    pub submersion: SubmersionReport,
    /// sample points of the fibre `pi^{-1}(b) x {b}` for the queried base point
    pub fibre_points: Vec<Vec<f64>>,
}

/// The graph `L_pi = {(m, pi(m))}` inside `M x B`, marked as a subbundle
/// exactly when the submersion test passes; reports the fibre over `b`.
pub fn graph_of(pi: &FibrationMap, grid: &FibreComplex, b: &[f64], tol: f64) -> GraphReport {
    let submersion = submersion_test(pi, grid);
    let b_domain = Domain {
        axes: (0..pi.b_dim)
            .map(|_| crate::complex::AxisDomain {
                periodic: true,
                min: 0.0,
                max: std::f64::consts::TAU,
            })
            .collect(),
    };
    let mut fibre_points = Vec::new();
    for cell in 0..grid.cell_count(0) {
        let x = grid.cell_center(0, cell);
        let val = pi.apply(&x);
        let d = b_domain.displacement(&val, b);
        if d.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= tol {
            let mut point: Vec<f64> = x.to_vec();
            point.extend_from_slice(b);
            fibre_points.push(point);
        }
    }
    GraphReport {
        is_subbundle: submersion.pass,
        submersion,
        fibre_points,
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct FibrationVerdict {
    pub lagrangian: bool,
    pub defect: f64,
    pub kernel_dim_ok: bool,
}

/// Lagrangian-fibration test: at each grid sample, a basis of `ker D pi` is
/// computed numerically and `omega` is evaluated on basis pairs.
pub fn lagrangian_fibration_test(
    omega: &dyn Fn(&[f64]) -> SmallMat,
    pi: &FibrationMap,
    grid: &FibreComplex,
) -> Result<FibrationVerdict> {
    let half = pi.m_dim / 2;
    let mut defect: f64 = 0.0;
    let mut kernel_dim_ok = true;
    for cell in 0..grid.cell_count(0) {
        let x = grid.cell_center(0, cell);
        let j = pi.differential(&x);
        let jm = DMatrix::from_fn(pi.b_dim, pi.m_dim, |r, c| j[r][c]);
        // null space of D pi through the Gram matrix: the thin SVD does not
        // expose the kernel completion for wide matrices
        let jtj = jm.transpose() * &jm;
        let eig = jtj.symmetric_eigen();
        let mut kernel: Vec<Vec<f64>> = Vec::new();
        for (i, ev) in eig.eigenvalues.iter().enumerate() {
            if ev.abs().sqrt() < SIGMA_MIN {
                kernel.push(eig.eigenvectors.column(i).iter().copied().collect());
            }
        }
        if kernel.len() != half {
            kernel_dim_ok = false;
            continue;
        }
        let m = omega(&x);
        for a in 0..kernel.len() {
            for c in a + 1..kernel.len() {
                let mut acc = 0.0;
                for i in 0..pi.m_dim {
                    for jx in 0..pi.m_dim {
                        acc += kernel[a][i] * m[i][jx] * kernel[c][jx];
                    }
                }
                defect = defect.max(acc.abs());
            }
        }
    }
    Ok(FibrationVerdict {
        lagrangian: kernel_dim_ok && defect <= 1e-8,
        defect,
        kernel_dim_ok,
    })
}

/// Standard `omega` matrix on the torus `T^{2n}` in the axis order
/// `(theta_1..theta_n, r_1..r_n)`.
pub fn standard_omega(m_dim: usize) -> SmallMat {
    let half = m_dim / 2;
    let mut m = crate::linalg::zero_mat();
    for i in 0..half {
        m[i][half + i] = 1.0;
        m[half + i][i] = -1.0;
    }
    m
}

/// Two fibrations of `N = L x L` over the circle `L` sharing the diagonal
/// section; sections of `p1` are graphs `x -> (x, g(x))`.
pub struct BiFibration {
    pub nodes: usize,
}

/// A section of `p1` stored through the lift values of `g` on the uniform
/// grid.
#[derive(Clone, Debug)]
pub struct CircleSection {
    pub lift: Vec<f64>,
}

impl CircleSection {
    pub fn identity(nodes: usize) -> Self {
        Self {
            lift: (0..nodes)
                .map(|i| std::f64::consts::TAU * i as f64 / nodes as f64)
                .collect(),
        }
    }

    pub fn from_fn(nodes: usize, g: impl Fn(f64) -> f64) -> Self {
        Self {
            lift: (0..nodes)
                .map(|i| g(std::f64::consts::TAU * i as f64 / nodes as f64))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct PsiReport {
    /// sup over nodes of |p2 o Psi(alpha) - identity|
    pub section_residual: f64,
}

/// `Psi(alpha) = alpha o (p2 o alpha)^{-1}`: stored as the node values of
/// `g^{-1}`, the section `y -> (g^{-1}(y), y)` of `p2`.
pub fn psi(bf: &BiFibration, section: &CircleSection, tol: f64) -> Result<(CircleSection, PsiReport)> {
    let n = bf.nodes;
    if section.lift.len() != n {
        return Err(Error::InvalidGrid(format!(
            "section stored on {} nodes, bi-fibration uses {n}",
            section.lift.len()
        )));
    }
    let g = CircleLift::fit(&section.lift)?;
    if !g.is_monotone(4) {
        return Err(Error::NotInvertible {
            reason: "p2 o alpha is not strictly monotone on the lift".into(),
        });
    }
    let mut inv = Vec::with_capacity(n);
    for i in 0..n {
        let y = std::f64::consts::TAU * i as f64 / n as f64;
        let x = g
            .invert(y, tol, 50)
            .map_err(|_| Error::InversionFailed { node: i, iters: 50 })?;
        inv.push(x);
    }
    // re-lift the inverse values into a monotone sequence
    let mut lift = Vec::with_capacity(n);
    let mut offset = 0.0;
    for (i, &x) in inv.iter().enumerate() {
        let mut v = x + offset;
        if i > 0 && v < lift[i - 1] {
            offset += std::f64::consts::TAU;
            v += std::f64::consts::TAU;
        }
        lift.push(v);
    }
    let out = CircleSection { lift };
    // residual of the section property p2 o Psi(alpha) = id
    let h = CircleLift::fit(&out.lift)?;
    let mut residual: f64 = 0.0;
    for i in 0..n {
        let y = std::f64::consts::TAU * i as f64 / n as f64;
        let back = g.eval(h.eval(y));
        let d = (back - y).rem_euclid(std::f64::consts::TAU);
        let d = d.min(std::f64::consts::TAU - d);
        residual = residual.max(d);
    }
    Ok((out, PsiReport { section_residual: residual }))
}

/// Round trip `Psi^{-1}(Psi(alpha))` (the same construction applied twice)
/// against the original section.
pub fn psi_round_trip(bf: &BiFibration, section: &CircleSection, tol: f64) -> Result<f64> {
    let (forward, _) = psi(bf, section, tol)?;
    let (back, _) = psi(bf, &forward, tol)?;
    let mut sup: f64 = 0.0;
    for (a, b) in section.lift.iter().zip(&back.lift) {
        let d = (a - b).rem_euclid(std::f64::consts::TAU);
        let d = d.min(std::f64::consts::TAU - d);
        sup = sup.max(d);
    }
    Ok(sup)
}

/// Graphs of sections coincide: the Hausdorff distance between the sampled
/// graphs of `alpha` and `Psi(alpha)`, computed through the interpolants.
pub fn graph_distance(section: &CircleSection, reparam: &CircleSection, probes: usize) -> Result<f64> {
    let g = CircleLift::fit(&section.lift)?;
    let h = CircleLift::fit(&reparam.lift)?;
    let mut sup: f64 = 0.0;
    for i in 0..probes {
        let x = std::f64::consts::TAU * i as f64 / probes as f64;
        // point (x, g(x)) on graph(alpha); nearest representation through
        // Psi(alpha) is (h(y), y) at y = g(x)
        let y = g.eval(x);
        let xb = h.eval(y);
        let d = (xb - x).rem_euclid(std::f64::consts::TAU);
        let d = d.min(std::f64::consts::TAU - d);
        sup = sup.max(d);
    }
    Ok(sup)
}

/// Sections of a 2-torus bi-fibration, with damped-Newton inversion through
/// bicubic periodic interpolation. Only small perturbations of the identity
/// are supported.
#[derive(Clone, Debug)]
pub struct TorusSection {
    pub res: usize,
    /// displacement field values, row-major over the res x res grid
    pub disp: Vec<[f64; 2]>,
}

impl TorusSection {
    pub fn from_fn(res: usize, g: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let h = std::f64::consts::TAU / res as f64;
        let mut disp = Vec::with_capacity(res * res);
        for i in 0..res {
            for j in 0..res {
                let v = g(i as f64 * h, j as f64 * h);
                disp.push([v[0] - i as f64 * h, v[1] - j as f64 * h]);
            }
        }
        Self { res, disp }
    }

    fn component_spline(&self, comp: usize, row: usize) -> Result<PeriodicSpline> {
        let vals: Vec<f64> = (0..self.res)
            .map(|j| self.disp[row * self.res + j][comp])
            .collect();
        PeriodicSpline::fit(&vals)
    }

    /// Bicubic evaluation of the displacement field.
    pub fn disp_at(&self, x: &[f64; 2]) -> Result<[f64; 2]> {
        let mut out = [0.0; 2];
        for comp in 0..2 {
            let col: Result<Vec<f64>> = (0..self.res)
                .map(|i| Ok(self.component_spline(comp, i)?.eval(x[1])))
                .collect();
            let s = PeriodicSpline::fit(&col?)?;
            out[comp] = s.eval(x[0]);
        }
        Ok(out)
    }

    pub fn eval(&self, x: &[f64; 2]) -> Result<[f64; 2]> {
        let d = self.disp_at(x)?;
        Ok([x[0] + d[0], x[1] + d[1]])
    }

    /// Damped Newton inversion with finite-difference jacobian.
    pub fn invert(&self, y: &[f64; 2], tol: f64, max_iter: usize) -> Result<[f64; 2]> {
        let span = std::f64::consts::TAU;
        let wrap = |v: f64| {
            let mut w = v.rem_euclid(span);
            if w > span / 2.0 {
                w -= span;
            }
            w
        };
        let mut x = [y[0], y[1]];
        let h = 1e-5;
        for _ in 0..max_iter {
            let fx = self.eval(&x)?;
            let r = [wrap(y[0] - fx[0]), wrap(y[1] - fx[1])];
            let sup = r[0].abs().max(r[1].abs());
            if sup < tol {
                return Ok([x[0].rem_euclid(span), x[1].rem_euclid(span)]);
            }
            let mut jac = crate::linalg::zero_mat();
            for c in 0..2 {
                let mut xp = x;
                xp[c] += h;
                let fp = self.eval(&xp)?;
                let mut xm = x;
                xm[c] -= h;
                let fm = self.eval(&xm)?;
                for rr in 0..2 {
                    jac[rr][c] = wrap(fp[rr] - fm[rr]) / (2.0 * h);
                }
            }
            let mut rhs = [0.0; crate::complex::MAX_DIM];
            rhs[0] = r[0];
            rhs[1] = r[1];
            let step = crate::linalg::small_solve(2, jac, rhs)?;
            // damped update
            let mut scale = 1.0;
            let norm = step[0].abs().max(step[1].abs());
            if norm > 0.5 {
                scale = 0.5 / norm;
            }
            x[0] += scale * step[0];
            x[1] += scale * step[1];
        }
        Err(Error::InversionFailed { node: 0, iters: max_iter })
    }
}

/// Interpolate a family of cochain slices in the base parameter and compare
/// with a reference at midpoints; used by smoothness checks.
pub fn family_interpolation_residual(
    coarse_samples: &[f64],
    coarse: &[Vec<f64>],
    fine_samples: &[f64],
    fine: &[Vec<f64>],
) -> f64 {
    let mut sup: f64 = 0.0;
    let dim = coarse[0].len();
    for (s, &b) in fine_samples.iter().enumerate() {
        if coarse_samples.iter().any(|&c| (c - b).abs() < 1e-14) {
            continue;
        }
        if b < coarse_samples[0] || b > *coarse_samples.last().unwrap() {
            continue;
        }
        for i in 0..dim {
            let ys: Vec<f64> = coarse.iter().map(|v| v[i]).collect();
            let interp = cubic_interp_eval(coarse_samples, &ys, b);
            sup = sup.max((interp - fine[s][i]).abs());
        }
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2_grid(n: usize) -> FibreComplex {
        FibreComplex::torus(&[n, n]).unwrap()
    }

    fn projection_theta() -> FibrationMap {
        let grid = t2_grid(8);
        FibrationMap::new(
            2,
            1,
            grid.domain(),
            Arc::new(|m: &[f64]| {
                let mut b = FibrePoint::new();
                b.push(m[0]);
                b
            }),
        )
    }

    #[test]
    fn plain_projection_is_a_subbundle() {
        let grid = t2_grid(8);
        let report = graph_of(&projection_theta(), &grid, &[1.2], 0.5);
        assert!(report.is_subbundle);
        assert!(!report.fibre_points.is_empty());
        for p in &report.fibre_points {
            assert_eq!(p.len(), 3, "(m, b) coordinates");
        }
    }

    #[test]
    fn perturbed_projection_stays_a_submersion() {
        let grid = t2_grid(32);
        let pi = FibrationMap::new(
            2,
            1,
            grid.domain(),
            Arc::new(|m: &[f64]| {
                let mut b = FibrePoint::new();
                b.push(m[0] + 0.5 * m[0].sin());
                b
            }),
        );
        let rep = submersion_test(&pi, &grid);
        assert!(rep.pass, "min sv {}", rep.min_singular_value);
        assert!(rep.min_singular_value >= 0.5 - 1e-9);
    }

    #[test]
    fn degenerate_projection_fails_at_the_fold() {
        let grid = t2_grid(32);
        let pi = FibrationMap::new(
            2,
            1,
            grid.domain(),
            Arc::new(|m: &[f64]| {
                let mut b = FibrePoint::new();
                b.push(m[0] + m[0].sin());
                b
            }),
        );
        let rep = submersion_test(&pi, &grid);
        assert!(!rep.pass);
        // derivative 1 + cos(theta) vanishes at theta = pi
        let worst = rep
            .failures
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        assert!((worst.0[0] - std::f64::consts::PI).abs() < 0.3);
    }

    #[test]
    fn t4_projection_verdicts() {
        let grid = FibreComplex::torus(&[6, 6, 6, 6]).unwrap();
        let omega = |_x: &[f64]| standard_omega(4);
        // (theta1, theta2): fibres span the r-plane, Lagrangian
        let pi1 = FibrationMap::new(
            4,
            2,
            grid.domain(),
            Arc::new(|m: &[f64]| {
                let mut b = FibrePoint::new();
                b.push(m[0]);
                b.push(m[1]);
                b
            }),
        );
        let v = lagrangian_fibration_test(&omega, &pi1, &grid).unwrap();
        assert!(v.lagrangian && v.kernel_dim_ok);
        assert!(v.defect <= 1e-10);
        // (theta1, r2): fibres span (theta2, r1), Lagrangian
        let pi2 = FibrationMap::new(
            4,
            2,
            grid.domain(),
            Arc::new(|m: &[f64]| {
                let mut b = FibrePoint::new();
                b.push(m[0]);
                b.push(m[3]);
                b
            }),
        );
        let v = lagrangian_fibration_test(&omega, &pi2, &grid).unwrap();
        assert!(v.lagrangian, "defect {}", v.defect);
        // (theta1, r1): fibres span (theta2, r2), omega = 1 on the pair
        let pi3 = FibrationMap::new(
            4,
            2,
            grid.domain(),
            Arc::new(|m: &[f64]| {
                let mut b = FibrePoint::new();
                b.push(m[0]);
                b.push(m[2]);
                b
            }),
        );
        let v = lagrangian_fibration_test(&omega, &pi3, &grid).unwrap();
        assert!(!v.lagrangian);
        assert!((v.defect - 1.0).abs() < 1e-8, "defect {}", v.defect);
    }

    #[test]
    fn psi_fixes_the_identity_section() {
        let bf = BiFibration { nodes: 64 };
        let id = CircleSection::identity(64);
        let (out, rep) = psi(&bf, &id, 1e-10).unwrap();
        assert!(rep.section_residual < 1e-12);
        for (a, b) in id.lift.iter().zip(&out.lift) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn psi_matches_the_newton_inversion_oracle() {
        let n = 256;
        let bf = BiFibration { nodes: n };
        let g = |x: f64| x + 0.1 * x.sin();
        let section = CircleSection::from_fn(n, g);
        let (out, rep) = psi(&bf, &section, 1e-10).unwrap();
        assert!(rep.section_residual < 1e-8);
        // bisection oracle for g^{ -1 } independent of splines
        for (i, &v) in out.lift.iter().enumerate().step_by(17) {
            let y = std::f64::consts::TAU * i as f64 / n as f64;
            let (mut lo, mut hi) = (y - 1.0, y + 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) < y {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let oracle = 0.5 * (lo + hi);
            let d = (v - oracle).rem_euclid(std::f64::consts::TAU);
            let d = d.min(std::f64::consts::TAU - d);
            assert!(d < 1e-7, "node {i}: {v} vs {oracle}");
        }
    }

    #[test]
    fn psi_round_trip_and_graph_preservation() {
        let n = 256;
        let bf = BiFibration { nodes: n };
        let section = CircleSection::from_fn(n, |x| x + 0.1 * x.sin());
        let trip = psi_round_trip(&bf, &section, 1e-10).unwrap();
        assert!(trip <= 1e-6, "round trip {trip}");
        let (reparam, _) = psi(&bf, &section, 1e-10).unwrap();
        let gd = graph_distance(&section, &reparam, 500).unwrap();
        assert!(gd < 1e-7, "graphs coincide, distance {gd}");
    }

    #[test]
    fn psi_rejects_non_invertible_sections() {
        let bf = BiFibration { nodes: 128 };
        let section = CircleSection::from_fn(128, |x| x + 1.2 * x.sin());
        match psi(&bf, &section, 1e-10) {
            Err(Error::NotInvertible { .. }) => {}
            other => panic!("expected NotInvertible, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn psi_round_trip_converges_at_fourth_order() {
        let mut errs = Vec::new();
        for n in [64usize, 128, 256] {
            let bf = BiFibration { nodes: n };
            let section = CircleSection::from_fn(n, |x| x + 0.3 * x.sin());
            errs.push(psi_round_trip(&bf, &section, 1e-12).unwrap());
        }
        assert!(errs[0] / errs[1] > 8.0, "{errs:?}");
        assert!(errs[1] / errs[2] > 8.0, "{errs:?}");
    }

    #[test]
    fn torus_section_inversion_small_amplitude() {
        let s = TorusSection::from_fn(24, |x, y| {
            [x + 0.05 * (x + y).sin(), y + 0.04 * x.cos()]
        });
        for &(a, b) in &[(0.3, 1.2), (4.0, 5.5), (2.2, 0.1)] {
            let y = s.eval(&[a, b]).unwrap();
            let back = s.invert(&y, 1e-9, 60).unwrap();
            let d0 = (back[0] - a).rem_euclid(std::f64::consts::TAU);
            let d0 = d0.min(std::f64::consts::TAU - d0);
            let d1 = (back[1] - b).rem_euclid(std::f64::consts::TAU);
            let d1 = d1.min(std::f64::consts::TAU - d1);
            assert!(d0 < 1e-7 && d1 < 1e-7);
        }
    }
}
