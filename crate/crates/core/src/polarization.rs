//! From a Liouville form vanishing on L to the Liouville vector field, the
//! {0,1} eigenspace split of its Jacobian along L, the conformal contraction
//! of the flow, and verification of a declared transverse polarisation.

use crate::complex::FibrePoint;
use crate::error::{Error, Result};
use crate::forms::{FieldForm, VerticalField};
use crate::linalg::{shifted_null_space, small_det, small_solve, SmallMat};
use crate::models::{tangent_grid, LagrangianSubbundle, SymplecticBundleModel};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

pub struct LiouvilleField {
    pub field: VerticalField,
    pub solve_residual: f64,
    pub on_l_residual: f64,
}

fn transpose(dim: usize, m: &SmallMat) -> SmallMat {
    let mut t = crate::linalg::zero_mat();
    for i in 0..dim {
        for j in 0..dim {
            t[i][j] = m[j][i];
        }
    }
    t
}

/// Solve `omega(Y, .) = lambda` pointwise; `Y` vanishes where `lambda` does.
pub fn liouville_field(
    model: &SymplecticBundleModel,
    l: &LagrangianSubbundle,
    lambda: &FieldForm,
) -> Result<LiouvilleField> {
    let dim = model.fibre_dim();
    // eager nondegeneracy sweep
    for &b in model.base.samples() {
        for x in crate::models::probe_points(&model.complex, 3) {
            let det = small_det(dim, model.omega_matrix(b, &x));
            if det.abs() <= 1e-10 {
                return Err(Error::SingularOmega { det });
            }
        }
    }
    let m = model.clone();
    let lam = lambda.clone();
    let eval = Arc::new(move |b: f64, x: &[f64]| -> FibrePoint {
        let mt = transpose(m.fibre_dim(), &m.omega_matrix(b, x));
        let lv = lam.components(b, x);
        let mut rhs = [0.0; crate::complex::MAX_DIM];
        rhs[..m.fibre_dim()].copy_from_slice(&lv[..m.fibre_dim()]);
        let y = small_solve(m.fibre_dim(), mt, rhs).expect("omega nondegenerate on the model");
        y[..m.fibre_dim()].iter().copied().collect()
    });
    let field = VerticalField::new(dim, model.domain(), eval);

    let mut solve_residual: f64 = 0.0;
    for (b, x) in crate::poincare::tubular_probes(model, l, 5, 0.7) {
        let y = field.at(b, &x);
        let mt = transpose(dim, &model.omega_matrix(b, &x));
        let lv = lambda.components(b, &x);
        for j in 0..dim {
            let mut acc = 0.0;
            for i in 0..dim {
                acc += mt[j][i] * y[i];
            }
            solve_residual = solve_residual.max((acc - lv[j]).abs());
        }
    }
    let mut on_l_residual: f64 = 0.0;
    for &b in model.base.samples() {
        for theta in tangent_grid(l.tangent_dim, 8) {
            let x = l.embed(&model.split, b, &theta);
            let y = field.at(b, &x);
            on_l_residual = on_l_residual.max(y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
    }
    Ok(LiouvilleField { field, solve_residual, on_l_residual })
}

/// Eigen-decomposition of the Liouville field Jacobian at a point of L.
pub struct EigenSplit {
    pub point: FibrePoint,
    pub jacobian: DMatrix<f64>,
    /// Complex eigenvalues (re, im), all expected within tolerance of 0 or 1.
    pub eigenvalues: Vec<(f64, f64)>,
    pub e0: Vec<DVector<f64>>,
    pub e1: Vec<DVector<f64>>,
    /// sup |J v| over unit v in E0.
    pub e0_residual: f64,
    /// sup |J w - w| over unit w in E1.
    pub e1_residual: f64,
    /// sup |omega(w1, w2)| over the E1 basis.
    pub isotropy_defect: f64,
}

pub fn jacobian_split(
    model: &SymplecticBundleModel,
    l: &LagrangianSubbundle,
    y: &VerticalField,
    b: f64,
    theta: &[f64],
) -> Result<EigenSplit> {
    let dim = model.fibre_dim();
    let x = l.embed(&model.split, b, theta);
    let off = l.normal_offset(&model.split, b, &x);
    let off_sup = off.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if off_sup > 1e-8 {
        return Err(Error::OutsideTubularDomain { offset: off_sup, radius: 0.0 });
    }

    let jt = y.jacobian_at(b, &x);
    let j = DMatrix::from_fn(dim, dim, |r, c| jt[r][c]);
    let eig = j.complex_eigenvalues();
    let mut eigenvalues = Vec::with_capacity(dim);
    for ev in eig.iter() {
        let near0 = (ev.re).hypot(ev.im);
        let near1 = (ev.re - 1.0).hypot(ev.im);
        if near0.min(near1) > 1e-3 {
            return Err(Error::EigenvalueOutsideClusters { re: ev.re, im: ev.im });
        }
        eigenvalues.push((ev.re, ev.im));
    }

    let e0 = shifted_null_space(&j, 0.0, 1e-6);
    let e1 = shifted_null_space(&j, 1.0, 1e-6);
    let n_half = dim / 2;
    if e0.len() != n_half || e1.len() != n_half {
        return Err(Error::PolarizationRejected {
            check: "eigenspace dimensions",
            residual: e0.len().max(e1.len()) as f64,
            bound: n_half as f64,
        });
    }

    let mut e0_residual: f64 = 0.0;
    for v in &e0 {
        e0_residual = e0_residual.max((&j * v).amax());
    }
    let mut e1_residual: f64 = 0.0;
    for w in &e1 {
        e1_residual = e1_residual.max((&j * w - w).amax());
    }
    let mut isotropy_defect: f64 = 0.0;
    for a in 0..e1.len() {
        for c in a + 1..e1.len() {
            let mut acc = 0.0;
            let m = model.omega_matrix(b, &x);
            for i in 0..dim {
                for jx in 0..dim {
                    acc += e1[a][i] * m[i][jx] * e1[c][jx];
                }
            }
            isotropy_defect = isotropy_defect.max(acc.abs());
        }
    }

    Ok(EigenSplit {
        point: x,
        jacobian: j,
        eigenvalues,
        e0,
        e1,
        e0_residual,
        e1_residual,
        isotropy_defect,
    })
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ConformalRow {
    pub t: f64,
    /// sup over basis pairs of |pullback omega - e^{-t} omega|.
    pub pullback_residual: f64,
    /// sup over transported leaf vectors of | |Z(t)|/|Z(0)| - e^{-t} |.
    pub contraction_error: f64,
    /// largest |omega(Z1(t), Z2(t))| over transported leaf pairs.
    pub pushed_pair_value: f64,
    /// e^{-2t} decay envelope for the pushed pairs.
    pub pushed_pair_bound: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ConformalReport {
    pub rows: Vec<ConformalRow>,
    pub sup_pullback_residual: f64,
}

/// RK4 flow of `-Y` from `x0` with transported frame vectors; verifies the
/// conformal identity `(phi^{-t})^* omega = e^{-t} omega` and the leafwise
/// contraction underlying the O(e^{-2t}) bound.
pub fn conformal_check(
    model: &SymplecticBundleModel,
    y: &VerticalField,
    b: f64,
    x0: &[f64],
    t_max: f64,
    h: f64,
    checkpoints: usize,
) -> Result<ConformalReport> {
    let dim = model.fibre_dim();
    // canonical frame plus leaf directions at x0
    let mut frame: Vec<FibrePoint> = (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let leaf_dim = model.polarization.leaf_dim;
    let mut s0 = FibrePoint::new();
    for _ in 0..leaf_dim {
        s0.push(0.0);
    }
    let leaf0 = (model.polarization.leaf)(b, x0, &s0);
    for a in 0..leaf_dim {
        let hh = 1e-3;
        let mut sp = s0.clone();
        sp[a] = hh;
        let p = (model.polarization.leaf)(b, x0, &sp);
        frame.push(
            p.iter()
                .zip(leaf0.iter())
                .map(|(u, v)| (u - v) / hh)
                .collect(),
        );
    }

    let omega0: Vec<Vec<f64>> = (0..frame.len())
        .map(|i| {
            (0..frame.len())
                .map(|j| model.omega_eval(b, x0, &frame[i], &frame[j]))
                .collect()
        })
        .collect();
    let leaf_norm0: Vec<f64> = (dim..frame.len())
        .map(|i| frame[i].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();

    let steps = ((t_max / h).ceil() as usize).max(1);
    let dt = t_max / steps as f64;
    let report_every = (steps / checkpoints.max(1)).max(1);

    let mut x: FibrePoint = x0.iter().copied().collect();
    let mut vs = frame.clone();
    let mut rows = Vec::new();
    let mut sup: f64 = 0.0;

    let deriv = |x: &FibrePoint, vs: &[FibrePoint]| -> (FibrePoint, Vec<FibrePoint>) {
        let yx = y.at(b, x);
        let dx: FibrePoint = yx.iter().map(|v| -v).collect();
        let j = y.jacobian_at(b, x);
        let dvs = vs
            .iter()
            .map(|v| {
                (0..dim)
                    .map(|i| -(0..dim).map(|a| j[i][a] * v[a]).sum::<f64>())
                    .collect()
            })
            .collect();
        (dx, dvs)
    };

    let mut record = |t: f64, x: &FibrePoint, vs: &[FibrePoint], sup: &mut f64| {
        let decay = (-t).exp();
        let mut pullback_residual: f64 = 0.0;
        for i in 0..dim {
            for j in i + 1..dim {
                let w = model.omega_eval(b, x, &vs[i], &vs[j]);
                pullback_residual = pullback_residual.max((w - decay * omega0[i][j]).abs());
            }
        }
        let mut contraction_error: f64 = 0.0;
        let mut pushed_pair_value: f64 = 0.0;
        for (a, i) in (dim..vs.len()).enumerate() {
            let n = vs[i].iter().map(|v| v * v).sum::<f64>().sqrt();
            contraction_error = contraction_error.max((n / leaf_norm0[a] - decay).abs());
            for j in i + 1..vs.len() {
                pushed_pair_value =
                    pushed_pair_value.max(model.omega_eval(b, x, &vs[i], &vs[j]).abs());
            }
        }
        let frame_sup = leaf_norm0.iter().fold(1.0f64, |m, v| m.max(*v));
        rows.push(ConformalRow {
            t,
            pullback_residual,
            contraction_error,
            pushed_pair_value,
            pushed_pair_bound: (-2.0 * t).exp() * 2.0 * frame_sup * frame_sup,
        });
        *sup = sup.max(pullback_residual);
    };

    record(0.0, &x, &vs, &mut sup);
    for step in 1..=steps {
        // RK4 on the augmented state (x, frame)
        let (k1x, k1v) = deriv(&x, &vs);
        let x2: FibrePoint = x.iter().zip(&k1x).map(|(a, k)| a + 0.5 * dt * k).collect();
        let v2: Vec<FibrePoint> = vs
            .iter()
            .zip(&k1v)
            .map(|(v, k)| v.iter().zip(k).map(|(a, kk)| a + 0.5 * dt * kk).collect())
            .collect();
        let (k2x, k2v) = deriv(&x2, &v2);
        let x3: FibrePoint = x.iter().zip(&k2x).map(|(a, k)| a + 0.5 * dt * k).collect();
        let v3: Vec<FibrePoint> = vs
            .iter()
            .zip(&k2v)
            .map(|(v, k)| v.iter().zip(k).map(|(a, kk)| a + 0.5 * dt * kk).collect())
            .collect();
        let (k3x, k3v) = deriv(&x3, &v3);
        let x4: FibrePoint = x.iter().zip(&k3x).map(|(a, k)| a + dt * k).collect();
        let v4: Vec<FibrePoint> = vs
            .iter()
            .zip(&k3v)
            .map(|(v, k)| v.iter().zip(k).map(|(a, kk)| a + dt * kk).collect())
            .collect();
        let (k4x, k4v) = deriv(&x4, &v4);
        for i in 0..dim {
            x[i] += dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
        }
        for (vi, (((a, b2), c), d)) in vs
            .iter_mut()
            .zip(k1v.iter().zip(k2v.iter()).zip(k3v.iter()).zip(k4v.iter()))
        {
            for i in 0..dim {
                vi[i] += dt / 6.0 * (a[i] + 2.0 * b2[i] + 2.0 * c[i] + d[i]);
            }
        }
        if !model.domain().contains(&x) {
            return Err(Error::OutsideTubularDomain {
                offset: f64::INFINITY,
                radius: model.tubular_radius,
            });
        }
        if step % report_every == 0 || step == steps {
            record(step as f64 * dt, &x, &vs, &mut sup);
        }
    }

    Ok(ConformalReport { rows, sup_pullback_residual: sup })
}

/// Residuals of the four leaf checks at one point of L.
#[derive(Clone, Debug, serde::Serialize)]
pub struct LeafCheck {
    pub ker_lambda: f64,
    pub lagrangian: f64,
    pub y_tangency: f64,
    pub e1_match: f64,
}

const KER_LAMBDA_BOUND: f64 = 1e-8;
const LEAF_LAGRANGIAN_BOUND: f64 = 1e-8;
const Y_TANGENCY_BOUND: f64 = 1e-6;
const E1_MATCH_BOUND: f64 = 1e-6;

/// Verify the declared polarisation through the leaf through `x0 = L(theta)`:
/// tangent to `ker lambda`, Lagrangian, Y-invariant, and matching E1 at L.
/// Verticality holds by construction (leaves are fibre subsets).
pub fn transverse_leaf(
    model: &SymplecticBundleModel,
    l: &LagrangianSubbundle,
    lambda: &FieldForm,
    y: &VerticalField,
    b: f64,
    theta: &[f64],
) -> Result<LeafCheck> {
    let dim = model.fibre_dim();
    let leaf_dim = model.polarization.leaf_dim;
    let x0 = l.embed(&model.split, b, theta);

    // sample leaf parameters inside the tubular radius
    let spread = 0.6 * model.tubular_radius;
    let mut params: Vec<FibrePoint> = vec![];
    let offsets = [0.0, 0.5 * spread, -spread];
    for &u in &offsets {
        for &v in &offsets[..if leaf_dim > 1 { 3 } else { 1 }] {
            let mut s = FibrePoint::new();
            s.push(u);
            if leaf_dim > 1 {
                s.push(v);
                for _ in 2..leaf_dim {
                    s.push(0.0);
                }
            }
            params.push(s);
        }
    }

    let tangents_at = |s: &FibrePoint| -> Vec<FibrePoint> {
        let hh = 1e-3;
        let p0 = (model.polarization.leaf)(b, &x0, s);
        (0..leaf_dim)
            .map(|a| {
                let mut sp = s.clone();
                sp[a] += hh;
                let p = (model.polarization.leaf)(b, &x0, &sp);
                p.iter().zip(p0.iter()).map(|(u, v)| (u - v) / hh).collect()
            })
            .collect()
    };

    let mut ker_lambda: f64 = 0.0;
    let mut lagrangian: f64 = 0.0;
    let mut y_tangency: f64 = 0.0;
    for s in &params {
        let p = (model.polarization.leaf)(b, &x0, s);
        let tangents = tangents_at(s);
        for t in &tangents {
            let mut acc = 0.0;
            let lv = lambda.components(b, &p);
            for i in 0..dim {
                acc += lv[i] * t[i];
            }
            ker_lambda = ker_lambda.max(acc.abs());
        }
        for i in 0..tangents.len() {
            for j in i + 1..tangents.len() {
                lagrangian =
                    lagrangian.max(model.omega_eval(b, &p, &tangents[i], &tangents[j]).abs());
            }
        }
        // least-squares fit of Y(p) inside the leaf tangent span
        let t_mat = DMatrix::from_fn(dim, leaf_dim, |r, c| tangents[c][r]);
        let yv = y.at(b, &p);
        let rhs = DVector::from_fn(dim, |r, _| yv[r]);
        let svd = t_mat.clone().svd(true, true);
        let coef = svd
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::LinearSolve(e.to_string()))?;
        let res = (&t_mat * coef - rhs).amax();
        y_tangency = y_tangency.max(res);
    }

    // E1 of the Jacobian split against the leaf tangents at L
    let split = jacobian_split(model, l, y, b, theta)?;
    let tangents0 = tangents_at(&params[0]);
    let mut e1_match: f64 = 0.0;
    let basis = DMatrix::from_fn(dim, split.e1.len(), |r, c| split.e1[c][r]);
    let qr = basis.qr();
    let q = qr.q();
    for t in &tangents0 {
        let tv = DVector::from_fn(dim, |r, _| t[r]);
        let norm = tv.norm();
        let proj = &q * (q.transpose() * &tv);
        e1_match = e1_match.max((tv - proj).amax() / norm.max(1e-300));
    }

    let check = LeafCheck { ker_lambda, lagrangian, y_tangency, e1_match };
    for (name, value, bound) in [
        ("leaf in ker lambda", ker_lambda, KER_LAMBDA_BOUND),
        ("leaf Lagrangian", lagrangian, LEAF_LAGRANGIAN_BOUND),
        ("Y tangent to leaf", y_tangency, Y_TANGENCY_BOUND),
        ("leaf tangent matches E1", e1_match, E1_MATCH_BOUND),
    ] {
        if value > bound {
            return Err(Error::PolarizationRejected {
                check: name,
                residual: value,
                bound,
            });
        }
    }
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelParams, PolKind};
    use crate::poincare::{leaf_retraction, linear_retraction, liouville_from_symplectic, HomotopyConfig};

    fn cylinder() -> SymplecticBundleModel {
        let p = ModelParams {
            fibre_resolution: vec![16, 9],
            ..Default::default()
        };
        SymplecticBundleModel::cylinder(&p).unwrap()
    }

    fn cylinder_liouville(m: &SymplecticBundleModel) -> (LagrangianSubbundle, FieldForm) {
        let l = LagrangianSubbundle::zero(&m.split);
        let rho = linear_retraction(m, &l);
        let rep = liouville_from_symplectic(m, &l, &rho, &HomotopyConfig::default()).unwrap();
        (l, rep.lambda)
    }

    #[test]
    fn cylinder_liouville_field_is_radial() {
        let m = cylinder();
        let (l, lambda) = cylinder_liouville(&m);
        let lf = liouville_field(&m, &l, &lambda).unwrap();
        let y = lf.field.at(0.0, &[1.3, 0.45]);
        assert!(y[0].abs() < 1e-12);
        assert!((y[1] - 0.45).abs() < 1e-10, "Y = r d/dr, got {}", y[1]);
        assert!(lf.solve_residual < 1e-9);
        assert!(lf.on_l_residual < 1e-9);
    }

    #[test]
    fn zero_liouville_form_gives_zero_field() {
        let m = cylinder();
        let l = LagrangianSubbundle::zero(&m.split);
        let lambda = FieldForm::zero(2, 1, m.domain());
        let lf = liouville_field(&m, &l, &lambda).unwrap();
        let y = lf.field.at(0.3, &[0.2, 0.7]);
        assert!(y.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn torus4_block_solve() {
        let p = ModelParams {
            fibre_resolution: vec![8, 8, 8, 8],
            tubular_radius: 1.0,
            ..Default::default()
        };
        let m = SymplecticBundleModel::torus4(&p, PolKind::Standard).unwrap();
        let l = LagrangianSubbundle::zero(&m.split);
        let rho = linear_retraction(&m, &l);
        let rep = liouville_from_symplectic(&m, &l, &rho, &HomotopyConfig::default()).unwrap();
        let lf = liouville_field(&m, &l, &rep.lambda).unwrap();
        let y = lf.field.at(0.0, &[0.4, 1.2, 0.3, -0.2]);
        assert!((y[2] - 0.3).abs() < 1e-10);
        assert!((y[3] + 0.2).abs() < 1e-10);
        assert!(y[0].abs() < 1e-12 && y[1].abs() < 1e-12);
    }

    #[test]
    fn eigen_split_on_the_cylinder() {
        let m = cylinder();
        let (l, lambda) = cylinder_liouville(&m);
        let lf = liouville_field(&m, &l, &lambda).unwrap();
        let split = jacobian_split(&m, &l, &lf.field, 0.0, &[0.8]).unwrap();
        for (re, im) in &split.eigenvalues {
            assert!(im.abs() < 1e-8);
            assert!(re.abs() < 1e-6 || (re - 1.0).abs() < 1e-6);
        }
        assert!(split.e0_residual < 1e-6);
        assert!(split.e1_residual < 1e-6);
        // E0 along theta, E1 along r
        assert!(split.e0[0][0].abs() > 0.99);
        assert!(split.e1[0][1].abs() > 0.99);
    }

    #[test]
    fn eigen_split_on_a_tilted_graph() {
        let m = cylinder();
        let l = LagrangianSubbundle::from_graph(
            1,
            1,
            Arc::new(|_, th| {
                let mut g = FibrePoint::new();
                g.push(0.2 * th[0].sin());
                g
            }),
            None,
        );
        let rho = linear_retraction(&m, &l);
        let rep = liouville_from_symplectic(&m, &l, &rho, &HomotopyConfig::default()).unwrap();
        let lf = liouville_field(&m, &l, &rep.lambda).unwrap();
        let split = jacobian_split(&m, &l, &lf.field, 0.0, &[0.9]).unwrap();
        for (re, im) in &split.eigenvalues {
            assert!(im.abs() < 1e-5);
            assert!(re.abs() < 1e-5 || (re - 1.0).abs() < 1e-5, "re = {re}");
        }
        // E0 tangent to the graph: direction (1, 0.2 cos theta)
        let g = 0.2 * f64::cos(0.9);
        let v = &split.e0[0];
        let slope = v[1] / v[0];
        assert!((slope - g).abs() < 1e-4, "slope {slope} vs {g}");
    }

    #[test]
    fn conformal_identity_along_the_flow() {
        let m = cylinder();
        let (l, lambda) = cylinder_liouville(&m);
        let lf = liouville_field(&m, &l, &lambda).unwrap();
        let rep = conformal_check(&m, &lf.field, 0.0, &[0.4, 0.5], 1.0, 1e-3, 8).unwrap();
        assert!(rep.sup_pullback_residual < 1e-4, "{}", rep.sup_pullback_residual);
        let last = rep.rows.last().unwrap();
        assert!((last.t - 1.0).abs() < 1e-12);
        assert!(last.contraction_error < 1e-6);
        assert!(last.pushed_pair_value <= last.pushed_pair_bound);
    }

    #[test]
    fn conformal_residual_is_zero_at_time_zero() {
        let m = cylinder();
        let (l, lambda) = cylinder_liouville(&m);
        let lf = liouville_field(&m, &l, &lambda).unwrap();
        let rep = conformal_check(&m, &lf.field, 0.0, &[1.0, 0.3], 0.0, 1e-3, 1).unwrap();
        assert_eq!(rep.rows[0].pullback_residual, 0.0);
    }

    #[test]
    fn standard_leaves_pass_all_checks() {
        let m = cylinder();
        let (l, lambda) = cylinder_liouville(&m);
        let lf = liouville_field(&m, &l, &lambda).unwrap();
        let check = transverse_leaf(&m, &l, &lambda, &lf.field, 0.0, &[1.7]).unwrap();
        assert!(check.ker_lambda < 1e-8);
        assert!(check.lagrangian < 1e-8);
        assert!(check.y_tangency < 1e-6);
        assert!(check.e1_match < 1e-6);
    }

    #[test]
    fn sheared_polarisation_verifies_with_its_own_liouville_form() {
        let p = ModelParams {
            fibre_resolution: vec![8, 8, 8, 8],
            tubular_radius: 1.0,
            ..Default::default()
        };
        let s = [[1.0, 1.0], [1.0, 2.0]];
        let m = SymplecticBundleModel::torus4(&p, PolKind::Sheared(s)).unwrap();
        let l = LagrangianSubbundle::zero(&m.split);
        let rho = leaf_retraction(&m);
        let rep = liouville_from_symplectic(&m, &l, &rho, &HomotopyConfig::default()).unwrap();
        assert!(rep.d_residual < 1e-6, "d lambda = omega, got {}", rep.d_residual);
        assert!(rep.on_l_residual < 1e-10);
        let lf = liouville_field(&m, &l, &rep.lambda).unwrap();
        let check = transverse_leaf(&m, &l, &rep.lambda, &lf.field, 0.0, &[0.4, 1.1]).unwrap();
        assert!(check.ker_lambda < 1e-8, "ker lambda {}", check.ker_lambda);
        assert!(check.y_tangency < 1e-6);
    }

    #[test]
    fn standard_leaves_fail_against_a_mismatched_liouville_form() {
        // lambda for the sheared polarisation does not annihilate the
        // standard leaves; the verifier must reject the pairing
        let p = ModelParams {
            fibre_resolution: vec![8, 8, 8, 8],
            tubular_radius: 1.0,
            ..Default::default()
        };
        let s = [[1.0, 1.0], [1.0, 2.0]];
        let sheared = SymplecticBundleModel::torus4(&p, PolKind::Sheared(s)).unwrap();
        let standard = SymplecticBundleModel::torus4(&p, PolKind::Standard).unwrap();
        let l = LagrangianSubbundle::zero(&sheared.split);
        let rho = leaf_retraction(&sheared);
        let rep =
            liouville_from_symplectic(&sheared, &l, &rho, &HomotopyConfig::default()).unwrap();
        let lf = liouville_field(&standard, &l, &rep.lambda).unwrap();
        match transverse_leaf(&standard, &l, &rep.lambda, &lf.field, 0.0, &[0.4, 1.1]) {
            Err(Error::PolarizationRejected { check, .. }) => {
                assert_eq!(check, "leaf in ker lambda");
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }
}
