//! The family Weinstein chart: covectors on the reference subbundle flow out
//! along the polarisation leaves through commuting coordinate Hamiltonian
//! flows, giving a fibre-preserving symplectomorphism from a neighbourhood of
//! the zero section onto a tube around L. The chart classifies nearby
//! subbundles as Lagrangian through the closedness of their graph forms and
//! projects them onto Lagrangian ones through the fibred Hodge splitting.

use crate::complex::{Domain, FibrePoint};
use crate::error::{Error, Result};
use crate::forms::{CochainForm, FieldEval, FieldForm, FibredForm, FormData};
use crate::hodge::DeltaOperator;
use crate::linalg::{small_solve, zero_mat};
use crate::models::{tangent_grid, LagrangianSubbundle, SymplecticBundleModel};
use crate::polarization::{liouville_field, transverse_leaf};
use rand::{Rng, SeedableRng};
use std::sync::Arc;

#[derive(Clone, Copy, Debug)]
pub struct FlowConfig {
    /// RK4 step for the coordinate Hamiltonian flows.
    pub step: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { step: 1e-3 }
    }
}

/// Numerical family of Weinstein tubular neighbourhood charts.
#[derive(Clone)]
pub struct WeinsteinChart {
    model: SymplecticBundleModel,
    subbundle: LagrangianSubbundle,
    pub flow_step: f64,
    /// Covector sup-norm radius of the chart domain.
    pub domain_radius: f64,
    /// Non-commutativity of the coordinate flows measured at build time.
    pub commutation_defect: f64,
    /// sup of |lambda| on L measured at build time.
    pub lambda_on_l: f64,
}

/// Hamiltonian vector field of the leafwise-constant extension `f_i`, fixed
/// by `omega(X, .) = -d f_i`.
fn coordinate_field(
    model: &SymplecticBundleModel,
    i: usize,
    b: f64,
    x: &[f64],
) -> Result<[f64; crate::complex::MAX_DIM]> {
    let dim = model.fibre_dim();
    let (_, grad) = (model.polarization.extension)(b, x, i);
    let m = model.omega_matrix(b, x);
    let mut mt = zero_mat();
    for r in 0..dim {
        for c in 0..dim {
            mt[r][c] = m[c][r];
        }
    }
    let mut rhs = [0.0; crate::complex::MAX_DIM];
    for a in 0..dim {
        rhs[a] = -grad[a];
    }
    small_solve(dim, mt, rhs)
}

fn rk4_flow(
    model: &SymplecticBundleModel,
    i: usize,
    b: f64,
    mut x: FibrePoint,
    time: f64,
    h: f64,
) -> Result<FibrePoint> {
    let dim = model.fibre_dim();
    if time == 0.0 {
        return Ok(x);
    }
    let steps = ((time.abs() / h).ceil() as usize).max(1);
    let dt = time / steps as f64;
    for _ in 0..steps {
        let k1 = coordinate_field(model, i, b, &x)?;
        let mut x2 = x.clone();
        for a in 0..dim {
            x2[a] += 0.5 * dt * k1[a];
        }
        let k2 = coordinate_field(model, i, b, &x2)?;
        let mut x3 = x.clone();
        for a in 0..dim {
            x3[a] += 0.5 * dt * k2[a];
        }
        let k3 = coordinate_field(model, i, b, &x3)?;
        let mut x4 = x.clone();
        for a in 0..dim {
            x4[a] += dt * k3[a];
        }
        let k4 = coordinate_field(model, i, b, &x4)?;
        for a in 0..dim {
            x[a] += dt / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
        }
    }
    Ok(x)
}

/// Build the chart; checks that lambda vanishes on L, that the polarisation
/// verifies, and that the coordinate flows commute.
pub fn build_chart(
    model: &SymplecticBundleModel,
    l: &LagrangianSubbundle,
    lambda: &FieldForm,
    cfg: FlowConfig,
) -> Result<WeinsteinChart> {
    // lambda vanishes on L
    let mut lambda_on_l: f64 = 0.0;
    for &b in model.base.samples() {
        for theta in tangent_grid(l.tangent_dim, 8) {
            let x = l.embed(&model.split, b, &theta);
            for v in lambda.components(b, &x).iter() {
                lambda_on_l = lambda_on_l.max(v.abs());
            }
        }
    }
    if lambda_on_l > 1e-9 {
        return Err(Error::PolarizationRejected {
            check: "lambda vanishes on L",
            residual: lambda_on_l,
            bound: 1e-9,
        });
    }

    // polarisation verified at a few points of L
    let lf = liouville_field(model, l, lambda)?;
    let b0 = model.base.samples()[0];
    for theta in tangent_grid(l.tangent_dim, 2) {
        transverse_leaf(model, l, lambda, &lf.field, b0, &theta)?;
    }

    let domain_radius = 0.5 * model.tubular_radius * model.min_scale;
    let chart = WeinsteinChart {
        model: model.clone(),
        subbundle: l.clone(),
        flow_step: cfg.step,
        domain_radius,
        commutation_defect: 0.0,
        lambda_on_l,
    };

    // commutation of the coordinate flows on probe covectors
    let m_dim = l.tangent_dim;
    let mut defect: f64 = 0.0;
    if m_dim > 1 {
        let order: Vec<usize> = (0..m_dim).collect();
        let reversed: Vec<usize> = (0..m_dim).rev().collect();
        for theta in tangent_grid(m_dim, 2) {
            let p: FibrePoint = (0..m_dim)
                .map(|i| 0.6 * chart.domain_radius * if i % 2 == 0 { 1.0 } else { -0.7 })
                .collect();
            let a = chart.forward_with_order(b0, &theta, &p, &order)?;
            let c = chart.forward_with_order(b0, &theta, &p, &reversed)?;
            let disp = chart.model.domain().displacement(&a, &c);
            defect = defect.max(disp.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        if defect > 1e-5 {
            return Err(Error::NonCommutingFlows { defect });
        }
    }
    Ok(WeinsteinChart {
        commutation_defect: defect,
        ..chart
    })
}

impl WeinsteinChart {
    pub fn model(&self) -> &SymplecticBundleModel {
        &self.model
    }

    pub fn subbundle(&self) -> &LagrangianSubbundle {
        &self.subbundle
    }

    pub fn tangent_dim(&self) -> usize {
        self.subbundle.tangent_dim
    }

    fn forward_with_order(
        &self,
        b: f64,
        q: &[f64],
        p: &[f64],
        order: &[usize],
    ) -> Result<FibrePoint> {
        let mut x = self.subbundle.embed(&self.model.split, b, q);
        for &i in order {
            x = rk4_flow(&self.model, i, b, x, p[i], self.flow_step)?;
        }
        let off = self
            .subbundle
            .normal_offset(&self.model.split, b, &x)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if off > self.model.tubular_radius {
            return Err(Error::OutsideTubularDomain {
                offset: off,
                radius: self.model.tubular_radius,
            });
        }
        Ok(x)
    }

    /// Chart map: the covector `sum_i p_i dq_i` at the subbundle point over
    /// `q` flows to a fibre point. The base sample passes through untouched.
    pub fn forward(&self, b: f64, q: &[f64], p: &[f64]) -> Result<FibrePoint> {
        let order: Vec<usize> = (0..self.tangent_dim()).collect();
        self.forward_with_order(b, q, p, &order)
    }

    /// Newton inversion of the chart at a fibre point.
    pub fn inverse(&self, b: f64, y: &[f64]) -> Result<(FibrePoint, FibrePoint)> {
        let m_dim = self.tangent_dim();
        let dim = self.model.fibre_dim();
        let domain = self.model.domain();
        let mut q: FibrePoint = self.model.split.tangent.iter().map(|&a| y[a]).collect();
        let mut p: FibrePoint = (0..m_dim).map(|_| 0.0).collect();
        let h = 1e-6;
        let mut residual;
        for iter in 0..60 {
            let fx = self.forward(b, &q, &p)?;
            let r = domain.displacement(y, &fx);
            residual = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if residual < 1e-12 {
                return Ok((q, p));
            }
            // finite-difference jacobian in (q, p)
            let mut jac = zero_mat();
            for c in 0..dim {
                let (mut qp, mut pp) = (q.clone(), p.clone());
                let (mut qm, mut pm) = (q.clone(), p.clone());
                if c < m_dim {
                    qp[c] += h;
                    qm[c] -= h;
                } else {
                    pp[c - m_dim] += h;
                    pm[c - m_dim] -= h;
                }
                let fp = self.forward(b, &qp, &pp)?;
                let fm = self.forward(b, &qm, &pm)?;
                let d = domain.displacement(&fm, &fp);
                for r in 0..dim {
                    jac[r][c] = d[r] / (2.0 * h);
                }
            }
            let mut rhs = [0.0; crate::complex::MAX_DIM];
            for (a, v) in r.iter().enumerate() {
                rhs[a] = -v;
            }
            let step = small_solve(dim, jac, rhs)?;
            let mut damping = 1.0;
            for _ in 0..8 {
                let mut qn = q.clone();
                let mut pn = p.clone();
                for i in 0..m_dim {
                    qn[i] += damping * step[i];
                    pn[i] += damping * step[m_dim + i];
                }
                let fx = self.forward(b, &qn, &pn)?;
                let rn = domain.displacement(y, &fx);
                let rn_sup = rn.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if rn_sup < residual || damping < 1.0 / 128.0 {
                    q = qn;
                    p = pn;
                    break;
                }
                damping *= 0.5;
            }
            let _ = iter;
        }
        Err(Error::InversionFailed { node: 0, iters: 60 })
    }

    /// Image of the zero section against L, sup over samples and grid.
    pub fn zero_section_residual(&self) -> Result<f64> {
        let mut sup: f64 = 0.0;
        for &b in self.model.base.samples() {
            for theta in tangent_grid(self.tangent_dim(), 8) {
                let p: FibrePoint = (0..self.tangent_dim()).map(|_| 0.0).collect();
                let img = self.forward(b, &theta, &p)?;
                let l_pt = self.subbundle.embed(&self.model.split, b, &theta);
                let d = self.model.domain().displacement(&l_pt, &img);
                sup = sup.max(d.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            }
        }
        Ok(sup)
    }

    /// Symplecticity defect at random probes in the chart domain: the
    /// finite-difference pullback of omega against the canonical form.
    pub fn verify_symplectic(&self, b: f64, n_probe: usize, seed: u64) -> Result<SymplecticReport> {
        let m_dim = self.tangent_dim();
        let dim = self.model.fibre_dim();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let h = crate::forms::DEFAULT_FD_STEP;
        let mut sup: f64 = 0.0;
        for _ in 0..n_probe {
            let q: FibrePoint = (0..m_dim)
                .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                .collect();
            let p: FibrePoint = (0..m_dim)
                .map(|_| rng.gen_range(-0.8..0.8) * self.domain_radius)
                .collect();
            // finite-difference jacobian of the chart at (q, p)
            let mut jac = zero_mat();
            for c in 0..dim {
                let (mut qp, mut pp) = (q.clone(), p.clone());
                let (mut qm, mut pm) = (q.clone(), p.clone());
                if c < m_dim {
                    qp[c] += h;
                    qm[c] -= h;
                } else {
                    pp[c - m_dim] += h;
                    pm[c - m_dim] -= h;
                }
                let fp = self.forward(b, &qp, &pp)?;
                let fm = self.forward(b, &qm, &pm)?;
                let d = self.model.domain().displacement(&fm, &fp);
                for r in 0..dim {
                    jac[r][c] = d[r] / (2.0 * h);
                }
            }
            let y = self.forward(b, &q, &p)?;
            let m = self.model.omega_matrix(b, &y);
            for a in 0..dim {
                for c in 0..dim {
                    let mut pulled = 0.0;
                    for i in 0..dim {
                        for j in 0..dim {
                            pulled += jac[i][a] * m[i][j] * jac[j][c];
                        }
                    }
                    let canonical = if a < m_dim && c == m_dim + a {
                        1.0
                    } else if c < m_dim && a == m_dim + c {
                        -1.0
                    } else {
                        0.0
                    };
                    sup = sup.max((pulled - canonical).abs());
                }
            }
        }
        Ok(SymplecticReport { probes: n_probe, sup_defect: sup })
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SymplecticReport {
    pub probes: usize,
    pub sup_defect: f64,
}

/// A candidate subbundle presented as a parametrisation of its fibres over
/// the reference tangent torus.
#[derive(Clone)]
pub struct SubbundleCandidate {
    pub param: Arc<dyn Fn(f64, &[f64]) -> FibrePoint + Send + Sync>,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct RoundTripReport {
    pub sup_distance: f64,
}

/// Pull a candidate back through the chart into its graph 1-form on the
/// reference torus. Verifies the chart/section round trip on a grid first and
/// reports the base samples whose fibres exit the chart domain.
pub fn subbundle_to_form(
    chart: &WeinsteinChart,
    candidate: &SubbundleCandidate,
    base: Arc<crate::grid::BaseGrid>,
) -> Result<(FibredForm, RoundTripReport)> {
    let m_dim = chart.tangent_dim();
    let domain = chart.model().domain();

    // eager sweep: invert the candidate over a verification grid
    let mut sup_distance: f64 = 0.0;
    let mut exiting: Vec<usize> = Vec::new();
    for (s, &b) in base.samples().iter().enumerate() {
        let mut exited = false;
        for u in tangent_grid(m_dim, 6) {
            let target = (candidate.param)(b, &u);
            match chart.inverse(b, &target) {
                Ok((q, p)) => {
                    if p.iter().any(|v| v.abs() > chart.domain_radius * 1.000001) {
                        exited = true;
                        continue;
                    }
                    let back = chart.forward(b, &q, &p)?;
                    let d = domain.displacement(&target, &back);
                    sup_distance = sup_distance.max(d.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                }
                Err(Error::OutsideTubularDomain { .. }) | Err(Error::InversionFailed { .. }) => {
                    exited = true;
                }
                Err(e) => return Err(e),
            }
        }
        if exited {
            exiting.push(s);
        }
    }
    if !exiting.is_empty() {
        return Err(Error::OutOfChart { samples: exiting });
    }

    let chart_fwd = chart.clone();
    let cand = candidate.clone();
    let torus_domain = tangent_torus_domain(m_dim);
    let eval: FieldEval = Arc::new(move |b, q_target| {
        // solve q(u) = q_target for the candidate parameter u
        let mut u: FibrePoint = q_target.iter().copied().collect();
        let h = 1e-6;
        let dom = tangent_torus_domain(m_dim);
        let mut best_p: FibrePoint = (0..m_dim).map(|_| 0.0).collect();
        for _ in 0..50 {
            let y = (cand.param)(b, &u);
            let (q_u, p_u) = chart_fwd
                .inverse(b, &y)
                .expect("candidate swept in-chart by subbundle_to_form");
            best_p = p_u;
            let r = dom.displacement(&q_u, q_target);
            let sup = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if sup < 1e-10 {
                break;
            }
            let mut jac = zero_mat();
            for c in 0..m_dim {
                let mut up = u.clone();
                up[c] += h;
                let yp = (cand.param)(b, &up);
                let (qp, _) = chart_fwd
                    .inverse(b, &yp)
                    .expect("candidate swept in-chart by subbundle_to_form");
                let mut um = u.clone();
                um[c] -= h;
                let ym = (cand.param)(b, &um);
                let (qm, _) = chart_fwd
                    .inverse(b, &ym)
                    .expect("candidate swept in-chart by subbundle_to_form");
                let d = dom.displacement(&qm, &qp);
                for rr in 0..m_dim {
                    jac[rr][c] = d[rr] / (2.0 * h);
                }
            }
            let mut rhs = [0.0; crate::complex::MAX_DIM];
            rhs[..m_dim].copy_from_slice(&r[..m_dim]);
            let step = small_solve(m_dim, jac, rhs).expect("graph parametrisation regular");
            for i in 0..m_dim {
                u[i] += step[i];
            }
        }
        best_p.iter().copied().collect()
    });
    let field = FieldForm::new(m_dim, 1, torus_domain, eval);
    Ok((
        FibredForm::field(base, field),
        RoundTripReport { sup_distance },
    ))
}

fn tangent_torus_domain(m_dim: usize) -> Domain {
    Domain {
        axes: (0..m_dim)
            .map(|_| crate::complex::AxisDomain {
                periodic: true,
                min: 0.0,
                max: std::f64::consts::TAU,
            })
            .collect(),
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct LagrangianVerdict {
    pub lagrangian: bool,
    pub defect: f64,
}

/// The classifier: a graph form is Lagrangian exactly when its fibred
/// exterior derivative vanishes.
pub fn is_lagrangian(form: &FibredForm, tol: f64, probe_per_axis: usize) -> Result<LagrangianVerdict> {
    let defect = match &form.data {
        FormData::Field(f) => {
            if f.degree >= f.fibre_dim {
                0.0
            } else {
                let d = f.d()?;
                let mut sup: f64 = 0.0;
                for &b in form.base.samples() {
                    for x in tangent_grid(f.fibre_dim, probe_per_axis) {
                        for v in d.components(b, &x).iter() {
                            sup = sup.max(v.abs());
                        }
                    }
                }
                sup
            }
        }
        FormData::Cochain(c) => {
            if c.degree >= c.complex.dim() {
                0.0
            } else {
                c.d()?.sup_norm()
            }
        }
    };
    Ok(LagrangianVerdict { lagrangian: defect < tol, defect })
}

/// Project a sampled graph form onto the closed (Lagrangian) part through the
/// fibred Hodge splitting.
pub fn lagrangianize(delta: &DeltaOperator, alpha: &CochainForm) -> Result<CochainForm> {
    Ok(delta.project_closed(alpha)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelParams, PolKind};
    use crate::poincare::{linear_retraction, liouville_from_symplectic, HomotopyConfig};

    fn cylinder(c_amp: f64) -> SymplecticBundleModel {
        let p = ModelParams {
            fibre_resolution: vec![16, 9],
            c_amplitude: c_amp,
            ..Default::default()
        };
        SymplecticBundleModel::cylinder(&p).unwrap()
    }

    fn chart_for(model: &SymplecticBundleModel) -> (LagrangianSubbundle, WeinsteinChart) {
        let l = LagrangianSubbundle::zero(&model.split);
        let rho = linear_retraction(model, &l);
        let rep = liouville_from_symplectic(model, &l, &rho, &HomotopyConfig::default()).unwrap();
        let chart = build_chart(model, &l, &rep.lambda, FlowConfig::default()).unwrap();
        (l, chart)
    }

    #[test]
    fn cylinder_chart_is_the_identity_pairing() {
        let m = cylinder(0.0);
        let (_, chart) = chart_for(&m);
        let y = chart.forward(0.0, &[1.2], &[0.3]).unwrap();
        assert!((y[0] - 1.2).abs() < 1e-12);
        assert!((y[1] - 0.3).abs() < 1e-12, "phi(theta, p) = (theta, p), got {}", y[1]);
    }

    #[test]
    fn b_dependent_chart_scales_by_the_inverse_factor() {
        let m = cylinder(0.5);
        let (_, chart) = chart_for(&m);
        let b = std::f64::consts::FRAC_PI_2;
        let c = 1.0 + 0.5 * b.sin();
        let y = chart.forward(b, &[0.4], &[0.2]).unwrap();
        assert!((y[1] - 0.2 / c).abs() < 1e-9, "got {}", y[1]);
    }

    #[test]
    fn torus4_chart_is_blockwise() {
        let p = ModelParams {
            fibre_resolution: vec![8, 8, 8, 8],
            tubular_radius: 1.0,
            ..Default::default()
        };
        let m = SymplecticBundleModel::torus4(&p, PolKind::Standard).unwrap();
        let (_, chart) = chart_for(&m);
        let y = chart.forward(0.0, &[0.7, 1.9], &[0.25, -0.15]).unwrap();
        assert!((y[0] - 0.7).abs() < 1e-10);
        assert!((y[1] - 1.9).abs() < 1e-10);
        assert!((y[2] - 0.25).abs() < 1e-10);
        assert!((y[3] + 0.15).abs() < 1e-10);
        assert!(chart.commutation_defect < 1e-9);
    }

    #[test]
    fn zero_section_lands_on_l() {
        let m = cylinder(0.3);
        let (_, chart) = chart_for(&m);
        assert!(chart.zero_section_residual().unwrap() <= 1e-9);
    }

    #[test]
    fn chart_inverse_round_trip() {
        let m = cylinder(0.5);
        let (_, chart) = chart_for(&m);
        let b = 2.2;
        let y0 = chart.forward(b, &[0.9], &[0.11]).unwrap();
        let (q, p) = chart.inverse(b, &y0).unwrap();
        assert!((q[0] - 0.9).abs() < 1e-9);
        assert!((p[0] - 0.11).abs() < 1e-9);
    }

    #[test]
    fn symplectic_defect_is_fd_noise() {
        let m = cylinder(0.5);
        let (_, chart) = chart_for(&m);
        let rep = chart
            .verify_symplectic(std::f64::consts::FRAC_PI_2, 25, 42)
            .unwrap();
        assert!(rep.sup_defect <= 1e-5, "defect {}", rep.sup_defect);
    }

    #[test]
    fn candidate_graph_recovers_its_form() {
        // L_near = {r = 0.1} corresponds to alpha = 0.1 dtheta
        let m = cylinder(0.0);
        let (_, chart) = chart_for(&m);
        let cand = SubbundleCandidate {
            param: Arc::new(|_, u| {
                let mut y = FibrePoint::new();
                y.push(u[0]);
                y.push(0.1);
                y
            }),
        };
        let (form, trip) = subbundle_to_form(&chart, &cand, m.base.clone()).unwrap();
        assert!(trip.sup_distance < 1e-6);
        let f = form.as_field().unwrap();
        let c = f.components(0.0, &[1.3]);
        assert!((c[0] - 0.1).abs() < 1e-8, "alpha = 0.1 dtheta, got {}", c[0]);
        // zero section goes to the zero form
        let zero_cand = SubbundleCandidate {
            param: Arc::new(|_, u| {
                let mut y = FibrePoint::new();
                y.push(u[0]);
                y.push(0.0);
                y
            }),
        };
        let (zform, _) = subbundle_to_form(&chart, &zero_cand, m.base.clone()).unwrap();
        let c = zform.as_field().unwrap().components(0.0, &[0.4]);
        assert!(c[0].abs() < 1e-10);
    }

    #[test]
    fn out_of_chart_candidates_are_reported() {
        let m = cylinder(0.0);
        let (_, chart) = chart_for(&m);
        let cand = SubbundleCandidate {
            param: Arc::new(|_, u| {
                let mut y = FibrePoint::new();
                y.push(u[0]);
                y.push(0.95); // outside the 0.5 * tubular radius chart domain
                y
            }),
        };
        match subbundle_to_form(&chart, &cand, m.base.clone()) {
            Err(Error::OutOfChart { samples }) => {
                assert_eq!(samples.len(), m.base.len());
            }
            other => panic!("expected OutOfChart, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn classifier_on_field_forms() {
        let base = Arc::new(crate::grid::BaseGrid::circle(4).unwrap());
        let domain = tangent_torus_domain(2);
        // constant form: closed
        let constant = FieldForm::constant(2, 1, domain.clone(), vec![0.3, 0.0]);
        let v = is_lagrangian(&FibredForm::field(base.clone(), constant), 1e-6, 16).unwrap();
        assert!(v.lagrangian);
        assert!(v.defect <= 1e-9);
        // sin(theta2) dtheta1: defect exactly 1
        let fourier = FieldForm::new(
            2,
            1,
            domain.clone(),
            Arc::new(|_, x: &[f64]| {
                let mut c = crate::forms::Components::new();
                c.push(x[1].sin());
                c.push(0.0);
                c
            }),
        )
        .with_jet(Arc::new(|_, x: &[f64]| {
            let mut jet = crate::forms::Jet::new();
            let mut r0 = crate::forms::Components::new();
            r0.push(0.0);
            r0.push(x[1].cos());
            jet.push(r0);
            let mut r1 = crate::forms::Components::new();
            r1.push(0.0);
            r1.push(0.0);
            jet.push(r1);
            jet
        }));
        let v = is_lagrangian(&FibredForm::field(base.clone(), fourier), 1e-6, 16).unwrap();
        assert!(!v.lagrangian);
        assert!((v.defect - 1.0).abs() < 1e-9, "defect {}", v.defect);
        // an exact differential dg is closed
        let g_diff = FieldForm::new(
            2,
            1,
            domain,
            Arc::new(|_, x: &[f64]| {
                let mut c = crate::forms::Components::new();
                c.push(-0.1 * x[0].sin() * x[1].cos());
                c.push(-0.1 * x[0].cos() * x[1].sin());
                c
            }),
        );
        let v = is_lagrangian(&FibredForm::field(base, g_diff), 1e-6, 16).unwrap();
        assert!(v.lagrangian, "defect {}", v.defect);
    }
}
