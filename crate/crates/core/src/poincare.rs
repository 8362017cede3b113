//! Vertical tubular retractions and the fibred Poincare lemma: the homotopy
//! operator `P` with `rho_1^* a - rho_0^* a = P d_p a + d_p P a`, and the
//! Liouville form `lambda = -P omega` vanishing on a Lagrangian subbundle.

use crate::complex::FibrePoint;
use crate::error::{Error, Result};
use crate::forms::{Components, FieldEval, FieldForm, VerticalMap};
use crate::linalg::{zero_mat, SmallMat};
use crate::models::{tangent_grid, LagrangianSubbundle, SymplecticBundleModel};
use std::num::NonZeroUsize;
use std::sync::Arc;

#[derive(Clone, Copy, Debug)]
pub struct HomotopyConfig {
    /// Gauss-Legendre node count on [0, 1].
    pub gauss_nodes: usize,
}

impl Default for HomotopyConfig {
    fn default() -> Self {
        Self { gauss_nodes: 12 }
    }
}

impl HomotopyConfig {
    /// Nodes and weights mapped from [-1, 1] to [0, 1].
    pub fn nodes(&self) -> Result<Vec<(f64, f64)>> {
        let n = NonZeroUsize::new(self.gauss_nodes.max(2))
            .expect("node count clamped to >= 2");
        let rule = gauss_quad::GaussLegendre::new(n);
        Ok(rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| ((x + 1.0) / 2.0, w / 2.0))
            .collect())
    }
}

type RetractionMap = Arc<dyn Fn(f64, f64, &[f64]) -> FibrePoint + Send + Sync>;
type RetractionJet = Arc<dyn Fn(f64, f64, &[f64]) -> SmallMat + Send + Sync>;

/// A fibre-preserving deformation retraction `rho: [0,1] x U -> U`.
#[derive(Clone)]
pub struct VerticalRetraction {
    pub fibre_dim: usize,
    map: RetractionMap,
    time_derivative: RetractionMap,
    space_jet: RetractionJet,
    pub fixes_l: bool,
    pub ends_on_l: bool,
}

impl VerticalRetraction {
    pub fn new(
        fibre_dim: usize,
        map: RetractionMap,
        time_derivative: RetractionMap,
        space_jet: RetractionJet,
    ) -> Self {
        Self {
            fibre_dim,
            map,
            time_derivative,
            space_jet,
            fixes_l: true,
            ends_on_l: true,
        }
    }

    pub fn at(&self, t: f64, b: f64, x: &[f64]) -> FibrePoint {
        (self.map)(t, b, x)
    }

    pub fn dt(&self, t: f64, b: f64, x: &[f64]) -> FibrePoint {
        (self.time_derivative)(t, b, x)
    }

    pub fn jet(&self, t: f64, b: f64, x: &[f64]) -> SmallMat {
        (self.space_jet)(t, b, x)
    }

    /// Freeze the time parameter into a vertical map.
    pub fn as_vertical_map(&self, t: f64, model: &SymplecticBundleModel) -> VerticalMap {
        let this = self.clone();
        let jet = self.clone();
        VerticalMap::new(
            self.fibre_dim,
            model.domain(),
            Arc::new(move |b, x| this.at(t, b, x)),
        )
        .with_jacobian(Arc::new(move |b, x| jet.jet(t, b, x)))
    }
}

/// The graph-offset dilation in tubular coordinates:
/// `rho_t(theta, r) = (theta, g(theta) + (1 - t)(r - g(theta)))`.
pub fn linear_retraction(
    model: &SymplecticBundleModel,
    l: &LagrangianSubbundle,
) -> VerticalRetraction {
    let split = model.split.clone();
    let sub = l.clone();
    let map: RetractionMap = Arc::new(move |t, b, x| {
        let theta: FibrePoint = split.tangent.iter().map(|&a| x[a]).collect();
        let g = sub.offsets(b, &theta);
        let mut y: FibrePoint = x.iter().copied().collect();
        for (a, &ax) in split.normal.iter().enumerate() {
            y[ax] = g[a] + (1.0 - t) * (x[ax] - g[a]);
        }
        y
    });
    let split = model.split.clone();
    let sub = l.clone();
    let dt: RetractionMap = Arc::new(move |_t, b, x| {
        let theta: FibrePoint = split.tangent.iter().map(|&a| x[a]).collect();
        let g = sub.offsets(b, &theta);
        let mut v = FibrePoint::new();
        for _ in 0..split.fibre_dim() {
            v.push(0.0);
        }
        for (a, &ax) in split.normal.iter().enumerate() {
            v[ax] = -(x[ax] - g[a]);
        }
        v
    });
    let split = model.split.clone();
    let sub = l.clone();
    let jet: RetractionJet = Arc::new(move |t, b, x| {
        let theta: FibrePoint = split.tangent.iter().map(|&a| x[a]).collect();
        let gj = sub.graph_jet_at(b, &theta);
        let mut m = zero_mat();
        for &ax in &split.tangent {
            m[ax][ax] = 1.0;
        }
        for (a, &ax) in split.normal.iter().enumerate() {
            m[ax][ax] = 1.0 - t;
            for (j, &tj) in split.tangent.iter().enumerate() {
                m[ax][tj] = t * gj[a][j];
            }
        }
        m
    });
    VerticalRetraction::new(model.fibre_dim(), map, dt, jet)
}

/// Contraction along the model polarisation leaves onto the zero subbundle;
/// reduces to the linear retraction for the standard polarisation.
pub fn leaf_retraction(model: &SymplecticBundleModel) -> VerticalRetraction {
    let pol = model.polarization.clone();
    let split = model.split.clone();
    let zero = LagrangianSubbundle::zero(&model.split);
    let pol2 = pol.clone();
    let split2 = split.clone();
    let zero2 = zero.clone();
    let map: RetractionMap = Arc::new(move |t, b, x| {
        let (theta, s) = (pol.leaf_coords)(b, x);
        let x0 = zero.embed(&split, b, &theta);
        let scaled: FibrePoint = s.iter().map(|v| (1.0 - t) * v).collect();
        (pol.leaf)(b, &x0, &scaled)
    });
    let dt: RetractionMap = Arc::new(move |t, b, x| {
        // leaf data is affine in the gallery, so a wide central difference
        // is exact and avoids cancellation noise
        let (theta, s) = (pol2.leaf_coords)(b, x);
        let x0 = zero2.embed(&split2, b, &theta);
        let h = 1e-2;
        let plus: FibrePoint = s.iter().map(|v| (1.0 - t - h) * v).collect();
        let minus: FibrePoint = s.iter().map(|v| (1.0 - t + h) * v).collect();
        let yp = (pol2.leaf)(b, &x0, &plus);
        let ym = (pol2.leaf)(b, &x0, &minus);
        yp.iter().zip(ym.iter()).map(|(p, m)| (p - m) / (2.0 * h)).collect()
    });
    let this_map = map.clone();
    let dim = model.fibre_dim();
    let jet: RetractionJet = Arc::new(move |t, b, x| {
        let h = 1e-2;
        let mut m = zero_mat();
        let mut xp: FibrePoint = x.iter().copied().collect();
        for a in 0..dim {
            xp[a] = x[a] + h;
            let plus = this_map(t, b, &xp);
            xp[a] = x[a] - h;
            let minus = this_map(t, b, &xp);
            xp[a] = x[a];
            for i in 0..dim {
                m[i][a] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        m
    });
    VerticalRetraction::new(model.fibre_dim(), map, dt, jet)
}

/// The homotopy operator
/// `(P beta)(v_1 .. v_{k-1}) = int_0^1 beta(d rho/dt, D rho_t v_1, ...) dt`.
pub fn homotopy_p(
    beta: &FieldForm,
    rho: &VerticalRetraction,
    cfg: &HomotopyConfig,
) -> Result<FieldForm> {
    if beta.degree == 0 {
        return Err(Error::HomotopyDegreeZero);
    }
    let nodes = cfg.nodes()?;
    if nodes.len() < 2 {
        return Err(Error::InvalidGrid("quadrature needs at least 2 nodes".into()));
    }
    let form = beta.clone();
    let ret = rho.clone();
    let k = beta.degree;
    let dim = beta.fibre_dim;
    let subsets = crate::complex::combinations(dim, k - 1);
    let eval: FieldEval = Arc::new(move |b, x| {
        let mut out: Components = subsets.iter().map(|_| 0.0).collect();
        for &(t, w) in &nodes {
            let y = ret.at(t, b, x);
            let vel = ret.dt(t, b, x);
            let jac = ret.jet(t, b, x);
            for (ci, subset) in subsets.iter().enumerate() {
                let mut vectors: Vec<FibrePoint> = Vec::with_capacity(k);
                vectors.push(vel.clone());
                for &a in subset.iter() {
                    let col: FibrePoint = (0..dim).map(|i| jac[i][a as usize]).collect();
                    vectors.push(col);
                }
                out[ci] += w * form.eval_on_vectors(b, &y, &vectors);
            }
        }
        out
    });
    Ok(FieldForm::new(dim, k - 1, beta.domain.clone(), eval))
}

/// Residuals of the homotopy identity and of the vanishing of `P beta` on L,
/// evaluated over probe points.
#[derive(Clone, Debug, serde::Serialize)]
pub struct HomotopyCheck {
    pub identity_residual: f64,
    pub on_l_residual: f64,
}

pub fn homotopy_identity_check(
    model: &SymplecticBundleModel,
    l: &LagrangianSubbundle,
    beta: &FieldForm,
    rho: &VerticalRetraction,
    cfg: &HomotopyConfig,
    probes: &[(f64, FibrePoint)],
) -> Result<HomotopyCheck> {
    let p_beta = homotopy_p(beta, rho, cfg)?;
    let d_p_beta = p_beta.d()?;
    let p_d_beta = if beta.degree < beta.fibre_dim {
        Some(homotopy_p(&beta.d()?, rho, cfg)?)
    } else {
        None
    };
    let rho1 = rho.as_vertical_map(1.0, model);
    let rho0 = rho.as_vertical_map(0.0, model);
    let pulled1 = beta.pullback(&rho1)?;
    let pulled0 = beta.pullback(&rho0)?;

    let mut identity: f64 = 0.0;
    for (b, x) in probes {
        crate::models::check_tubular(model, l, *b, x)?;
        let lhs = pulled1
            .components(*b, x)
            .iter()
            .zip(pulled0.components(*b, x).iter())
            .map(|(a, b)| a - b)
            .collect::<Components>();
        let mut rhs = d_p_beta.components(*b, x);
        if let Some(pd) = &p_d_beta {
            for (r, v) in rhs.iter_mut().zip(pd.components(*b, x).iter()) {
                *r += v;
            }
        }
        for (a, r) in lhs.iter().zip(rhs.iter()) {
            if !r.is_finite() || !a.is_finite() {
                return Err(Error::QuadratureDomain);
            }
            identity = identity.max((a - r).abs());
        }
    }

    let mut on_l: f64 = 0.0;
    for &b in model.base.samples() {
        for theta in tangent_grid(l.tangent_dim, 8) {
            let x = l.embed(&model.split, b, &theta);
            for v in p_beta.components(b, &x).iter() {
                on_l = on_l.max(v.abs());
            }
        }
    }
    Ok(HomotopyCheck { identity_residual: identity, on_l_residual: on_l })
}

/// `lambda = -P omega` together with its verification residuals.
pub struct LiouvilleReport {
    pub lambda: FieldForm,
    pub lagrangian_defect: f64,
    pub d_residual: f64,
    pub on_l_residual: f64,
}

/// Interior probe points spread along the polarisation leaves through the
/// subbundle, staying inside `frac` of the tubular radius.
pub fn tubular_probes(
    model: &SymplecticBundleModel,
    l: &LagrangianSubbundle,
    per_axis: usize,
    frac: f64,
) -> Vec<(f64, FibrePoint)> {
    let leaf_dim = model.polarization.leaf_dim;
    let offsets = [0.0, 0.35, -0.55, 0.7];
    let mut out = Vec::new();
    for &b in model.base.samples() {
        for theta in tangent_grid(l.tangent_dim, per_axis) {
            let x0 = l.embed(&model.split, b, &theta);
            for (i, &o) in offsets.iter().enumerate() {
                let mut s = FibrePoint::new();
                for a in 0..leaf_dim {
                    let signed = if (a + i) % 2 == 0 { o } else { -o };
                    s.push(signed * frac * model.tubular_radius);
                }
                let y = (model.polarization.leaf)(b, &x0, &s);
                out.push((b, y));
            }
        }
    }
    out
}

pub fn liouville_from_symplectic(
    model: &SymplecticBundleModel,
    l: &LagrangianSubbundle,
    rho: &VerticalRetraction,
    cfg: &HomotopyConfig,
) -> Result<LiouvilleReport> {
    let defect = l.lagrangian_defect(model, 12);
    if defect > 1e-8 {
        return Err(Error::NotLagrangian { defect });
    }
    let lambda = homotopy_p(&model.omega, rho, cfg)?.scaled(-1.0);

    // d lambda = omega over interior probes
    let d_lambda = lambda.d()?;
    let mut d_residual: f64 = 0.0;
    for (b, x) in tubular_probes(model, l, 6, 0.7) {
        let dl = d_lambda.components(b, &x);
        let om = model.omega.components(b, &x);
        for (u, v) in dl.iter().zip(om.iter()) {
            if !u.is_finite() {
                return Err(Error::QuadratureDomain);
            }
            d_residual = d_residual.max((u - v).abs());
        }
    }

    let mut on_l: f64 = 0.0;
    for &b in model.base.samples() {
        for theta in tangent_grid(l.tangent_dim, 8) {
            let x = l.embed(&model.split, b, &theta);
            for v in lambda.components(b, &x).iter() {
                on_l = on_l.max(v.abs());
            }
        }
    }

    Ok(LiouvilleReport {
        lambda,
        lagrangian_defect: defect,
        d_residual,
        on_l_residual: on_l,
    })
}
