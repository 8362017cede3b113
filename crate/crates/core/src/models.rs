//! The symplectic bundle gallery: trivialised bundles `B x F` with a fibred
//! symplectic form, reference Lagrangian subbundles given as graphs, and
//! closed-form transverse polarisations.

use crate::complex::{Domain, FibreComplex, FibrePoint};
use crate::error::{Error, Result};
use crate::forms::{Components, FieldForm, Jet};
use crate::grid::BaseGrid;
use crate::linalg::{small_det, zero_mat, SmallMat};
use std::sync::Arc;

/// Which fibre axes parametrise the reference subbundle and which are
/// transverse to it.
#[derive(Clone, Debug)]
pub struct CoordSplit {
    pub tangent: Vec<usize>,
    pub normal: Vec<usize>,
}

impl CoordSplit {
    pub fn fibre_dim(&self) -> usize {
        self.tangent.len() + self.normal.len()
    }
}

/// A foliation of the fibres by Lagrangian leaves transverse to the reference
/// subbundle, given in closed form: leafwise-constant extensions of the
/// tangent coordinates (with exact gradients), a leaf parametrisation, and
/// leaf coordinates.
#[derive(Clone)]
pub struct PolarizationSpec {
    pub leaf_dim: usize,
    /// `(b, x, i) -> (f_i(x), grad f_i(x))` for the extension of the i-th
    /// tangent coordinate.
    pub extension: Arc<dyn Fn(f64, &[f64], usize) -> (f64, FibrePoint) + Send + Sync>,
    /// `(b, x0, s)` -> the leaf point through `x0` at leaf parameters `s`.
    pub leaf: Arc<dyn Fn(f64, &[f64], &[f64]) -> FibrePoint + Send + Sync>,
    /// `(b, x)` -> (tangent coordinates of the leaf's crossing with the zero
    /// subbundle, leaf parameters of `x`).
    pub leaf_coords: Arc<dyn Fn(f64, &[f64]) -> (FibrePoint, FibrePoint) + Send + Sync>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PolKind {
    /// Leaves run along the normal coordinate planes.
    Standard,
    /// Leaves are sheared by a symmetric integer matrix; exercises
    /// non-product charts on the 4-torus.
    Sheared([[f64; 2]; 2]),
}

#[derive(Clone)]
pub struct SymplecticBundleModel {
    pub name: String,
    pub base: Arc<BaseGrid>,
    pub complex: Arc<FibreComplex>,
    pub omega: FieldForm,
    /// b-dependent scale factor of omega.
    pub scale: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub split: CoordSplit,
    pub tubular_radius: f64,
    pub polarization: PolarizationSpec,
    /// inf over sampled b of the scale factor; bounds the chart stretch.
    pub min_scale: f64,
}

/// Parameters shared by the model constructors.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub base_samples: usize,
    pub base_circle: bool,
    pub fibre_resolution: Vec<usize>,
    pub c_amplitude: f64,
    pub tubular_radius: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            base_samples: 16,
            base_circle: true,
            fibre_resolution: vec![32, 32],
            c_amplitude: 0.0,
            tubular_radius: 1.0,
        }
    }
}

fn scale_fn(c_amplitude: f64) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
    Arc::new(move |b: f64| 1.0 + c_amplitude * b.sin())
}

fn base_grid(p: &ModelParams) -> Result<Arc<BaseGrid>> {
    Ok(Arc::new(if p.base_circle {
        BaseGrid::circle(p.base_samples)?
    } else {
        BaseGrid::interval(0.0, 1.0, p.base_samples)?
    }))
}

/// Standard polarisation: leaves are the normal coordinate planes.
fn standard_polarization(split: &CoordSplit) -> PolarizationSpec {
    let tangent = split.tangent.clone();
    let normal = split.normal.clone();
    let dim = split.fibre_dim();
    let t2 = tangent.clone();
    let n2 = normal.clone();
    let n3 = normal.clone();
    let t3 = tangent.clone();
    PolarizationSpec {
        leaf_dim: normal.len(),
        extension: Arc::new(move |_, x, i| {
            let mut g = FibrePoint::new();
            for _ in 0..dim {
                g.push(0.0);
            }
            g[tangent[i]] = 1.0;
            (x[tangent[i]], g)
        }),
        leaf: Arc::new(move |_, x0, s| {
            let mut y: FibrePoint = x0.iter().copied().collect();
            for (a, &ax) in n2.iter().enumerate() {
                y[ax] += s[a];
            }
            y
        }),
        leaf_coords: Arc::new(move |_, x| {
            let base: FibrePoint = t3.iter().map(|&a| x[a]).collect();
            let s: FibrePoint = n3.iter().map(|&a| x[a]).collect();
            let _ = &t2;
            (base, s)
        }),
    }
}

/// Sheared polarisation on the 4-torus: leaf directions `(S e_a, e_a)`.
fn sheared_polarization(s_mat: [[f64; 2]; 2]) -> PolarizationSpec {
    PolarizationSpec {
        leaf_dim: 2,
        extension: Arc::new(move |_, x, i| {
            // f_i = theta_i - (S r)_i
            let val = x[i] - s_mat[i][0] * x[2] - s_mat[i][1] * x[3];
            let mut g = FibrePoint::new();
            for _ in 0..4 {
                g.push(0.0);
            }
            g[i] = 1.0;
            g[2] = -s_mat[i][0];
            g[3] = -s_mat[i][1];
            (val, g)
        }),
        leaf: Arc::new(move |_, x0, s| {
            let mut y: FibrePoint = x0.iter().copied().collect();
            for a in 0..2 {
                y[0] += s_mat[0][a] * s[a];
                y[1] += s_mat[1][a] * s[a];
                y[2 + a] += s[a];
            }
            y
        }),
        leaf_coords: Arc::new(move |_, x| {
            let mut base = FibrePoint::new();
            base.push(x[0] - s_mat[0][0] * x[2] - s_mat[0][1] * x[3]);
            base.push(x[1] - s_mat[1][0] * x[2] - s_mat[1][1] * x[3]);
            let mut s = FibrePoint::new();
            s.push(x[2]);
            s.push(x[3]);
            (base, s)
        }),
    }
}

/// `omega = c(b) * sum_i dx_{t_i} ^ dx_{n_i}` paired by the split order.
fn paired_omega(
    dim: usize,
    domain: Domain,
    split: &CoordSplit,
    scale: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
) -> FieldForm {
    let subsets = crate::complex::combinations(dim, 2);
    let mut coeff = vec![0.0; subsets.len()];
    for (t, n) in split.tangent.iter().zip(&split.normal) {
        let (lo, hi, sign) = if t < n { (*t, *n, 1.0) } else { (*n, *t, -1.0) };
        let idx = subsets
            .iter()
            .position(|s| s == &vec![lo as u8, hi as u8])
            .unwrap();
        coeff[idx] = sign;
    }
    let sc = scale.clone();
    let c2 = coeff.clone();
    let eval = Arc::new(move |b: f64, _x: &[f64]| -> Components {
        let c = sc(b);
        c2.iter().map(|&v| v * c).collect()
    });
    let n_comp = coeff.len();
    FieldForm::new(dim, 2, domain, eval).with_jet(Arc::new(move |_, _| {
        (0..n_comp)
            .map(|_| (0..dim).map(|_| 0.0).collect())
            .collect()
    }))
}

impl SymplecticBundleModel {
    /// Periodic angle times a bounded radial window, `omega = c(b) dtheta^dr`.
    pub fn cylinder(p: &ModelParams) -> Result<Self> {
        let res = &p.fibre_resolution;
        if res.len() != 2 {
            return Err(Error::InvalidComplex(format!(
                "cylinder expects 2 fibre resolutions, got {}",
                res.len()
            )));
        }
        let complex = Arc::new(FibreComplex::cylinder(res[0], res[1], p.tubular_radius)?);
        let split = CoordSplit { tangent: vec![0], normal: vec![1] };
        let scale = scale_fn(p.c_amplitude);
        let omega = paired_omega(2, complex.domain(), &split, scale.clone());
        Self::assemble("cylinder", p, complex, omega, scale, split, standard_polarization)
    }

    /// 2-torus fibre with `omega = c(b) dtheta1^dtheta2`; the second angle is
    /// the transverse coordinate, used within a tubular window.
    pub fn torus2(p: &ModelParams) -> Result<Self> {
        let res = &p.fibre_resolution;
        if res.len() != 2 {
            return Err(Error::InvalidComplex(format!(
                "torus2 expects 2 fibre resolutions, got {}",
                res.len()
            )));
        }
        let complex = Arc::new(FibreComplex::torus(res)?);
        let split = CoordSplit { tangent: vec![0], normal: vec![1] };
        let scale = scale_fn(p.c_amplitude);
        let omega = paired_omega(2, complex.domain(), &split, scale.clone());
        Self::assemble("torus2", p, complex, omega, scale, split, standard_polarization)
    }

    /// 4-torus fibre, `omega = c(b)(dtheta1^dr1 + dtheta2^dr2)` in the axis
    /// order (theta1, theta2, r1, r2).
    pub fn torus4(p: &ModelParams, pol: PolKind) -> Result<Self> {
        let res = &p.fibre_resolution;
        if res.len() != 4 {
            return Err(Error::InvalidComplex(format!(
                "torus4 expects 4 fibre resolutions, got {}",
                res.len()
            )));
        }
        let complex = Arc::new(FibreComplex::torus(res)?);
        let split = CoordSplit { tangent: vec![0, 1], normal: vec![2, 3] };
        let scale = scale_fn(p.c_amplitude);
        let omega = paired_omega(4, complex.domain(), &split, scale.clone());
        match pol {
            PolKind::Standard => {
                Self::assemble("torus4", p, complex, omega, scale, split, standard_polarization)
            }
            PolKind::Sheared(s) => {
                let base = base_grid(p)?;
                let min_scale = sampled_min_scale(&base, &scale);
                Ok(Self {
                    name: "torus4-sheared".into(),
                    base,
                    complex,
                    omega,
                    scale,
                    split,
                    tubular_radius: p.tubular_radius,
                    polarization: sheared_polarization(s),
                    min_scale,
                })
            }
        }
    }

    /// Trivial symplectic bundle `M x B` over `B` with `M` a standard
    /// symplectic torus of dimension 2 or 4.
    pub fn product_mxb(m_dim: usize, p: &ModelParams) -> Result<Self> {
        match m_dim {
            2 => {
                let mut q = p.clone();
                q.c_amplitude = 0.0;
                let res = &q.fibre_resolution;
                if res.len() != 2 {
                    return Err(Error::InvalidComplex(
                        "product_mxb with m_dim = 2 expects 2 fibre resolutions".into(),
                    ));
                }
                let complex = Arc::new(FibreComplex::torus(res)?);
                let split = CoordSplit { tangent: vec![0], normal: vec![1] };
                let scale = scale_fn(0.0);
                let omega = paired_omega(2, complex.domain(), &split, scale.clone());
                let mut m =
                    Self::assemble("product_mxb", &q, complex, omega, scale, split, standard_polarization)?;
                m.name = "product_mxb2".into();
                Ok(m)
            }
            4 => {
                let mut q = p.clone();
                q.c_amplitude = 0.0;
                let mut m = Self::torus4(&q, PolKind::Standard)?;
                m.name = "product_mxb4".into();
                Ok(m)
            }
            other => Err(Error::InvalidComplex(format!(
                "product_mxb fibre dimension must be 2 or 4, got {other}"
            ))),
        }
    }

    fn assemble(
        name: &str,
        p: &ModelParams,
        complex: Arc<FibreComplex>,
        omega: FieldForm,
        scale: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        split: CoordSplit,
        pol: fn(&CoordSplit) -> PolarizationSpec,
    ) -> Result<Self> {
        let base = base_grid(p)?;
        let min_scale = sampled_min_scale(&base, &scale);
        if min_scale <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "scale factor is not positive over the base (min {min_scale})"
            )));
        }
        let polarization = pol(&split);
        Ok(Self {
            name: name.into(),
            base,
            complex,
            omega,
            scale,
            split,
            tubular_radius: p.tubular_radius,
            polarization,
            min_scale,
        })
    }

    pub fn fibre_dim(&self) -> usize {
        self.complex.dim()
    }

    pub fn domain(&self) -> Domain {
        self.complex.domain()
    }

    /// Antisymmetric component matrix of omega at a point.
    pub fn omega_matrix(&self, b: f64, x: &[f64]) -> SmallMat {
        let comps = self.omega.components(b, x);
        let subsets = crate::complex::combinations(self.fibre_dim(), 2);
        let mut m = zero_mat();
        for (c, s) in comps.iter().zip(&subsets) {
            m[s[0] as usize][s[1] as usize] = *c;
            m[s[1] as usize][s[0] as usize] = -*c;
        }
        m
    }

    pub fn omega_eval(&self, b: f64, x: &[f64], u: &[f64], v: &[f64]) -> f64 {
        let m = self.omega_matrix(b, x);
        let mut acc = 0.0;
        for i in 0..self.fibre_dim() {
            for j in 0..self.fibre_dim() {
                acc += u[i] * m[i][j] * v[j];
            }
        }
        acc
    }

    /// Checks the symplectic bundle invariants on a probe grid: fibrewise
    /// closedness of omega and nondegeneracy at every sampled point.
    pub fn validate(&self) -> Result<()> {
        let n = self.fibre_dim();
        let probes = probe_points(&self.complex, 3);
        for &b in self.base.samples() {
            for x in &probes {
                let det = small_det(n, self.omega_matrix(b, x));
                if det.abs() <= 1e-10 {
                    return Err(Error::SingularOmega { det });
                }
            }
        }
        if self.omega.degree < n {
            let dw = self.omega.d()?;
            for &b in self.base.samples() {
                for x in &probes {
                    let sup = dw
                        .components(b, x)
                        .iter()
                        .fold(0.0f64, |m, v| m.max(v.abs()));
                    if sup > 1e-8 {
                        return Err(Error::PolarizationRejected {
                            check: "d_p omega = 0",
                            residual: sup,
                            bound: 1e-8,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

fn sampled_min_scale(base: &BaseGrid, scale: &Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> f64 {
    base.samples()
        .iter()
        .map(|&b| scale(b))
        .fold(f64::INFINITY, f64::min)
}

/// A coarse grid of interior fibre points for verification sweeps.
pub fn probe_points(complex: &FibreComplex, per_axis: usize) -> Vec<FibrePoint> {
    let n = complex.dim();
    let axes = complex.axes();
    let mut pts: Vec<FibrePoint> = vec![FibrePoint::new()];
    for a in 0..n {
        let ax = &axes[a];
        let mut next = Vec::with_capacity(pts.len() * per_axis);
        for i in 0..per_axis {
            // keep clear of bounded edges
            let u = (i as f64 + 0.5) / per_axis as f64;
            let coord = ax.min + u * ax.extent;
            for p in &pts {
                let mut q = p.clone();
                q.push(coord);
                next.push(q);
            }
        }
        pts = next;
    }
    pts
}

/// Uniform grid on the tangent torus of a subbundle.
pub fn tangent_grid(dim: usize, per_axis: usize) -> Vec<FibrePoint> {
    let mut pts: Vec<FibrePoint> = vec![FibrePoint::new()];
    for _ in 0..dim {
        let mut next = Vec::with_capacity(pts.len() * per_axis);
        for i in 0..per_axis {
            let coord = std::f64::consts::TAU * i as f64 / per_axis as f64;
            for p in &pts {
                let mut q = p.clone();
                q.push(coord);
                next.push(q);
            }
        }
        pts = next;
    }
    pts
}

/// A subbundle presented as a graph over the reference zero-subbundle: the
/// fibred 1-form section assigning normal offsets to tangent coordinates.
#[derive(Clone)]
pub struct LagrangianSubbundle {
    pub tangent_dim: usize,
    pub normal_dim: usize,
    graph: Arc<dyn Fn(f64, &[f64]) -> FibrePoint + Send + Sync>,
    /// jet[a][j] = d(offset_a)/d(theta_j)
    graph_jet: Option<Arc<dyn Fn(f64, &[f64]) -> SmallMat + Send + Sync>>,
    pub certified: bool,
    pub defect: Option<f64>,
}

impl LagrangianSubbundle {
    /// The zero section of the tubular coordinates.
    pub fn zero(split: &CoordSplit) -> Self {
        let nd = split.normal.len();
        Self {
            tangent_dim: split.tangent.len(),
            normal_dim: nd,
            graph: Arc::new(move |_, _| (0..nd).map(|_| 0.0).collect()),
            graph_jet: Some(Arc::new(move |_, _| zero_mat())),
            certified: false,
            defect: None,
        }
    }

    pub fn from_graph(
        tangent_dim: usize,
        normal_dim: usize,
        graph: Arc<dyn Fn(f64, &[f64]) -> FibrePoint + Send + Sync>,
        graph_jet: Option<Arc<dyn Fn(f64, &[f64]) -> SmallMat + Send + Sync>>,
    ) -> Self {
        Self {
            tangent_dim,
            normal_dim,
            graph,
            graph_jet,
            certified: false,
            defect: None,
        }
    }

    pub fn offsets(&self, b: f64, theta: &[f64]) -> FibrePoint {
        (self.graph)(b, theta)
    }

    pub fn graph_jet_at(&self, b: f64, theta: &[f64]) -> SmallMat {
        if let Some(j) = &self.graph_jet {
            return j(b, theta);
        }
        // tangent torus is periodic, plain central differences
        let h = DEFAULT_GRAPH_FD;
        let mut m = zero_mat();
        let mut th: FibrePoint = theta.iter().copied().collect();
        for j in 0..self.tangent_dim {
            th[j] = theta[j] + h;
            let plus = (self.graph)(b, &th);
            th[j] = theta[j] - h;
            let minus = (self.graph)(b, &th);
            th[j] = theta[j];
            for a in 0..self.normal_dim {
                m[a][j] = (plus[a] - minus[a]) / (2.0 * h);
            }
        }
        m
    }

    /// Full fibre point of the graph at tangent coordinates `theta`.
    pub fn embed(&self, split: &CoordSplit, b: f64, theta: &[f64]) -> FibrePoint {
        let g = self.offsets(b, theta);
        let mut x = FibrePoint::new();
        for _ in 0..split.fibre_dim() {
            x.push(0.0);
        }
        for (i, &ax) in split.tangent.iter().enumerate() {
            x[ax] = theta[i];
        }
        for (a, &ax) in split.normal.iter().enumerate() {
            x[ax] = g[a];
        }
        x
    }

    /// Tangent frame of the graph at `theta`: `e_i + sum_a (dg_a/dtheta_i) e_a`.
    pub fn tangent_frame(&self, split: &CoordSplit, b: f64, theta: &[f64]) -> Vec<FibrePoint> {
        let jet = self.graph_jet_at(b, theta);
        (0..self.tangent_dim)
            .map(|i| {
                let mut v = FibrePoint::new();
                for _ in 0..split.fibre_dim() {
                    v.push(0.0);
                }
                v[split.tangent[i]] = 1.0;
                for (a, &ax) in split.normal.iter().enumerate() {
                    v[ax] = jet[a][i];
                }
                v
            })
            .collect()
    }

    /// Signed normal offsets of an ambient point from the graph.
    pub fn normal_offset(&self, split: &CoordSplit, b: f64, x: &[f64]) -> FibrePoint {
        let theta: FibrePoint = split.tangent.iter().map(|&a| x[a]).collect();
        let g = self.offsets(b, &theta);
        split
            .normal
            .iter()
            .zip(g.iter())
            .map(|(&ax, &ga)| x[ax] - ga)
            .collect()
    }

    /// Sup over a probe grid of omega evaluated on graph tangent pairs.
    pub fn lagrangian_defect(&self, model: &SymplecticBundleModel, per_axis: usize) -> f64 {
        let mut sup: f64 = 0.0;
        for &b in model.base.samples() {
            for theta in tangent_grid(self.tangent_dim, per_axis) {
                let x = self.embed(&model.split, b, &theta);
                let frame = self.tangent_frame(&model.split, b, &theta);
                for i in 0..frame.len() {
                    for j in i + 1..frame.len() {
                        sup = sup.max(model.omega_eval(b, &x, &frame[i], &frame[j]).abs());
                    }
                }
            }
        }
        sup
    }

    /// Record the Lagrangian defect; certify when it clears 1e-8.
    pub fn certify(mut self, model: &SymplecticBundleModel, per_axis: usize) -> Result<Self> {
        let defect = self.lagrangian_defect(model, per_axis);
        self.defect = Some(defect);
        if defect > 1e-8 {
            return Err(Error::NotLagrangian { defect });
        }
        self.certified = true;
        Ok(self)
    }
}

const DEFAULT_GRAPH_FD: f64 = 1e-5;

/// Check that a point sits inside the tubular domain around `l`.
pub fn check_tubular(
    model: &SymplecticBundleModel,
    l: &LagrangianSubbundle,
    b: f64,
    x: &[f64],
) -> Result<()> {
    let off = l.normal_offset(&model.split, b, x);
    let sup = off.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sup > model.tubular_radius + 1e-12 {
        return Err(Error::OutsideTubularDomain {
            offset: sup,
            radius: model.tubular_radius,
        });
    }
    Ok(())
}

/// Builds the graph 1-form backing a subbundle as a field form on the tangent
/// torus (offsets are the covector components in the tubular trivialisation).
pub fn graph_form(l: &LagrangianSubbundle, domain: Domain) -> FieldForm {
    let g = l.graph.clone();
    let nd = l.normal_dim;
    let td = l.tangent_dim;
    let jet = l.graph_jet.clone();
    let mut out = FieldForm::new(
        td,
        1,
        domain,
        Arc::new(move |b, th| {
            let o = g(b, th);
            (0..nd).map(|a| o[a]).collect()
        }),
    );
    if let Some(j) = jet {
        out = out.with_jet(Arc::new(move |b: f64, th: &[f64]| -> Jet {
            let m = j(b, th);
            (0..nd)
                .map(|a| (0..td).map(|t| m[a][t]).collect())
                .collect()
        }));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cylinder_model_validates() {
        let p = ModelParams {
            fibre_resolution: vec![16, 9],
            c_amplitude: 0.5,
            ..Default::default()
        };
        let m = SymplecticBundleModel::cylinder(&p).unwrap();
        m.validate().unwrap();
        assert_eq!(m.fibre_dim(), 2);
        assert!((m.min_scale - 0.5).abs() < 0.05);
    }

    #[test]
    fn torus4_omega_matrix_pairs_axes() {
        let p = ModelParams {
            fibre_resolution: vec![8, 8, 8, 8],
            ..Default::default()
        };
        let m = SymplecticBundleModel::torus4(&p, PolKind::Standard).unwrap();
        m.validate().unwrap();
        let w = m.omega_matrix(0.0, &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(w[0][2], 1.0);
        assert_eq!(w[1][3], 1.0);
        assert_eq!(w[2][0], -1.0);
        assert_eq!(w[0][1], 0.0);
    }

    #[test]
    fn zero_section_is_lagrangian() {
        let p = ModelParams {
            fibre_resolution: vec![16, 9],
            ..Default::default()
        };
        let m = SymplecticBundleModel::cylinder(&p).unwrap();
        let l = LagrangianSubbundle::zero(&m.split).certify(&m, 8).unwrap();
        assert!(l.certified);
        assert_eq!(l.defect, Some(0.0));
    }

    #[test]
    fn tilted_graph_is_lagrangian_on_cylinder() {
        let p = ModelParams {
            fibre_resolution: vec![16, 9],
            ..Default::default()
        };
        let m = SymplecticBundleModel::cylinder(&p).unwrap();
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
        // 1-dimensional fibres of L are automatically Lagrangian
        let l = l.certify(&m, 16).unwrap();
        assert!(l.defect.unwrap() <= 1e-8);
    }

    #[test]
    fn non_lagrangian_graph_is_rejected_on_torus4() {
        let p = ModelParams {
            fibre_resolution: vec![8, 8, 8, 8],
            ..Default::default()
        };
        let m = SymplecticBundleModel::torus4(&p, PolKind::Standard).unwrap();
        // r = (sin theta2, 0) has dalpha != 0, hence omega on the graph != 0
        let l = LagrangianSubbundle::from_graph(
            2,
            2,
            Arc::new(|_, th| {
                let mut g = FibrePoint::new();
                g.push(th[1].sin());
                g.push(0.0);
                g
            }),
            None,
        );
        match l.certify(&m, 12) {
            Err(Error::NotLagrangian { defect }) => {
                assert!((defect - 1.0).abs() < 1e-3, "defect {defect}");
            }
            Err(other) => panic!("expected NotLagrangian, got {other:?}"),
            Ok(_) => panic!("expected NotLagrangian, got certified subbundle"),
        }
    }

    #[test]
    fn sheared_leaf_coords_invert_leaf() {
        let pol = sheared_polarization([[1.0, 1.0], [1.0, 2.0]]);
        let x0 = [0.3, 0.7, 0.0, 0.0];
        let s = [0.11, -0.05];
        let y = (pol.leaf)(0.0, &x0, &s);
        let (base, s_back) = (pol.leaf_coords)(0.0, &y);
        assert!((base[0] - 0.3).abs() < 1e-14);
        assert!((base[1] - 0.7).abs() < 1e-14);
        assert!((s_back[0] - s[0]).abs() < 1e-14);
        assert!((s_back[1] - s[1]).abs() < 1e-14);
    }
}
