//! Fibred differential forms in two backends.
//!
//! A fibred `k`-form is a family, over the base samples, of `k`-forms on the
//! typical fibre. The cochain backend stores one real vector per base sample,
//! indexed by the `k`-cells of a [`FibreComplex`]; the field backend stores a
//! callable giving the components at `(b, x)` in the lexicographic order of
//! the `k`-subsets of fibre axes, optionally with an exact derivative
//! callable. Backends never mix inside one expression; conversion samples
//! explicitly.

use crate::complex::{combinations, Domain, FibreComplex, FibrePoint, MAX_DIM};
use crate::error::{Error, Result};
use crate::grid::BaseGrid;
use crate::linalg::{minor_det, SmallMat};
use rayon::prelude::*;
use std::sync::Arc;

/// Component list of a form at a point; at most C(4,2) = 6 entries.
pub type Components = arrayvec::ArrayVec<f64, 8>;
/// jet[c][a] = d(component c)/d(x_a).
pub type Jet = arrayvec::ArrayVec<Components, 8>;

pub type FieldEval = Arc<dyn Fn(f64, &[f64]) -> Components + Send + Sync>;
pub type FieldJet = Arc<dyn Fn(f64, &[f64]) -> Jet + Send + Sync>;
pub type PointFn = Arc<dyn Fn(f64, &[f64]) -> FibrePoint + Send + Sync>;
pub type MatFn = Arc<dyn Fn(f64, &[f64]) -> SmallMat + Send + Sync>;

pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Second-order partial derivative of a scalar sample of `f`, central inside
/// the domain and one-sided within a step of a bounded edge.
pub fn fd_partial(
    f: &dyn Fn(&[f64]) -> f64,
    domain: &Domain,
    x: &[f64],
    axis: usize,
    h: f64,
) -> f64 {
    let ax = domain.axes[axis];
    let mut xp = FibrePoint::new();
    xp.try_extend_from_slice(x).unwrap();
    let eval = |v: f64, xp: &mut FibrePoint| {
        xp[axis] = v;
        let y = f(xp);
        xp[axis] = x[axis];
        y
    };
    if !ax.periodic && x[axis] + h > ax.max {
        // backward one-sided
        (3.0 * eval(x[axis], &mut xp) - 4.0 * eval(x[axis] - h, &mut xp)
            + eval(x[axis] - 2.0 * h, &mut xp))
            / (2.0 * h)
    } else if !ax.periodic && x[axis] - h < ax.min {
        (-3.0 * eval(x[axis], &mut xp) + 4.0 * eval(x[axis] + h, &mut xp)
            - eval(x[axis] + 2.0 * h, &mut xp))
            / (2.0 * h)
    } else {
        (eval(x[axis] + h, &mut xp) - eval(x[axis] - h, &mut xp)) / (2.0 * h)
    }
}

/// Analytic-backend fibred form: components as a callable of `(b, x)`.
#[derive(Clone)]
pub struct FieldForm {
    pub fibre_dim: usize,
    pub degree: usize,
    pub domain: Domain,
    eval: FieldEval,
    jet: Option<FieldJet>,
    pub fd_step: f64,
    pub allow_fd: bool,
}

impl FieldForm {
    pub fn new(fibre_dim: usize, degree: usize, domain: Domain, eval: FieldEval) -> Self {
        debug_assert!(degree <= fibre_dim);
        debug_assert_eq!(domain.dim(), fibre_dim);
        Self {
            fibre_dim,
            degree,
            domain,
            eval,
            jet: None,
            fd_step: DEFAULT_FD_STEP,
            allow_fd: true,
        }
    }

    pub fn with_jet(mut self, jet: FieldJet) -> Self {
        self.jet = Some(jet);
        self
    }

    pub fn without_fd(mut self) -> Self {
        self.allow_fd = false;
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn has_jet(&self) -> bool {
        self.jet.is_some()
    }

    pub fn component_count(&self) -> usize {
        combinations(self.fibre_dim, self.degree).len()
    }

    /// Constant-coefficient form.
    pub fn constant(fibre_dim: usize, degree: usize, domain: Domain, comps: Vec<f64>) -> Self {
        let n_axes = fibre_dim;
        let c: Components = comps.iter().copied().collect();
        let jc = c.clone();
        Self::new(fibre_dim, degree, domain, Arc::new(move |_, _| c.clone())).with_jet(Arc::new(
            move |_, _| {
                jc.iter()
                    .map(|_| (0..n_axes).map(|_| 0.0).collect())
                    .collect()
            },
        ))
    }

    pub fn zero(fibre_dim: usize, degree: usize, domain: Domain) -> Self {
        let count = combinations(fibre_dim, degree).len();
        Self::constant(fibre_dim, degree, domain, vec![0.0; count])
    }

    pub fn components(&self, b: f64, x: &[f64]) -> Components {
        (self.eval)(b, x)
    }

    /// All partial derivatives at `(b, x)`, exact when a jet callable exists,
    /// otherwise by finite differences (one-sided at bounded edges).
    pub fn jet_at(&self, b: f64, x: &[f64]) -> Result<Jet> {
        if let Some(jet) = &self.jet {
            return Ok(jet(b, x));
        }
        if !self.allow_fd {
            return Err(Error::MissingDerivative);
        }
        let n_comp = self.component_count();
        let mut out = Jet::new();
        for c in 0..n_comp {
            let comp_fn = |y: &[f64]| (self.eval)(b, y)[c];
            let row: Components = (0..self.fibre_dim)
                .map(|a| fd_partial(&comp_fn, &self.domain, x, a, self.fd_step))
                .collect();
            out.push(row);
        }
        Ok(out)
    }

    /// Fibrewise exterior derivative.
    pub fn d(&self) -> Result<FieldForm> {
        if self.degree >= self.fibre_dim {
            return Err(Error::DegreeOverflow {
                degree: self.degree,
                fibre_dim: self.fibre_dim,
            });
        }
        if self.jet.is_none() && !self.allow_fd {
            return Err(Error::MissingDerivative);
        }
        let lower = combinations(self.fibre_dim, self.degree);
        let upper = combinations(self.fibre_dim, self.degree + 1);
        // For each output subset T and removed axis a: (face component, sign).
        let table: Vec<Vec<(usize, usize, f64)>> = upper
            .iter()
            .map(|t| {
                t.iter()
                    .enumerate()
                    .map(|(ia, &a)| {
                        let face: Vec<u8> = t.iter().copied().filter(|&y| y != a).collect();
                        let fc = lower.iter().position(|s| *s == face).unwrap();
                        let sg = if ia % 2 == 0 { 1.0 } else { -1.0 };
                        (fc, a as usize, sg)
                    })
                    .collect()
            })
            .collect();
        let this = self.clone();
        let eval: FieldEval = Arc::new(move |b, x| {
            let jet = this.jet_at(b, x).expect("derivative availability checked at build");
            table
                .iter()
                .map(|row| row.iter().map(|&(fc, a, sg)| sg * jet[fc][a]).sum())
                .collect()
        });
        Ok(FieldForm {
            fibre_dim: self.fibre_dim,
            degree: self.degree + 1,
            domain: self.domain.clone(),
            eval,
            jet: None,
            fd_step: self.fd_step,
            allow_fd: true,
        })
    }

    /// Interior product with a vertical field.
    pub fn contract(&self, z: &VerticalField) -> Result<FieldForm> {
        if self.degree == 0 {
            return Err(Error::ContractDegreeZero);
        }
        if z.fibre_dim != self.fibre_dim {
            return Err(Error::DimensionMismatch {
                expected: self.fibre_dim,
                got: z.fibre_dim,
            });
        }
        let own = combinations(self.fibre_dim, self.degree);
        let out_subsets = combinations(self.fibre_dim, self.degree - 1);
        // (i_Z a)_T = sum over axes a not in T of (-1)^{pos(a, T+a)} Z_a a_{T+a}
        let table: Vec<Vec<(usize, usize, f64)>> = out_subsets
            .iter()
            .map(|t| {
                (0..self.fibre_dim as u8)
                    .filter(|a| !t.contains(a))
                    .map(|a| {
                        let mut s: Vec<u8> = t.clone();
                        s.push(a);
                        s.sort_unstable();
                        let pos = s.iter().position(|&y| y == a).unwrap();
                        let sc = own.iter().position(|u| *u == s).unwrap();
                        let sg = if pos % 2 == 0 { 1.0 } else { -1.0 };
                        (sc, a as usize, sg)
                    })
                    .collect()
            })
            .collect();
        let this = self.clone();
        let field = z.clone();
        let eval: FieldEval = Arc::new(move |b, x| {
            let comps = this.components(b, x);
            let zv = field.at(b, x);
            table
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|&(sc, a, sg)| sg * zv[a] * comps[sc])
                        .sum()
                })
                .collect()
        });
        Ok(FieldForm {
            fibre_dim: self.fibre_dim,
            degree: self.degree - 1,
            domain: self.domain.clone(),
            eval,
            jet: None,
            fd_step: self.fd_step,
            allow_fd: true,
        })
    }

    /// Fibrewise pullback along a vertical map: components of `phi^* self`.
    pub fn pullback(&self, phi: &VerticalMap) -> Result<FieldForm> {
        if phi.fibre_dim != self.fibre_dim {
            return Err(Error::DimensionMismatch {
                expected: self.fibre_dim,
                got: phi.fibre_dim,
            });
        }
        let subsets = combinations(self.fibre_dim, self.degree);
        let this = self.clone();
        let map = phi.clone();
        let eval: FieldEval = Arc::new(move |b, x| {
            let y = map.apply(b, x);
            let j = map.jacobian_at(b, x);
            let comps = this.components(b, &y);
            subsets
                .iter()
                .map(|t| {
                    subsets
                        .iter()
                        .enumerate()
                        .map(|(si, s)| comps[si] * minor_det(&j, s, t))
                        .sum()
                })
                .collect()
        });
        Ok(FieldForm {
            fibre_dim: self.fibre_dim,
            degree: self.degree,
            domain: self.domain.clone(),
            eval,
            jet: None,
            fd_step: self.fd_step,
            allow_fd: true,
        })
    }

    /// Evaluate the form on `degree` tangent vectors.
    pub fn eval_on_vectors(&self, b: f64, x: &[f64], vectors: &[FibrePoint]) -> f64 {
        debug_assert_eq!(vectors.len(), self.degree);
        let comps = self.components(b, x);
        let mut j: SmallMat = [[0.0; MAX_DIM]; MAX_DIM];
        for (c, v) in vectors.iter().enumerate() {
            for (r, val) in v.iter().enumerate() {
                j[r][c] = *val;
            }
        }
        let cols: Vec<u8> = (0..vectors.len() as u8).collect();
        combinations(self.fibre_dim, self.degree)
            .iter()
            .enumerate()
            .map(|(si, s)| comps[si] * minor_det(&j, s, &cols))
            .sum()
    }

    /// Pointwise linear combination `self + c * other`.
    pub fn add_scaled(&self, other: &FieldForm, c: f64) -> Result<FieldForm> {
        if other.degree != self.degree {
            return Err(Error::DegreeMismatch {
                expected: self.degree,
                got: other.degree,
            });
        }
        let a = self.clone();
        let b_form = other.clone();
        let eval: FieldEval = Arc::new(move |b, x| {
            let mut u = a.components(b, x);
            let v = b_form.components(b, x);
            for (ui, vi) in u.iter_mut().zip(v.iter()) {
                *ui += c * vi;
            }
            u
        });
        let jet: Option<FieldJet> = match (self.jet.clone(), other.jet.clone()) {
            (Some(ja), Some(jb)) => Some(Arc::new(move |b, x| {
                let mut u = ja(b, x);
                let v = jb(b, x);
                for (ur, vr) in u.iter_mut().zip(v.iter()) {
                    for (ui, vi) in ur.iter_mut().zip(vr.iter()) {
                        *ui += c * vi;
                    }
                }
                u
            })),
            _ => None,
        };
        let mut out = FieldForm::new(self.fibre_dim, self.degree, self.domain.clone(), eval);
        out.jet = jet;
        out.fd_step = self.fd_step;
        Ok(out)
    }

    pub fn scaled(&self, c: f64) -> FieldForm {
        let a = self.clone();
        let eval: FieldEval = Arc::new(move |b, x| {
            let mut u = a.components(b, x);
            for ui in u.iter_mut() {
                *ui *= c;
            }
            u
        });
        let jet: Option<FieldJet> = self.jet.clone().map(|j| -> FieldJet {
            Arc::new(move |b: f64, x: &[f64]| {
                let mut u = j(b, x);
                for ur in u.iter_mut() {
                    for ui in ur.iter_mut() {
                        *ui *= c;
                    }
                }
                u
            })
        });
        let mut out = FieldForm::new(self.fibre_dim, self.degree, self.domain.clone(), eval);
        out.jet = jet;
        out.fd_step = self.fd_step;
        out
    }
}

/// Section of the vertical tangent bundle. The representation stores fibre
/// components only, so verticality holds by construction.
#[derive(Clone)]
pub struct VerticalField {
    pub fibre_dim: usize,
    eval: PointFn,
    jacobian: Option<MatFn>,
    pub domain: Domain,
    pub fd_step: f64,
}

impl VerticalField {
    pub fn new(fibre_dim: usize, domain: Domain, eval: PointFn) -> Self {
        Self {
            fibre_dim,
            eval,
            jacobian: None,
            domain,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn with_jacobian(mut self, j: MatFn) -> Self {
        self.jacobian = Some(j);
        self
    }

    pub fn at(&self, b: f64, x: &[f64]) -> FibrePoint {
        (self.eval)(b, x)
    }

    /// jacobian[i][a] = d(Y_i)/d(x_a).
    pub fn jacobian_at(&self, b: f64, x: &[f64]) -> SmallMat {
        if let Some(j) = &self.jacobian {
            return j(b, x);
        }
        let mut m: SmallMat = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..self.fibre_dim {
            let comp = |y: &[f64]| (self.eval)(b, y)[i];
            for a in 0..self.fibre_dim {
                m[i][a] = fd_partial(&comp, &self.domain, x, a, self.fd_step);
            }
        }
        m
    }
}

/// Fibre-preserving map: the base point passes through unchanged, so the
/// non-vertical failure mode is unrepresentable.
#[derive(Clone)]
pub struct VerticalMap {
    pub fibre_dim: usize,
    map: PointFn,
    jacobian: Option<MatFn>,
    pub domain: Domain,
    pub fd_step: f64,
}

impl VerticalMap {
    pub fn new(fibre_dim: usize, domain: Domain, map: PointFn) -> Self {
        Self {
            fibre_dim,
            map,
            jacobian: None,
            domain,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn identity(fibre_dim: usize, domain: Domain) -> Self {
        let id: PointFn = Arc::new(|_, x| x.iter().copied().collect());
        let mut m = Self::new(fibre_dim, domain, id);
        m.jacobian = Some(Arc::new(|_, _| {
            let mut j = [[0.0; MAX_DIM]; MAX_DIM];
            for (i, row) in j.iter_mut().enumerate() {
                row[i] = 1.0;
            }
            j
        }));
        m
    }

    pub fn with_jacobian(mut self, j: MatFn) -> Self {
        self.jacobian = Some(j);
        self
    }

    pub fn apply(&self, b: f64, x: &[f64]) -> FibrePoint {
        (self.map)(b, x)
    }

    pub fn compose(&self, inner: &VerticalMap) -> VerticalMap {
        let outer = self.clone();
        let first = inner.clone();
        let map: PointFn = Arc::new(move |b, x| outer.apply(b, &first.apply(b, x)));
        VerticalMap {
            fibre_dim: self.fibre_dim,
            map,
            jacobian: None,
            domain: inner.domain.clone(),
            fd_step: self.fd_step,
        }
    }

    /// jacobian[i][a] = d(phi_i)/d(x_a).
    pub fn jacobian_at(&self, b: f64, x: &[f64]) -> SmallMat {
        if let Some(j) = &self.jacobian {
            return j(b, x);
        }
        let mut m: SmallMat = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..self.fibre_dim {
            let comp = |y: &[f64]| (self.map)(b, y)[i];
            for a in 0..self.fibre_dim {
                m[i][a] = fd_partial(&comp, &self.domain, x, a, self.fd_step);
            }
        }
        m
    }
}

/// Discrete-backend fibred form: one cochain vector per base sample.
#[derive(Clone, Debug)]
pub struct CochainForm {
    pub complex: Arc<FibreComplex>,
    pub degree: usize,
    pub values: Vec<Vec<f64>>,
}

impl CochainForm {
    pub fn zero(complex: Arc<FibreComplex>, degree: usize, samples: usize) -> Self {
        let n = complex.cell_count(degree);
        Self {
            complex,
            degree,
            values: vec![vec![0.0; n]; samples],
        }
    }

    pub fn from_values(
        complex: Arc<FibreComplex>,
        degree: usize,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = complex.cell_count(degree);
        for (s, v) in values.iter().enumerate() {
            if v.len() != n {
                return Err(Error::InvalidComplex(format!(
                    "sample {s} has {} values, expected {n} {degree}-cells",
                    v.len()
                )));
            }
        }
        Ok(Self { complex, degree, values })
    }

    pub fn samples(&self) -> usize {
        self.values.len()
    }

    /// Fibrewise exterior derivative, sample by sample.
    pub fn d(&self) -> Result<CochainForm> {
        let out: Result<Vec<Vec<f64>>> = self
            .values
            .par_iter()
            .map(|v| self.complex.apply_d(self.degree, v))
            .collect();
        Ok(CochainForm {
            complex: self.complex.clone(),
            degree: self.degree + 1,
            values: out?,
        })
    }

    /// Sup norm with cochain values read as cell averages (value / volume).
    pub fn sup_norm(&self) -> f64 {
        let blocks = self.complex.blocks(self.degree);
        self.values
            .iter()
            .map(|v| {
                blocks
                    .iter()
                    .flat_map(|b| {
                        v[b.offset..b.offset + b.size]
                            .iter()
                            .map(move |x| (x / b.volume).abs())
                    })
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn slice(&self, sample: usize) -> Result<&[f64]> {
        self.values
            .get(sample)
            .map(|v| v.as_slice())
            .ok_or(Error::SampleOutOfRange {
                index: sample,
                len: self.values.len(),
            })
    }

    pub fn add_scaled(&self, other: &CochainForm, c: f64) -> Result<CochainForm> {
        if other.degree != self.degree {
            return Err(Error::DegreeMismatch {
                expected: self.degree,
                got: other.degree,
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + c * y).collect())
            .collect();
        Ok(CochainForm {
            complex: self.complex.clone(),
            degree: self.degree,
            values,
        })
    }
}

/// Midpoint de Rham sampling: each cell receives its component at the cell
/// centre times the cell volume, a second-order quadrature of the cell
/// integral.
pub fn sample_to_cochain(
    field: &FieldForm,
    base: &BaseGrid,
    complex: &Arc<FibreComplex>,
) -> Result<CochainForm> {
    if field.fibre_dim != complex.dim() {
        return Err(Error::DimensionMismatch {
            expected: complex.dim(),
            got: field.fibre_dim,
        });
    }
    let k = field.degree;
    let blocks = complex.blocks(k);
    let values: Vec<Vec<f64>> = base
        .samples()
        .par_iter()
        .map(|&b| {
            let mut v = vec![0.0; complex.cell_count(k)];
            for (bi, block) in blocks.iter().enumerate() {
                for local in 0..block.size {
                    let cell = block.offset + local;
                    let center = complex.cell_center(k, cell);
                    let comps = field.components(b, &center);
                    v[cell] = comps[bi] * block.volume;
                }
            }
            v
        })
        .collect();
    CochainForm::from_values(complex.clone(), k, values)
}

#[derive(Clone)]
pub enum FormData {
    Cochain(CochainForm),
    Field(FieldForm),
}

/// A fibred form tied to a base grid.
#[derive(Clone)]
pub struct FibredForm {
    pub base: Arc<BaseGrid>,
    pub data: FormData,
}

/// One fibre slice of a fibred form.
pub enum FormSlice {
    Cochain {
        complex: Arc<FibreComplex>,
        degree: usize,
        values: Vec<f64>,
    },
    Field {
        degree: usize,
        eval: Box<dyn Fn(&[f64]) -> Components>,
    },
}

impl FibredForm {
    pub fn cochain(base: Arc<BaseGrid>, form: CochainForm) -> Result<Self> {
        if form.samples() != base.len() {
            return Err(Error::InvalidGrid(format!(
                "{} cochain slices for {} base samples",
                form.samples(),
                base.len()
            )));
        }
        Ok(Self { base, data: FormData::Cochain(form) })
    }

    pub fn field(base: Arc<BaseGrid>, form: FieldForm) -> Self {
        Self { base, data: FormData::Field(form) }
    }

    pub fn degree(&self) -> usize {
        match &self.data {
            FormData::Cochain(c) => c.degree,
            FormData::Field(f) => f.degree,
        }
    }

    pub fn backend(&self) -> &'static str {
        match &self.data {
            FormData::Cochain(_) => "cochain",
            FormData::Field(_) => "field",
        }
    }

    pub fn as_cochain(&self) -> Result<&CochainForm> {
        match &self.data {
            FormData::Cochain(c) => Ok(c),
            FormData::Field(_) => Err(Error::BackendMismatch {
                expected: "cochain",
                got: "field",
            }),
        }
    }

    pub fn as_field(&self) -> Result<&FieldForm> {
        match &self.data {
            FormData::Field(f) => Ok(f),
            FormData::Cochain(_) => Err(Error::BackendMismatch {
                expected: "field",
                got: "cochain",
            }),
        }
    }
}

/// Fibred exterior derivative `d_p`; the restriction to each sample is the
/// ordinary exterior derivative there.
pub fn fibred_d(form: &FibredForm) -> Result<FibredForm> {
    let data = match &form.data {
        FormData::Cochain(c) => FormData::Cochain(c.d()?),
        FormData::Field(f) => FormData::Field(f.d()?),
    };
    Ok(FibredForm { base: form.base.clone(), data })
}

/// Restriction to the fibre over sample `index`.
pub fn restrict(form: &FibredForm, index: usize) -> Result<FormSlice> {
    if index >= form.base.len() {
        return Err(Error::SampleOutOfRange {
            index,
            len: form.base.len(),
        });
    }
    match &form.data {
        FormData::Cochain(c) => Ok(FormSlice::Cochain {
            complex: c.complex.clone(),
            degree: c.degree,
            values: c.values[index].clone(),
        }),
        FormData::Field(f) => {
            let b = form.base.samples()[index];
            let g = f.clone();
            Ok(FormSlice::Field {
                degree: f.degree,
                eval: Box::new(move |x| g.components(b, x)),
            })
        }
    }
}

/// Interior product with a vertical field (field backend only).
pub fn contract(z: &VerticalField, form: &FibredForm) -> Result<FibredForm> {
    let f = form.as_field()?;
    Ok(FibredForm::field(form.base.clone(), f.contract(z)?))
}

/// Fibrewise pullback along a vertical map (field backend only).
pub fn pullback(phi: &VerticalMap, form: &FibredForm) -> Result<FibredForm> {
    let f = form.as_field()?;
    Ok(FibredForm::field(form.base.clone(), f.pullback(phi)?))
}

/// Fibred Lie derivative via the Cartan formula
/// `L_Z a = Z . d_p a + d_p(Z . a)`.
pub fn lie_derivative(z: &VerticalField, form: &FibredForm) -> Result<FibredForm> {
    let f = form.as_field()?;
    let term1 = if f.degree < f.fibre_dim {
        f.d()?.contract(z)?
    } else {
        FieldForm::zero(f.fibre_dim, f.degree, f.domain.clone())
    };
    let term2 = if f.degree > 0 {
        f.contract(z)?.d()?
    } else {
        // L_Z of a function: Z . d f
        f.d()?.contract(z)?
    };
    if f.degree == 0 {
        return Ok(FibredForm::field(form.base.clone(), term2));
    }
    Ok(FibredForm::field(
        form.base.clone(),
        term1.add_scaled(&term2, 1.0)?,
    ))
}
