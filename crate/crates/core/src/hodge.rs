//! The glued right-inverse of the fibred differential.
//!
//! Over each patch of the base cover the fibres are identified with a
//! reference fibre, a Green solve of the flat cochain Laplacian inverts `d`
//! there, and the partition of unity glues the per-patch inverses:
//! `delta(a)_b = sum_i rho_i(b) T_i^{-1} delta_ref(T_i a_b)`. The identity
//! `d delta d = d` survives the gluing because the identifications commute
//! with `d`.

use crate::complex::FibreComplex;
use crate::error::{Error, Result};
use crate::forms::CochainForm;
use crate::grid::BaseGrid;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use sprs::{CsMat, FillInReduction, SymmetryCheck, TriMat};
use sprs_ldl::{Ldl, LdlNumeric};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Identification of the fibre over a sample with the patch reference fibre.
#[derive(Clone, Debug)]
pub enum Trivialization {
    Identity,
    /// Integer grid translation per axis; a cochain automorphism commuting
    /// with `d`. Requires a fully periodic complex.
    GridShift(Vec<i64>),
}

impl Trivialization {
    fn permutation(&self, cx: &FibreComplex, degree: usize, invert: bool) -> Option<Vec<usize>> {
        match self {
            Trivialization::Identity => None,
            Trivialization::GridShift(shift) => {
                let n = cx.dim();
                let mut perm = vec![0usize; cx.cell_count(degree)];
                for (bi, block) in cx.blocks(degree).iter().enumerate() {
                    let mut pos = [0usize; crate::complex::MAX_DIM];
                    for _ in 0..block.size {
                        let src = cx.cell_id(degree, bi, &pos);
                        let mut tgt = pos;
                        for a in 0..n {
                            let ext = block.extents[a] as i64;
                            let s = if invert { -shift[a] } else { shift[a] };
                            tgt[a] = ((pos[a] as i64 + s).rem_euclid(ext)) as usize;
                        }
                        perm[src] = cx.cell_id(degree, bi, &tgt);
                        for a in (0..n).rev() {
                            pos[a] += 1;
                            if pos[a] < block.extents[a] {
                                break;
                            }
                            pos[a] = 0;
                        }
                    }
                }
                Some(perm)
            }
        }
    }

    fn apply(&self, cx: &FibreComplex, degree: usize, values: &[f64], invert: bool) -> Vec<f64> {
        match self.permutation(cx, degree, invert) {
            None => values.to_vec(),
            Some(perm) => {
                let mut out = vec![0.0; values.len()];
                for (src, &tgt) in perm.iter().enumerate() {
                    out[tgt] = values[src];
                }
                out
            }
        }
    }
}

/// One-degree Green solve on the reference fibre: `delta = G d*` with the
/// harmonic kernel removed by pinning one cell per block and projecting.
struct GreenSolver {
    d_up_csr: CsMat<f64>,
    s_up: Vec<f64>,
    s_here: Vec<f64>,
    ldl: LdlNumeric<f64, usize>,
    blocks: Vec<(usize, usize)>,
}

fn coboundary_trimat(cx: &FibreComplex, k: usize) -> TriMat<f64> {
    let cob = cx.coboundary(k);
    let mut t = TriMat::new((cob.rows, cob.cols));
    for r in 0..cob.rows {
        for e in cob.row_ptr[r] as usize..cob.row_ptr[r + 1] as usize {
            t.add_triplet(r, cob.col_idx[e] as usize, cob.sign[e] as f64);
        }
    }
    t
}

fn star_diag(cx: &FibreComplex, k: usize) -> Vec<f64> {
    let mut s = vec![0.0; cx.cell_count(k)];
    let total: f64 = cx.axes().iter().map(|a| a.spacing()).product();
    for block in cx.blocks(k) {
        // dual volume / primal volume on the flat grid
        let v = total / (block.volume * block.volume);
        for i in block.offset..block.offset + block.size {
            s[i] = v;
        }
    }
    s
}

fn diag_csr(d: &[f64]) -> CsMat<f64> {
    let mut t = TriMat::new((d.len(), d.len()));
    for (i, &v) in d.iter().enumerate() {
        t.add_triplet(i, i, v);
    }
    t.to_csr()
}

fn remove_block_means(blocks: &[(usize, usize)], v: &mut [f64]) {
    for &(offset, size) in blocks {
        let mean: f64 = v[offset..offset + size].iter().sum::<f64>() / size as f64;
        for x in &mut v[offset..offset + size] {
            *x -= mean;
        }
    }
}

impl GreenSolver {
    fn build(cx: &FibreComplex, k: usize) -> Result<Self> {
        let n = cx.dim();
        if k >= n {
            return Err(Error::DegreeOverflow { degree: k, fibre_dim: n });
        }
        let d_up_csr: CsMat<f64> = coboundary_trimat(cx, k).to_csr();
        let s_up = star_diag(cx, k + 1);
        let s_here = star_diag(cx, k);

        // L = d^T S_up d (+ S d_down S_down^-1 d_down^T S for k > 0)
        let d_up_t: CsMat<f64> = {
            let cob = cx.coboundary(k);
            let mut t = TriMat::new((cob.cols, cob.rows));
            for r in 0..cob.rows {
                for e in cob.row_ptr[r] as usize..cob.row_ptr[r + 1] as usize {
                    t.add_triplet(cob.col_idx[e] as usize, r, cob.sign[e] as f64);
                }
            }
            t.to_csr()
        };
        let mut l: CsMat<f64> = &(&d_up_t * &diag_csr(&s_up)) * &d_up_csr;
        if k > 0 {
            let d_down: CsMat<f64> = coboundary_trimat(cx, k - 1).to_csr();
            let s_down_inv: Vec<f64> = star_diag(cx, k - 1).iter().map(|v| 1.0 / v).collect();
            let c: CsMat<f64> = &diag_csr(&s_here) * &d_down; // S_k d_{k-1}
            let ct = c.clone().transpose_into().to_csr();
            let term: CsMat<f64> = &(&c * &diag_csr(&s_down_inv)) * &ct;
            l = &l + &term;
        }

        let blocks: Vec<(usize, usize)> = cx
            .blocks(k)
            .iter()
            .map(|b| (b.offset, b.size))
            .collect();
        // pin the first cell of every block: the kernel is exactly the
        // blockwise constants, so the reduced matrix is positive definite
        let pinned: Vec<usize> = blocks.iter().map(|&(o, _)| o).collect();
        let nn = l.rows();
        let mut t = TriMat::new((nn, nn));
        for (row, vec) in l.outer_iterator().enumerate() {
            let rp = pinned.contains(&row);
            for (col, &val) in vec.iter() {
                if rp || pinned.contains(&col) {
                    continue;
                }
                if val != 0.0 {
                    t.add_triplet(row, col, val);
                }
            }
        }
        for &p in &pinned {
            t.add_triplet(p, p, 1.0);
        }
        let pinned_l: CsMat<f64> = t.to_csr();
        let ldl = Ldl::new()
            .check_symmetry(SymmetryCheck::DontCheckSymmetry)
            .fill_in_reduction(FillInReduction::ReverseCuthillMcKee)
            .numeric(pinned_l.view())
            .map_err(|e| Error::LinearSolve(format!("ldl factorisation failed: {e:?}")))?;

        Ok(Self {
            d_up_csr,
            s_up,
            s_here,
            ldl,
            blocks,
        })
    }

    /// `delta(beta)` for one fibre slice of a `(k+1)`-form.
    fn delta_slice(&self, beta: &[f64]) -> Vec<f64> {
        // rhs = d^T (S_up beta), orthogonal to the harmonic blocks
        let weighted: Vec<f64> = beta.iter().zip(&self.s_up).map(|(b, s)| b * s).collect();
        let mut rhs = vec![0.0; self.s_here.len()];
        // d^T y accumulated row-wise over d
        for (row, vec) in self.d_up_csr.outer_iterator().enumerate() {
            let w = weighted[row];
            if w != 0.0 {
                for (col, &val) in vec.iter() {
                    rhs[col] += val * w;
                }
            }
        }
        remove_block_means(&self.blocks, &mut rhs);
        for &(offset, _) in &self.blocks {
            rhs[offset] = 0.0;
        }
        let mut x = self.ldl.solve(&rhs);
        remove_block_means(&self.blocks, &mut x);
        x
    }
}

/// The glued right-inverse of `d` over the base cover, with one factorised
/// Green solve per degree shared by all patches and samples.
pub struct DeltaOperator {
    pub complex: Arc<FibreComplex>,
    pub base: Arc<BaseGrid>,
    solvers: BTreeMap<usize, Arc<GreenSolver>>,
    trivializations: Vec<Trivialization>,
}

/// Build the operator for the given output degrees `k` (so that
/// `delta: Omega^{k+1} -> Omega^k` is available), with identity
/// trivializations on every patch.
pub fn build_delta(
    complex: Arc<FibreComplex>,
    base: Arc<BaseGrid>,
    degrees: &[usize],
) -> Result<DeltaOperator> {
    let trivs = vec![Trivialization::Identity; base.patches().len()];
    build_delta_with_trivializations(complex, base, degrees, trivs)
}

pub fn build_delta_with_trivializations(
    complex: Arc<FibreComplex>,
    base: Arc<BaseGrid>,
    degrees: &[usize],
    trivializations: Vec<Trivialization>,
) -> Result<DeltaOperator> {
    if !complex.is_fully_periodic() {
        return Err(Error::NonPeriodicHodge);
    }
    if trivializations.len() != base.patches().len() {
        return Err(Error::InvalidGrid(format!(
            "{} trivializations for {} patches",
            trivializations.len(),
            base.patches().len()
        )));
    }
    let mut solvers = BTreeMap::new();
    for &k in degrees {
        if k >= complex.dim() {
            return Err(Error::DegreeOverflow {
                degree: k,
                fibre_dim: complex.dim(),
            });
        }
        solvers
            .entry(k)
            .or_insert(Arc::new(GreenSolver::build(&complex, k)?));
    }
    Ok(DeltaOperator {
        complex,
        base,
        solvers,
        trivializations,
    })
}

impl DeltaOperator {
    pub fn degrees(&self) -> Vec<usize> {
        self.solvers.keys().copied().collect()
    }

    fn solver(&self, k: usize) -> Result<&Arc<GreenSolver>> {
        self.solvers.get(&k).ok_or(Error::DegreeNotBuilt { degree: k })
    }

    /// Apply the glued `delta` to a `(k+1)`-form, producing a `k`-form.
    pub fn apply(&self, beta: &CochainForm) -> Result<CochainForm> {
        if beta.degree == 0 {
            return Err(Error::DegreeNotBuilt { degree: 0 });
        }
        let k = beta.degree - 1;
        let solver = self.solver(k)?.clone();
        let m = self.base.len();
        if beta.samples() != m {
            return Err(Error::InvalidGrid(format!(
                "{} cochain slices for {} base samples",
                beta.samples(),
                m
            )));
        }
        let values: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|s| {
                let slice = &beta.values[s];
                let mut acc = vec![0.0; self.complex.cell_count(k)];
                for (p, triv) in self.trivializations.iter().enumerate() {
                    let w = self.base.weight(p, s);
                    if w == 0.0 {
                        continue;
                    }
                    let pushed = triv.apply(&self.complex, k + 1, slice, false);
                    let solved = solver.delta_slice(&pushed);
                    let pulled = triv.apply(&self.complex, k, &solved, true);
                    for (a, v) in acc.iter_mut().zip(&pulled) {
                        *a += w * v;
                    }
                }
                acc
            })
            .collect();
        CochainForm::from_values(self.complex.clone(), k, values)
    }

    /// `P = delta_p d_p`, the projection onto the complement of the
    /// fibrewise-closed forms.
    pub fn projection_complement(&self, alpha: &CochainForm) -> Result<CochainForm> {
        if alpha.degree >= self.complex.dim() {
            // top forms are closed
            return Ok(CochainForm::zero(
                self.complex.clone(),
                alpha.degree,
                alpha.samples(),
            ));
        }
        self.apply(&alpha.d()?)
    }

    /// Splitting `alpha = closed + complement` with `complement =
    /// delta_p d_p alpha` and `closed` defined as the exact elementwise
    /// difference `alpha - complement`.
    pub fn project_closed(&self, alpha: &CochainForm) -> Result<(CochainForm, CochainForm)> {
        let complement = self.projection_complement(alpha)?;
        let closed = alpha.add_scaled(&complement, -1.0)?;
        Ok((closed, complement))
    }

    /// A smooth family of primitives of a fibrewise-exact form; errors with
    /// the offending sample when a restriction is not exact.
    pub fn primitive_family(&self, alpha: &CochainForm) -> Result<CochainForm> {
        let prim = self.apply(alpha)?;
        let reconstructed = prim.d()?;
        let blocks = self.complex.blocks(alpha.degree);
        for s in 0..alpha.samples() {
            let mut residual = 0.0f64;
            for b in blocks {
                for i in b.offset..b.offset + b.size {
                    residual = residual
                        .max(((reconstructed.values[s][i] - alpha.values[s][i]) / b.volume).abs());
                }
            }
            if residual > 1e-6 {
                return Err(Error::NotExact { sample: s, residual });
            }
        }
        Ok(prim)
    }
}

/// Residual summary for one degree, serialised by the CLI.
#[derive(Clone, Debug, serde::Serialize)]
pub struct HodgeReport {
    pub degree: usize,
    pub trials: usize,
    pub sup_residual_d_delta_d: f64,
    pub idempotence_residual: f64,
    pub kernel_residual: f64,
    pub per_sample: Vec<f64>,
}

/// Randomised verification of the right-inverse identity, the projection
/// idempotence and the closed-form kernel at one degree.
pub fn hodge_report(
    delta: &DeltaOperator,
    degree: usize,
    trials: usize,
    seed: u64,
) -> Result<HodgeReport> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let cx = &delta.complex;
    let m = delta.base.len();
    let n_cells = cx.cell_count(degree);
    let mut sup = 0.0f64;
    let mut idem = 0.0f64;
    let mut kernel = 0.0f64;
    let mut per_sample = vec![0.0f64; m];

    for _ in 0..trials {
        let values: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n_cells).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let alpha = CochainForm::from_values(cx.clone(), degree, values)?;
        let d_alpha = alpha.d()?;
        let delta_d = delta.apply(&d_alpha)?;
        let d_delta_d = delta_d.d()?;
        let diff = d_delta_d.add_scaled(&d_alpha, -1.0)?;
        let denom = d_alpha.sup_norm().max(1e-300);
        sup = sup.max(diff.sup_norm() / denom);
        for s in 0..m {
            let mut worst = 0.0f64;
            for b in cx.blocks(degree + 1) {
                for i in b.offset..b.offset + b.size {
                    worst = worst.max((diff.values[s][i] / b.volume).abs() / denom);
                }
            }
            per_sample[s] = per_sample[s].max(worst);
        }

        // idempotence of P = delta d
        let p1 = delta.projection_complement(&alpha)?;
        let p2 = delta.projection_complement(&p1)?;
        let pdiff = p2.add_scaled(&p1, -1.0)?;
        idem = idem.max(pdiff.sup_norm() / p1.sup_norm().max(1e-300));

        // constructed closed form: d(random) + blockwise constants
        let closed = if degree == 0 {
            let values: Vec<Vec<f64>> = (0..m)
                .map(|_| vec![rng.gen_range(-1.0..1.0); n_cells])
                .collect();
            CochainForm::from_values(cx.clone(), degree, values)?
        } else {
            let lower_cells = cx.cell_count(degree - 1);
            let lower: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..lower_cells).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let mut exact = CochainForm::from_values(cx.clone(), degree - 1, lower)?.d()?;
            for s in 0..m {
                for b in cx.blocks(degree) {
                    let c = rng.gen_range(-1.0..1.0) * b.volume;
                    for i in b.offset..b.offset + b.size {
                        exact.values[s][i] += c;
                    }
                }
            }
            exact
        };
        let p_closed = delta.projection_complement(&closed)?;
        kernel = kernel.max(p_closed.sup_norm() / closed.sup_norm().max(1e-300));
    }

    Ok(HodgeReport {
        degree,
        trials,
        sup_residual_d_delta_d: sup,
        idempotence_residual: idem,
        kernel_residual: kernel,
        per_sample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CoverSpec;

    fn t2(n: usize) -> Arc<FibreComplex> {
        Arc::new(FibreComplex::torus(&[n, n]).unwrap())
    }

    #[test]
    fn right_inverse_identity_single_patch() {
        let cx = t2(16);
        let base = Arc::new(BaseGrid::circle(4).unwrap());
        let delta = build_delta(cx, base, &[0, 1]).unwrap();
        for degree in [0usize, 1] {
            let r = hodge_report(&delta, degree, 5, 7).unwrap();
            assert!(
                r.sup_residual_d_delta_d <= 1e-8,
                "degree {degree}: {:.3e}",
                r.sup_residual_d_delta_d
            );
            assert!(r.idempotence_residual <= 1e-8);
            assert!(r.kernel_residual <= 1e-8);
        }
    }

    #[test]
    fn twisted_two_patch_cover_preserves_identity() {
        let cx = t2(12);
        let base = Arc::new(
            BaseGrid::circle(12)
                .unwrap()
                .with_cover(CoverSpec::TwoPatch)
                .unwrap(),
        );
        let trivs = vec![
            Trivialization::Identity,
            Trivialization::GridShift(vec![3, 5]),
        ];
        let delta =
            build_delta_with_trivializations(cx, base, &[0, 1], trivs).unwrap();
        for degree in [0usize, 1] {
            let r = hodge_report(&delta, degree, 5, 11).unwrap();
            assert!(
                r.sup_residual_d_delta_d <= 1e-8,
                "degree {degree}: {:.3e}",
                r.sup_residual_d_delta_d
            );
        }
    }

    #[test]
    fn one_patch_cover_matches_per_fibre_solve() {
        // a degenerate cover with weight 1 everywhere equals the plain solve
        let cx = t2(8);
        let base1 = Arc::new(BaseGrid::circle(5).unwrap());
        let delta = build_delta(cx.clone(), base1.clone(), &[0]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let vals: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..cx.cell_count(1)).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let beta = CochainForm::from_values(cx.clone(), 1, vals).unwrap();
        let out = delta.apply(&beta).unwrap();
        let single = delta.solver(0).unwrap();
        for s in 0..5 {
            let direct = single.delta_slice(&beta.values[s]);
            assert_eq!(out.values[s], direct, "sample {s} identical");
        }
    }

    #[test]
    fn delta_of_zero_is_zero() {
        let cx = t2(8);
        let base = Arc::new(BaseGrid::circle(3).unwrap());
        let delta = build_delta(cx.clone(), base, &[0]).unwrap();
        let beta = CochainForm::zero(cx, 1, 3);
        let out = delta.apply(&beta).unwrap();
        assert!(out.sup_norm() == 0.0);
    }

    #[test]
    fn closed_but_not_exact_form_is_reported() {
        // dtheta on the circle fibre: harmonic, so delta d delta misses it
        let cx = Arc::new(FibreComplex::torus(&[16]).unwrap());
        let base = Arc::new(BaseGrid::circle(3).unwrap());
        let delta = build_delta(cx.clone(), base, &[0]).unwrap();
        let h = std::f64::consts::TAU / 16.0;
        let vals = vec![vec![h; 16]; 3];
        let dtheta = CochainForm::from_values(cx, 1, vals).unwrap();
        match delta.primitive_family(&dtheta) {
            Err(Error::NotExact { sample: 0, residual }) => {
                assert!((residual - 1.0).abs() < 1e-9, "harmonic norm, got {residual}");
            }
            other => panic!("expected NotExact, got {other:?}"),
        }
    }

    #[test]
    fn primitive_of_discrete_exact_family() {
        let cx = t2(24);
        let m = 6;
        let base = Arc::new(BaseGrid::circle(m).unwrap());
        let delta = build_delta(cx.clone(), base.clone(), &[0]).unwrap();
        // alpha_b = d(sampled cos(t1) * s(b)) with s(b) = 1 + 0.3 sin b
        let mut lower = Vec::new();
        for &b in base.samples() {
            let s = 1.0 + 0.3 * b.sin();
            lower.push(
                (0..cx.cell_count(0))
                    .map(|i| {
                        let x = cx.cell_center(0, i);
                        s * x[0].cos()
                    })
                    .collect::<Vec<_>>(),
            );
        }
        let f = CochainForm::from_values(cx.clone(), 0, lower).unwrap();
        let alpha = f.d().unwrap();
        let prim = delta.primitive_family(&alpha).unwrap();
        let rebuilt = prim.d().unwrap();
        let diff = rebuilt.add_scaled(&alpha, -1.0).unwrap();
        assert!(diff.sup_norm() <= 1e-9);
        // primitives match the generating function up to the blockwise mean
        for s in 0..m {
            let mean: f64 =
                f.values[s].iter().sum::<f64>() / f.values[s].len() as f64;
            for i in 0..cx.cell_count(0) {
                let expect = f.values[s][i] - mean;
                assert!((prim.values[s][i] - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn split_reassembles_exactly_and_closed_part_is_closed() {
        let cx = t2(16);
        let base = Arc::new(BaseGrid::circle(4).unwrap());
        let delta = build_delta(cx.clone(), base, &[0, 1]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let vals: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..cx.cell_count(1)).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let alpha = CochainForm::from_values(cx.clone(), 1, vals).unwrap();
        let (closed, complement) = delta.project_closed(&alpha).unwrap();
        // closed is the exact difference alpha - complement
        let recomputed = alpha.add_scaled(&complement, -1.0).unwrap();
        for s in 0..4 {
            assert_eq!(recomputed.values[s], closed.values[s], "defining identity");
        }
        // reassembly is exact up to one rounding per entry
        let sum = closed.add_scaled(&complement, 1.0).unwrap();
        let diff = sum.add_scaled(&alpha, -1.0).unwrap();
        assert!(diff.sup_norm() <= 1e-14 * alpha.sup_norm().max(complement.sup_norm()));
        assert!(closed.d().unwrap().sup_norm() <= 1e-8 * alpha.sup_norm());
    }

    #[test]
    fn top_degree_forms_are_fixed_by_the_projection() {
        let cx = t2(8);
        let base = Arc::new(BaseGrid::circle(3).unwrap());
        let delta = build_delta(cx.clone(), base, &[0]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let vals: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..cx.cell_count(2)).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let alpha = CochainForm::from_values(cx, 2, vals).unwrap();
        let (closed, complement) = delta.project_closed(&alpha).unwrap();
        assert_eq!(closed.values, alpha.values);
        assert_eq!(complement.sup_norm(), 0.0);
    }
}
