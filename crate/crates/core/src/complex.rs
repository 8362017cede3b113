//! Cubical cochain complexes on flat fibres: tori and periodic-by-bounded
//! windows. Cells of degree `k` are grouped into blocks, one per `k`-subset of
//! axes, and indexed row-major inside each block.

use crate::error::{Error, Result};
use arrayvec::ArrayVec;

pub const MAX_DIM: usize = 4;

pub type FibrePoint = ArrayVec<f64, MAX_DIM>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisTopology {
    Periodic,
    Bounded,
}

#[derive(Clone, Copy, Debug)]
pub struct Axis {
    pub topology: AxisTopology,
    /// Number of nodes along the axis.
    pub resolution: usize,
    pub min: f64,
    pub extent: f64,
}

impl Axis {
    pub fn periodic(resolution: usize) -> Self {
        Self {
            topology: AxisTopology::Periodic,
            resolution,
            min: 0.0,
            extent: std::f64::consts::TAU,
        }
    }

    pub fn bounded(resolution: usize, min: f64, max: f64) -> Self {
        Self {
            topology: AxisTopology::Bounded,
            resolution,
            min,
            extent: max - min,
        }
    }

    pub fn nodes(&self) -> usize {
        self.resolution
    }

    /// Number of 1-cells along the axis.
    pub fn links(&self) -> usize {
        match self.topology {
            AxisTopology::Periodic => self.resolution,
            AxisTopology::Bounded => self.resolution - 1,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.links() as f64
    }

    pub fn node_coord(&self, i: usize) -> f64 {
        self.min + i as f64 * self.spacing()
    }
}

/// Per-axis evaluation domain of a fibre, used by finite differences and
/// wrapping helpers.
#[derive(Clone, Debug)]
pub struct Domain {
    pub axes: Vec<AxisDomain>,
}

#[derive(Clone, Copy, Debug)]
pub struct AxisDomain {
    pub periodic: bool,
    pub min: f64,
    pub max: f64,
}

impl Domain {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Wrap periodic coordinates into `[min, max)`; bounded ones pass through.
    pub fn wrap(&self, x: &[f64]) -> FibrePoint {
        self.axes
            .iter()
            .zip(x)
            .map(|(a, &v)| {
                if a.periodic {
                    let span = a.max - a.min;
                    let mut w = (v - a.min).rem_euclid(span) + a.min;
                    if w >= a.max {
                        w = a.min;
                    }
                    w
                } else {
                    v
                }
            })
            .collect()
    }

    /// Smallest signed displacement from `from` to `to` per axis.
    pub fn displacement(&self, from: &[f64], to: &[f64]) -> FibrePoint {
        self.axes
            .iter()
            .zip(from.iter().zip(to))
            .map(|(a, (&f, &t))| {
                let d = t - f;
                if a.periodic {
                    let span = a.max - a.min;
                    let mut w = d.rem_euclid(span);
                    if w > span / 2.0 {
                        w -= span;
                    }
                    w
                } else {
                    d
                }
            })
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.axes.iter().zip(x).all(|(a, &v)| {
            a.periodic || (v >= a.min - 1e-12 && v <= a.max + 1e-12)
        })
    }
}

/// A block of cells sharing the same extension axes.
#[derive(Clone, Debug)]
pub struct Block {
    /// Sorted axes the cells extend along.
    pub axes: Vec<u8>,
    pub offset: usize,
    pub extents: [usize; MAX_DIM],
    pub strides: [usize; MAX_DIM],
    pub size: usize,
    /// Product of spacings over the extension axes.
    pub volume: f64,
}

/// Signed incidence from `k`-cells to `(k+1)`-cells in CSR layout; one row per
/// `(k+1)`-cell, entries are (k-cell id, sign).
#[derive(Clone, Debug)]
pub struct Coboundary {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<u32>,
    pub col_idx: Vec<u32>,
    pub sign: Vec<i8>,
}

impl Coboundary {
    pub fn apply(&self, input: &[f64], out: &mut [f64]) {
        debug_assert_eq!(input.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for r in 0..self.rows {
            let mut acc = 0.0;
            for e in self.row_ptr[r] as usize..self.row_ptr[r + 1] as usize {
                acc += self.sign[e] as f64 * input[self.col_idx[e] as usize];
            }
            out[r] = acc;
        }
    }

    /// Integer composition with another coboundary; used to check d∘d = 0
    /// bit-exactly.
    pub fn compose_entries(&self, lower: &Coboundary) -> Vec<i64> {
        assert_eq!(self.cols, lower.rows);
        let mut acc = vec![0i64; lower.cols];
        let mut out = Vec::new();
        for r in 0..self.rows {
            let mut touched = Vec::new();
            for e in self.row_ptr[r] as usize..self.row_ptr[r + 1] as usize {
                let mid = self.col_idx[e] as usize;
                let s = self.sign[e] as i64;
                for f in lower.row_ptr[mid] as usize..lower.row_ptr[mid + 1] as usize {
                    let c = lower.col_idx[f] as usize;
                    acc[c] += s * lower.sign[f] as i64;
                    touched.push(c);
                }
            }
            for c in touched {
                if acc[c] != 0 {
                    out.push(acc[c]);
                }
                acc[c] = 0;
            }
        }
        out
    }
}

#[derive(Debug)]
pub struct FibreComplex {
    axes: Vec<Axis>,
    /// subsets[k] lists the sorted k-subsets of axes, lexicographically.
    subsets: Vec<Vec<Vec<u8>>>,
    blocks: Vec<Vec<Block>>,
    coboundaries: Vec<Coboundary>,
}

pub fn combinations(n: usize, k: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for a in start..n {
            cur.push(a as u8);
            rec(n, k, a + 1, cur, out);
            cur.pop();
        }
    }
    rec(n, k, 0, &mut cur, &mut out);
    out
}

impl FibreComplex {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        let n = axes.len();
        if n == 0 || n > MAX_DIM {
            return Err(Error::InvalidComplex(format!(
                "fibre dimension must be 1..={MAX_DIM}, got {n}"
            )));
        }
        for a in &axes {
            let min_res = match a.topology {
                AxisTopology::Periodic => 3,
                AxisTopology::Bounded => 2,
            };
            if a.resolution < min_res || !(a.extent > 0.0) {
                return Err(Error::InvalidComplex(format!(
                    "axis needs >= {min_res} nodes and positive extent, got {} over {}",
                    a.resolution, a.extent
                )));
            }
        }

        let subsets: Vec<Vec<Vec<u8>>> = (0..=n).map(|k| combinations(n, k)).collect();
        let mut blocks = Vec::with_capacity(n + 1);
        for subs in &subsets {
            let mut offset = 0usize;
            let mut row = Vec::with_capacity(subs.len());
            for s in subs {
                let mut extents = [1usize; MAX_DIM];
                let mut volume = 1.0;
                for (a, axis) in axes.iter().enumerate() {
                    if s.contains(&(a as u8)) {
                        extents[a] = axis.links();
                        volume *= axis.spacing();
                    } else {
                        extents[a] = axis.nodes();
                    }
                }
                let mut strides = [0usize; MAX_DIM];
                let mut acc = 1usize;
                for a in (0..n).rev() {
                    strides[a] = acc;
                    acc *= extents[a];
                }
                row.push(Block {
                    axes: s.clone(),
                    offset,
                    extents,
                    strides,
                    size: acc,
                    volume,
                });
                offset += acc;
            }
            blocks.push(row);
        }

        let mut cx = Self { axes, subsets, blocks, coboundaries: Vec::new() };
        cx.coboundaries = (0..n).map(|k| cx.build_coboundary(k)).collect();
        Ok(cx)
    }

    /// Flat torus with 2*pi extent along every axis.
    pub fn torus(resolutions: &[usize]) -> Result<Self> {
        Self::new(resolutions.iter().map(|&r| Axis::periodic(r)).collect())
    }

    /// Periodic angle times a bounded window `[-r_max, r_max]`.
    pub fn cylinder(n_theta: usize, n_r: usize, r_max: f64) -> Result<Self> {
        Self::new(vec![
            Axis::periodic(n_theta),
            Axis::bounded(n_r, -r_max, r_max),
        ])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn is_fully_periodic(&self) -> bool {
        self.axes.iter().all(|a| a.topology == AxisTopology::Periodic)
    }

    pub fn domain(&self) -> Domain {
        Domain {
            axes: self
                .axes
                .iter()
                .map(|a| AxisDomain {
                    periodic: a.topology == AxisTopology::Periodic,
                    min: a.min,
                    max: a.min + a.extent,
                })
                .collect(),
        }
    }

    pub fn subsets(&self, degree: usize) -> &[Vec<u8>] {
        &self.subsets[degree]
    }

    pub fn blocks(&self, degree: usize) -> &[Block] {
        &self.blocks[degree]
    }

    pub fn cell_count(&self, degree: usize) -> usize {
        self.blocks[degree].iter().map(|b| b.size).sum()
    }

    /// (block index, position multi-index) of a cell.
    pub fn locate(&self, degree: usize, cell: usize) -> (usize, [usize; MAX_DIM]) {
        let blocks = &self.blocks[degree];
        let bi = match blocks.binary_search_by(|b| b.offset.cmp(&cell)) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let b = &blocks[bi];
        let mut rem = cell - b.offset;
        let mut pos = [0usize; MAX_DIM];
        for a in 0..self.dim() {
            pos[a] = rem / b.strides[a];
            rem %= b.strides[a];
        }
        (bi, pos)
    }

    pub fn cell_id(&self, degree: usize, block: usize, pos: &[usize]) -> usize {
        let b = &self.blocks[degree][block];
        let mut id = b.offset;
        for a in 0..self.dim() {
            id += pos[a] * b.strides[a];
        }
        id
    }

    /// Midpoint of a cell.
    pub fn cell_center(&self, degree: usize, cell: usize) -> FibrePoint {
        let (bi, pos) = self.locate(degree, cell);
        let b = &self.blocks[degree][bi];
        self.axes
            .iter()
            .enumerate()
            .map(|(a, axis)| {
                let mut c = axis.node_coord(pos[a]);
                if b.axes.contains(&(a as u8)) {
                    c += axis.spacing() / 2.0;
                }
                c
            })
            .collect()
    }

    pub fn node_coords(&self, pos: &[usize]) -> FibrePoint {
        self.axes
            .iter()
            .zip(pos)
            .map(|(axis, &i)| axis.node_coord(i))
            .collect()
    }

    pub fn coboundary(&self, degree: usize) -> &Coboundary {
        &self.coboundaries[degree]
    }

    /// Apply the exterior derivative to one slice of `k`-cochain values.
    pub fn apply_d(&self, degree: usize, values: &[f64]) -> Result<Vec<f64>> {
        if degree >= self.dim() {
            return Err(Error::DegreeOverflow { degree, fibre_dim: self.dim() });
        }
        let cob = self.coboundary(degree);
        let mut out = vec![0.0; cob.rows];
        cob.apply(values, &mut out);
        Ok(out)
    }

    fn build_coboundary(&self, k: usize) -> Coboundary {
        let n = self.dim();
        let rows = self.cell_count(k + 1);
        let cols = self.cell_count(k);
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::new();
        let mut sign = Vec::new();
        row_ptr.push(0u32);

        let lower_subsets = &self.subsets[k];
        for block in &self.blocks[k + 1] {
            let t = &block.axes;
            // face block index per removed axis
            let faces: Vec<(usize, usize)> = t
                .iter()
                .enumerate()
                .map(|(ia, &a)| {
                    let sub: Vec<u8> = t.iter().copied().filter(|&x| x != a).collect();
                    let fb = lower_subsets.iter().position(|s| *s == sub).unwrap();
                    (ia, fb)
                })
                .map(|(ia, fb)| (fb, ia))
                .collect();

            let mut pos = [0usize; MAX_DIM];
            for _ in 0..block.size {
                for &(fb, ia) in &faces {
                    let a = t[ia] as usize;
                    let sg = if ia % 2 == 0 { 1i8 } else { -1i8 };
                    // near face at pos, far face at pos + e_a
                    let near = self.cell_id(k, fb, &pos);
                    let mut far_pos = pos;
                    far_pos[a] = match self.axes[a].topology {
                        AxisTopology::Periodic => (pos[a] + 1) % self.axes[a].nodes(),
                        AxisTopology::Bounded => pos[a] + 1,
                    };
                    let far = self.cell_id(k, fb, &far_pos);
                    col_idx.push(far as u32);
                    sign.push(sg);
                    col_idx.push(near as u32);
                    sign.push(-sg);
                }
                row_ptr.push(col_idx.len() as u32);
                // advance multi-index, last axis fastest
                for a in (0..n).rev() {
                    pos[a] += 1;
                    if pos[a] < block.extents[a] {
                        break;
                    }
                    pos[a] = 0;
                }
            }
        }
        Coboundary { rows, cols, row_ptr, col_idx, sign }
    }
}
