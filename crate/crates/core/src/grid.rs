//! Sampled base spaces: a one-dimensional grid of base points together with a
//! patch cover and a subordinate partition of unity.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseTopology {
    Interval,
    Circle,
}

/// Contiguous run of sample indices. On a circle the run wraps modulo the
/// sample count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Patch {
    pub start: usize,
    pub len: usize,
}

impl Patch {
    /// Offset of `idx` inside the patch, if covered.
    pub fn offset_of(&self, idx: usize, samples: usize) -> Option<usize> {
        let rel = (idx + samples - self.start % samples) % samples;
        (rel < self.len).then_some(rel)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverSpec {
    /// One patch over every sample; the partition weight is identically 1.
    Single,
    /// Two patches with a two-sample overlap at each seam.
    TwoPatch,
}

#[derive(Clone, Debug)]
pub struct BaseGrid {
    topology: BaseTopology,
    samples: Vec<f64>,
    cover: CoverSpec,
    patches: Vec<Patch>,
    /// weights[patch][sample]; zero outside the patch, summing to 1 per sample.
    weights: Vec<Vec<f64>>,
}

impl BaseGrid {
    /// Uniform samples of `[a, b]`, endpoints included.
    pub fn interval(a: f64, b: f64, samples: usize) -> Result<Self> {
        if samples < 2 || !(b > a) {
            return Err(Error::InvalidGrid(format!(
                "interval grid needs at least 2 samples and b > a, got {samples} on [{a}, {b}]"
            )));
        }
        let h = (b - a) / (samples - 1) as f64;
        let pts = (0..samples).map(|i| a + i as f64 * h).collect();
        Self::build(BaseTopology::Interval, pts, CoverSpec::Single)
    }

    /// Uniform samples of the circle, `b_j = 2*pi*j/m`.
    pub fn circle(samples: usize) -> Result<Self> {
        if samples < 3 {
            return Err(Error::InvalidGrid(format!(
                "circle grid needs at least 3 samples, got {samples}"
            )));
        }
        let h = std::f64::consts::TAU / samples as f64;
        let pts = (0..samples).map(|i| i as f64 * h).collect();
        Self::build(BaseTopology::Circle, pts, CoverSpec::Single)
    }

    /// Rebuild the same sample set with a different cover.
    pub fn with_cover(&self, cover: CoverSpec) -> Result<Self> {
        Self::build(self.topology, self.samples.clone(), cover)
    }

    fn build(topology: BaseTopology, samples: Vec<f64>, cover: CoverSpec) -> Result<Self> {
        for w in samples.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidGrid(
                    "samples must be strictly increasing".into(),
                ));
            }
        }
        let m = samples.len();
        let patches = match cover {
            CoverSpec::Single => vec![Patch { start: 0, len: m }],
            CoverSpec::TwoPatch => {
                if m < 8 {
                    return Err(Error::InvalidGrid(
                        "two-patch cover needs at least 8 samples".into(),
                    ));
                }
                let half = m / 2;
                match topology {
                    // overlap {half, half+1} in the middle
                    BaseTopology::Interval => vec![
                        Patch { start: 0, len: half + 2 },
                        Patch { start: half, len: m - half },
                    ],
                    // overlaps {half, half+1} and {0, 1} across the seam
                    BaseTopology::Circle => vec![
                        Patch { start: 0, len: half + 2 },
                        Patch { start: half, len: m - half + 2 },
                    ],
                }
            }
        };
        let weights = partition_weights(&patches, m)?;
        let grid = Self { topology, samples, cover, patches, weights };
        grid.validate()?;
        Ok(grid)
    }

    fn validate(&self) -> Result<()> {
        let m = self.samples.len();
        for s in 0..m {
            let total: f64 = self.weights.iter().map(|w| w[s]).sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidGrid(format!(
                    "partition of unity sums to {total} at sample {s}"
                )));
            }
            if !self.patches.iter().any(|p| p.offset_of(s, m).is_some()) {
                return Err(Error::CoverGap { sample: s });
            }
        }
        // support of each weight inside its patch
        for (p, w) in self.patches.iter().zip(&self.weights) {
            for s in 0..m {
                if w[s] != 0.0 && p.offset_of(s, m).is_none() {
                    return Err(Error::InvalidGrid(format!(
                        "weight supported outside its patch at sample {s}"
                    )));
                }
            }
        }
        if self.patches.len() > 1 {
            for (i, p) in self.patches.iter().enumerate() {
                let q = &self.patches[(i + 1) % self.patches.len()];
                let shared = (0..m)
                    .filter(|&s| p.offset_of(s, m).is_some() && q.offset_of(s, m).is_some())
                    .count();
                if shared < 2 {
                    return Err(Error::InvalidGrid(format!(
                        "patches {i} and {} overlap in {shared} < 2 samples",
                        (i + 1) % self.patches.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn topology(&self) -> BaseTopology {
        self.topology
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn cover(&self) -> CoverSpec {
        self.cover
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    /// Partition weight of `patch` at `sample`.
    pub fn weight(&self, patch: usize, sample: usize) -> f64 {
        self.weights[patch][sample]
    }

    /// Reference sample index for a patch: the sample at its centre.
    pub fn patch_reference(&self, patch: usize) -> usize {
        let p = self.patches[patch];
        (p.start + p.len / 2) % self.samples.len()
    }

    /// Same topology and cover with twice as many samples (circle) or
    /// midpoints inserted (interval). Used by smoothness checks.
    pub fn refined_double(&self) -> Result<Self> {
        match self.topology {
            BaseTopology::Circle => {
                let g = Self::circle(2 * self.len())?;
                g.with_cover(self.cover)
            }
            BaseTopology::Interval => {
                let a = self.samples[0];
                let b = *self.samples.last().unwrap();
                let g = Self::interval(a, b, 2 * self.len() - 1)?;
                g.with_cover(self.cover)
            }
        }
    }
}

/// Raw bump per patch, positive on the whole patch and vanishing outside,
/// then normalised so the weights sum to exactly 1 at every sample.
fn partition_weights(patches: &[Patch], m: usize) -> Result<Vec<Vec<f64>>> {
    if patches.len() == 1 {
        return Ok(vec![vec![1.0; m]]);
    }
    let mut raw = vec![vec![0.0; m]; patches.len()];
    for (p, row) in patches.iter().zip(raw.iter_mut()) {
        for rel in 0..p.len {
            let s = (p.start + rel) % m;
            let u = (rel as f64 + 1.0) / (p.len as f64 + 1.0);
            row[s] = (std::f64::consts::PI * u).sin().powi(2);
        }
    }
    let mut weights = raw.clone();
    for s in 0..m {
        let total: f64 = raw.iter().map(|r| r[s]).sum();
        if total <= 0.0 {
            return Err(Error::CoverGap { sample: s });
        }
        for (w, r) in weights.iter_mut().zip(&raw) {
            w[s] = r[s] / total;
        }
        // force the partition to close exactly
        let covering: Vec<usize> = (0..patches.len()).filter(|&i| raw[i][s] > 0.0).collect();
        if let Some(&last) = covering.last() {
            let others: f64 = covering[..covering.len() - 1]
                .iter()
                .map(|&i| weights[i][s])
                .sum();
            weights[last][s] = 1.0 - others;
        }
    }
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_single_patch_is_trivial_partition() {
        let g = BaseGrid::interval(0.0, 1.0, 9).unwrap();
        assert_eq!(g.len(), 9);
        for s in 0..9 {
            assert_eq!(g.weight(0, s), 1.0);
        }
    }

    #[test]
    fn circle_two_patch_cover_partitions_unity() {
        let g = BaseGrid::circle(16).unwrap().with_cover(CoverSpec::TwoPatch).unwrap();
        assert_eq!(g.patches().len(), 2);
        for s in 0..16 {
            let total = g.weight(0, s) + g.weight(1, s);
            assert_eq!(total, 1.0, "sample {s}");
        }
    }

    #[test]
    fn wrapped_patch_membership() {
        let p = Patch { start: 14, len: 4 };
        assert_eq!(p.offset_of(14, 16), Some(0));
        assert_eq!(p.offset_of(1, 16), Some(3));
        assert_eq!(p.offset_of(2, 16), None);
    }

    #[test]
    fn rejects_non_increasing_samples() {
        assert!(BaseGrid::interval(1.0, 1.0, 4).is_err());
    }
}
