use crate::error::{Error, Result};

/// Smallest band width kept by [`project_constraints`], in cycles/sample.
pub const MIN_BAND_WIDTH: f64 = 1e-4;

/// Parameters of the modulation stage.
#[derive(Debug, Clone, PartialEq)]
pub enum ModParams {
    /// `M x kernel_len` taps, row-major.
    Fir(Vec<f64>),
    /// `M` interleaved `(f1, f2)` pairs normalized to the frame rate.
    Sinc(Vec<f64>),
    /// Max-pooling baseline; nothing to learn.
    None,
}

impl ModParams {
    pub fn as_slice(&self) -> &[f64] {
        match self {
            ModParams::Fir(v) | ModParams::Sinc(v) => v,
            ModParams::None => &[],
        }
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        match self {
            ModParams::Fir(v) | ModParams::Sinc(v) => v,
            ModParams::None => &mut [],
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            ModParams::Fir(v) => ModParams::Fir(vec![0.0; v.len()]),
            ModParams::Sinc(v) => ModParams::Sinc(vec![0.0; v.len()]),
            ModParams::None => ModParams::None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModParams::Fir(_) => "fir",
            ModParams::Sinc(_) => "sinc",
            ModParams::None => "none",
        }
    }
}

/// Every learnable value of the model. Gradients and optimizer moments use
/// the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    /// `K` interleaved `(f1, f2)` pairs, cycles/sample.
    pub tf_cutoffs: Vec<f64>,
    pub mod_params: ModParams,
    /// `[gamma_0 .. gamma_M, beta_0 .. beta_M]` when the instance-norm
    /// affine is enabled, empty otherwise.
    pub norm_affine: Vec<f64>,
    /// `C x F` row-major, `F = M * K`.
    pub head_weights: Vec<f64>,
    pub head_bias: Vec<f64>,
}

pub const BLOCK_NAMES: [&str; 5] = ["tf_cutoffs", "mod_params", "norm_affine", "head_weights", "head_bias"];

impl ParamVector {
    pub fn zeros_like(&self) -> Self {
        Self {
            tf_cutoffs: vec![0.0; self.tf_cutoffs.len()],
            mod_params: self.mod_params.zeros_like(),
            norm_affine: vec![0.0; self.norm_affine.len()],
            head_weights: vec![0.0; self.head_weights.len()],
            head_bias: vec![0.0; self.head_bias.len()],
        }
    }

    pub fn blocks(&self) -> [(&'static str, &[f64]); 5] {
        [
            (BLOCK_NAMES[0], &self.tf_cutoffs),
            (BLOCK_NAMES[1], self.mod_params.as_slice()),
            (BLOCK_NAMES[2], &self.norm_affine),
            (BLOCK_NAMES[3], &self.head_weights),
            (BLOCK_NAMES[4], &self.head_bias),
        ]
    }

    pub fn blocks_mut(&mut self) -> [(&'static str, &mut [f64]); 5] {
        [
            (BLOCK_NAMES[0], &mut self.tf_cutoffs),
            (BLOCK_NAMES[1], self.mod_params.as_mut_slice()),
            (BLOCK_NAMES[2], &mut self.norm_affine),
            (BLOCK_NAMES[3], &mut self.head_weights),
            (BLOCK_NAMES[4], &mut self.head_bias),
        ]
    }

    pub fn len(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks().iter().flat_map(|(_, b)| b.iter().copied()).collect()
    }

    /// Overwrites every value from a flat vector of [`Self::len`] entries.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.len() {
            return Err(Error::Shape(format!(
                "flat parameter vector has {} entries, expected {}",
                flat.len(),
                self.len()
            )));
        }
        let mut offset = 0;
        for (_, block) in self.blocks_mut() {
            block.copy_from_slice(&flat[offset..offset + block.len()]);
            offset += block.len();
        }
        Ok(())
    }

    pub fn get(&self, index: usize) -> f64 {
        let mut i = index;
        for (_, b) in self.blocks() {
            if i < b.len() {
                return b[i];
            }
            i -= b.len();
        }
        panic!("parameter index {index} out of range");
    }

    pub fn set(&mut self, index: usize, value: f64) {
        let mut i = index;
        for (_, b) in self.blocks_mut() {
            if i < b.len() {
                b[i] = value;
                return;
            }
            i -= b.len();
        }
        panic!("parameter index {index} out of range");
    }

    /// Block name and offset within the block for a flat index.
    pub fn locate(&self, index: usize) -> (&'static str, usize) {
        let mut i = index;
        for (name, b) in self.blocks() {
            if i < b.len() {
                return (name, i);
            }
            i -= b.len();
        }
        panic!("parameter index {index} out of range");
    }

    /// First non-finite entry as `(block, offset)`.
    pub fn first_non_finite(&self) -> Option<(&'static str, usize)> {
        self.blocks()
            .into_iter()
            .find_map(|(name, b)| b.iter().position(|v| !v.is_finite()).map(|i| (name, i)))
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.mod_params.kind() == other.mod_params.kind()
            && self
                .blocks()
                .iter()
                .zip(other.blocks().iter())
                .all(|((_, a), (_, b))| a.len() == b.len())
    }

    /// `self += scale * other`, blockwise.
    pub fn add_scaled(&mut self, other: &Self, scale: f64) {
        for ((_, a), (_, b)) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, b) in self.blocks_mut() {
            for x in b.iter_mut() {
                *x *= factor;
            }
        }
    }

    /// Stable fingerprint of the exact bit patterns of all values.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a over the raw bits
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for (_, b) in self.blocks() {
            h ^= b.len() as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
            for v in b {
                h ^= v.to_bits();
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    pub fn tf_pairs(&self) -> Vec<(f64, f64)> {
        pairs(&self.tf_cutoffs)
    }

    pub fn mod_pairs(&self) -> Option<Vec<(f64, f64)>> {
        match &self.mod_params {
            ModParams::Sinc(v) => Some(pairs(v)),
            _ => None,
        }
    }
}

pub(crate) fn pairs(v: &[f64]) -> Vec<(f64, f64)> {
    v.chunks_exact(2).map(|p| (p[0], p[1])).collect()
}

fn project_pairs(v: &mut [f64]) {
    for p in v.chunks_exact_mut(2) {
        let f1 = p[0].abs().min(0.5 - MIN_BAND_WIDTH);
        let f2 = p[1].abs().clamp(f1 + MIN_BAND_WIDTH, 0.5);
        p[0] = f1;
        p[1] = f2;
    }
}

/// Restores `0 <= f1 < f2 <= 0.5` for every cutoff pair: `f1` is reflected
/// to `|f1|`, `f2` to `|f2|` and raised to at least `f1 + MIN_BAND_WIDTH`.
/// FIR taps and head weights are untouched.
pub fn project_constraints(params: &mut ParamVector) {
    project_pairs(&mut params.tf_cutoffs);
    if let ModParams::Sinc(v) = &mut params.mod_params {
        project_pairs(v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_cutoffs(tf: Vec<f64>) -> ParamVector {
        ParamVector {
            tf_cutoffs: tf,
            mod_params: ModParams::Sinc(vec![0.3, 0.1]),
            norm_affine: vec![],
            head_weights: vec![1.0, -2.0],
            head_bias: vec![0.5],
        }
    }

    #[test]
    fn projection_examples() {
        let mut p = with_cutoffs(vec![0.3, 0.1, -0.05, 0.2, 0.1, 0.25]);
        project_constraints(&mut p);
        assert_eq!(p.tf_cutoffs[0], 0.3);
        assert!((p.tf_cutoffs[1] - 0.3001).abs() < 1e-15);
        assert_eq!(&p.tf_cutoffs[2..4], &[0.05, 0.2]);
        assert_eq!(&p.tf_cutoffs[4..6], &[0.1, 0.25]);
        assert_eq!(p.mod_params.as_slice()[0], 0.3);
        assert_eq!(p.head_weights, vec![1.0, -2.0]);
    }

    #[test]
    fn projection_handles_nyquist_edge() {
        let mut p = with_cutoffs(vec![0.7, 0.9]);
        project_constraints(&mut p);
        let (f1, f2) = (p.tf_cutoffs[0], p.tf_cutoffs[1]);
        assert!(f1 >= 0.0 && f1 < f2 && f2 <= 0.5);
    }

    #[test]
    fn flat_indexing_roundtrip() {
        let mut p = with_cutoffs(vec![0.1, 0.2]);
        assert_eq!(p.len(), 7);
        assert_eq!(p.locate(2), ("mod_params", 0));
        assert_eq!(p.locate(6), ("head_bias", 0));
        p.set(5, 9.0);
        assert_eq!(p.head_weights[1], 9.0);
        let flat = p.to_flat();
        let mut q = p.zeros_like();
        q.set_flat(&flat).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.fingerprint(), q.fingerprint());
        q.set(0, 0.1 + 1e-17);
        q.set(0, 0.11);
        assert_ne!(p.fingerprint(), q.fingerprint());
    }
}
