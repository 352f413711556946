//! Gridded observation data: loading, synthesis, and region selection.
//!
//! A [`GriddedDomain`] is a dense regular lattice of scalar observations in
//! one to three dimensions, stored row-major. It is the raw material from
//! which block maxima are drawn. Domains are immutable after construction
//! and can be shared freely across threads.
//!
//! Two on-disk formats are supported, both written by [`write_grid`]:
//!
//! - **Text**: a header line `shape=L1xL2[xL3]`, then the values in row-major
//!   order separated by whitespace/newlines. Values are printed with Rust's
//!   shortest round-trip representation, so a write/read cycle is bit-exact.
//! - **Binary**: a 16-byte header (8-byte magic `BMXGRID\0`, dimension count
//!   as little-endian u64), the per-dimension lengths as little-endian u64,
//!   then the values as little-endian IEEE-754 f64.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::NormalSampler;

const BINARY_MAGIC: &[u8; 8] = b"BMXGRID\0";

/// On-disk representation of a grid file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFormat {
    Text,
    Binary,
}

/// A dense n-dimensional lattice of finite scalar observations, n in 1..=3.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedDomain {
    shape: Vec<usize>,
    values: Vec<f64>,
    /// Physical spacing per dimension. Informational only: all blocking is
    /// done in index space.
    resolution: Option<Vec<f64>>,
}

impl GriddedDomain {
    /// Build a domain, validating shape/payload agreement and finiteness.
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 3 {
            return Err(Error::Grid(format!(
                "dimension count must be 1..=3, got {}",
                shape.len()
            )));
        }
        if let Some(dim) = shape.iter().position(|&l| l == 0) {
            return Err(Error::Grid(format!("zero length in dimension {dim}")));
        }
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::Grid(format!(
                "shape {shape:?} declares {expected} values, payload has {}",
                values.len()
            )));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Grid(format!(
                "non-finite value {} at index {idx}",
                values[idx]
            )));
        }
        Ok(Self { shape, values, resolution: None })
    }

    /// Attach physical per-dimension spacing (purely descriptive).
    pub fn with_resolution(mut self, resolution: Vec<f64>) -> Result<Self> {
        if resolution.len() != self.shape.len() {
            return Err(Error::Grid(format!(
                "resolution has {} entries for {} dimensions",
                resolution.len(),
                self.shape.len()
            )));
        }
        self.resolution = Some(resolution);
        Ok(self)
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn resolution(&self) -> Option<&[f64]> {
        self.resolution.as_deref()
    }

    /// Row-major strides for index arithmetic.
    pub(crate) fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.shape.len()];
        for dim in (0..self.shape.len().saturating_sub(1)).rev() {
            strides[dim] = strides[dim + 1] * self.shape[dim + 1];
        }
        strides
    }

    /// The maximum stored value.
    pub fn global_max(&self) -> f64 {
        // Construction guarantees non-empty, finite values.
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// A copy with every value multiplied by -1.
    ///
    /// Valley-type extremes (deepest points) become maxima after negation,
    /// which keeps the rest of the pipeline sign-free.
    pub fn negated(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            values: self.values.iter().map(|v| -v).collect(),
            resolution: self.resolution.clone(),
        }
    }

    /// Copy out the contiguous sub-lattice described by `sel`.
    pub fn select_region(&self, sel: &RegionSelector) -> Result<Self> {
        sel.check_against(&self.shape)?;
        let n = self.shape.len();
        let strides = self.strides();
        let out_len: usize = sel.extent.iter().product();
        let mut out = Vec::with_capacity(out_len);

        // Walk output indices row-major, mapping each to a source offset.
        let mut idx = vec![0usize; n];
        loop {
            let src: usize = (0..n).map(|d| (sel.offsets[d] + idx[d]) * strides[d]).sum();
            if n == 1 {
                // Fast path: the innermost run is contiguous in the source.
                out.extend_from_slice(&self.values[src..src + sel.extent[0]]);
            } else {
                let run = sel.extent[n - 1];
                out.extend_from_slice(&self.values[src..src + run]);
            }
            // Advance all but the innermost dimension.
            let mut dim = n.saturating_sub(2);
            loop {
                if n == 1 {
                    return Self::new(sel.extent.clone(), out);
                }
                idx[dim] += 1;
                if idx[dim] < sel.extent[dim] {
                    break;
                }
                idx[dim] = 0;
                if dim == 0 {
                    return Self::new(sel.extent.clone(), out);
                }
                dim -= 1;
            }
        }
    }
}

/// A contiguous axis-aligned sub-region of a domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionSelector {
    pub offsets: Vec<usize>,
    pub extent: Vec<usize>,
}

impl RegionSelector {
    pub fn new(offsets: Vec<usize>, extent: Vec<usize>) -> Result<Self> {
        if offsets.len() != extent.len() {
            return Err(Error::SelectorOutOfBounds(format!(
                "offsets have {} entries, extent has {}",
                offsets.len(),
                extent.len()
            )));
        }
        if let Some(dim) = extent.iter().position(|&e| e == 0) {
            return Err(Error::SelectorOutOfBounds(format!(
                "zero extent in dimension {dim}"
            )));
        }
        Ok(Self { offsets, extent })
    }

    fn check_against(&self, shape: &[usize]) -> Result<()> {
        if self.offsets.len() != shape.len() {
            return Err(Error::SelectorOutOfBounds(format!(
                "selector has {} dimensions, domain has {}",
                self.offsets.len(),
                shape.len()
            )));
        }
        for (dim, &len) in shape.iter().enumerate() {
            if self.offsets[dim] + self.extent[dim] > len {
                return Err(Error::SelectorOutOfBounds(format!(
                    "offset {} + extent {} exceeds length {len} in dimension {dim}",
                    self.offsets[dim], self.extent[dim]
                )));
            }
        }
        Ok(())
    }
}

/// Generate a domain of i.i.d. normal draws, reproducible from the seed.
pub fn generate_synthetic(
    shape: &[usize],
    mean: f64,
    stddev: f64,
    seed: u64,
) -> Result<GriddedDomain> {
    if !(stddev.is_finite() && stddev > 0.0) {
        return Err(Error::Grid(format!("stddev must be positive and finite, got {stddev}")));
    }
    if shape.is_empty() {
        return Err(Error::Grid("empty shape".into()));
    }
    let count: usize = shape.iter().product();
    let mut sampler = NormalSampler::new(seed);
    let values: Vec<f64> = (0..count).map(|_| sampler.normal(mean, stddev)).collect();
    GriddedDomain::new(shape.to_vec(), values)
}

/// Read a grid file in the given format.
pub fn load_grid(path: &Path, format: GridFormat) -> Result<GriddedDomain> {
    match format {
        GridFormat::Text => load_text(path),
        GridFormat::Binary => load_binary(path),
    }
}

/// Write a grid file in the given format.
pub fn write_grid(domain: &GriddedDomain, path: &Path, format: GridFormat) -> Result<()> {
    match format {
        GridFormat::Text => write_text(domain, path),
        GridFormat::Binary => write_binary(domain, path),
    }
}

fn parse_err(path: &Path, location: String, message: String) -> Error {
    Error::GridParse { path: path.display().to_string(), location, message }
}

fn load_text(path: &Path) -> Result<GriddedDomain> {
    let content = std::fs::read_to_string(path)
        .map_err(|e| Error::Grid(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = content.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, "line 1".into(), "empty file".into()))?;
    let shape_str = header
        .strip_prefix("shape=")
        .ok_or_else(|| parse_err(path, "line 1".into(), "expected `shape=L1xL2[xL3]` header".into()))?;
    let shape: Vec<usize> = shape_str
        .trim()
        .split('x')
        .map(|tok| {
            tok.parse::<usize>().map_err(|_| {
                parse_err(path, "line 1".into(), format!("bad shape component `{tok}`"))
            })
        })
        .collect::<Result<_>>()?;

    let mut values = Vec::with_capacity(shape.iter().product());
    for (line_no, line) in lines.enumerate() {
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| {
                parse_err(
                    path,
                    format!("line {}", line_no + 2),
                    format!("bad value token `{tok}`"),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    path,
                    format!("line {}", line_no + 2),
                    format!("non-finite value `{tok}`"),
                ));
            }
            values.push(v);
        }
    }
    GriddedDomain::new(shape, values)
        .map_err(|e| parse_err(path, "payload".into(), e.to_string()))
}

fn write_text(domain: &GriddedDomain, path: &Path) -> Result<()> {
    let mut out = String::new();
    let shape_str: Vec<String> = domain.shape.iter().map(|l| l.to_string()).collect();
    writeln!(out, "shape={}", shape_str.join("x")).expect("string write");
    // One row of the innermost dimension per line.
    let row = *domain.shape.last().expect("validated non-empty shape");
    for chunk in domain.values.chunks(row) {
        let toks: Vec<String> = chunk.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", toks.join(" ")).expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn load_binary(path: &Path) -> Result<GriddedDomain> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Grid(format!("cannot read {}: {e}", path.display())))?;
    if bytes.len() < 16 {
        return Err(parse_err(path, "header".into(), "file shorter than header".into()));
    }
    if &bytes[0..8] != BINARY_MAGIC {
        return Err(parse_err(path, "byte 0".into(), "bad magic".into()));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    if n == 0 || n > 3 {
        return Err(parse_err(path, "byte 8".into(), format!("dimension count {n} out of 1..=3")));
    }
    let shape_end = 16 + 8 * n;
    if bytes.len() < shape_end {
        return Err(parse_err(path, "shape".into(), "file truncated in shape".into()));
    }
    let shape: Vec<usize> = (0..n)
        .map(|d| {
            let at = 16 + 8 * d;
            u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes")) as usize
        })
        .collect();
    let expected: usize = shape.iter().product();
    let payload = &bytes[shape_end..];
    if payload.len() != expected * 8 {
        return Err(parse_err(
            path,
            format!("byte {shape_end}"),
            format!("shape {shape:?} declares {expected} values, payload holds {}", payload.len() / 8),
        ));
    }
    let mut values = Vec::with_capacity(expected);
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(parse_err(
                path,
                format!("value {i}"),
                format!("non-finite value {v}"),
            ));
        }
        values.push(v);
    }
    GriddedDomain::new(shape, values)
        .map_err(|e| parse_err(path, "payload".into(), e.to_string()))
}

fn write_binary(domain: &GriddedDomain, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(16 + 8 * domain.shape.len() + 8 * domain.values.len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(domain.shape.len() as u64).to_le_bytes());
    for &l in &domain.shape {
        out.extend_from_slice(&(l as u64).to_le_bytes());
    }
    for &v in &domain.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d1(values: &[f64]) -> GriddedDomain {
        GriddedDomain::new(vec![values.len()], values.to_vec()).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert!(GriddedDomain::new(vec![2, 3], vec![1.0; 6]).is_ok());
        assert!(GriddedDomain::new(vec![2, 3], vec![1.0; 5]).is_err());
        assert!(GriddedDomain::new(vec![2, 0], vec![]).is_err());
        assert!(GriddedDomain::new(vec![], vec![]).is_err());
        assert!(GriddedDomain::new(vec![2, 2, 2, 2], vec![1.0; 16]).is_err());
        assert!(GriddedDomain::new(vec![2], vec![1.0, f64::NAN]).is_err());
        assert!(GriddedDomain::new(vec![2], vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn global_max_basics() {
        assert_eq!(d1(&[1.0, 5.0, 3.0]).global_max(), 5.0);
        assert_eq!(d1(&[4.0, 4.0, 4.0]).global_max(), 4.0);
    }

    #[test]
    fn negate_flips_and_preserves_shape() {
        let d = d1(&[1.0, -2.0]);
        let n = d.negated();
        assert_eq!(n.values(), &[-1.0, 2.0]);
        assert_eq!(n.shape(), d.shape());
        assert_eq!(n.negated(), d);

        let d = d1(&[3.0, -7.0, 2.0]);
        assert_eq!(d.negated().global_max(), 7.0);
    }

    #[test]
    fn select_region_1d() {
        let d = d1(&[1.0, 5.0, 3.0, 2.0]);
        let sel = RegionSelector::new(vec![1], vec![2]).unwrap();
        assert_eq!(d.select_region(&sel).unwrap().values(), &[5.0, 3.0]);
    }

    #[test]
    fn select_full_extent_is_identity() {
        let d = GriddedDomain::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let sel = RegionSelector::new(vec![0, 0], vec![2, 3]).unwrap();
        assert_eq!(d.select_region(&sel).unwrap(), d);
    }

    #[test]
    fn select_region_2d_block() {
        // 3x4 row-major ramp 1..12; take rows 1..3, cols 1..3.
        let d = GriddedDomain::new(vec![3, 4], (1..=12).map(f64::from).collect()).unwrap();
        let sel = RegionSelector::new(vec![1, 1], vec![2, 2]).unwrap();
        assert_eq!(d.select_region(&sel).unwrap().values(), &[6.0, 7.0, 10.0, 11.0]);
    }

    #[test]
    fn select_region_3d_block() {
        let d = GriddedDomain::new(vec![2, 2, 2], (1..=8).map(f64::from).collect()).unwrap();
        let sel = RegionSelector::new(vec![1, 0, 1], vec![1, 2, 1]).unwrap();
        // Source indices (1,0,1) and (1,1,1) -> offsets 5 and 7.
        assert_eq!(d.select_region(&sel).unwrap().values(), &[6.0, 8.0]);
    }

    #[test]
    fn out_of_bounds_selector_rejected() {
        let d = generate_synthetic(&[20, 20, 20], 0.0, 5.0, 1).unwrap();
        let sel = RegionSelector::new(vec![15, 0, 0], vec![10, 10, 10]).unwrap();
        assert!(matches!(d.select_region(&sel), Err(Error::SelectorOutOfBounds(_))));
    }

    #[test]
    fn synthetic_is_reproducible() {
        let a = generate_synthetic(&[7, 5], 1.0, 2.0, 99).unwrap();
        let b = generate_synthetic(&[7, 5], 1.0, 2.0, 99).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&[7, 5], 1.0, 2.0, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synthetic_rejects_bad_args() {
        assert!(generate_synthetic(&[4], 0.0, 0.0, 1).is_err());
        assert!(generate_synthetic(&[4], 0.0, -1.0, 1).is_err());
        assert!(generate_synthetic(&[], 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn synthetic_moments_match_request() {
        // Large enough for the standard error of the mean (sigma/sqrt(n))
        // to sit around 0.005; assert at 0.05.
        let d = generate_synthetic(&[100, 100, 100], 0.0, 5.0, 3).unwrap();
        let n = d.len() as f64;
        let mean = d.values().iter().sum::<f64>() / n;
        let var = d.values().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var.sqrt() - 5.0).abs() < 0.05, "stddev {}", var.sqrt());
    }

    #[test]
    fn text_round_trip_and_errors() {
        let dir = std::env::temp_dir().join("blockmax_grid_text_test");
        std::fs::create_dir_all(&dir).unwrap();

        let path = dir.join("ok.grid");
        std::fs::write(&path, "shape=2x3\n1 2 3\n4 5 6\n").unwrap();
        let d = load_grid(&path, GridFormat::Text).unwrap();
        assert_eq!(d.shape(), &[2, 3]);
        assert_eq!(d.values(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);

        let short = dir.join("short.grid");
        std::fs::write(&short, "shape=10\n1 2 3 4 5 6 7 8 9\n").unwrap();
        assert!(matches!(load_grid(&short, GridFormat::Text), Err(Error::GridParse { .. })));

        let nan = dir.join("nan.grid");
        std::fs::write(&nan, "shape=2\n1 NaN\n").unwrap();
        let err = load_grid(&nan, GridFormat::Text).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn binary_rejects_corruption() {
        let dir = std::env::temp_dir().join("blockmax_grid_bin_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("grid.bin");

        let d = generate_synthetic(&[4, 3], 0.0, 1.0, 5).unwrap();
        write_grid(&d, &path, GridFormat::Binary).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(load_grid(&path, GridFormat::Binary).is_err());

        write_grid(&d, &path, GridFormat::Binary).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 8);
        std::fs::write(&path, &bytes).unwrap();
        assert!(load_grid(&path, GridFormat::Binary).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_both_formats(
            shape in prop::collection::vec(1usize..6, 1..=3),
            seed in 0u64..1000,
        ) {
            let d = generate_synthetic(&shape, 0.0, 3.0, seed).unwrap();
            let dir = std::env::temp_dir().join("blockmax_grid_prop");
            std::fs::create_dir_all(&dir).unwrap();
            let t = dir.join(format!("t_{seed}.grid"));
            let b = dir.join(format!("b_{seed}.grid"));
            write_grid(&d, &t, GridFormat::Text).unwrap();
            write_grid(&d, &b, GridFormat::Binary).unwrap();
            prop_assert_eq!(&load_grid(&t, GridFormat::Text).unwrap(), &d);
            prop_assert_eq!(&load_grid(&b, GridFormat::Binary).unwrap(), &d);
        }

        #[test]
        fn region_max_bounded_by_parent(
            seed in 0u64..200,
            off in prop::collection::vec(0usize..4, 2),
            ext in prop::collection::vec(1usize..5, 2),
        ) {
            let d = generate_synthetic(&[8, 8], 0.0, 1.0, seed).unwrap();
            let sel = RegionSelector::new(off, ext).unwrap();
            if let Ok(sub) = d.select_region(&sel) {
                prop_assert!(sub.global_max() <= d.global_max());
            }
        }
    }
}
