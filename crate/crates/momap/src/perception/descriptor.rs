//! Deterministic multimodal object descriptor.
//!
//! Stands in for learned image/point-cloud encoders behind the same seam:
//! anything that maps an observation to a unit vector of `EMBEDDING_DIM`
//! components can replace it. Layout (block-normalized, then globally
//! normalized):
//!
//! - `[0,  24)` color: 8 histogram bins per RGB channel
//! - `[24, 29)` shape: sorted AABB extents, log point count, centroid height
//! - `[29, 61)` label: 32-dim hashed bag of lowercase tokens

use nalgebra::Vector3;
use thiserror::Error;

use crate::geom::{normalize_in_place, Aabb};

pub const COLOR_BLOCK: std::ops::Range<usize> = 0..24;
pub const SHAPE_BLOCK: std::ops::Range<usize> = 24..29;
pub const LABEL_BLOCK: std::ops::Range<usize> = 29..61;
pub const EMBEDDING_DIM: usize = 61;

#[derive(Debug, Error, PartialEq)]
pub enum DescriptorError {
    #[error("cannot encode an observation with no points and no label")]
    EmptyInput,
}

/// Stable 64-bit FNV-1a, so hashed token buckets never move between runs
/// or toolchains.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Fill `out` with an 8-bin-per-channel color histogram.
pub fn color_histogram(colors: &[[f32; 3]], out: &mut [f64]) {
    debug_assert_eq!(out.len(), 24);
    for c in colors {
        for ch in 0..3 {
            let bin = ((c[ch].clamp(0.0, 1.0) * 8.0) as usize).min(7);
            out[ch * 8 + bin] += 1.0;
        }
    }
}

/// Fill `out` with the 32-dim hashed bag of lowercase tokens.
pub fn label_bag(label: &str, out: &mut [f64]) {
    debug_assert_eq!(out.len(), 32);
    for token in label.to_lowercase().split_whitespace() {
        let idx = (fnv1a64(token.as_bytes()) % 32) as usize;
        out[idx] += 1.0;
    }
}

/// Fill `out` (5 values) with the shape block of a point set.
pub fn shape_block(points: &[Vector3<f64>], out: &mut [f64]) {
    debug_assert_eq!(out.len(), 5);
    if points.is_empty() {
        return;
    }
    let aabb = Aabb::from_points(points.iter()).expect("non-empty");
    let mut ext = aabb.extents();
    ext.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out[..3].copy_from_slice(&ext);
    out[3] = (1.0 + points.len() as f64).ln();
    let centroid_z = points.iter().map(|p| p.z).sum::<f64>() / points.len() as f64;
    out[4] = centroid_z;
}

/// Encode points + colors + optional label into the unit descriptor.
pub fn encode_descriptor(
    points: &[Vector3<f64>],
    colors: &[[f32; 3]],
    label: Option<&str>,
) -> Result<Vec<f64>, DescriptorError> {
    let has_label = label.is_some_and(|l| !l.trim().is_empty());
    if points.is_empty() && colors.is_empty() && !has_label {
        return Err(DescriptorError::EmptyInput);
    }
    let mut v = vec![0.0; EMBEDDING_DIM];
    color_histogram(colors, &mut v[COLOR_BLOCK]);
    shape_block(points, &mut v[SHAPE_BLOCK]);
    if let Some(l) = label {
        label_bag(l, &mut v[LABEL_BLOCK]);
    }
    normalize_in_place(&mut v[COLOR_BLOCK]);
    normalize_in_place(&mut v[SHAPE_BLOCK]);
    normalize_in_place(&mut v[LABEL_BLOCK]);
    normalize_in_place(&mut v);
    Ok(v)
}

/// Cosine restricted to the label block (used by relational grounding).
pub fn label_block_cosine(a: &[f64], b: &[f64]) -> f64 {
    crate::geom::cosine(&a[LABEL_BLOCK], &b[LABEL_BLOCK])
}
