//! The projective involution `ψ(x, y) = (x/y, 1/y)`: point and line images, the
//! pushforward of a cell set through a horizontal band, distortion checks, the
//! column projection of an image, and orthogonal-projection covering numbers.

use crate::error::{Error, Result};
use crate::grid::{CellIndex, CellSet, CellSet1, Scale, MAX_LEVEL, MIN_LEVEL};
use crate::linespace::SlopeIntercept;
use crate::scalar::{Point, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const PSI_MAGIC: &[u8; 4] = b"FPSI";
const PSI_VERSION: u8 = 1;

/// `ψ(x, y) = (x/y, 1/y)`, undefined on the x-axis.
pub fn psi_point<T: Scalar>(p: Point<T>) -> Result<Point<T>> {
    if p.y == T::zero() {
        return Err(Error::OnExcludedLine);
    }
    Ok(Point::new(p.x / p.y, T::one() / p.y))
}

/// `{x = ay + b}` maps to `{x = by + a}`.
pub fn psi_line<T: Scalar>(l: SlopeIntercept<T>) -> SlopeIntercept<T> {
    SlopeIntercept { a: l.b, b: l.a }
}

/// `|det ψ'(x, y)| = |y|^{-3}`.
pub fn psi_jacobian_det(p: Point<f64>) -> f64 {
    p.y.abs().powi(-3)
}

/// Image of a cell set under `ψ`, rasterized on a grid of side `δ₁ ≈ y₀^{-2}δ`.
///
/// The image's second coordinate `1/y` ranges over `[1/(2y₀), 1/y₀]`, so stored cells
/// are shifted down by `v_offset = 3/(4y₀)` to keep them inside the window.
#[derive(Clone, Debug, PartialEq)]
pub struct PsiImage {
    pub source_scale: Scale,
    pub y0: f64,
    pub target_scale: Scale,
    pub v_offset: f64,
    pub cells: CellSet,
    /// Source cells dropped because they leave the band or their image leaves the window.
    pub clipped: u64,
}

/// `k₁ = ⌈k + 2 log₂ y₀⌉` clamped to the supported levels, so `2^{-k₁} ≤ y₀^{-2}δ`.
pub fn target_level(source: Scale, y0: f64) -> u32 {
    let k1 = (source.k() as f64 + 2.0 * y0.log2() - 1e-9).ceil();
    k1.clamp(MIN_LEVEL as f64, MAX_LEVEL as f64) as u32
}

impl PsiImage {
    /// Grid coordinates of an image point.
    pub fn to_grid(&self, q: Point<f64>) -> Point<f64> {
        Point::new(q.x, q.y - self.v_offset)
    }

    /// Image-plane point of a target cell center.
    pub fn cell_center(&self, c: CellIndex) -> Point<f64> {
        let p = self.target_scale.center(c);
        Point::new(p.x, p.y + self.v_offset)
    }

    pub fn len(&self) -> u64 {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Header (magic, version, source and target levels, `y₀`, offset, clip count)
    /// followed by the cell set encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(PSI_MAGIC);
        out.push(PSI_VERSION);
        out.push(self.source_scale.k() as u8);
        out.push(self.target_scale.k() as u8);
        out.extend_from_slice(&self.y0.to_le_bytes());
        out.extend_from_slice(&self.v_offset.to_le_bytes());
        out.extend_from_slice(&self.clipped.to_le_bytes());
        out.extend_from_slice(&self.cells.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 31 || &bytes[..4] != PSI_MAGIC {
            return Err(Error::Format("not a psi image".into()));
        }
        if bytes[4] != PSI_VERSION {
            return Err(Error::Format(format!("unsupported psi image version {}", bytes[4])));
        }
        let f = |r: std::ops::Range<usize>| f64::from_le_bytes(<[u8; 8]>::try_from(&bytes[r]).expect("8 bytes"));
        let source_scale = Scale::new(bytes[5] as u32)?;
        let target_scale = Scale::new(bytes[6] as u32)?;
        let cells = CellSet::from_bytes(&bytes[31..])?;
        if cells.scale() != target_scale {
            return Err(Error::ScaleMismatch(cells.scale().k(), target_scale.k()));
        }
        Ok(Self {
            source_scale,
            y0: f(7..15),
            target_scale,
            v_offset: f(15..23),
            clipped: u64::from_le_bytes(bytes[23..31].try_into().expect("8 bytes")),
            cells,
        })
    }
}

/// Pushes `a` through `ψ`: every source cell fully inside the band `y ∈ [y₀, 2y₀]`
/// contributes the target cells hit by the images of its 3×3 sample points, dilated
/// by one target cell.
pub fn psi_pushforward(a: &CellSet, y0: f64) -> Result<PsiImage> {
    let source_scale = a.scale();
    if !(1.0 / 16.0..=2.0).contains(&y0) {
        return Err(Error::InvalidParameter(format!("band height {y0} outside [1/16, 2]")));
    }
    let target_scale = Scale::new(target_level(source_scale, y0))?;
    let mut img = PsiImage {
        source_scale,
        y0,
        target_scale,
        v_offset: 0.75 / y0,
        cells: CellSet::empty(target_scale),
        clipped: 0,
    };
    if a.is_empty() {
        return Ok(img);
    }
    let d = source_scale.delta();
    let side = target_scale.side() as i64;
    let mut hits: Vec<u32> = Vec::new();
    let mut kept = 0u64;
    for c in a.iter() {
        let p = source_scale.center(c);
        if p.y - d / 2.0 < y0 - 1e-12 || p.y + d / 2.0 > 2.0 * y0 + 1e-12 {
            img.clipped += 1;
            continue;
        }
        let mut cell_hits = Vec::with_capacity(9);
        let mut outside = false;
        for dx in [-0.5, 0.0, 0.5] {
            for dy in [-0.5, 0.0, 0.5] {
                let q = psi_point(Point::new(p.x + dx * d, p.y + dy * d))?;
                match target_scale.cell_of(img.to_grid(q)) {
                    Some(t) => cell_hits.push(t),
                    None => outside = true,
                }
            }
        }
        if outside {
            img.clipped += 1;
            continue;
        }
        kept += 1;
        for t in cell_hits {
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (i, j) = (t.i as i64 + di, t.j as i64 + dj);
                    if (0..side).contains(&i) && (0..side).contains(&j) {
                        hits.push(target_scale.linear(CellIndex::new(i as u32, j as u32)));
                    }
                }
            }
        }
    }
    if kept == 0 {
        return Err(Error::NothingInBand(y0, 2.0 * y0));
    }
    hits.sort_unstable();
    hits.dedup();
    img.cells = CellSet::from_cells(target_scale, hits.into_iter().map(|id| target_scale.from_linear(id)));
    Ok(img)
}

/// Sampled check of the two-sided distortion bounds of `ψ` on `B(0,4) ∩ {y₀ ≤ y ≤ 2y₀}`.
///
/// The stated lower bound `y₀^{-2}|p−q|` fails for vertical pairs near `y = 2y₀`
/// (e.g. `y₀ = 1`, `p = (0,2)`, `q = (0,1.9)` gives ratio `0.26`); the provable bound
/// `|p−q| / (2·y₀·√17)` from `‖(ψ⁻¹)'‖ ≤ y·√(1+|p|²)` is checked alongside it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionCertificate {
    pub y0: f64,
    pub pairs: u64,
    /// Pairs violating `|ψp−ψq| ≥ y₀^{-2}|p−q|`.
    pub stated_lower_violations: u64,
    /// Pairs violating `|ψp−ψq| ≥ |p−q|/(2y₀√17)`.
    pub proven_lower_violations: u64,
    /// Pairs violating `|ψp−ψq| ≤ 36·y₀^{-2}|p−q|`.
    pub upper_violations: u64,
    /// Extremes of `y₀²·|ψp−ψq|/|p−q|`.
    pub min_normalized: f64,
    pub max_normalized: f64,
    pub jacobian_samples: u64,
    /// Samples with `|det ψ'| ∉ [y₀^{-3}/8, y₀^{-3}]`.
    pub jacobian_violations: u64,
}

impl DistortionCertificate {
    pub fn proven_bounds_hold(&self) -> bool {
        self.proven_lower_violations == 0 && self.upper_violations == 0 && self.jacobian_violations == 0
    }

    pub fn stated_bounds_hold(&self) -> bool {
        self.stated_lower_violations == 0 && self.upper_violations == 0 && self.jacobian_violations == 0
    }
}

const TOL: f64 = 1e-9;

fn certify(y0: f64, pairs: impl Iterator<Item = (Point<f64>, Point<f64>)>) -> DistortionCertificate {
    let mut cert = DistortionCertificate {
        y0,
        pairs: 0,
        stated_lower_violations: 0,
        proven_lower_violations: 0,
        upper_violations: 0,
        min_normalized: f64::INFINITY,
        max_normalized: 0.0,
        jacobian_samples: 0,
        jacobian_violations: 0,
    };
    let inv = y0.powi(-2);
    let proven = 1.0 / (2.0 * y0 * 17f64.sqrt());
    let (jlo, jhi) = (y0.powi(-3) / 8.0, y0.powi(-3));
    for (p, q) in pairs {
        for r in [p, q] {
            cert.jacobian_samples += 1;
            let j = psi_jacobian_det(r);
            if j < jlo * (1.0 - TOL) || j > jhi * (1.0 + TOL) {
                cert.jacobian_violations += 1;
            }
        }
        let dpq = p.dist(q);
        if dpq == 0.0 {
            continue;
        }
        let d = psi_point(p).expect("band avoids the axis").dist(psi_point(q).expect("band avoids the axis"));
        cert.pairs += 1;
        let ratio = d / dpq;
        cert.min_normalized = cert.min_normalized.min(ratio / inv);
        cert.max_normalized = cert.max_normalized.max(ratio / inv);
        if ratio < inv * (1.0 - TOL) {
            cert.stated_lower_violations += 1;
        }
        if ratio < proven * (1.0 - TOL) {
            cert.proven_lower_violations += 1;
        }
        if ratio > 36.0 * inv * (1.0 + TOL) {
            cert.upper_violations += 1;
        }
    }
    cert
}

fn band_point(rng: &mut ChaCha8Rng, y0: f64) -> Point<f64> {
    loop {
        let p = Point::new(rng.gen_range(-4.0..=4.0), rng.gen_range(y0..=2.0 * y0));
        if p.norm() <= 4.0 {
            return p;
        }
    }
}

/// Distortion certificate over `n` uniformly random pairs in the band.
pub fn distortion_certificate(y0: f64, n: usize, seed: u64) -> Result<DistortionCertificate> {
    if !(y0 > 0.0 && y0 <= 2.0) {
        return Err(Error::InvalidParameter(format!("band height {y0} outside (0, 2]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<_> = (0..n).map(|_| (band_point(&mut rng, y0), band_point(&mut rng, y0))).collect();
    Ok(certify(y0, pairs.into_iter()))
}

/// Distortion certificate over `n` random pairs of points drawn from the in-band cells of `a`.
pub fn pushforward_certificate(a: &CellSet, y0: f64, n: usize, seed: u64) -> Result<DistortionCertificate> {
    let s = a.scale();
    let d = s.delta();
    let cells: Vec<Point<f64>> = a
        .iter()
        .map(|c| s.center(c))
        .filter(|p| p.y - d / 2.0 >= y0 - 1e-12 && p.y + d / 2.0 <= 2.0 * y0 + 1e-12 && p.norm() <= 4.0)
        .collect();
    if cells.is_empty() {
        return Err(Error::NothingInBand(y0, 2.0 * y0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let c = cells[rng.gen_range(0..cells.len())];
        let p = Point::new(c.x + rng.gen_range(-0.5..0.5) * d, c.y + rng.gen_range(-0.5..0.5) * d);
        Point::new(p.x, p.y.clamp(y0, 2.0 * y0))
    };
    let pairs: Vec<_> = (0..n).map(|_| (draw(&mut rng), draw(&mut rng))).collect();
    Ok(certify(y0, pairs.into_iter()))
}

/// Occupied columns of the image as a 1-d set on the target grid.
pub fn product_projection(img: &PsiImage) -> CellSet1 {
    let mut cols = CellSet1::empty(img.target_scale);
    for c in img.cells.iter() {
        cols.insert(c.i);
    }
    cols
}

/// `|A| / (δ₁·δ^{-α-γ})`, the product-structure cap ratio.
pub fn product_cap_ratio(a: &CellSet1, img: &PsiImage, alpha: f64, gamma: f64) -> f64 {
    let cap = img.target_scale.delta() * img.source_scale.delta().powf(-alpha - gamma);
    a.measure() / cap
}

/// Number of cells among `cells` whose center maps under `ψ` into the strip `u ∈ [u_lo, u_hi)`.
pub fn pullback_strip_count(scale: Scale, cells: impl Iterator<Item = CellIndex>, u_lo: f64, u_hi: f64) -> u64 {
    cells
        .filter(|&c| {
            let p = scale.center(c);
            p.y != 0.0 && (u_lo..u_hi).contains(&(p.x / p.y))
        })
        .count() as u64
}

/// `N_δ(P_e F)`: occupied intervals `[mδ, (m+1)δ)` among the projections `e·x`.
pub fn projection_covering(points: &[Point<f64>], e: Point<f64>, scale: Scale) -> u64 {
    let e = e.scale(1.0 / e.norm());
    let d = scale.delta();
    let mut bins: Vec<i64> = points.iter().map(|p| (e.dot(*p) / d).floor() as i64).collect();
    bins.sort_unstable();
    bins.dedup();
    bins.len() as u64
}

/// Projection covering numbers in many directions, computed in parallel.
pub fn projection_probe(points: &[Point<f64>], directions: &[Point<f64>], scale: Scale) -> Vec<u64> {
    directions.par_iter().map(|&e| projection_covering(points, e, scale)).collect()
}

/// `n` equally spaced unit directions on the half circle.
pub fn uniform_directions(n: usize) -> Vec<Point<f64>> {
    (0..n)
        .map(|i| {
            let t = std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
            Point::new(t.cos(), t.sin())
        })
        .collect()
}
