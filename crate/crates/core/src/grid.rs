//! Dense dyadic cell grids over the window `[-4, 4]²`.
//!
//! A [`CellSet`] is a δ-discretized plane set: a union of half-open grid cells
//! `[-4 + iδ, -4 + (i+1)δ) × [-4 + jδ, -4 + (j+1)δ)` with `δ = 2^-k`. Membership
//! tests for balls and tubes use cell centers.

use crate::error::{Error, Result};
use crate::linespace::Line;
use crate::scalar::{Point, Scalar};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const WINDOW_HALF_WIDTH: f64 = 4.0;
pub const MIN_LEVEL: u32 = 4;
pub const MAX_LEVEL: u32 = 12;

const BINARY_MAGIC: &[u8; 4] = b"FCEL";
const BINARY_VERSION: u8 = 1;

/// Discretization level `k`, with `δ = 2^-k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Scale {
    k: u32,
}

impl Scale {
    pub fn new(k: u32) -> Result<Self> {
        if !(MIN_LEVEL..=MAX_LEVEL).contains(&k) {
            return Err(Error::UnsupportedScale(k));
        }
        Ok(Self { k })
    }

    pub fn k(self) -> u32 {
        self.k
    }

    pub fn delta(self) -> f64 {
        (-(self.k as f64)).exp2()
    }

    /// Number of cells along one side of the window.
    pub fn side(self) -> u32 {
        8 << self.k
    }

    pub fn cell_count(self) -> u64 {
        let s = self.side() as u64;
        s * s
    }

    pub fn window_half_width(self) -> f64 {
        WINDOW_HALF_WIDTH
    }

    /// `log₂(1/δ)`.
    pub fn log2_inv_delta(self) -> f64 {
        self.k as f64
    }

    /// The factor `C·(log₂(1/δ))^C` standing in for `≲`.
    pub fn polylog(self, c: f64) -> f64 {
        c * self.log2_inv_delta().powf(c)
    }

    pub fn center(self, c: CellIndex) -> Point<f64> {
        let d = self.delta();
        Point::new(
            -WINDOW_HALF_WIDTH + (c.i as f64 + 0.5) * d,
            -WINDOW_HALF_WIDTH + (c.j as f64 + 0.5) * d,
        )
    }

    /// Lower-left corner of a cell.
    pub fn corner(self, c: CellIndex) -> Point<f64> {
        let d = self.delta();
        Point::new(-WINDOW_HALF_WIDTH + c.i as f64 * d, -WINDOW_HALF_WIDTH + c.j as f64 * d)
    }

    /// The half-open cell containing `p`, if `p` lies in the window.
    pub fn cell_of(self, p: Point<f64>) -> Option<CellIndex> {
        let inv = self.k as i32;
        let fi = ((p.x + WINDOW_HALF_WIDTH) * (inv as f64).exp2()).floor();
        let fj = ((p.y + WINDOW_HALF_WIDTH) * (inv as f64).exp2()).floor();
        let side = self.side() as f64;
        if fi < 0.0 || fj < 0.0 || fi >= side || fj >= side || !fi.is_finite() || !fj.is_finite() {
            return None;
        }
        Some(CellIndex::new(fi as u32, fj as u32))
    }

    pub fn linear(self, c: CellIndex) -> u32 {
        c.j * self.side() + c.i
    }

    pub fn from_linear(self, id: u32) -> CellIndex {
        let s = self.side();
        CellIndex::new(id % s, id / s)
    }

    /// Index range of cells whose center coordinate lies in `[lo, hi]`, clipped to the window.
    pub(crate) fn center_range(self, lo: f64, hi: f64) -> Option<(u32, u32)> {
        if !(lo <= hi) {
            return None;
        }
        let inv = (self.k as f64).exp2();
        let a = ((lo + WINDOW_HALF_WIDTH) * inv - 0.5).ceil();
        let b = ((hi + WINDOW_HALF_WIDTH) * inv - 0.5).floor();
        let max = self.side() as f64 - 1.0;
        let a = a.max(0.0);
        let b = b.min(max);
        if a > b {
            None
        } else {
            Some((a as u32, b as u32))
        }
    }
}

/// Integer cell coordinates; ordering is lexicographic in `(i, j)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub i: u32,
    pub j: u32,
}

impl CellIndex {
    pub const fn new(i: u32, j: u32) -> Self {
        Self { i, j }
    }
}

/// Measurement summary of a cell set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub cell_count: u64,
    pub lebesgue: f64,
    /// `(ρ, N_ρ)` for every dyadic `ρ ∈ [δ, 8]`, ascending in `ρ`.
    pub covering_numbers: Vec<(f64, u64)>,
}

/// Dense bit grid of occupied cells, row-major (`j` outer, `i` inner).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CellSet {
    scale: Scale,
    words: Vec<u64>,
    count: u64,
}

impl std::fmt::Debug for CellSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CellSet")
            .field("k", &self.scale.k)
            .field("cells", &self.count)
            .finish()
    }
}

impl CellSet {
    pub fn empty(scale: Scale) -> Self {
        let words = (scale.cell_count() / 64) as usize;
        Self { scale, words: vec![0; words], count: 0 }
    }

    pub fn full(scale: Scale) -> Self {
        let words = (scale.cell_count() / 64) as usize;
        Self { scale, words: vec![u64::MAX; words], count: scale.cell_count() }
    }

    pub fn from_cells<I: IntoIterator<Item = CellIndex>>(scale: Scale, cells: I) -> Self {
        let mut s = Self::empty(scale);
        for c in cells {
            s.insert(c);
        }
        s
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    fn words_per_row(&self) -> usize {
        (self.scale.side() / 64) as usize
    }

    #[inline]
    fn bit(&self, c: CellIndex) -> (usize, u64) {
        let id = self.scale.linear(c) as usize;
        (id >> 6, 1u64 << (id & 63))
    }

    pub fn contains(&self, c: CellIndex) -> bool {
        let side = self.scale.side();
        if c.i >= side || c.j >= side {
            return false;
        }
        let (w, m) = self.bit(c);
        self.words[w] & m != 0
    }

    /// Inserts a cell; returns `true` if it was newly added.
    pub fn insert(&mut self, c: CellIndex) -> bool {
        let side = self.scale.side();
        assert!(c.i < side && c.j < side, "cell {c:?} outside window");
        let (w, m) = self.bit(c);
        let fresh = self.words[w] & m == 0;
        self.words[w] |= m;
        self.count += fresh as u64;
        fresh
    }

    pub fn remove(&mut self, c: CellIndex) -> bool {
        if !self.contains(c) {
            return false;
        }
        let (w, m) = self.bit(c);
        self.words[w] &= !m;
        self.count -= 1;
        true
    }

    /// Sets cells `i0..=i1` of row `j`.
    pub fn insert_row_range(&mut self, j: u32, i0: u32, i1: u32) {
        let base = j as usize * self.words_per_row();
        let mut i = i0;
        while i <= i1 {
            let w = (i >> 6) as usize;
            let lo = i & 63;
            let hi = if (i1 >> 6) as usize == w { i1 & 63 } else { 63 };
            let mask = if hi - lo == 63 { u64::MAX } else { ((1u64 << (hi - lo + 1)) - 1) << lo };
            let word = &mut self.words[base + w];
            self.count += (mask & !*word).count_ones() as u64;
            *word |= mask;
            i = (w as u32 + 1) * 64;
        }
    }

    /// Number of occupied cells among `i0..=i1` in row `j`.
    pub fn count_row_range(&self, j: u32, i0: u32, i1: u32) -> u64 {
        let base = j as usize * self.words_per_row();
        let mut total = 0u64;
        let mut i = i0;
        while i <= i1 {
            let w = (i >> 6) as usize;
            let lo = i & 63;
            let hi = if (i1 >> 6) as usize == w { i1 & 63 } else { 63 };
            let mask = if hi - lo == 63 { u64::MAX } else { ((1u64 << (hi - lo + 1)) - 1) << lo };
            total += (self.words[base + w] & mask).count_ones() as u64;
            i = (w as u32 + 1) * 64;
        }
        total
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Lebesgue measure: `cell_count · δ²`.
    pub fn measure(&self) -> f64 {
        let d = self.scale.delta();
        self.count as f64 * d * d
    }

    /// Occupied cells in row-major (linear id) order.
    pub fn iter(&self) -> impl Iterator<Item = CellIndex> + '_ {
        let scale = self.scale;
        self.words.iter().enumerate().flat_map(move |(w, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros();
                bits &= bits - 1;
                Some(scale.from_linear((w as u32) * 64 + b))
            })
        })
    }

    /// Occupied cells sorted lexicographically by `(i, j)`.
    pub fn cells_lex(&self) -> Vec<CellIndex> {
        let mut v: Vec<CellIndex> = self.iter().collect();
        v.sort_unstable();
        v
    }

    /// Linear ids of occupied cells, ascending.
    pub fn linear_ids(&self) -> Vec<u32> {
        self.iter().map(|c| self.scale.linear(c)).collect()
    }

    fn check_scale(&self, other: &CellSet) -> Result<()> {
        if self.scale != other.scale {
            return Err(Error::ScaleMismatch(self.scale.k, other.scale.k));
        }
        Ok(())
    }

    fn zip_with(&self, other: &CellSet, f: impl Fn(u64, u64) -> u64) -> Result<CellSet> {
        self.check_scale(other)?;
        let words: Vec<u64> = self.words.iter().zip(&other.words).map(|(&a, &b)| f(a, b)).collect();
        let count = words.iter().map(|w| w.count_ones() as u64).sum();
        Ok(CellSet { scale: self.scale, words, count })
    }

    pub fn union(&self, other: &CellSet) -> Result<CellSet> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &CellSet) -> Result<CellSet> {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &CellSet) -> Result<CellSet> {
        self.zip_with(other, |a, b| a & !b)
    }

    pub fn intersection_count(&self, other: &CellSet) -> Result<u64> {
        self.check_scale(other)?;
        Ok(self.words.iter().zip(&other.words).map(|(&a, &b)| (a & b).count_ones() as u64).sum())
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.scale == other.scale && self.words.iter().zip(&other.words).all(|(&a, &b)| a & !b == 0)
    }

    /// Cells whose center lies within center-distance `r + δ` of an occupied cell center,
    /// i.e. the open `r`-neighborhood up to the cell-center rule.
    pub fn neighborhood(&self, r: f64) -> Result<CellSet> {
        let delta = self.scale.delta();
        if r < delta * (1.0 - 1e-12) {
            return Err(Error::RadiusBelowResolution { radius: r, delta });
        }
        if self.is_empty() {
            return Ok(CellSet::empty(self.scale));
        }
        let radius_cells = (r + delta) / delta;
        let r2 = radius_cells * radius_cells * (1.0 + 1e-12);
        let m = radius_cells.floor() as i64;
        let side = self.scale.side() as u64;
        let stencil_cost = self.count.saturating_mul(2 * m as u64 + 1);
        if stencil_cost <= 4 * side * side / 64 {
            Ok(self.dilate_stencil(r2, m))
        } else {
            Ok(self.dilate_distance_transform(r2))
        }
    }

    fn dilate_stencil(&self, r2: f64, m: i64) -> CellSet {
        let side = self.scale.side() as i64;
        let widths: Vec<(i64, i64)> = (-m..=m)
            .filter_map(|dj| {
                let rem = r2 - (dj * dj) as f64;
                (rem >= 0.0).then(|| (dj, rem.sqrt().floor() as i64))
            })
            .collect();
        let mut out = CellSet::empty(self.scale);
        for c in self.iter() {
            for &(dj, w) in &widths {
                let j = c.j as i64 + dj;
                if j < 0 || j >= side {
                    continue;
                }
                let i0 = (c.i as i64 - w).max(0);
                let i1 = (c.i as i64 + w).min(side - 1);
                out.insert_row_range(j as u32, i0 as u32, i1 as u32);
            }
        }
        out
    }

    fn dilate_distance_transform(&self, r2: f64) -> CellSet {
        let side = self.scale.side() as usize;
        // Squared vertical distance to the nearest occupied cell in the same column.
        let mut col = vec![u32::MAX; side * side];
        for i in 0..side {
            let mut last: Option<usize> = None;
            for j in 0..side {
                if self.contains(CellIndex::new(i as u32, j as u32)) {
                    last = Some(j);
                }
                if let Some(l) = last {
                    let d = (j - l) as u64;
                    col[j * side + i] = (d * d).min(u32::MAX as u64 - 1) as u32;
                }
            }
            let mut last: Option<usize> = None;
            for j in (0..side).rev() {
                if self.contains(CellIndex::new(i as u32, j as u32)) {
                    last = Some(j);
                }
                if let Some(l) = last {
                    let d = (l - j) as u64;
                    let v = (d * d).min(u32::MAX as u64 - 1) as u32;
                    let slot = &mut col[j * side + i];
                    *slot = (*slot).min(v);
                }
            }
        }
        let mut out = CellSet::empty(self.scale);
        let mut f = vec![0f64; side];
        let mut dist = vec![0f64; side];
        let mut v = vec![0usize; side];
        let mut z = vec![0f64; side + 1];
        for j in 0..side {
            for i in 0..side {
                let g = col[j * side + i];
                f[i] = if g == u32::MAX { 1e30 } else { g as f64 };
            }
            lower_envelope(&f, &mut dist, &mut v, &mut z);
            for (i, &d) in dist.iter().enumerate() {
                if d <= r2 {
                    out.insert(CellIndex::new(i as u32, j as u32));
                }
            }
        }
        out
    }

    /// Number of canonical dyadic squares of side `rho` meeting the set.
    pub fn covering_number(&self, rho: f64) -> Result<u64> {
        let m = dyadic_exponent(self.scale, rho)?;
        Ok(self.dyadic_blocks(m).len() as u64)
    }

    /// Occupied dyadic blocks `(i >> m, j >> m)` with their cell counts, sorted.
    pub fn dyadic_blocks(&self, m: u32) -> Vec<((u32, u32), u32)> {
        let bside = (self.scale.side() >> m).max(1) as usize;
        let mut counts = vec![0u32; bside * bside];
        for c in self.iter() {
            counts[(c.j >> m) as usize * bside + (c.i >> m) as usize] += 1;
        }
        let mut out = Vec::new();
        for bj in 0..bside {
            for bi in 0..bside {
                let n = counts[bj * bside + bi];
                if n > 0 {
                    out.push(((bi as u32, bj as u32), n));
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn measure_report(&self) -> MeasureReport {
        let delta = self.scale.delta();
        let covering_numbers = (0..=self.scale.k + 3)
            .map(|m| (delta * (m as f64).exp2(), self.dyadic_blocks(m).len() as u64))
            .collect();
        MeasureReport { cell_count: self.count, lebesgue: self.measure(), covering_numbers }
    }

    /// Measure of the cells whose center lies in the closed disc `B(center, r)`.
    pub fn ball_count(&self, center: Point<f64>, r: f64) -> f64 {
        let d = self.scale.delta();
        self.ball_cells(center, r) as f64 * d * d
    }

    /// Number of cells whose center lies in the closed disc `B(center, r)`.
    pub fn ball_cells(&self, center: Point<f64>, r: f64) -> u64 {
        if r < 0.0 {
            return 0;
        }
        let Some((j0, j1)) = self.scale.center_range(center.y - r, center.y + r) else {
            return 0;
        };
        let mut total = 0;
        for j in j0..=j1 {
            let y = -WINDOW_HALF_WIDTH + (j as f64 + 0.5) * self.scale.delta();
            let h = r * r - (y - center.y) * (y - center.y);
            if h < 0.0 {
                continue;
            }
            let w = h.sqrt();
            if let Some((i0, i1)) = self.scale.center_range(center.x - w, center.x + w) {
                total += self.count_row_range(j, i0, i1);
            }
        }
        total
    }

    /// Measure of `A ∩ L^(width)`, the cells of `A` whose center is within `width` of `L`.
    pub fn strip_cells<T: Scalar>(&self, line: &Line<T>, width: f64) -> u64 {
        (0..self.scale.side())
            .filter_map(|j| tube_row_span(line, width, self.scale, j).map(|(a, b)| self.count_row_range(j, a, b)))
            .sum()
    }

    /// Binary encoding: magic, version, `k`, window half-width, then the row-major
    /// bit stream packed least-significant-bit first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(14 + self.words.len() * 8);
        self.write_header(&mut out);
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub(crate) fn write_header(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(BINARY_MAGIC);
        out.push(BINARY_VERSION);
        out.push(self.scale.k as u8);
        out.extend_from_slice(&WINDOW_HALF_WIDTH.to_le_bytes());
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (scale, payload) = parse_header(bytes)?;
        let n_words = (scale.cell_count() / 64) as usize;
        if payload.len() != n_words * 8 {
            return Err(Error::Format(format!(
                "payload has {} bytes, expected {}",
                payload.len(),
                n_words * 8
            )));
        }
        let words: Vec<u64> = payload
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let count = words.iter().map(|w| w.count_ones() as u64).sum();
        Ok(Self { scale, words, count })
    }

    pub fn to_json(&self) -> CellSetJson {
        CellSetJson {
            k: self.scale.k,
            cells: self.cells_lex().into_iter().map(|c| [c.i, c.j]).collect(),
        }
    }

    pub fn from_json(json: &CellSetJson) -> Result<Self> {
        let scale = Scale::new(json.k)?;
        let side = scale.side();
        let mut s = CellSet::empty(scale);
        for &[i, j] in &json.cells {
            if i >= side || j >= side {
                return Err(Error::Format(format!("cell ({i}, {j}) outside window")));
            }
            s.insert(CellIndex::new(i, j));
        }
        Ok(s)
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

pub(crate) fn parse_header(bytes: &[u8]) -> Result<(Scale, &[u8])> {
    if bytes.len() < 14 || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::Format("missing cell-set magic".into()));
    }
    if bytes[4] != BINARY_VERSION {
        return Err(Error::Format(format!("unsupported version {}", bytes[4])));
    }
    let scale = Scale::new(bytes[5] as u32)?;
    let window = f64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes"));
    if window != WINDOW_HALF_WIDTH {
        return Err(Error::Format(format!("unsupported window half-width {window}")));
    }
    Ok((scale, &bytes[14..]))
}

/// Portable JSON form: `k` plus the lexicographically sorted occupied `(i, j)` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSetJson {
    pub k: u32,
    pub cells: Vec<[u32; 2]>,
}

/// Sparse cell set: sorted, deduplicated linear cell ids.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SparseCells {
    pub scale: Scale,
    ids: Vec<u32>,
}

impl SparseCells {
    pub fn from_ids(scale: Scale, mut ids: Vec<u32>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Self { scale, ids }
    }

    pub fn from_cells<I: IntoIterator<Item = CellIndex>>(scale: Scale, cells: I) -> Self {
        Self::from_ids(scale, cells.into_iter().map(|c| scale.linear(c)).collect())
    }

    pub fn from_cellset(set: &CellSet) -> Self {
        Self { scale: set.scale(), ids: set.linear_ids() }
    }

    pub fn to_cellset(&self) -> CellSet {
        let mut s = CellSet::empty(self.scale);
        for &id in &self.ids {
            s.insert(self.scale.from_linear(id));
        }
        s
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn measure(&self) -> f64 {
        let d = self.scale.delta();
        self.ids.len() as f64 * d * d
    }

    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        self.ids.iter().map(move |&id| self.scale.from_linear(id))
    }

    pub fn contains(&self, c: CellIndex) -> bool {
        self.ids.binary_search(&self.scale.linear(c)).is_ok()
    }

    pub fn contains_id(&self, id: u32) -> bool {
        self.ids.binary_search(&id).is_ok()
    }

    /// `|self ∩ other|` by sorted merge.
    pub fn intersection_count(&self, other: &SparseCells) -> u64 {
        let (a, b) = (&self.ids, &other.ids);
        let (mut x, mut y, mut n) = (0, 0, 0u64);
        while x < a.len() && y < b.len() {
            match a[x].cmp(&b[y]) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    x += 1;
                    y += 1;
                }
            }
        }
        n
    }

    pub fn filter(&self, keep: impl Fn(u32) -> bool) -> SparseCells {
        Self { scale: self.scale, ids: self.ids.iter().copied().filter(|&id| keep(id)).collect() }
    }
}

/// A δ-discretized subset of the real interval `[-4, 4)`: cell `i` is `[-4 + iδ, -4 + (i+1)δ)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CellSet1 {
    scale: Scale,
    occupied: Vec<bool>,
    count: u64,
}

impl CellSet1 {
    pub fn empty(scale: Scale) -> Self {
        Self { scale, occupied: vec![false; scale.side() as usize], count: 0 }
    }

    pub fn from_cells<I: IntoIterator<Item = u32>>(scale: Scale, cells: I) -> Self {
        let mut s = Self::empty(scale);
        for i in cells {
            s.insert(i);
        }
        s
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn insert(&mut self, i: u32) -> bool {
        let slot = &mut self.occupied[i as usize];
        let fresh = !*slot;
        *slot = true;
        self.count += fresh as u64;
        fresh
    }

    pub fn contains(&self, i: u32) -> bool {
        self.occupied.get(i as usize).copied().unwrap_or(false)
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Length: `cell_count · δ`.
    pub fn measure(&self) -> f64 {
        self.count as f64 * self.scale.delta()
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.occupied.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i as u32)
    }

    pub fn center(&self, i: u32) -> f64 {
        -WINDOW_HALF_WIDTH + (i as f64 + 0.5) * self.scale.delta()
    }

    pub fn cell_of(&self, x: f64) -> Option<u32> {
        let f = ((x + WINDOW_HALF_WIDTH) / self.scale.delta()).floor();
        (f >= 0.0 && f < self.scale.side() as f64).then_some(f as u32)
    }

    /// Prefix counts: `p[i]` is the number of occupied cells below `i`.
    pub fn prefix_counts(&self) -> Vec<u32> {
        let mut p = Vec::with_capacity(self.occupied.len() + 1);
        let mut acc = 0u32;
        p.push(0);
        for &b in &self.occupied {
            acc += b as u32;
            p.push(acc);
        }
        p
    }

    /// Cells whose center is within `r + δ` of an occupied center.
    pub fn neighborhood(&self, r: f64) -> Result<CellSet1> {
        let delta = self.scale.delta();
        if r < delta * (1.0 - 1e-12) {
            return Err(Error::RadiusBelowResolution { radius: r, delta });
        }
        let w = ((r + delta) / delta * (1.0 + 1e-12)).floor() as i64;
        let side = self.scale.side() as i64;
        let mut out = CellSet1::empty(self.scale);
        for i in self.iter() {
            for t in (i as i64 - w).max(0)..=(i as i64 + w).min(side - 1) {
                out.insert(t as u32);
            }
        }
        Ok(out)
    }

    pub fn union(&self, other: &CellSet1) -> Result<CellSet1> {
        if self.scale != other.scale {
            return Err(Error::ScaleMismatch(self.scale.k, other.scale.k));
        }
        Ok(CellSet1::from_cells(self.scale, self.iter().chain(other.iter())))
    }

    pub fn difference(&self, other: &CellSet1) -> CellSet1 {
        CellSet1::from_cells(self.scale, self.iter().filter(|&i| !other.contains(i)))
    }

    pub fn is_subset(&self, other: &CellSet1) -> bool {
        self.scale == other.scale && self.iter().all(|i| other.contains(i))
    }

    /// Number of occupied dyadic intervals of length `rho`.
    pub fn covering_number(&self, rho: f64) -> Result<u64> {
        let m = dyadic_exponent(self.scale, rho)?;
        let mut blocks: Vec<u32> = self.iter().map(|i| i >> m).collect();
        blocks.dedup();
        Ok(blocks.len() as u64)
    }
}

/// `m` with `rho = δ·2^m`, for dyadic `rho ∈ [δ, 8]`.
pub fn dyadic_exponent(scale: Scale, rho: f64) -> Result<u32> {
    let ratio = rho / scale.delta();
    if !(ratio >= 1.0) || !ratio.is_finite() {
        return Err(Error::InvalidRadius(rho));
    }
    let m = ratio.log2().round();
    if (m.exp2() - ratio).abs() > 1e-9 * ratio || m as u32 > scale.k + 3 {
        return Err(Error::InvalidRadius(rho));
    }
    Ok(m as u32)
}

/// Exact 1-D squared distance transform: `out[p] = min_q (p - q)² + f[q]`.
fn lower_envelope(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0: the new parabola dominates from the start.
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
            }
            break;
        }
    }
    k = 0;
    for (p, slot) in out.iter_mut().enumerate() {
        while z[k + 1] < p as f64 {
            k += 1;
        }
        let q = v[k];
        let d = p as f64 - q as f64;
        *slot = d * d + f[q];
    }
}

/// Cells of row `j` whose center lies within `width` of `line`, as an inclusive index range.
pub fn tube_row_span<T: Scalar>(line: &Line<T>, width: f64, scale: Scale, j: u32) -> Option<(u32, u32)> {
    let (theta, s) = (line.theta().as_f64(), line.offset().as_f64());
    let (sin, cos) = theta.sin_cos();
    let y = -WINDOW_HALF_WIDTH + (j as f64 + 0.5) * scale.delta();
    // Center (x, y) is in the tube iff |-sin·x + cos·y - s| <= width.
    let c = cos * y - s;
    if sin.abs() < 1e-15 {
        return if c.abs() <= width { Some((0, scale.side() - 1)) } else { None };
    }
    let a = (c - width) / sin;
    let b = (c + width) / sin;
    scale.center_range(a.min(b), a.max(b))
}

/// All cells whose center is within `width` of `line`, clipped to the window.
pub fn rasterize_tube<T: Scalar>(line: &Line<T>, width: f64, scale: Scale) -> CellSet {
    let mut out = CellSet::empty(scale);
    for j in 0..scale.side() {
        if let Some((a, b)) = tube_row_span(line, width, scale, j) {
            out.insert_row_range(j, a, b);
        }
    }
    out
}

/// Cells containing some point of the closed segment `[p, q]` (half-open cells),
/// traced at spacing `δ/64`.
pub fn rasterize_segment(p: Point<f64>, q: Point<f64>, scale: Scale) -> CellSet {
    let mut out = CellSet::empty(scale);
    let len = p.dist(q);
    let steps = ((len / scale.delta()) * 64.0).ceil().max(1.0) as usize;
    for t in 0..=steps {
        let u = t as f64 / steps as f64;
        let x = Point::new(p.x + u * (q.x - p.x), p.y + u * (q.y - p.y));
        if let Some(c) = scale.cell_of(x) {
            out.insert(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(k: u32) -> Scale {
        Scale::new(k).unwrap()
    }

    fn random_set(scale: Scale, n: usize, rng: &mut ChaCha8Rng) -> CellSet {
        let side = scale.side();
        CellSet::from_cells(scale, (0..n).map(|_| CellIndex::new(rng.gen_range(0..side), rng.gen_range(0..side))))
    }

    #[test]
    fn scale_bounds() {
        assert!(Scale::new(3).is_err());
        assert!(Scale::new(13).is_err());
        let sc = s(4);
        assert_eq!(sc.side(), 128);
        assert_eq!(sc.cell_count(), 128 * 128);
        assert_eq!(sc.delta(), 1.0 / 16.0);
    }

    #[test]
    fn measure_examples() {
        assert_eq!(CellSet::empty(s(6)).measure(), 0.0);
        assert_eq!(CellSet::full(s(4)).measure(), 64.0);
        let one = CellSet::from_cells(s(8), [CellIndex::new(3, 9)]);
        assert_eq!(one.measure(), (-16f64).exp2());
    }

    #[test]
    fn neighborhood_of_one_cell_matches_brute_force() {
        let sc = s(6);
        let c0 = CellIndex::new(200, 300);
        let a = CellSet::from_cells(sc, [c0]);
        let d = sc.delta();
        let nb = a.neighborhood(d).unwrap();
        let p0 = sc.center(c0);
        let mut oracle = 0;
        for j in 0..sc.side() {
            for i in 0..sc.side() {
                let c = CellIndex::new(i, j);
                if sc.center(c).dist(p0) <= 2.0 * d + 1e-12 {
                    oracle += 1;
                    assert!(nb.contains(c));
                }
            }
        }
        assert_eq!(oracle, 13);
        assert_eq!(nb.len(), 13);
    }

    #[test]
    fn neighborhood_edge_cases() {
        let sc = s(5);
        assert!(CellSet::empty(sc).neighborhood(0.5).unwrap().is_empty());
        assert!(matches!(
            CellSet::empty(sc).neighborhood(sc.delta() / 2.0),
            Err(Error::RadiusBelowResolution { .. })
        ));
        let a = CellSet::from_cells(sc, [CellIndex::new(0, 0)]);
        let corner_far = a.neighborhood(12.0).unwrap();
        assert_eq!(corner_far.len(), sc.cell_count());
    }

    #[test]
    fn stencil_and_distance_transform_agree() {
        let sc = s(4);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..6 {
            let a = random_set(sc, 20 + trial * 40, &mut rng);
            for r in [sc.delta(), 3.3 * sc.delta(), 0.8] {
                let radius_cells = (r + sc.delta()) / sc.delta();
                let r2 = radius_cells * radius_cells * (1.0 + 1e-12);
                let st = a.dilate_stencil(r2, radius_cells.floor() as i64);
                let dt = a.dilate_distance_transform(r2);
                assert_eq!(st, dt);
                assert!(a.is_subset(&st));
            }
        }
    }

    #[test]
    fn covering_number_examples() {
        let sc = s(8);
        assert_eq!(CellSet::empty(sc).covering_number(sc.delta()).unwrap(), 0);
        let seg = rasterize_segment(Point::new(0.0, 0.0), Point::new(1.0, 0.0), sc);
        // Oracle: half-open cells with y-range containing 0 and x-range meeting [0, 1].
        let d = sc.delta();
        let mut oracle = 0;
        for j in 0..sc.side() {
            for i in 0..sc.side() {
                let c = sc.corner(CellIndex::new(i, j));
                if c.y <= 0.0 && 0.0 < c.y + d && c.x <= 1.0 && c.x + d > 0.0 {
                    oracle += 1;
                }
            }
        }
        assert_eq!(oracle, 257);
        assert_eq!(seg.covering_number(d).unwrap(), 257);
        assert_eq!(seg.covering_number(2.0 * d).unwrap(), 129);
        assert!(matches!(seg.covering_number(3.0 * d), Err(Error::InvalidRadius(_))));
        assert!(seg.covering_number(16.0).is_err());
        assert_eq!(seg.covering_number(8.0).unwrap(), 1);
    }

    #[test]
    fn ball_count_examples() {
        let sc = s(6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_set(sc, 3000, &mut rng);
        assert_eq!(a.ball_count(Point::new(0.0, 0.0), 8.0 * 2f64.sqrt()), a.measure());
        let c = a.iter().next().unwrap();
        let d = sc.delta();
        assert_eq!(a.ball_count(sc.center(c), d / 2.0), d * d);
        for _ in 0..50 {
            let center = Point::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let r = rng.gen_range(d..3.0);
            let oracle = a.iter().filter(|&c| sc.center(c).dist(center) <= r).count() as u64;
            assert_eq!(a.ball_cells(center, r), oracle);
        }
    }

    #[test]
    fn tube_examples() {
        let sc = s(6);
        let d = sc.delta();
        let vertical = Line::<f64>::new(std::f64::consts::FRAC_PI_2, 0.0);
        let t = rasterize_tube(&vertical, 2.0 * d, sc);
        let oracle = (0..sc.side())
            .flat_map(|j| (0..sc.side()).map(move |i| CellIndex::new(i, j)))
            .filter(|&c| sc.center(c).x.abs() <= 2.0 * d)
            .count() as u64;
        assert_eq!(t.len(), oracle);
        assert_eq!(oracle, 4 * sc.side() as u64);
        let outside = Line::<f64>::new(std::f64::consts::FRAC_PI_2, -10.0);
        assert!(rasterize_tube(&outside, 2.0 * d, sc).is_empty());
        let slanted = Line::<f64>::new(0.3, 0.5);
        assert_eq!(rasterize_tube(&slanted, 16.0, sc).len(), sc.cell_count());
    }

    #[test]
    fn tube_contains_cells_meeting_line() {
        let sc = s(5);
        let line = Line::<f64>::new(0.7, 0.3);
        let t = rasterize_tube(&line, 2.0 * sc.delta(), sc);
        let e = line.direction();
        let v = line.foot();
        for step in -4000..4000 {
            let p = v + e.scale(step as f64 * 0.0013);
            if let Some(c) = sc.cell_of(p) {
                assert!(t.contains(c));
            }
        }
    }

    #[test]
    fn binary_and_json_round_trip() {
        let sc = s(5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_set(sc, 500, &mut rng);
        let bytes = a.to_bytes();
        assert_eq!(CellSet::from_bytes(&bytes).unwrap(), a);
        assert_eq!(CellSet::from_bytes(&bytes).unwrap().to_bytes(), bytes);
        let json = serde_json::to_string(&a.to_json()).unwrap();
        let back: CellSetJson = serde_json::from_str(&json).unwrap();
        assert_eq!(CellSet::from_json(&back).unwrap(), a);
        assert!(CellSet::from_bytes(&bytes[..20]).is_err());
    }

    #[test]
    fn set_algebra() {
        let sc = s(4);
        let a = CellSet::from_cells(sc, [CellIndex::new(1, 1), CellIndex::new(2, 2)]);
        let b = CellSet::from_cells(sc, [CellIndex::new(2, 2), CellIndex::new(3, 3)]);
        assert_eq!(a.union(&b).unwrap().len(), 3);
        assert_eq!(a.intersection(&b).unwrap().len(), 1);
        assert_eq!(a.difference(&b).unwrap().len(), 1);
        assert_eq!(a.intersection_count(&b).unwrap(), 1);
        assert!(a.intersection(&b).unwrap().is_subset(&a));
        assert!(a.union(&CellSet::empty(s(5))).is_err());
    }
}
