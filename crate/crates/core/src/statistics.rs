//! Counting quantities of a Furstenberg instance: the relation `x ∼ y` (shared `R_ω`),
//! pair counts and the deficiency exponent γ, stabbing sets `Ω_x`, strip masses,
//! Cauchy–Schwarz union bounds, pairwise intersections and dimension regression.

use crate::error::{Error, Result};
use crate::generators::FurstInstance;
use crate::grid::{CellIndex, CellSet, Scale, SparseCells};
use crate::linespace::{line_distance, Line};
use crate::scalar::Scalar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

/// Rank structure over the occupied cells of `E` plus the CSR incidence `x ↦ Ω_x`.
#[derive(Clone, Debug)]
pub struct StabIndex {
    scale: Scale,
    /// Sorted linear ids of the cells of `E`.
    e_ids: Vec<u32>,
    offsets: Vec<u32>,
    lines: Vec<u32>,
}

impl StabIndex {
    pub fn new(inst: &FurstInstance) -> Self {
        Self::from_sets(inst.scale, &inst.r_sets)
    }

    pub fn from_sets(scale: Scale, r_sets: &[SparseCells]) -> Self {
        let mut e_ids: Vec<u32> = r_sets.iter().flat_map(|r| r.ids().iter().copied()).collect();
        e_ids.sort_unstable();
        e_ids.dedup();
        let mut offsets = vec![0u32; e_ids.len() + 1];
        let rank = |id: u32| e_ids.binary_search(&id).expect("cell of E");
        let ranks: Vec<Vec<u32>> =
            r_sets.par_iter().map(|r| r.ids().iter().map(|&id| rank(id) as u32).collect()).collect();
        for rs in &ranks {
            for &x in rs {
                offsets[x as usize + 1] += 1;
            }
        }
        for x in 1..offsets.len() {
            offsets[x] += offsets[x - 1];
        }
        let mut fill = offsets.clone();
        let mut lines = vec![0u32; *offsets.last().unwrap_or(&0) as usize];
        for (w, rs) in ranks.iter().enumerate() {
            for &x in rs {
                lines[fill[x as usize] as usize] = w as u32;
                fill[x as usize] += 1;
            }
        }
        Self { scale, e_ids, offsets, lines }
    }

    pub fn cell_count(&self) -> usize {
        self.e_ids.len()
    }

    pub fn rank(&self, c: CellIndex) -> Option<usize> {
        self.e_ids.binary_search(&self.scale.linear(c)).ok()
    }

    pub fn rank_of_id(&self, id: u32) -> Option<usize> {
        self.e_ids.binary_search(&id).ok()
    }

    pub fn id(&self, rank: usize) -> u32 {
        self.e_ids[rank]
    }

    pub fn cell(&self, rank: usize) -> CellIndex {
        self.scale.from_linear(self.e_ids[rank])
    }

    /// Lines whose `R_ω` contains the cell of the given rank, ascending.
    pub fn stab(&self, rank: usize) -> &[u32] {
        &self.lines[self.offsets[rank] as usize..self.offsets[rank + 1] as usize]
    }

    pub fn total_incidences(&self) -> u64 {
        self.lines.len() as u64
    }
}

/// `|Ω_x|` for a cell of `E`; errors if the cell is not in the union.
pub fn omega_stab(index: &StabIndex, cell: CellIndex) -> Result<Vec<usize>> {
    let rank = index.rank(cell).ok_or(Error::NotInUnion(cell.i, cell.j))?;
    Ok(index.stab(rank).iter().map(|&w| w as usize).collect())
}

/// Ordered-pair counts of the relation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCount {
    /// Distinct ordered pairs `(x, y)` of cells with `x, y ∈ R_ω` for some `ω`.
    pub union_pairs: u64,
    /// `Σ_ω |R_ω|²` in cells.
    pub sum_pairs: u64,
    pub e_cells: u64,
    /// `log(|E|² / (union_pairs·δ⁴)) / (2 log(1/δ))`.
    pub gamma_measured: f64,
}

/// Relation data: per-cell related counts and the pair totals.
#[derive(Clone, Debug)]
pub struct Relation {
    pub index: StabIndex,
    /// `related[x]` = number of cells `y` with `x ∼ y` (including `x`), by rank.
    pub related: Vec<u32>,
    pub pairs: PairCount,
}

/// Gamma from cell counts: `log(|E|²/pairs) / (2k log 2)`.
pub fn gamma_from_counts(e_cells: u64, union_pairs: u64, scale: Scale) -> f64 {
    if union_pairs == 0 {
        return 0.0;
    }
    let e = e_cells as f64;
    (e * e / union_pairs as f64).ln() / (2.0 * scale.log2_inv_delta() * std::f64::consts::LN_2)
}

/// Exact relation counts. Each cell stamps the union of the `R_ω` through it, so the
/// work is `Σ_ω |R_ω|²` and the memory is one stamp array of `|E|` entries per thread.
pub fn relation(inst: &FurstInstance) -> Relation {
    let index = StabIndex::new(inst);
    let ranks: Vec<Vec<u32>> = inst
        .r_sets
        .par_iter()
        .map(|r| r.ids().iter().map(|&id| index.rank_of_id(id).expect("cell of E") as u32).collect())
        .collect();
    let n = index.cell_count();
    let related: Vec<u32> = (0..n)
        .into_par_iter()
        .map_init(
            || vec![u32::MAX; n],
            |stamp, x| {
                let mut count = 0u32;
                for &w in index.stab(x) {
                    for &y in &ranks[w as usize] {
                        if stamp[y as usize] != x as u32 {
                            stamp[y as usize] = x as u32;
                            count += 1;
                        }
                    }
                }
                count
            },
        )
        .collect();
    let union_pairs: u64 = related.iter().map(|&c| c as u64).sum();
    let sum_pairs: u64 = inst.r_sets.iter().map(|r| (r.len() as u64).pow(2)).sum();
    let pairs = PairCount {
        union_pairs,
        sum_pairs,
        e_cells: n as u64,
        gamma_measured: gamma_from_counts(n as u64, union_pairs, inst.scale),
    };
    Relation { index, related, pairs }
}

pub fn relation_pairs(inst: &FurstInstance) -> PairCount {
    relation(inst).pairs
}

/// `γ` measured from the pair identity.
pub fn gamma_measure(inst: &FurstInstance) -> f64 {
    relation_pairs(inst).gamma_measured
}

/// The stabbing-number diagnostics over all cells of `E`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabReport {
    pub max_stab: u64,
    /// `max_x |Ω_x|·δ^{α+γ}`.
    pub max_normalized: f64,
    /// `Σ_x |Ω_x|` and `Σ_ω |R_ω|`, which must agree.
    pub stab_total: u64,
    pub set_total: u64,
}

pub fn stab_report(inst: &FurstInstance, index: &StabIndex, gamma: f64) -> StabReport {
    let delta = inst.scale.delta();
    let max_stab = (0..index.cell_count()).map(|x| index.stab(x).len() as u64).max().unwrap_or(0);
    StabReport {
        max_stab,
        max_normalized: max_stab as f64 * delta.powf(inst.alpha + gamma),
        stab_total: index.total_incidences(),
        set_total: inst.r_sets.iter().map(|r| r.len() as u64).sum(),
    }
}

/// The heavy set `E₁ = {x : |{y ∈ E : x ∼ y}| ≥ δ^{2-2α+γ+ε}}`.
#[derive(Clone, Debug)]
pub struct HeavyPoints {
    pub set: CellSet,
    /// Threshold on related measure.
    pub threshold: f64,
    /// `½·δ^{2γ}·|E|`.
    pub predicted: f64,
    /// `|E₁| / predicted`.
    pub ratio: f64,
}

pub fn heavy_points(inst: &FurstInstance, rel: &Relation, gamma: f64, eps: f64) -> HeavyPoints {
    let delta = inst.scale.delta();
    let threshold = delta.powf(2.0 - 2.0 * inst.alpha + gamma + eps);
    let cell_area = delta * delta;
    let set = CellSet::from_cells(
        inst.scale,
        (0..rel.index.cell_count())
            .filter(|&x| rel.related[x] as f64 * cell_area >= threshold)
            .map(|x| rel.index.cell(x)),
    );
    let predicted = 0.5 * delta.powf(2.0 * gamma) * inst.e_union.measure();
    HeavyPoints { ratio: set.measure() / predicted, set, threshold, predicted }
}

/// Heavy points against `δ^ε` times the mean related mass `δ^{2γ}|E|` instead of its
/// nominal size. With `γ` measured from the pair count this keeps
/// `|E₁| ≥ (1 − δ^ε)·δ^{2γ}|E|` exact, independent of the polylog slack in `|E|`.
pub fn heavy_points_relative(inst: &FurstInstance, rel: &Relation, eps: f64) -> HeavyPoints {
    let delta = inst.scale.delta();
    let cells = rel.index.cell_count().max(1) as f64;
    // Mean of |{x₁ ~ x₀}| in cells, i.e. pairs / |E|.
    let mean = rel.pairs.union_pairs as f64 / cells;
    let cut = delta.powf(eps) * mean;
    let cell_area = delta * delta;
    let set = CellSet::from_cells(
        inst.scale,
        (0..rel.index.cell_count()).filter(|&x| rel.related[x] as f64 >= cut).map(|x| rel.index.cell(x)),
    );
    let predicted = (1.0 - delta.powf(eps)) * mean * cell_area;
    HeavyPoints { ratio: set.measure() / predicted, set, threshold: cut * cell_area, predicted }
}

/// Measure of the cells of `a` whose center lies within `width` of `line`.
pub fn strip_mass<T: Scalar>(a: &CellSet, line: &Line<T>, width: f64) -> f64 {
    let d = a.scale().delta();
    a.strip_cells(line, width) as f64 * d * d
}

/// `|⋃T_j| ≥ (Σ|T_j|)² / ΣΣ|T_i ∩ T_j|`, in exact cell counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsBound {
    pub union_cells: u64,
    pub sum_cells: u64,
    /// `Σ_i Σ_j |T_i ∩ T_j| = Σ_x mult(x)²`.
    pub double_sum: u64,
    /// Right-hand side as a measure.
    pub bound: f64,
    pub union_measure: f64,
    /// `union·double_sum - sum²` (non-negative).
    pub slack: u128,
}

pub fn cs_lower_bound(sets: &[SparseCells]) -> Result<CsBound> {
    let Some(first) = sets.first() else {
        return Err(Error::InvalidParameter("empty list of sets".into()));
    };
    let scale = first.scale;
    let mut all: Vec<u32> = sets.iter().flat_map(|s| s.ids().iter().copied()).collect();
    all.par_sort_unstable();
    let (mut union_cells, mut double_sum) = (0u64, 0u64);
    let mut run = 0u64;
    for (n, id) in all.iter().enumerate() {
        run += 1;
        if n + 1 == all.len() || all[n + 1] != *id {
            union_cells += 1;
            double_sum += run * run;
            run = 0;
        }
    }
    let sum_cells = all.len() as u64;
    let area = scale.delta() * scale.delta();
    let lhs = union_cells as u128 * double_sum as u128;
    let rhs = sum_cells as u128 * sum_cells as u128;
    if lhs < rhs {
        return Err(Error::InvariantViolation(format!(
            "Cauchy-Schwarz bound violated: {union_cells}·{double_sum} < {sum_cells}²"
        )));
    }
    let bound = if double_sum == 0 { 0.0 } else { (sum_cells as f64).powi(2) / double_sum as f64 * area };
    Ok(CsBound { union_cells, sum_cells, double_sum, bound, union_measure: union_cells as f64 * area, slack: lhs - rhs })
}

/// Exact `|R_i ∩ R_j|` for all pairs, stored sparsely.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseIntersections {
    pub diagonal: Vec<u64>,
    /// `(i, j, |R_i ∩ R_j|)` for `i < j` with a non-empty intersection, sorted.
    pub off_diagonal: Vec<(u32, u32, u64)>,
    /// `max_{i≠j} |R_i ∩ R_j|·d(ω_i, ω_j)^α / δ²`.
    pub max_normalized: f64,
    pub within_budget: bool,
}

impl PairwiseIntersections {
    pub fn get(&self, i: usize, j: usize) -> u64 {
        if i == j {
            return self.diagonal[i];
        }
        let (a, b) = (i.min(j) as u32, i.max(j) as u32);
        self.off_diagonal
            .binary_search_by(|&(x, y, _)| (x, y).cmp(&(a, b)))
            .map(|p| self.off_diagonal[p].2)
            .unwrap_or(0)
    }

    /// `ΣΣ |R_i ∩ R_j|` over ordered pairs, diagonal included.
    pub fn double_sum(&self) -> u64 {
        self.diagonal.iter().sum::<u64>() + 2 * self.off_diagonal.iter().map(|t| t.2).sum::<u64>()
    }
}

pub fn pairwise_intersections(inst: &FurstInstance, index: &StabIndex) -> PairwiseIntersections {
    let n = inst.r_sets.len();
    let rows: Vec<Vec<(u32, u32, u64)>> = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![0u64; n], Vec::<u32>::new()),
            |(counts, touched), i| {
                for &id in inst.r_sets[i].ids() {
                    let x = index.rank_of_id(id).expect("cell of E");
                    for &j in index.stab(x) {
                        if (j as usize) > i {
                            if counts[j as usize] == 0 {
                                touched.push(j);
                            }
                            counts[j as usize] += 1;
                        }
                    }
                }
                touched.sort_unstable();
                let row = touched.iter().map(|&j| (i as u32, j, counts[j as usize])).collect();
                for &j in touched.iter() {
                    counts[j as usize] = 0;
                }
                touched.clear();
                row
            },
        )
        .collect();
    let off_diagonal: Vec<(u32, u32, u64)> = rows.into_iter().flatten().collect();
    let alpha = inst.alpha;
    let max_normalized = off_diagonal
        .par_iter()
        .map(|&(i, j, c)| {
            let d = line_distance(&inst.omega.lines[i as usize], &inst.omega.lines[j as usize]);
            c as f64 * d.powf(alpha)
        })
        .reduce(|| 0.0, f64::max);
    PairwiseIntersections {
        diagonal: inst.r_sets.iter().map(|r| r.len() as u64).collect(),
        within_budget: max_normalized <= inst.scale.log2_inv_delta(),
        off_diagonal,
        max_normalized,
    }
}

/// One dyadic shell `2^{-s-1} < d(ω_i, ω_j) ≤ 2^{-s}` of the double sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    pub s: i32,
    pub pairs: u64,
    /// `Σ |R_i ∩ R_j|` over ordered pairs in the shell, in cells.
    pub intersection_cells: u64,
    /// `pairs · 2^{sα}`: the per-pair cap `δ²·d^{-α}` summed, in cells.
    pub cap_cells: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppendixReport {
    /// Exponent used: `α + min(α, β)`.
    pub exponent: f64,
    /// `|E| / δ^{2-exponent}`.
    pub ratio: f64,
    pub diagonal_cells: u64,
    pub shells: Vec<Shell>,
    pub double_sum: u64,
    /// Diagonal plus shells reproduce the double sum.
    pub identity_holds: bool,
    pub cs: CsBound,
}

pub fn appendix_bound(inst: &FurstInstance, pw: &PairwiseIntersections) -> Result<AppendixReport> {
    let scale = inst.scale;
    let k = scale.k() as i32;
    let exponent = inst.alpha + inst.alpha.min(inst.beta);
    let ratio = inst.e_union.measure() / scale.delta().powf(2.0 - exponent);
    let mut shells: HashMap<i32, (u64, u64)> = HashMap::new();
    let lines = &inst.omega.lines;
    let n = lines.len();
    // Ordered pairs of distinct lines, by shell; intersections come from the sparse table.
    let hist: Vec<HashMap<i32, u64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut h = HashMap::new();
            for j in 0..n {
                if i != j {
                    *h.entry(shell_of(line_distance(&lines[i], &lines[j]), k)).or_insert(0) += 1;
                }
            }
            h
        })
        .collect();
    for h in hist {
        for (s, c) in h {
            shells.entry(s).or_insert((0, 0)).0 += c;
        }
    }
    for &(i, j, c) in &pw.off_diagonal {
        let s = shell_of(line_distance(&lines[i as usize], &lines[j as usize]), k);
        shells.entry(s).or_insert((0, 0)).1 += 2 * c;
    }
    let mut shells: Vec<Shell> = shells
        .into_iter()
        .map(|(s, (pairs, cells))| Shell {
            s,
            pairs,
            intersection_cells: cells,
            cap_cells: pairs as f64 * (s as f64 * inst.alpha).exp2(),
        })
        .collect();
    shells.sort_by_key(|s| s.s);
    let diagonal_cells: u64 = pw.diagonal.iter().sum();
    let cs = cs_lower_bound(&inst.r_sets)?;
    let reconstructed = diagonal_cells + shells.iter().map(|s| s.intersection_cells).sum::<u64>();
    Ok(AppendixReport {
        exponent,
        ratio,
        diagonal_cells,
        double_sum: cs.double_sum,
        identity_holds: reconstructed == cs.double_sum && pw.double_sum() == cs.double_sum,
        shells,
        cs,
    })
}

/// `s` with `2^{-s-1} < d ≤ 2^{-s}`, capped at `k`.
fn shell_of(d: f64, k: i32) -> i32 {
    ((-d.log2()).floor() as i32).min(k)
}

/// Least-squares fit of `log₂ measure` against `k`; `measure ≈ δ^{2-d}` gives `d = 2 + slope`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub samples: Vec<(u32, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub dimension: f64,
}

pub fn exponent_fit(runs: &[(Scale, f64)]) -> Result<ExponentFit> {
    let mut distinct: Vec<u32> = runs.iter().map(|r| r.0.k()).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: distinct.len() });
    }
    if let Some(bad) = runs.iter().find(|r| !(r.1 > 0.0)) {
        return Err(Error::InvalidParameter(format!("non-positive measure {} at k={}", bad.1, bad.0.k())));
    }
    let samples: Vec<(u32, f64)> = runs.iter().map(|(s, m)| (s.k(), m.log2())).collect();
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0 as f64).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxy: f64 = samples.iter().map(|s| (s.0 as f64 - mx) * (s.1 - my)).sum();
    let sxx: f64 = samples.iter().map(|s| (s.0 as f64 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual =
        (samples.iter().map(|s| (s.1 - intercept - slope * s.0 as f64).powi(2)).sum::<f64>() / n).sqrt();
    Ok(ExponentFit { samples, slope, intercept, residual, dimension: 2.0 + slope })
}

/// Lower bound `λ / (176 + 656/α)` on the deficiency exponent in terms of the projection gain λ.
pub fn gamma0_formula(alpha: f64, lambda: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    Ok(lambda / (176.0 + 656.0 / alpha))
}

/// Upper bound for the dyadic Hausdorff content `H^α_∞(A)`: the cheapest cover by canonical
/// dyadic squares, each square of side `ρ` costing `ρ^α`.
pub fn hausdorff_content_upper(a: &CellSet, alpha: f64) -> f64 {
    let scale = a.scale();
    let delta = scale.delta();
    let mut cost: HashMap<(u32, u32), f64> = a.iter().map(|c| ((c.i, c.j), delta.powf(alpha))).collect();
    for m in 1..=scale.k() + 3 {
        let own = (delta * (m as f64).exp2()).powf(alpha);
        let mut next: HashMap<(u32, u32), f64> = HashMap::new();
        for ((i, j), c) in cost {
            *next.entry((i >> 1, j >> 1)).or_insert(0.0) += c;
        }
        for v in next.values_mut() {
            *v = v.min(own);
        }
        cost = next;
    }
    cost.values().sum()
}

/// One flat diagnostic row for CSV output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub name: String,
    pub k: u32,
    pub measured: f64,
    pub predicted: f64,
    pub ratio: f64,
}

impl DiagnosticRow {
    pub fn new(name: impl Into<String>, k: u32, measured: f64, predicted: f64) -> Self {
        let ratio = if predicted != 0.0 { measured / predicted } else { f64::NAN };
        Self { name: name.into(), k, measured, predicted, ratio }
    }
}

/// Writes serializable rows as CSV with a header line.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// All statistics of one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceStatistics {
    pub k: u32,
    pub e_measure: f64,
    pub pairs: PairCount,
    pub stab: StabReport,
    pub pairwise_max_normalized: f64,
    pub appendix: AppendixReport,
}

impl InstanceStatistics {
    pub fn rows(&self) -> Vec<DiagnosticRow> {
        let k = self.k;
        vec![
            DiagnosticRow::new("e_measure", k, self.e_measure, self.e_measure),
            DiagnosticRow::new("union_pairs", k, self.pairs.union_pairs as f64, self.pairs.sum_pairs as f64),
            DiagnosticRow::new("gamma_measured", k, self.pairs.gamma_measured, 0.0),
            DiagnosticRow::new("stab_normalized", k, self.stab.max_normalized, 1.0),
            DiagnosticRow::new("pairwise_normalized", k, self.pairwise_max_normalized, 1.0),
            DiagnosticRow::new("appendix_ratio", k, self.appendix.ratio, 1.0),
            DiagnosticRow::new("cs_bound", k, self.appendix.cs.bound, self.appendix.cs.union_measure),
        ]
    }
}

pub fn instance_statistics(inst: &FurstInstance) -> Result<InstanceStatistics> {
    let rel = relation(inst);
    let stab = stab_report(inst, &rel.index, rel.pairs.gamma_measured);
    if stab.stab_total != stab.set_total {
        return Err(Error::InvariantViolation("double counting identity failed".into()));
    }
    let pw = pairwise_intersections(inst, &rel.index);
    let appendix = appendix_bound(inst, &pw)?;
    Ok(InstanceStatistics {
        k: inst.scale.k(),
        e_measure: inst.e_union.measure(),
        pairs: rel.pairs,
        stab,
        pairwise_max_normalized: pw.max_normalized,
        appendix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sc(k: u32) -> Scale {
        Scale::new(k).unwrap()
    }

    #[test]
    fn gamma0_values() {
        assert!((gamma0_formula(0.5, 1.0).unwrap() - 1.0 / 1488.0).abs() < 1e-15);
        assert!((gamma0_formula(0.25, 1.0).unwrap() - 1.0 / 2800.0).abs() < 1e-15);
        assert_eq!(gamma0_formula(0.5, 0.0).unwrap(), 0.0);
        assert!(gamma0_formula(0.0, 1.0).is_err());
    }

    #[test]
    fn exact_power_law_fit() {
        let d0 = 1.37;
        let runs: Vec<(Scale, f64)> = (6..=8).map(|k| (sc(k), sc(k).delta().powf(2.0 - d0))).collect();
        let fit = exponent_fit(&runs).unwrap();
        assert!((fit.dimension - d0).abs() < 1e-9);
        let flat: Vec<(Scale, f64)> = (6..=8).map(|k| (sc(k), 0.3)).collect();
        assert!((exponent_fit(&flat).unwrap().dimension - 2.0).abs() < 1e-12);
        assert!(matches!(exponent_fit(&runs[..2]), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn cs_equality_cases() {
        let s = sc(5);
        let a = SparseCells::from_ids(s, vec![1, 2, 3]);
        let b = SparseCells::from_ids(s, vec![10, 11]);
        let disjoint = cs_lower_bound(&[a.clone(), b]).unwrap();
        assert_eq!(disjoint.slack, 0);
        assert!((disjoint.bound - disjoint.union_measure).abs() < 1e-15);
        let copies = cs_lower_bound(&[a.clone(), a.clone(), a.clone()]).unwrap();
        assert!((copies.bound - a.measure()).abs() < 1e-15);
        let empty = cs_lower_bound(&[SparseCells::from_ids(s, vec![])]).unwrap();
        assert_eq!(empty.bound, 0.0);
        assert!(cs_lower_bound(&[]).is_err());
    }

    #[test]
    fn content_of_cells() {
        let s = sc(6);
        let one = CellSet::from_cells(s, [CellIndex::new(5, 5)]);
        assert!((hausdorff_content_upper(&one, 1.0) - s.delta()).abs() < 1e-15);
        let mut sq = CellSet::empty(s);
        for j in 256..320 {
            sq.insert_row_range(j, 256, 319);
        }
        // The unit square is one dyadic square of side 1.
        assert!((hausdorff_content_upper(&sq, 1.0) - 1.0).abs() < 1e-12);
    }
}
