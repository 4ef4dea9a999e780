//! Discretized Furstenberg instances: a δ-separated line family with one α-dimensional
//! cell set `R_ω` inside each line's `2δ`-tube.

use crate::error::{Error, Result};
use crate::grid::{tube_row_span, CellIndex, CellSet, Scale, SparseCells};
use crate::linespace::{family_nonconcentration, Line, LineFamily};
use crate::regularity::{
    frostman_extract_lines, frostman_prune_fine_first, verify_sparse_class, RegularityReport, DEFAULT_BUDGET,
};
use crate::scalar::Point;
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::io::{Read, Write};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    CantorTarget,
    TrainTrack,
    Random,
    /// Assembled by hand from explicit parts.
    Custom,
}

impl std::str::FromStr for GeneratorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cantor" | "cantor_target" => Ok(Self::CantorTarget),
            "train_track" | "train-track" => Ok(Self::TrainTrack),
            "random" => Ok(Self::Random),
            "custom" => Ok(Self::Custom),
            other => Err(Error::InvalidParameter(format!("unknown generator `{other}`"))),
        }
    }
}

impl std::fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::CantorTarget => "cantor_target",
            Self::TrainTrack => "train_track",
            Self::Random => "random",
            Self::Custom => "custom",
        })
    }
}

/// Outcome of checking the three instance invariants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub tubes_contain_sets: bool,
    /// Largest `polylog_budget` over the `R_ω` reports.
    pub worst_set_budget: f64,
    pub sets_regular: bool,
    pub family: RegularityReport,
    pub family_regular: bool,
    pub min_separation: f64,
    pub separated: bool,
    /// `|Ω|·δ^β`.
    pub family_count_ratio: f64,
    pub budget: f64,
}

impl InvariantReport {
    pub fn holds(&self) -> bool {
        self.tubes_contain_sets && self.sets_regular && self.family_regular && self.separated
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FurstInstance {
    pub generator: GeneratorKind,
    pub scale: Scale,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    /// Dimensions realized by the rounded dyadic construction.
    pub achieved_alpha: f64,
    pub achieved_beta: f64,
    pub omega: LineFamily<f64>,
    pub r_sets: Vec<SparseCells>,
    pub e_union: CellSet,
    pub invariants: InvariantReport,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    generator: GeneratorKind,
    k: u32,
    alpha: f64,
    beta: f64,
    seed: u64,
    achieved_alpha: f64,
    achieved_beta: f64,
    line_count: usize,
    e_cells: u64,
    e_measure: f64,
    r_set_files: Vec<String>,
    invariants: InvariantReport,
}

impl FurstInstance {
    /// Assembles an instance and records its invariant report without rejecting it.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        generator: GeneratorKind,
        scale: Scale,
        alpha: f64,
        beta: f64,
        seed: u64,
        omega: LineFamily<f64>,
        r_sets: Vec<SparseCells>,
    ) -> Self {
        let mut e_union = CellSet::empty(scale);
        for r in &r_sets {
            for c in r.cells() {
                e_union.insert(c);
            }
        }
        let invariants = check_invariants(scale, alpha, beta, &omega, &r_sets, DEFAULT_BUDGET);
        Self {
            generator,
            scale,
            alpha,
            beta,
            seed,
            achieved_alpha: alpha,
            achieved_beta: beta,
            omega,
            r_sets,
            e_union,
            invariants,
        }
    }

    /// Like [`assemble`](Self::assemble) but fails unless all invariants hold.
    pub fn verified(self) -> Result<Self> {
        if !self.invariants.holds() {
            return Err(Error::InvariantViolation(format!(
                "{} instance at k={} fails its invariants: {:?}",
                self.generator,
                self.scale.k(),
                self.invariants
            )));
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.r_sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_sets.is_empty()
    }

    pub fn e_measure(&self) -> f64 {
        self.e_union.measure()
    }

    /// Writes `manifest.json`, `family.json` and one gzip-compressed cell-set binary per `R_ω`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("r_sets"))?;
        std::fs::write(dir.join("family.json"), self.omega.to_json_string()?)?;
        let mut names = Vec::with_capacity(self.r_sets.len());
        for (n, r) in self.r_sets.iter().enumerate() {
            let name = format!("r_sets/r_{n:06}.bin.gz");
            let mut enc = GzEncoder::new(Vec::new(), Compression::default());
            enc.write_all(&r.to_cellset().to_bytes())?;
            std::fs::write(dir.join(&name), enc.finish()?)?;
            names.push(name);
        }
        let manifest = Manifest {
            generator: self.generator,
            k: self.scale.k(),
            alpha: self.alpha,
            beta: self.beta,
            seed: self.seed,
            achieved_alpha: self.achieved_alpha,
            achieved_beta: self.achieved_beta,
            line_count: self.omega.len(),
            e_cells: self.e_union.len(),
            e_measure: self.e_measure(),
            r_set_files: names,
            invariants: self.invariants.clone(),
        };
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        let omega = LineFamily::<f64>::from_json_str(&std::fs::read_to_string(dir.join("family.json"))?)?;
        let scale = Scale::new(manifest.k)?;
        if omega.scale != scale || manifest.r_set_files.len() != omega.len() {
            return Err(Error::Format("manifest disagrees with family".into()));
        }
        let mut r_sets = Vec::with_capacity(omega.len());
        for name in &manifest.r_set_files {
            let mut bytes = Vec::new();
            GzDecoder::new(std::fs::File::open(dir.join(name))?).read_to_end(&mut bytes)?;
            let set = CellSet::from_bytes(&bytes)?;
            if set.scale() != scale {
                return Err(Error::ScaleMismatch(scale.k(), set.scale().k()));
            }
            r_sets.push(SparseCells::from_cellset(&set));
        }
        let mut inst =
            Self::assemble(manifest.generator, scale, manifest.alpha, manifest.beta, manifest.seed, omega, r_sets);
        inst.achieved_alpha = manifest.achieved_alpha;
        inst.achieved_beta = manifest.achieved_beta;
        Ok(inst)
    }
}

/// Checks tube containment, `(δ, α)` regularity of every `R_ω`, and the `(δ, β)` family
/// conditions under the polylog budget `c`.
pub fn check_invariants(
    scale: Scale,
    alpha: f64,
    beta: f64,
    omega: &LineFamily<f64>,
    r_sets: &[SparseCells],
    c: f64,
) -> InvariantReport {
    let delta = scale.delta();
    let tubes_contain_sets = omega.lines.len() == r_sets.len()
        && omega.lines.par_iter().zip(r_sets.par_iter()).all(|(l, r)| {
            r.cells().all(|cell| l.distance_to_point(scale.center(cell)) <= 2.0 * delta * (1.0 + 1e-9))
        });
    let worst_set_budget = r_sets
        .par_iter()
        .map(|r| verify_sparse_class(r, alpha, 0.0).polylog_budget)
        .reduce(|| 0.0, f64::max);
    let family = family_nonconcentration(omega, beta);
    let min_separation = if omega.len() < 2 { f64::INFINITY } else { omega.min_separation() };
    InvariantReport {
        tubes_contain_sets,
        worst_set_budget,
        sets_regular: !r_sets.is_empty() && worst_set_budget <= c,
        family_regular: family.passes(c),
        family_count_ratio: family.mass_ratio,
        family,
        min_separation,
        separated: min_separation >= delta * (1.0 - 1e-9),
        budget: c,
    }
}

/// Indices of a dyadic Cantor set after `levels` halvings of a unit interval, with
/// `round(2^{dim·m})` pieces at level `m`; the extra splits at each level are spread
/// evenly over the current pieces with a seeded phase.
pub fn dyadic_cantor(levels: u32, dim: f64, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut cur: Vec<u32> = vec![0];
    for m in 0..levels {
        let n = cur.len() as u64;
        let target = ((dim * (m + 1) as f64).exp2().round() as u64).clamp(n, 2 * n);
        let extra = target - n;
        let phase = rng.gen_range(0..n);
        let mut next = Vec::with_capacity(target as usize);
        for (idx, &c) in cur.iter().enumerate() {
            let idx = idx as u64;
            let split = ((idx + 1) * extra + phase) / n > (idx * extra + phase) / n;
            if split {
                next.push(2 * c);
                next.push(2 * c + 1);
            } else {
                next.push(2 * c + rng.gen::<bool>() as u32);
            }
        }
        cur = next;
    }
    cur
}

fn achieved(count: usize, levels: u32) -> f64 {
    (count as f64).log2() / levels as f64
}

fn check_exponent(name: &str, x: f64, hi: f64) -> Result<()> {
    if !(x > 0.0 && x <= hi) {
        return Err(Error::InvalidParameter(format!("{name} = {x} outside (0, {hi}]")));
    }
    Ok(())
}

/// Rotated copies of a Cantor set `A ⊂ [1/2, 1]` along lines through the origin whose
/// angles from the vertical form a Cantor set in `[0, π/4]`.
pub fn gen_cantor_target(alpha: f64, beta: f64, scale: Scale, seed: u64) -> Result<FurstInstance> {
    check_exponent("alpha", alpha, 1.0)?;
    check_exponent("beta", beta, 1.0)?;
    let k = scale.k();
    let delta = scale.delta();
    let levels = k - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a_idx = dyadic_cantor(levels, alpha, &mut rng);
    let b_idx = dyadic_cantor(levels, beta, &mut rng);
    if a_idx.len() < 2 || b_idx.len() < 2 {
        return Err(Error::ConstructionFailure(format!(
            "Cantor construction at k={k} yields fewer than two pieces"
        )));
    }
    let mut in_a = vec![false; 1 << levels];
    for &i in &a_idx {
        in_a[i as usize] = true;
    }
    let angle_step = FRAC_PI_4 / (1u64 << levels) as f64;
    let lines: Vec<Line<f64>> =
        b_idx.iter().map(|&i| Line::new(FRAC_PI_2 - (i as f64 + 0.5) * angle_step, 0.0)).collect();
    let r_sets: Vec<SparseCells> = lines
        .par_iter()
        .map(|l| {
            let e = l.direction();
            let mut cells = Vec::new();
            for j in 0..scale.side() {
                if let Some((i0, i1)) = tube_row_span(l, delta / 2.0, scale, j) {
                    for i in i0..=i1 {
                        let c = CellIndex::new(i, j);
                        let t = scale.center(c).dot(e);
                        if (0.5..1.0).contains(&t) && in_a[((t - 0.5) / delta) as usize] {
                            cells.push(c);
                        }
                    }
                }
            }
            SparseCells::from_cells(scale, cells)
        })
        .collect();
    let omega = LineFamily::new(scale, lines, beta);
    let mut inst = FurstInstance::assemble(GeneratorKind::CantorTarget, scale, alpha, beta, seed, omega, r_sets);
    inst.achieved_alpha = achieved(a_idx.len(), levels);
    inst.achieved_beta = achieved(b_idx.len(), levels);
    inst.verified()
}

/// Vertical lines `x = b`, `b` in a β-dimensional Cantor subset of `[1, 2]`, each carrying
/// the same α-dimensional set of heights `C ⊂ [1, 2]`.
pub fn gen_train_track(alpha: f64, beta: f64, scale: Scale, seed: u64) -> Result<FurstInstance> {
    check_exponent("alpha", alpha, 1.0)?;
    if beta > 1.0 {
        return Err(Error::Infeasible(format!("a parallel family has dimension at most 1, got beta = {beta}")));
    }
    check_exponent("beta", beta, 1.0)?;
    let k = scale.k();
    let delta = scale.delta();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b_idx = dyadic_cantor(k, beta, &mut rng);
    let c_idx = dyadic_cantor(k, alpha, &mut rng);
    // [1, 2] starts at cell 5·2^k of the window.
    let origin = 5u32 << k;
    let lines: Vec<Line<f64>> =
        b_idx.iter().map(|&i| Line::new(FRAC_PI_2, -(1.0 + (i as f64 + 0.5) * delta))).collect();
    let r_sets: Vec<SparseCells> = b_idx
        .iter()
        .map(|&i| SparseCells::from_cells(scale, c_idx.iter().map(|&h| CellIndex::new(origin + i, origin + h))))
        .collect();
    let omega = LineFamily::new(scale, lines, beta);
    let mut inst = FurstInstance::assemble(GeneratorKind::TrainTrack, scale, alpha, beta, seed, omega, r_sets);
    inst.achieved_alpha = achieved(c_idx.len(), k);
    inst.achieved_beta = achieved(b_idx.len(), k);
    inst.verified()
}

/// Uniformly sampled lines meeting `B(0, 1)`, thinned to a δ-separated `(δ, β)` family; each
/// `R_ω` is a random half of the line's cell chain inside `B(0, 2)`, thinned to a `(δ, α)` set.
pub fn gen_random(alpha: f64, beta: f64, scale: Scale, seed: u64) -> Result<FurstInstance> {
    check_exponent("alpha", alpha, 1.0)?;
    check_exponent("beta", beta, 2.0)?;
    let delta = scale.delta();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ((4.0 * delta.powf(-beta)).ceil() as usize).min(2_000_000);
    let candidates: Vec<Line<f64>> =
        (0..n).map(|_| Line::new(rng.gen_range(0.0..PI), rng.gen_range(-1.0..1.0))).collect();
    let net = crate::linespace::separated_net(&candidates, delta);
    let lines = frostman_extract_lines(&net, scale, beta);
    let line_seed: u64 = rng.gen();
    let r_sets: Vec<SparseCells> = lines
        .par_iter()
        .enumerate()
        .map(|(n, l)| {
            let mut lr = ChaCha8Rng::seed_from_u64(line_seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut chain = Vec::new();
            for j in 0..scale.side() {
                if let Some((i0, i1)) = tube_row_span(l, delta / 2.0, scale, j) {
                    for i in i0..=i1 {
                        let c = CellIndex::new(i, j);
                        let p: Point<f64> = scale.center(c);
                        if p.norm() <= 2.0 && lr.gen::<bool>() {
                            chain.push(c);
                        }
                    }
                }
            }
            SparseCells::from_cells(scale, frostman_prune_fine_first(chain, scale, alpha))
        })
        .collect();
    let omega = LineFamily::new(scale, lines, beta);
    FurstInstance::assemble(GeneratorKind::Random, scale, alpha, beta, seed, omega, r_sets).verified()
}

/// Dispatches on the generator kind.
pub fn generate(kind: GeneratorKind, alpha: f64, beta: f64, scale: Scale, seed: u64) -> Result<FurstInstance> {
    match kind {
        GeneratorKind::CantorTarget => gen_cantor_target(alpha, beta, scale, seed),
        GeneratorKind::TrainTrack => gen_train_track(alpha, beta, scale, seed),
        GeneratorKind::Random => gen_random(alpha, beta, scale, seed),
        GeneratorKind::Custom => Err(Error::InvalidParameter("custom instances are assembled, not generated".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cantor_counts_follow_rounding() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &dim in &[0.3, 0.5, 0.6309, 1.0] {
            let idx = dyadic_cantor(8, dim, &mut rng);
            assert_eq!(idx.len() as f64, (dim * 8.0).exp2().round());
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), idx.len());
            assert!(idx.iter().all(|&i| i < 256));
        }
    }

    #[test]
    fn generator_names_parse() {
        for k in [GeneratorKind::CantorTarget, GeneratorKind::TrainTrack, GeneratorKind::Random] {
            assert_eq!(k.to_string().parse::<GeneratorKind>().unwrap(), k);
        }
        assert!("nope".parse::<GeneratorKind>().is_err());
    }

    #[test]
    fn train_track_rejects_wide_beta() {
        let s = Scale::new(6).unwrap();
        assert!(matches!(gen_train_track(0.5, 1.5, s, 0), Err(Error::Infeasible(_))));
    }
}
