//! Boundedness sweeps: for each `(p, lambda, beta)` cell, every witness is
//! pushed through the operator at several grid resolutions and the growth of
//! `‖Tf‖ / ‖f‖` under refinement decides the cell.

mod witnesses;

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::grid::{
    dyadic_family, BallFamily, Domain, FamilyMode, Point, Refinement, SampledFunction,
};
use crate::morrey::{morrey_norm, weak_morrey_norm, MorreyParams, NormResult};
use crate::operators::{hilbert, maximal};
use crate::weights::{a1_constant_estimate, ap_constant_estimate, ClassEstimate, Weight};

pub use witnesses::{
    sigma_class_exponent, witness_suite, Operator, SuiteSelection, Witness, RANDOM_FILLERS,
    SIGMA_EPSILON, SINGULAR_MARGIN,
};

/// Growth exponents at or below this are bounded.
pub const BOUNDED_GROWTH: f64 = 0.05;
/// Growth exponents at or above this are unbounded.
pub const UNBOUNDED_GROWTH: f64 = 0.2;
/// Minimum slope of the ratio against `log(1/h)` for logarithmic blow-up.
pub const LOG_SLOPE: f64 = 0.1;
/// Minimum coefficient of determination of that linear fit.
pub const LOG_R_SQUARED: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    Strong,
    Weak,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Bounded,
    Unbounded,
    Inconclusive,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Bounded => "bounded",
            Classification::Unbounded => "unbounded",
            Classification::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub operator: Operator,
    pub p_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub dim: usize,
    pub half_width: f64,
    /// Cells per axis at each refinement level.
    pub resolutions: Vec<usize>,
    pub refinement: Refinement,
    pub family_mode: FamilyMode,
    /// Smallest family radius, in units of the smallest cell.
    pub r_min_cells: f64,
    /// Largest family radius, in units of the half width.
    pub r_max_factor: f64,
    pub suite: SuiteSelection,
    pub norm: NormKind,
    pub seed: u64,
    /// Cells not started before this much time has passed are reported
    /// inconclusive.
    pub time_limit: Option<Duration>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            operator: Operator::Maximal,
            p_grid: vec![2.0],
            lambda_grid: vec![0.5],
            beta_grid: vec![0.5],
            dim: 1,
            half_width: 4.0,
            resolutions: vec![256, 512, 1024],
            refinement: Refinement::Uniform,
            family_mode: FamilyMode::Full,
            r_min_cells: 1.0,
            r_max_factor: 2.0,
            suite: SuiteSelection::All,
            norm: NormKind::Strong,
            seed: 42,
            time_limit: None,
        }
    }
}

fn list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(invalid(format!("dim must be 1 or 2, got {}", self.dim)));
        }
        if self.operator == Operator::Hilbert && self.dim != 1 {
            return Err(Error::Unsupported(
                "the Hilbert sweep is one-dimensional".into(),
            ));
        }
        if self.resolutions.len() < 3 {
            return Err(Error::TooFewLevels(self.resolutions.len()));
        }
        if self.resolutions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("resolutions must be strictly increasing"));
        }
        if self.p_grid.is_empty() || self.lambda_grid.is_empty() || self.beta_grid.is_empty() {
            return Err(invalid("parameter grids must be non-empty"));
        }
        for &p in &self.p_grid {
            if !(p >= 1.0 && p.is_finite()) {
                return Err(invalid(format!("p must be at least 1, got {p}")));
            }
        }
        for &l in &self.lambda_grid {
            if !(l >= 0.0 && l < self.dim as f64) {
                return Err(invalid(format!("lambda must lie in [0, dim), got {l}")));
            }
        }
        if self.beta_grid.iter().any(|b| !b.is_finite()) {
            return Err(invalid("beta values must be finite"));
        }
        if !(self.r_min_cells > 0.0 && self.r_max_factor > 0.0) {
            return Err(invalid("family radius bounds must be positive"));
        }
        Ok(())
    }

    /// Grid points in row-major `(p, lambda, beta)` order.
    pub fn cells(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &p in &self.p_grid {
            for &l in &self.lambda_grid {
                for &b in &self.beta_grid {
                    out.push((p, l, b));
                }
            }
        }
        out
    }

    /// Stable text form, one `key = value` per line; the time limit is left
    /// out because it does not change completed cells.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let refinement = match self.refinement {
            Refinement::Uniform => "uniform".to_string(),
            Refinement::OriginLog {
                ratio,
                depth,
                floor,
            } => format!("origin-log:{ratio:?}:{depth}:{floor:?}"),
        };
        let _ = writeln!(s, "operator = {}", self.operator.name());
        let _ = writeln!(s, "p = {}", list(&self.p_grid));
        let _ = writeln!(s, "lambda = {}", list(&self.lambda_grid));
        let _ = writeln!(s, "beta = {}", list(&self.beta_grid));
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "half_width = {:?}", self.half_width);
        let res: Vec<String> = self.resolutions.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(s, "resolutions = {}", res.join(","));
        let _ = writeln!(s, "refinement = {refinement}");
        let _ = writeln!(s, "family = {:?}", self.family_mode);
        let _ = writeln!(s, "r_min_cells = {:?}", self.r_min_cells);
        let _ = writeln!(s, "r_max_factor = {:?}", self.r_max_factor);
        let _ = writeln!(s, "suite = {:?}", self.suite);
        let _ = writeln!(s, "norm = {:?}", self.norm);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }

    /// SHA-256 of [`Self::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// The operator output, as a grid function.
pub fn apply_operator(
    op: Operator,
    f: &SampledFunction,
    family: &BallFamily,
) -> Result<SampledFunction> {
    match op {
        Operator::Maximal => maximal(f, family),
        Operator::Hilbert => hilbert(f),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioResult {
    /// `+inf` when the output norm diverges.
    pub ratio: f64,
    pub output: NormResult,
    pub input: NormResult,
}

/// `norm(Tf) / ‖f‖`, with the output measured in the chosen norm and the
/// input always in the strong norm.
pub fn operator_ratio(
    op: Operator,
    f: &SampledFunction,
    params: &MorreyParams,
    family: &BallFamily,
    norm: NormKind,
) -> Result<RatioResult> {
    let input = morrey_norm(f, params, family)?;
    if input.value == 0.0 {
        return Err(Error::ZeroNorm);
    }
    if !input.value.is_finite() {
        return Err(Error::InfiniteNorm);
    }
    let tf = apply_operator(op, f, family)?;
    let output = match norm {
        NormKind::Strong => morrey_norm(&tf, params, family)?,
        NormKind::Weak => weak_morrey_norm(&tf, params, family)?,
    };
    Ok(RatioResult {
        ratio: output.value / input.value,
        output,
        input,
    })
}

/// Slope, intercept and coefficient of determination of a least-squares line.
fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    (slope, my - slope * mx, r2)
}

fn check_levels(levels: &[(f64, f64)]) -> Result<()> {
    if levels.len() < 3 {
        return Err(Error::TooFewLevels(levels.len()));
    }
    if levels.iter().any(|(h, _)| !(*h > 0.0)) {
        return Err(invalid("cell sizes must be positive"));
    }
    let mut hs: Vec<f64> = levels.iter().map(|l| l.0).collect();
    hs.sort_by(f64::total_cmp);
    if hs.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("refinement levels must have distinct cell sizes"));
    }
    Ok(())
}

/// Least-squares slope of `log(ratio)` against `log(1/h)` for `(h, ratio)`
/// pairs; `+inf` if any ratio diverged.
pub fn growth_exponent(levels: &[(f64, f64)]) -> Result<f64> {
    check_levels(levels)?;
    if levels.iter().any(|(_, r)| r.is_infinite()) {
        return Ok(f64::INFINITY);
    }
    if levels.iter().any(|(_, r)| !(*r > 0.0)) {
        return Err(invalid("ratios must be positive"));
    }
    let xs: Vec<f64> = levels.iter().map(|(h, _)| -h.ln()).collect();
    let ys: Vec<f64> = levels.iter().map(|(_, r)| r.ln()).collect();
    Ok(least_squares(&xs, &ys).0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogFit {
    pub slope: f64,
    pub r_squared: f64,
}

impl LogFit {
    pub fn is_log_growth(&self) -> bool {
        self.slope > LOG_SLOPE && self.r_squared > LOG_R_SQUARED
    }
}

/// Linear fit of the ratio itself against `log(1/h)`.
pub fn log_growth_fit(levels: &[(f64, f64)]) -> Result<LogFit> {
    check_levels(levels)?;
    if levels.iter().any(|(_, r)| !r.is_finite()) {
        return Err(invalid("log fit needs finite ratios"));
    }
    let xs: Vec<f64> = levels.iter().map(|(h, _)| -h.ln()).collect();
    let ys: Vec<f64> = levels.iter().map(|(_, r)| *r).collect();
    let (slope, _, r_squared) = least_squares(&xs, &ys);
    Ok(LogFit { slope, r_squared })
}

/// Verdict for one witness: the growth exponent decides unless it falls
/// between the thresholds, where a clean logarithmic fit still counts as
/// blow-up.
pub fn judge(levels: &[(f64, f64)]) -> Result<(Classification, f64, Option<LogFit>)> {
    let g = growth_exponent(levels)?;
    if g >= UNBOUNDED_GROWTH {
        return Ok((Classification::Unbounded, g, None));
    }
    if g <= BOUNDED_GROWTH {
        return Ok((Classification::Bounded, g, None));
    }
    let fit = log_growth_fit(levels)?;
    let verdict = if fit.is_log_growth() {
        Classification::Unbounded
    } else {
        Classification::Inconclusive
    };
    Ok((verdict, g, Some(fit)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessEvidence {
    pub id: String,
    pub probe: String,
    /// Cell size and ratio per refinement level.
    pub levels: Vec<(f64, f64)>,
    pub growth_exponent: f64,
    pub log_fit: Option<LogFit>,
    pub verdict: Classification,
    /// Output-norm maximiser at the finest level.
    pub argmax_center: Point,
    pub argmax_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionCell {
    pub p: f64,
    pub lambda: f64,
    pub beta: f64,
    pub classification: Classification,
    pub max_ratio: f64,
    pub growth_exponent: f64,
    pub witness_id: String,
    pub argmax_center: Point,
    pub argmax_radius: f64,
    #[serde(skip)]
    pub evidence: Vec<WitnessEvidence>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionMap {
    pub config_hash: String,
    pub dim: usize,
    pub cells: Vec<RegionCell>,
    /// Wall-clock seconds per cell, in cell order.
    pub timing: Vec<f64>,
}

/// Domains and families for every refinement level, shared by all cells.
pub struct Levels {
    pub domains: Vec<Arc<Domain>>,
    pub families: Vec<BallFamily>,
}

impl Levels {
    pub fn new(config: &SweepConfig) -> Result<Self> {
        let mut domains = Vec::new();
        let mut families = Vec::new();
        for &cells in &config.resolutions {
            let d = Arc::new(Domain::new(
                config.dim,
                config.half_width,
                cells,
                config.refinement,
            )?);
            let r_min = config.r_min_cells * d.min_cell_size();
            let r_max = config.r_max_factor * config.half_width;
            families.push(dyadic_family(&d, r_min, r_max, config.family_mode)?);
            domains.push(d);
        }
        Ok(Levels { domains, families })
    }
}

fn pending_cell(p: f64, lambda: f64, beta: f64, reason: &str) -> RegionCell {
    RegionCell {
        p,
        lambda,
        beta,
        classification: Classification::Inconclusive,
        max_ratio: f64::NAN,
        growth_exponent: f64::NAN,
        witness_id: reason.into(),
        argmax_center: [0.0, 0.0],
        argmax_radius: f64::NAN,
        evidence: Vec::new(),
    }
}

/// Runs every witness of one cell through all levels.
pub fn classify_cell(
    config: &SweepConfig,
    levels: &Levels,
    p: f64,
    lambda: f64,
    beta: f64,
) -> Result<RegionCell> {
    let params = MorreyParams::power(p, lambda, beta, config.dim)?;
    let suite = witness_suite(
        config.operator,
        p,
        lambda,
        beta,
        config.dim,
        config.suite,
        config.seed,
    );
    let mut evidence = Vec::new();
    'witness: for w in &suite {
        let mut pts = Vec::new();
        let mut last = None;
        for (d, fam) in levels.domains.iter().zip(&levels.families) {
            let f = w.sample(d)?;
            match operator_ratio(config.operator, &f, &params, fam, config.norm) {
                Ok(r) => {
                    pts.push((d.min_cell_size(), r.ratio));
                    last = Some(r);
                }
                Err(Error::ZeroNorm) => continue 'witness,
                Err(Error::InfiniteNorm) => {
                    log::debug!("witness {} has infinite norm at beta {beta}", w.id);
                    continue 'witness;
                }
                Err(e) => return Err(e),
            }
        }
        let (verdict, g, fit) = judge(&pts)?;
        let out = last.expect("at least three levels").output;
        evidence.push(WitnessEvidence {
            id: w.id.clone(),
            probe: w.probe.into(),
            levels: pts,
            growth_exponent: g,
            log_fit: fit,
            verdict,
            argmax_center: out.argmax_ball.center,
            argmax_radius: out.argmax_ball.radius,
        });
    }
    if evidence.is_empty() {
        return Ok(pending_cell(p, lambda, beta, "no-witness"));
    }
    let any_unbounded = evidence
        .iter()
        .any(|e| e.verdict == Classification::Unbounded);
    let classification = if any_unbounded {
        Classification::Unbounded
    } else if evidence
        .iter()
        .all(|e| e.verdict == Classification::Bounded)
    {
        Classification::Bounded
    } else {
        Classification::Inconclusive
    };
    // The worst witness is the fastest-growing one among those that decided
    // an unbounded cell, else the fastest-growing overall; ties keep the first.
    let worst = evidence
        .iter()
        .filter(|e| !any_unbounded || e.verdict == Classification::Unbounded)
        .fold(None::<&WitnessEvidence>, |best, e| match best {
            Some(b) if !(e.growth_exponent > b.growth_exponent) => Some(b),
            _ => Some(e),
        })
        .expect("evidence is non-empty");
    let max_ratio = evidence
        .iter()
        .map(|e| e.levels.last().map_or(0.0, |l| l.1))
        .fold(0.0, f64::max);
    Ok(RegionCell {
        p,
        lambda,
        beta,
        classification,
        max_ratio,
        growth_exponent: worst.growth_exponent,
        witness_id: worst.id.clone(),
        argmax_center: worst.argmax_center,
        argmax_radius: worst.argmax_radius,
        evidence,
    })
}

/// Classifies every grid point of the config. Cells run in parallel; the
/// result does not depend on scheduling.
pub fn classify_region(config: &SweepConfig) -> Result<RegionMap> {
    config.validate()?;
    let levels = Levels::new(config)?;
    let start = Instant::now();
    let results: Vec<Result<(RegionCell, f64)>> = config
        .cells()
        .into_par_iter()
        .map(|(p, lambda, beta)| {
            if config.time_limit.is_some_and(|t| start.elapsed() > t) {
                return Ok((pending_cell(p, lambda, beta, "time-limit"), 0.0));
            }
            let t0 = Instant::now();
            let cell = classify_cell(config, &levels, p, lambda, beta)?;
            Ok((cell, t0.elapsed().as_secs_f64()))
        })
        .collect();
    let mut cells = Vec::new();
    let mut timing = Vec::new();
    for r in results {
        let (c, t) = r?;
        cells.push(c);
        timing.push(t);
    }
    Ok(RegionMap {
        config_hash: config.hash(),
        dim: config.dim,
        cells,
        timing,
    })
}

/// `w(B) σ(B)^{q-1} / |B|^q` for `w = |x|^beta`, `σ = w^{1-q'}` and
/// `q = p + lambda/dim`, maximised over the family; this is the `A_q`
/// constant that must stay finite wherever the maximal operator is bounded.
pub fn sigma_witness_quotient(
    p: f64,
    lambda: f64,
    beta: f64,
    family: &BallFamily,
) -> Result<ClassEstimate> {
    let dim = family.domain().dim();
    let q = sigma_class_exponent(p, lambda, dim);
    let w = Weight::power(beta);
    if q == 1.0 {
        a1_constant_estimate(&w, family)
    } else {
        ap_constant_estimate(&w, q, family)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        [256.0, 512.0, 1024.0, 2048.0]
            .iter()
            .map(|n| {
                let h = 8.0 / n;
                (h, f(h))
            })
            .collect()
    }

    #[test]
    fn growth_of_synthetic_sequences() {
        assert_eq!(growth_exponent(&synthetic(|_| 3.0)).unwrap(), 0.0);
        let g = growth_exponent(&synthetic(|h| 2.0 * h.powf(-0.5))).unwrap();
        assert!((g - 0.5).abs() < 1e-12);
        let mut diverged = synthetic(|_| 1.0);
        diverged[1].1 = f64::INFINITY;
        assert_eq!(growth_exponent(&diverged).unwrap(), f64::INFINITY);
        assert!(matches!(
            growth_exponent(&synthetic(|_| 1.0)[..2]),
            Err(Error::TooFewLevels(2))
        ));
    }

    #[test]
    fn logarithmic_growth_is_caught_by_the_fit() {
        let levels = synthetic(|h| 1.0 + 0.5 * (1.0 / h).ln());
        let g = growth_exponent(&levels).unwrap();
        assert!(g > BOUNDED_GROWTH && g < UNBOUNDED_GROWTH, "{g}");
        let (verdict, _, fit) = judge(&levels).unwrap();
        assert_eq!(verdict, Classification::Unbounded);
        assert!(fit.unwrap().r_squared > 0.999);
        let (flat, _, _) = judge(&synthetic(|h| 1.0 + 0.001 * h)).unwrap();
        assert_eq!(flat, Classification::Bounded);
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = SweepConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.beta_grid = vec![0.4];
        assert_ne!(a.hash(), b.hash());
        b = a.clone();
        b.time_limit = Some(Duration::from_secs(1));
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = SweepConfig {
            resolutions: vec![64, 128],
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::TooFewLevels(2))));
        c.resolutions = vec![64, 64, 128];
        assert!(c.validate().is_err());
        c.resolutions = vec![16, 32, 64];
        c.operator = Operator::Hilbert;
        c.dim = 2;
        assert!(matches!(c.validate(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn constant_maximal_ratio_is_about_one() {
        let d = Arc::new(Domain::uniform(1, 4.0, 128).unwrap());
        let fam = dyadic_family(&d, d.min_cell_size(), 2.0, FamilyMode::Full).unwrap();
        let f = SampledFunction::constant(&d, 1.0).unwrap();
        let params = MorreyParams::power(2.0, 0.0, 0.0, 1).unwrap();
        let r = operator_ratio(Operator::Maximal, &f, &params, &fam, NormKind::Strong).unwrap();
        assert!(r.ratio <= 1.0 + 1e-12 && r.ratio > 0.9, "{}", r.ratio);
    }

    #[test]
    fn zero_input_is_an_error() {
        let d = Arc::new(Domain::uniform(1, 4.0, 16).unwrap());
        let fam = dyadic_family(&d, 0.5, 8.0, FamilyMode::Full).unwrap();
        let params = MorreyParams::power(1.0, 0.5, 0.0, 1).unwrap();
        let z = SampledFunction::zeros(&d);
        assert!(matches!(
            operator_ratio(Operator::Maximal, &z, &params, &fam, NormKind::Weak),
            Err(Error::ZeroNorm)
        ));
    }
}
