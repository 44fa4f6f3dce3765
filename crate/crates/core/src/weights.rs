//! Weight model and Muckenhoupt / reverse Hölder diagnostics.
//!
//! Every class constant here is a supremum over a finite [`BallFamily`], so
//! it is a lower bound for the true constant. Membership is read off from how
//! the estimate behaves as the family doubles (see [`classify_trace`]).

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::grid::{
    make_ball_family, truncated_measure, Ball, BallFamily, Domain, FamilyMode, Integrand, Point,
    Refinement, SampledFunction, WeightedCells,
};

pub const DEFAULT_FLOOR: f64 = 1e-12;

/// Per-doubling growth factor at or below which an estimate counts as stable.
pub const STABLE_FACTOR: f64 = 1.1;
/// Per-doubling growth factor at or above which an estimate counts as diverging.
pub const GROWTH_FACTOR: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub enum Weight {
    Constant(f64),
    /// `|x - center|^exponent`.
    Power {
        exponent: f64,
        center: Point,
    },
    Product(Vec<Weight>),
    /// `|x|^(lambda - dim)`.
    Endpoint {
        lambda: f64,
        dim: usize,
    },
    /// `u^(-lambda/dim) * base` with the A_1 power weight `u = |x|^u_exponent`.
    FactoredA1Power {
        u_exponent: f64,
        lambda: f64,
        dim: usize,
        base: Box<Weight>,
    },
    /// Piecewise-constant weight, clamped below by `floor` (also used outside the box).
    Sampled {
        values: SampledFunction,
        floor: f64,
    },
    Pow {
        base: Box<Weight>,
        exponent: f64,
    },
}

/// A weight flattened into `scale * Π |x - c_i|^a_i * Π max(s_j, floor_j)^e_j`.
#[derive(Clone, Debug)]
pub(crate) struct Factors {
    pub(crate) scale: f64,
    pub(crate) powers: Vec<(f64, Point)>,
    pub(crate) sampled: Vec<(SampledFunction, f64, f64)>,
}

impl Factors {
    /// Product of every factor except power `skip`.
    pub(crate) fn rest(&self, p: &Point, skip: Option<usize>) -> f64 {
        let mut v = self.scale;
        for (i, (a, c)) in self.powers.iter().enumerate() {
            if Some(i) != skip && *a != 0.0 {
                v *= (p[0] - c[0]).hypot(p[1] - c[1]).powf(*a);
            }
        }
        for (s, floor, e) in &self.sampled {
            v *= s.value_at(p).max(*floor).powf(*e);
        }
        v
    }

    fn pow(mut self, s: f64) -> Self {
        self.scale = self.scale.powf(s);
        for p in &mut self.powers {
            p.0 *= s;
        }
        for f in &mut self.sampled {
            f.2 *= s;
        }
        self
    }

    fn times(mut self, other: Factors) -> Self {
        self.scale *= other.scale;
        self.powers.extend(other.powers);
        self.sampled.extend(other.sampled);
        self
    }
}

impl Weight {
    pub fn one() -> Self {
        Weight::Constant(1.0)
    }

    /// `|x|^exponent`.
    pub fn power(exponent: f64) -> Self {
        Weight::Power {
            exponent,
            center: [0.0, 0.0],
        }
    }

    pub fn shifted_power(exponent: f64, center: Point) -> Self {
        Weight::Power { exponent, center }
    }

    pub fn endpoint(lambda: f64, dim: usize) -> Result<Self> {
        if !(0.0..dim as f64).contains(&lambda) {
            return Err(invalid(format!(
                "endpoint weight needs 0 <= lambda < {dim}"
            )));
        }
        Ok(Weight::Endpoint { lambda, dim })
    }

    pub fn factored(u_exponent: f64, lambda: f64, dim: usize, base: Weight) -> Result<Self> {
        let n = dim as f64;
        if !(u_exponent > -n && u_exponent <= 0.0) {
            return Err(invalid(format!(
                "u = |x|^{u_exponent} is not an A_1 power weight in dimension {dim}"
            )));
        }
        if !(0.0..n).contains(&lambda) {
            return Err(invalid("lambda must lie in [0, n)"));
        }
        Ok(Weight::FactoredA1Power {
            u_exponent,
            lambda,
            dim,
            base: Box::new(base),
        })
    }

    pub fn sampled(values: SampledFunction, floor: f64) -> Result<Self> {
        if !(floor > 0.0) {
            return Err(invalid("positivity floor must be positive"));
        }
        if values.values().iter().any(|&v| v < 0.0) {
            return Err(invalid("sampled weight has negative values"));
        }
        Ok(Weight::Sampled { values, floor })
    }

    pub fn scaled(self, c: f64) -> Self {
        Weight::Product(vec![Weight::Constant(c), self])
    }

    pub fn times(self, other: Weight) -> Self {
        Weight::Product(vec![self, other])
    }

    pub fn powf(&self, s: f64) -> Weight {
        match self {
            Weight::Constant(c) => Weight::Constant(c.powf(s)),
            Weight::Power { exponent, center } => Weight::Power {
                exponent: exponent * s,
                center: *center,
            },
            Weight::Product(ws) => Weight::Product(ws.iter().map(|w| w.powf(s)).collect()),
            Weight::Endpoint { lambda, dim } => Weight::power((lambda - *dim as f64) * s),
            Weight::FactoredA1Power {
                u_exponent,
                lambda,
                dim,
                base,
            } => Weight::Product(vec![
                Weight::power(-u_exponent * lambda / *dim as f64 * s),
                base.powf(s),
            ]),
            Weight::Pow { base, exponent } => Weight::Pow {
                base: base.clone(),
                exponent: exponent * s,
            },
            w @ Weight::Sampled { .. } => Weight::Pow {
                base: Box::new(w.clone()),
                exponent: s,
            },
        }
    }

    pub(crate) fn factors(&self) -> Factors {
        let unit = Factors {
            scale: 1.0,
            powers: Vec::new(),
            sampled: Vec::new(),
        };
        match self {
            Weight::Constant(c) => Factors { scale: *c, ..unit },
            Weight::Power { exponent, center } => Factors {
                powers: vec![(*exponent, *center)],
                ..unit
            },
            Weight::Product(ws) => ws.iter().fold(unit, |acc, w| acc.times(w.factors())),
            Weight::Endpoint { lambda, dim } => Factors {
                powers: vec![(lambda - *dim as f64, [0.0, 0.0])],
                ..unit
            },
            Weight::FactoredA1Power {
                u_exponent,
                lambda,
                dim,
                base,
            } => Factors {
                powers: vec![(-u_exponent * lambda / *dim as f64, [0.0, 0.0])],
                ..unit
            }
            .times(base.factors()),
            Weight::Sampled { values, floor } => Factors {
                sampled: vec![(values.clone(), *floor, 1.0)],
                ..unit
            },
            Weight::Pow { base, exponent } => base.factors().pow(*exponent),
        }
    }

    pub fn eval(&self, p: &Point) -> f64 {
        self.factors().rest(p, None)
    }

    /// Exponent of the strongest power singularity, if any power factor exists.
    pub fn min_power_exponent(&self) -> Option<f64> {
        self.factors()
            .powers
            .iter()
            .map(|p| p.0)
            .min_by(f64::total_cmp)
    }

    /// Every power factor has exponent `> -dim`.
    pub fn is_locally_integrable(&self, dim: usize) -> bool {
        self.factors().powers.iter().all(|p| p.0 > -(dim as f64))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightClassParams {
    pub p: f64,
    pub sigma: f64,
}

impl WeightClassParams {
    pub fn new(p: f64, sigma: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(invalid(format!("p must be >= 1, got {p}")));
        }
        if !(sigma > 1.0 && sigma.is_finite()) {
            return Err(invalid(format!("sigma must be > 1, got {sigma}")));
        }
        Ok(WeightClassParams { p, sigma })
    }

    pub fn p_conj(&self) -> f64 {
        conjugate(self.p)
    }

    pub fn sigma_conj(&self) -> f64 {
        conjugate(self.sigma)
    }
}

/// `p' = p / (p - 1)`, infinite at `p = 1`.
pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassEstimate {
    pub constant: f64,
    pub argmax_ball: Ball,
    pub family_size: usize,
    pub family_mode: FamilyMode,
}

/// Order-independent max over the family; ties go to the lowest ball index.
fn sup_over_family(
    family: &BallFamily,
    quotient: impl Fn(&Ball) -> Option<f64> + Sync,
) -> Result<ClassEstimate> {
    let best = family
        .balls()
        .par_iter()
        .enumerate()
        .filter_map(|(i, b)| quotient(b).map(|q| (q, i)))
        .reduce_with(|a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        });
    let (constant, i) = best.ok_or_else(|| invalid("no family ball meets the domain"))?;
    Ok(ClassEstimate {
        constant,
        argmax_ball: family.balls()[i],
        family_size: family.len(),
        family_mode: family.mode(),
    })
}

/// `sup_B (w(B)/|B|) (w^(1-p')(B)/|B|)^(p-1)` over the family.
pub fn ap_constant_estimate(w: &Weight, p: f64, family: &BallFamily) -> Result<ClassEstimate> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid(format!("A_p estimate needs p > 1, got {p}")));
    }
    let domain = family.domain();
    let cells = WeightedCells::new(domain, w);
    let dual = WeightedCells::new(domain, &w.powf(1.0 - conjugate(p)));
    sup_over_family(family, |b| {
        let m = truncated_measure(domain, b);
        if m <= 0.0 {
            return None;
        }
        let wb = cells.integral(Integrand::One, b);
        let sb = dual.integral(Integrand::One, b);
        Some((wb / m) * (sb / m).powf(p - 1.0))
    })
}

/// `sup_B (w(B)/|B|) / min_{midpoints in B} w`.
pub fn a1_constant_estimate(w: &Weight, family: &BallFamily) -> Result<ClassEstimate> {
    let domain = family.domain();
    let cells = WeightedCells::new(domain, w);
    let factors = w.factors();
    let mids = domain.midpoints();
    sup_over_family(family, |b| {
        let m = truncated_measure(domain, b);
        if m <= 0.0 {
            return None;
        }
        let avg = cells.integral(Integrand::One, b) / m;
        // Midpoints inside the ball; a ball that holds no midpoint falls back
        // to the midpoints of the cells it meets.
        let mut inf = f64::INFINITY;
        let mut met = f64::INFINITY;
        cells.visit(b, |k, _| {
            let x = mids[k];
            let v = factors.rest(&x, None);
            met = met.min(v);
            if (x[0] - b.center[0]).hypot(x[1] - b.center[1]) < b.radius {
                inf = inf.min(v);
            }
        });
        if inf == f64::INFINITY {
            inf = met;
        }
        Some(avg / inf)
    })
}

/// `sup_B (avg_B w^sigma)^(1/sigma) / avg_B w`.
pub fn rh_constant_estimate(w: &Weight, sigma: f64, family: &BallFamily) -> Result<ClassEstimate> {
    if !(sigma > 1.0 && sigma.is_finite()) {
        return Err(invalid(format!(
            "reverse Hölder exponent must be > 1, got {sigma}"
        )));
    }
    let domain = family.domain();
    let cells = WeightedCells::new(domain, w);
    let high = WeightedCells::new(domain, &w.powf(sigma));
    sup_over_family(family, |b| {
        let m = truncated_measure(domain, b);
        if m <= 0.0 {
            return None;
        }
        let avg = cells.integral(Integrand::One, b) / m;
        let avg_high = high.integral(Integrand::One, b) / m;
        Some(avg_high.powf(1.0 / sigma) / avg)
    })
}

/// Closed-form membership of `|x|^alpha` in `A_p(R^n)`.
pub fn power_ap_member(alpha: f64, p: f64, n: usize) -> bool {
    let n = n as f64;
    if p == 1.0 {
        alpha > -n && alpha <= 0.0
    } else {
        alpha > -n && alpha < n * (p - 1.0)
    }
}

/// Tests `w^sigma` against `A_(sigma(p-1)+1)`, which characterises `A_p ∩ RH_sigma`.
pub fn ap_rh_member_factored(
    w: &Weight,
    p: f64,
    sigma: f64,
    family: &BallFamily,
) -> Result<ClassEstimate> {
    let params = WeightClassParams::new(p, sigma)?;
    let q = params.sigma * (params.p - 1.0) + 1.0;
    let ws = w.powf(params.sigma);
    if q == 1.0 {
        a1_constant_estimate(&ws, family)
    } else {
        ap_constant_estimate(&ws, q, family)
    }
}

/// Sup over nested family pairs `E ⊂ B` of `(w(E)/w(B)) / (|E|/|B|)^(1/sigma')`.
pub fn rh_measure_ratio_sup(w: &Weight, sigma: f64, family: &BallFamily) -> Result<f64> {
    let domain = family.domain();
    let cells = WeightedCells::new(domain, w);
    let balls: Vec<(Ball, f64, f64)> = family
        .balls()
        .iter()
        .filter_map(|b| {
            let m = truncated_measure(domain, b);
            (m > 0.0).then(|| (*b, cells.integral(Integrand::One, b), m))
        })
        .collect();
    let exp = 1.0 / conjugate(sigma);
    let sup = balls
        .par_iter()
        .map(|(big, wb, mb)| {
            balls
                .iter()
                .filter(|(e, _, _)| big.contains_ball(e) && e != big)
                .map(|(_, we, me)| (we / wb) / (me / mb).powf(exp))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(sup)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Growing,
    Inconclusive,
}

/// Reads a sequence of estimates taken over successively doubled families.
pub fn classify_trace(values: &[f64]) -> Result<Stability> {
    if values.len() < 2 {
        return Err(invalid("a stability trace needs at least two families"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Ok(Stability::Growing);
    }
    let factors: Vec<f64> = values.windows(2).map(|w| w[1] / w[0]).collect();
    if factors.iter().all(|&f| f <= STABLE_FACTOR) {
        Ok(Stability::Stable)
    } else if factors.iter().all(|&f| f >= GROWTH_FACTOR) {
        Ok(Stability::Growing)
    } else {
        Ok(Stability::Inconclusive)
    }
}

/// Families that double both the center set (grid refinement) and the radius range.
#[derive(Clone, Debug)]
pub struct DoublingSchedule {
    pub dim: usize,
    pub half_width: f64,
    pub base_cells: usize,
    pub r_min: f64,
    pub base_k: usize,
    pub refinement: Refinement,
}

impl DoublingSchedule {
    pub fn families(&self, levels: usize) -> Result<Vec<BallFamily>> {
        (0..levels)
            .map(|i| {
                let domain = Arc::new(Domain::new(
                    self.dim,
                    self.half_width,
                    self.base_cells << i,
                    self.refinement,
                )?);
                make_ball_family(&domain, self.r_min, self.base_k + i, FamilyMode::Full)
            })
            .collect()
    }
}

pub fn estimate_trace(
    families: &[BallFamily],
    estimate: impl Fn(&BallFamily) -> Result<ClassEstimate>,
) -> Result<Vec<f64>> {
    families
        .iter()
        .map(|f| estimate(f).map(|e| e.constant))
        .collect()
}
