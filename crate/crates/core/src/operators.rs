//! The centered Hardy–Littlewood maximal operator, the Hilbert transform of
//! piecewise-constant functions, and the `(Mh)^{1/s}` weight builder.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::{Ball, BallFamily, Point, SampledFunction, WeightedCells};
use crate::weights::{Weight, DEFAULT_FLOOR};

/// Largest ball average found at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaximalValue {
    pub value: f64,
    pub radius: f64,
}

/// `sup_r (1/|B(x,r)|) ∫_{B(x,r)} |f|` over `radii`, with `f` zero outside the box.
pub fn maximal_at(f: &SampledFunction, x: &Point, radii: &[f64]) -> Result<MaximalValue> {
    let domain = f.domain();
    let cells = WeightedCells::new(domain, &Weight::one());
    let mut best = MaximalValue {
        value: 0.0,
        radius: radii.first().copied().unwrap_or(0.0),
    };
    for &r in radii {
        let ball = Ball::new(*x, r)?;
        let mut total = 0.0;
        cells.visit(&ball, |k, m| total += f.value(k).abs() * m);
        let avg = total / ball.measure(domain.dim());
        if avg > best.value {
            best = MaximalValue {
                value: avg,
                radius: r,
            };
        }
    }
    Ok(best)
}

/// `Mf` at every cell midpoint, using the radii of `family`.
pub fn maximal(f: &SampledFunction, family: &BallFamily) -> Result<SampledFunction> {
    let domain = f.domain();
    if family.domain().as_ref() != domain.as_ref() {
        return Err(invalid("ball family lives on a different domain"));
    }
    let cells = WeightedCells::new(domain, &Weight::one());
    let radii = family.radii();
    let dim = domain.dim();
    let values: Vec<f64> = (0..domain.cell_count())
        .into_par_iter()
        .map(|k| {
            let x = domain.midpoint(k);
            radii
                .iter()
                .map(|&r| {
                    let ball = Ball {
                        center: x,
                        radius: r,
                    };
                    let mut total = 0.0;
                    cells.visit(&ball, |j, m| total += f.value(j).abs() * m);
                    total / ball.measure(dim)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    SampledFunction::new(domain.clone(), values)
}

/// Principal-value Hilbert transform of the piecewise-constant `f`, sampled at
/// cell midpoints. Each cell is integrated exactly against `1/(x - y)`; the
/// cell holding `x` contributes nothing.
pub fn hilbert(f: &SampledFunction) -> Result<SampledFunction> {
    let domain = f.domain();
    if domain.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "the Hilbert transform is one-dimensional, got dim {}",
            domain.dim()
        )));
    }
    let edges = domain.edges();
    let n = domain.cell_count();
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = domain.midpoint(i)[0];
            let mut left = (x - edges[0]).abs().ln();
            let mut total = 0.0;
            for j in 0..n {
                let right = (x - edges[j + 1]).abs().ln();
                let v = f.value(j);
                if j != i && v != 0.0 {
                    total += v * (left - right);
                }
                left = right;
            }
            total / PI
        })
        .collect();
    SampledFunction::new(domain.clone(), values)
}

/// Closed form of the Hilbert transform of the indicator of `(0, 1)`:
/// `log(|x| / |x - 1|) / π`.
pub fn hilbert_indicator_oracle(x: f64) -> Result<f64> {
    if x == 0.0 || x == 1.0 {
        return Err(Error::SingularPoint(format!(
            "H of the unit indicator is singular at x = {x}"
        )));
    }
    Ok((x.abs() / (x - 1.0).abs()).ln() / PI)
}

/// The sampled weight `(Mh)^{1/s}`, which lies in `A_1` for `s > 1`.
pub fn m_power_a1(h: &SampledFunction, s: f64, family: &BallFamily) -> Result<Weight> {
    if !(s > 1.0 && s.is_finite()) {
        return Err(invalid(format!("exponent s must exceed 1, got {s}")));
    }
    if h.values().iter().any(|&v| v < 0.0) {
        return Err(invalid("h must be nonnegative"));
    }
    if h.is_zero() {
        return Err(Error::DegenerateWeight("h vanishes identically".into()));
    }
    let mh = maximal(h, family)?;
    Weight::sampled(mh.map(|v| v.powf(1.0 / s))?, DEFAULT_FLOOR)
}
