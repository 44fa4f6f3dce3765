//! Strong and weak weighted Morrey norms over ball families, and checks for
//! the elementary inequalities relating them to other norms.
//!
//! Every norm here is a supremum over a finite family, hence a lower bound
//! for the continuum norm.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::{Ball, BallFamily, Domain, SampledFunction, WeightedCells};
use crate::weights::{conjugate, Weight};

#[derive(Clone, Debug)]
pub struct MorreyParams {
    pub p: f64,
    pub lambda: f64,
    pub weight: Weight,
    pub dim: usize,
}

impl MorreyParams {
    pub fn new(p: f64, lambda: f64, weight: Weight, dim: usize) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(invalid(format!("p must be at least 1, got {p}")));
        }
        if dim != 1 && dim != 2 {
            return Err(invalid(format!("dim must be 1 or 2, got {dim}")));
        }
        if !(lambda >= 0.0 && lambda < dim as f64) {
            return Err(invalid(format!(
                "lambda must lie in [0, {dim}), got {lambda}"
            )));
        }
        Ok(MorreyParams {
            p,
            lambda,
            weight,
            dim,
        })
    }

    /// Power weight `|x|^beta`.
    pub fn power(p: f64, lambda: f64, beta: f64, dim: usize) -> Result<Self> {
        Self::new(p, lambda, Weight::power(beta), dim)
    }

    pub fn p_conj(&self) -> f64 {
        conjugate(self.p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormResult {
    /// `+inf` when some ball carries a non-integrable weight singularity
    /// under the support of `f`.
    pub value: f64,
    pub argmax_ball: Ball,
    /// Level at which the weak norm is attained; `None` for the strong norm.
    pub argmax_t: Option<f64>,
}

fn check_inputs(f: &SampledFunction, params: &MorreyParams, family: &BallFamily) -> Result<()> {
    if family.domain().as_ref() != f.domain().as_ref() {
        return Err(invalid("ball family lives on a different domain"));
    }
    if params.dim != f.domain().dim() {
        return Err(invalid("parameter dimension differs from the domain"));
    }
    if family.is_empty() {
        return Err(invalid("ball family is empty"));
    }
    Ok(())
}

/// Index and value of the maximum; ties go to the lowest index and NaN is
/// never produced by the callers.
fn argmax(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
}

/// `sup_B (r^{-lambda} ∫_B |f|^p w)^{1/p}` over the family.
pub fn morrey_norm(
    f: &SampledFunction,
    params: &MorreyParams,
    family: &BallFamily,
) -> Result<NormResult> {
    check_inputs(f, params, family)?;
    let scale = f.max_abs();
    let balls = family.balls();
    if scale == 0.0 {
        return Ok(NormResult {
            value: 0.0,
            argmax_ball: balls[0],
            argmax_t: None,
        });
    }
    let cells = WeightedCells::new(f.domain(), &params.weight);
    let powered: Vec<f64> = f
        .values()
        .iter()
        .map(|v| (v.abs() / scale).powf(params.p))
        .collect();
    let per_ball: Vec<f64> = balls
        .par_iter()
        .map(|b| {
            let mut total = 0.0;
            cells.visit(b, |k, m| {
                if powered[k] != 0.0 {
                    total += powered[k] * m;
                }
            });
            total / b.radius.powf(params.lambda)
        })
        .collect();
    let (i, best) = argmax(&per_ball);
    Ok(NormResult {
        value: scale * best.powf(1.0 / params.p),
        argmax_ball: balls[i],
        argmax_t: None,
    })
}

/// `sup_{B, t} (t^p w({|f| > t} ∩ B) / r^lambda)^{1/p}`. The supremum in `t`
/// is attained as `t` rises to one of the values of `|f|`.
pub fn weak_morrey_norm(
    f: &SampledFunction,
    params: &MorreyParams,
    family: &BallFamily,
) -> Result<NormResult> {
    check_inputs(f, params, family)?;
    let scale = f.max_abs();
    let balls = family.balls();
    if scale == 0.0 {
        return Ok(NormResult {
            value: 0.0,
            argmax_ball: balls[0],
            argmax_t: Some(0.0),
        });
    }
    let cells = WeightedCells::new(f.domain(), &params.weight);
    let levels: Vec<f64> = f.values().iter().map(|v| v.abs() / scale).collect();
    let per_ball: Vec<(f64, f64)> = balls
        .par_iter()
        .map(|b| {
            let mut pieces: Vec<(f64, f64)> = Vec::new();
            cells.visit(b, |k, m| {
                if levels[k] != 0.0 {
                    pieces.push((levels[k], m));
                }
            });
            pieces.sort_by(|x, y| y.0.total_cmp(&x.0));
            let mut best = (0.0, 0.0);
            let mut mass = 0.0;
            for (i, &(t, m)) in pieces.iter().enumerate() {
                mass += m;
                let group_ends = pieces.get(i + 1).is_none_or(|next| next.0 != t);
                if group_ends {
                    let v = t.powf(params.p) * mass;
                    if v > best.0 {
                        best = (v, t);
                    }
                }
            }
            (best.0 / b.radius.powf(params.lambda), best.1)
        })
        .collect();
    let values: Vec<f64> = per_ball.iter().map(|x| x.0).collect();
    let (i, best) = argmax(&values);
    Ok(NormResult {
        value: scale * best.powf(1.0 / params.p),
        argmax_ball: balls[i],
        argmax_t: Some(scale * per_ball[i].1),
    })
}

/// `∫ |f|^q w` over the whole box.
pub fn global_integral(f: &SampledFunction, q: f64, w: &Weight) -> f64 {
    let cells = WeightedCells::new(f.domain(), w);
    f.values()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(k, v)| v.abs().powf(q) * cells.full_mass(k))
        .sum()
}

/// Origin-centred radii `r 2^{-j}` down to well below the smallest cell.
fn shrinking_origin_radii(domain: &Domain, r: f64) -> Vec<f64> {
    let stop = 1e-6 * domain.min_cell_size();
    let mut radii = vec![r];
    while *radii.last().unwrap() > stop {
        let next = radii.last().unwrap() / 2.0;
        radii.push(next);
    }
    radii
}

/// Bound on the ratio returned by [`basic_inequality_check`]:
/// `max(1, 2^alpha) / (1 - 2^{-(lambda - alpha)})`.
pub fn basic_inequality_constant(alpha: f64, lambda: f64) -> Result<f64> {
    if !(alpha < lambda) {
        return Err(invalid(format!(
            "need alpha < lambda, got {alpha} >= {lambda}"
        )));
    }
    Ok(1f64.max(2f64.powf(alpha)) / (1.0 - 2f64.powf(-(lambda - alpha))))
}

/// `∫_{B(0,r)} |f|^p w_base / (r^{lambda - alpha} N^p)`, where `N` is the
/// Morrey norm for the weight `|x|^alpha w_base` taken over the balls
/// `B(0, r 2^{-j})`. Dyadic annuli show the ratio never exceeds
/// [`basic_inequality_constant`].
pub fn basic_inequality_check(
    f: &SampledFunction,
    p: f64,
    lambda: f64,
    alpha: f64,
    w_base: &Weight,
    r: f64,
) -> Result<f64> {
    basic_inequality_constant(alpha, lambda)?;
    let domain = f.domain();
    let weight = Weight::power(alpha).times(w_base.clone());
    let params = MorreyParams::new(p, lambda, weight, domain.dim())?;
    let family = BallFamily::from_parts(
        domain,
        vec![[0.0, 0.0]],
        shrinking_origin_radii(domain, r),
        crate::grid::FamilyMode::Full,
    )?;
    let norm = morrey_norm(f, &params, &family)?.value;
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let cells = WeightedCells::new(domain, w_base);
    let lhs = cells.integral(
        crate::grid::Integrand::Func(&f.abs().map(|v| v.powf(p))?),
        &Ball::origin(r)?,
    );
    Ok(lhs / (r.powf(lambda - alpha) * norm.powf(p)))
}

/// Ball-volume constant `|B_1|^{lambda / (p dim)}` of the Hölder embedding
/// `L^{p dim/(dim - lambda)}(w^{dim/(dim - lambda)})` into the Morrey space.
pub fn embedding_constant(dim: usize, lambda: f64, p: f64) -> f64 {
    let unit = Ball {
        center: [0.0, 0.0],
        radius: 1.0,
    };
    unit.measure(dim).powf(lambda / (p * dim as f64))
}

/// `(morrey_norm(f), ‖f‖_{L^q(w^{q/p})})` with `q = p dim / (dim - lambda)`.
pub fn embedding_check(
    f: &SampledFunction,
    params: &MorreyParams,
    family: &BallFamily,
) -> Result<(f64, f64)> {
    let n = params.dim as f64;
    let q = params.p * n / (n - params.lambda);
    let lhs = morrey_norm(f, params, family)?.value;
    let rhs = global_integral(f, q, &params.weight.powf(q / params.p)).powf(1.0 / q);
    Ok((lhs, rhs))
}

/// Exponent `beta` of the decay weight `(1+|x|)^{-beta}` used by
/// [`l1_weight_embedding_check`]: the Hölder-on-annuli threshold
/// `(lambda - alpha)/p + dim (1 - 1/p)` plus `0.01`.
pub fn l1_decay_exponent(p: f64, lambda: f64, alpha: f64, dim: usize) -> f64 {
    (lambda - alpha) / p + dim as f64 * (1.0 - 1.0 / p) + 0.01
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct L1Embedding {
    pub lhs: f64,
    pub rhs: f64,
    pub beta: f64,
}

/// `(‖f‖_{L^1((1+|x|)^{-beta})}, ‖f‖_{Morrey(p, lambda, |x|^alpha)})` with
/// `beta` from [`l1_decay_exponent`].
pub fn l1_weight_embedding_check(
    f: &SampledFunction,
    p: f64,
    lambda: f64,
    alpha: f64,
    family: &BallFamily,
) -> Result<L1Embedding> {
    if !(alpha < lambda) {
        return Err(invalid(format!(
            "need alpha < lambda, got {alpha} >= {lambda}"
        )));
    }
    let domain = f.domain();
    let beta = l1_decay_exponent(p, lambda, alpha, domain.dim());
    let params = MorreyParams::power(p, lambda, alpha, domain.dim())?;
    let rhs = morrey_norm(f, &params, family)?.value;
    let lhs = (0..domain.cell_count())
        .filter(|&k| f.value(k) != 0.0)
        .map(|k| f.value(k).abs() * decay_mass(domain, k, beta))
        .sum();
    Ok(L1Embedding { lhs, rhs, beta })
}

/// `∫_cell (1+|x|)^{-beta}`: exact in 1D (the origin is a cell edge),
/// midpoint rule in 2D.
fn decay_mass(domain: &Arc<Domain>, k: usize, beta: f64) -> f64 {
    let (bx, _) = domain.cell_bounds(k);
    if domain.dim() == 2 {
        let m = domain.midpoint(k);
        return domain.cell_volume(k) * (1.0 + m[0].hypot(m[1])).powf(-beta);
    }
    let (a, b) = if bx[0] >= 0.0 {
        (bx[0], bx[1])
    } else {
        (-bx[1], -bx[0])
    };
    let prim = |y: f64| {
        if beta == 1.0 {
            (1.0 + y).ln()
        } else {
            (1.0 + y).powf(1.0 - beta) / (1.0 - beta)
        }
    };
    prim(b) - prim(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{dyadic_family, FamilyMode};

    fn line(cells: usize) -> Arc<Domain> {
        Arc::new(Domain::uniform(1, 4.0, cells).unwrap())
    }

    fn family(d: &Arc<Domain>) -> BallFamily {
        dyadic_family(d, d.min_cell_size(), 2.0 * d.half_width(), FamilyMode::Full).unwrap()
    }

    fn indicator(d: &Arc<Domain>, a: f64, b: f64) -> SampledFunction {
        SampledFunction::from_fn(d, |x| if x[0] > a && x[0] < b { 1.0 } else { 0.0 }).unwrap()
    }

    #[test]
    fn unit_ball_indicator_with_power_weight() {
        let d = line(256);
        let fam = family(&d);
        for beta in [-0.3, 0.0, 1.0, 2.5] {
            let params = MorreyParams::power(1.0, 0.5, beta, 1).unwrap();
            let r = morrey_norm(&indicator(&d, -1.0, 1.0), &params, &fam).unwrap();
            // r^{-lambda} 2 min(r,1)^{beta+1}/(beta+1), brute-forced over r.
            let oracle = (1..=8000)
                .map(|i| {
                    let r = i as f64 * 1e-3;
                    r.powf(-0.5) * 2.0 * r.min(1.0).powf(beta + 1.0) / (beta + 1.0)
                })
                .fold(0.0, f64::max);
            assert!((r.value - 2.0 / (beta + 1.0)).abs() < 1e-12);
            assert!((oracle - r.value).abs() < 1e-9);
            assert_eq!(r.argmax_ball, Ball::origin(1.0).unwrap());
        }
    }

    #[test]
    fn two_level_weak_norm() {
        let d = line(64);
        let f = SampledFunction::from_fn(&d, |x| {
            if x[0] > 0.0 && x[0] < 1.0 {
                2.0
            } else if x[0] > 1.0 && x[0] < 3.0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let params = MorreyParams::new(1.0, 0.0, Weight::one(), 1).unwrap();
        let r = weak_morrey_norm(&f, &params, &family(&d)).unwrap();
        assert!((r.value - 3.0).abs() < 1e-14);
        assert_eq!(r.argmax_t, Some(1.0));
        let strong = morrey_norm(&f, &params, &family(&d)).unwrap();
        assert!((strong.value - 4.0).abs() < 1e-14);
    }

    #[test]
    fn zero_function_has_zero_norms() {
        let d = line(32);
        let params = MorreyParams::power(2.0, 0.5, 0.3, 1).unwrap();
        let z = SampledFunction::zeros(&d);
        assert_eq!(morrey_norm(&z, &params, &family(&d)).unwrap().value, 0.0);
        assert_eq!(
            weak_morrey_norm(&z, &params, &family(&d)).unwrap().value,
            0.0
        );
    }

    #[test]
    fn lambda_zero_is_weighted_lebesgue() {
        let d = line(512);
        let f = SampledFunction::from_fn(&d, |x| (x[0] * 1.3).cos() + 0.2).unwrap();
        let w = Weight::power(0.4);
        let params = MorreyParams::new(2.0, 0.0, w.clone(), 1).unwrap();
        let norm = morrey_norm(&f, &params, &family(&d)).unwrap().value;
        let global = global_integral(&f, 2.0, &w).sqrt();
        assert!((norm - global).abs() < 1e-10 * global);
    }

    #[test]
    fn inverse_power_norm_diverges_for_small_beta() {
        // |x|^{-1} on (-1,1), p = 1, lambda = 0.3: the weight |x|^{0.3} gives
        // r^{-0.3} ∫_{B(0,r)} |x|^{-0.7} = const, while |x|^{-0.3} leaves
        // ∫ |x|^{-1.3} near the origin, which grows under refinement.
        let mut finite = Vec::new();
        let mut growing = Vec::new();
        for cells in [256, 1024, 4096] {
            let d = Arc::new(Domain::new(1, 4.0, cells, crate::grid::Refinement::Uniform).unwrap());
            let f = SampledFunction::from_fn(&d, |x| {
                if x[0].abs() < 1.0 {
                    1.0 / x[0].abs()
                } else {
                    0.0
                }
            })
            .unwrap();
            let fam = family(&d);
            let ok = MorreyParams::power(1.0, 0.3, 0.3, 1).unwrap();
            let bad = MorreyParams::power(1.0, 0.3, -0.3, 1).unwrap();
            finite.push(morrey_norm(&f, &ok, &fam).unwrap().value);
            growing.push(morrey_norm(&f, &bad, &fam).unwrap().value);
        }
        assert!(growing[2] / growing[0] > 1.5, "{growing:?}");
        // Converges from below to the continuum value 2/0.3.
        assert!(finite.iter().all(|&v| v <= 2.0 / 0.3), "{finite:?}");
        assert!(finite[2] > 0.9 * 2.0 / 0.3, "{finite:?}");
    }

    #[test]
    fn basic_inequality_on_unit_indicator() {
        let d = line(256);
        let ratio = basic_inequality_check(
            &indicator(&d, -1.0, 1.0),
            1.0,
            0.5,
            0.0,
            &Weight::one(),
            1.0,
        )
        .unwrap();
        assert!(ratio <= 1.0 + 1e-12);
        let c = basic_inequality_constant(0.5, 0.8).unwrap();
        assert!((c - 2f64.sqrt() / (1.0 - 2f64.powf(-0.3))).abs() < 1e-12);
        assert!(basic_inequality_constant(0.8, 0.8).is_err());
    }

    #[test]
    fn basic_inequality_is_scale_stable() {
        let d = line(1024);
        let f = SampledFunction::from_fn(&d, |x| {
            if x[0].abs() < 2.0 {
                x[0].abs().powf(-0.2)
            } else {
                0.0
            }
        })
        .unwrap();
        let c = basic_inequality_constant(0.3, 0.6).unwrap();
        let ratios: Vec<f64> = [0.25, 0.5, 1.0, 2.0]
            .iter()
            .map(|&r| basic_inequality_check(&f, 1.0, 0.6, 0.3, &Weight::one(), r).unwrap())
            .collect();
        for w in ratios.windows(2) {
            assert!((w[1] / w[0] - 1.0).abs() < 0.05, "{ratios:?}");
        }
        assert!(ratios.iter().all(|&r| r <= c));
    }

    #[test]
    fn embedding_of_unit_indicator() {
        let d = line(256);
        let params = MorreyParams::new(1.0, 0.5, Weight::one(), 1).unwrap();
        let (lhs, rhs) = embedding_check(&indicator(&d, -1.0, 1.0), &params, &family(&d)).unwrap();
        assert!((lhs - 2.0).abs() < 1e-14);
        assert!((rhs - 2f64.sqrt()).abs() < 1e-14);
        assert!(lhs <= embedding_constant(1, 0.5, 1.0) * rhs * (1.0 + 1e-12));
        let (l0, r0) = embedding_check(&SampledFunction::zeros(&d), &params, &family(&d)).unwrap();
        assert_eq!((l0, r0), (0.0, 0.0));
    }

    #[test]
    fn l1_embedding_finite_for_indicator_and_extremal_profile() {
        let d = line(1024);
        let fam = family(&d);
        let e = l1_weight_embedding_check(&indicator(&d, -1.0, 1.0), 2.0, 0.5, 0.0, &fam).unwrap();
        assert!(e.lhs.is_finite() && e.rhs.is_finite() && e.rhs > 0.0);
        let (p, lambda, alpha) = (2.0, 0.5, -0.2);
        let profile = SampledFunction::from_fn(&d, |x| {
            let r = x[0].abs();
            r.powf((lambda - alpha - 1.0) / p) * (-(r / 3.0).powi(4)).exp()
        })
        .unwrap();
        let e = l1_weight_embedding_check(&profile, p, lambda, alpha, &fam).unwrap();
        assert!(e.lhs / e.rhs < 10.0, "{e:?}");
        let z =
            l1_weight_embedding_check(&SampledFunction::zeros(&d), p, lambda, alpha, &fam).unwrap();
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
    }

    #[test]
    fn decay_mass_is_exact_in_1d() {
        let d = line(8);
        let total: f64 = (0..8).map(|k| decay_mass(&d, k, 0.5)).sum();
        // 2 ∫_0^4 (1+y)^{-1/2} dy = 4 (sqrt 5 - 1).
        assert!((total - 4.0 * (5f64.sqrt() - 1.0)).abs() < 1e-13);
    }
}
