//! Grid geometry, sampled functions, balls and ball families, and the
//! weighted ball quadrature everything else is built on.
//!
//! Functions are piecewise constant on grid cells (one midpoint sample per
//! cell) and vanish outside the box `[-R, R]^dim`. Weights are analytic, so
//! the quadrature integrates the power factor of a weight in closed form on
//! every cell piece: exact antiderivatives in 1D, and an exact radial
//! integral against an angular midpoint rule in 2D. Integrals of `|x|^a`
//! stay finite for `-dim < a < 0` even though the integrand is singular.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::weights::{Factors, Weight};

pub type Point = [f64; 2];

/// Angular nodes per cell sector in the 2D quadrature.
pub const ANGULAR_NODES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Refinement {
    Uniform,
    /// The innermost uniform cell on each side of the origin is split into
    /// `depth` cells whose edges shrink geometrically by `ratio`, as long as
    /// no cell drops below `floor`.
    OriginLog {
        ratio: f64,
        depth: usize,
        floor: f64,
    },
}

impl Refinement {
    pub fn origin_log() -> Self {
        Refinement::OriginLog {
            ratio: 0.5,
            depth: 6,
            floor: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    dim: usize,
    half_width: f64,
    cells_per_axis: usize,
    refinement: Refinement,
    edges: Vec<f64>,
}

impl Domain {
    pub fn new(
        dim: usize,
        half_width: f64,
        cells_per_axis: usize,
        refinement: Refinement,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(invalid(format!("dim must be 1 or 2, got {dim}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(invalid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if cells_per_axis < 2 || !cells_per_axis.is_multiple_of(2) {
            return Err(invalid(format!(
                "cells per axis must be a positive even integer, got {cells_per_axis}"
            )));
        }
        let edges = axis_edges(half_width, cells_per_axis / 2, refinement)?;
        Ok(Domain {
            dim,
            half_width,
            cells_per_axis,
            refinement,
            edges,
        })
    }

    pub fn uniform(dim: usize, half_width: f64, cells_per_axis: usize) -> Result<Self> {
        Self::new(dim, half_width, cells_per_axis, Refinement::Uniform)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    pub fn refinement(&self) -> Refinement {
        self.refinement
    }

    /// Cell boundaries along one axis (shared by both axes in 2D).
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_axis.pow(self.dim as u32)
    }

    /// Axis indices `(ix, iy)` of a cell; `iy` is 0 in 1D.
    pub fn cell_axes(&self, k: usize) -> (usize, usize) {
        if self.dim == 1 {
            (k, 0)
        } else {
            (k % self.cells_per_axis, k / self.cells_per_axis)
        }
    }

    pub fn cell_from_axes(&self, ix: usize, iy: usize) -> usize {
        if self.dim == 1 {
            ix
        } else {
            iy * self.cells_per_axis + ix
        }
    }

    pub fn midpoint(&self, k: usize) -> Point {
        let (ix, iy) = self.cell_axes(k);
        let mx = 0.5 * (self.edges[ix] + self.edges[ix + 1]);
        if self.dim == 1 {
            [mx, 0.0]
        } else {
            [mx, 0.5 * (self.edges[iy] + self.edges[iy + 1])]
        }
    }

    pub fn midpoints(&self) -> Vec<Point> {
        (0..self.cell_count()).map(|k| self.midpoint(k)).collect()
    }

    /// `([x0, x1], [y0, y1])`; the y-interval is `[0, 0]` in 1D.
    pub fn cell_bounds(&self, k: usize) -> ([f64; 2], [f64; 2]) {
        let (ix, iy) = self.cell_axes(k);
        let bx = [self.edges[ix], self.edges[ix + 1]];
        if self.dim == 1 {
            (bx, [0.0, 0.0])
        } else {
            (bx, [self.edges[iy], self.edges[iy + 1]])
        }
    }

    pub fn cell_volume(&self, k: usize) -> f64 {
        let (bx, by) = self.cell_bounds(k);
        if self.dim == 1 {
            bx[1] - bx[0]
        } else {
            (bx[1] - bx[0]) * (by[1] - by[0])
        }
    }

    /// Smallest cell width along an axis.
    pub fn min_cell_size(&self) -> f64 {
        self.edges
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Index along one axis of the cell containing `x` (left-closed), if any.
    pub fn axis_cell(&self, x: f64) -> Option<usize> {
        if x < -self.half_width || x > self.half_width {
            return None;
        }
        let j = self.edges.partition_point(|&e| e <= x);
        Some(j.saturating_sub(1).min(self.cells_per_axis - 1))
    }

    pub fn locate(&self, p: &Point) -> Option<usize> {
        let ix = self.axis_cell(p[0])?;
        if self.dim == 1 {
            return Some(ix);
        }
        let iy = self.axis_cell(p[1])?;
        Some(self.cell_from_axes(ix, iy))
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..self.dim).all(|i| p[i].abs() <= self.half_width)
    }
}

fn axis_edges(half_width: f64, half: usize, refinement: Refinement) -> Result<Vec<f64>> {
    let mut positive = vec![0.0];
    match refinement {
        Refinement::Uniform => {
            let u = half_width / half as f64;
            positive.extend((1..half).map(|k| k as f64 * u));
        }
        Refinement::OriginLog {
            ratio,
            depth,
            floor,
        } => {
            if !(ratio > 0.0 && ratio < 1.0) {
                return Err(invalid(format!(
                    "origin-log ratio must be in (0,1), got {ratio}"
                )));
            }
            if !(floor > 0.0) {
                return Err(invalid("origin-log floor must be positive"));
            }
            let mut g = depth.clamp(1, half);
            let mut u = half_width / (half - g + 1) as f64;
            while g > 1 && u * ratio.powi(g as i32 - 1) < floor {
                g -= 1;
                u = half_width / (half - g + 1) as f64;
            }
            for i in (1..g).rev() {
                positive.push(u * ratio.powi(i as i32));
            }
            let uniform_cells = half - g + 1;
            positive.extend((1..uniform_cells).map(|k| k as f64 * u));
        }
    }
    positive.push(half_width);
    let mut edges: Vec<f64> = positive.iter().skip(1).rev().map(|&e| -e).collect();
    edges.extend_from_slice(&positive);
    if edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("cell boundaries are not strictly increasing"));
    }
    Ok(edges)
}

/// Midpoint samples of a real function on a [`Domain`], zero outside the box.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFunction {
    domain: Arc<Domain>,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(domain: Arc<Domain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.cell_count() {
            return Err(invalid(format!(
                "expected {} values, got {}",
                domain.cell_count(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite sample at cell {k}")));
        }
        Ok(SampledFunction { domain, values })
    }

    pub fn from_fn(domain: &Arc<Domain>, f: impl Fn(&Point) -> f64) -> Result<Self> {
        let values = (0..domain.cell_count())
            .map(|k| f(&domain.midpoint(k)))
            .collect();
        Self::new(domain.clone(), values)
    }

    pub fn constant(domain: &Arc<Domain>, c: f64) -> Result<Self> {
        Self::new(domain.clone(), vec![c; domain.cell_count()])
    }

    pub fn zeros(domain: &Arc<Domain>) -> Self {
        SampledFunction {
            domain: domain.clone(),
            values: vec![0.0; domain.cell_count()],
        }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// Piecewise-constant evaluation; zero outside the box.
    pub fn value_at(&self, p: &Point) -> f64 {
        self.domain.locate(p).map_or(0.0, |k| self.values[k])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.domain.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn abs(&self) -> Self {
        SampledFunction {
            domain: self.domain.clone(),
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &SampledFunction) -> Result<Self> {
        self.check_same_domain(other)?;
        Self::new(
            self.domain.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn mul(&self, other: &SampledFunction) -> Result<Self> {
        self.check_same_domain(other)?;
        Self::new(
            self.domain.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn check_same_domain(&self, other: &SampledFunction) -> Result<()> {
        if Arc::ptr_eq(&self.domain, &other.domain) || self.domain == other.domain {
            Ok(())
        } else {
            Err(invalid("sampled functions live on different domains"))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        if !(center[0].is_finite() && center[1].is_finite()) {
            return Err(invalid("ball center must be finite"));
        }
        Ok(Ball { center, radius })
    }

    pub fn origin(radius: f64) -> Result<Self> {
        Self::new([0.0, 0.0], radius)
    }

    /// Full Lebesgue measure of the ball in `dim` dimensions.
    pub fn measure(&self, dim: usize) -> f64 {
        if dim == 1 {
            2.0 * self.radius
        } else {
            PI * self.radius * self.radius
        }
    }

    pub fn center_norm(&self) -> f64 {
        self.center[0].hypot(self.center[1])
    }

    pub fn is_origin_centered(&self) -> bool {
        self.center == [0.0, 0.0]
    }

    pub fn contains_ball(&self, other: &Ball) -> bool {
        let d = (self.center[0] - other.center[0]).hypot(self.center[1] - other.center[1]);
        d + other.radius <= self.radius * (1.0 + 1e-12)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyMode {
    Full,
    /// Origin-centred balls plus balls `B(x, r)` with `r < |x| / 4`.
    Reduced,
}

#[derive(Clone, Debug)]
pub struct BallFamily {
    domain: Arc<Domain>,
    centers: Vec<Point>,
    radii: Vec<f64>,
    mode: FamilyMode,
    balls: Vec<Ball>,
}

impl BallFamily {
    pub fn from_parts(
        domain: &Arc<Domain>,
        centers: Vec<Point>,
        radii: Vec<f64>,
        mode: FamilyMode,
    ) -> Result<Self> {
        if radii.is_empty() || centers.is_empty() {
            return Err(invalid(
                "ball family needs at least one center and one radius",
            ));
        }
        let mut balls = Vec::with_capacity(centers.len() * radii.len());
        for c in &centers {
            for &r in &radii {
                let b = Ball::new(*c, r)?;
                if mode == FamilyMode::Full || b.is_origin_centered() || r < b.center_norm() / 4.0 {
                    balls.push(b);
                }
            }
        }
        Ok(BallFamily {
            domain: domain.clone(),
            centers,
            radii,
            mode,
            balls,
        })
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn mode(&self) -> FamilyMode {
        self.mode
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn with_mode(&self, mode: FamilyMode) -> Result<Self> {
        Self::from_parts(&self.domain, self.centers.clone(), self.radii.clone(), mode)
    }
}

/// Centers are every cell midpoint plus the origin; radii are
/// `r_min * 2^k` for `k = 0..=k_max`.
pub fn make_ball_family(
    domain: &Arc<Domain>,
    r_min: f64,
    k_max: usize,
    mode: FamilyMode,
) -> Result<BallFamily> {
    if !(r_min > 0.0 && r_min.is_finite()) {
        return Err(invalid(format!("r_min must be positive, got {r_min}")));
    }
    let radii: Vec<f64> = (0..=k_max).map(|k| r_min * 2f64.powi(k as i32)).collect();
    let r_max = radii[k_max];
    if r_max > 10.0 * domain.half_width() {
        log::warn!(
            "radius range exceeds domain: r_max = {r_max} > 10 R = {}",
            10.0 * domain.half_width()
        );
    }
    let mut centers = vec![[0.0, 0.0]];
    centers.extend(domain.midpoints());
    BallFamily::from_parts(domain, centers, radii, mode)
}

/// Dyadic family from `r_min` up to the first radius that reaches `r_max`.
pub fn dyadic_family(
    domain: &Arc<Domain>,
    r_min: f64,
    r_max: f64,
    mode: FamilyMode,
) -> Result<BallFamily> {
    if !(r_max >= r_min) {
        return Err(invalid("r_max must be at least r_min"));
    }
    let k = (r_max / r_min).log2().ceil().max(0.0) as usize;
    make_ball_family(domain, r_min, k, mode)
}

#[derive(Clone, Copy, Debug)]
pub enum Integrand<'a> {
    /// The constant one on the box.
    One,
    Func(&'a SampledFunction),
}

/// `∫_{B ∩ box} f w`.
pub fn integrate_ball(
    domain: &Arc<Domain>,
    f: Integrand<'_>,
    w: &Weight,
    ball: &Ball,
) -> Result<f64> {
    if let Integrand::Func(g) = f {
        if g.domain().as_ref() != domain.as_ref() {
            return Err(invalid("integrand lives on a different domain"));
        }
    }
    let cells = WeightedCells::new(domain, w);
    let v = cells.integral(f, ball);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(cells.non_integrable(ball))
    }
}

/// `|B ∩ box|`.
pub fn truncated_measure(domain: &Domain, ball: &Ball) -> f64 {
    let r = domain.half_width();
    let clip = |c: f64| ((c + ball.radius).min(r) - (c - ball.radius).max(-r)).max(0.0);
    if domain.dim() == 1 {
        return clip(ball.center[0]);
    }
    if ball.center[0].abs() + ball.radius <= r && ball.center[1].abs() + ball.radius <= r {
        return ball.measure(2);
    }
    rect_disc_area([-r, r], [-r, r], ball)
}

/// Exact area of `[x0, x1] x [y0, y1]` intersected with a disc.
pub fn rect_disc_area(bx: [f64; 2], by: [f64; 2], ball: &Ball) -> f64 {
    let r = ball.radius;
    let (cx, cy) = (ball.center[0], ball.center[1]);
    let x0 = (bx[0] - cx).max(-r);
    let x1 = (bx[1] - cx).min(r);
    let (y0, y1) = (by[0] - cy, by[1] - cy);
    if x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let half = |x: f64| (r * r - x * x).max(0.0).sqrt();
    // Antiderivative of the half chord.
    let g = |x: f64| 0.5 * (x * half(x) + r * r * (x / r).clamp(-1.0, 1.0).asin());
    let mut cuts = vec![x0, x1];
    for y in [y0, y1] {
        if y.abs() < r {
            let s = half(y);
            cuts.extend([-s, s]);
        }
    }
    cuts.retain(|&x| x >= x0 && x <= x1);
    cuts.sort_by(f64::total_cmp);
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let s = half(0.5 * (a + b));
        if s.min(y1) <= (-s).max(y0) {
            continue;
        }
        let upper = if s < y1 { g(b) - g(a) } else { y1 * (b - a) };
        let lower = if -s > y0 {
            -(g(b) - g(a))
        } else {
            y0 * (b - a)
        };
        area += upper - lower;
    }
    area
}

/// `∫_a^b |y - z|^alpha dy` in closed form; `+inf` when the singular point lies
/// in `[a, b]` and `alpha <= -1`.
pub fn power_interval_integral(a: f64, b: f64, z: f64, alpha: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if alpha == 0.0 {
        return b - a;
    }
    let (u, v) = (a - z, b - z);
    if u < 0.0 && v > 0.0 {
        if alpha <= -1.0 {
            return f64::INFINITY;
        }
        let e = alpha + 1.0;
        return ((-u).powf(e) + v.powf(e)) / e;
    }
    // Same side of z: integrate over [lo, hi] with 0 <= lo < hi.
    let (lo, hi) = if v <= 0.0 { (-v, -u) } else { (u, v) };
    if lo == 0.0 {
        if alpha <= -1.0 {
            return f64::INFINITY;
        }
        let e = alpha + 1.0;
        return hi.powf(e) / e;
    }
    let e = alpha + 1.0;
    let log_ratio = ((hi - lo) / lo).ln_1p();
    if e == 0.0 {
        log_ratio
    } else {
        lo.powf(e) * (e * log_ratio).exp_m1() / e
    }
}

/// Radial integral `∫_lo^hi t^(a-1) dt` with `a = alpha + 2`.
fn radial_integral(lo: f64, hi: f64, a: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo <= 0.0 {
        return if a <= 0.0 {
            f64::INFINITY
        } else {
            hi.powf(a) / a
        };
    }
    let log_ratio = ((hi - lo) / lo).ln_1p();
    if a == 0.0 {
        log_ratio
    } else {
        lo.powf(a) * (a * log_ratio).exp_m1() / a
    }
}

/// Per-cell weight masses for one weight on one domain.
pub(crate) struct WeightedCells<'a> {
    domain: &'a Domain,
    factors: Factors,
    full: Vec<f64>,
}

impl<'a> WeightedCells<'a> {
    pub(crate) fn new(domain: &'a Domain, w: &Weight) -> Self {
        let factors = w.factors();
        let mut cells = WeightedCells {
            domain,
            factors,
            full: Vec::new(),
        };
        cells.full = (0..domain.cell_count())
            .map(|k| cells.cell_piece(k, None))
            .collect();
        cells
    }

    pub(crate) fn full_mass(&self, k: usize) -> f64 {
        self.full[k]
    }

    pub(crate) fn non_integrable(&self, ball: &Ball) -> Error {
        let (alpha, c) = self
            .factors
            .powers
            .iter()
            .copied()
            .fold(
                (0.0, [0.0, 0.0]),
                |acc, pc| if pc.0 < acc.0 { pc } else { acc },
            );
        Error::NonIntegrable {
            exponent: alpha,
            cx: c[0],
            cy: c[1],
            radius: ball.radius,
        }
    }

    /// `∫_{B ∩ box} f w`, `+inf` when a cell with non-zero `f` has infinite mass.
    pub(crate) fn integral(&self, f: Integrand<'_>, ball: &Ball) -> f64 {
        let mut total = 0.0;
        self.visit(ball, |k, m| {
            let v = match f {
                Integrand::One => 1.0,
                Integrand::Func(g) => g.values[k],
            };
            if v != 0.0 {
                total += v * m;
            }
        });
        total
    }

    /// Calls `visit(cell, mass of cell ∩ ball)` for every cell meeting the ball,
    /// in increasing cell order.
    pub(crate) fn visit(&self, ball: &Ball, mut visit: impl FnMut(usize, f64)) {
        if self.domain.dim() == 1 {
            self.visit_1d(ball, &mut visit)
        } else {
            self.visit_2d(ball, &mut visit)
        }
    }

    fn visit_1d(&self, ball: &Ball, visit: &mut impl FnMut(usize, f64)) {
        let d = self.domain;
        let r = d.half_width();
        let a = (ball.center[0] - ball.radius).max(-r);
        let b = (ball.center[0] + ball.radius).min(r);
        if b <= a {
            return;
        }
        let edges = d.edges();
        let j0 = edges.partition_point(|&e| e <= a).saturating_sub(1);
        let j1 = (edges.partition_point(|&e| e < b).saturating_sub(1)).min(d.cells_per_axis() - 1);
        for j in j0..=j1 {
            let (lo, hi) = (edges[j].max(a), edges[j + 1].min(b));
            if hi <= lo {
                continue;
            }
            let m = if lo == edges[j] && hi == edges[j + 1] {
                self.full[j]
            } else {
                self.interval_piece(lo, hi)
            };
            visit(j, m);
        }
    }

    fn interval_piece(&self, lo: f64, hi: f64) -> f64 {
        let mid = 0.5 * (lo + hi);
        match self.dominant_power_1d(lo, hi) {
            Some(i) => {
                let (alpha, c) = self.factors.powers[i];
                power_interval_integral(lo, hi, c[0], alpha)
                    * self.factors.rest(&[mid, 0.0], Some(i))
            }
            None => (hi - lo) * self.factors.rest(&[mid, 0.0], None),
        }
    }

    fn dominant_power_1d(&self, lo: f64, hi: f64) -> Option<usize> {
        self.factors
            .powers
            .iter()
            .enumerate()
            .filter(|(_, (alpha, _))| *alpha != 0.0)
            .map(|(i, (_, c))| {
                let dist = if c[0] < lo {
                    lo - c[0]
                } else if c[0] > hi {
                    c[0] - hi
                } else {
                    0.0
                };
                (i, dist)
            })
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(i, _)| i)
    }

    fn dominant_power_2d(&self, bx: [f64; 2], by: [f64; 2]) -> Option<usize> {
        self.factors
            .powers
            .iter()
            .enumerate()
            .filter(|(_, (alpha, _))| *alpha != 0.0)
            .map(|(i, (_, c))| {
                let dx = (bx[0] - c[0]).max(c[0] - bx[1]).max(0.0);
                let dy = (by[0] - c[1]).max(c[1] - by[1]).max(0.0);
                (i, dx.hypot(dy))
            })
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(i, _)| i)
    }

    /// Mass of cell `k`, optionally clipped to a ball.
    fn cell_piece(&self, k: usize, clip: Option<&Ball>) -> f64 {
        let (bx, by) = self.domain.cell_bounds(k);
        if self.domain.dim() == 1 {
            let (lo, hi) = match clip {
                Some(b) => (
                    bx[0].max(b.center[0] - b.radius),
                    bx[1].min(b.center[0] + b.radius),
                ),
                None => (bx[0], bx[1]),
            };
            return self.interval_piece(lo, hi);
        }
        match self.dominant_power_2d(bx, by) {
            Some(i) => {
                let (alpha, z) = self.factors.powers[i];
                self.sector_integral(bx, by, z, alpha, Some(i), clip)
            }
            None => match clip {
                None => {
                    let mid = [0.5 * (bx[0] + bx[1]), 0.5 * (by[0] + by[1])];
                    (bx[1] - bx[0]) * (by[1] - by[0]) * self.factors.rest(&mid, None)
                }
                Some(b) => {
                    let mid = [0.5 * (bx[0] + bx[1]), 0.5 * (by[0] + by[1])];
                    rect_disc_area(bx, by, b) * self.factors.rest(&mid, None)
                }
            },
        }
    }

    /// Polar integral around `z` over the rectangle (and ball, if given):
    /// exact in the radius, midpoint rule in the angle.
    fn sector_integral(
        &self,
        bx: [f64; 2],
        by: [f64; 2],
        z: Point,
        alpha: f64,
        skip: Option<usize>,
        clip: Option<&Ball>,
    ) -> f64 {
        let inside = z[0] >= bx[0] && z[0] <= bx[1] && z[1] >= by[0] && z[1] <= by[1];
        let (theta0, span, n) = if inside {
            (0.0, 2.0 * PI, 4 * ANGULAR_NODES)
        } else {
            let phi = (0.5 * (by[0] + by[1]) - z[1]).atan2(0.5 * (bx[0] + bx[1]) - z[0]);
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &cx in &bx {
                for &cy in &by {
                    let mut d = (cy - z[1]).atan2(cx - z[0]) - phi;
                    while d > PI {
                        d -= 2.0 * PI;
                    }
                    while d <= -PI {
                        d += 2.0 * PI;
                    }
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
            }
            (phi + lo, hi - lo, ANGULAR_NODES)
        };
        let dtheta = span / n as f64;
        let a = alpha + 2.0;
        let mut total = 0.0;
        for i in 0..n {
            let theta = theta0 + (i as f64 + 0.5) * dtheta;
            let d = [theta.cos(), theta.sin()];
            let Some((mut lo, mut hi)) = ray_rect(z, d, bx, by) else {
                continue;
            };
            if let Some(b) = clip {
                let Some((t1, t2)) = ray_ball(z, d, b) else {
                    continue;
                };
                lo = lo.max(t1);
                hi = hi.min(t2);
            }
            lo = lo.max(0.0);
            if hi <= lo {
                continue;
            }
            let tm = 0.5 * (lo + hi);
            let p = [z[0] + tm * d[0], z[1] + tm * d[1]];
            total += dtheta * radial_integral(lo, hi, a) * self.factors.rest(&p, skip);
        }
        total
    }

    fn visit_2d(&self, ball: &Ball, visit: &mut impl FnMut(usize, f64)) {
        let d = self.domain;
        let centered = self
            .factors
            .powers
            .iter()
            .position(|(alpha, c)| *alpha != 0.0 && *c == ball.center);
        if centered.is_some() {
            return self.visit_rays(ball, centered, visit);
        }
        let r = d.half_width();
        let x0 = (ball.center[0] - ball.radius).max(-r);
        let x1 = (ball.center[0] + ball.radius).min(r);
        let y0 = (ball.center[1] - ball.radius).max(-r);
        let y1 = (ball.center[1] + ball.radius).min(r);
        if x1 <= x0 || y1 <= y0 {
            return;
        }
        let (Some(ix0), Some(ix1), Some(iy0), Some(iy1)) = (
            d.axis_cell(x0),
            d.axis_cell(x1),
            d.axis_cell(y0),
            d.axis_cell(y1),
        ) else {
            return;
        };
        let r2 = ball.radius * ball.radius;
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                let k = d.cell_from_axes(ix, iy);
                let (bx, by) = d.cell_bounds(k);
                let far2 = |lo: f64, hi: f64, c: f64| {
                    let m = (c - lo).abs().max((hi - c).abs());
                    m * m
                };
                let near2 = |lo: f64, hi: f64, c: f64| {
                    let m = (lo - c).max(c - hi).max(0.0);
                    m * m
                };
                if near2(bx[0], bx[1], ball.center[0]) + near2(by[0], by[1], ball.center[1]) >= r2 {
                    continue;
                }
                let m = if far2(bx[0], bx[1], ball.center[0]) + far2(by[0], by[1], ball.center[1])
                    <= r2
                {
                    self.full[k]
                } else {
                    self.cell_piece(k, Some(ball))
                };
                if m > 0.0 {
                    visit(k, m);
                }
            }
        }
    }

    /// Rays from the ball center (the singular point of `power`, if given);
    /// each ray is split at grid lines and integrated exactly in the radius.
    fn visit_rays(&self, ball: &Ball, power: Option<usize>, visit: &mut impl FnMut(usize, f64)) {
        let d = self.domain;
        let (alpha, z) = power.map_or((0.0, ball.center), |i| self.factors.powers[i]);
        let a = alpha + 2.0;
        let typical = 2.0 * d.half_width() / d.cells_per_axis() as f64;
        let per_circle = (2.0 * PI * ball.radius / typical).ceil().max(4.0) as usize;
        let n = (ANGULAR_NODES * per_circle).min(1 << 16);
        let n = n.div_ceil(4) * 4;
        let dtheta = 2.0 * PI / n as f64;
        let mut masses = vec![0.0; d.cell_count()];
        let mut touched = vec![false; d.cell_count()];
        let edges = d.edges();
        let mut ts: Vec<f64> = Vec::new();
        for i in 0..n {
            let theta = (i as f64 + 0.5) * dtheta;
            let dir = [theta.cos(), theta.sin()];
            let Some((_, t_exit)) = ray_rect(
                z,
                dir,
                [-d.half_width(), d.half_width()],
                [-d.half_width(), d.half_width()],
            ) else {
                continue;
            };
            let t_end = ball.radius.min(t_exit);
            if t_end <= 0.0 {
                continue;
            }
            ts.clear();
            ts.push(0.0);
            for axis in 0..2 {
                if dir[axis].abs() < 1e-300 {
                    continue;
                }
                let far = z[axis] + t_end * dir[axis];
                let (lo, hi) = if far < z[axis] {
                    (far, z[axis])
                } else {
                    (z[axis], far)
                };
                let s = edges.partition_point(|&e| e <= lo);
                let e_ = edges.partition_point(|&e| e < hi);
                for &e in &edges[s..e_] {
                    let t = (e - z[axis]) / dir[axis];
                    if t > 0.0 && t < t_end {
                        ts.push(t);
                    }
                }
            }
            ts.push(t_end);
            ts.sort_by(f64::total_cmp);
            for w in ts.windows(2) {
                let (t0, t1) = (w[0], w[1]);
                if t1 <= t0 {
                    continue;
                }
                let tm = 0.5 * (t0 + t1);
                let p = [z[0] + tm * dir[0], z[1] + tm * dir[1]];
                let Some(k) = d.locate(&p) else { continue };
                masses[k] += dtheta * radial_integral(t0, t1, a) * self.factors.rest(&p, power);
                touched[k] = true;
            }
        }
        for k in 0..d.cell_count() {
            if touched[k] {
                visit(k, masses[k]);
            }
        }
    }
}

/// Parameter interval where the ray `z + t d` (t real) lies in the rectangle.
fn ray_rect(z: Point, d: Point, bx: [f64; 2], by: [f64; 2]) -> Option<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (axis, b) in [bx, by].iter().enumerate() {
        if d[axis].abs() < 1e-300 {
            if z[axis] < b[0] || z[axis] > b[1] {
                return None;
            }
            continue;
        }
        let t1 = (b[0] - z[axis]) / d[axis];
        let t2 = (b[1] - z[axis]) / d[axis];
        lo = lo.max(t1.min(t2));
        hi = hi.min(t1.max(t2));
    }
    (hi > lo).then_some((lo, hi))
}

fn ray_ball(z: Point, d: Point, b: &Ball) -> Option<(f64, f64)> {
    let w = [z[0] - b.center[0], z[1] - b.center[1]];
    let half_b = d[0] * w[0] + d[1] * w[1];
    let c = w[0] * w[0] + w[1] * w[1] - b.radius * b.radius;
    let disc = half_b * half_b - c;
    if disc <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some((-half_b - s, -half_b + s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom1(n: usize) -> Arc<Domain> {
        Arc::new(Domain::uniform(1, 4.0, n).unwrap())
    }

    #[test]
    fn origin_is_an_edge_and_edges_increase() {
        for refinement in [Refinement::Uniform, Refinement::origin_log()] {
            let d = Domain::new(1, 3.0, 40, refinement).unwrap();
            assert!(d.edges().contains(&0.0));
            assert!(d.edges().windows(2).all(|w| w[1] > w[0]));
            assert_eq!(d.edges().len(), 41);
            assert_eq!(d.edges()[0], -3.0);
            assert_eq!(*d.edges().last().unwrap(), 3.0);
        }
    }

    #[test]
    fn origin_log_cells_shrink_geometrically() {
        let d = Domain::new(
            1,
            1.0,
            20,
            Refinement::OriginLog {
                ratio: 0.5,
                depth: 4,
                floor: 1e-12,
            },
        )
        .unwrap();
        let e = d.edges();
        let mid = e.iter().position(|&x| x == 0.0).unwrap();
        let u = 1.0 / 7.0;
        let expect = [0.0, u / 8.0, u / 4.0, u / 2.0, u, 2.0 * u];
        for (i, x) in expect.iter().enumerate() {
            assert!((e[mid + i] - x).abs() < 1e-15, "{} vs {}", e[mid + i], x);
        }
    }

    #[test]
    fn origin_log_respects_floor() {
        let d = Domain::new(
            1,
            1.0,
            20,
            Refinement::OriginLog {
                ratio: 0.5,
                depth: 30,
                floor: 1e-3,
            },
        )
        .unwrap();
        assert!(d.min_cell_size() >= 1e-3);
    }

    #[test]
    fn bad_domains_rejected() {
        assert!(Domain::uniform(3, 1.0, 4).is_err());
        assert!(Domain::uniform(1, 1.0, 5).is_err());
        assert!(Domain::uniform(1, -1.0, 4).is_err());
    }

    #[test]
    fn sampled_function_rejects_non_finite() {
        let d = dom1(4);
        assert!(SampledFunction::new(d.clone(), vec![1.0, f64::INFINITY, 0.0, 0.0]).is_err());
        assert!(SampledFunction::new(d, vec![1.0; 3]).is_err());
    }

    #[test]
    fn lebesgue_measure_of_unit_ball() {
        let d = dom1(64);
        let v = integrate_ball(
            &d,
            Integrand::One,
            &Weight::one(),
            &Ball::origin(1.0).unwrap(),
        )
        .unwrap();
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn power_one_weight_gives_r_squared() {
        // Oracle: fine Riemann sum of |x| over (-r, r).
        let d = dom1(64);
        let w = Weight::power(1.0);
        for r in [0.3, 1.0, 2.5] {
            let v = integrate_ball(&d, Integrand::One, &w, &Ball::origin(r).unwrap()).unwrap();
            let n = 200_000;
            let h = 2.0 * r / n as f64;
            let riemann: f64 = (0..n).map(|i| (-r + (i as f64 + 0.5) * h).abs() * h).sum();
            assert!((v - r * r).abs() < 1e-12);
            assert!((riemann - r * r).abs() < 1e-6);
        }
    }

    #[test]
    fn singular_power_weight_is_finite() {
        // Oracle: substitution y = t^2 removes the singularity of |y|^(-1/2).
        let d = dom1(64);
        let f = SampledFunction::from_fn(&d, |x| if x[0].abs() < 1.0 { 1.0 } else { 0.0 }).unwrap();
        let w = Weight::power(-0.5);
        let v = integrate_ball(&d, Integrand::Func(&f), &w, &Ball::origin(1.0).unwrap()).unwrap();
        let n = 100_000;
        let h = 1.0 / n as f64;
        let oracle: f64 = 2.0 * (0..n).map(|_| 2.0 * h).sum::<f64>();
        assert!((v - 4.0).abs() < 1e-13);
        assert!((oracle - 4.0).abs() < 1e-9);
    }

    #[test]
    fn non_integrable_weight_is_an_error() {
        let d = dom1(16);
        let w = Weight::power(-1.0);
        let err = integrate_ball(&d, Integrand::One, &w, &Ball::origin(1.0).unwrap());
        assert!(matches!(err, Err(Error::NonIntegrable { .. })));
        // Away from the singular point it is fine.
        let ok = integrate_ball(&d, Integrand::One, &w, &Ball::new([2.0, 0.0], 0.5).unwrap());
        assert!((ok.unwrap() - (2.5f64 / 1.5).ln()).abs() < 1e-14);
    }

    #[test]
    fn power_interval_matches_closed_form() {
        assert!(
            (power_interval_integral(-1.0, 2.0, 0.0, 0.5) - (1.0 + 2f64.powf(1.5)) / 1.5).abs()
                < 1e-14
        );
        assert!((power_interval_integral(1.0, 3.0, 0.0, -1.0) - 3f64.ln()).abs() < 1e-14);
        assert_eq!(power_interval_integral(0.0, 1.0, 0.0, -1.0), f64::INFINITY);
        let far = power_interval_integral(100.0, 100.001, 0.0, 2.0);
        assert!((far / (0.001 * 100.0005f64.powi(2)) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn family_counts_and_radii() {
        let d = dom1(4);
        let fam = make_ball_family(&d, 0.5, 0, FamilyMode::Full).unwrap();
        assert_eq!(fam.centers().len(), 5);
        assert_eq!(fam.len(), 5);
        let fam = make_ball_family(&d, 0.1, 3, FamilyMode::Full).unwrap();
        let want = [0.1, 0.2, 0.4, 0.8];
        for (r, w) in fam.radii().iter().zip(want) {
            assert!((r - w).abs() < 1e-15);
        }
    }

    #[test]
    fn reduced_family_filters() {
        let d = dom1(16);
        let fam = make_ball_family(&d, 0.05, 6, FamilyMode::Reduced).unwrap();
        for b in fam.balls() {
            assert!(b.is_origin_centered() || b.radius < b.center_norm() / 4.0);
        }
        let full = fam.with_mode(FamilyMode::Full).unwrap();
        let dropped = full
            .balls()
            .iter()
            .filter(|b| !b.is_origin_centered() && b.radius >= b.center_norm() / 4.0)
            .count();
        assert_eq!(full.len() - fam.len(), dropped);
    }

    #[test]
    fn exact_for_powers_on_origin_balls_2d() {
        let d = Arc::new(Domain::uniform(2, 2.0, 16).unwrap());
        for alpha in [-1.5, -0.5, 0.0, 0.7, 2.0] {
            let w = Weight::power(alpha);
            for r in [0.1, 0.77, 1.5] {
                let v = integrate_ball(&d, Integrand::One, &w, &Ball::origin(r).unwrap()).unwrap();
                let exact = 2.0 * PI * r.powf(alpha + 2.0) / (alpha + 2.0);
                assert!(
                    (v / exact - 1.0).abs() < 1e-12,
                    "alpha {alpha} r {r}: {v} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn area_of_off_center_disc_2d() {
        let d = Arc::new(Domain::uniform(2, 2.0, 32).unwrap());
        let b = Ball::new([0.3, -0.2], 0.9).unwrap();
        let v = integrate_ball(&d, Integrand::One, &Weight::one(), &b).unwrap();
        assert!((v / (PI * 0.81) - 1.0).abs() < 1e-4, "{v}");
        assert!((truncated_measure(&d, &b) / (PI * 0.81) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn off_center_power_integral_2d() {
        // Oracle: polar quadrature around the ball center on a fine grid.
        let d = Arc::new(Domain::uniform(2, 2.0, 32).unwrap());
        let w = Weight::power(-0.5);
        let b = Ball::new([0.4, 0.1], 0.6).unwrap();
        let v = integrate_ball(&d, Integrand::One, &w, &b).unwrap();
        let (nr, nt) = (1500, 1500);
        let mut oracle = 0.0;
        for i in 0..nr {
            let rho = (i as f64 + 0.5) * b.radius / nr as f64;
            for j in 0..nt {
                let t = (j as f64 + 0.5) * 2.0 * PI / nt as f64;
                let x = b.center[0] + rho * t.cos();
                let y = b.center[1] + rho * t.sin();
                oracle +=
                    x.hypot(y).powf(-0.5) * rho * (b.radius / nr as f64) * (2.0 * PI / nt as f64);
            }
        }
        assert!((v / oracle - 1.0).abs() < 2e-3, "{v} vs {oracle}");
    }

    #[test]
    fn truncated_integration_outside_box() {
        let d = dom1(8);
        let b = Ball::new([3.5, 0.0], 1.0).unwrap();
        let v = integrate_ball(&d, Integrand::One, &Weight::one(), &b).unwrap();
        assert!((v - 1.5).abs() < 1e-14);
        assert!((truncated_measure(&d, &b) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn rect_disc_area_closed_forms() {
        let unit = Ball::origin(1.0).unwrap();
        assert!((rect_disc_area([-2.0, 2.0], [-2.0, 2.0], &unit) - PI).abs() < 1e-14);
        assert!((rect_disc_area([0.0, 2.0], [0.0, 2.0], &unit) - PI / 4.0).abs() < 1e-14);
        assert!((rect_disc_area([-0.5, 0.5], [-0.5, 0.5], &unit) - 1.0).abs() < 1e-14);
        // Half-width strip |y| <= 1/2: 2 (sqrt(3)/4 + pi/6).
        let strip = 2.0 * (3f64.sqrt() / 4.0 + PI / 6.0);
        assert!((rect_disc_area([-3.0, 3.0], [-0.5, 0.5], &unit) - strip).abs() < 1e-13);
    }
}
