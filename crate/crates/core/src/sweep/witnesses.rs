//! Test functions for the operator sweeps. Each one probes a specific way an
//! operator can fail to be bounded on a power-weighted Morrey space; the
//! fillers catch anything the targeted ones miss.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::grid::{Domain, Point, SampledFunction};

/// Regularisation of the dual-weight witness.
pub const SIGMA_EPSILON: f64 = 1e-6;

/// Smallest gap `dim - a` for a witness behaving like `|x|^{-a}` at the
/// origin. Closer to the integrability limit, the discretised ratio converges
/// like `h^{dim - a}`, which refinement over a few dyadic levels cannot tell
/// apart from logarithmic blow-up.
pub const SINGULAR_MARGIN: f64 = 0.25;

/// Number of random bump fillers in every suite.
pub const RANDOM_FILLERS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operator {
    Maximal,
    Hilbert,
}

impl Operator {
    pub fn name(self) -> &'static str {
        match self {
            Operator::Maximal => "M",
            Operator::Hilbert => "H",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteSelection {
    All,
    /// Only the functions aimed at a specific failure.
    Targeted,
    Fillers,
}

/// A witness function described independently of the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub id: String,
    /// The failure this function is built to expose.
    pub probe: &'static str,
    shape: Shape,
}

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    /// `(|x|^beta + eps)^{-1/(q-1)}` on the unit ball.
    Sigma { beta: f64, q: f64, eps: f64 },
    /// Indicator of a ball.
    Ball { center: Point, radius: f64 },
    /// `|x|^{-dim}` on the unit ball.
    InversePower,
    /// Sum of `height (1 - (|x-c|/r)^2)^2` bumps.
    Bumps(Vec<(Point, f64, f64)>),
}

fn norm(x: &Point) -> f64 {
    x[0].hypot(x[1])
}

impl Witness {
    fn eval(&self, x: &Point, dim: usize) -> f64 {
        match &self.shape {
            Shape::Sigma { beta, q, eps } => {
                let r = norm(x);
                if r < 1.0 {
                    (r.powf(*beta) + eps).powf(-1.0 / (q - 1.0))
                } else {
                    0.0
                }
            }
            Shape::Ball { center, radius } => {
                let d = (x[0] - center[0]).hypot(x[1] - center[1]);
                if d < *radius {
                    1.0
                } else {
                    0.0
                }
            }
            Shape::InversePower => {
                let r = norm(x);
                if r < 1.0 {
                    r.powi(-(dim as i32))
                } else {
                    0.0
                }
            }
            Shape::Bumps(bumps) => bumps
                .iter()
                .map(|(c, r, h)| {
                    let s = (x[0] - c[0]).hypot(x[1] - c[1]) / r;
                    if s < 1.0 {
                        h * (1.0 - s * s).powi(2)
                    } else {
                        0.0
                    }
                })
                .sum(),
        }
    }

    /// Midpoint samples on `domain`.
    pub fn sample(&self, domain: &Arc<Domain>) -> Result<SampledFunction> {
        let dim = domain.dim();
        SampledFunction::from_fn(domain, |x| self.eval(x, dim))
    }
}

/// Exponent `q` of the Muckenhoupt class whose failure the dual-weight
/// witness detects: `p + lambda/dim`.
pub fn sigma_class_exponent(p: f64, lambda: f64, dim: usize) -> f64 {
    p + lambda / dim as f64
}

fn ball(id: &str, probe: &'static str, center: Point, radius: f64) -> Witness {
    Witness {
        id: id.into(),
        probe,
        shape: Shape::Ball { center, radius },
    }
}

/// Witnesses for `op` on the Morrey space with exponents `(p, lambda)` and
/// weight `|x|^beta`. Functions outside that space in the continuum are left
/// out, since their discrete norms blow up under refinement on their own.
pub fn witness_suite(
    op: Operator,
    p: f64,
    lambda: f64,
    beta: f64,
    dim: usize,
    selection: SuiteSelection,
    seed: u64,
) -> Vec<Witness> {
    let n = dim as f64;
    let mut out = Vec::new();
    let targeted = selection != SuiteSelection::Fillers;
    let fillers = selection != SuiteSelection::Targeted;
    let east = |t: f64| [t, 0.0];
    if targeted {
        let q = sigma_class_exponent(p, lambda, dim);
        // Below the limit the dual weight is a legitimate element of the
        // space; above it, its local non-integrability is the point.
        let a = beta / (q - 1.0);
        if q > 1.0 && (a > n || a <= n - SINGULAR_MARGIN) {
            out.push(Witness {
                id: "sigma-eps".into(),
                probe: "dual weight blows up when w leaves A_{p+lambda/n}",
                shape: Shape::Sigma {
                    beta,
                    q,
                    eps: SIGMA_EPSILON,
                },
            });
        }
        out.push(ball(
            "ball-at-1",
            "Tf stays large near the origin, where the weight is too singular",
            east(1.0),
            0.5,
        ));
        if beta >= lambda + n * (p - 1.0) && beta > n * (p - 1.0) {
            out.push(Witness {
                id: "inv-power".into(),
                probe: "|x|^{-n} is in the space but not locally integrable",
                shape: Shape::InversePower,
            });
        }
        if beta >= lambda - n && beta > -n {
            out.push(ball(
                "indicator-unit",
                "logarithmic singularity of H at the origin",
                east(0.5),
                0.5,
            ));
        }
        if op == Operator::Hilbert {
            out.push(ball(
                "adjacent",
                "H of an interval is large on the neighbouring interval",
                east(1.5),
                0.5,
            ));
        }
    }
    if fillers {
        out.push(Witness {
            id: "bump-off".into(),
            probe: "generic smooth function away from the origin",
            shape: Shape::Bumps(vec![(east(2.0), 1.0, 1.0)]),
        });
        if beta + n >= lambda && beta > -n {
            out.push(Witness {
                id: "bump-origin".into(),
                probe: "generic smooth function at the origin",
                shape: Shape::Bumps(vec![([0.0, 0.0], 1.0, 1.0)]),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..RANDOM_FILLERS {
            let bumps = (0..3)
                .map(|_| {
                    let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    let mut c = [side * rng.gen_range(1.0..3.0), 0.0];
                    if dim == 2 {
                        c[1] = rng.gen_range(-1.0..1.0);
                    }
                    (c, rng.gen_range(0.2..0.8), rng.gen_range(0.5..2.0))
                })
                .collect();
            out.push(Witness {
                id: format!("random-{i}"),
                probe: "random bumps away from the origin",
                shape: Shape::Bumps(bumps),
            });
        }
    }
    out
}
