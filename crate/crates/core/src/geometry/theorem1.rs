//! Moving a point along one boundary normal and projecting it onto a second
//! boundary: the point construction, the step-size threshold for oblique
//! boundary pairs, and a sweep over trained one-hidden-layer networks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::{synth_2d, SynthKind};
use crate::error::{Error, Result};
use crate::geometry::probe::{
    discover_boundaries, distance_to_hyperplane, projection_on_piece, BoundaryProbe,
    DiscoveryConfig,
};
use crate::geometry::report::VerifierReport;
use crate::linalg::{axpy, dot, norm2};
use crate::nn::{init_network, train, Network, NetworkSpec, TrainConfig};

/// Cosines at or above this are treated as the same hyperplane.
pub const PARALLEL_COS: f64 = 1.0 - 1e-12;
/// Slack on the distance claims.
pub const DISTANCE_SLACK: f64 = 1e-9;

fn oriented_pair(x: &[f64], h1: &BoundaryProbe, h2: &BoundaryProbe) -> Result<(BoundaryProbe, BoundaryProbe, f64)> {
    for h in [h1, h2] {
        if h.normal.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: h.normal.len(),
                got: x.len(),
            });
        }
        if norm2(&h.normal) == 0.0 {
            return Err(Error::DegenerateBoundaries("zero boundary normal".into()));
        }
    }
    let a = h1.oriented_toward(x);
    let b = h2.oriented_toward(x);
    let cos = dot(&a.normal, &b.normal) / (norm2(&a.normal) * norm2(&b.normal));
    Ok((a, b, cos.clamp(-1.0, 1.0)))
}

/// Cosine of the angle between the two normals, each oriented so that `x`
/// lies on its non-negative side.
pub fn boundary_cosine(x: &[f64], h1: &BoundaryProbe, h2: &BoundaryProbe) -> Result<f64> {
    oriented_pair(x, h1, h2).map(|(_, _, c)| c)
}

/// Smallest step `η` along `n₁` past which the construction provably keeps
/// `d(x, H₁) ≤ d(y, H₁)` for non-orthogonal boundaries:
/// `‖x − p‖ / (1/cos θ − cos θ)`, with `p` the minimum-norm point of
/// `H₁ ∩ H₂` (the origin for boundaries through it).
///
/// Returns `+∞` when the boundaries coincide (`cos θ → 1`) and `0` when
/// `cos θ ≤ 0`, where every `η > 0` works.
pub fn lemma1_threshold(x: &[f64], h1: &BoundaryProbe, h2: &BoundaryProbe) -> f64 {
    let Ok((a, b, cos)) = oriented_pair(x, h1, h2) else {
        return f64::INFINITY;
    };
    if cos >= PARALLEL_COS {
        return f64::INFINITY;
    }
    if cos <= 0.0 {
        return 0.0;
    }
    let g11 = dot(&a.normal, &a.normal);
    let g12 = dot(&a.normal, &b.normal);
    let g22 = dot(&b.normal, &b.normal);
    let det = g11 * g22 - g12 * g12;
    let (r1, r2) = (-a.offset, -b.offset);
    let alpha1 = (g22 * r1 - g12 * r2) / det;
    let alpha2 = (g11 * r2 - g12 * r1) / det;
    let p = axpy(&a.normal.iter().map(|v| alpha1 * v).collect::<Vec<_>>(), alpha2, &b.normal);
    let dist: f64 = x.iter().zip(&p).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
    dist / (1.0 / cos - cos)
}

/// `y′ = x + η n₁/‖n₁‖`, then `y = y′ − (n₂ᵀy′ + o₂) n₂/‖n₂‖²`, the
/// orthogonal projection of `y′` onto `H₂`.
pub fn construct_theorem1_point(
    x: &[f64],
    h1: &BoundaryProbe,
    h2: &BoundaryProbe,
    eta: f64,
) -> Result<Vec<f64>> {
    construct_with_intermediate(x, h1, h2, eta).map(|(_, y)| y)
}

fn construct_with_intermediate(
    x: &[f64],
    h1: &BoundaryProbe,
    h2: &BoundaryProbe,
    eta: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
    }
    let (a, b, cos) = oriented_pair(x, h1, h2)?;
    if cos >= PARALLEL_COS {
        return Err(Error::DegenerateBoundaries("H1 = H2 (parallel normals)".into()));
    }
    let y_prime = axpy(x, eta / norm2(&a.normal), &a.normal);
    let y = b.project(&y_prime)?;
    Ok((y_prime, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRegime {
    Orthogonal,
    Oblique,
}

/// Distances before and after the construction and whether the three
/// claims hold: `y ∈ H₂`, `y` is closer to `H₂` than `x`, and `y` is no
/// closer to `H₁` than `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Check {
    pub eta: f64,
    pub d_x_h1: f64,
    pub d_y_h1: f64,
    pub d_x_h2: f64,
    pub d_y_h2: f64,
    pub y: Vec<f64>,
    pub holds: bool,
    pub margin: f64,
}

pub fn check_theorem1_pair(
    x: &[f64],
    h1: &BoundaryProbe,
    h2: &BoundaryProbe,
    eta: f64,
) -> Result<Theorem1Check> {
    let y = construct_theorem1_point(x, h1, h2, eta)?;
    Ok(evaluate(x, &y, h1, h2, eta))
}

fn evaluate(x: &[f64], y: &[f64], h1: &BoundaryProbe, h2: &BoundaryProbe, eta: f64) -> Theorem1Check {
    let d = |p: &[f64], h: &BoundaryProbe| distance_to_hyperplane(p, h).unwrap_or(f64::NAN);
    let (d_x_h1, d_y_h1, d_x_h2, d_y_h2) = (d(x, h1), d(y, h1), d(x, h2), d(y, h2));
    let margin = (DISTANCE_SLACK - d_y_h2)
        .min(d_x_h2 - d_y_h2)
        .min(d_y_h1 + DISTANCE_SLACK - d_x_h1);
    let holds = d_y_h2 <= DISTANCE_SLACK && d_y_h2 < d_x_h2 && d_x_h1 <= d_y_h1 + DISTANCE_SLACK;
    Theorem1Check {
        eta,
        d_x_h1,
        d_y_h1,
        d_x_h2,
        d_y_h2,
        y: y.to_vec(),
        holds,
        margin,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Theorem1SweepConfig {
    pub nets: usize,
    pub hidden: usize,
    pub data_n: usize,
    pub noise: f64,
    pub train: TrainConfig,
    /// Probe points per network, taken from the start of the dataset.
    pub points_per_net: usize,
    pub discovery: DiscoveryConfig,
    /// `|cos θ|` at or below this counts as orthogonal.
    pub orthogonal_tol: f64,
    /// Step used for orthogonal pairs and for pairs with `cos θ ≤ 0`.
    pub small_eta: f64,
    /// Oblique pairs use `eta_factor × threshold`.
    pub eta_factor: f64,
    pub seed: u64,
}

impl Default for Theorem1SweepConfig {
    fn default() -> Self {
        Self {
            nets: 50,
            hidden: 16,
            data_n: 200,
            noise: 0.35,
            train: TrainConfig {
                epochs: 30,
                optimizer: crate::nn::AdamConfig {
                    learning_rate: 0.01,
                    ..Default::default()
                },
                ..Default::default()
            },
            points_per_net: 20,
            discovery: DiscoveryConfig::default(),
            orthogonal_tol: 1e-6,
            small_eta: 1e-3,
            eta_factor: 1.1,
            seed: 0,
        }
    }
}

impl Theorem1SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nets == 0 || self.points_per_net == 0 || self.discovery.directions == 0 {
            return Err(Error::Config(
                "theorem1 sweep needs nets, points_per_net and directions >= 1".into(),
            ));
        }
        if !(self.small_eta > 0.0) || !(self.eta_factor > 1.0) || !(self.orthogonal_tol >= 0.0) {
            return Err(Error::Config(
                "theorem1 sweep needs small_eta > 0, eta_factor > 1, orthogonal_tol >= 0".into(),
            ));
        }
        if self.data_n < 4 || self.hidden == 0 {
            return Err(Error::Config("theorem1 sweep needs data_n >= 4 and hidden >= 1".into()));
        }
        Ok(())
    }
}

/// Checks every admissible boundary pair discovered around `x` on `net`.
///
/// A pair is admissible when both projections of `x` land on their pieces
/// and the intermediate point `y′` keeps `x`'s class. Orthogonal pairs go
/// into `orthogonal`, the rest into `oblique`; skipped pairs and discovery
/// counts are kept in the `oblique` details, and each report counts how
/// often `y` also falls inside `H₂`'s own activation region.
pub fn verify_theorem1_at(
    net: &Network,
    x: &[f64],
    config: &Theorem1SweepConfig,
    discovery_seed: u64,
) -> Result<(VerifierReport, VerifierReport)> {
    let mut orthogonal = VerifierReport::new("theorem1_orthogonal");
    let mut oblique = VerifierReport::new("theorem1_oblique");
    let probes = discover_boundaries(net, x, &config.discovery, discovery_seed)?;
    oblique.bump("probes_found", probes.len() as u64);
    let on_piece: Vec<BoundaryProbe> = probes
        .into_iter()
        .filter(|p| projection_on_piece(net, x, p))
        .collect();
    oblique.bump("probes_on_piece", on_piece.len() as u64);
    let base_class = net.predict(x);
    for (i, h1) in on_piece.iter().enumerate() {
        for (j, h2) in on_piece.iter().enumerate() {
            if i == j {
                continue;
            }
            let cos = boundary_cosine(x, h1, h2)?;
            if cos >= PARALLEL_COS {
                oblique.bump("degenerate_pairs", 1);
                continue;
            }
            let (regime, eta) = if cos.abs() <= config.orthogonal_tol {
                (PairRegime::Orthogonal, config.small_eta)
            } else {
                let threshold = lemma1_threshold(x, h1, h2);
                let eta = if threshold > 0.0 {
                    config.eta_factor * threshold
                } else {
                    config.small_eta
                };
                (PairRegime::Oblique, eta)
            };
            if distance_to_hyperplane(x, h2)? <= DISTANCE_SLACK {
                oblique.bump("rejected_pairs", 1);
                continue;
            }
            let (y_prime, y) = construct_with_intermediate(x, h1, h2, eta)?;
            if net.predict(&y_prime) != base_class {
                oblique.bump("rejected_pairs", 1);
                continue;
            }
            let check = evaluate(x, &y, h1, h2, eta);
            let target = match regime {
                PairRegime::Orthogonal => &mut orthogonal,
                PairRegime::Oblique => &mut oblique,
            };
            if net.activation_pattern(&y) == h2.pattern {
                target.bump("y_inside_h2_region", 1);
            }
            target.record(check.holds, check.margin, || {
                json!({ "x": x, "cos": cos, "h1": h1, "h2": h2, "check": check })
            });
        }
    }
    Ok((orthogonal, oblique))
}

/// Trains `nets` one-hidden-layer networks on synthetic blobs and checks all
/// admissible boundary pairs around the first `points_per_net` data points.
pub fn verify_theorem1_sweep(config: &Theorem1SweepConfig) -> Result<(VerifierReport, VerifierReport)> {
    config.validate()?;
    let spec = NetworkSpec::new(vec![2, config.hidden, 1])?;
    let per_net: Vec<Result<(VerifierReport, VerifierReport)>> = (0..config.nets)
        .into_par_iter()
        .map(|k| {
            let net_seed = config.seed.wrapping_add(k as u64);
            let data = synth_2d(SynthKind::Blobs, config.data_n, config.noise, net_seed)?;
            let train_cfg = TrainConfig {
                seed: net_seed,
                ..config.train.clone()
            };
            let (net, _) = train(&init_network(&spec, net_seed), &data, &train_cfg)?;
            let mut orth = VerifierReport::new("theorem1_orthogonal");
            let mut obl = VerifierReport::new("theorem1_oblique");
            for (p, x) in data.features().iter().take(config.points_per_net).enumerate() {
                let seed = net_seed.wrapping_mul(1_000_003).wrapping_add(p as u64);
                let (a, b) = verify_theorem1_at(&net, x, config, seed)?;
                orth.merge(a);
                obl.merge(b);
            }
            Ok((orth, obl))
        })
        .collect();
    let mut orthogonal = VerifierReport::new("theorem1_orthogonal");
    let mut oblique = VerifierReport::new("theorem1_oblique");
    for r in per_net {
        let (a, b) = r?;
        orthogonal.merge(a);
        oblique.merge(b);
    }
    Ok((orthogonal, oblique))
}
