//! Brute-force checks of the two-letter reduction on small channels.
//!
//! These routines never call the binary solver's search internals: they
//! sample general input pairs from the flat measure on the simplex, evaluate
//! divergences directly, and compare against a reference value.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binary::{BinaryProblem, Subchannel};
use crate::contraction::{eta_f, EnvelopeCurve};
use crate::divergence::{df, DivergenceKind};
use crate::model::{validate_pair, Channel};
use crate::numeric::linspace;
use crate::rng::{flat_simplex, stream_rng};
use crate::{Error, Result};

/// Samples handled by one random stream; fixed so that results do not
/// depend on the thread count.
const CHUNK: usize = 1024;

/// Attempts per sample before giving up on the finiteness filter.
const MAX_REJECTIONS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub samples: usize,
    pub max_ratio_found: f64,
    pub achieving_pair: Option<(Vec<f64>, Vec<f64>)>,
    pub reference_eta: f64,
    pub violations: usize,
    pub slack: f64,
    pub seed: u64,
    /// Draws discarded by the finiteness filter and redrawn.
    pub rejections: usize,
    /// Samples outside the envelope window (envelope checks only).
    pub discarded: usize,
    /// Largest `value − bound` over all samples.
    pub max_excess: f64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// `D_f(W∘P ‖ W∘Q) / D_f(P‖Q)` for a general admissible pair.
pub fn sample_ratio(channel: &Channel, kind: DivergenceKind, p: &[f64], q: &[f64]) -> Result<f64> {
    let (d_out, d_in) = divergence_pair(channel, kind, p, q)?;
    Ok(d_out / d_in)
}

/// `(D_out, D_in)` for an admissible pair.
fn divergence_pair(channel: &Channel, kind: DivergenceKind, p: &[f64], q: &[f64]) -> Result<(f64, f64)> {
    if !validate_pair(p, q, channel, kind)? {
        return Err(Error::InvalidPair("P = Q or D_f(P‖Q) is infinite".into()));
    }
    let d_in = df(kind, p, q)?;
    if !(d_in > 0.0) {
        return Err(Error::InvalidPair(format!("input divergence {d_in}")));
    }
    Ok((output_divergence(channel, kind, p, q)?, d_in))
}

fn output_divergence(channel: &Channel, kind: DivergenceKind, p: &[f64], q: &[f64]) -> Result<f64> {
    let b = channel.push_forward(q)?;
    let diff = channel.push_forward_difference(p, q);
    Ok(kind.sum_terms(b.iter().zip(&diff).map(|(&b, &d)| ((b + d).max(0.0), b, d))))
}

/// `L_λ(P, Q) = D_f(W∘P ‖ W∘Q) − λ·D_f(P‖Q)`.
pub fn lagrangian_gap(channel: &Channel, kind: DivergenceKind, p: &[f64], q: &[f64], lambda: f64) -> Result<f64> {
    let d_in = df(kind, p, q)?;
    if d_in.is_infinite() {
        return Err(Error::InvalidPair("infinite input divergence".into()));
    }
    if p.len() != channel.input_size() {
        return Err(Error::DimensionMismatch(p.len(), channel.input_size()));
    }
    Ok(output_divergence(channel, kind, p, q)? - lambda * d_in)
}

struct ChunkSummary {
    max: f64,
    argmax: Option<(Vec<f64>, Vec<f64>)>,
    violations: usize,
    rejections: usize,
    discarded: usize,
    max_excess: f64,
}

/// Draws admissible pairs and reduces per-sample `(value, bound, ratio)`
/// triples over them. `score` returns `None` for samples to discard.
fn sample_pairs<F>(channel: &Channel, kind: DivergenceKind, samples: usize, seed: u64, slack: f64, score: F) -> ChunkSummary
where
    F: Fn(&[f64], &[f64]) -> Option<(f64, f64, f64)> + Sync,
{
    let n = channel.input_size();
    let chunks = samples.div_ceil(CHUNK);
    let summaries: Vec<ChunkSummary> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let mut s = ChunkSummary {
                max: 0.0,
                argmax: None,
                violations: 0,
                rejections: 0,
                discarded: 0,
                max_excess: f64::NEG_INFINITY,
            };
            let count = CHUNK.min(samples - c * CHUNK);
            for _ in 0..count {
                let mut attempts = 0;
                let (p, q) = loop {
                    let p = flat_simplex(&mut rng, n);
                    let q = flat_simplex(&mut rng, n);
                    if validate_pair(&p, &q, channel, kind).unwrap_or(false) || attempts >= MAX_REJECTIONS {
                        break (p, q);
                    }
                    attempts += 1;
                    s.rejections += 1;
                };
                match score(&p, &q) {
                    Some((value, bound, ratio)) => {
                        if value > bound + slack {
                            s.violations += 1;
                        }
                        s.max_excess = s.max_excess.max(value - bound);
                        if ratio > s.max || s.argmax.is_none() {
                            s.max = ratio;
                            s.argmax = Some((p, q));
                        }
                    }
                    None => s.discarded += 1,
                }
            }
            s
        })
        .collect();

    let mut total = ChunkSummary {
        max: 0.0,
        argmax: None,
        violations: 0,
        rejections: 0,
        discarded: 0,
        max_excess: f64::NEG_INFINITY,
    };
    for s in summaries {
        total.violations += s.violations;
        total.rejections += s.rejections;
        total.discarded += s.discarded;
        total.max_excess = total.max_excess.max(s.max_excess);
        if s.argmax.is_some() && (total.argmax.is_none() || s.max > total.max) {
            total.max = s.max;
            total.argmax = s.argmax;
        }
    }
    total
}

/// Samples general input pairs and counts ratios above `eta_f + slack`.
pub fn verify_reduction(channel: &Channel, kind: DivergenceKind, samples: usize, seed: u64, slack: f64) -> Result<OracleReport> {
    let reference = eta_f(channel, kind, 1e-6)?.eta;
    Ok(verify_against(channel, kind, reference, samples, seed, slack))
}

/// [`verify_reduction`] against a precomputed reference coefficient.
pub fn verify_against(
    channel: &Channel,
    kind: DivergenceKind,
    reference_eta: f64,
    samples: usize,
    seed: u64,
    slack: f64,
) -> OracleReport {
    let s = sample_pairs(channel, kind, samples, seed, slack, |p, q| {
        sample_ratio(channel, kind, p, q).ok().map(|r| (r, reference_eta, r))
    });
    OracleReport {
        samples,
        max_ratio_found: s.max,
        achieving_pair: s.argmax,
        reference_eta,
        violations: s.violations,
        slack,
        seed,
        rejections: s.rejections,
        discarded: s.discarded,
        max_excess: s.max_excess,
    }
}

/// Samples general pairs and counts points above the envelope by more than
/// `slack`. Points beyond the curve's extent are discarded.
pub fn envelope_dominates(
    channel: &Channel,
    kind: DivergenceKind,
    curve: &EnvelopeCurve,
    samples: usize,
    seed: u64,
    slack: f64,
) -> OracleReport {
    let s = sample_pairs(channel, kind, samples, seed, slack, |p, q| {
        let (d_out, d_in) = divergence_pair(channel, kind, p, q).ok()?;
        curve.eval(d_in).map(|bound| (d_out, bound, d_out / d_in))
    });
    OracleReport {
        samples,
        max_ratio_found: s.max,
        achieving_pair: s.argmax,
        reference_eta: curve.max_chord_slope(),
        violations: s.violations,
        slack,
        seed,
        rejections: s.rejections,
        discarded: s.discarded,
        max_excess: s.max_excess,
    }
}

/// Outcome of [`binary_dominates`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domination {
    pub found: bool,
    /// Support `(x, x')` of the dominating pair; `x == x'` for a point mass.
    pub pair: (usize, usize),
    /// Mass of `P̂` and `Q̂` on `x`.
    pub p: f64,
    pub q: f64,
    pub gap: f64,
    pub reference_gap: f64,
}

impl Domination {
    fn offer(&mut self, pair: (usize, usize), p: f64, q: f64, gap: f64) {
        if gap > self.gap {
            self.gap = gap;
            self.pair = pair;
            self.p = p;
            self.q = q;
        }
    }
}

/// Searches for a pair `(P̂, Q̂)` supported on two letters with
/// `L_λ(P̂, Q̂) ≥ L_λ(P, Q) − tol`.
///
/// With `r = P/Q`, the set `S = {Q̂ : supp Q̂ ⊆ supp Q, Σ r·Q̂ = 1}` contains
/// `Q`, and `Q̂ ↦ L_λ(r·Q̂, Q̂)` is convex on it, so its maximum sits at a
/// vertex of `S`. Vertices are point masses on letters with `r = 1` and
/// two-letter distributions straddling `r = 1`; they are enumerated exactly,
/// then refined with a weight grid. When `P` has mass outside `supp Q`
/// (possible for TV and H²) the coupling is undefined and unconstrained
/// two-letter pairs are searched instead.
pub fn binary_dominates(
    channel: &Channel,
    kind: DivergenceKind,
    p: &[f64],
    q: &[f64],
    lambda: f64,
    tol: f64,
) -> Result<Domination> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let reference_gap = lagrangian_gap(channel, kind, p, q, lambda)?;
    let n = channel.input_size();
    let mut best = Domination {
        found: false,
        pair: (0, 0),
        p: 0.0,
        q: 0.0,
        gap: f64::NEG_INFINITY,
        reference_gap,
    };
    let gap_on = |x: usize, x2: usize, pp: f64, qq: f64| -> Result<f64> {
        let problem = BinaryProblem::new(channel.row(x), channel.row(x2), kind)?;
        let (d_out, d_in) = Subchannel::new(&problem).point(pp, qq);
        Ok(if d_in == 0.0 { d_out } else { d_out - lambda * d_in })
    };

    let coupled = p.iter().zip(q).all(|(&a, &b)| b > 0.0 || a == 0.0);
    if coupled {
        let support: Vec<usize> = (0..n).filter(|&x| q[x] > 0.0).collect();
        let r: Vec<f64> = (0..n).map(|x| if q[x] > 0.0 { p[x] / q[x] } else { 0.0 }).collect();
        for &x in &support {
            if (r[x] - 1.0).abs() <= 1e-12 {
                best.offer((x, x), 1.0, 1.0, 0.0);
            }
        }
        for (i, &x) in support.iter().enumerate() {
            for &x2 in &support[i + 1..] {
                let (hi, lo) = (r[x] - 1.0, r[x2] - 1.0);
                if hi * lo >= 0.0 {
                    continue;
                }
                // Q̂ = (w, 1 − w) on (x, x'), w·r_x + (1 − w)·r_x' = 1.
                let w = (1.0 - r[x2]) / (r[x] - r[x2]);
                let pp = (r[x] * w).clamp(0.0, 1.0);
                best.offer((x, x2), pp, w, gap_on(x, x2, pp, w)?);
            }
        }
        if best.gap < reference_gap - tol {
            // Weight grid with renormalized coupling, as a fallback for
            // vertices lost to rounding.
            for (i, &x) in support.iter().enumerate() {
                for &x2 in &support[i + 1..] {
                    let mut lo = 0.0;
                    let mut hi = 1.0;
                    for _ in 0..4 {
                        let ws = linspace(lo, hi, 1024);
                        let mut local = (f64::NEG_INFINITY, 0.5);
                        for w in ws {
                            let mass = r[x] * w + r[x2] * (1.0 - w);
                            if mass <= 0.0 {
                                continue;
                            }
                            let pp = r[x] * w / mass;
                            let g = gap_on(x, x2, pp, w)?;
                            if g > local.0 {
                                local = (g, w);
                            }
                            best.offer((x, x2), pp, w, g);
                        }
                        let half = (hi - lo) / 1024.0 * 4.0;
                        lo = (local.1 - half).max(0.0);
                        hi = (local.1 + half).min(1.0);
                    }
                }
            }
        }
    }
    if best.gap < reference_gap - tol {
        unconstrained_search(n, &gap_on, &mut best)?;
    }
    best.found = best.gap >= reference_gap - tol;
    Ok(best)
}

fn unconstrained_search<G>(n: usize, gap_on: &G, best: &mut Domination) -> Result<()>
where
    G: Fn(usize, usize, f64, f64) -> Result<f64>,
{
    const POINTS: usize = 128;
    for x in 0..n {
        for x2 in x + 1..n {
            let grid = linspace(0.0, 1.0, POINTS);
            let mut center = (f64::NEG_INFINITY, 0.5, 0.5);
            for &pp in &grid {
                for &qq in &grid {
                    let g = gap_on(x, x2, pp, qq)?;
                    if g.is_finite() && g > center.0 {
                        center = (g, pp, qq);
                    }
                }
            }
            let mut half = 4.0 / POINTS as f64;
            for _ in 0..3 {
                let ps = linspace((center.1 - half).max(0.0), (center.1 + half).min(1.0), 64);
                let qs = linspace((center.2 - half).max(0.0), (center.2 + half).min(1.0), 64);
                for &pp in &ps {
                    for &qq in &qs {
                        let g = gap_on(x, x2, pp, qq)?;
                        if g.is_finite() && g > center.0 {
                            center = (g, pp, qq);
                        }
                    }
                }
                half /= 8.0;
            }
            best.offer((x, x2), center.1, center.2, center.0);
        }
    }
    Ok(())
}
