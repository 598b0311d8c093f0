//! Channel-level coefficients.
//!
//! [`eta_f`] reduces the channel coefficient to its binary-input subchannels:
//! the supremum over general input pairs equals the largest supremum over
//! pairs supported on two common letters. [`sandwich_bounds`] brackets the KL
//! coefficient by the squared-Hellinger diameter `d` of the rows,
//!
//! ```text
//! d/2 ≤ η_KL ≤ g(d/2) ≤ d,     g(t) = 2t(1 − t/2),
//! ```
//!
//! and [`trace_envelope`] builds the upper concave envelope of achievable
//! `(D_in, D_out)` points from binary-supported pairs only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binary::{solve_binary, BinaryProblem, BinarySolution, SolverConfig, Subchannel};
use crate::divergence::{df, DivergenceKind};
use crate::model::Channel;
use crate::numeric::linspace;
use crate::{Error, Result};

/// Above this many inputs the per-pair table is dropped unless requested.
pub const PAIR_TABLE_LIMIT: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichBounds {
    pub lower: f64,
    pub upper_g: f64,
    pub upper_diam: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEta {
    pub x: usize,
    pub x_prime: usize,
    pub eta: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub pairs: usize,
    pub evaluations: u64,
    /// Pairs whose solver ran out of budget before reaching `tol`.
    pub budget_exhausted: usize,
    /// Pairs whose largest evaluated ratio exceeded `1 + 1e-9`.
    pub dpi_anomalies: usize,
    pub max_raw_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionResult {
    pub eta: f64,
    pub kind: DivergenceKind,
    /// Argmax row pair `(x, x')`, `x < x'`; `None` for single-input channels.
    pub best_pair: Option<(usize, usize)>,
    pub arg: Option<BinarySolution>,
    /// Hellinger-diameter bounds, populated for KL only.
    pub lower_bound_hellinger: Option<f64>,
    pub upper_bound_g: Option<f64>,
    pub upper_bound_diam: Option<f64>,
    pub per_pair_etas: Option<Vec<PairEta>>,
    pub diagnostics: Diagnostics,
}

fn row_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|x| (x + 1..n).map(move |x2| (x, x2)))
        .collect()
}

/// Contraction coefficient of `channel` under `kind` with default search
/// settings and the given refinement tolerance.
pub fn eta_f(channel: &Channel, kind: DivergenceKind, tol: f64) -> Result<ContractionResult> {
    eta_f_with(channel, kind, &SolverConfig::with_tol(tol))
}

pub fn eta_f_with(
    channel: &Channel,
    kind: DivergenceKind,
    config: &SolverConfig,
) -> Result<ContractionResult> {
    let pairs = row_pairs(channel.input_size());
    let solutions: Vec<BinarySolution> = pairs
        .par_iter()
        .map(|&(x, x2)| {
            let problem = BinaryProblem::new(channel.row(x), channel.row(x2), kind)?;
            solve_binary(&problem, config)
        })
        .collect::<Result<_>>()?;

    let mut best: Option<usize> = None;
    let mut diagnostics = Diagnostics {
        pairs: pairs.len(),
        ..Diagnostics::default()
    };
    for (i, s) in solutions.iter().enumerate() {
        diagnostics.evaluations += s.evaluations;
        diagnostics.budget_exhausted += usize::from(s.budget_exhausted);
        diagnostics.dpi_anomalies += usize::from(s.dpi_anomaly);
        diagnostics.max_raw_ratio = diagnostics.max_raw_ratio.max(s.raw_max);
        // Strict comparison keeps the lexicographically smallest pair on ties.
        if best.is_none_or(|b| s.eta > solutions[b].eta) {
            best = Some(i);
        }
    }

    let keep_table = config.keep_pair_etas || channel.input_size() <= PAIR_TABLE_LIMIT;
    let per_pair_etas = keep_table.then(|| {
        pairs
            .iter()
            .zip(&solutions)
            .map(|(&(x, x_prime), s)| PairEta {
                x,
                x_prime,
                eta: s.eta,
            })
            .collect()
    });
    let bounds = (kind == DivergenceKind::Kl).then(|| sandwich_bounds(channel));

    Ok(ContractionResult {
        eta: best.map_or(0.0, |b| solutions[b].eta),
        kind,
        best_pair: best.map(|b| pairs[b]),
        arg: best.map(|b| solutions[b].clone()),
        lower_bound_hellinger: bounds.map(|b| b.lower),
        upper_bound_g: bounds.map(|b| b.upper_g),
        upper_bound_diam: bounds.map(|b| b.upper_diam),
        per_pair_etas,
        diagnostics,
    })
}

/// Largest squared Hellinger distance between two rows; 0 for one row.
pub fn hellinger_diameter(channel: &Channel) -> f64 {
    row_pairs(channel.input_size())
        .into_iter()
        .map(|(x, x2)| {
            df(DivergenceKind::Hellinger2, channel.row(x), channel.row(x2))
                .expect("rows of one channel share a length")
        })
        .fold(0.0, f64::max)
}

pub fn sandwich_bounds(channel: &Channel) -> SandwichBounds {
    let d = hellinger_diameter(channel);
    let t = d / 2.0;
    SandwichBounds {
        lower: t,
        upper_g: 2.0 * t * (1.0 - t / 2.0),
        upper_diam: d,
    }
}

/// Sampling resolution for [`trace_envelope`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeGrid {
    /// Points per axis on `[h, 1 − h]`, plus admissible edges.
    pub points: usize,
    pub margin: f64,
    /// Offsets `ε`: every interior `q` is also paired with `p = q ± ε`, which
    /// resolves the steep part of the envelope near the origin.
    pub near_diagonal: Vec<f64>,
}

impl Default for EnvelopeGrid {
    fn default() -> Self {
        Self {
            points: 256,
            margin: 1.0 / 512.0,
            near_diagonal: vec![1e-5, 1e-4, 1e-3, 1e-2],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeVertex {
    pub d_in: f64,
    pub d_out: f64,
}

/// Piecewise-linear upper concave envelope of `(D_in, D_out)` points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCurve {
    pub vertices: Vec<EnvelopeVertex>,
    pub kind: DivergenceKind,
    pub window_max: f64,
}

impl EnvelopeCurve {
    /// Largest `d_in` covered by the curve.
    pub fn extent(&self) -> f64 {
        self.vertices.last().map_or(0.0, |v| v.d_in)
    }

    /// Linear interpolation between vertices; `None` outside `[0, extent]`.
    pub fn eval(&self, d_in: f64) -> Option<f64> {
        if !(d_in >= 0.0) || d_in > self.extent() {
            return None;
        }
        let k = self.vertices.partition_point(|v| v.d_in < d_in);
        if k == 0 {
            return Some(self.vertices[0].d_out);
        }
        let (a, b) = (self.vertices[k - 1], self.vertices[k]);
        let t = (d_in - a.d_in) / (b.d_in - a.d_in);
        Some(a.d_out + t * (b.d_out - a.d_out))
    }

    /// Largest `d_out / d_in` over vertices other than the origin.
    pub fn max_chord_slope(&self) -> f64 {
        self.vertices
            .iter()
            .filter(|v| v.d_in > 0.0)
            .map(|v| v.d_out / v.d_in)
            .fold(0.0, f64::max)
    }
}

/// Upper concave envelope of the points produced by binary-supported input
/// pairs on every row pair, restricted to `d_in ≤ window_max`.
pub fn trace_envelope(
    channel: &Channel,
    kind: DivergenceKind,
    window_max: f64,
    grid: &EnvelopeGrid,
) -> Result<EnvelopeCurve> {
    if !(window_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "window_max must be positive, got {window_max}"
        )));
    }
    if grid.points < 2 || !(grid.margin > 0.0 && grid.margin < 0.5) {
        return Err(Error::InvalidArgument("envelope grid needs >= 2 points and margin in (0, 1/2)".into()));
    }
    let interior = linspace(grid.margin, 1.0 - grid.margin, grid.points);
    let mut p_values = vec![0.0];
    p_values.extend_from_slice(&interior);
    p_values.push(1.0);
    let mut q_values = interior.clone();
    if kind.slope_at_infinity().is_some() {
        q_values.insert(0, 0.0);
        q_values.push(1.0);
    }

    let pairs = row_pairs(channel.input_size());
    let clouds: Vec<Vec<EnvelopeVertex>> = pairs
        .par_iter()
        .map(|&(x, x2)| {
            let problem = BinaryProblem::new(channel.row(x), channel.row(x2), kind)?;
            let sub = Subchannel::new(&problem);
            let mut pts = Vec::new();
            let mut push = |p: f64, q: f64| {
                if p == q || !(0.0..=1.0).contains(&p) {
                    return;
                }
                let (d_out, d_in) = sub.point(p, q);
                if d_in > 0.0 && d_in <= window_max && d_out.is_finite() {
                    pts.push(EnvelopeVertex { d_in, d_out });
                }
            };
            for &p in &p_values {
                for &q in &q_values {
                    push(p, q);
                }
            }
            for &q in &interior {
                for &eps in &grid.near_diagonal {
                    push(q + eps, q);
                    push(q - eps, q);
                }
            }
            Ok(pts)
        })
        .collect::<Result<_>>()?;

    let mut points: Vec<EnvelopeVertex> = clouds.into_iter().flatten().collect();
    if points.is_empty() {
        return Err(Error::EmptyEnvelope(window_max));
    }
    points.push(EnvelopeVertex {
        d_in: 0.0,
        d_out: 0.0,
    });
    Ok(EnvelopeCurve {
        vertices: upper_hull(points),
        kind,
        window_max,
    })
}

/// Upper hull by a monotone chain over points sorted by `d_in`; equal
/// `d_in` keep the largest `d_out`, collinear points are dropped.
pub(crate) fn upper_hull(mut points: Vec<EnvelopeVertex>) -> Vec<EnvelopeVertex> {
    points.sort_by(|a, b| a.d_in.total_cmp(&b.d_in).then(b.d_out.total_cmp(&a.d_out)));
    points.dedup_by(|later, earlier| later.d_in == earlier.d_in);
    let mut hull: Vec<EnvelopeVertex> = Vec::new();
    for pt in points {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.d_in - o.d_in) * (pt.d_out - o.d_out) - (a.d_out - o.d_out) * (pt.d_in - o.d_in);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    hull
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use DivergenceKind::*;

    fn bsc(delta: f64) -> Channel {
        Channel::from_rows(vec![vec![1.0 - delta, delta], vec![delta, 1.0 - delta]]).unwrap()
    }

    fn identity() -> Channel {
        Channel::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    fn constant() -> Channel {
        let r = vec![0.2, 0.5, 0.3];
        Channel::from_rows(vec![r.clone(), r.clone(), r]).unwrap()
    }

    #[test]
    fn identity_is_lossless() {
        let r = eta_f(&identity(), Kl, 1e-6).unwrap();
        assert_abs_diff_eq!(r.eta, 1.0, epsilon = 1e-9);
        assert_eq!(r.best_pair, Some((0, 1)));
    }

    #[test]
    fn constant_rows_give_zero() {
        for kind in DivergenceKind::ALL {
            let r = eta_f(&constant(), kind, 1e-6).unwrap();
            assert_eq!(r.eta, 0.0);
            assert_eq!(r.best_pair, Some((0, 1)));
            assert_eq!(r.per_pair_etas.as_ref().unwrap().len(), 3);
        }
    }

    #[test]
    fn single_input_is_zero() {
        let ch = Channel::from_rows(vec![vec![0.3, 0.7]]).unwrap();
        let r = eta_f(&ch, Kl, 1e-6).unwrap();
        assert_eq!(r.eta, 0.0);
        assert_eq!(r.best_pair, None);
        assert_eq!(hellinger_diameter(&ch), 0.0);
    }

    #[test]
    fn bec_matches_lower_bound() {
        let ch = Channel::from_rows(vec![vec![0.75, 0.0, 0.25], vec![0.0, 0.75, 0.25]]).unwrap();
        let r = eta_f(&ch, Kl, 1e-6).unwrap();
        assert_abs_diff_eq!(r.eta, 0.75, epsilon = 1e-4);
        assert_abs_diff_eq!(r.lower_bound_hellinger.unwrap(), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn bsc_tv_is_closed_form() {
        let r = eta_f(&bsc(0.1), Tv, 1e-6).unwrap();
        assert_abs_diff_eq!(r.eta, 0.8, epsilon = 1e-15);
        assert!(r.lower_bound_hellinger.is_none());
    }

    #[test]
    fn bsc_bounds() {
        assert_abs_diff_eq!(hellinger_diameter(&bsc(0.1)), 0.8, epsilon = 1e-12);
        let b = sandwich_bounds(&bsc(0.1));
        assert_abs_diff_eq!(b.lower, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(b.upper_g, 0.64, epsilon = 1e-12);
        assert_abs_diff_eq!(b.upper_diam, 0.8, epsilon = 1e-12);
        let b = sandwich_bounds(&constant());
        assert_eq!((b.lower, b.upper_g, b.upper_diam), (0.0, 0.0, 0.0));
        let b = sandwich_bounds(&identity());
        assert_eq!((b.lower, b.upper_g, b.upper_diam), (1.0, 1.0, 2.0));
    }

    #[test]
    fn ties_pick_smallest_pair() {
        let ch = Channel::from_rows(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let r = eta_f(&ch, Tv, 1e-6).unwrap();
        assert_eq!(r.best_pair, Some((0, 1)));
    }

    #[test]
    fn hull_is_concave_and_starts_at_origin() {
        let pts = vec![
            EnvelopeVertex { d_in: 1.0, d_out: 0.5 },
            EnvelopeVertex { d_in: 2.0, d_out: 0.6 },
            EnvelopeVertex { d_in: 1.0, d_out: 0.7 },
            EnvelopeVertex { d_in: 0.5, d_out: 0.1 },
            EnvelopeVertex { d_in: 0.0, d_out: 0.0 },
            EnvelopeVertex { d_in: 3.0, d_out: 0.9 },
        ];
        let hull = upper_hull(pts);
        assert_eq!(hull[0], EnvelopeVertex { d_in: 0.0, d_out: 0.0 });
        assert_eq!(hull[1], EnvelopeVertex { d_in: 1.0, d_out: 0.7 });
        assert_eq!(hull.last().unwrap().d_in, 3.0);
        assert_eq!(hull.len(), 3);
    }

    #[test]
    fn identity_envelope_is_diagonal() {
        let c = trace_envelope(&identity(), Kl, 2.0, &EnvelopeGrid::default()).unwrap();
        for v in &c.vertices {
            assert_abs_diff_eq!(v.d_out, v.d_in, epsilon = 1e-9);
        }
        assert!(c.extent() > 1.9);
        assert_abs_diff_eq!(c.eval(1.0).unwrap(), 1.0, epsilon = 1e-9);
        assert!(c.eval(2.5).is_none());
    }

    #[test]
    fn constant_envelope_is_flat() {
        let c = trace_envelope(&constant(), Kl, 4.0, &EnvelopeGrid::default()).unwrap();
        assert!(c.vertices.iter().all(|v| v.d_out == 0.0));
        assert_eq!(c.max_chord_slope(), 0.0);
    }

    #[test]
    fn bsc_envelope_chord_matches_eta() {
        let c = trace_envelope(&bsc(0.1), Kl, 2.0, &EnvelopeGrid::default()).unwrap();
        assert_abs_diff_eq!(c.max_chord_slope(), 0.64, epsilon = 5e-3);
        assert!(c.vertices.windows(2).all(|w| w[1].d_in > w[0].d_in));
        let slopes: Vec<f64> = c
            .vertices
            .windows(2)
            .map(|w| (w[1].d_out - w[0].d_out) / (w[1].d_in - w[0].d_in))
            .collect();
        assert!(slopes.windows(2).all(|s| s[1] <= s[0] + 1e-12));
    }

    #[test]
    fn envelope_errors() {
        assert!(trace_envelope(&bsc(0.1), Kl, 0.0, &EnvelopeGrid::default()).is_err());
        assert!(matches!(
            trace_envelope(&bsc(0.1), Kl, 1e-30, &EnvelopeGrid::default()),
            Err(Error::EmptyEnvelope(_))
        ));
    }
}
