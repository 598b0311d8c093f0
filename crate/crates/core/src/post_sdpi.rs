//! Lower estimate of the post-SDPI coefficient
//! `η⁽ᵖ⁾ = inf{η : I(U;X) ≤ η·I(U;Y) for all X − Y − U}`.
//!
//! `U` is binary, described by `b_y = P(U = 1 | Y = y)`, and `X` ranges over
//! two-letter inputs `(x, x')` with weight `p` on `x`. For each row pair and
//! each `p` on a grid, `b` is searched by multi-start compass search; the
//! best configuration is then polished jointly in `(p, b)`.
//!
//! Both informations are evaluated as averages of binary KL divergences to
//! the `U` marginal,
//!
//! ```text
//! I(U;Y) = Σ_y P_Y(y) · D(Ber(b_y) ‖ Ber(b̄)),
//! I(U;X) = p·D(Ber(a_x) ‖ Ber(b̄)) + (1−p)·D(Ber(a_x') ‖ Ber(b̄)),
//! ```
//!
//! with the differences `b_y − b̄` and `a_x − b̄` formed directly, which keeps
//! the ratio accurate when `b` is nearly constant and both informations are
//! tiny.
//!
//! The supremum is often approached only as `b → 0` along a fixed direction
//! `β` (U rare). Both informations are then linear in the scale, and their
//! ratio tends to a ratio of KL divergences between tilted measures that is
//! searched as a second objective over `β`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binary::DPI_SLACK;
use crate::divergence::DivergenceKind;
use crate::model::Channel;
use crate::numeric::CompensatedSum;
use crate::rng::stream_rng;
use crate::{Error, Result};

/// A binary-input, binary-`U` configuration of the chain `X − Y − U`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostProblem {
    pub pair: (usize, usize),
    /// Weight on input `pair.0`, in `(0, 1)`.
    pub p: f64,
    /// `b[y] = P(U = 1 | Y = y)`.
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostResult {
    /// Lower estimate of the coefficient, clamped to `[0, 1]`.
    pub eta_post: f64,
    pub best: Option<PostProblem>,
    /// The value is approached as `best.b` is scaled toward zero, where `U`
    /// becomes rare; `post_ratio(best)` is then slightly below `eta_post`.
    pub rare_u_limit: bool,
    pub converged: bool,
    pub starts_used: usize,
    pub evaluations: u64,
    /// Largest evaluated ratio before clamping.
    pub raw_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostConfig {
    pub tol: f64,
    /// Uniformly random starts per `(pair, p)` cell.
    pub starts: usize,
    /// Near-constant starts `b = c·1 + ε·d` per cell.
    pub perturbation_starts: usize,
    pub perturbation: f64,
    pub p_grid: usize,
    /// Evaluation cap over the whole search.
    pub budget: u64,
    pub seed: u64,
    pub max_outputs: usize,
}

impl Default for PostConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            starts: 8,
            perturbation_starts: 4,
            perturbation: 1e-4,
            p_grid: 64,
            budget: 2_000_000,
            seed: 0,
            max_outputs: 12,
        }
    }
}

/// `D(Ber(a) ‖ Ber(a − diff))`, with the reference mass taken from `diff` so
/// that `diff = 0` gives exactly zero.
fn binary_kl(a: f64, diff: f64) -> f64 {
    let m = (a - diff).clamp(0.0, 1.0);
    DivergenceKind::Kl.sum_terms([(a, m, diff), (1.0 - a, 1.0 - m, -diff)])
}

/// Evaluator for one row pair, reused across `p` and `b`.
struct PairModel<'a> {
    row0: &'a [f64],
    row1: &'a [f64],
}

impl PairModel<'_> {
    /// `(I(U;X), I(U;Y))` in nats.
    fn informations(&self, p: f64, b: &[f64]) -> (f64, f64) {
        let n = b.len();
        let py: Vec<f64> = (0..n).map(|y| p * self.row0[y] + (1.0 - p) * self.row1[y]).collect();
        let mut a0 = CompensatedSum::default();
        let mut a1 = CompensatedSum::default();
        let mut gap = CompensatedSum::default();
        for y in 0..n {
            a0.add(self.row0[y] * b[y]);
            a1.add(self.row1[y] * b[y]);
            gap.add((self.row0[y] - self.row1[y]) * b[y]);
        }
        let (a0, a1, gap) = (a0.value(), a1.value(), gap.value());

        let mut info_y = CompensatedSum::default();
        for y in 0..n {
            if py[y] == 0.0 {
                continue;
            }
            let mut dev = CompensatedSum::default();
            for z in 0..n {
                dev.add(py[z] * (b[y] - b[z]));
            }
            info_y.add(py[y] * binary_kl(b[y], dev.value()));
        }
        let info_x = p * binary_kl(a0, (1.0 - p) * gap) + (1.0 - p) * binary_kl(a1, -p * gap);
        (info_x, info_y.value())
    }

    fn ratio(&self, p: f64, b: &[f64]) -> Option<f64> {
        let (ix, iy) = self.informations(p, b);
        (iy > 0.0 && iy.is_finite()).then(|| ix / iy)
    }

    /// `lim_{s→0} ratio(p, s·β)`: with `U` rare, both informations are
    /// linear in `s` and the ratio tends to `D(Q_X‖P_X) / D(Q_Y‖P_Y)` for the
    /// tilted measures `Q_Y ∝ P_Y·β` and `Q_X` its image under `P_{X|Y}`.
    fn rare_limit(&self, p: f64, beta: &[f64]) -> Option<f64> {
        let n = beta.len();
        let py: Vec<f64> = (0..n).map(|y| p * self.row0[y] + (1.0 - p) * self.row1[y]).collect();
        let mut a0 = CompensatedSum::default();
        let mut a1 = CompensatedSum::default();
        let mut gap = CompensatedSum::default();
        for y in 0..n {
            a0.add(self.row0[y] * beta[y]);
            a1.add(self.row1[y] * beta[y]);
            gap.add((self.row0[y] - self.row1[y]) * beta[y]);
        }
        let (a0, a1, gap) = (a0.value(), a1.value(), gap.value());
        let w = p * (1.0 - p);
        let num = DivergenceKind::Kl.sum_terms([
            (p * a0, (p * a0 - w * gap).max(0.0), w * gap),
            ((1.0 - p) * a1, ((1.0 - p) * a1 + w * gap).max(0.0), -w * gap),
        ]);
        let den = DivergenceKind::Kl.sum_terms((0..n).map(|y| {
            let mut dev = CompensatedSum::default();
            for z in 0..n {
                dev.add(py[z] * (beta[y] - beta[z]));
            }
            let d = py[y] * dev.value();
            (py[y] * beta[y], (py[y] * beta[y] - d).max(0.0), d)
        }));
        (den > 0.0 && den.is_finite()).then(|| num / den)
    }
}

/// `I(U;X) / I(U;Y)` for the configuration.
pub fn post_ratio(channel: &Channel, problem: &PostProblem) -> Result<f64> {
    let (x, x2) = problem.pair;
    if x >= channel.input_size() || x2 >= channel.input_size() {
        return Err(Error::InvalidArgument(format!("pair {:?} out of range", problem.pair)));
    }
    if problem.b.len() != channel.output_size() {
        return Err(Error::DimensionMismatch(problem.b.len(), channel.output_size()));
    }
    if !(problem.p > 0.0 && problem.p < 1.0) {
        return Err(Error::InvalidArgument(format!("p must lie in (0, 1), got {}", problem.p)));
    }
    if problem.b.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidArgument("b must lie in [0, 1]".into()));
    }
    let model = PairModel {
        row0: channel.row(x),
        row1: channel.row(x2),
    };
    model
        .ratio(problem.p, &problem.b)
        .ok_or_else(|| Error::InvalidArgument("I(U;Y) = 0: U is independent of Y".into()))
}

/// What a search maximizes: the ratio itself, or its limit as `b` shrinks
/// toward zero along a fixed direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Objective {
    Ratio,
    RareLimit,
}

struct Search<'a> {
    model: PairModel<'a>,
    objective: Objective,
    evaluations: u64,
    budget: u64,
    raw_max: f64,
}

impl Search<'_> {
    fn eval(&mut self, p: f64, b: &[f64]) -> f64 {
        self.evaluations += 1;
        let r = match self.objective {
            Objective::Ratio => self.model.ratio(p, b),
            Objective::RareLimit => self.model.rare_limit(p, b),
        };
        match r {
            Some(r) => {
                self.raw_max = self.raw_max.max(r);
                r
            }
            None => f64::NEG_INFINITY,
        }
    }

    /// Compass search over `b ∈ [0,1]^n` (and `p` when `move_p`), doubling
    /// the step after a successful move and halving it otherwise. Stops at
    /// `limit` total evaluations.
    fn compass(&mut self, p: &mut f64, b: &mut [f64], mut value: f64, mut step: f64, move_p: bool, limit: u64) -> f64 {
        const MIN_STEP: f64 = 1e-10;
        let limit = limit.min(self.budget);
        let n = b.len();
        while step >= MIN_STEP && self.evaluations < limit {
            let mut improved = false;
            for k in 0..n + usize::from(move_p) {
                for dir in [1.0, -1.0] {
                    if k < n {
                        let old = b[k];
                        let new = (old + dir * step).clamp(0.0, 1.0);
                        if new == old {
                            continue;
                        }
                        b[k] = new;
                        let v = self.eval(*p, b);
                        if v > value {
                            value = v;
                            improved = true;
                            break;
                        }
                        b[k] = old;
                    } else {
                        let new = (*p + dir * step).clamp(P_FLOOR, 1.0 - P_FLOOR);
                        if new == *p {
                            continue;
                        }
                        let v = self.eval(new, b);
                        if v > value {
                            value = v;
                            *p = new;
                            improved = true;
                            break;
                        }
                    }
                }
            }
            if improved {
                step = (step * 2.0).min(0.5);
            } else {
                step *= 0.5;
            }
        }
        value
    }
}

const P_FLOOR: f64 = 1e-6;

/// Largest entry of `b` in the reported configuration of a rare-`U` limit.
const RARE_SCALE: f64 = 1e-7;

struct CellBest {
    value: f64,
    objective: Objective,
    p: f64,
    b: Vec<f64>,
    evaluations: u64,
    raw_max: f64,
    starts: usize,
    exhausted: bool,
}

/// Starts for one `(pair, p)` cell: `(objective, b, initial step)`.
fn cell_starts(row0: &[f64], row1: &[f64], p: f64, config: &PostConfig, stream: u64) -> Vec<(Objective, Vec<f64>, f64)> {
    let n = row0.len();
    let mut rng = stream_rng(config.seed, stream);
    let mut out = Vec::new();
    // Deterministic corner starts U = 1{Y = y}, then uniform random starts;
    // each seeds both objectives.
    let mut bases: Vec<Vec<f64>> = (0..n)
        .map(|y| (0..n).map(|z| if z == y { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..config.starts {
        bases.push((0..n).map(|_| rng.random::<f64>()).collect());
    }
    for b in &bases {
        out.push((Objective::Ratio, b.clone(), 0.25));
        out.push((Objective::RareLimit, b.clone(), 0.25));
    }
    // Near-constant starts probe the regime where both informations vanish.
    // The first direction is Δ/P_Y with Δ = row0 − row1, which maximizes the
    // second-order ratio; the rest are random.
    let eps = config.perturbation;
    let py: Vec<f64> = (0..n).map(|y| p * row0[y] + (1.0 - p) * row1[y]).collect();
    for s in 0..config.perturbation_starts {
        let c = 0.1 + 0.8 * rng.random::<f64>();
        let mut d: Vec<f64> = if s == 0 {
            (0..n)
                .map(|y| if py[y] > 0.0 { (row0[y] - row1[y]) / py[y] } else { 0.0 })
                .collect()
        } else {
            (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
        };
        let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            d = (0..n).map(|y| if y == 0 { 1.0 } else { 0.0 }).collect();
        } else {
            d.iter_mut().for_each(|v| *v /= scale);
        }
        let b = d.iter().map(|v| (c + eps * v).clamp(0.0, 1.0)).collect();
        out.push((Objective::Ratio, b, 0.25 * eps));
    }
    out
}

fn search_cell(channel: &Channel, pair: (usize, usize), p: f64, config: &PostConfig, stream: u64, budget: u64) -> CellBest {
    let row0 = channel.row(pair.0);
    let row1 = channel.row(pair.1);
    let starts = cell_starts(row0, row1, p, config, stream);
    let per_start = (budget / starts.len() as u64).max(1);
    let mut search = Search {
        model: PairModel { row0, row1 },
        objective: Objective::Ratio,
        evaluations: 0,
        budget,
        raw_max: 0.0,
    };
    let mut best = CellBest {
        value: f64::NEG_INFINITY,
        objective: Objective::Ratio,
        p,
        b: vec![0.5; row0.len()],
        evaluations: 0,
        raw_max: 0.0,
        starts: 0,
        exhausted: false,
    };
    for (objective, mut b, step) in starts {
        if search.evaluations >= budget {
            best.exhausted = true;
            break;
        }
        search.objective = objective;
        let mut pp = p;
        let limit = search.evaluations + per_start;
        let v0 = search.eval(pp, &b);
        let v = search.compass(&mut pp, &mut b, v0, step, false, limit);
        best.starts += 1;
        if v > best.value {
            best.value = v;
            best.objective = objective;
            best.b = b;
        }
    }
    best.evaluations = search.evaluations;
    best.raw_max = search.raw_max;
    best
}

/// Lower estimate of the post-SDPI coefficient of `channel`.
pub fn post_eta(channel: &Channel, config: &PostConfig) -> Result<PostResult> {
    if channel.input_size() < 2 {
        return Err(Error::InvalidArgument("post-SDPI needs at least two inputs".into()));
    }
    if channel.output_size() > config.max_outputs {
        return Err(Error::InvalidArgument(format!(
            "output alphabet of {} exceeds the cap of {}",
            channel.output_size(),
            config.max_outputs
        )));
    }
    if !(config.tol > 0.0) || config.p_grid == 0 || config.budget == 0 {
        return Err(Error::InvalidArgument("tol, p_grid and budget must be positive".into()));
    }
    let n_in = channel.input_size();
    let pairs: Vec<(usize, usize)> = (0..n_in)
        .flat_map(|x| (x + 1..n_in).map(move |x2| (x, x2)))
        .collect();
    let tasks: Vec<((usize, usize), f64)> = pairs
        .iter()
        .flat_map(|&pair| (0..config.p_grid).map(move |i| (pair, (i + 1) as f64 / (config.p_grid + 1) as f64)))
        .collect();
    // Reserve a tenth of the budget for the joint polish.
    let polish_budget = (config.budget / 10).max(1);
    let per_task = ((config.budget - config.budget / 10) / tasks.len() as u64).max(1);
    let cells: Vec<CellBest> = tasks
        .par_iter()
        .enumerate()
        .map(|(i, &(pair, p))| search_cell(channel, pair, p, config, i as u64, per_task))
        .collect();

    let mut evaluations: u64 = cells.iter().map(|c| c.evaluations).sum();
    let mut raw_max = cells.iter().map(|c| c.raw_max).fold(0.0, f64::max);
    let starts_used = cells.iter().map(|c| c.starts).sum();
    let mut exhausted = cells.iter().any(|c| c.exhausted);

    let mut best_idx: Option<usize> = None;
    for (i, c) in cells.iter().enumerate() {
        if c.value.is_finite() && best_idx.is_none_or(|b| c.value > cells[b].value) {
            best_idx = Some(i);
        }
    }
    let Some(bi) = best_idx else {
        return Ok(PostResult {
            eta_post: 0.0,
            best: None,
            rare_u_limit: false,
            converged: !exhausted,
            starts_used,
            evaluations,
            raw_max,
        });
    };

    let pair = tasks[bi].0;
    let cell = &cells[bi];
    let mut p = cell.p;
    let mut b = cell.b.clone();
    let before = cell.value;
    let mut polish = Search {
        model: PairModel {
            row0: channel.row(pair.0),
            row1: channel.row(pair.1),
        },
        objective: cell.objective,
        evaluations: 0,
        budget: polish_budget,
        raw_max: 0.0,
    };
    let step = 0.5 / (config.p_grid + 1) as f64;
    let after = polish.compass(&mut p, &mut b, before, step, true, polish_budget);
    evaluations += polish.evaluations;
    raw_max = raw_max.max(polish.raw_max);
    exhausted |= polish.evaluations >= polish_budget;

    let rare = cell.objective == Objective::RareLimit;
    if rare {
        let top = b.iter().fold(0.0f64, |m, &v| m.max(v));
        b.iter_mut().for_each(|v| *v *= RARE_SCALE / top);
    }
    Ok(PostResult {
        eta_post: after.clamp(0.0, 1.0),
        best: Some(PostProblem { pair, p, b }),
        rare_u_limit: rare,
        converged: !exhausted && after - before < config.tol,
        starts_used,
        evaluations,
        raw_max,
    })
}

/// Whether every evaluation of a run respected `I(U;X) ≤ I(U;Y)`.
pub fn respects_dpi(result: &PostResult) -> bool {
    result.raw_max <= 1.0 + DPI_SLACK
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::{binary_entropy, mutual_information};
    use approx::assert_abs_diff_eq;

    fn identity() -> Channel {
        Channel::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    fn bsc() -> Channel {
        Channel::from_rows(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap()
    }

    fn problem(p: f64, b: Vec<f64>) -> PostProblem {
        PostProblem { pair: (0, 1), p, b }
    }

    /// `I(U;X)/I(U;Y)` from explicit joints via `mutual_information`.
    fn via_joints(ch: &Channel, pr: &PostProblem) -> f64 {
        let (x, x2) = pr.pair;
        let rows = [(pr.p, ch.row(x)), (1.0 - pr.p, ch.row(x2))];
        let joint_ux: Vec<Vec<f64>> = rows
            .iter()
            .map(|(w, r)| {
                let a: f64 = r.iter().zip(&pr.b).map(|(ry, by)| ry * by).sum();
                vec![w * a, w * (1.0 - a)]
            })
            .collect();
        let py: Vec<f64> = (0..pr.b.len()).map(|y| rows.iter().map(|(w, r)| w * r[y]).sum()).collect();
        let joint_uy: Vec<Vec<f64>> = py
            .iter()
            .zip(&pr.b)
            .map(|(pyy, by)| vec![pyy * by, pyy * (1.0 - by)])
            .collect();
        mutual_information(&joint_ux).unwrap() / mutual_information(&joint_uy).unwrap()
    }

    #[test]
    fn ratio_examples() {
        assert_abs_diff_eq!(
            post_ratio(&identity(), &problem(0.5, vec![1.0, 0.0])).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let expected = (2f64.ln() - binary_entropy(0.1)) / 2f64.ln();
        let r = post_ratio(&bsc(), &problem(0.5, vec![1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(r, 0.5310, epsilon = 1e-4);
        assert_abs_diff_eq!(r, expected, epsilon = 1e-12);
        let flat = Channel::from_rows(vec![vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
        assert_eq!(post_ratio(&flat, &problem(0.4, vec![0.9, 0.2])).unwrap(), 0.0);
    }

    #[test]
    fn ratio_errors() {
        assert!(post_ratio(&bsc(), &problem(0.5, vec![0.3, 0.3])).is_err());
        assert!(post_ratio(&bsc(), &problem(0.0, vec![1.0, 0.0])).is_err());
        assert!(post_ratio(&bsc(), &problem(0.5, vec![1.0])).is_err());
        assert!(post_ratio(&bsc(), &problem(0.5, vec![1.5, 0.0])).is_err());
    }

    #[test]
    fn agrees_with_mutual_information() {
        let ch = Channel::from_rows(vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.6, 0.3], vec![0.2, 0.2, 0.6]]).unwrap();
        for (pair, p, b) in [
            ((0, 1), 0.3, vec![0.9, 0.1, 0.5]),
            ((1, 2), 0.7, vec![0.0, 1.0, 0.2]),
            ((0, 2), 0.5, vec![0.33, 0.8, 0.61]),
        ] {
            let pr = PostProblem { pair, p, b };
            let a = post_ratio(&ch, &pr).unwrap();
            assert_abs_diff_eq!(a, via_joints(&ch, &pr), epsilon = 1e-12);
        }
    }

    #[test]
    fn near_constant_b_stays_below_one() {
        let r = post_ratio(&identity(), &problem(0.3, vec![0.5 + 1e-6, 0.5 - 1e-6])).unwrap();
        assert!(r <= 1.0 + 1e-9, "{r}");
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn rare_limit_matches_small_scale_ratio() {
        let ch = Channel::from_rows(vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.6, 0.3]]).unwrap();
        let model = PairModel {
            row0: ch.row(0),
            row1: ch.row(1),
        };
        let beta = [0.9, 0.1, 0.4];
        let limit = model.rare_limit(0.35, &beta).unwrap();
        let s = 1e-7;
        let scaled: Vec<f64> = beta.iter().map(|v| v * s).collect();
        let r = model.ratio(0.35, &scaled).unwrap();
        assert_abs_diff_eq!(r, limit, epsilon = 1e-6);
        assert!(limit <= 1.0);
    }

    #[test]
    fn reported_configuration_attains_estimate() {
        let ch = Channel::from_rows(vec![
            vec![0.6177, 0.3556, 0.0267],
            vec![0.2249, 0.6543, 0.1208],
            vec![0.3527, 0.5093, 0.1380],
        ])
        .unwrap();
        let r = post_eta(&ch, &PostConfig::default()).unwrap();
        let best = r.best.clone().unwrap();
        assert_abs_diff_eq!(post_ratio(&ch, &best).unwrap(), r.eta_post, epsilon = 1e-5);
        assert!(respects_dpi(&r));
    }

    #[test]
    fn post_eta_examples() {
        let cfg = PostConfig::default();
        let r = post_eta(&identity(), &cfg).unwrap();
        assert_abs_diff_eq!(r.eta_post, 1.0, epsilon = 1e-6);
        assert!(respects_dpi(&r));
        let swapped = Channel::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(post_eta(&swapped, &cfg).unwrap().eta_post, 1.0, epsilon = 1e-6);
        let flat = Channel::from_rows(vec![vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
        assert_eq!(post_eta(&flat, &cfg).unwrap().eta_post, 0.0);
    }

    #[test]
    fn post_eta_rejects_bad_inputs() {
        let one = Channel::from_rows(vec![vec![0.3, 0.7]]).unwrap();
        assert!(post_eta(&one, &PostConfig::default()).is_err());
        let wide = Channel::from_rows(vec![vec![1.0 / 13.0; 13], vec![1.0 / 13.0; 13]]).unwrap();
        assert!(post_eta(&wide, &PostConfig::default()).is_err());
    }
}
