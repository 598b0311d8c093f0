//! Contraction coefficient of a binary-input subchannel.
//!
//! For two output distributions `r0`, `r1` and input weights `p`, `q`, the
//! objective is
//!
//! ```text
//! R(p, q) = D_f(p·r0 + (1−p)·r1 ‖ q·r0 + (1−q)·r1) / D_f(Ber(p) ‖ Ber(q))
//! ```
//!
//! and the coefficient is its supremum over admissible `(p, q)`. As `p → q`
//! both divergences vanish to second order and the ratio tends to the
//! χ²-type value
//!
//! ```text
//! L(q) = q(1−q) · Σ_y (r0(y) − r1(y))² / (q·r0(y) + (1−q)·r1(y))
//! ```
//!
//! for every generator with `0 < f''(1) < ∞`. The supremum may be attained
//! only in that limit, so [`solve_binary`] maximizes `R` on the open square
//! and its admissible edges and `L` on the diagonal separately, each by a
//! deterministic coarse grid followed by zoom refinement around the best
//! cells.

use serde::{Deserialize, Serialize};

use crate::divergence::{binary_unchecked, DivergenceKind};
use crate::numeric::{linspace, CompensatedSum};
use crate::{Error, Result};

/// Values above `1 + DPI_SLACK` violate the data processing inequality and
/// flag a numerical anomaly.
pub const DPI_SLACK: f64 = 1e-9;

/// Closest approach of `q` to 0 or 1 when the edge is not admissible.
const Q_FLOOR: f64 = 1e-12;

/// Two rows of a channel together with the divergence to contract.
#[derive(Clone, Copy, Debug)]
pub struct BinaryProblem<'a> {
    row0: &'a [f64],
    row1: &'a [f64],
    kind: DivergenceKind,
}

impl<'a> BinaryProblem<'a> {
    pub fn new(row0: &'a [f64], row1: &'a [f64], kind: DivergenceKind) -> Result<Self> {
        if row0.len() != row1.len() {
            return Err(Error::DimensionMismatch(row0.len(), row1.len()));
        }
        Ok(Self { row0, row1, kind })
    }

    pub fn row0(&self) -> &'a [f64] {
        self.row0
    }

    pub fn row1(&self) -> &'a [f64] {
        self.row1
    }

    pub fn kind(&self) -> DivergenceKind {
        self.kind
    }

    /// The same problem with the two rows exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            row0: self.row1,
            row1: self.row0,
            kind: self.kind,
        }
    }
}

/// Search parameters for [`solve_binary`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Target spacing of the final zoom grid in `(p, q)`.
    pub tol: f64,
    /// Cap on objective evaluations for one binary problem.
    pub budget: u64,
    /// Points per axis of the coarse grid on `[h, 1 − h]`.
    pub grid: usize,
    /// Margin `h` of the coarse interior grid.
    pub margin: f64,
    /// Points of the coarse diagonal-limit scan.
    pub diagonal_points: usize,
    /// Coarse cells kept for refinement.
    pub keep: usize,
    /// Points per axis of each zoom window.
    pub zoom_points: usize,
    /// Window shrink factor per zoom round.
    pub zoom_factor: f64,
    pub min_rounds: usize,
    pub max_rounds: usize,
    /// Total variation has a closed form on binary inputs; disable to force
    /// the generic search.
    pub tv_fast_path: bool,
    /// Keep the per-pair table in [`ContractionResult`](crate::ContractionResult)
    /// even for channels with more than 64 inputs.
    pub keep_pair_etas: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            budget: 4_000_000,
            grid: 512,
            margin: 1.0 / 1024.0,
            diagonal_points: 512,
            keep: 16,
            zoom_points: 64,
            zoom_factor: 8.0,
            min_rounds: 4,
            max_rounds: 16,
            tv_fast_path: true,
            keep_pair_etas: false,
        }
    }
}

impl SolverConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if self.grid < 2 || self.zoom_points < 2 || self.keep == 0 || self.diagonal_points < 2 {
            return Err(Error::InvalidArgument("grid sizes must be at least 2".into()));
        }
        if !(self.margin > 0.0 && self.margin < 0.5) {
            return Err(Error::InvalidArgument("margin must lie in (0, 1/2)".into()));
        }
        if !(self.zoom_factor > 1.0) {
            return Err(Error::InvalidArgument("zoom factor must exceed 1".into()));
        }
        Ok(())
    }
}

/// Result of [`solve_binary`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarySolution {
    /// Coefficient estimate, clamped to `[0, 1]`.
    pub eta: f64,
    /// Weight of `row0` in the first input. Equals `arg_q` when `on_diagonal`.
    pub arg_p: f64,
    pub arg_q: f64,
    /// The best value came from the `p → q` limit rather than a finite pair.
    pub on_diagonal: bool,
    pub evaluations: u64,
    /// Grid spacing of the last refinement round.
    pub achieved_tol: f64,
    /// The evaluation budget ran out before the spacing reached `tol`.
    pub budget_exhausted: bool,
    /// Largest evaluated objective value, before clamping.
    pub raw_max: f64,
    /// `raw_max` exceeded `1 + DPI_SLACK`.
    pub dpi_anomaly: bool,
    /// Running maximum after the coarse pass and after each zoom round.
    pub round_history: Vec<f64>,
}

/// Precomputed view of a binary problem used by every evaluator.
pub(crate) struct Subchannel<'a> {
    row0: &'a [f64],
    row1: &'a [f64],
    diff: Vec<f64>,
    kind: DivergenceKind,
}

/// Mixtures and cached per-entry values for a list of input weights.
struct Axis {
    t: Vec<f64>,
    mix: Vec<f64>,
    aux: Vec<f64>,
    input_aux: Vec<[f64; 2]>,
}

impl<'a> Subchannel<'a> {
    pub(crate) fn new(problem: &BinaryProblem<'a>) -> Self {
        let diff = problem
            .row0
            .iter()
            .zip(problem.row1)
            .map(|(a, b)| a - b)
            .collect();
        Self {
            row0: problem.row0,
            row1: problem.row1,
            diff,
            kind: problem.kind,
        }
    }

    #[inline]
    fn mix(&self, t: f64, y: usize) -> f64 {
        t * self.row0[y] + (1.0 - t) * self.row1[y]
    }

    fn axis(&self, t: Vec<f64>) -> Axis {
        let n = self.diff.len();
        let kind = self.kind;
        let mut mix = Vec::with_capacity(t.len() * n);
        for &v in &t {
            mix.extend((0..n).map(|y| self.mix(v, y)));
        }
        let aux = mix.iter().map(|&m| kind.aux(m)).collect();
        let input_aux = t.iter().map(|&v| [kind.aux(v), kind.aux(1.0 - v)]).collect();
        Axis {
            t,
            mix,
            aux,
            input_aux,
        }
    }

    /// `(D_out, D_in)` for the grid cell `(p_axis[i], q_axis[j])`.
    #[inline]
    fn cell(&self, pa: &Axis, i: usize, qa: &Axis, j: usize) -> (f64, f64) {
        let kind = self.kind;
        let (p, q) = (pa.t[i], qa.t[j]);
        let d = p - q;
        let [pa0, pa1] = pa.input_aux[i];
        let [qa0, qa1] = qa.input_aux[j];
        let den = kind.term(p, q, d, pa0, qa0) + kind.term(1.0 - p, 1.0 - q, -d, pa1, qa1);
        let n = self.diff.len();
        let (pm, qm) = (&pa.mix[i * n..(i + 1) * n], &qa.mix[j * n..(j + 1) * n]);
        let (px, qx) = (&pa.aux[i * n..(i + 1) * n], &qa.aux[j * n..(j + 1) * n]);
        let mut acc = CompensatedSum::default();
        for y in 0..n {
            let t = kind.term(pm[y], qm[y], d * self.diff[y], px[y], qx[y]);
            if t == f64::INFINITY {
                return (f64::INFINITY, den);
            }
            acc.add(t);
        }
        (acc.value().max(0.0), den)
    }

    /// `(D_out, D_in)` at an arbitrary point.
    pub(crate) fn point(&self, p: f64, q: f64) -> (f64, f64) {
        let kind = self.kind;
        let d = p - q;
        let num = kind.sum_terms(
            self.diff
                .iter()
                .enumerate()
                .map(|(y, &dy)| (self.mix(p, y), self.mix(q, y), d * dy)),
        );
        (num, binary_unchecked(kind, p, q))
    }

    pub(crate) fn diagonal(&self, q: f64) -> f64 {
        let mut acc = CompensatedSum::default();
        for (y, &dy) in self.diff.iter().enumerate() {
            if dy != 0.0 {
                acc.add(dy * dy / self.mix(q, y));
            }
        }
        q * (1.0 - q) * acc.value()
    }
}

#[inline]
fn admissible_ratio(num: f64, den: f64) -> Option<f64> {
    if den > 0.0 && den.is_finite() && num.is_finite() {
        Some(num / den)
    } else {
        None
    }
}

/// Output-to-input divergence ratio at the binary input pair `(p, q)`.
pub fn ratio_at(problem: &BinaryProblem<'_>, p: f64, q: f64) -> Result<f64> {
    if p.is_nan() || q.is_nan() {
        return Err(Error::NaN);
    }
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("weights out of range: p = {p}, q = {q}")));
    }
    let (num, den) = Subchannel::new(problem).point(p, q);
    admissible_ratio(num, den).ok_or(Error::UndefinedRatio { p, q, input: den })
}

/// Limit of [`ratio_at`] as `p → q`.
pub fn diagonal_limit(problem: &BinaryProblem<'_>, q: f64) -> Result<f64> {
    if problem.kind.second_derivative_at_one().is_none() {
        return Err(Error::UndefinedCurvature(problem.kind.name()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!("q must lie in (0, 1), got {q}")));
    }
    Ok(Subchannel::new(problem).diagonal(q))
}

/// Largest values seen so far, descending; ties keep insertion order.
struct TopK {
    k: usize,
    items: Vec<(f64, f64, f64)>,
}

impl TopK {
    fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn offer(&mut self, value: f64, p: f64, q: f64) {
        if self.items.len() == self.k && value <= self.items[self.k - 1].0 {
            return;
        }
        let pos = self.items.partition_point(|it| it.0 >= value);
        self.items.insert(pos, (value, p, q));
        self.items.truncate(self.k);
    }
}

struct Candidate {
    value: f64,
    p: f64,
    q: f64,
    half_width: f64,
}

/// Maximizes the binary ratio and its diagonal limit.
pub fn solve_binary(problem: &BinaryProblem<'_>, config: &SolverConfig) -> Result<BinarySolution> {
    config.validate()?;
    let kind = problem.kind;
    if kind == DivergenceKind::Tv && config.tv_fast_path {
        // D_out = |p − q| · TV(r0, r1) and D_in = |p − q| for every pair.
        let eta = crate::divergence::df(kind, problem.row0, problem.row1)?;
        return Ok(BinarySolution {
            eta: eta.clamp(0.0, 1.0),
            arg_p: 1.0,
            arg_q: 0.5,
            on_diagonal: false,
            evaluations: 1,
            achieved_tol: 0.0,
            budget_exhausted: false,
            raw_max: eta,
            dpi_anomaly: eta > 1.0 + DPI_SLACK,
            round_history: vec![eta],
        });
    }

    let sub = Subchannel::new(problem);
    let edges_ok = kind.slope_at_infinity().is_some();
    let (q_lo, q_hi) = if edges_ok { (0.0, 1.0) } else { (Q_FLOOR, 1.0 - Q_FLOOR) };
    let interior = linspace(config.margin, 1.0 - config.margin, config.grid);
    let coarse_spacing = (1.0 - 2.0 * config.margin) / (config.grid - 1) as f64;

    let with_edges = |v: &[f64]| {
        let mut out = Vec::with_capacity(v.len() + 2);
        out.push(0.0);
        out.extend_from_slice(v);
        out.push(1.0);
        out
    };
    let p_axis = sub.axis(with_edges(&interior));
    let q_axis = sub.axis(if edges_ok { with_edges(&interior) } else { interior.clone() });

    let mut evaluations: u64 = 0;
    let mut raw_max = 0.0f64;
    let mut top = TopK::new(config.keep);
    for i in 0..p_axis.t.len() {
        for j in 0..q_axis.t.len() {
            if p_axis.t[i] == q_axis.t[j] {
                continue;
            }
            evaluations += 1;
            let (num, den) = sub.cell(&p_axis, i, &q_axis, j);
            if let Some(r) = admissible_ratio(num, den) {
                raw_max = raw_max.max(r);
                top.offer(r, p_axis.t[i], q_axis.t[j]);
            }
        }
    }

    let zoom_half_width = 0.5 * config.zoom_factor * coarse_spacing;
    let mut cells: Vec<Candidate> = top
        .items
        .iter()
        .map(|&(value, p, q)| Candidate {
            value,
            p,
            q,
            half_width: zoom_half_width,
        })
        .collect();

    let use_diagonal = kind.second_derivative_at_one().is_some();
    let mut diag_cells: Vec<Candidate> = Vec::new();
    if use_diagonal {
        let mut dtop = TopK::new(config.keep);
        let scan = linspace(config.margin, 1.0 - config.margin, config.diagonal_points);
        let dspacing = (1.0 - 2.0 * config.margin) / (config.diagonal_points - 1) as f64;
        for &q in &scan {
            evaluations += 1;
            let v = sub.diagonal(q);
            raw_max = raw_max.max(v);
            dtop.offer(v, q, q);
        }
        diag_cells = dtop
            .items
            .iter()
            .map(|&(value, _, q)| Candidate {
                value,
                p: q,
                q,
                half_width: 0.5 * config.zoom_factor * dspacing,
            })
            .collect();
    }

    let running_best = |cells: &[Candidate], diag: &[Candidate]| {
        cells
            .iter()
            .chain(diag)
            .map(|c| c.value)
            .fold(0.0f64, f64::max)
    };
    let mut round_history = vec![running_best(&cells, &diag_cells)];

    let m = config.zoom_points;
    let round_cost = (cells.len() * m * m + diag_cells.len() * m) as u64;
    let mut achieved_tol = coarse_spacing;
    let mut budget_exhausted = false;
    let mut round = 0;
    while round < config.max_rounds && (round < config.min_rounds || achieved_tol > config.tol) {
        if evaluations + round_cost > config.budget {
            budget_exhausted = achieved_tol > config.tol;
            break;
        }
        round += 1;
        let mut spacing = 0.0f64;
        for c in &mut cells {
            let w = c.half_width;
            let pa = sub.axis(linspace((c.p - w).max(0.0), (c.p + w).min(1.0), m));
            let qa = sub.axis(linspace((c.q - w).max(q_lo), (c.q + w).min(q_hi), m));
            for i in 0..m {
                for j in 0..m {
                    if pa.t[i] == qa.t[j] {
                        continue;
                    }
                    evaluations += 1;
                    let (num, den) = sub.cell(&pa, i, &qa, j);
                    if let Some(r) = admissible_ratio(num, den) {
                        raw_max = raw_max.max(r);
                        if r > c.value {
                            c.value = r;
                            c.p = pa.t[i];
                            c.q = qa.t[j];
                        }
                    }
                }
            }
            spacing = spacing.max(2.0 * w / (m - 1) as f64);
            c.half_width = w / config.zoom_factor;
        }
        for c in &mut diag_cells {
            let w = c.half_width;
            let lo = (c.q - w).max(Q_FLOOR);
            let hi = (c.q + w).min(1.0 - Q_FLOOR);
            for q in linspace(lo, hi, m) {
                evaluations += 1;
                let v = sub.diagonal(q);
                raw_max = raw_max.max(v);
                if v > c.value {
                    c.value = v;
                    c.p = q;
                    c.q = q;
                }
            }
            spacing = spacing.max(2.0 * w / (m - 1) as f64);
            c.half_width = w / config.zoom_factor;
        }
        achieved_tol = spacing;
        round_history.push(running_best(&cells, &diag_cells));
    }

    let best_of = |cs: &[Candidate]| {
        cs.iter()
            .fold(None::<&Candidate>, |acc, c| match acc {
                Some(b) if b.value >= c.value => Some(b),
                _ => Some(c),
            })
            .map(|c| (c.value, c.p, c.q))
    };
    let grid_best = best_of(&cells).unwrap_or((0.0, 1.0, 0.5));
    let diag_best = best_of(&diag_cells);
    let (raw_eta, arg_p, arg_q, on_diagonal) = match diag_best {
        Some((v, _, q)) if v > grid_best.0 => (v, q, q, true),
        _ => (grid_best.0, grid_best.1, grid_best.2, false),
    };

    Ok(BinarySolution {
        eta: raw_eta.clamp(0.0, 1.0),
        arg_p,
        arg_q,
        on_diagonal,
        evaluations,
        achieved_tol,
        budget_exhausted,
        raw_max,
        dpi_anomaly: raw_max > 1.0 + DPI_SLACK,
        round_history,
    })
}
