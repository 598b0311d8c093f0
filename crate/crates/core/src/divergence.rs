//! f-divergences on finite alphabets.
//!
//! `D_f(P‖Q) = Σ_x Q(x) f(P(x)/Q(x))` with the conventions `0·f(0/0) = 0` and
//! `0·f(a/0) = a · lim_{t→∞} f(t)/t`. Supported generators:
//!
//! | kind         | f(t)            | f''(1) | f(t)/t at ∞ |
//! |--------------|-----------------|--------|-------------|
//! | `kl`         | t ln t          | 1      | ∞           |
//! | `tv`         | \|t − 1\| / 2   | –      | 1/2         |
//! | `chi2`       | (t − 1)²        | 2      | ∞           |
//! | `hellinger2` | (1 − √t)²       | 1/2    | 1           |
//!
//! Each term is evaluated from `(P(x), Q(x), P(x) − Q(x))` with the generator
//! shifted by `f'(1)(t − 1)`, which leaves the sum unchanged for probability
//! vectors but makes every term nonnegative and keeps nearly equal arguments
//! free of cancellation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numeric::CompensatedSum;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DivergenceKind {
    Kl,
    Tv,
    Chi2,
    Hellinger2,
}

impl DivergenceKind {
    pub const ALL: [DivergenceKind; 4] = [
        DivergenceKind::Kl,
        DivergenceKind::Tv,
        DivergenceKind::Chi2,
        DivergenceKind::Hellinger2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DivergenceKind::Kl => "kl",
            DivergenceKind::Tv => "tv",
            DivergenceKind::Chi2 => "chi2",
            DivergenceKind::Hellinger2 => "hellinger2",
        }
    }

    /// `f''(1)`, or `None` where the generator has a kink at 1.
    pub fn second_derivative_at_one(self) -> Option<f64> {
        match self {
            DivergenceKind::Kl => Some(1.0),
            DivergenceKind::Tv => None,
            DivergenceKind::Chi2 => Some(2.0),
            DivergenceKind::Hellinger2 => Some(0.5),
        }
    }

    /// `lim_{t→∞} f(t)/t`, or `None` when it is infinite.
    pub fn slope_at_infinity(self) -> Option<f64> {
        match self {
            DivergenceKind::Kl | DivergenceKind::Chi2 => None,
            DivergenceKind::Tv => Some(0.5),
            DivergenceKind::Hellinger2 => Some(1.0),
        }
    }

    /// Per-entry value cached alongside a probability so that grid sweeps
    /// evaluate transcendental functions once per axis point, not per cell.
    #[inline]
    pub(crate) fn aux(self, x: f64) -> f64 {
        match self {
            DivergenceKind::Kl => {
                if x > 0.0 {
                    x.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            DivergenceKind::Hellinger2 => x.sqrt(),
            DivergenceKind::Tv | DivergenceKind::Chi2 => 0.0,
        }
    }

    /// One summand `Q f(P/Q)` given `a = P(x)`, `b = Q(x)`, `diff = a − b`
    /// and the cached [`aux`](Self::aux) values of `a` and `b`.
    #[inline]
    pub(crate) fn term(self, a: f64, b: f64, diff: f64, aux_a: f64, aux_b: f64) -> f64 {
        match self {
            DivergenceKind::Kl => {
                if b <= 0.0 {
                    if a > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else if a <= 0.0 {
                    b
                } else {
                    let delta = diff / b;
                    if delta.abs() < KL_SERIES_RADIUS {
                        b * kl_series(delta)
                    } else {
                        a * (aux_a - aux_b) - diff
                    }
                }
            }
            DivergenceKind::Tv => 0.5 * diff.abs(),
            DivergenceKind::Chi2 => {
                if b <= 0.0 {
                    if a > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    diff * diff / b
                }
            }
            DivergenceKind::Hellinger2 => {
                let s = aux_a + aux_b;
                if s > 0.0 {
                    diff * diff / (s * s)
                } else {
                    0.0
                }
            }
        }
    }

    /// Sum of [`term`](Self::term) over `(a, b, diff)` triples.
    pub(crate) fn sum_terms<I>(self, terms: I) -> f64
    where
        I: IntoIterator<Item = (f64, f64, f64)>,
    {
        let mut acc = CompensatedSum::default();
        for (a, b, diff) in terms {
            let t = self.term(a, b, diff, self.aux(a), self.aux(b));
            if t == f64::INFINITY {
                return f64::INFINITY;
            }
            acc.add(t);
        }
        acc.value().max(0.0)
    }
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DivergenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kl" => Ok(DivergenceKind::Kl),
            "tv" => Ok(DivergenceKind::Tv),
            "chi2" => Ok(DivergenceKind::Chi2),
            "hellinger2" => Ok(DivergenceKind::Hellinger2),
            other => Err(Error::InvalidArgument(format!(
                "unknown divergence '{other}' (expected kl, tv, chi2, hellinger2)"
            ))),
        }
    }
}

const KL_SERIES_RADIUS: f64 = 1e-2;

/// `(1 + δ) ln(1 + δ) − δ = Σ_{k≥2} (−1)^k δ^k / (k(k − 1))` for small `δ`.
#[inline]
fn kl_series(delta: f64) -> f64 {
    // Horner form through k = 10; the tail is below δ^11/110.
    let d = delta;
    d * d
        * (1.0 / 2.0
            + d * (-1.0 / 6.0
                + d * (1.0 / 12.0
                    + d * (-1.0 / 20.0
                        + d * (1.0 / 30.0
                            + d * (-1.0 / 42.0
                                + d * (1.0 / 56.0 + d * (-1.0 / 72.0 + d * (1.0 / 90.0)))))))))
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NaN);
    }
    Ok(())
}

/// `D_f(P‖Q)` in nats; `+∞` when `P` has mass where `Q` has none and the
/// generator grows superlinearly.
pub fn df(kind: DivergenceKind, p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(p.len(), q.len()));
    }
    check_finite(p)?;
    check_finite(q)?;
    Ok(kind.sum_terms(p.iter().zip(q).map(|(&a, &b)| (a, b, a - b))))
}

/// `D_f(Ber(p)‖Ber(q))`, the divergence between two-point distributions
/// `(p, 1 − p)` and `(q, 1 − q)`.
pub fn df_binary(kind: DivergenceKind, p: f64, q: f64) -> Result<f64> {
    if p.is_nan() || q.is_nan() {
        return Err(Error::NaN);
    }
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!(
            "binary weights must lie in [0, 1], got p = {p}, q = {q}"
        )));
    }
    Ok(binary_unchecked(kind, p, q))
}

#[inline]
pub(crate) fn binary_unchecked(kind: DivergenceKind, p: f64, q: f64) -> f64 {
    kind.sum_terms([(p, q, p - q), (1.0 - p, 1.0 - q, q - p)])
}

/// Binary entropy in nats, `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> f64 {
    let mut h = 0.0;
    if x > 0.0 {
        h -= x * x.ln();
    }
    if x < 1.0 {
        h -= (1.0 - x) * (1.0 - x).ln();
    }
    h
}

/// Mutual information of a joint distribution given as a matrix, in nats.
pub fn mutual_information(joint: &[Vec<f64>]) -> Result<f64> {
    let cols = joint.first().map_or(0, Vec::len);
    let mut total = 0.0;
    for row in joint {
        if row.len() != cols {
            return Err(Error::DimensionMismatch(row.len(), cols));
        }
        for &v in row {
            if v.is_nan() {
                return Err(Error::NaN);
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry(v));
            }
            total += v;
        }
    }
    if (total - 1.0).abs() > crate::model::SUM_TOLERANCE {
        return Err(Error::InvalidDistribution(format!("joint sums to {total}")));
    }
    let row_marginal: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let col_marginal: Vec<f64> = (0..cols).map(|j| joint.iter().map(|r| r[j]).sum()).collect();
    let mut acc = CompensatedSum::default();
    for (row, &ra) in joint.iter().zip(&row_marginal) {
        for (&v, &cb) in row.iter().zip(&col_marginal) {
            if v > 0.0 {
                acc.add(v * (v / (ra * cb)).ln());
            }
        }
    }
    Ok(acc.value().max(0.0))
}
