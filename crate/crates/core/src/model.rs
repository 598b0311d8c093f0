//! Distributions, channels, and the channel file format.
//!
//! Alphabets are index sets `0..n`. A [`Channel`] is a row-stochastic matrix
//! whose row `x` is the output distribution given input letter `x`.
//!
//! Channel files are UTF-8 JSON objects:
//!
//! ```json
//! {"name": "bsc01", "rows": [[0.9, 0.1], [0.1, 0.9]]}
//! ```
//!
//! `rows` is required, `name` is optional, and no other keys are accepted.

use serde::{Deserialize, Serialize};

use crate::divergence::DivergenceKind;
use crate::{Error, Result};

/// Absolute tolerance on the sum of a probability vector.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Entrywise tolerance under which two distributions count as equal.
pub const EQUALITY_TOLERANCE: f64 = 1e-12;

/// A probability vector over a finite alphabet.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty alphabet".into()));
        }
        if let Some(&v) = probs.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {v}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("sum {sum}")));
        }
        Ok(Self(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Distribution {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A finite discrete memoryless channel.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    rows: Vec<Distribution>,
    name: Option<String>,
}

impl Channel {
    pub fn new(rows: Vec<Distribution>, name: Option<String>) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyChannel)?;
        let expected = first.len();
        for (row, r) in rows.iter().enumerate() {
            if r.len() != expected {
                return Err(Error::RaggedRow {
                    row,
                    expected,
                    found: r.len(),
                });
            }
        }
        Ok(Self { rows, name })
    }

    /// Builds a channel from raw rows, validating every entry and row sum.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        build(rows, None, false)
    }

    pub fn input_size(&self) -> usize {
        self.rows.len()
    }

    pub fn output_size(&self) -> usize {
        self.rows[0].len()
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn rows(&self) -> &[Distribution] {
        &self.rows
    }

    pub fn row(&self, x: usize) -> &[f64] {
        self.rows[x].probs()
    }

    /// Output distribution `W∘P` for an input distribution `P`.
    pub fn push_forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_size() {
            return Err(Error::DimensionMismatch(input.len(), self.input_size()));
        }
        let mut out = vec![0.0; self.output_size()];
        for (w, row) in input.iter().zip(&self.rows) {
            for (o, r) in out.iter_mut().zip(row.probs()) {
                *o += w * r;
            }
        }
        Ok(out)
    }

    /// `W∘P − W∘Q` for probability vectors `P`, `Q`, accumulated as
    /// `Σ_x (P(x) − Q(x))·(W_x − W_0)`. The dropped `W_0` term vanishes
    /// because both inputs sum to one; the rest avoids cancellation for
    /// nearby inputs and is exactly zero when all rows coincide.
    pub(crate) fn push_forward_difference(&self, p: &[f64], q: &[f64]) -> Vec<f64> {
        let base = self.row(0);
        let mut out = vec![0.0; self.output_size()];
        for ((a, b), row) in p.iter().zip(q).zip(&self.rows).skip(1) {
            let d = a - b;
            if d != 0.0 {
                for ((o, r), r0) in out.iter_mut().zip(row.probs()).zip(base) {
                    *o += d * (r - r0);
                }
            }
        }
        out
    }

    /// A copy with rows and columns reordered: new row `i` is old row
    /// `row_order[i]`, new column `j` is old column `col_order[j]`.
    pub fn permuted(&self, row_order: &[usize], col_order: &[usize]) -> Result<Self> {
        if row_order.len() != self.input_size() {
            return Err(Error::DimensionMismatch(row_order.len(), self.input_size()));
        }
        if col_order.len() != self.output_size() {
            return Err(Error::DimensionMismatch(col_order.len(), self.output_size()));
        }
        let rows = row_order
            .iter()
            .map(|&x| {
                let r = self.row(x);
                Distribution(col_order.iter().map(|&y| r[y]).collect())
            })
            .collect();
        Channel::new(rows, self.name.clone())
    }

    /// Serializes to the channel file format.
    pub fn to_json(&self) -> String {
        let file = ChannelFile {
            rows: self.rows.iter().map(|r| r.probs().to_vec()).collect(),
            name: self.name.clone(),
        };
        serde_json::to_string(&file).expect("finite floats always serialize")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    rows: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
}

/// Parses a channel file. With `normalize`, each row is divided by its sum
/// before validation; otherwise rows must already sum to 1 within
/// [`SUM_TOLERANCE`].
pub fn parse_channel(text: &str, normalize: bool) -> Result<Channel> {
    let file: ChannelFile =
        serde_json::from_str(text).map_err(|e| Error::Syntax(e.to_string()))?;
    build(file.rows, file.name, normalize)
}

fn build(rows: Vec<Vec<f64>>, name: Option<String>, normalize: bool) -> Result<Channel> {
    let expected = rows.first().ok_or(Error::EmptyChannel)?.len();
    if expected == 0 {
        return Err(Error::RaggedRow {
            row: 0,
            expected: 1,
            found: 0,
        });
    }
    let mut out = Vec::with_capacity(rows.len());
    for (row, mut r) in rows.into_iter().enumerate() {
        if r.len() != expected {
            return Err(Error::RaggedRow {
                row,
                expected,
                found: r.len(),
            });
        }
        for (col, &value) in r.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::BadEntry { row, col, value });
            }
        }
        let sum: f64 = r.iter().sum();
        if normalize {
            if sum <= 0.0 {
                return Err(Error::ZeroRow { row });
            }
            for v in &mut r {
                *v /= sum;
            }
        } else if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::RowSum {
                row,
                sum,
                tol: SUM_TOLERANCE,
            });
        }
        out.push(Distribution(r));
    }
    Channel::new(out, name)
}

/// Whether `(p, q)` is an admissible input pair for `kind` on `channel`:
/// `p ≠ q` and `D_f(p‖q) < ∞`.
pub fn validate_pair(p: &[f64], q: &[f64], channel: &Channel, kind: DivergenceKind) -> Result<bool> {
    let n = channel.input_size();
    if p.len() != n {
        return Err(Error::DimensionMismatch(p.len(), n));
    }
    if q.len() != n {
        return Err(Error::DimensionMismatch(q.len(), n));
    }
    let distinct = p
        .iter()
        .zip(q)
        .any(|(a, b)| (a - b).abs() > EQUALITY_TOLERANCE);
    if !distinct {
        return Ok(false);
    }
    if kind.slope_at_infinity().is_none() && p.iter().zip(q).any(|(&a, &b)| a > 0.0 && b == 0.0) {
        return Ok(false);
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kl() -> DivergenceKind {
        DivergenceKind::Kl
    }

    #[test]
    fn parses_identity_and_bsc() {
        let id = parse_channel(r#"{"rows": [[1.0, 0.0], [0.0, 1.0]]}"#, false).unwrap();
        assert_eq!(id.input_size(), 2);
        assert_eq!(id.row(1), &[0.0, 1.0]);

        let bsc = parse_channel(r#"{"rows": [[0.9, 0.1], [0.1, 0.9]], "name": "bsc"}"#, false)
            .unwrap();
        assert_eq!(bsc.name(), Some("bsc"));
        assert_eq!(bsc.row(0), &[0.9, 0.1]);
    }

    #[test]
    fn rejects_bad_row_sum_unless_normalized() {
        let text = r#"{"rows": [[0.5, 0.6]]}"#;
        assert!(matches!(parse_channel(text, false), Err(Error::RowSum { .. })));
        let ch = parse_channel(text, true).unwrap();
        assert!((ch.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(matches!(parse_channel("{", false), Err(Error::Syntax(_))));
        assert!(matches!(
            parse_channel(r#"{"rows": [[1.0]], "extra": 1}"#, false),
            Err(Error::Syntax(_))
        ));
        assert!(matches!(
            parse_channel(r#"{"rows": [[1.0, 0.0], [1.0]]}"#, false),
            Err(Error::RaggedRow { row: 1, .. })
        ));
        assert!(matches!(
            parse_channel(r#"{"rows": [[1.5, -0.5]]}"#, false),
            Err(Error::BadEntry { col: 1, .. })
        ));
        assert!(matches!(
            parse_channel(r#"{"rows": [[0.0, 0.0]]}"#, true),
            Err(Error::ZeroRow { row: 0 })
        ));
        assert!(matches!(parse_channel(r#"{"rows": []}"#, false), Err(Error::EmptyChannel)));
        assert!(matches!(parse_channel(r#"{"name": "x"}"#, false), Err(Error::Syntax(_))));
    }

    #[test]
    fn round_trips_through_text() {
        let text = r#"{"rows":[[0.1234567890123456,0.8765432109876544],[0.3,0.7]],"name":"t"}"#;
        let a = parse_channel(text, false).unwrap();
        let b = parse_channel(&a.to_json(), false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pair_validation() {
        let ch = Channel::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(!validate_pair(&[0.5, 0.5], &[0.5, 0.5], &ch, kl()).unwrap());
        assert!(validate_pair(&[1.0, 0.0], &[0.5, 0.5], &ch, kl()).unwrap());
        assert!(!validate_pair(&[0.5, 0.5], &[1.0, 0.0], &ch, kl()).unwrap());
        assert!(validate_pair(&[0.5, 0.5], &[1.0, 0.0], &ch, DivergenceKind::Hellinger2).unwrap());
        assert!(matches!(
            validate_pair(&[1.0], &[1.0, 0.0], &ch, kl()),
            Err(Error::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn push_forward_mixes_rows() {
        let ch = Channel::from_rows(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let out = ch.push_forward(&[0.5, 0.5]).unwrap();
        assert!((out[0] - 0.5).abs() < 1e-15);
        let d = ch.push_forward_difference(&[1.0, 0.0], &[0.0, 1.0]);
        assert!((d[0] - 0.8).abs() < 1e-15 && (d[1] + 0.8).abs() < 1e-15);
    }
}
