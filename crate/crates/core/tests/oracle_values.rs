//! Reference values from an independent dense-grid search.
//!
//! The brute force below evaluates divergences straight from their
//! generators and scans a uniform grid of binary input pairs plus the
//! diagonal, without touching the library's solver.

use approx::assert_abs_diff_eq;
use sdpi_core::{eta_f, sandwich_bounds, Channel, DivergenceKind};

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum()
}

fn mix(ch: &Channel, t: f64) -> Vec<f64> {
    ch.row(0).iter().zip(ch.row(1)).map(|(a, b)| t * a + (1.0 - t) * b).collect()
}

/// Max of the binary KL ratio over an `n × n` grid and of the local
/// χ²-type ratio on the diagonal.
fn brute_force_kl(ch: &Channel, n: usize) -> f64 {
    let ts: Vec<f64> = (1..n).map(|i| i as f64 / n as f64).collect();
    let mixes: Vec<Vec<f64>> = ts.iter().map(|&t| mix(ch, t)).collect();
    let mut best: f64 = 0.0;
    for (i, &p) in ts.iter().enumerate() {
        for (j, &q) in ts.iter().enumerate() {
            if i == j {
                continue;
            }
            let num = kl(&mixes[i], &mixes[j]);
            let den = kl(&[p, 1.0 - p], &[q, 1.0 - q]);
            best = best.max(num / den);
        }
    }
    for (&q, m) in ts.iter().zip(&mixes) {
        let local: f64 = ch
            .row(0)
            .iter()
            .zip(ch.row(1))
            .zip(m)
            .filter(|(_, m)| **m > 0.0)
            .map(|((a, b), m)| (a - b).powi(2) / m)
            .sum();
        best = best.max(q * (1.0 - q) * local);
    }
    best
}

fn bsc(d: f64) -> Channel {
    Channel::from_rows(vec![vec![1.0 - d, d], vec![d, 1.0 - d]]).unwrap()
}

fn bec(e: f64) -> Channel {
    Channel::from_rows(vec![vec![1.0 - e, e, 0.0], vec![0.0, e, 1.0 - e]]).unwrap()
}

#[test]
fn bsc_matches_brute_force() {
    for (delta, expected) in [(0.05, 0.81), (0.1, 0.64), (0.25, 0.25)] {
        let ch = bsc(delta);
        let oracle = brute_force_kl(&ch, 1024);
        assert_abs_diff_eq!(oracle, expected, epsilon = 1e-6);
        assert_abs_diff_eq!(eta_f(&ch, DivergenceKind::Kl, 1e-6).unwrap().eta, oracle, epsilon = 1e-6);
    }
}

#[test]
fn bec_matches_brute_force() {
    for eps in [0.25, 0.5] {
        let ch = bec(eps);
        let oracle = brute_force_kl(&ch, 1024);
        let eta = eta_f(&ch, DivergenceKind::Kl, 1e-6).unwrap().eta;
        // The grid approaches 1 − ε only as one weight reaches the edge.
        assert!(oracle <= 1.0 - eps + 1e-9 && oracle > 1.0 - eps - 1e-2, "{oracle}");
        assert!(eta >= oracle - 1e-9);
        assert_abs_diff_eq!(eta, 1.0 - eps, epsilon = 1e-4);
    }
}

#[test]
fn random_binary_input_channel_matches_brute_force() {
    let ch = Channel::from_rows(vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.2, 0.6]]).unwrap();
    let oracle = brute_force_kl(&ch, 1024);
    let eta = eta_f(&ch, DivergenceKind::Kl, 1e-6).unwrap().eta;
    assert!(eta >= oracle - 1e-9, "{eta} < {oracle}");
    assert_abs_diff_eq!(eta, oracle, epsilon = 1e-3);
}

#[test]
fn bsc_bounds_by_hand() {
    // d = 2 − 4·√(0.09) = 0.8, g(0.4) = 0.8·0.8 = 0.64.
    let b = sandwich_bounds(&bsc(0.1));
    assert_abs_diff_eq!(b.lower, 0.4, epsilon = 1e-12);
    assert_abs_diff_eq!(b.upper_g, 0.64, epsilon = 1e-12);
    assert_abs_diff_eq!(b.upper_diam, 0.8, epsilon = 1e-12);
}

#[test]
fn chi2_example() {
    // χ²((1/2,1/2) ‖ (1/4,3/4)) = (1/4)²/(1/4) + (1/4)²/(3/4) = 1/3.
    let v = sdpi_core::df(DivergenceKind::Chi2, &[0.5, 0.5], &[0.25, 0.75]).unwrap();
    assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
}
