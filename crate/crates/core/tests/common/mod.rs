#![allow(dead_code)]

use std::sync::Arc;

use epiroom_core::{CountryConfig, Scenario};

/// Upper 0.001 critical values of the chi-square distribution, by degrees of freedom.
pub fn chi2_critical_001(df: usize) -> f64 {
    match df {
        1 => 10.828,
        2 => 13.816,
        3 => 16.266,
        4 => 18.467,
        5 => 20.515,
        6 => 22.458,
        7 => 24.322,
        8 => 26.124,
        9 => 27.877,
        _ => panic!("no table entry for df={df}"),
    }
}

/// Pearson statistic for observed counts against expected probabilities.
/// Categories with zero expected mass must have zero observations.
pub fn chi2(observed: &[u64], probs: &[f64]) -> (f64, usize) {
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut df = 0;
    for (&o, &p) in observed.iter().zip(probs) {
        if p == 0.0 {
            assert_eq!(o, 0, "observation in a zero-probability category");
            continue;
        }
        let e = p * n as f64;
        stat += (o as f64 - e).powi(2) / e;
        df += 1;
    }
    (stat, df - 1)
}

pub fn assert_fits(observed: &[u64], probs: &[f64], what: &str) {
    let (stat, df) = chi2(observed, probs);
    let critical = chi2_critical_001(df);
    assert!(stat < critical, "{what}: chi2 {stat:.2} >= {critical} (df {df})");
}

pub fn desk(houses: u32) -> Arc<CountryConfig> {
    Arc::new(CountryConfig {
        house_count: houses,
        ..CountryConfig::default()
    })
}

pub fn plain(horizon: u32) -> Scenario {
    Scenario {
        name: "plain".into(),
        horizon,
        seeds: vec![],
        actions: vec![],
    }
}
