use std::collections::BTreeSet;

use qresource_core::taskgen::generate_tasks;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DRAWS: usize = 100_000;

/// Upper 0.001 quantiles of the chi-square distribution, by degrees of freedom.
const CHI2_999: [f64; 10] = [
    10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124, 27.877, 29.588,
];

fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut coef = 1.0;
    for k in 0..=n {
        if k > 0 {
            coef *= (n - k + 1) as f64 / k as f64;
        }
        out.push(coef * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32));
    }
    out
}

#[test]
fn every_task_is_a_matching() {
    let ts = generate_tasks(9, DRAWS, 0.7, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    for t in ts.tasks() {
        let mut seen = BTreeSet::new();
        for (i, j) in t.pairs() {
            assert!(i < j && j < 9);
            assert!(seen.insert(i) && seen.insert(j));
        }
    }
}

#[test]
fn same_seed_same_tasks() {
    let a = generate_tasks(8, 50, 0.5, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    let b = generate_tasks(8, 50, 0.5, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn task_sizes_follow_binomial() {
    for (n_users, p, seed) in [(6, 0.8, 11), (10, 0.5, 12), (13, 0.3, 13)] {
        let ts = generate_tasks(n_users, DRAWS, p, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let trials = (n_users / 2) as u64;
        let mut observed = vec![0usize; trials as usize + 1];
        for t in ts.tasks() {
            observed[t.len()] += 1;
        }
        // pool sparse tail bins so every expected count is at least 5
        let mut bins: Vec<(f64, f64)> = Vec::new();
        let mut acc = (0.0, 0.0);
        for (k, q) in binomial_pmf(trials, p).into_iter().enumerate() {
            acc.0 += q * DRAWS as f64;
            acc.1 += observed[k] as f64;
            if acc.0 >= 5.0 {
                bins.push(acc);
                acc = (0.0, 0.0);
            }
        }
        if let Some(last) = bins.last_mut() {
            last.0 += acc.0;
            last.1 += acc.1;
        }
        let chi2: f64 = bins.iter().map(|(e, o)| (o - e).powi(2) / e).sum();
        let df = bins.len() - 1;
        assert!(chi2 < CHI2_999[df - 1], "N={n_users} p={p}: chi2 {chi2:.2} df {df}");
    }
}
