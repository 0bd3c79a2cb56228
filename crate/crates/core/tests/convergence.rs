mod common;

use crfmnes::{CrFmNes, StrategyConfig};

/// `ln(best_fval)` per generation until `stop` or `max_gens`.
fn sphere_trace(dim: usize, seed: u64, stop: f64, max_gens: usize) -> Vec<f64> {
    let mut es = CrFmNes::new(StrategyConfig::new(vec![3.0; dim], 2.0).with_seed(seed)).unwrap();
    let mut trace = Vec::new();
    for _ in 0..max_gens {
        let xs = es.ask().unwrap();
        let f: Vec<f64> = xs.iter().map(|x| common::sphere(x)).collect();
        es.tell(&f).unwrap();
        let best = es.best().unwrap().1;
        trace.push(best.ln());
        if best <= stop {
            break;
        }
    }
    trace
}

fn r_squared(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn sphere_converges_linearly() {
    for dim in [10, 40] {
        let traces: Vec<Vec<f64>> = (0..10).map(|s| sphere_trace(dim, s, 1e-30, 20_000)).collect();
        let len = traces.iter().map(Vec::len).min().unwrap();
        let med: Vec<f64> = (0..len)
            .map(|g| median(traces.iter().map(|t| t[g]).collect()))
            .collect();
        let burn_in = len / 5;
        let r2 = r_squared(&med[burn_in..]);
        let slope = (med[len - 1] - med[burn_in]) / (len - 1 - burn_in) as f64;
        println!("d={dim}: {len} generations, R² = {r2:.5}, slope = {slope:.4}");
        assert!(slope < 0.0);
        assert!(r2 > 0.95, "d={dim}: R² = {r2}");
    }
}
