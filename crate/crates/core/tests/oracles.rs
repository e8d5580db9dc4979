// SPDX-License-Identifier: Apache-2.0

use cubegof_core::limits::PoissonAveragedCurve;
use cubegof_core::mgrid::{bracket, is_grid_point};
use cubegof_core::null::{fit_asymptote, sample_statistic, tabulate_null, TabulatedNull, ASYMPTOTIC_THRESHOLD};
use cubegof_core::poisson::sample_count;
use cubegof_core::rng::stream;
use cubegof_core::source::scalar_cdf;
use cubegof_core::special::normal_cdf;
use cubegof_core::stats::pcs_statistic;
use cubegof_core::{Error, MemoryNulls, OrderedSample, Sequential, TestId};
use rand::Rng;

const TRIALS: u64 = 100_000;

fn max_dev(table: &TabulatedNull, lo: f64, hi: f64, exact: impl Fn(f64) -> f64) -> f64 {
    (0..=2000)
        .map(|i| lo + (hi - lo) * i as f64 / 2000.0)
        .map(|t| (table.eval(t) - exact(t)).abs())
        .fold(0.0, f64::max)
}

fn ks_distance(values: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn pcs_single_point_closed_form() {
    // One point u: T = -ln(u (1 - u)), so P(T <= t) = sqrt(1 - 4 e^{-t}) for t >= ln 4.
    let table = tabulate_null(TestId::Pcs, 1, TRIALS, 11, &Sequential).unwrap();
    let exact = |t: f64| if t < 4f64.ln() { 0.0 } else { (1.0 - 4.0 * (-t).exp()).sqrt() };
    let d = max_dev(&table, 1.0, 12.0, exact);
    assert!(d < 0.006, "max deviation {d}");
}

#[test]
fn single_point_ks_and_max_gap_closed_form() {
    // Both reduce to max(u, 1 - u), uniform on [1/2, 1].
    for test in [TestId::Ks, TestId::MaxGap] {
        let table = tabulate_null(test, 1, TRIALS, 12, &Sequential).unwrap();
        let d = max_dev(&table, 0.4, 1.1, |t| (2.0 * t - 1.0).clamp(0.0, 1.0));
        assert!(d < 0.006, "{test}: max deviation {d}");
    }
}

#[test]
fn off_grid_interpolation_matches_direct_tabulation() {
    let m = 230;
    assert!(!is_grid_point(m));
    let (lo, hi) = bracket(m).unwrap();
    let mut src = MemoryNulls::new();
    for g in [lo, hi] {
        src.insert(tabulate_null(TestId::Pcs, g, TRIALS, 13, &Sequential).unwrap());
    }
    let mut direct = sample_statistic(TestId::Pcs, m, 50_000, 14, &Sequential);
    let d = ks_distance(&mut direct, |t| scalar_cdf(&src, TestId::Pcs, m, t).unwrap());
    assert!(d < 0.01, "KS distance {d} between interpolated and direct null at m = {m}");
}

#[test]
fn pcs_asymptote_is_normal_with_monotone_mean() {
    let grid = [ASYMPTOTIC_THRESHOLD, 2 * ASYMPTOTIC_THRESHOLD, 4 * ASYMPTOTIC_THRESHOLD];
    let a = fit_asymptote(TestId::Pcs, &grid, 20_000, 15, &Sequential).unwrap();
    let (_, means, _) = a.grid();
    assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");

    // At the threshold the residual skewness alone costs about 0.011 in KS
    // distance; it shrinks like 1/sqrt(m).
    for (m, trials, tol) in [(ASYMPTOTIC_THRESHOLD, 100_000, 0.015), (15_000, 20_000, 0.015), (40_000, 40_000, 0.01)] {
        let (mean, sd) = a.moments(m).unwrap();
        let mut direct = sample_statistic(TestId::Pcs, m, trials, 16, &Sequential);
        let d = ks_distance(&mut direct, |t| normal_cdf((t - mean) / sd));
        assert!(d < tol, "m = {m}: KS distance {d} from the fitted normal");
    }

    assert!(matches!(a.moments(5000), Err(Error::BelowAsymptoticThreshold { .. })));
    assert!(fit_asymptote(TestId::Pcs, &[500], 4000, 15, &Sequential).is_err());
    assert!(fit_asymptote(TestId::Slss, &grid, 4000, 15, &Sequential).is_err());
}

#[test]
fn poisson_averaged_pcs_matches_direct_simulation() {
    let mut src = MemoryNulls::new();
    for m in 1..=80 {
        src.insert(tabulate_null(TestId::Pcs, m, TRIALS, 17, &Sequential).unwrap());
    }
    let obs = OrderedSample::new(vec![0.05, 0.1, 0.12, 0.3, 0.31, 0.33, 0.7, 0.95]).unwrap();
    let t_obs = pcs_statistic(&obs);
    let curve = PoissonAveragedCurve::from_sample(&src, TestId::Pcs, obs.values()).unwrap();
    let mut rng = stream(18, &[]);
    let draws = 200_000;
    for mu in [3.0, 8.0, 20.0] {
        let mut below = 0usize;
        for _ in 0..draws {
            let m = sample_count(&mut rng, mu);
            if m == 0 {
                continue;
            }
            let s = OrderedSample::new((0..m).map(|_| rng.random::<f64>()).collect()).unwrap();
            below += (pcs_statistic(&s) <= t_obs) as usize;
        }
        let mc = below as f64 / draws as f64;
        let f = curve.cdf(mu).unwrap();
        assert!((f - mc).abs() < 0.005, "mu = {mu}: averaged {f}, direct {mc}");
    }
}
