use proptest::prelude::*;
use stablelab::drift::{mollifier_constant, DriftSpec, MollifiedDrift};
use stablelab::rng::stream_rng;
use stablelab::sampler::{draw_increment, sample_increments, StableParams};
use stablelab::sde::{integrate, IntegrateOptions};
use stablelab::spectral::{balakrishnan_power, heat_semigroup, resolvent_power};
use stablelab::stats::{ks_one_sample, ks_two_sample};
use stablelab::{Field, TorusGrid};
use std::f64::consts::PI;

const ALPHA: f64 = 1.5;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// CDF of the symmetric 1-d law with characteristic function `exp(-|k|^α)`.
fn stable_cdf(x: f64) -> f64 {
    let g = |k: f64| if k == 0.0 { x } else { (k * x).sin() / k * (-k.powf(ALPHA)).exp() };
    0.5 + simpson(g, 0.0, 40.0, 8000) / PI
}

fn component(seed: u64, dt: f64, n: usize) -> Vec<f64> {
    let b = sample_increments(&StableParams::new(ALPHA, 3, seed).unwrap(), dt, n).unwrap();
    b.rows().map(|r| r[0]).collect()
}

#[test]
fn marginal_matches_fourier_inversion_cdf() {
    let xs = component(5, 1.0, 20_000);
    let (d, p) = ks_one_sample(&xs, stable_cdf);
    assert!(p > 1e-3, "KS D = {d}, p = {p}");
}

#[test]
fn self_similar_scaling() {
    let dt = 0.3;
    let a: Vec<f64> = component(6, dt, 20_000).into_iter().map(|x| x * dt.powf(-1.0 / ALPHA)).collect();
    let b = component(7, 1.0, 20_000);
    let (_, p) = ks_two_sample(&a, &b);
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn independent_seeds_agree_in_law_and_differ_pathwise() {
    let a = component(8, 1.0, 20_000);
    let b = component(9, 1.0, 20_000);
    assert_ne!(a[..10], b[..10]);
    let (_, p) = ks_two_sample(&a, &b);
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn consecutive_increments_uncorrelated() {
    let n = 50_000;
    let b = sample_increments(&StableParams::new(ALPHA, 2, 10).unwrap(), 1.0, n).unwrap();
    let u: Vec<f64> = b.rows().map(|r| r[0].atan()).collect();
    let v: Vec<f64> = b.rows().map(|r| r[1].abs().atan()).collect();
    let corr = |x: &[f64], y: &[f64]| {
        let (mx, my) = (x.iter().sum::<f64>() / x.len() as f64, y.iter().sum::<f64>() / y.len() as f64);
        let c: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let sy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        c / (sx * sy).sqrt()
    };
    let bound = 4.0 / (n as f64).sqrt();
    assert!(corr(&u[..n - 1], &u[1..]).abs() < bound);
    let ua: Vec<f64> = u.iter().map(|x| x.abs()).collect();
    assert!(corr(&ua[..n - 1], &ua[1..]).abs() < bound);
    // Components share the clock, so their magnitudes correlate.
    assert!(corr(&ua, &v) > 10.0 * bound);
}

#[test]
fn mollifier_constant_against_simpson() {
    let areas = [2.0, 2.0 * PI, 4.0 * PI];
    for d in 1..=3 {
        let g = |r: f64| if r >= 1.0 { 0.0 } else { r.powi(d as i32 - 1) * (-1.0 / (1.0 - r * r)).exp() };
        let c = 1.0 / (areas[d - 1] * simpson(g, 0.0, 1.0, 20_000));
        let lib = mollifier_constant(d);
        assert!((lib - c).abs() / c < 1e-9, "d = {d}: {lib} vs {c}");
    }
}

#[test]
fn heat_semigroup_property_and_mass() {
    let g = TorusGrid::new(2, 4.0, 32).unwrap();
    let f = g.sample(|x| (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp());
    let (s, t) = (0.13, 0.31);
    let two = heat_semigroup(&g, ALPHA, t).unwrap().apply(&heat_semigroup(&g, ALPHA, s).unwrap().apply(&f).unwrap()).unwrap();
    let one = heat_semigroup(&g, ALPHA, s + t).unwrap().apply(&f).unwrap();
    assert!(two.rel_diff(&one) < 1e-13);
    assert!((one.integral().re - f.integral().re).abs() < 1e-12 * f.integral().re);
}

fn plane_wave(g: &TorusGrid, k: &[i64]) -> (Field, f64) {
    let w = PI / g.half_length;
    let f = g.sample(|x| (w * k.iter().zip(x).map(|(a, b)| *a as f64 * b).sum::<f64>()).cos());
    let kabs = w * (k.iter().map(|a| (a * a) as f64).sum::<f64>()).sqrt();
    (f, kabs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn balakrishnan_matches_eigenvalue_power(tau in 0.05f64..0.95, mu in 0.1f64..50.0, k0 in -15i64..15, k1 in -15i64..15) {
        let g = TorusGrid::new(2, 5.0, 32).unwrap();
        let (f, kabs) = plane_wave(&g, &[k0, k1]);
        let exact = f.scale((mu + kabs.powf(ALPHA)).powf(-tau));
        let quad = balakrishnan_power(&g, ALPHA, mu, tau, 16).unwrap().apply(&f).unwrap();
        prop_assert!(quad.rel_diff(&exact) < 1e-9);
        let spec = resolvent_power(&g, ALPHA, mu, tau).unwrap().apply(&f).unwrap();
        prop_assert!(spec.rel_diff(&exact) < 1e-12);
    }
}

fn smooth_drift(g: &TorusGrid) -> (DriftSpec, MollifiedDrift) {
    let s = DriftSpec::bounded_smooth(1.0, 2.0 * g.half_length, g.dim).unwrap();
    let m = MollifiedDrift::from_lattice(&s, s.sample(g).unwrap());
    (s, m)
}

#[test]
fn frozen_noise_follows_the_drift_ode() {
    let g = TorusGrid::new(3, 8.0, 64).unwrap();
    let (spec, b) = smooth_drift(&g);
    let x0 = [0.7, -1.3, 2.1];
    let (t, dt) = (1.0, 1e-3);
    let opts = IntegrateOptions { frozen_noise: true, ..Default::default() };
    let ens = integrate(&b, ALPHA, &x0, t, dt, 1, 0, &opts).unwrap();
    let rhs = |x: &[f64]| -> Vec<f64> { spec.eval(x).unwrap().into_iter().map(|v| -v).collect() };
    let mut x = x0.to_vec();
    let h = 1e-3;
    for _ in 0..1000 {
        let k1 = rhs(&x);
        let k2 = rhs(&x.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect::<Vec<_>>());
        let k3 = rhs(&x.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect::<Vec<_>>());
        let k4 = rhs(&x.iter().zip(&k3).map(|(a, k)| a + h * k).collect::<Vec<_>>());
        for j in 0..3 {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    let last = ens.times.len() - 1;
    let err: f64 = ens.state(0, last).iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-2, "Euler vs RK4 gap {err}");
    assert!(ens.recovered_noise(0, last).iter().all(|z| z.abs() < 1e-12));
}

#[test]
fn recovered_noise_equals_drawn_increments() {
    let g = TorusGrid::new(3, 8.0, 32).unwrap();
    let (_, b) = smooth_drift(&g);
    let (dt, steps, seed) = (0.01, 25, 77);
    let ens = integrate(&b, ALPHA, &[0.0; 3], dt * steps as f64, dt, 16, seed, &IntegrateOptions::default()).unwrap();
    let last = ens.times.len() - 1;
    for p in 0..16 {
        let mut rng = stream_rng(seed, p as u64);
        let mut z = [0.0; 3];
        let mut inc = [0.0; 3];
        for _ in 0..steps {
            draw_increment(ALPHA, dt, &mut rng, &mut inc);
            z.iter_mut().zip(&inc).for_each(|(a, c)| *a += c);
        }
        let rec = ens.recovered_noise(p, last);
        for j in 0..3 {
            assert!((rec[j] - z[j]).abs() < 1e-10, "path {p}: {} vs {}", rec[j], z[j]);
        }
    }
}

#[test]
fn drift_integral_is_additive_over_recorded_times() {
    let g = TorusGrid::new(3, 8.0, 32).unwrap();
    let (_, b) = smooth_drift(&g);
    let opts = IntegrateOptions { record_every: 10, ..Default::default() };
    let full = integrate(&b, ALPHA, &[0.5, 0.0, 0.0], 0.4, 0.01, 8, 3, &opts).unwrap();
    let coarse = integrate(&b, ALPHA, &[0.5, 0.0, 0.0], 0.4, 0.01, 8, 3, &IntegrateOptions::default()).unwrap();
    assert_eq!(full.times.len(), 5);
    for p in 0..8 {
        assert_eq!(full.integral(p, 4), coarse.integral(p, 1));
        let steps: Vec<f64> = (0..5).map(|k| full.abs_drift_integral[p * 5 + k]).collect();
        assert!(steps.windows(2).all(|w| w[1] >= w[0]));
        let bound = b.lattice.sup_norm() * 0.1;
        assert!(steps.windows(2).all(|w| w[1] - w[0] <= bound + 1e-12));
    }
}

#[test]
fn coupled_richardson_shows_first_weak_order() {
    let g = TorusGrid::new(3, 8.0, 32).unwrap();
    let (_, b) = smooth_drift(&g);
    let t = 0.5;
    let f = |x: &[f64]| (-x.iter().map(|v| v * v).sum::<f64>() / 4.0).exp();
    let mean = |dt: f64, sub: usize| {
        let opts = IntegrateOptions { noise_substeps: sub, ..Default::default() };
        let e = integrate(&b, ALPHA, &[1.0, 0.0, 0.0], t, dt, 20_000, 42, &opts).unwrap();
        let last = e.times.len() - 1;
        (0..e.n_paths).map(|p| f(&e.wrapped(p, last))).sum::<f64>() / e.n_paths as f64
    };
    let m: Vec<f64> = [(0.1, 4), (0.05, 2), (0.025, 1)].iter().map(|&(dt, s)| mean(dt, s)).collect();
    let ratio = (m[0] - m[1]).abs() / (m[1] - m[2]).abs();
    assert!((1.3..3.5).contains(&ratio), "successive differences ratio {ratio}, means {m:?}");
}
