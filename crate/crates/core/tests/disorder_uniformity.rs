use rydchain_core::geometry::{sample_seed, ChainGeometry};

/// Kolmogorov-Smirnov distance of `u` (sorted in place) from U(0, 1).
fn ks_uniform(u: &mut [f64]) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
        .fold(0.0, f64::max)
}

fn shifts(w: f64, seeds: u64, atoms: usize) -> Vec<f64> {
    let d = 8.0;
    let mut out = Vec::with_capacity(seeds as usize * atoms);
    for s in 0..seeds {
        let g = ChainGeometry::disordered(atoms, d, w, sample_seed(99, s)).unwrap();
        out.extend(g.positions_um().iter().enumerate().map(|(i, x)| (x / d - i as f64 + w) / (2.0 * w)));
    }
    out
}

#[test]
fn disorder_is_uniform_at_strong_disorder() {
    let mut u = shifts(0.45, 1000, 100);
    assert_eq!(u.len(), 100_000);
    assert!(u.iter().all(|x| (0.0..=1.0).contains(x)));
    let d = ks_uniform(&mut u);
    // 1% critical value of the one-sample KS statistic.
    let crit = 1.628 / (u.len() as f64).sqrt();
    assert!(d < crit, "KS distance {d} exceeds {crit}");
}

#[test]
fn ks_detects_nonuniform_input() {
    let mut skewed: Vec<f64> = (0..10_000).map(|i| (i as f64 / 10_000.0).powi(2)).collect();
    assert!(ks_uniform(&mut skewed) > 0.1);
}

#[test]
fn atoms_draw_independent_streams() {
    let a = shifts(0.3, 1, 50);
    let b = shifts(0.3, 1, 50);
    assert_eq!(a, b);
    let g1 = ChainGeometry::disordered(20, 8.0, 0.3, 1).unwrap();
    let g2 = ChainGeometry::disordered(20, 8.0, 0.3, 2).unwrap();
    assert_ne!(g1.positions_um(), g2.positions_um());
}
