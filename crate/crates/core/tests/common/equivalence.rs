#![allow(dead_code)]

use super::oracle::{self, Consts};
use rydchain_core::basis::{enumerate_sector, InteractionOrder, MemoryBudget};
use rydchain_core::coupling::{natural_time_unit_um, CouplingConstants, BOHR_PER_MICROMETER};
use rydchain_core::dynamics::{evolve_state, fidelity_series, initial_overlaps, natural_energies, QuenchSpec};
use rydchain_core::geometry::ChainGeometry;
use rydchain_core::hamiltonian::assemble;
use rydchain_core::spectral::{diagonalize, Parallelism};

pub const TOL: f64 = 1e-8;

pub fn consts(c: &CouplingConstants) -> Consts {
    Consts {
        mu: c.mu,
        nu: c.nu,
        gamma: c.gamma,
        delta: c.delta,
        alpha: c.alpha,
        hop: [c.hopping.p_s, c.hopping.p_sprime, c.hopping.s_sprime],
    }
}

/// Largest deviation across basis, matrix, spectrum and evolved amplitudes.
/// Matrix and spectrum deviations are relative to max(1, largest |H| entry).
pub fn compare(n: usize, order: InteractionOrder, geometry: &ChainGeometry, c: &CouplingConstants) -> f64 {
    let k = order.value();
    let basis = enumerate_sector(n, order, MemoryBudget::default()).unwrap();
    let states = oracle::brute_basis(n, k);
    let labels: Vec<String> = basis.states().iter().map(|s| s.to_string()).collect();
    let expected: Vec<String> = states.iter().map(|s| oracle::label(s)).collect();
    assert_eq!(labels, expected, "basis n={n} order={k}");

    let oc = consts(c);
    let x_bohr: Vec<f64> = geometry.positions_um().iter().map(|x| x * BOHR_PER_MICROMETER).collect();
    let tu = oracle::natural_time_unit(k, geometry.spacing_um() * BOHR_PER_MICROMETER, &oc);
    let tu_core = natural_time_unit_um(order, geometry.spacing_um(), c).unwrap();
    let mut worst = ((tu - tu_core) / tu).abs();

    let dim = states.len();
    let h_ref: Vec<f64> = oracle::brute_hamiltonian(&states, &x_bohr, k, &oc).iter().map(|v| v * tu).collect();
    let scale = h_ref.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let h = assemble(&basis, geometry, c, MemoryBudget::default()).unwrap();
    for (a, b) in h.as_slice().iter().zip(&h_ref) {
        worst = worst.max((a * tu - b).abs() / scale);
    }

    let (vals_ref, _) = oracle::jacobi_eigen(&h_ref, dim);
    let eig = diagonalize(&h, Parallelism::Sequential).unwrap().with_initial_state(0).unwrap();
    let energies = natural_energies(&eig, tu_core);
    for (a, b) in energies.iter().zip(&vals_ref) {
        worst = worst.max((a - b).abs() / scale);
    }

    let quench = QuenchSpec::all_p(&basis, vec![0.0, 0.3, 1.7, 12.0]).unwrap();
    let coeffs = initial_overlaps(&eig, &basis, &quench).unwrap();
    let fid = fidelity_series(&coeffs, &energies, &quench.times);
    for (ti, &t) in quench.times.iter().enumerate() {
        let psi = evolve_state(&eig, &coeffs, &energies, t);
        let psi_ref = oracle::evolve_basis_state(&h_ref, dim, t, 0);
        for (a, (re, im)) in psi.iter().zip(&psi_ref) {
            worst = worst.max((a.re - re).abs()).max((a.im - im).abs());
        }
        let f_ref = psi_ref[0].0.powi(2) + psi_ref[0].1.powi(2);
        worst = worst.max((fid[ti] - f_ref).abs());
    }
    worst
}

pub fn geometries(n: usize) -> Vec<ChainGeometry> {
    vec![
        ChainGeometry::ordered(n, 10.0).unwrap(),
        ChainGeometry::disordered(n, 7.0, 0.3, 11).unwrap(),
        ChainGeometry::disordered(n, 25.0, 0.45, 5).unwrap(),
    ]
}
