//! Brute-force reference model for small chains.
//!
//! States are byte vectors over {0 = p, 1 = s, 2 = s'}. Matrix elements come
//! from classifying every pair of states by the sites where they differ.

#![allow(dead_code)]

pub const P: u8 = 0;
pub const S: u8 = 1;
pub const SP: u8 = 2;

#[derive(Clone, Copy, Debug)]
pub struct Consts {
    pub mu: f64,
    pub nu: f64,
    pub gamma: f64,
    pub delta: f64,
    pub alpha: f64,
    /// p-s, p-s', s-s'
    pub hop: [bool; 3],
}

pub fn label(s: &[u8]) -> String {
    s.iter().map(|x| ["p", "s", "s'"][*x as usize]).collect()
}

pub fn brute_basis(n: usize, order: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for code in 0..3usize.pow(n as u32) {
        let mut s = vec![0u8; n];
        let mut c = code;
        for site in (0..n).rev() {
            s[site] = (c % 3) as u8;
            c /= 3;
        }
        let ns = s.iter().filter(|x| **x == S).count();
        let nsp = s.iter().filter(|x| **x == SP).count();
        if nsp == (order - 1) * ns {
            out.push(s);
        }
    }
    out.sort_by(|a, b| {
        let ka = a.iter().filter(|x| **x == S).count();
        let kb = b.iter().filter(|x| **x == S).count();
        ka.cmp(&kb).then_with(|| a.cmp(b))
    });
    out
}

fn inv3(x: &[f64], a: usize, b: usize) -> f64 {
    1.0 / (x[a] - x[b]).abs().powi(3)
}

pub fn omega2(x: &[f64], i: usize, j: usize, c: &Consts) -> f64 {
    c.alpha * c.mu * c.nu * inv3(x, i, j)
}

/// i, j end in s', k ends in s.
pub fn omega3(x: &[f64], i: usize, j: usize, k: usize, c: &Consts) -> f64 {
    c.gamma * c.mu * c.mu * c.nu / c.delta * inv3(x, i, j) * (inv3(x, i, k) + inv3(x, j, k))
}

/// i, j, k end in s', l ends in s.
pub fn omega4(x: &[f64], i: usize, j: usize, k: usize, l: usize, c: &Consts) -> f64 {
    let r = |a, b| inv3(x, a, b);
    let pre = c.gamma * c.gamma * c.mu.powi(3) * c.nu / (c.delta * c.delta);
    pre * (r(i, l) * (r(i, j) * r(j, k) + r(i, k) * r(j, k))
        + r(j, l) * (r(i, j) * r(i, k) + r(i, k) * r(j, k))
        + r(k, l) * (r(i, j) * r(i, k) + r(i, j) * r(j, k)))
}

/// Coupling between two states, zero unless they differ by one allowed process.
pub fn element(a: &[u8], b: &[u8], x: &[f64], order: usize, c: &Consts) -> f64 {
    let diff: Vec<usize> = (0..a.len()).filter(|&i| a[i] != b[i]).collect();
    if diff.len() == 2 {
        let (i, j) = (diff[0], diff[1]);
        if a[i] == b[j] && a[j] == b[i] {
            let pair = (a[i].min(a[j]), a[i].max(a[j]));
            let (strength, flag) = match pair {
                (P, S) => (c.mu * c.mu, c.hop[0]),
                (P, SP) => (c.nu * c.nu, c.hop[1]),
                (S, SP) => (c.gamma * c.gamma, c.hop[2]),
                _ => unreachable!(),
            };
            if flag {
                return strength * inv3(x, i, j);
            }
        }
    }
    if diff.len() != order {
        return 0.0;
    }
    let (pgroup, converted) = if diff.iter().all(|&i| a[i] == P) { (a, b) } else { (b, a) };
    if !diff.iter().all(|&i| pgroup[i] == P) {
        return 0.0;
    }
    let s_sites: Vec<usize> = diff.iter().copied().filter(|&i| converted[i] == S).collect();
    let sp_sites: Vec<usize> = diff.iter().copied().filter(|&i| converted[i] == SP).collect();
    if s_sites.len() != 1 || sp_sites.len() != order - 1 {
        return 0.0;
    }
    let k = s_sites[0];
    match order {
        2 => omega2(x, sp_sites[0], k, c),
        3 => omega3(x, sp_sites[0], sp_sites[1], k, c),
        4 => omega4(x, sp_sites[0], sp_sites[1], sp_sites[2], k, c),
        _ => unreachable!(),
    }
}

pub fn brute_hamiltonian(states: &[Vec<u8>], x_bohr: &[f64], order: usize, c: &Consts) -> Vec<f64> {
    let d = states.len();
    let mut h = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            if a != b {
                h[a * d + b] = element(&states[a], &states[b], x_bohr, order, c);
            }
        }
    }
    h
}

/// 1 / Ω_N for N consecutive atoms at spacing `d_bohr`, s on the last atom.
pub fn natural_time_unit(order: usize, d_bohr: f64, c: &Consts) -> f64 {
    let x: Vec<f64> = (0..order).map(|i| i as f64 * d_bohr).collect();
    let omega = match order {
        2 => omega2(&x, 0, 1, c),
        3 => omega3(&x, 0, 1, 2, c),
        4 => omega4(&x, 0, 1, 2, 3, c),
        _ => unreachable!(),
    };
    1.0 / omega
}

/// Cyclic Jacobi rotations. Returns ascending eigenvalues and column-major eigenvectors.
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j))).map(|(i, j)| m[i * n + j].powi(2)).sum();
        if off <= 1e-32 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = cs * mkp - sn * mkq;
                    m[k * n + q] = sn * mkp + cs * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = cs * mpk - sn * mqk;
                    m[q * n + k] = sn * mpk + cs * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = cs * vkp - sn * vkq;
                    v[k * n + q] = sn * vkp + cs * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    let vals = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vecs[new * n + k] = v[k * n + old];
        }
    }
    (vals, vecs)
}

/// Complex matrix as separate real and imaginary row-major parts.
#[derive(Clone)]
struct CMat {
    n: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl CMat {
    fn identity(n: usize) -> Self {
        let mut re = vec![0.0; n * n];
        for i in 0..n {
            re[i * n + i] = 1.0;
        }
        Self { n, re, im: vec![0.0; n * n] }
    }

    fn mul(&self, o: &CMat) -> CMat {
        let n = self.n;
        let mut re = vec![0.0; n * n];
        let mut im = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let (ar, ai) = (self.re[i * n + k], self.im[i * n + k]);
                for j in 0..n {
                    re[i * n + j] += ar * o.re[k * n + j] - ai * o.im[k * n + j];
                    im[i * n + j] += ar * o.im[k * n + j] + ai * o.re[k * n + j];
                }
            }
        }
        CMat { n, re, im }
    }

    fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.re[i * self.n + j].hypot(self.im[i * self.n + j])).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// exp(-i H t) by scaling and squaring of a truncated Taylor series.
pub fn expm_minus_i(h: &[f64], n: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let a = CMat { n, re: vec![0.0; n * n], im: h.iter().map(|x| -x * t).collect() };
    let mut squarings = 0;
    let mut scale = 1.0;
    while a.norm1() * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = CMat { n, re: a.re, im: a.im.iter().map(|x| x * scale).collect() };
    let mut sum = CMat::identity(n);
    let mut term = CMat::identity(n);
    for k in 1..=24 {
        term = term.mul(&a);
        let inv = 1.0 / k as f64;
        term.re.iter_mut().for_each(|x| *x *= inv);
        term.im.iter_mut().for_each(|x| *x *= inv);
        for i in 0..n * n {
            sum.re[i] += term.re[i];
            sum.im[i] += term.im[i];
        }
    }
    for _ in 0..squarings {
        sum = sum.mul(&sum);
    }
    (sum.re, sum.im)
}

/// Column `j` of exp(-i H t), i.e. the evolved basis state j.
pub fn evolve_basis_state(h: &[f64], n: usize, t: f64, j: usize) -> Vec<(f64, f64)> {
    let (re, im) = expm_minus_i(h, n, t);
    (0..n).map(|i| (re[i * n + j], im[i * n + j])).collect()
}
