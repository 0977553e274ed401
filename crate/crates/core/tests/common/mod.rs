//! Reference implementations written from the model definitions alone, used
//! as oracles by the integration tests and the acceptance run. Nothing here
//! calls into the library's numerics.

#![allow(dead_code)]

pub mod checks;

use qsparse_core::detectors::Network;
use qsparse_core::model::{make_reference_thresholds, Codeword, ReferenceSide, SensorSpec, Thresholds};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn q(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

pub fn density(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Bisection on the tail function; good to a few ulps.
pub fn q_inv(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy)]
pub struct Params {
    pub p: f64,
    pub sx2: f64,
    pub sn2: f64,
}

pub fn beta(par: Params, p: f64, gain2: f64) -> f64 {
    (par.sn2 + p * par.sx2 * gain2).sqrt()
}

/// Cell probabilities `Q(tau_{j-1}/beta) - Q(tau_j/beta)`.
pub fn cells(cuts: &[f64], b: f64) -> Vec<f64> {
    cuts.windows(2).map(|w| q(w[0] / b) - q(w[1] / b)).collect()
}

/// `dA_j/dp` by the chain rule through `beta(p)`.
pub fn d_cells_dp(cuts: &[f64], par: Params, p: f64, gain2: f64) -> Vec<f64> {
    let b = beta(par, p, gain2);
    let db_dp = par.sx2 * gain2 / (2.0 * b);
    // d/dbeta Q(tau/beta) = density(tau/beta) * tau / beta^2
    let dq = |t: f64| if t.is_finite() { density(t / b) * t / (b * b) } else { 0.0 };
    cuts.windows(2).map(|w| (dq(w[0]) - dq(w[1])) * db_dp).collect()
}

/// Honest/Byzantine mixture in its two-parameter form.
pub fn mixture(a: &[f64], alpha: f64, p_attack: f64) -> Vec<f64> {
    let k = a.len() as f64;
    a.iter()
        .map(|&aj| (1.0 - alpha) * aj + alpha * (aj * (1.0 - p_attack) + (1.0 - aj) * p_attack / (k - 1.0)))
        .collect()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// A small network: optional reference sensors first, then regular sensors
/// with random cuts and gains.
pub struct Toy {
    pub net: Network,
    pub cuts: Vec<Vec<f64>>,
    pub gains: Vec<f64>,
    pub n_ref: usize,
    pub bits: u32,
}

impl Toy {
    pub fn random(rng: &mut ChaCha8Rng, n: usize, n_ref: usize, bits: u32) -> Toy {
        let k = 1usize << bits;
        let mut sensors = Vec::new();
        for i in 0..n {
            let mut finite: Vec<f64> = (0..k - 1).map(|_| rng.random_range(-1.5..1.5)).collect();
            finite.sort_by(f64::total_cmp);
            for j in 1..finite.len() {
                if finite[j] - finite[j - 1] < 0.05 {
                    finite[j] = finite[j - 1] + 0.05;
                }
            }
            let gain2 = rng.random_range(0.5..2.0);
            let s = SensorSpec::new(i, gain2, Thresholds::from_finite(&finite).unwrap()).unwrap();
            let s = if i < n_ref {
                let t = make_reference_thresholds(&s, 6.0, ReferenceSide::Low).unwrap();
                SensorSpec::new(i, gain2, t).unwrap().reference()
            } else {
                s
            };
            sensors.push(s);
        }
        let cuts = sensors.iter().map(|s| s.thresholds.as_slice().to_vec()).collect();
        let gains = sensors.iter().map(|s| s.gain2).collect();
        Toy {
            net: Network::new(sensors).unwrap(),
            cuts,
            gains,
            n_ref,
            bits,
        }
    }

    pub fn levels(&self) -> usize {
        1 << self.bits
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    /// Honest pmf of every sensor at sparsity `p`.
    pub fn honest(&self, par: Params, p: f64) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| cells(&self.cuts[i], beta(par, p, self.gains[i])))
            .collect()
    }

    /// Every report vector, as codewords, with the slot vector.
    pub fn all_reports(&self) -> Vec<Vec<Codeword>> {
        let k = self.levels();
        let n = self.len();
        let total = k.pow(n as u32);
        (0..total)
            .map(|mut code| {
                (0..n)
                    .map(|_| {
                        let s = code % k;
                        code /= k;
                        Codeword::from_slot(s)
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn joint(pmfs: &[Vec<f64>], u: &[Codeword]) -> f64 {
    pmfs.iter().zip(u).map(|(f, c)| f[c.slot()]).product()
}

/// Mean and variance of `stat` under the product law `pmfs`, by summing over
/// every report vector.
pub fn enumerate_moments(toy: &Toy, pmfs: &[Vec<f64>], stat: impl Fn(&[Codeword]) -> f64) -> (f64, f64) {
    let all = toy.all_reports();
    let mean: f64 = all.iter().map(|u| joint(pmfs, u) * stat(u)).sum();
    let var: f64 = all.iter().map(|u| joint(pmfs, u) * (stat(u) - mean).powi(2)).sum();
    (mean, var)
}

pub fn weighted(rows: &[Vec<f64>], u: &[Codeword]) -> f64 {
    rows.iter().zip(u).map(|(r, c)| r[c.slot()]).sum()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Outcome of one oracle check: the worst discrepancy seen.
#[derive(Debug, Default, Clone, Copy)]
pub struct Worst {
    pub err: f64,
    pub cases: usize,
}

impl Worst {
    pub fn see(&mut self, lib: f64, oracle: f64) {
        let e = (lib - oracle).abs() / oracle.abs().max(1.0);
        if !(e <= self.err) {
            self.err = if e.is_nan() { f64::INFINITY } else { e };
        }
        self.cases += 1;
    }
}
