//! Independent reference computations shared by the oracle tests and the
//! acceptance harness. None of them calls the closed forms they check.

#![allow(dead_code)]

use heatdiff_core::choice::{pairwise_preference, FractionMatrix, PreferenceMatrix};
use heatdiff_core::costs::CostDistribution;
use heatdiff_core::dynamics::{step_shares, RegionState, StepInputs};
use heatdiff_core::tech::TechClass;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

fn density(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// P(C_i < C_j) = ∫ f_i(x) ∫_x^∞ f_j(y) dy dx, both integrals by composite
/// Simpson on a shared grid. No closed-form CDF is used.
pub fn integrated_preference(i: CostDistribution, j: CostDistribution) -> f64 {
    let lo = (i.mean - 12.0 * i.sd).min(j.mean - 12.0 * j.sd);
    let hi = (i.mean + 12.0 * i.sd).max(j.mean + 12.0 * j.sd);
    // step small enough to resolve the narrower density
    let min_sd = i.sd.min(j.sd);
    let mut intervals = (((hi - lo) / (min_sd / 40.0)).ceil() as usize).max(2000);
    intervals += intervals % 2;
    let h = (hi - lo) / intervals as f64;
    let x: Vec<f64> = (0..=intervals).map(|k| lo + h * k as f64).collect();
    let fj: Vec<f64> = x.iter().map(|&v| density(v, j.mean, j.sd)).collect();

    // tail of j at even nodes, accumulated from the right by Simpson panels
    let mut tail = vec![0.0; intervals + 1];
    let mut k = intervals;
    while k >= 2 {
        tail[k - 2] = tail[k] + h / 3.0 * (fj[k - 2] + 4.0 * fj[k - 1] + fj[k]);
        k -= 2;
    }
    // odd nodes: tail at the midpoint from the right edge of its panel,
    // using the quadratic through the panel's three points
    for k in (1..intervals).step_by(2) {
        let piece = h / 12.0 * (-fj[k - 1] + 8.0 * fj[k] + 5.0 * fj[k + 1]);
        tail[k] = tail[k + 1] + piece;
    }

    let g: Vec<f64> = x.iter().zip(&tail).map(|(&v, &t)| density(v, i.mean, i.sd) * t).collect();
    let mut sum = g[0] + g[intervals];
    for k in 1..intervals {
        sum += if k % 2 == 1 { 4.0 } else { 2.0 } * g[k];
    }
    sum * h / 3.0
}

/// Largest closed-form vs quadrature gap over 1000 (mean gap, sd_i, sd_j)
/// points, with the number of points.
pub fn quadrature_grid_worst() -> (usize, f64) {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for a in 0..10 {
        let gap = -0.09 + 0.02 * f64::from(a);
        for b in 0..10 {
            let sd_i = 0.002 + 0.004 * f64::from(b);
            for c in 0..10 {
                let sd_j = 0.003 + 0.0035 * f64::from(c);
                let i = CostDistribution::new(0.10, sd_i);
                let j = CostDistribution::new(0.10 + gap, sd_j);
                worst = worst.max((pairwise_preference(i, j) - integrated_preference(i, j)).abs());
                count += 1;
            }
        }
    }
    (count, worst)
}

pub const SAMPLING_CASES: [(CostDistribution, CostDistribution); 4] = [
    (CostDistribution { mean: 0.10, sd: 0.02 }, CostDistribution { mean: 0.11, sd: 0.03 }),
    (CostDistribution { mean: 0.08, sd: 0.01 }, CostDistribution { mean: 0.07, sd: 0.015 }),
    (CostDistribution { mean: 0.12, sd: 0.04 }, CostDistribution { mean: 0.12, sd: 0.01 }),
    (CostDistribution { mean: 0.05, sd: 0.005 }, CostDistribution { mean: 0.09, sd: 0.03 }),
];

/// Share of sampled households for which technology i is cheaper than j.
pub fn sampled_preference(i: CostDistribution, j: CostDistribution, draws: u32, rng: &mut StdRng) -> f64 {
    let di = Normal::new(i.mean, i.sd).unwrap();
    let dj = Normal::new(j.mean, j.sd).unwrap();
    let wins = (0..draws).filter(|_| di.sample(rng) < dj.sample(rng)).count();
    wins as f64 / f64::from(draws)
}

/// Largest gap between sampled and closed-form preferences over
/// [`SAMPLING_CASES`].
pub fn sampling_worst(draws: u32, seed: u64) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    SAMPLING_CASES
        .iter()
        .map(|&(i, j)| (sampled_preference(i, j, draws, &mut rng) - pairwise_preference(i, j)).abs())
        .fold(0.0, f64::max)
}

pub fn plain_inputs<'a>(f: &'a PreferenceMatrix, tau: &'a [f64], classes: &'a [TechClass]) -> StepInputs<'a> {
    StepInputs {
        preferences: f,
        scrap: None,
        lifetimes: tau,
        scrap_rates: tau,
        classes,
        kick_start: None,
        water_fraction: 1.0,
        district_allowed: true,
    }
}

pub fn integrate(shares: &[f64], inputs: &StepInputs<'_>, dt: f64, steps: usize) -> Vec<Vec<f64>> {
    let mut state = RegionState { shares: shares.to_vec(), ue_total: 1.0, water_fraction: 1.0, year: 0.0 };
    let mut path = vec![state.shares.clone()];
    for _ in 0..steps {
        state = step_shares(&state, inputs, dt).unwrap().0;
        path.push(state.shares.clone());
    }
    path
}

/// Three technologies as households: each one reaching end of life meets a
/// random other household and adopts its technology with the pairwise
/// preference probability. Returns the largest share gap to the mean field
/// over all steps.
pub fn agent_based_worst(agents: usize, steps: usize, seed: u64) -> f64 {
    let gcoh = [
        CostDistribution::new(0.080, 0.015),
        CostDistribution::new(0.072, 0.020),
        CostDistribution::new(0.076, 0.030),
    ];
    let n = gcoh.len();
    let mut rows = vec![vec![0.5; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = pairwise_preference(gcoh[i], gcoh[j]);
            }
        }
    }
    let f = FractionMatrix::from_rows(&rows);
    let tau = [20.0, 15.0, 25.0];
    let classes = [TechClass::FossilGas, TechClass::HeatPump, TechClass::ModernBiomass];
    let start = [0.8, 0.1, 0.1];
    let dt = 0.25;
    let mean_field = integrate(&start, &plain_inputs(&f, &tau, &classes), dt, steps);

    let mut rng = StdRng::seed_from_u64(seed);
    let mut tech: Vec<usize> = (0..agents)
        .map(|a| {
            let u = a as f64 / agents as f64;
            if u < start[0] {
                0
            } else if u < start[0] + start[1] {
                1
            } else {
                2
            }
        })
        .collect();
    let mut worst: f64 = 0.0;
    for step in 1..=steps {
        let before = tech.clone();
        for a in 0..agents {
            let own = before[a];
            if rng.random::<f64>() >= dt / tau[own] {
                continue;
            }
            let peer = before[rng.random_range(0..agents)];
            if peer != own && rng.random::<f64>() < f.get(peer, own) {
                tech[a] = peer;
            }
        }
        let mut counts = [0usize; 3];
        for &k in &tech {
            counts[k] += 1;
        }
        for k in 0..n {
            worst = worst.max((counts[k] as f64 / agents as f64 - mean_field[step][k]).abs());
        }
    }
    worst
}

/// Two technologies with constant F_01 = 0.9, F_10 = 0.1 and τ = 20 follow
/// dS0/dt = 0.8 S0 (1 − S0) / τ. Returns the RMS gap to that logistic over
/// 200 quarter-year steps from S0 = 0.05, and the stepped path.
pub fn logistic_rms() -> (f64, Vec<Vec<f64>>) {
    let f = FractionMatrix::from_rows(&[vec![0.5, 0.9], vec![0.1, 0.5]]);
    let tau = [20.0, 20.0];
    let classes = [TechClass::HeatPump, TechClass::FossilGas];
    let s0: f64 = 0.05;
    let dt = 0.25;
    let path = integrate(&[s0, 1.0 - s0], &plain_inputs(&f, &tau, &classes), dt, 200);
    let sq: f64 = path
        .iter()
        .enumerate()
        .map(|(k, shares)| {
            let t = k as f64 * dt;
            let exact = 1.0 / (1.0 + (1.0 / s0 - 1.0) * (-0.8 * t / tau[1]).exp());
            (shares[0] - exact).powi(2)
        })
        .sum();
    ((sq / path.len() as f64).sqrt(), path)
}
