//! Market-share dynamics of one region: end-of-life replacement flows,
//! premature scrapping, kick-start seeding and constraint projection.

pub mod run;

use crate::choice::{PreferenceMatrix, ScrapMatrix};
use crate::tech::TechClass;
use crate::{Error, Result};

/// Tolerance of the simplex check after every step.
pub const SIMPLEX_TOL: f64 = 1e-9;
/// Kick-start transfer, share of total demand per year.
pub const KICK_START_RATE: f64 = 0.01;
const MAX_HALVINGS: u32 = 12;

/// Shares of one region at a point in time.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionState {
    pub shares: Vec<f64>,
    /// kWh of useful heat per year.
    pub ue_total: f64,
    pub water_fraction: f64,
    pub year: f64,
}

/// Gross flow of share from `j` to `i` over one step.
pub fn share_flow(s_i: f64, s_j: f64, f_ij: f64, tau_j: f64, dt: f64) -> f64 {
    s_j * f_ij / tau_j * s_i * dt
}

/// Everything a region step needs besides the shares themselves.
#[derive(Clone, Copy, Debug)]
pub struct StepInputs<'a> {
    pub preferences: &'a PreferenceMatrix,
    pub scrap: Option<&'a ScrapMatrix>,
    /// Lifetime of each technology, years.
    pub lifetimes: &'a [f64],
    /// Decision rate of premature scrapping per incumbent, 1/year.
    pub scrap_rates: &'a [f64],
    pub classes: &'a [TechClass],
    /// Eligible classes of an active kick-start.
    pub kick_start: Option<&'a [TechClass]>,
    pub water_fraction: f64,
    pub district_allowed: bool,
}

/// Share movements of one step. Matrices are row-major with
/// `[to * n + from]` holding the gross flow from `from` to `to`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowReport {
    pub n: usize,
    pub regular: Vec<f64>,
    pub scrap: Vec<f64>,
    /// Net kick-start injection per technology (negative at the donor).
    pub kick_start: Vec<f64>,
    /// Times the step had to be split to keep shares non-negative.
    pub halvings: u32,
}

impl FlowReport {
    fn zeros(n: usize) -> Self {
        Self {
            n,
            regular: vec![0.0; n * n],
            scrap: vec![0.0; n * n],
            kick_start: vec![0.0; n],
            halvings: 0,
        }
    }

    fn absorb(&mut self, other: &FlowReport) {
        for (a, b) in self.regular.iter_mut().zip(&other.regular) {
            *a += b;
        }
        for (a, b) in self.scrap.iter_mut().zip(&other.scrap) {
            *a += b;
        }
        for (a, b) in self.kick_start.iter_mut().zip(&other.kick_start) {
            *a += b;
        }
        self.halvings += other.halvings;
    }

    /// Net regular-replacement change per technology.
    pub fn net_regular(&self) -> Vec<f64> {
        net(&self.regular, self.n)
    }

    /// Net scrapping change per technology.
    pub fn net_scrap(&self) -> Vec<f64> {
        net(&self.scrap, self.n)
    }

    /// Share scrapped away from each technology.
    pub fn scrapped_out(&self) -> Vec<f64> {
        (0..self.n)
            .map(|from| (0..self.n).map(|to| self.scrap[to * self.n + from]).sum())
            .collect()
    }
}

fn net(m: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let inflow: f64 = (0..n).map(|j| m[i * n + j]).sum();
            let outflow: f64 = (0..n).map(|j| m[j * n + i]).sum();
            inflow - outflow
        })
        .collect()
}

/// Moves share from the dominant fossil technology to the eligible classes.
/// Returns the per-technology change.
pub fn kick_start(shares: &[f64], classes: &[TechClass], eligible: &[TechClass], dt: f64) -> Vec<f64> {
    let n = shares.len();
    let mut delta = vec![0.0; n];
    let mut donor: Option<usize> = None;
    for k in (0..n).filter(|&k| classes[k].is_fossil() && shares[k] > 0.0) {
        if donor.is_none_or(|d| shares[k] > shares[d]) {
            donor = Some(k);
        }
    }
    let Some(donor) = donor else {
        tracing::debug!("kick-start active but no fossil share left");
        return delta;
    };
    let targets: Vec<usize> = (0..n).filter(|&k| eligible.contains(&classes[k])).collect();
    if targets.is_empty() {
        return delta;
    }
    let amount = (KICK_START_RATE * dt).min(shares[donor]);
    let total: f64 = targets.iter().map(|&k| shares[k]).sum();
    if total > 0.0 {
        for &k in &targets {
            delta[k] += amount * shares[k] / total;
        }
    } else {
        let mut present: Vec<TechClass> = targets.iter().map(|&k| classes[k]).collect();
        present.sort();
        present.dedup();
        let per_class = amount / present.len() as f64;
        for class in present {
            let members: Vec<usize> = targets.iter().copied().filter(|&k| classes[k] == class).collect();
            for &k in &members {
                delta[k] += per_class / members.len() as f64;
            }
        }
    }
    delta[donor] -= amount;
    delta
}

/// Caps solar thermal at the water-heating fraction and removes district heat
/// where no network exists; displaced share goes to the remaining
/// technologies in proportion to their shares.
pub fn enforce_constraints(shares: &mut [f64], classes: &[TechClass], water_fraction: f64, district_allowed: bool) {
    let n = shares.len();
    let mut fixed = vec![false; n];

    // district heat first, so its share cannot push solar back over the cap
    if !district_allowed {
        let mut overflow = 0.0;
        for k in (0..n).filter(|&k| classes[k] == TechClass::DistrictHeat) {
            overflow += shares[k];
            shares[k] = 0.0;
            fixed[k] = true;
        }
        spill(shares, &fixed, overflow);
    }

    let solar: Vec<usize> = (0..n).filter(|&k| classes[k] == TechClass::SolarThermal).collect();
    let solar_total: f64 = solar.iter().map(|&k| shares[k].max(0.0)).sum();
    if solar_total > water_fraction {
        let scale = water_fraction / solar_total;
        let mut overflow = 0.0;
        for &k in &solar {
            let capped = shares[k].max(0.0) * scale;
            overflow += shares[k] - capped;
            shares[k] = capped;
            fixed[k] = true;
        }
        spill(shares, &fixed, overflow);
    }
}

/// Hands `overflow` to the technologies not `fixed`, in proportion to their shares.
fn spill(shares: &mut [f64], fixed: &[bool], overflow: f64) {
    if overflow == 0.0 {
        return;
    }
    let receivers: Vec<usize> = (0..shares.len()).filter(|&k| !fixed[k]).collect();
    let total: f64 = receivers.iter().map(|&k| shares[k].max(0.0)).sum();
    if total > 0.0 {
        for &k in &receivers {
            shares[k] += overflow * shares[k].max(0.0) / total;
        }
    } else if !receivers.is_empty() {
        for &k in &receivers {
            shares[k] += overflow / receivers.len() as f64;
        }
    }
}

/// Clips round-off negatives and rescales to unit sum, then checks the simplex.
pub fn renormalize(shares: &mut [f64]) -> Result<()> {
    for s in shares.iter_mut() {
        if *s < 0.0 {
            if *s < -SIMPLEX_TOL {
                return Err(Error::Simplex(format!("share {s} below zero")));
            }
            *s = 0.0;
        }
    }
    let total: f64 = shares.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Simplex(format!("shares sum to {total}")));
    }
    for s in shares.iter_mut() {
        *s /= total;
    }
    check_simplex(shares)
}

pub fn check_simplex(shares: &[f64]) -> Result<()> {
    let total: f64 = shares.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL || shares.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::Simplex(format!("shares {shares:?} sum to {total}")));
    }
    Ok(())
}

/// Flow rates (per year) of the replacement and scrapping terms, without
/// kick-start or constraints.
pub fn share_rates(shares: &[f64], inputs: &StepInputs<'_>) -> Vec<f64> {
    let n = shares.len();
    let mut report = FlowReport::zeros(n);
    fill_flows(shares, inputs, 1.0, &mut report);
    let regular = report.net_regular();
    let scrap = report.net_scrap();
    regular.iter().zip(&scrap).map(|(a, b)| a + b).collect()
}

fn fill_flows(shares: &[f64], inputs: &StepInputs<'_>, dt: f64, report: &mut FlowReport) {
    let n = shares.len();
    let f = inputs.preferences;
    for i in 0..n {
        if shares[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            if i == j || shares[j] == 0.0 {
                continue;
            }
            report.regular[i * n + j] = share_flow(shares[i], shares[j], f.get(i, j), inputs.lifetimes[j], dt);
            if let Some(g) = inputs.scrap {
                // incumbent j scraps towards candidate i
                report.scrap[i * n + j] = shares[i] * shares[j] * g.get(j, i) * inputs.scrap_rates[j] * dt;
            }
        }
    }
}

fn step_once(shares: &[f64], inputs: &StepInputs<'_>, dt: f64, depth: u32) -> Result<(Vec<f64>, FlowReport)> {
    let n = shares.len();
    let mut report = FlowReport::zeros(n);
    fill_flows(shares, inputs, dt, &mut report);
    let regular = report.net_regular();
    let scrap = report.net_scrap();
    let mut next: Vec<f64> = (0..n).map(|k| shares[k] + regular[k] + scrap[k]).collect();

    if next.iter().any(|s| *s < -SIMPLEX_TOL) {
        if depth >= MAX_HALVINGS {
            return Err(Error::Simplex(format!(
                "shares stay negative after {MAX_HALVINGS} step halvings"
            )));
        }
        tracing::debug!(dt, "negative share, halving step");
        let (mid, mut first) = step_once(shares, inputs, dt / 2.0, depth + 1)?;
        let (end, second) = step_once(&mid, inputs, dt / 2.0, depth + 1)?;
        first.absorb(&second);
        first.halvings += 1;
        return Ok((end, first));
    }

    if let Some(eligible) = inputs.kick_start {
        let delta = kick_start(&next, inputs.classes, eligible, dt);
        for k in 0..n {
            next[k] += delta[k];
        }
        report.kick_start = delta;
    }
    enforce_constraints(&mut next, inputs.classes, inputs.water_fraction, inputs.district_allowed);
    renormalize(&mut next)?;
    Ok((next, report))
}

/// Advances the shares of one region by `dt` years.
pub fn step_shares(state: &RegionState, inputs: &StepInputs<'_>, dt: f64) -> Result<(RegionState, FlowReport)> {
    if !(dt > 0.0) {
        return Err(Error::validation(format!("time step {dt} must be > 0")));
    }
    let (shares, report) = step_once(&state.shares, inputs, dt, 0)?;
    Ok((
        RegionState {
            shares,
            ue_total: state.ue_total,
            water_fraction: state.water_fraction,
            year: state.year + dt,
        },
        report,
    ))
}
