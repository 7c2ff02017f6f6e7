//! Fitting the intangible cost terms so the simulated diffusion continues the
//! observed trend at the handover year, and interactive override sessions.
//!
//! Only cost differences enter household choice, so one technology per
//! region (the largest share) is pinned to γ = 0 and the others are solved
//! for. The fit matches the instantaneous share change of the model to the
//! least-squares slope of the recent history.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costs::{GammaProvenance, GammaSlice, GammaVector};
use crate::demand::DemandVariant;
use crate::dynamics::run::{RegionModel, RunConfig};
use crate::io::dataset::Dataset;
use crate::scenario::PolicyAtT;
use crate::series::TimeSeries;
use crate::{Error, Result};

pub const DEFAULT_WINDOW: i32 = 5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
/// Length of the interactive projection, years.
pub const PROJECTION_YEARS: i32 = 8;

/// Least-squares trend of a share series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    /// Share per year.
    pub slope: f64,
    pub std_error: f64,
    pub points: usize,
}

/// OLS trend over the `window` years ending at `end_year`.
pub fn historical_trend(series: &TimeSeries, end_year: i32, window: i32) -> Result<SlopeEstimate> {
    let start = end_year - window + 1;
    let (xs, ys): (Vec<f64>, Vec<f64>) = series
        .years
        .iter()
        .zip(&series.values)
        .filter(|(y, _)| **y >= start && **y <= end_year)
        .map(|(y, v)| (f64::from(*y), *v))
        .unzip();
    let n = xs.len();
    if n < 3 {
        return Err(Error::validation(format!(
            "slope window {start}..={end_year} holds {n} point(s); at least 3 are needed"
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let std_error = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(SlopeEstimate { slope, std_error, points: n })
}

pub fn historical_slope(series: &TimeSeries, end_year: i32, window: i32) -> Result<f64> {
    historical_trend(series, end_year, window).map(|e| e.slope)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationOptions {
    pub window: i32,
    /// Largest acceptable |model slope − historical slope|, share per year.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Additional random starts tried when the first fit does not converge.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: 200,
            restarts: 8,
            seed: 2015,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDiagnostics {
    pub handover: i32,
    pub converged: bool,
    pub iterations: usize,
    /// Model slope minus historical slope per technology, share per year.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub gauge: Option<String>,
    /// Technologies whose γ ended on the search bound.
    pub suspect: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub region: String,
    pub gamma: GammaSlice,
    pub diagnostics: CalibrationDiagnostics,
}

struct Problem<'a> {
    model: RegionModel<'a>,
    shares: Vec<f64>,
    slopes: Vec<f64>,
    active: Vec<usize>,
    unknowns: Vec<usize>,
    bounds: Vec<f64>,
    handover: i32,
    ones: Vec<f64>,
}

impl Problem<'_> {
    fn gamma(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.shares.len()];
        for (&k, &v) in self.unknowns.iter().zip(x) {
            g[k] = v;
        }
        g
    }

    fn all_residuals(&mut self, gamma: &[f64]) -> Result<Vec<f64>> {
        self.model.set_gamma(gamma);
        let rates = self
            .model
            .share_rates(&self.shares, self.handover, &PolicyAtT::default(), &self.ones)?;
        Ok(rates.iter().zip(&self.slopes).map(|(r, s)| r - s).collect())
    }

    fn residuals(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.gamma(x);
        let all = self.all_residuals(&g)?;
        Ok(self.active.iter().map(|&k| all[k]).collect())
    }

    fn clamp(&self, x: &mut [f64]) {
        for (v, b) in x.iter_mut().zip(&self.bounds) {
            *v = v.clamp(-b, *b);
        }
    }
}

fn norm2(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn max_abs(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Largest move of one unknown per iteration, as a fraction of its bound.
const MAX_STEP_FRACTION: f64 = 0.1;

/// Damped Gauss-Newton (Levenberg–Marquardt) with a finite-difference
/// Jacobian, projected onto the bounds. Returns the best point and the
/// number of iterations.
fn levenberg_marquardt(problem: &mut Problem<'_>, start: Vec<f64>, max_iterations: usize) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let m = start.len();
    let mut x = start;
    let mut r = problem.residuals(&x)?;
    let mut cost = norm2(&r);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        if max_abs(&r) < 1e-14 {
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(r.len(), m);
        for j in 0..m {
            let h = 1e-7 * (1.0 + x[j].abs());
            let mut up = x.clone();
            up[j] += h;
            let mut down = x.clone();
            down[j] -= h;
            let ru = problem.residuals(&up)?;
            let rd = problem.residuals(&down)?;
            for i in 0..r.len() {
                jac[(i, j)] = (ru[i] - rd[i]) / (2.0 * h);
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for d in 0..m {
                a[(d, d)] += lambda * (jtj[(d, d)] + 1e-12);
            }
            let Some(mut step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            // weakly identified directions would otherwise jump onto a bound and stick there
            let overshoot = step
                .iter()
                .zip(&problem.bounds)
                .fold(1.0f64, |acc, (d, b)| acc.max(d.abs() / (MAX_STEP_FRACTION * b)));
            step /= overshoot;
            let mut candidate: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            problem.clamp(&mut candidate);
            let rc = problem.residuals(&candidate)?;
            let cc = norm2(&rc);
            if cc < cost {
                let moved = x.iter().zip(&candidate).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
                x = candidate;
                r = rc;
                cost = cc;
                lambda = (lambda / 3.0).max(1e-12);
                improved = moved > 0.0;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    Ok((x, r, iterations))
}

/// Fits γ for one region at the handover year `config.from`.
pub fn auto_calibrate(dataset: &Dataset, region: usize, config: &RunConfig, options: &CalibrationOptions) -> Result<CalibrationResult> {
    config.validate()?;
    let handover = config.from;
    let reg = &dataset.regions[region];
    let n = dataset.technologies.len();
    let shares = reg
        .history
        .at(handover)
        .ok_or_else(|| Error::validation(format!("region {}: no observed shares in {handover}", reg.id)))?
        .to_vec();
    let slopes = (0..n)
        .map(|k| historical_slope(&reg.history.series(k), handover, options.window))
        .collect::<Result<Vec<f64>>>()?;
    let active: Vec<usize> = (0..n).filter(|&k| shares[k] > 0.0).collect();
    let gauge = active
        .iter()
        .copied()
        .fold(None, |best: Option<usize>, k| match best {
            Some(b) if shares[b] >= shares[k] => Some(b),
            _ => Some(k),
        });
    let unknowns: Vec<usize> = active.iter().copied().filter(|&k| Some(k) != gauge).collect();

    let model = RegionModel::new(
        dataset,
        region,
        &DemandVariant::baseline(),
        handover,
        &vec![0.0; n],
        &config.params,
        config.scrapping_enabled,
    )?;
    let ones = vec![1.0; n];
    let lcoh = model.levelised_costs(handover, &ones)?;
    let bounds: Vec<f64> = unknowns.iter().map(|&k| 2.0 * lcoh[k].abs()).collect();
    let mut problem = Problem { model, shares, slopes, active, unknowns, bounds, handover, ones };

    let start = vec![0.0; problem.unknowns.len()];
    let mut best = levenberg_marquardt(&mut problem, start, options.max_iterations)?;
    let mut iterations = best.2;
    if max_abs(&best.1) > options.tolerance && !problem.unknowns.is_empty() {
        let mut rng = StdRng::seed_from_u64(options.seed ^ region as u64);
        for _ in 0..options.restarts {
            let start: Vec<f64> = problem.bounds.iter().map(|b| rng.random_range(-0.5 * b..=0.5 * b)).collect();
            let attempt = levenberg_marquardt(&mut problem, start, options.max_iterations)?;
            iterations += attempt.2;
            if norm2(&attempt.1) < norm2(&best.1) {
                best = attempt;
            }
            if max_abs(&best.1) <= options.tolerance {
                break;
            }
        }
    }
    let (x, _, _) = best;
    let gamma = problem.gamma(&x);
    let residuals = problem.all_residuals(&gamma)?;
    let max_residual = max_abs(&residuals);
    let converged = max_residual <= options.tolerance;
    if !converged {
        tracing::warn!(region = %reg.id, max_residual, "calibration did not converge");
    }
    let suspect = problem
        .unknowns
        .iter()
        .zip(&x)
        .zip(&problem.bounds)
        .filter(|((_, v), b)| v.abs() >= **b * (1.0 - 1e-9))
        .map(|((&k, _), _)| dataset.technologies[k].id.clone())
        .collect();
    let provenance = (0..n)
        .map(|k| if problem.active.contains(&k) { GammaProvenance::Calibrated } else { GammaProvenance::Zero })
        .collect();
    Ok(CalibrationResult {
        region: reg.id.clone(),
        gamma: GammaSlice { values: gamma, provenance },
        diagnostics: CalibrationDiagnostics {
            handover,
            converged,
            iterations,
            residuals,
            max_residual,
            gauge: gauge.map(|k| dataset.technologies[k].id.clone()),
            suspect,
        },
    })
}

/// Calibrates every region in parallel.
pub fn auto_calibrate_all(dataset: &Dataset, config: &RunConfig, options: &CalibrationOptions) -> Result<(GammaVector, Vec<CalibrationResult>)> {
    let results = (0..dataset.regions.len())
        .into_par_iter()
        .map(|r| auto_calibrate(dataset, r, config, options))
        .collect::<Result<Vec<_>>>()?;
    let gammas = GammaVector {
        regions: results.iter().map(|r| (r.region.clone(), r.gamma.clone())).collect(),
    };
    Ok((gammas, results))
}

/// Short zero-policy projection from the handover year.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub region: String,
    pub handover: i32,
    pub technologies: Vec<String>,
    pub years: Vec<i32>,
    /// One row per year, technology order.
    pub shares: Vec<Vec<f64>>,
    /// Model share change per year at the handover.
    pub model_slopes: Vec<f64>,
    pub historical_slopes: Vec<f64>,
    pub residuals: Vec<f64>,
    pub tolerance: f64,
}

impl Projection {
    pub fn within_tolerance(&self) -> bool {
        self.residuals.iter().all(|r| r.abs() <= self.tolerance)
    }
}

/// Projects one region for `years` years with no policy and frozen learning.
pub fn project_region(
    dataset: &Dataset,
    region: usize,
    gamma: &[f64],
    config: &RunConfig,
    options: &CalibrationOptions,
    years: i32,
) -> Result<Projection> {
    config.validate()?;
    let handover = config.from;
    let reg = &dataset.regions[region];
    let n = dataset.technologies.len();
    let model = RegionModel::new(
        dataset,
        region,
        &DemandVariant::baseline(),
        handover,
        gamma,
        &config.params,
        config.scrapping_enabled,
    )?;
    let start = reg
        .history
        .at(handover)
        .ok_or_else(|| Error::validation(format!("region {}: no observed shares in {handover}", reg.id)))?
        .to_vec();
    let ones = vec![1.0; n];
    let none = PolicyAtT::default();
    let historical_slopes = (0..n)
        .map(|k| historical_slope(&reg.history.series(k), handover, options.window))
        .collect::<Result<Vec<f64>>>()?;
    let model_slopes = model.share_rates(&start, handover, &none, &ones)?;
    let residuals = model_slopes.iter().zip(&historical_slopes).map(|(m, h)| m - h).collect();

    let steps = config.steps_per_year()?;
    let mut shares = start;
    let mut rows = vec![shares.clone()];
    for year in handover..handover + years {
        for s in 0..steps {
            let t = f64::from(year) + s as f64 * config.dt;
            shares = model.advance(&shares, t, config.dt, &none, &ones)?;
        }
        rows.push(shares.clone());
    }
    Ok(Projection {
        region: reg.id.clone(),
        handover,
        technologies: dataset.technologies.iter().map(|t| t.id.clone()).collect(),
        years: (handover..=handover + years).collect(),
        shares: rows,
        model_slopes,
        historical_slopes,
        residuals,
        tolerance: options.tolerance,
    })
}

/// Interactive γ editing for one region. Single writer: callers serialise
/// mutations.
#[derive(Clone, Debug)]
pub struct CalibrationSession {
    dataset: Arc<Dataset>,
    region: usize,
    config: RunConfig,
    options: CalibrationOptions,
    gamma: GammaSlice,
    projection: Projection,
    diagnostics: Option<CalibrationDiagnostics>,
    open: bool,
}

impl CalibrationSession {
    pub fn new(dataset: Arc<Dataset>, region: &str, gamma: GammaSlice, config: RunConfig, options: CalibrationOptions) -> Result<Self> {
        let index = dataset.region_index(region)?;
        gamma.validate(dataset.technologies.len())?;
        let projection = project_region(&dataset, index, &gamma.values, &config, &options, PROJECTION_YEARS)?;
        Ok(Self { dataset, region: index, config, options, gamma, projection, diagnostics: None, open: true })
    }

    fn ensure_open(&self) -> Result<()> {
        if self.open {
            Ok(())
        } else {
            Err(Error::Session(format!("calibration session for {} is closed", self.region_id())))
        }
    }

    pub fn region_id(&self) -> &str {
        &self.dataset.regions[self.region].id
    }

    pub fn gamma(&self) -> &GammaSlice {
        &self.gamma
    }

    pub fn projection(&self) -> &Projection {
        &self.projection
    }

    pub fn diagnostics(&self) -> Option<&CalibrationDiagnostics> {
        self.diagnostics.as_ref()
    }

    pub fn history(&self) -> &crate::io::dataset::ShareHistory {
        &self.dataset.regions[self.region].history
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    pub fn close(&mut self) {
        self.open = false;
    }

    /// Sets γ (€/kWh) of one technology and re-projects.
    pub fn apply_gamma_override(&mut self, tech: &str, value: f64) -> Result<&Projection> {
        self.ensure_open()?;
        let k = self.dataset.tech_index(tech)?;
        if !value.is_finite() {
            return Err(Error::validation(format!("gamma {value} is not finite")));
        }
        let mut values = self.gamma.values.clone();
        values[k] = value;
        let projection = project_region(&self.dataset, self.region, &values, &self.config, &self.options, PROJECTION_YEARS)?;
        self.gamma.values = values;
        self.gamma.provenance[k] = GammaProvenance::Manual;
        self.projection = projection;
        Ok(&self.projection)
    }

    /// Runs the automatic fit and adopts its result.
    pub fn auto_calibrate(&mut self) -> Result<&CalibrationDiagnostics> {
        self.ensure_open()?;
        let result = auto_calibrate(&self.dataset, self.region, &self.config, &self.options)?;
        self.projection = project_region(&self.dataset, self.region, &result.gamma.values, &self.config, &self.options, PROJECTION_YEARS)?;
        self.gamma = result.gamma;
        Ok(self.diagnostics.insert(result.diagnostics))
    }

    /// Replaces the whole slice, e.g. from an auto-calibrated vector.
    pub fn set_gamma(&mut self, gamma: GammaSlice) -> Result<&Projection> {
        self.ensure_open()?;
        gamma.validate(self.dataset.technologies.len())?;
        self.projection = project_region(&self.dataset, self.region, &gamma.values, &self.config, &self.options, PROJECTION_YEARS)?;
        self.gamma = gamma;
        Ok(&self.projection)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slopes() {
        let flat = TimeSeries::constant(2010, 2015, 0.3);
        assert_eq!(historical_slope(&flat, 2015, 5).unwrap(), 0.0);
        let linear = TimeSeries::from_fn(2008, 2015, |y| 0.1 + 0.01 * f64::from(y - 2008));
        assert!((historical_slope(&linear, 2015, 5).unwrap() - 0.01).abs() < 1e-12);
        let short = TimeSeries::from_fn(2014, 2015, |_| 0.1);
        assert!(historical_slope(&short, 2015, 5).is_err());
        assert!(historical_slope(&linear, 2009, 5).is_err());
    }
}
