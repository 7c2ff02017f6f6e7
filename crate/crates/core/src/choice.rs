//! Pairwise household preferences between technologies.
//!
//! Generalised costs are Normal across households, so the share of households
//! for whom one technology is cheaper than another is a Normal CDF of the mean
//! difference over the combined spread.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::costs::CostDistribution;
use crate::tech::TechClass;

/// Standard Normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

fn compare(cheaper_if_positive: f64, sd_a: f64, sd_b: f64) -> f64 {
    let spread = (sd_a * sd_a + sd_b * sd_b).sqrt();
    if spread == 0.0 {
        if cheaper_if_positive > 0.0 {
            1.0
        } else if cheaper_if_positive < 0.0 {
            0.0
        } else {
            tracing::debug!("exact cost tie with zero spread, splitting households evenly");
            0.5
        }
    } else {
        normal_cdf(cheaper_if_positive / spread)
    }
}

/// Fraction of households preferring `i` over `j`.
pub fn pairwise_preference(gcoh_i: CostDistribution, gcoh_j: CostDistribution) -> f64 {
    compare(gcoh_j.mean - gcoh_i.mean, gcoh_i.sd, gcoh_j.sd)
}

/// Fraction of households with incumbent `i` whose running cost exceeds the
/// payback cost of candidate `j`.
pub fn scrap_preference(mc_i: CostDistribution, payback_j: CostDistribution) -> f64 {
    compare(mc_i.mean - payback_j.mean, mc_i.sd, payback_j.sd)
}

/// Class-level substitutability rules. Pairs without a rule are allowed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMask {
    rules: BTreeMap<(TechClass, TechClass), bool>,
}

impl ClassMask {
    pub fn allow_all() -> Self {
        Self::default()
    }

    /// Households with a modern system never move back to coal or
    /// traditional biomass.
    pub fn comfort() -> Self {
        let mut mask = Self::default();
        for from in TechClass::ALL.into_iter().filter(|c| !c.is_low_comfort()) {
            for to in TechClass::ALL.into_iter().filter(|c| c.is_low_comfort()) {
                mask.set(from, to, false);
            }
        }
        mask
    }

    pub fn set(&mut self, from: TechClass, to: TechClass, allowed: bool) {
        self.rules.insert((from, to), allowed);
    }

    pub fn allows(&self, from: TechClass, to: TechClass) -> bool {
        from == to || self.rules.get(&(from, to)).copied().unwrap_or(true)
    }

    pub fn rules(&self) -> impl Iterator<Item = (TechClass, TechClass, bool)> + '_ {
        self.rules.iter().map(|(&(f, t), &a)| (f, t, a))
    }

    /// Expands the class rules to a technology-level mask.
    pub fn expand(&self, classes: &[TechClass]) -> SubstitutionMask {
        let n = classes.len();
        let mut allowed = vec![true; n * n];
        for (from, &cf) in classes.iter().enumerate() {
            for (to, &ct) in classes.iter().enumerate() {
                allowed[from * n + to] = self.allows(cf, ct);
            }
        }
        SubstitutionMask { n, allowed }
    }
}

/// Technology-level substitutability: `allows(from, to)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubstitutionMask {
    n: usize,
    allowed: Vec<bool>,
}

impl SubstitutionMask {
    pub fn all(n: usize) -> Self {
        Self { n, allowed: vec![true; n * n] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn allows(&self, from: usize, to: usize) -> bool {
        self.allowed[from * self.n + to]
    }

    pub fn block(&mut self, from: usize, to: usize) {
        self.allowed[from * self.n + to] = false;
    }
}

/// Square matrix of fractions, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionMatrix {
    n: usize,
    values: Vec<f64>,
}

impl FractionMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, values: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix must be square");
            m.values[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }
}

/// `F[i][j]`: share of households preferring `i` over `j`, i.e. the fraction
/// of `j`'s end-of-life replacements that go to `i`.
pub type PreferenceMatrix = FractionMatrix;

/// `G[i][j]`: share of households with working system `i` that would scrap it
/// for `j`.
pub type ScrapMatrix = FractionMatrix;

/// Builds F over the available technologies. A flow from `j` to `i` is
/// zeroed when the mask forbids moving from `j` to `i`; rows and columns of
/// unavailable technologies are zero.
pub fn preference_matrix(
    gcoh: &[CostDistribution],
    mask: &SubstitutionMask,
    available: &[bool],
) -> PreferenceMatrix {
    let n = gcoh.len();
    debug_assert_eq!(mask.len(), n);
    debug_assert_eq!(available.len(), n);
    let mut f = FractionMatrix::zeros(n);
    for i in 0..n {
        if !available[i] {
            continue;
        }
        for j in 0..n {
            if !available[j] {
                continue;
            }
            let v = if i == j {
                0.5
            } else if mask.allows(j, i) {
                pairwise_preference(gcoh[i], gcoh[j])
            } else {
                0.0
            };
            f.set(i, j, v);
        }
    }
    f
}

/// Builds G over incumbent/candidate class pairs the mask permits.
pub fn scrap_matrix(
    running_cost: &[CostDistribution],
    payback_cost: &[CostDistribution],
    classes: &[TechClass],
    mask: &SubstitutionMask,
    available: &[bool],
) -> ScrapMatrix {
    let n = classes.len();
    let mut g = FractionMatrix::zeros(n);
    for i in 0..n {
        if !available[i] || !classes[i].is_scrap_incumbent() {
            continue;
        }
        for j in 0..n {
            if i == j || !available[j] || !classes[j].is_scrap_candidate() || !mask.allows(i, j) {
                continue;
            }
            g.set(i, j, scrap_preference(running_cost[i], payback_cost[j]));
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(mean: f64, sd: f64) -> CostDistribution {
        CostDistribution::new(mean, sd)
    }

    #[test]
    fn pairwise_examples() {
        assert_eq!(pairwise_preference(d(0.1, 0.02), d(0.1, 0.03)), 0.5);
        let s = (0.02f64.powi(2) + 0.03f64.powi(2)).sqrt();
        let f = pairwise_preference(d(0.1, 0.02), d(0.1 + s, 0.03));
        assert!((f - 0.841_344_746_068_542_9).abs() < 1e-10);
        assert_eq!(pairwise_preference(d(0.1, 0.0), d(0.2, 0.0)), 1.0);
        assert_eq!(pairwise_preference(d(0.2, 0.0), d(0.1, 0.0)), 0.0);
        assert_eq!(pairwise_preference(d(0.2, 0.0), d(0.2, 0.0)), 0.5);
    }

    #[test]
    fn scrap_examples() {
        assert!(scrap_preference(d(0.0, 0.01), d(0.06, 0.0)) < 1e-9);
        assert_eq!(scrap_preference(d(0.1, 0.01), d(0.1, 0.02)), 0.5);
        assert_eq!(scrap_preference(d(10.0, 0.0), d(32.0 / 3.0, 0.0)), 0.0);
    }

    #[test]
    fn identical_pair_matrix() {
        let f = preference_matrix(&[d(0.1, 0.02), d(0.1, 0.02)], &SubstitutionMask::all(2), &[true, true]);
        assert_eq!(f.rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
    }

    #[test]
    fn comfort_mask_blocks_return_to_coal() {
        let classes = [TechClass::FossilCoal, TechClass::HeatPump];
        let mask = ClassMask::comfort().expand(&classes);
        // coal is far cheaper, yet heat-pump owners never replace with coal
        let f = preference_matrix(&[d(0.01, 0.001), d(0.5, 0.01)], &mask, &[true, true]);
        assert_eq!(f.get(0, 1), 0.0);
        assert!(f.get(1, 0) < 1e-12);
        assert!(mask.allows(0, 1));
    }

    #[test]
    fn unavailable_technologies_are_excluded() {
        let f = preference_matrix(
            &[d(0.1, 0.01), d(0.01, 0.01), d(0.1, 0.01)],
            &SubstitutionMask::all(3),
            &[true, false, true],
        );
        for k in 0..3 {
            assert_eq!(f.get(1, k), 0.0);
            assert_eq!(f.get(k, 1), 0.0);
        }
        assert_eq!(f.get(0, 2), 0.5);
    }

    #[test]
    fn scrap_matrix_only_fills_incumbent_candidate_pairs() {
        let classes = [TechClass::FossilOil, TechClass::HeatPump, TechClass::FossilGas, TechClass::DirectElectric];
        let mc = [d(0.2, 0.02), d(0.05, 0.01), d(0.2, 0.02), d(0.2, 0.02)];
        let pb = [d(0.3, 0.02), d(0.1, 0.01), d(0.3, 0.02), d(0.05, 0.02)];
        let g = scrap_matrix(&mc, &pb, &classes, &SubstitutionMask::all(4), &[true; 4]);
        assert!(g.get(0, 1) > 0.99);
        assert_eq!(g.get(0, 2), 0.0, "fossil to fossil is not a scrap candidate");
        assert_eq!(g.get(0, 3), 0.0, "direct electric is not a scrap candidate");
        assert_eq!(g.get(1, 0), 0.0);
    }
}
