//! Gaussian-copula sampling of correlated wind output.
//!
//! Latent normals come from PCG64 generators. The 64-bit seed is expanded to
//! the 128-bit PCG state with two SplitMix64 steps; farm `j` draws from stream
//! `j` for scenario sets and from stream `2^32 + j` for portfolio samples, so
//! the two never share random numbers and each farm's sequence is fixed
//! regardless of how many farms the case holds.

use std::fs;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use rand_pcg::Pcg64;
use rayon::prelude::*;
use serde::Serialize;

use super::special::{inverse_regularized_beta, std_normal_cdf};
use super::{BetaMarginal, UncertaintyError, WindDistribution};
use crate::format::sig9;

const PORTFOLIO_STREAM: u128 = 1 << 32;
/// Diagonal pivots below this are treated as exact zeros (perfect correlation).
const SEMIDEFINITE_TOL: f64 = 1e-12;

fn splitmix64(x: &mut u64) -> u64 {
    *x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn farm_rng(seed: u64, stream: u128) -> Pcg64 {
    let mut s = seed;
    let hi = splitmix64(&mut s) as u128;
    let lo = splitmix64(&mut s) as u128;
    Pcg64::new((hi << 64) | lo, stream)
}

/// Correlation matrix of the latent Gaussian vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaSpec {
    corr: Vec<Vec<f64>>,
    lower: Vec<Vec<f64>>,
}

impl CopulaSpec {
    /// Accepts symmetric matrices with unit diagonal that are positive
    /// semidefinite; perfectly correlated pairs are allowed.
    pub fn new(corr: Vec<Vec<f64>>) -> Result<Self, UncertaintyError> {
        let n = corr.len();
        for (i, row) in corr.iter().enumerate() {
            if row.len() != n {
                return Err(UncertaintyError::InvalidArgument("correlation matrix is not square".into()));
            }
            if row[i] != 1.0 {
                return Err(UncertaintyError::InvalidArgument(format!(
                    "correlation diagonal entry {i} is {} instead of 1",
                    row[i]
                )));
            }
            for j in 0..i {
                if row[j] != corr[j][i] || !row[j].is_finite() {
                    return Err(UncertaintyError::InvalidArgument(
                        "correlation matrix is not symmetric".into(),
                    ));
                }
            }
        }
        let lower = cholesky(&corr)?;
        Ok(CopulaSpec { corr, lower })
    }

    /// Unit diagonal with every off-diagonal entry equal to `rho`.
    pub fn uniform(dim: usize, rho: f64) -> Result<Self, UncertaintyError> {
        let corr = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { rho }).collect())
            .collect();
        CopulaSpec::new(corr)
    }

    pub fn dim(&self) -> usize {
        self.corr.len()
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.corr
    }

    pub fn cholesky_factor(&self) -> &[Vec<f64>] {
        &self.lower
    }
}

fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, UncertaintyError> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let d = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d < -SEMIDEFINITE_TOL {
            return Err(UncertaintyError::NotPositiveDefinite);
        }
        if d <= SEMIDEFINITE_TOL {
            // zero pivot: the rest of the column must vanish as well
            for i in (j + 1)..n {
                let s = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                if s.abs() > 1e-9 {
                    return Err(UncertaintyError::NotPositiveDefinite);
                }
            }
            continue;
        }
        let djj = d.sqrt();
        l[j][j] = djj;
        for i in (j + 1)..n {
            let s = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = s / djj;
        }
    }
    Ok(l)
}

/// Normalized joint draws `[draw][farm]` in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct JointSample {
    draws: Vec<Vec<f64>>,
    seed: u64,
}

impl JointSample {
    fn draw(
        marginals: &[BetaMarginal],
        copula: &CopulaSpec,
        count: usize,
        seed: u64,
        stream_base: u128,
    ) -> Result<Self, UncertaintyError> {
        let dim = marginals.len();
        if copula.dim() != dim {
            return Err(UncertaintyError::InvalidArgument(format!(
                "copula dimension {} does not match {dim} wind farms",
                copula.dim()
            )));
        }
        let latent: Vec<Vec<f64>> = (0..dim)
            .map(|j| {
                let mut rng = farm_rng(seed, stream_base + j as u128);
                (0..count).map(|_| StandardNormal.sample(&mut rng)).collect()
            })
            .collect();
        let l = copula.cholesky_factor();
        let draws = (0..count)
            .into_par_iter()
            .map(|w| {
                (0..dim)
                    .map(|i| {
                        let x: f64 = (0..=i).map(|k| l[i][k] * latent[k][w]).sum();
                        let m = &marginals[i];
                        inverse_regularized_beta(m.alpha, m.beta, std_normal_cdf(x))
                    })
                    .collect()
            })
            .collect();
        Ok(JointSample { draws, seed })
    }

    /// The draws used for portfolio distributions, from their own streams.
    pub fn portfolio_draws(
        marginals: &[BetaMarginal],
        copula: &CopulaSpec,
        count: usize,
        seed: u64,
    ) -> Result<Self, UncertaintyError> {
        if count < 10_000 {
            return Err(UncertaintyError::InvalidArgument(format!(
                "portfolio sample size {count} below 10000"
            )));
        }
        JointSample::draw(marginals, copula, count, seed, PORTFOLIO_STREAM)
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn draws(&self) -> &[Vec<f64>] {
        &self.draws
    }

    /// Empirical distribution of the summed output of `farms` in MW.
    pub fn portfolio(&self, capacities: &[f64], farms: &[usize]) -> Result<EmpiricalCdf, UncertaintyError> {
        if self.draws.is_empty() {
            return Err(UncertaintyError::InvalidArgument("empty sample".into()));
        }
        let values = self
            .draws
            .iter()
            .map(|d| farms.iter().map(|&j| d[j] * capacities[j]).sum())
            .collect();
        Ok(EmpiricalCdf::new(values, farms.iter().map(|&j| capacities[j]).sum()))
    }
}

/// Empirical distribution of portfolio output in MW.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
    mean: f64,
    capacity: f64,
}

impl EmpiricalCdf {
    pub fn new(mut values: Vec<f64>, capacity: f64) -> Self {
        values.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        EmpiricalCdf {
            sorted: values,
            mean,
            capacity,
        }
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn mean_mw(&self) -> f64 {
        self.mean
    }

    /// Smallest sample value `v` with `F(v) >= p`.
    pub fn quantile_mw(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let k = ((p * n as f64) - 1e-9).ceil().max(1.0) as usize;
        self.sorted[k.min(n) - 1]
    }

    pub fn cdf_mw(&self, v: f64) -> f64 {
        self.sorted.partition_point(|&x| x <= v) as f64 / self.sorted.len() as f64
    }
}

impl WindDistribution for EmpiricalCdf {
    fn mean(&self) -> f64 {
        if self.capacity > 0.0 {
            self.mean / self.capacity
        } else {
            0.0
        }
    }

    fn quantile(&self, p: f64) -> f64 {
        if self.capacity > 0.0 {
            self.quantile_mw(p) / self.capacity
        } else {
            0.0
        }
    }
}

/// Empirical CDF of the total output of all farms.
pub fn portfolio_cdf(
    marginals: &[BetaMarginal],
    capacities: &[f64],
    copula: &CopulaSpec,
    sample_size: usize,
    seed: u64,
) -> Result<EmpiricalCdf, UncertaintyError> {
    check_capacities(marginals, capacities)?;
    let joint = JointSample::portfolio_draws(marginals, copula, sample_size, seed)?;
    joint.portfolio(capacities, &(0..marginals.len()).collect::<Vec<_>>())
}

fn check_capacities(marginals: &[BetaMarginal], capacities: &[f64]) -> Result<(), UncertaintyError> {
    if marginals.len() != capacities.len() {
        return Err(UncertaintyError::InvalidArgument(
            "one capacity per marginal is required".into(),
        ));
    }
    if let Some(c) = capacities.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(UncertaintyError::InvalidArgument(format!("capacity {c} must be >= 0")));
    }
    Ok(())
}

/// Equiprobable (or weighted) wind realizations, stored normalized so the
/// same draws can be rescaled to other installed capacities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSet {
    farm_ids: Vec<String>,
    capacities: Vec<f64>,
    normalized: Vec<Vec<f64>>,
    probabilities: Vec<f64>,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct ScenarioMeta<'a> {
    seed: Option<u64>,
    scenarios: usize,
    generator: &'static str,
    farms: &'a [String],
    capacities: &'a [f64],
}

impl ScenarioSet {
    /// Builds a set from realizations in MW, `[scenario][farm]`.
    pub fn from_realizations(
        farm_ids: Vec<String>,
        capacities: Vec<f64>,
        realizations: Vec<Vec<f64>>,
        probabilities: Vec<f64>,
    ) -> Result<Self, UncertaintyError> {
        if farm_ids.len() != capacities.len() {
            return Err(UncertaintyError::InvalidArgument("one capacity per farm is required".into()));
        }
        if realizations.is_empty() || realizations.len() != probabilities.len() {
            return Err(UncertaintyError::InvalidArgument(
                "need at least one scenario and one probability per scenario".into(),
            ));
        }
        let total: f64 = probabilities.iter().sum();
        if probabilities.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(UncertaintyError::InvalidArgument(
                "scenario probabilities must be non-negative and sum to 1".into(),
            ));
        }
        let mut normalized = Vec::with_capacity(realizations.len());
        for row in &realizations {
            if row.len() != capacities.len() {
                return Err(UncertaintyError::InvalidArgument("ragged realization row".into()));
            }
            let mut norm = Vec::with_capacity(row.len());
            for (&v, &cap) in row.iter().zip(&capacities) {
                if !(v >= 0.0 && v <= cap) {
                    return Err(UncertaintyError::InvalidArgument(format!(
                        "realization {v} outside [0, {cap}]"
                    )));
                }
                norm.push(if cap > 0.0 { v / cap } else { 0.0 });
            }
            normalized.push(norm);
        }
        Ok(ScenarioSet {
            farm_ids,
            capacities,
            normalized,
            probabilities,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.normalized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normalized.is_empty()
    }

    pub fn farm_ids(&self) -> &[String] {
        &self.farm_ids
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn normalized(&self, scenario: usize) -> &[f64] {
        &self.normalized[scenario]
    }

    /// Output of farm `farm` in `scenario`, MW.
    pub fn value(&self, scenario: usize, farm: usize) -> f64 {
        (self.normalized[scenario][farm] * self.capacities[farm]).min(self.capacities[farm])
    }

    /// All farm outputs in `scenario`, MW.
    pub fn realization(&self, scenario: usize) -> Vec<f64> {
        (0..self.capacities.len()).map(|j| self.value(scenario, j)).collect()
    }

    /// The same normalized draws at other installed capacities.
    pub fn with_capacities(&self, capacities: &[f64]) -> Result<Self, UncertaintyError> {
        if capacities.len() != self.capacities.len() {
            return Err(UncertaintyError::InvalidArgument("capacity count mismatch".into()));
        }
        Ok(ScenarioSet {
            capacities: capacities.to_vec(),
            ..self.clone()
        })
    }

    pub fn with_farm_ids(mut self, ids: Vec<String>) -> Self {
        assert_eq!(ids.len(), self.farm_ids.len());
        self.farm_ids = ids;
        self
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("scenario,prob");
        for id in &self.farm_ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for w in 0..self.len() {
            out.push_str(&format!("{w},{}", sig9(self.probabilities[w])));
            for j in 0..self.farm_ids.len() {
                out.push(',');
                out.push_str(&sig9(self.value(w, j)));
            }
            out.push('\n');
        }
        out
    }

    /// Writes the CSV and a one-line JSON sidecar `<path>.meta` holding the
    /// seed and capacities.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), UncertaintyError> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string())?;
        let meta = ScenarioMeta {
            seed: self.seed,
            scenarios: self.len(),
            generator: "pcg64",
            farms: &self.farm_ids,
            capacities: &self.capacities,
        };
        let mut line = serde_json::to_string(&meta).expect("metadata serializes");
        line.push('\n');
        let mut meta_path = path.as_os_str().to_owned();
        meta_path.push(".meta");
        fs::write(meta_path, line)?;
        Ok(())
    }
}

/// Draws `count` equiprobable scenarios: latent `X ~ N(0, corr)`, `Y = Phi(X)`,
/// output `F^-1(Y) * capacity`. Farms are named `w0, w1, ...`.
pub fn sample_scenarios(
    marginals: &[BetaMarginal],
    capacities: &[f64],
    copula: &CopulaSpec,
    count: usize,
    seed: u64,
) -> Result<ScenarioSet, UncertaintyError> {
    if count == 0 {
        return Err(UncertaintyError::InvalidArgument("scenario count must be >= 1".into()));
    }
    check_capacities(marginals, capacities)?;
    let joint = JointSample::draw(marginals, copula, count, seed, 0)?;
    Ok(ScenarioSet {
        farm_ids: (0..marginals.len()).map(|j| format!("w{j}")).collect(),
        capacities: capacities.to_vec(),
        normalized: joint.draws,
        probabilities: vec![1.0 / count as f64; count],
        seed: Some(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uncertainty::{reserve_requirements, std_normal_inv};

    fn paper_marginals() -> Vec<BetaMarginal> {
        vec![
            BetaMarginal::new(3.78, 1.62).unwrap(),
            BetaMarginal::new(5.67, 6.48).unwrap(),
        ]
    }

    fn pearson(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (a, b) in x.iter().zip(y) {
            sxy += (a - mx) * (b - my);
            sxx += (a - mx) * (a - mx);
            syy += (b - my) * (b - my);
        }
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let m = vec![vec![1.0, 0.9, 0.9], vec![0.9, 1.0, -0.9], vec![0.9, -0.9, 1.0]];
        assert_eq!(CopulaSpec::new(m), Err(UncertaintyError::NotPositiveDefinite));
        assert!(CopulaSpec::new(vec![vec![2.0]]).is_err());
        assert!(CopulaSpec::uniform(2, 1.0).is_ok());
    }

    #[test]
    fn independent_uniform_marginals() {
        let u = BetaMarginal::new(1.0, 1.0).unwrap();
        let cop = CopulaSpec::uniform(2, 0.0).unwrap();
        let n = 100_000;
        let s = sample_scenarios(&[u, u], &[1.0, 1.0], &cop, n, 11).unwrap();
        // Kolmogorov-Smirnov 1% critical value ~ 1.628 / sqrt(n)
        let crit = 1.628 / (n as f64).sqrt();
        for j in 0..2 {
            let mut v: Vec<f64> = (0..n).map(|w| s.value(w, j)).collect();
            v.sort_by(f64::total_cmp);
            let d = v
                .iter()
                .enumerate()
                .map(|(i, &x)| ((i + 1) as f64 / n as f64 - x).max(x - i as f64 / n as f64))
                .fold(0.0, f64::max);
            assert!(d < crit, "farm {j}: D = {d}");
        }
    }

    #[test]
    fn latent_correlation_and_means() {
        let m = paper_marginals();
        let cop = CopulaSpec::uniform(2, 0.35).unwrap();
        let n = 100_000;
        let s = sample_scenarios(&m, &[100.0, 50.0], &cop, n, 2024).unwrap();
        let latent: Vec<Vec<f64>> = (0..2)
            .map(|j| {
                (0..n)
                    .map(|w| {
                        let p = m[j].cdf(s.normalized(w)[j]).unwrap().clamp(1e-15, 1.0 - 1e-15);
                        std_normal_inv(p).unwrap()
                    })
                    .collect()
            })
            .collect();
        let r = pearson(&latent[0], &latent[1]);
        assert!((r - 0.35).abs() < 0.01, "{r}");
        for (j, cap) in [100.0, 50.0].into_iter().enumerate() {
            let v: Vec<f64> = (0..n).map(|w| s.value(w, j)).collect();
            let mean = v.iter().sum::<f64>() / n as f64;
            let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            let se = sd / (n as f64).sqrt();
            assert!((mean - m[j].mean() * cap).abs() < 3.0 * se);
            assert!(v.iter().all(|&x| (0.0..=cap).contains(&x)));
        }
    }

    #[test]
    fn same_seed_same_set() {
        let m = paper_marginals();
        let cop = CopulaSpec::uniform(2, 0.35).unwrap();
        let a = sample_scenarios(&m, &[10.0, 20.0], &cop, 100, 7).unwrap();
        let b = sample_scenarios(&m, &[10.0, 20.0], &cop, 100, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        let c = sample_scenarios(&m, &[10.0, 20.0], &cop, 100, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn first_farm_independent_of_farm_count() {
        let m = paper_marginals();
        let one = sample_scenarios(&m[..1], &[1.0], &CopulaSpec::uniform(1, 0.0).unwrap(), 50, 3).unwrap();
        let two = sample_scenarios(&m, &[1.0, 1.0], &CopulaSpec::uniform(2, 0.35).unwrap(), 50, 3).unwrap();
        for w in 0..50 {
            assert_eq!(one.normalized(w)[0], two.normalized(w)[0]);
        }
    }

    #[test]
    fn csv_layout() {
        let s = ScenarioSet::from_realizations(
            vec!["W1".into()],
            vec![50.0],
            vec![vec![50.0], vec![0.0]],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert_eq!(s.to_csv_string(), "scenario,prob,W1\n0,0.5,50\n1,0.5,0\n");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        s.write_csv(&path).unwrap();
        let meta = fs::read_to_string(dir.path().join("s.csv.meta")).unwrap();
        assert_eq!(meta.lines().count(), 1);
        assert!(meta.contains("\"capacities\":[50.0]"));
    }

    #[test]
    fn rejects_bad_realizations() {
        let bad = ScenarioSet::from_realizations(vec!["W".into()], vec![10.0], vec![vec![11.0]], vec![1.0]);
        assert!(bad.is_err());
        let bad = ScenarioSet::from_realizations(vec!["W".into()], vec![10.0], vec![vec![1.0]], vec![0.5]);
        assert!(bad.is_err());
    }

    #[test]
    fn single_farm_portfolio_matches_marginal() {
        let m = BetaMarginal::new(3.78, 1.62).unwrap();
        let cdf = portfolio_cdf(&[m], &[200.0], &CopulaSpec::uniform(1, 0.0).unwrap(), 100_000, 5).unwrap();
        for p in [0.005, 0.1, 0.5, 0.9, 0.995] {
            let exact = m.inv_cdf(p).unwrap() * 200.0;
            // binomial band on the CDF at the exact quantile
            let band = 2.576 * (p * (1.0 - p) / 100_000.0).sqrt();
            let f = cdf.cdf_mw(exact);
            assert!((f - p).abs() < band + 1e-5, "p={p}: F={f}");
        }
    }

    #[test]
    fn comonotone_portfolio_adds_quantiles() {
        let m = BetaMarginal::new(5.67, 6.48).unwrap();
        let cdf = portfolio_cdf(&[m, m], &[30.0, 70.0], &CopulaSpec::uniform(2, 1.0).unwrap(), 100_000, 9).unwrap();
        for p in [0.01, 0.25, 0.5, 0.75, 0.99] {
            let exact = m.inv_cdf(p).unwrap() * 100.0;
            let band = 2.576 * (p * (1.0 - p) / 100_000.0).sqrt();
            assert!((cdf.cdf_mw(exact) - p).abs() < band + 1e-5, "p={p}");
        }
    }

    #[test]
    fn diversification_lowers_up_requirement() {
        let m = paper_marginals();
        let caps = [912.0, 456.0];
        let cdf = portfolio_cdf(&m, &caps, &CopulaSpec::uniform(2, 0.35).unwrap(), 100_000, 1).unwrap();
        let pooled = reserve_requirements(&cdf, cdf.capacity(), 0.99).unwrap();
        let separate: f64 = m
            .iter()
            .zip(caps)
            .map(|(mj, c)| reserve_requirements(mj, c, 0.99).unwrap().up)
            .sum();
        assert!(pooled.up <= separate, "{} > {separate}", pooled.up);
    }

    #[test]
    fn small_portfolio_sample_rejected() {
        let m = paper_marginals();
        let cop = CopulaSpec::uniform(2, 0.35).unwrap();
        assert!(portfolio_cdf(&m, &[1.0, 1.0], &cop, 100, 1).is_err());
    }
}
