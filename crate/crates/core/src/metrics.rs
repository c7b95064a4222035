//! Sample-based proper scoring rules and calibration diagnostics.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::probmodel::ForecastDistribution;

pub const WQL_LEVELS: [f64; 3] = [0.1, 0.5, 0.9];
/// Significance levels for central-interval coverage.
pub const INTERVAL_LEVELS: [f64; 2] = [0.1, 0.5];
/// Levels for per-quantile exceedance `P(x <= q_tau)`.
pub const EXCEEDANCE_LEVELS: [f64; 3] = [0.1, 0.5, 0.9];

/// Anything that can answer "what is the `q` quantile for region `i` at
/// horizon step `t`".
pub trait QuantileForecast {
    fn n_regions(&self) -> usize;
    fn horizon(&self) -> usize;
    fn quantile(&self, region: usize, step: usize, q: f64) -> f64;
}

/// Type-7 quantile (linear interpolation between order statistics) of an
/// ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("quantile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidInput(format!("quantile level {q} outside [0, 1]")));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&s, q))
}

fn check_samples(samples: &[f64], what: &str) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "{what} needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{what}: non-finite sample")));
    }
    Ok(())
}

/// `(1/n) sum |x_k - y| - (1/(2n^2)) sum_k sum_l |x_k - x_l|`.
///
/// The pairwise term uses the sorted identity
/// `sum_{k,l} |x_k - x_l| = 2 sum_k (2k - n - 1) x_(k)`, so this is
/// `O(n log n)`. Values are taken relative to the minimum, which leaves the
/// identity unchanged and makes a constant sample give exactly zero spread.
pub fn crps_from_samples(samples: &[f64], observed: f64) -> Result<f64> {
    check_samples(samples, "CRPS")?;
    let n = samples.len() as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let abs_err: f64 = sorted.iter().map(|x| (x - observed).abs()).sum::<f64>() / n;
    let lo = sorted[0];
    let pairwise: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, x)| (2.0 * (k as f64 + 1.0) - n - 1.0) * (x - lo))
        .sum::<f64>()
        * 2.0;
    Ok((abs_err - pairwise / (2.0 * n * n)).max(0.0))
}

/// Energy score with `beta = 1` and Euclidean norm over the flattened paths.
pub fn energy_score<P: AsRef<[f64]>>(paths: &[P], observed: &[f64]) -> Result<f64> {
    if paths.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "energy score needs at least 2 sample paths, got {}",
            paths.len()
        )));
    }
    let dim = observed.len();
    for p in paths {
        if p.as_ref().len() != dim {
            return Err(Error::DimensionMismatch {
                what: "sample path length",
                expected: dim,
                actual: p.as_ref().len(),
            });
        }
    }
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let n = paths.len() as f64;
    let to_obs: f64 = paths.iter().map(|p| dist(p.as_ref(), observed)).sum::<f64>() / n;
    let mut spread = 0.0;
    for (k, a) in paths.iter().enumerate() {
        for b in &paths[k + 1..] {
            spread += dist(a.as_ref(), b.as_ref());
        }
    }
    // the double sum counts each unordered pair twice
    Ok((to_obs - 2.0 * spread / (2.0 * n * n)).max(0.0))
}

/// Pinball penalty for a single cell.
pub fn quantile_penalty(q: f64, x: f64, tau: f64) -> f64 {
    if q > x {
        (1.0 - tau) * (q - x).abs()
    } else {
        tau * (q - x).abs()
    }
}

fn check_shape<F: QuantileForecast + ?Sized>(f: &F, observed: &DMatrix<f64>) -> Result<()> {
    if observed.nrows() != f.n_regions() {
        return Err(Error::DimensionMismatch {
            what: "observed regions",
            expected: f.n_regions(),
            actual: observed.nrows(),
        });
    }
    if observed.ncols() != f.horizon() {
        return Err(Error::DimensionMismatch {
            what: "observed horizon",
            expected: f.horizon(),
            actual: observed.ncols(),
        });
    }
    Ok(())
}

fn check_level(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} {v} outside (0, 1)")))
    }
}

/// `2 * sum Q_tau / sum |x|` over every cell of `observed` (N x m).
pub fn weighted_quantile_loss<F: QuantileForecast + ?Sized>(
    f: &F,
    observed: &DMatrix<f64>,
    tau: f64,
) -> Result<f64> {
    check_level(tau, "quantile level")?;
    check_shape(f, observed)?;
    let denom: f64 = observed.iter().map(|x| x.abs()).sum();
    if denom == 0.0 {
        return Err(Error::InvalidInput(
            "weighted quantile loss is undefined when every observation is zero".into(),
        ));
    }
    let mut num = 0.0;
    for i in 0..observed.nrows() {
        for t in 0..observed.ncols() {
            num += quantile_penalty(f.quantile(i, t, tau), observed[(i, t)], tau);
        }
    }
    Ok(2.0 * num / denom)
}

/// Fraction of cells inside the central interval `[q_{a/2}, q_{1-a/2}]`.
pub fn coverage<F: QuantileForecast + ?Sized>(
    f: &F,
    observed: &DMatrix<f64>,
    alpha: f64,
) -> Result<f64> {
    check_level(alpha, "significance level")?;
    check_shape(f, observed)?;
    let mut hits = 0usize;
    for i in 0..observed.nrows() {
        for t in 0..observed.ncols() {
            let x = observed[(i, t)];
            if f.quantile(i, t, alpha / 2.0) <= x && x <= f.quantile(i, t, 1.0 - alpha / 2.0) {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / observed.len() as f64)
}

/// Fraction of cells with `x <= q_tau`; calibrated forecasts give `tau`.
pub fn quantile_coverage<F: QuantileForecast + ?Sized>(
    f: &F,
    observed: &DMatrix<f64>,
    tau: f64,
) -> Result<f64> {
    check_level(tau, "quantile level")?;
    check_shape(f, observed)?;
    let mut hits = 0usize;
    for i in 0..observed.nrows() {
        for t in 0..observed.ncols() {
            if observed[(i, t)] <= f.quantile(i, t, tau) {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / observed.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub crps: f64,
    /// `(tau, WQL[tau])`.
    pub wql: Vec<(f64, f64)>,
    /// `(alpha, interval coverage)`.
    pub interval_coverage: Vec<(f64, f64)>,
    /// `(tau, P(x <= q_tau))`.
    pub quantile_coverage: Vec<(f64, f64)>,
    pub energy: f64,
}

impl Scores {
    /// `(metric, level, value)` rows in a fixed order.
    pub fn rows(&self) -> Vec<(&'static str, Option<f64>, f64)> {
        let mut out = vec![("crps", None, self.crps), ("energy", None, self.energy)];
        out.extend(self.wql.iter().map(|&(l, v)| ("wql", Some(l), v)));
        out.extend(
            self.interval_coverage
                .iter()
                .map(|&(l, v)| ("interval_coverage", Some(l), v)),
        );
        out.extend(
            self.quantile_coverage
                .iter()
                .map(|&(l, v)| ("quantile_coverage", Some(l), v)),
        );
        out
    }
}

/// Scores averaged over all regions and horizon steps plus a per-region
/// breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub overall: Scores,
    pub per_region: Vec<(String, Scores)>,
}

fn scores_for(
    f: &ForecastDistribution,
    observed: &DMatrix<f64>,
    regions: &[usize],
) -> Result<Scores> {
    let view = RegionView { f, regions };
    let obs = DMatrix::from_fn(regions.len(), observed.ncols(), |r, t| observed[(regions[r], t)]);
    let mut crps = 0.0;
    for (r, &i) in regions.iter().enumerate() {
        for t in 0..obs.ncols() {
            crps += crps_from_samples(f.cell(i, t), obs[(r, t)])?;
        }
    }
    crps /= obs.len() as f64;
    let wql = WQL_LEVELS
        .iter()
        .map(|&tau| weighted_quantile_loss(&view, &obs, tau).map(|v| (tau, v)))
        .collect::<Result<_>>()?;
    let interval_coverage = INTERVAL_LEVELS
        .iter()
        .map(|&a| coverage(&view, &obs, a).map(|v| (a, v)))
        .collect::<Result<_>>()?;
    let quantile_coverage = EXCEEDANCE_LEVELS
        .iter()
        .map(|&tau| self::quantile_coverage(&view, &obs, tau).map(|v| (tau, v)))
        .collect::<Result<_>>()?;
    let paths: Vec<Vec<f64>> = (0..f.n_samples())
        .map(|k| {
            regions
                .iter()
                .flat_map(|&i| (0..obs.ncols()).map(move |t| (i, t)))
                .map(|(i, t)| f.cell(i, t)[k])
                .collect()
        })
        .collect();
    let flat_obs: Vec<f64> = (0..regions.len())
        .flat_map(|r| (0..obs.ncols()).map(move |t| (r, t)))
        .map(|(r, t)| obs[(r, t)])
        .collect();
    let energy = energy_score(&paths, &flat_obs)?;
    Ok(Scores {
        crps,
        wql,
        interval_coverage,
        quantile_coverage,
        energy,
    })
}

/// Scores a sample forecast against the observed `N x m` matrix.
pub fn score(f: &ForecastDistribution, observed: &DMatrix<f64>) -> Result<ScoreReport> {
    check_shape(f, observed)?;
    let all: Vec<usize> = (0..f.n_regions()).collect();
    let overall = scores_for(f, observed, &all)?;
    let per_region = f
        .region_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| scores_for(f, observed, &[i]).map(|s| (id.clone(), s)))
        .collect::<Result<_>>()?;
    Ok(ScoreReport {
        overall,
        per_region,
    })
}

/// Overall scores of each horizon step on its own.
pub fn score_by_horizon(f: &ForecastDistribution, observed: &DMatrix<f64>) -> Result<Vec<Scores>> {
    check_shape(f, observed)?;
    let all: Vec<usize> = (0..f.n_regions()).collect();
    (0..f.horizon())
        .map(|t| scores_for(&f.step(t), &observed.columns(t, 1).into_owned(), &all))
        .collect()
}

struct RegionView<'a> {
    f: &'a ForecastDistribution,
    regions: &'a [usize],
}

impl QuantileForecast for RegionView<'_> {
    fn n_regions(&self) -> usize {
        self.regions.len()
    }
    fn horizon(&self) -> usize {
        self.f.horizon()
    }
    fn quantile(&self, region: usize, step: usize, q: f64) -> f64 {
        self.f.quantile(self.regions[region], step, q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Fixed quantile function for every cell.
    struct Fixed<F: Fn(usize, usize, f64) -> f64>(usize, usize, F);

    impl<F: Fn(usize, usize, f64) -> f64> QuantileForecast for Fixed<F> {
        fn n_regions(&self) -> usize {
            self.0
        }
        fn horizon(&self) -> usize {
            self.1
        }
        fn quantile(&self, i: usize, t: usize, q: f64) -> f64 {
            (self.2)(i, t, q)
        }
    }

    #[test]
    fn quantile_examples() {
        let s = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(quantile(&s, 0.5).unwrap(), 3.0);
        assert_eq!(quantile(&s, 0.0).unwrap(), 1.0);
        assert_eq!(quantile(&s, 1.0).unwrap(), 5.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 2.5);
        assert!(quantile(&[], 0.5).is_err());
    }

    #[test]
    fn crps_examples() {
        assert_eq!(crps_from_samples(&[2.0, 2.0, 2.0], 2.0).unwrap(), 0.0);
        assert!((crps_from_samples(&[0.0, 1.0], 0.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(crps_from_samples(&[1.0], 0.0).is_err());
    }

    #[test]
    fn crps_matches_pairwise_definition() {
        let s: Vec<f64> = (0..37).map(|k| ((k * 17) as f64 * 0.3).sin() * 3.0).collect();
        let y = 0.4;
        let n = s.len() as f64;
        let a: f64 = s.iter().map(|x| (x - y).abs()).sum::<f64>() / n;
        let mut b = 0.0;
        for x in &s {
            for z in &s {
                b += (x - z).abs();
            }
        }
        let direct = a - b / (2.0 * n * n);
        assert!((crps_from_samples(&s, y).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn energy_examples() {
        let paths = vec![vec![0.0, 0.0], vec![2.0, 0.0]];
        assert!((energy_score(&paths, &[0.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        let same = vec![vec![1.0, 2.0]; 4];
        assert_eq!(energy_score(&same, &[1.0, 2.0]).unwrap(), 0.0);
        assert!(energy_score(&[vec![1.0]], &[1.0]).is_err());
    }

    #[test]
    fn wql_examples() {
        let exact = Fixed(2, 3, |i, t, _| (i * 3 + t) as f64 + 1.0);
        let obs = DMatrix::from_fn(2, 3, |i, t| (i * 3 + t) as f64 + 1.0);
        assert_eq!(weighted_quantile_loss(&exact, &obs, 0.5).unwrap(), 0.0);

        let one = Fixed(1, 1, |_, _, _| 12.0);
        let x = DMatrix::from_element(1, 1, 10.0);
        assert!((weighted_quantile_loss(&one, &x, 0.5).unwrap() - 0.2).abs() < 1e-15);

        // under-prediction at tau = 0.9 uses the tau branch
        let low = Fixed(1, 1, |_, _, _| 7.0);
        let want = 2.0 * (0.9 * 3.0) / 10.0;
        assert!((weighted_quantile_loss(&low, &x, 0.9).unwrap() - want).abs() < 1e-15);
        assert_eq!(quantile_penalty(7.0, 10.0, 0.9), 0.9 * 3.0);
        assert!((quantile_penalty(13.0, 10.0, 0.9) - 0.3).abs() < 1e-15);

        let zeros = DMatrix::zeros(1, 1);
        assert!(weighted_quantile_loss(&one, &zeros, 0.5).is_err());
    }

    #[test]
    fn coverage_extremes() {
        let obs = DMatrix::from_fn(3, 4, |i, t| (i + t) as f64);
        let wide = Fixed(3, 4, |_, _, q| if q < 0.5 { -1e300 } else { 1e300 });
        assert_eq!(coverage(&wide, &obs, 0.1).unwrap(), 1.0);
        let below = Fixed(3, 4, |_, _, _| -1.0);
        assert_eq!(coverage(&below, &obs, 0.1).unwrap(), 0.0);
        assert_eq!(quantile_coverage(&below, &obs, 0.9).unwrap(), 0.0);
    }

    fn samples() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-100.0f64..100.0, 2..40)
    }

    proptest! {
        #[test]
        fn quantile_is_monotone(s in samples(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(quantile(&s, lo).unwrap() <= quantile(&s, hi).unwrap());
        }

        #[test]
        fn point_mass_crps_is_absolute_error(v in -50.0f64..50.0, y in -50.0f64..50.0, n in 2usize..30) {
            let c = crps_from_samples(&vec![v; n], y).unwrap();
            prop_assert!((c - (v - y).abs()).abs() < 1e-12);
        }

        #[test]
        fn energy_reduces_to_crps_in_one_dimension(s in samples(), y in -100.0f64..100.0) {
            let paths: Vec<Vec<f64>> = s.iter().map(|v| vec![*v]).collect();
            let e = energy_score(&paths, &[y]).unwrap();
            let c = crps_from_samples(&s, y).unwrap();
            prop_assert!((e - c).abs() < 1e-12 * c.abs().max(1.0));
        }

        #[test]
        fn translation_and_scale_equivariance(s in samples(), y in -100.0f64..100.0,
                                              k in -100.0f64..100.0, scale in 0.01f64..10.0) {
            let c = crps_from_samples(&s, y).unwrap();
            let shifted: Vec<f64> = s.iter().map(|v| v + k).collect();
            prop_assert!((crps_from_samples(&shifted, y + k).unwrap() - c).abs() < 1e-10);
            let scaled: Vec<f64> = s.iter().map(|v| v * scale).collect();
            prop_assert!((crps_from_samples(&scaled, y * scale).unwrap() - scale * c).abs() < 1e-10);

            let paths: Vec<Vec<f64>> = s.chunks(2).filter(|c| c.len() == 2).map(|c| c.to_vec()).collect();
            if paths.len() >= 2 {
                let obs = [y, -y];
                let e = energy_score(&paths, &obs).unwrap();
                let sp: Vec<Vec<f64>> = paths.iter().map(|p| p.iter().map(|v| v + k).collect()).collect();
                prop_assert!((energy_score(&sp, &[y + k, -y + k]).unwrap() - e).abs() < 1e-10);
                let sc: Vec<Vec<f64>> = paths.iter().map(|p| p.iter().map(|v| v * scale).collect()).collect();
                prop_assert!((energy_score(&sc, &[y * scale, -y * scale]).unwrap() - scale * e).abs() < 1e-10);
            }
        }
    }
}
