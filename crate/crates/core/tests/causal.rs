use nalgebra::DMatrix;

use stcast_core::causal::{
    self, build_design_matrix, DesignOptions, InstrumentSet, LAG_COLUMN,
};
use stcast_core::synth::{self, GeneratorSpec};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn error_shrinks_with_series_length() {
    let mut rho_med = Vec::new();
    let mut max_med = Vec::new();
    for t_steps in [100, 300, 1000] {
        let mut rho_err = Vec::new();
        let mut max_err = Vec::new();
        for seed in 0..50 {
            let spec = GeneratorSpec {
                t_steps,
                post_onset_index: t_steps / 2,
                seed,
                ..GeneratorSpec::default()
            };
            let sim = synth::generate(&spec).unwrap();
            let est = causal::estimate(&sim.panel, &sim.spatial, DesignOptions::default(), InstrumentSet::SpatialLags)
                .unwrap();
            rho_err.push((est.rho - sim.truth.rho).abs());
            let worst = est
                .coefficients()
                .iter()
                .zip(sim.truth.coefficients())
                .map(|(c, (_, v))| (c.estimate - v).abs())
                .fold(0.0, f64::max);
            max_err.push(worst);
        }
        rho_med.push(median(rho_err));
        max_med.push(median(max_err));
    }
    assert!(rho_med.windows(2).all(|w| w[1] < w[0]), "rho: {rho_med:?}");
    assert!(max_med.windows(2).all(|w| w[1] < w[0]), "all coefficients: {max_med:?}");
}

#[test]
fn zero_effect_keeps_trends_parallel() {
    let mut diffs = Vec::new();
    for seed in 0..300 {
        let spec = GeneratorSpec {
            delta: 0.0,
            seed,
            ..GeneratorSpec::default()
        };
        let sim = synth::generate(&spec).unwrap();
        let p = &sim.panel;
        let mean = |treated: bool, post: bool| {
            let cells: Vec<f64> = (0..p.n_regions())
                .filter(|i| p.treated()[*i] == treated)
                .flat_map(|i| (0..p.n_times()).filter(|t| p.post()[*t] == post).map(move |t| p.y()[(i, t)]))
                .collect();
            cells.iter().sum::<f64>() / cells.len() as f64
        };
        let pre_gap = mean(true, false) - mean(false, false);
        let post_gap = mean(true, true) - mean(false, true);
        diffs.push(post_gap - pre_gap);
    }
    let n = diffs.len() as f64;
    let m = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let se = sd / n.sqrt();
    assert!(m.abs() < 3.0 * se, "mean gap change {m} vs MC SE {se}");
}

#[test]
fn exogenous_lag_reduces_to_ols() {
    for seed in [0, 5, 9] {
        let sim = synth::generate(&GeneratorSpec { seed, ..GeneratorSpec::default() }).unwrap();
        let design = build_design_matrix(&sim.panel, &sim.spatial, DesignOptions::default()).unwrap();
        let x = &design.x;
        let xtx = x.transpose() * x;
        let xty = x.transpose() * &design.targets;
        let beta = xtx.cholesky().unwrap().solve(&xty);

        let est = causal::estimate(&sim.panel, &sim.spatial, DesignOptions::default(), InstrumentSet::Exogenous)
            .unwrap();
        let got: Vec<f64> = est.coefficients().iter().map(|c| c.estimate).collect();
        assert_eq!(design.columns[0], LAG_COLUMN);
        for (g, b) in got.iter().zip(beta.iter()) {
            assert!((g - b).abs() < 1e-6, "{g} vs {b}");
        }
    }
}

#[test]
fn ablations_change_design_as_documented() {
    let sim = synth::generate(&GeneratorSpec::default()).unwrap();
    let d = sim.panel.n_covariates();
    let width = |spatial, factors| {
        build_design_matrix(&sim.panel, &sim.spatial, DesignOptions { spatial, factors })
            .unwrap()
            .x
            .ncols()
    };
    assert_eq!(width(true, true) - width(true, false), d);
    assert_eq!(width(false, true) - width(false, false), d);
    assert_eq!(width(true, true) - width(false, true), 1);

    let no_sp = build_design_matrix(&sim.panel, &sim.spatial, DesignOptions { spatial: false, factors: true }).unwrap();
    assert!(!no_sp.columns.iter().any(|c| c == LAG_COLUMN));
    assert!(causal::estimate_rho_iv(&no_sp, &sim.spatial, &sim.panel, InstrumentSet::SpatialLags).is_err());
    let est = causal::estimate(&sim.panel, &sim.spatial, DesignOptions { spatial: false, factors: true }, InstrumentSet::SpatialLags)
        .unwrap();
    assert_eq!(est.rho, 0.0);
    assert!(est.std_errors.rho.is_none());

    let no_f = causal::estimate(&sim.panel, &sim.spatial, DesignOptions { spatial: false, factors: false }, InstrumentSet::SpatialLags)
        .unwrap();
    assert!(no_f.gamma.is_empty());
}

#[test]
fn adjustment_only_touches_treated_post_cells() {
    let sim = synth::generate(&GeneratorSpec { seed: 3, ..GeneratorSpec::default() }).unwrap();
    let est = causal::estimate(&sim.panel, &sim.spatial, DesignOptions::default(), InstrumentSet::SpatialLags)
        .unwrap();
    let y_tilde = causal::causal_adjust(&sim.panel, &est);
    let p = &sim.panel;
    let moved = DMatrix::from_fn(p.n_regions(), p.n_times(), |i, t| y_tilde[(i, t)] != p.y()[(i, t)]);
    for i in 0..p.n_regions() {
        for t in 0..p.n_times() {
            assert_eq!(moved[(i, t)], p.treated_post(i, t) == 1.0, "cell ({i}, {t})");
        }
    }
}
