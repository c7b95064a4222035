use std::path::{Path, PathBuf};

use stcast_core::causal::post_from_onset;
use stcast_core::io::{read_panel, read_regions, write_panel, write_regions};
use stcast_core::synth::{self, GeneratorSpec};
use stcast_core::Error;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn regions() -> stcast_core::RegionSet {
    read_regions(&fixture("regions.csv")).unwrap().0
}

#[test]
fn well_formed_fixture_loads() {
    let (set, treated) = read_regions(&fixture("regions.csv")).unwrap();
    assert_eq!(treated, vec![true, false]);
    let data = read_panel(&fixture("panel.csv"), &set, None).unwrap();
    assert_eq!(data.covariate_names, vec!["R", "M"]);
    let onset = data.times[6];
    let post = post_from_onset(&data.times, onset);
    let panel = data.into_panel(&set, treated, post).unwrap();
    assert_eq!((panel.n_regions(), panel.n_times(), panel.n_covariates()), (2, 10, 2));
    assert_eq!(panel.y()[(1, 3)], 12.5);
    assert_eq!(panel.covariates()[1][(1, 4)], 0.2);
    assert_eq!(panel.post().iter().filter(|p| **p).count(), 4);
}

#[test]
fn requested_covariate_must_exist() {
    let err = read_panel(&fixture("panel.csv"), &regions(), Some(&["R".into(), "V".into()])).unwrap_err();
    assert!(matches!(&err, Error::MissingColumn { column, .. } if column == "V"), "{err}");
}

fn line_of(e: &Error) -> Option<u64> {
    match e {
        Error::Parse { line, .. }
        | Error::DuplicateKey { line, .. }
        | Error::MissingRegion { line, .. }
        | Error::NonMonotoneDates { line, .. } => Some(*line),
        _ => None,
    }
}

#[test]
fn malformed_panels_are_diagnosed() {
    // (file, expected kind, expected line)
    let cases: &[(&str, &str, Option<u64>)] = &[
        ("unknown_region.csv", "missing-region", Some(7)),
        ("duplicate_row.csv", "duplicate-key", Some(6)),
        ("non_monotone_dates.csv", "non-monotone", Some(6)),
        ("missing_y_column.csv", "missing-column", None),
        ("missing_date.csv", "gap", None),
        ("gap_in_first_region.csv", "gap", None),
        ("region_without_rows.csv", "gap", None),
        ("header_only.csv", "gap", None),
        ("empty_file.csv", "missing-column", None),
        ("nan_target.csv", "parse", Some(8)),
        ("infinite_covariate.csv", "parse", Some(9)),
        ("non_numeric_target.csv", "parse", Some(4)),
        ("bad_date.csv", "parse", Some(10)),
        ("short_row.csv", "parse", Some(11)),
        ("empty_target.csv", "parse", Some(12)),
    ];
    let set = regions();
    for (name, kind, line) in cases {
        let err = read_panel(&fixture(&format!("malformed/{name}")), &set, None)
            .expect_err(&format!("{name} was accepted"));
        let got = match &err {
            Error::MissingRegion { .. } => "missing-region",
            Error::DuplicateKey { .. } => "duplicate-key",
            Error::NonMonotoneDates { .. } => "non-monotone",
            Error::MissingColumn { .. } => "missing-column",
            Error::Gap { .. } => "gap",
            Error::Parse { .. } => "parse",
            _ => "other",
        };
        assert_eq!(got, *kind, "{name}: {err}");
        assert_eq!(line_of(&err), *line, "{name}: {err}");
        assert!(err.to_string().contains(name), "{name}: diagnostic lacks the path: {err}");
    }
}

#[test]
fn malformed_region_tables_are_diagnosed() {
    for name in [
        "regions_duplicate_id.csv",
        "regions_bad_latitude.csv",
        "regions_bad_flag.csv",
        "regions_missing_lon.csv",
    ] {
        let err = read_regions(&fixture(&format!("malformed/{name}"))).expect_err(name);
        assert!(!err.to_string().is_empty());
        assert!(err.to_string().contains(name), "{name}: {err}");
    }
}

#[test]
fn every_corpus_file_is_rejected_by_some_reader() {
    let set = regions();
    let dir = fixture("malformed");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let rejected = if path.file_name().unwrap().to_string_lossy().starts_with("regions_") {
            read_regions(&path).is_err()
        } else {
            read_panel(&path, &set, None).is_err()
        };
        assert!(rejected, "{} accepted", path.display());
        n += 1;
    }
    assert!(n >= 19);
}

#[test]
fn synthetic_panel_round_trips_through_csv() {
    let sim = synth::generate(&GeneratorSpec { seed: 21, ..GeneratorSpec::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (rp, pp) = (dir.path().join("regions.csv"), dir.path().join("panel.csv"));
    write_regions(&rp, &sim.regions, sim.panel.treated()).unwrap();
    write_panel(&pp, &sim.panel).unwrap();

    let (set, treated) = read_regions(&rp).unwrap();
    assert_eq!(set.ids(), sim.regions.ids());
    for (a, b) in set.regions().iter().zip(sim.regions.regions()) {
        assert!((a.location.lat - b.location.lat).abs() < 1e-10);
        assert!((a.location.lon - b.location.lon).abs() < 1e-10);
    }
    let data = read_panel(&pp, &set, None).unwrap();
    let post = sim.panel.post().to_vec();
    let panel = data.into_panel(&set, treated, post).unwrap();
    assert_eq!(panel.times(), sim.panel.times());
    assert_eq!(panel.treated(), sim.panel.treated());
    assert_eq!(panel.covariate_names(), sim.panel.covariate_names());
    let worst = (panel.y() - sim.panel.y()).amax();
    let worst_cov = panel
        .covariates()
        .iter()
        .zip(sim.panel.covariates())
        .map(|(a, b)| (a - b).amax())
        .fold(0.0, f64::max);
    assert!(worst < 1e-10 && worst_cov < 1e-10, "{worst:e} {worst_cov:e}");
}
