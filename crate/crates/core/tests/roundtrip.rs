//! Files written by the simulator and the report writers read back exactly.

use std::fs::File;

use splinemix::io::{
    numbered, parse_logistic_means, parse_trajectory_means, read_dataset, read_truth, write_covariates_csv,
    write_data_csv, write_logistic_csv, write_trajectories_csv, write_truth_csv,
};
use splinemix::postproc::summarize_with_level;
use splinemix::sim::{generate_scenario, ScenarioSpec};
use splinemix::{build_basis, run_chain, FitConfig};

#[test]
fn simulated_dataset_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    for spec in [ScenarioSpec::scenario_a(), ScenarioSpec::scenario_b()] {
        let (data, truth) = generate_scenario(&spec, 3).unwrap();
        let subjects = numbered(data.n_subjects());
        let (d, c, t) = (
            dir.path().join("data.csv"),
            dir.path().join("cov.csv"),
            dir.path().join("truth.csv"),
        );
        write_data_csv(&d, &data, &subjects, &numbered(data.n_entries())).unwrap();
        write_covariates_csv(&c, &data, &subjects).unwrap();
        write_truth_csv(&t, &truth).unwrap();

        let back = read_dataset(&d, Some(&c)).unwrap();
        assert_eq!(back.dataset, data);
        assert_eq!(back.subjects, subjects);
        assert_eq!(back.raw_times, data.grid().times());
        assert_eq!(read_truth(&t).unwrap(), truth);
    }
}

#[test]
fn summaries_round_trip() {
    let mut spec = ScenarioSpec::scenario_a();
    spec.subjects = 30;
    spec.time_points = 12;
    let (data, _) = generate_scenario(&spec, 0).unwrap();
    let cfg = FitConfig {
        components: 2,
        basis: 4,
        iterations: 60,
        burn_in: 20,
        seed: 1,
        ..FitConfig::default()
    };
    let samples = run_chain(&data, &cfg).unwrap();
    let basis = build_basis(data.grid(), 4).unwrap();
    let summary = summarize_with_level(&samples, &basis, 0.9).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let tp = dir.path().join("traj.csv");
    let lp = dir.path().join("logit.csv");
    write_trajectories_csv(&tp, &summary, data.grid().times()).unwrap();
    let names = vec!["intercept".to_string(), "x1".into(), "x2".into(), "x3".into()];
    write_logistic_csv(&lp, &summary, &names).unwrap();

    let means = parse_trajectory_means(File::open(&tp).unwrap()).unwrap();
    for band in &summary.trajectories {
        assert_eq!(means[band.component][band.entry], band.mean);
    }
    let logistic = parse_logistic_means(File::open(&lp).unwrap()).unwrap();
    assert_eq!(logistic.names, names);
    assert_eq!(logistic.means.len(), 1);
    for c in &summary.logistic {
        assert_eq!(logistic.means[c.component][c.coefficient], c.mean);
    }
}
