use dynbo::config::ExperimentConfig;
use dynbo::HarnessError;
use dynbo_core::benchmarks::PeakShape;

#[test]
fn minimal_config_takes_defaults() {
    let cfg = ExperimentConfig::from_toml("output = \"out\"\n").unwrap();
    assert_eq!(cfg.repetitions, 31);
    assert_eq!(cfg.steps, 10);
    assert_eq!(cfg.algorithms.iter().map(|a| a.name.as_str()).collect::<Vec<_>>(), ["deto", "rbo"]);
    assert_eq!(cfg.baseline_name(), "rbo");
    let ids: Vec<String> = cfg.instances().into_iter().map(|p| p.id).collect();
    assert_eq!(ids, ["mpb-n3-m5-h1-s1"]);
}

#[test]
fn zero_repetitions_names_the_field() {
    let err = ExperimentConfig::from_toml("repetitions = 0\n").unwrap_err();
    match err {
        HarnessError::Config(msg) => assert!(msg.contains("repetitions"), "{msg}"),
        other => panic!("unexpected error {other:?}"),
    }
}

#[test]
fn unknown_fields_and_duplicate_names_are_rejected() {
    assert!(ExperimentConfig::from_toml("repetition = 3\n").is_err());
    let dup = "[[algorithms]]\nname = \"a\"\nkind = \"rbo\"\n[[algorithms]]\nname = \"a\"\nkind = \"cbo\"\n";
    let msg = ExperimentConfig::from_toml(dup).unwrap_err().to_string();
    assert!(msg.contains("algorithms[1].name"), "{msg}");
}

#[test]
fn full_config_round_trips() {
    let text = r#"
steps = 4
repetitions = 2
master_seed = 9
output = "res"
baseline = "plain"

[[problems]]
shape = "gaussian"
dims = [2, 5]
peaks = 3
severities = [[1.0, 1.0], [5.0, 2.0]]

[[algorithms]]
name = "lmc"
kind = "deto"
surrogate = "lmc"
lmc_rank = 2
source_policy = "recent"
init = "random"

[[algorithms]]
name = "plain"
kind = "rbo"

[algorithms.acq]
omega = 1.5
"#;
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    assert_eq!(cfg.problems[0].shape, PeakShape::Gaussian);
    assert_eq!(cfg.instances().len(), 4);
    assert_eq!(cfg.instances()[3].id, "mpbg-n5-m3-h5-s2");
    assert_eq!(cfg.algorithms[1].acq.omega, 1.5);
    assert_eq!(cfg.baseline_name(), "plain");
    let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(again, cfg);
}
