use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clockclosure_cli::{run_scenario, RunOptions, ScenarioConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clockclosure"))
}

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn without_timestamp(report: &str) -> String {
    report.lines().filter(|l| !l.trim_start().starts_with("\"generated_at\"")).collect::<Vec<_>>().join("\n")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn yb_config(extra: &str) -> String {
    format!(
        "name = \"yb_test\"\nmode = \"simulate\"\nlevels = \"{}\"\ncycle = [\"1S0-3P0\", \"3P0-J2\", \"1S0-J2\"]\nseed = 11\n{extra}",
        data("levels/yb_i.csv").display()
    )
}

#[test]
fn identical_runs_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["run", "--config", "yb171_123", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let ra = std::fs::read_to_string(a.join("report.json")).unwrap();
    let rb = std::fs::read_to_string(b.join("report.json")).unwrap();
    assert!(ra.contains("\"generated_at\""));
    assert_eq!(without_timestamp(&ra), without_timestamp(&rb));
    for name in ["series_1S0-3P0.csv", "allan_3P0-J2.csv", "fringe_1S0-J2.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }

    let c = dir.path().join("c");
    let o = run(&["run", "--config", "yb171_123", "--out", c.to_str().unwrap(), "--seed", "12345"]);
    assert!(o.status.success());
    let rc = std::fs::read_to_string(c.join("report.json")).unwrap();
    assert_ne!(without_timestamp(&ra), without_timestamp(&rc));
    assert!(rc.contains("\"seed\": 12345"));
}

#[test]
fn bundled_yb_scenario_is_sub_hz() {
    let dir = tempfile::tempdir().unwrap();
    let loaded = ScenarioConfig::load(&data("scenarios/yb171_123.toml")).unwrap();
    let start = std::time::Instant::now();
    let outcome = run_scenario(&loaded, &RunOptions { out_dir: Some(dir.path().to_path_buf()), seed: None }).unwrap();
    assert!(start.elapsed().as_secs_f64() < 60.0);
    let closure = outcome.report.closure.unwrap();
    assert!(closure.sigma_hz < 1.0, "σ_Δ = {}", closure.sigma_hz);
    assert_eq!(closure.signs, vec![1, 1, -1]);
    assert_eq!(outcome.files.len(), 10);

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["scenario"]["name"], "yb171_123");
    assert_eq!(json["provenance"]["levels_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(json["transitions"].as_array().unwrap().len(), 3);
    assert!(!json["transitions"][0]["allan"].as_array().unwrap().is_empty());
}

#[test]
fn static_scenarios_propagate_quoted_accuracies() {
    let dir = tempfile::tempdir().unwrap();
    let ra = ScenarioConfig::load(&data("scenarios/ra226_static.toml")).unwrap();
    let report = run_scenario(&ra, &RunOptions { out_dir: Some(dir.path().join("ra")), seed: None }).unwrap().report;
    let c = report.closure.unwrap();
    assert!((c.sigma_hz / 51_961_524.227_066_32 - 1.0).abs() < 1e-9);
    assert!(c.bound_hz > 5e7 && c.bound_hz < 5e8, "{}", c.bound_hz);
    let i = report.interpretations.unwrap();
    assert!((i.closure_level.sigma_hz - 3e7).abs() < 1e-6);

    let ca = ScenarioConfig::load(&data("scenarios/ca40_static.toml")).unwrap();
    let report = run_scenario(&ca, &RunOptions { out_dir: Some(dir.path().join("ca")), seed: None }).unwrap().report;
    assert!((report.closure.unwrap().sigma_hz / 1e5 - 1.0).abs() < 1e-9);
}

#[test]
fn non_cycle_selection_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = yb_config("").replace("\"1S0-J2\"", "\"1S0-1D2\"");
    let path = write_config(dir.path(), &body);
    let o = run(&["run", "--config", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("cycle"), "{}", stderr(&o));
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (yb_config("[interrogation]\ngain = 1.5\n"), "interrogation.gain"),
        (yb_config("[interrogation]\ndark_time_s = -1.0\n"), "interrogation.dark_time_s"),
        (yb_config("bogus = 3\n"), "bogus"),
        (yb_config("").replace("seed = 11\n", ""), "seed"),
        (yb_config("[nonlinear.anomalies_hz]\n\"1S0-3P1\" = 1.0\n"), "nonlinear.anomalies_hz"),
        ("name = \"x\"\nmode = \n".to_string(), "line 2"),
        (
            yb_config("[[interrogation.branching]]\nupper = \"J2\"\nlower = \"3P0\"\nfraction = 0.7\n"),
            "interrogation.branching",
        ),
    ];
    for (body, field) in cases {
        let path = write_config(dir.path(), &body);
        let o = run(&["run", "--config", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{field}: {}", stderr(&o));
        assert!(stderr(&o).contains(field), "{field}: {}", stderr(&o));
    }
    let o = run(&["run", "--config", "/no/such/scenario.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn broken_level_table_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("broken.csv");
    std::fs::write(&table, "label,configuration,term,j,parity,energy_cm1,lifetime_s\nA,x,1S,0,even,zero,\n").unwrap();
    let body = format!(
        "name = \"b\"\nmode = \"static\"\nlevels = \"{}\"\ncycle = [\"A-B\", \"B-C\", \"A-C\"]\nseed = 1\n",
        table.display()
    );
    let path = write_config(dir.path(), &body);
    let o = run(&["run", "--config", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));

    let o = run(&["closures", "--levels", table.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn line_outside_the_acquisition_range_is_a_simulation_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = yb_config("[interrogation]\nn_cycles = 30\n[nonlinear.anomalies_hz]\n\"1S0-3P0\" = 40.0\n");
    let path = write_config(dir.path(), &body);
    let o = run(&["run", "--config", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("yb_test") || stderr(&o).contains("servo") || stderr(&o).contains("scan"), "{}", stderr(&o));
}

#[test]
fn closures_lists_radium_cycles() {
    let o = run(&["closures", "--levels", "ra_ii.csv", "--max-cycle", "4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("3 closure cycle(s)"), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with('[')).count(), 3);
    assert!(text.contains("727.6443 nm") && text.contains("802.1900 nm") && text.contains("381.5505 nm"));

    let o = run(&["closures", "--levels", data("levels/ra_ii.csv").to_str().unwrap(), "--max-cycle", "3"]);
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with('[')).count(), 2);
}

#[test]
fn table_without_cycles_reports_none() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("chain.csv");
    std::fs::write(
        &table,
        "label,configuration,term,j,parity,energy_cm1,lifetime_s\n\
         A,x,1S,0,even,0,\nB,x,3P,0,odd,100,\nC,x,3D,1,even,300,\n\
         lower,upper,kind,measured_hz,sigma_hz\nA,B,E1,,\nB,C,E1,,\n",
    )
    .unwrap();
    let o = run(&["closures", "--levels", table.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "no closures found");
}

fn write_series(path: &Path, values: &[f64], tau0: f64) {
    let mut text = String::from("# reference_hz a-b 1000\ncycle,timestamp_s,transition,freq_hz\n");
    for (i, v) in values.iter().enumerate() {
        text.push_str(&format!("{i},{},a-b,{v}\n", i as f64 * tau0));
    }
    std::fs::write(path, text).unwrap();
}

fn allan_rows(text: &str) -> Vec<(f64, f64, usize)> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("tau_s"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn allan_of_constant_series_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.csv");
    write_series(&path, &[0.25; 50], 2.0);
    let o = run(&["allan", "--series", path.to_str().unwrap(), "--taus", "2,4,10,32"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = allan_rows(&stdout(&o));
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.1 == 0.0));
    assert_eq!(rows[0].2, 49);
}

#[test]
fn allan_of_white_noise_falls_as_inverse_root_tau() {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = clockclosure_core::rng::stream_rng(2024, 0);
    let values: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("white.csv");
    write_series(&path, &values, 1.0);
    let o = run(&["allan", "--series", path.to_str().unwrap(), "--taus", "1,2,4,8,16,32"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for (tau, sigma, _) in allan_rows(&stdout(&o)) {
        assert!((sigma * tau.sqrt() - 1.0).abs() < 0.05, "τ = {tau}: {sigma}");
    }
}

#[test]
fn allan_reports_each_bad_tau_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.csv");
    write_series(&path, &[1.0, 2.0, 1.5, 1.0, 0.5, 1.0, 2.0, 1.0, 1.5], 1.0);
    let o = run(&["allan", "--series", path.to_str().unwrap(), "--taus", "1,3,4,100,1.5"]);
    assert_eq!(o.status.code(), Some(4));
    let text = stdout(&o);
    assert_eq!(allan_rows(&text).len(), 2);
    assert_eq!(text.lines().filter(|l| l.starts_with("# error")).count(), 3, "{text}");

    let o = run(&["allan", "--series", path.to_str().unwrap(), "--taus", "1,-2"]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "cycle,timestamp_s,transition,freq_hz\n0,0,a-b,1\n1,zz,a-b,2\n").unwrap();
    let o = run(&["allan", "--series", bad.to_str().unwrap(), "--taus", "1"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn data_directory_can_be_overridden() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("levels")).unwrap();
    std::fs::copy(data("levels/ra_ii.csv"), dir.path().join("levels/mine.csv")).unwrap();
    let o = bin()
        .env("CLOCKCLOSURE_DATA", dir.path())
        .args(["closures", "--levels", "mine.csv", "--max-cycle", "3"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("2 closure cycle(s)"));
}

#[test]
fn decay_branches_come_from_the_scenario() {
    let body = yb_config(
        "[[interrogation.branching]]\nupper = \"J2\"\nlower = \"3P0\"\nfraction = 0.3\n\
         [[interrogation.branching]]\nupper = \"J2\"\nlower = \"1S0\"\nfraction = 0.7\n",
    );
    let config = ScenarioConfig::from_toml(&body, "inline").unwrap();
    assert_eq!(config.interrogation.branching.len(), 2);
    let scenario = clockclosure_cli::Scenario::prepare(config, None).unwrap();
    let run = scenario.simulate(5).unwrap();
    assert!(run.estimate.sigma_hz < 1.0);
}
