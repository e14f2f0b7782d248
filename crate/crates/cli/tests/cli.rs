use std::path::Path;
use std::process::Command;

use acpd_cli::io::{read_points, write_points};
use acpd_cli::run::is_synth_pair;
use acpd_cli::{
    cmd_ablate, cmd_bench, cmd_register, cmd_synth, generate_case, CaseSpec, GeneratorKind, Manifest, Method,
    RunConfig, RunRecord, Strategy,
};
use acpd_core::{rmse, SynthParams};

fn spec(model: &str, points: usize, generator: GeneratorKind, seed: u64) -> CaseSpec {
    CaseSpec {
        model: model.into(),
        points,
        generator,
        params: SynthParams {
            seed,
            gamma0: 0.2,
            ..SynthParams::default()
        },
    }
}

fn acpd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_acpd"))
}

#[test]
fn synth_then_register_stores_the_rmse_of_the_written_file() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("case");
    cmd_synth(&spec("clusters2d", 150, GeneratorKind::Analytic2d, 3), &case).unwrap();
    let out = dir.path().join("out");
    let status = acpd()
        .args(["register", "--fixed"])
        .arg(case.join("fixed.txt"))
        .arg("--moving")
        .arg(case.join("moving.txt"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let record: RunRecord = serde_json::from_str(&std::fs::read_to_string(out.join("record.json")).unwrap()).unwrap();
    let fixed = read_points(&case.join("fixed.txt")).unwrap();
    let registered = read_points(&out.join("registered.txt")).unwrap();
    let recomputed = rmse(&fixed, &registered).unwrap();
    assert!((record.final_rmse.unwrap() - recomputed).abs() < 1e-12);
    assert!(record.final_rmse.unwrap() < 0.1 * record.initial_rmse.unwrap());
}

#[test]
fn synth_pairs_are_recognized_by_their_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m: Manifest = cmd_synth(&spec("disk2d", 40, GeneratorKind::Analytic2d, 1), dir.path()).unwrap();
    let fixed = dir.path().join(&m.fixed_file);
    let moving = dir.path().join(&m.moving_file);
    assert!(is_synth_pair(&fixed, &moving));
    assert!(!is_synth_pair(&moving, &fixed));

    let other = tempfile::tempdir().unwrap();
    let copy = other.path().join("fixed.txt");
    std::fs::copy(&fixed, &copy).unwrap();
    assert!(!is_synth_pair(&copy, &moving));
}

#[test]
fn registering_a_set_onto_itself_stays_put() {
    let dir = tempfile::tempdir().unwrap();
    let x = acpd_core::shapes::fish2d(80);
    let file = dir.path().join("x.txt");
    write_points(&file, &x).unwrap();
    let cfg = RunConfig {
        ordered: true,
        ..RunConfig::default()
    };
    let r = cmd_register(&file, &file, &cfg, &dir.path().join("out")).unwrap();
    assert!(r.final_rmse.unwrap() < 1e-6);
}

#[test]
fn errors_exit_with_code_two_and_a_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.txt");
    let out = acpd()
        .args(["register", "--fixed"])
        .arg(&missing)
        .arg("--moving")
        .arg(&missing)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let line: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(line["status"], "error");
    assert!(line["message"].as_str().unwrap().contains("nope.txt"));
}

#[test]
fn mismatched_dimensions_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    write_points(&a, &acpd_core::shapes::disk2d(20)).unwrap();
    write_points(&b, &acpd_core::shapes::ellipsoid3d(20)).unwrap();
    assert!(cmd_register(&a, &b, &RunConfig::default(), dir.path()).is_err());
}

#[test]
fn bench_aggregates_match_the_records() {
    let s = spec("clusters2d", 100, GeneratorKind::Analytic2d, 0);
    let base = RunConfig::default();
    let report = cmd_bench(
        &[s.clone()],
        &[0, 1, 2],
        &[Method::AnalyticCpd, Method::Cpd],
        &base,
        None,
    )
    .unwrap();
    assert_eq!(report.rows.len(), 2);
    for row in &report.rows {
        let values: Vec<f64> = report
            .records
            .iter()
            .filter(|r| r.method == row.method)
            .map(|r| r.final_rmse.unwrap())
            .collect();
        assert_eq!(values.len() + row.failures, 3);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!((row.final_rmse.unwrap().mean - mean).abs() < 1e-12);
    }

    let single = cmd_bench(&[s.clone()], &[4], &[Method::AnalyticCpd], &base, None).unwrap();
    let summary = single.rows[0].final_rmse.unwrap();
    let value = single.records[0].final_rmse.unwrap();
    assert_eq!((summary.mean, summary.median, summary.std), (value, value, 0.0));

    let same = cmd_bench(&[s], &[5, 5, 5], &[Method::AnalyticCpd], &base, None).unwrap();
    assert_eq!(same.rows[0].final_rmse.unwrap().std, 0.0);
}

#[test]
fn bench_writes_its_report() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec("disk2d", 60, GeneratorKind::Analytic2d, 0);
    cmd_bench(&[s], &[0], &[Method::Cpd], &RunConfig::default(), Some(dir.path())).unwrap();
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("bench.json")).unwrap()).unwrap();
    assert_eq!(v["rows"][0]["method"], "cpd");
}

#[test]
fn first_order_ablation_recovers_a_planted_affine_case() {
    let mut s = spec("clusters2d", 120, GeneratorKind::Analytic2d, 0);
    s.params.analytic_order = 1;
    let rows = cmd_ablate(&s, &[0, 1], &[Strategy::Fixed(1)], &RunConfig::default(), None).unwrap();
    let row = &rows[0];
    assert_eq!((row.successes, row.failures), (2, 0));
    assert!(row.runs.iter().all(|r| r.final_rmse.unwrap() < 1e-5), "{:?}", row.runs);
}

#[test]
fn zero_deformation_ranges_return_the_model() {
    let mut s = spec("torus3d", 80, GeneratorKind::Analytic3d, 2);
    s.params.gamma0 = 0.0;
    s.params.gamma_q = 0.0;
    let case = generate_case(&s).unwrap();
    assert!(case.initial_rmse() < 1e-15);
}

#[test]
fn bump_blend_case_is_deformed() {
    let dir = tempfile::tempdir().unwrap();
    let s = CaseSpec {
        params: SynthParams {
            seed: 7,
            ..SynthParams::default()
        },
        ..spec("clusters3d", 100, GeneratorKind::Bumpblend3d, 7)
    };
    let m = cmd_synth(&s, dir.path()).unwrap();
    assert!(m.initial_rmse > 0.0);
    let fixed = read_points(&dir.path().join("fixed.txt")).unwrap();
    let moving = read_points(&dir.path().join("moving.txt")).unwrap();
    assert!((rmse(&fixed, &moving).unwrap() - m.initial_rmse).abs() < 1e-12);
}

#[test]
fn cli_subcommands_print_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = acpd()
        .args([
            "ablate",
            "--model",
            "disk2d",
            "--points",
            "60",
            "--generator",
            "analytic2d",
        ])
        .args([
            "--gamma0",
            "0.1",
            "--runs",
            "1",
            "--strategies",
            "fixed:1,continuation:3",
            "--tmax",
            "20",
        ])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("strategy\t"));
    assert!(text.contains("fixed:1") && text.contains("continuation:3"));
    assert!(Path::new(&dir.path().join("ablation.json")).exists());
}
