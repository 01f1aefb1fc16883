use std::fs;

use bdisac::bcd::pareto::mark_dominated;
use bdisac::bcd::{cost_model, CurvePoint, ParetoCurve, SchemeRegistry};
use bdisac::io::*;
use bdisac::scene::Scene;
use bdisac::{Mode, Problem, SceneConfig};
use proptest::prelude::*;

fn record(level: f64, smi: f64, rate: f64) -> CurveRecord {
    CurveRecord {
        scheme: "spp".into(),
        mode: Mode::P1,
        constraint_level: level,
        smi,
        rate,
        converged: true,
        outer_iters: 3,
        seed: 7,
        wall_ms: 1.5,
    }
}

fn point(level: f64, smi: f64, rate: f64) -> CurvePoint {
    CurvePoint {
        scheme: "sp".into(),
        mode: Mode::P1,
        constraint_level: level,
        smi,
        rate,
        feasible: true,
        converged: true,
        outer_iters: 2,
        seed: 0,
        wall_ms: 0.0,
        dominated: false,
        carried_from: None,
        error: None,
        state: None,
        trace: Vec::new(),
    }
}

fn tiny_scene() -> Scene {
    let mut cfg = SceneConfig::default();
    cfg.grid.num_subcarriers = 6;
    cfg.grid.num_symbols = 1;
    cfg.bds.count = 2;
    Scene::build(&cfg).unwrap()
}

fn data_lines(path: &std::path::Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

proptest! {
    #[test]
    fn curve_csv_round_trips_at_twelve_digits(
        rows in proptest::collection::vec((-1e6f64..1e6, 0.0f64..1e3, 0.0f64..1e3, 0usize..40, any::<u64>()), 0..6)
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let records: Vec<CurveRecord> = rows
            .iter()
            .map(|&(l, s, r, it, seed)| CurveRecord { outer_iters: it, seed, ..record(l, s, r) })
            .collect();
        write_curve_csv(&path, &records).unwrap();
        let back = read_curve_csv(&path).unwrap();
        let want: Vec<CurveRecord> = records.iter().map(CurveRecord::rounded).collect();
        prop_assert_eq!(back, want);
    }
}

#[test]
fn empty_curve_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    write_curve_csv(&path, &[]).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.trim_end(), CURVE_HEADER.join(","));
    assert!(read_curve_csv(&path).unwrap().is_empty());
}

#[test]
fn wrong_header_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    fs::write(&path, "a,b\n1,2\n").unwrap();
    assert!(matches!(
        read_curve_csv(&path),
        Err(bdisac::Error::Parse(_))
    ));
}

#[test]
fn one_run_gives_one_row_and_its_trace() {
    let scene = tiny_scene();
    let settings = bdisac::bcd::BcdSettings::from_scene(&scene);
    let reg = SchemeRegistry::builtin();
    let run = reg
        .get("sp")
        .unwrap()
        .solve(&scene, &Problem::p2(0.0), &settings)
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_curve_csv(
        &dir.path().join("curve.csv"),
        &[CurveRecord::from_run(&run)],
    )
    .unwrap();
    write_trace_csv(&dir.path().join("trace.csv"), &run.trace).unwrap();
    assert_eq!(data_lines(&dir.path().join("curve.csv")), 1);
    assert_eq!(data_lines(&dir.path().join("trace.csv")), run.trace.len());
    assert!(!run.trace.is_empty());
    let header = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(header.starts_with(&TRACE_HEADER.join(",")));
}

#[test]
fn summary_keeps_only_non_dominated_points() {
    let mut points = vec![
        point(0.0, 5.0, 1.0),
        point(1.0, 4.0, 1.0),
        point(2.0, 3.0, 2.0),
    ];
    mark_dominated(&mut points);
    let curve = ParetoCurve {
        scheme: "sp".into(),
        mode: Mode::P1,
        points,
    };
    let summary = CurveSummary::new(&curve, None);
    assert_eq!(summary.levels, 3);
    assert_eq!(summary.feasible, 3);
    let kept: Vec<(f64, f64)> = summary.boundary.iter().map(|b| (b.smi, b.rate)).collect();
    assert_eq!(kept, vec![(5.0, 1.0), (3.0, 2.0)]);
}

#[test]
fn json_is_rounded() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.json");
    write_json(&path, &vec![0.1 + 0.2, 1.0 / 3.0]).unwrap();
    let v: Vec<f64> = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v, vec![0.3, 0.333333333333]);
}

#[test]
fn manifest_and_config_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = SceneConfig::default();
    cfg.bds.count = 3;
    let manifest = RunManifest {
        command: "sweep".into(),
        config_path: None,
        output_dir: dir.path().to_path_buf(),
        seeds: vec![4],
        schemes: vec!["spp".into()],
        levels: Some(vec![0.0, 1.0]),
        args: vec!["bdisac".into(), "sweep".into()],
        version: "0.1.0".into(),
    };
    write_manifest(dir.path(), &manifest, &cfg).unwrap();
    let back: RunManifest =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(back, manifest);
    let cfg_back =
        SceneConfig::from_toml_str(&fs::read_to_string(dir.path().join("config.toml")).unwrap())
            .unwrap();
    assert_eq!(cfg_back, cfg);
}

#[test]
fn plot_orders_series_numerically_and_warns_on_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut inputs = Vec::new();
    for (k, scale) in [(200, 3.0), (0, 1.0), (50, 2.0)] {
        let path = dir.path().join(format!("k{k}.csv"));
        write_curve_csv(&path, &[record(0.0, scale, 1.0), record(1.0, 1.0, scale)]).unwrap();
        inputs.push(PlotInput::parse(path.to_str().unwrap()));
    }
    inputs.push(PlotInput::parse(&format!(
        "gone={}",
        dir.path().join("missing.csv").display()
    )));
    let (table, warnings) = plot_data(PlotKind::Boundary, "t", &inputs);
    assert_eq!(table.series(), vec!["k0", "k50", "k200"]);
    assert_eq!(warnings.len(), 1);
    assert!(warnings[0].contains("missing.csv"));
    assert_eq!(table.to_svg().matches("<polyline").count(), 3);
}

#[test]
fn single_series_plot() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    write_curve_csv(&path, &[record(0.0, 2.0, 0.5), record(0.5, 1.5, 1.0)]).unwrap();
    let (table, warnings) = plot_data(
        PlotKind::Boundary,
        "t",
        &[PlotInput::parse(&format!("spp={}", path.display()))],
    );
    assert!(warnings.is_empty());
    assert_eq!(table.series(), vec!["spp"]);
    assert_eq!(
        table.rows,
        vec![("spp".to_string(), 0.5, 2.0), ("spp".to_string(), 1.0, 1.5)]
    );
    let written = emit_table(dir.path(), "plot", &table, true).unwrap();
    assert_eq!(written.len(), 2);
    assert!(written.iter().all(|p| p.exists()));
}

#[test]
fn cost_table_matches_model() {
    let table = cost_table(0, 40, 2.5, 1.0).unwrap();
    assert_eq!(table.series(), vec!["RIS", "BD-SPP", "BD-SP"]);
    assert_eq!(table.rows.len(), 41 * 3);
    for (s, n, y) in &table.rows {
        let t = cost_model(*n, 2.5, 1.0).unwrap();
        let want = match s.as_str() {
            "RIS" => t.ris,
            "BD-SPP" => t.bd_spp,
            _ => t.bd_sp,
        };
        assert_eq!(*y, want);
    }
}
