use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clap::Parser;
use proptest::prelude::*;
use tempfile::TempDir;
use tiltcrm_cli::settings::{FamilyName, InitName, PresetName};
use tiltcrm_cli::{
    execute, parse_partition, Cli, CompareReport, Format, PosteriorOutput, Settings, SimulateOutput,
};
use tilted_crm::{Algorithm, SizeDistribution};

fn tiltcrm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tiltcrm"))
        .args(args)
        .env_remove("TILTCRM_THREADS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// First line that is not `# key=value` metadata.
fn header(csv: &str) -> &str {
    csv.lines().find(|l| !l.starts_with('#')).unwrap()
}

fn row(csv: &str, i: usize) -> Vec<&str> {
    let prefix = format!("{i},");
    csv.lines()
        .find(|l| l.starts_with(&prefix))
        .unwrap()
        .split(',')
        .collect()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const PD: &[&str] = &[
    "--preset",
    "poisson_dirichlet",
    "--alpha",
    "0.5",
    "--q",
    "1",
];
const NGG: &[&str] = &[
    "--preset",
    "normalized_generalized_gamma",
    "--alpha",
    "0.5",
    "--b",
    "1",
];

fn with(base: &[&str], rest: &[&str]) -> Vec<String> {
    base.iter().chain(rest).map(|x| x.to_string()).collect()
}

fn run_args(args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    tiltcrm(&refs)
}

#[test]
fn exact_csv_schema_and_values() {
    let o = run_args(&with(
        &["exact"],
        &with(NGG, &["--n", "50"])
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    ));
    assert!(o.status.success());
    let csv = stdout(&o);
    assert_eq!(header(&csv), "i,probability");
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 51);
    let p: f64 = row(&csv, 13)[1].parse().unwrap();
    assert_eq!(format!("{p:.6}"), "0.082360");

    let o = tiltcrm(&["exact", "--preset", "dirichlet", "--n", "1"]);
    let csv = stdout(&o);
    assert_eq!(
        csv.lines()
            .filter(|l| !l.starts_with('#'))
            .collect::<Vec<_>>(),
        ["i,probability", "1,1"]
    );
}

#[test]
fn exact_csv_values_round_trip() {
    let o = tiltcrm(&[
        "exact",
        "--preset",
        "dirichlet",
        "--theta",
        "2.5",
        "--n",
        "12",
    ]);
    let csv = stdout(&o);
    let o = tiltcrm(&[
        "exact",
        "--preset",
        "dirichlet",
        "--theta",
        "2.5",
        "--n",
        "12",
        "--format",
        "json",
    ]);
    let law: SizeDistribution = serde_json::from_slice(&o.stdout).unwrap();
    for (k, p) in law.probabilities.iter().enumerate() {
        let cell: f64 = row(&csv, k + 1)[1].parse().unwrap();
        assert_eq!(cell.to_bits(), p.to_bits());
    }
}

#[test]
fn simulate_csv_schema() {
    let base = [
        "simulate",
        "--preset",
        "dirichlet",
        "--n",
        "8",
        "--samples",
        "50",
        "--seed",
        "1",
    ];
    let o = tiltcrm(&[&base[..], &["--algorithm", "A1"]].concat());
    let csv = stdout(&o);
    assert_eq!(header(&csv), "i,p_hat,se");
    for key in [
        "tool",
        "spec",
        "algorithm",
        "n",
        "samples",
        "burn_in",
        "chains",
        "batches",
        "seed",
    ] {
        assert!(
            csv.lines().any(|l| l.starts_with(&format!("# {key}="))),
            "{key}"
        );
    }
    let o = tiltcrm(
        &[
            &base[..],
            &["--algorithm", "A3", "--burn-in", "5", "--batches", "3"],
        ]
        .concat(),
    );
    assert_eq!(header(&stdout(&o)), "i,p_hat,se,min,max,q025,q975");
}

#[test]
fn compare_and_report_schema() {
    let dir = TempDir::new().unwrap();
    let run = path(&dir, "a2.json");
    let o = tiltcrm(&[
        "simulate",
        "--preset",
        "dirichlet",
        "--n",
        "10",
        "--samples",
        "400",
        "--seed",
        "4",
        "--algorithm",
        "A2",
        "--batches",
        "2",
        "--format",
        "json",
        "--out",
        s(&run),
    ]);
    assert!(o.status.success());
    let fig = path(&dir, "figure.csv");
    let o = tiltcrm(&["compare", s(&run), "--figure-out", s(&fig)]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    assert_eq!(header(&csv), "i,probability,A2_p_hat,A2_se,A2_z");
    // table output is rounded to six places
    assert!(row(&csv, 3)[1..]
        .iter()
        .all(|c| c.split('.').nth(1).unwrap().len() == 6));
    let figure = std::fs::read_to_string(&fig).unwrap();
    assert_eq!(header(&figure), "algorithm,i,probability,min,max,q025,q975");

    let o = tiltcrm(&[
        "report",
        "--preset",
        "dirichlet",
        "--n",
        "6",
        "--samples",
        "200",
        "--burn-in",
        "20",
        "--seed",
        "2",
        "--algorithm",
        "A1,A3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        header(&stdout(&o)),
        "i,probability,A1_p_hat,A1_se,A1_z,A3_p_hat,A3_se,A3_z"
    );
}

#[test]
fn posterior_csv_schema() {
    let dir = TempDir::new().unwrap();
    let part = path(&dir, "p.txt");
    std::fs::write(&part, "3,2\n").unwrap();
    let o = tiltcrm(&[
        "posterior",
        "--preset",
        "dirichlet",
        "--partition",
        s(&part),
        "--u",
        "1",
    ]);
    assert_eq!(header(&stdout(&o)), "block,size,jump_mean,jump_variance");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    // validation
    assert_eq!(
        tiltcrm(&[
            "exact",
            "--preset",
            "dirichlet",
            "--theta",
            "-1",
            "--n",
            "5"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        tiltcrm(&["exact", "--preset", "dirichlet"]).status.code(),
        Some(2)
    );
    assert_eq!(tiltcrm(&["exact", "--n", "5"]).status.code(), Some(2));
    assert_eq!(tiltcrm(&["exact", "--bogus"]).status.code(), Some(2));
    assert_eq!(tiltcrm(&["compare"]).status.code(), Some(2));
    assert_eq!(
        tiltcrm(&[
            "simulate",
            "--preset",
            "dirichlet",
            "--n",
            "5",
            "--samples",
            "5",
            "--seed",
            "1",
            "--algorithm",
            "A1,A2"
        ])
        .status
        .code(),
        Some(2)
    );
    // numeric failure: a quadrature budget too small for the integrand
    let o = tiltcrm(&[
        "exact",
        "--preset",
        "normalized_generalized_gamma",
        "--alpha",
        "0.5",
        "--b",
        "1",
        "--n",
        "50",
        "--max-subdivisions",
        "16",
        "--relative-tolerance",
        "1e-15",
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(o.stdout.is_empty());
    // comparison failure: simulated under alpha 0.4, compared with alpha 0.5
    let run = path(&dir, "wrong.json");
    let mut args = vec![
        "simulate",
        "--preset",
        "poisson_dirichlet",
        "--alpha",
        "0.4",
        "--q",
        "1",
    ];
    args.extend([
        "--n",
        "30",
        "--samples",
        "5000",
        "--seed",
        "9",
        "--algorithm",
        "A1",
    ]);
    args.extend(["--format", "json", "--out", s(&run)]);
    assert!(tiltcrm(&args).status.success());
    let mut args = vec!["compare", s(&run)];
    args.extend(PD);
    let o = tiltcrm(&args);
    assert_eq!(o.status.code(), Some(4));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("FAIL") && err.contains("max |z|"), "{err}");
    // help is not an error
    assert_eq!(tiltcrm(&["--help"]).status.code(), Some(0));
}

#[test]
fn partition_parse_errors_name_the_line() {
    let p = Path::new("sizes.txt");
    let ok = parse_partition("# sizes\n\n4, 1,2\n", p).unwrap();
    assert_eq!(ok.sizes(), [4, 1, 2]);
    let cases = [
        ("3,x\n", 1),
        ("# c\n\n3,0\n", 3),
        ("1,2\n3\n", 2),
        ("", 1),
        ("3,,1", 1),
    ];
    for (text, line) in cases {
        match parse_partition(text, p) {
            Err(tiltcrm_cli::CliError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
}

#[test]
fn posterior_jump_laws() {
    let dir = TempDir::new().unwrap();
    let part = path(&dir, "p.txt");
    std::fs::write(&part, "3,2").unwrap();
    let o = tiltcrm(&[
        "posterior",
        "--family",
        "generalized_gamma",
        "--alpha",
        "0.5",
        "--b",
        "1",
        "--partition",
        s(&part),
        "--u",
        "1",
        "--format",
        "json",
    ]);
    let out: PosteriorOutput = serde_json::from_slice(&o.stdout).unwrap();
    let laws: Vec<_> = out
        .description
        .atoms
        .iter()
        .map(|a| serde_json::to_value(&a.jump_law).unwrap())
        .collect();
    assert_eq!(
        laws[0],
        serde_json::json!({"law": "gamma", "shape": 2.5, "rate": 2.0})
    );
    assert_eq!(
        laws[1],
        serde_json::json!({"law": "gamma", "shape": 1.5, "rate": 2.0})
    );
    assert!(!out.u_drawn);

    // omitted u is drawn and recorded; jump draws follow the seed
    let args = [
        "posterior",
        "--preset",
        "generalized_dirichlet",
        "--c",
        "2",
        "--partition",
        s(&part),
        "--seed",
        "5",
        "--draws",
        "3",
        "--format",
        "json",
    ];
    let a = tiltcrm(&args);
    let out: PosteriorOutput = serde_json::from_slice(&a.stdout).unwrap();
    assert!(out.u_drawn && out.description.u > 0.0);
    assert_eq!(out.jumps.len(), 3);
    assert!(out
        .description
        .atoms
        .iter()
        .all(|a| serde_json::to_value(&a.jump_law).unwrap()["law"] == "gamma_mixture"));
    assert_eq!(tiltcrm(&args).stdout, a.stdout);
}

#[test]
fn flags_override_the_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "run.toml");
    std::fs::write(
        &cfg,
        "preset = \"dirichlet\"\ntheta = 2.0\nn = 4\nformat = \"json\"\n",
    )
    .unwrap();
    let from_file = tiltcrm(&["exact", "--config", s(&cfg)]);
    let law: SizeDistribution = serde_json::from_slice(&from_file.stdout).unwrap();
    assert_eq!(law.n, 4);
    let o = tiltcrm(&["exact", "--config", s(&cfg), "--n", "6", "--theta", "1"]);
    let law: SizeDistribution = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(law.n, 6);
    assert!((law.probabilities[5] - 1.0 / 720.0).abs() < 1e-15);

    std::fs::write(&cfg, "preset = \"dirichlet\"\nn = 4\nthreads = 2\n").unwrap();
    let o = tiltcrm(&["exact", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":3:"));
}

#[test]
fn output_is_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    for algorithm in ["A1", "A2", "A3", "A4"] {
        let mut outputs = Vec::new();
        for (threads, extra) in [
            ("1", None),
            ("4", None),
            ("4", None),
            ("2", Some("--sequential")),
        ] {
            let out = path(&dir, &format!("{algorithm}-{}.json", outputs.len()));
            let mut args = vec!["simulate"];
            args.extend(NGG);
            args.extend([
                "--n",
                "15",
                "--samples",
                "300",
                "--burn-in",
                "30",
                "--chains",
                "3",
            ]);
            args.extend(["--batches", "2", "--seed", "11", "--algorithm", algorithm]);
            args.extend(["--format", "json", "--out", s(&out)]);
            args.extend(extra);
            let o = Command::new(env!("CARGO_BIN_EXE_tiltcrm"))
                .args(&args)
                .env("TILTCRM_THREADS", threads)
                .output()
                .unwrap();
            assert!(o.status.success());
            let parsed: SimulateOutput =
                serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
            // only the recorded execution mode may differ
            outputs.push(
                serde_json::to_vec(&(
                    parsed.summary,
                    parsed
                        .runs
                        .iter()
                        .map(|r| &r.block_count_draws)
                        .collect::<Vec<_>>(),
                    parsed
                        .runs
                        .iter()
                        .map(|r| &r.latent_trace)
                        .collect::<Vec<_>>(),
                ))
                .unwrap(),
            );
            if extra.is_none() && outputs.len() > 1 {
                let first = std::fs::read(path(&dir, &format!("{algorithm}-0.json"))).unwrap();
                assert_eq!(
                    std::fs::read(&out).unwrap(),
                    first,
                    "{algorithm} threads={threads}"
                );
            }
        }
        assert!(outputs.windows(2).all(|w| w[0] == w[1]), "{algorithm}");
    }
}

#[test]
fn in_process_execution_matches_the_binary() {
    let cli =
        Cli::try_parse_from(["tiltcrm", "exact", "--preset", "dirichlet", "--n", "5"]).unwrap();
    let outcome = execute(&cli).unwrap();
    let o = tiltcrm(&["exact", "--preset", "dirichlet", "--n", "5"]);
    assert_eq!(outcome.output.as_bytes(), &o.stdout[..]);
}

#[test]
fn report_json_round_trips() {
    let o = tiltcrm(&[
        "report",
        "--preset",
        "dirichlet",
        "--n",
        "5",
        "--samples",
        "100",
        "--burn-in",
        "10",
        "--seed",
        "3",
        "--format",
        "json",
    ]);
    let text = String::from_utf8(o.stdout).unwrap();
    let report: CompareReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.comparisons.len(), 4);
    assert_eq!(serde_json::to_string_pretty(&report).unwrap() + "\n", text);
}

fn opt<T: std::fmt::Debug + Clone + 'static>(
    s: impl Strategy<Value = T> + 'static,
) -> BoxedStrategy<Option<T>> {
    prop::option::of(s).boxed()
}

fn settings() -> impl Strategy<Value = Settings> {
    let spec = (
        opt(prop_oneof![
            Just(PresetName::Dirichlet),
            Just(PresetName::PoissonDirichlet),
            Just(PresetName::GeneralizedDirichlet)
        ]),
        opt(prop_oneof![
            Just(FamilyName::GeneralizedGamma),
            Just(FamilyName::GeneralizedDirichlet)
        ]),
        opt(0.0..1.0f64),
        opt(0.1..5.0f64),
        opt(0.0..5.0f64),
        opt(1u32..6),
        opt(0.0..3.0f64),
        opt(0.0..3.0f64),
    );
    let run = (
        opt(1usize..200),
        opt(1usize..100_000),
        opt(0usize..100_000),
        opt(1usize..8),
        opt(1u32..20),
        opt(any::<u64>()),
        opt(prop::collection::vec(
            prop::sample::select(Algorithm::ALL.to_vec()),
            1..4,
        )),
        opt(prop_oneof![
            Just(InitName::Singletons),
            Just(InitName::OneBlock)
        ]),
        any::<bool>(),
        opt(prop_oneof![Just(Format::Csv), Just(Format::Json)]),
    );
    (spec, run).prop_map(
        |(
            (preset, family, alpha, theta, b, c, q, gamma),
            (n, samples, burn_in, chains, batches, seed, algorithm, init, sequential, format),
        )| Settings {
            preset,
            family,
            alpha,
            theta,
            b,
            c,
            q,
            gamma,
            n,
            samples,
            burn_in,
            chains,
            batches,
            seed,
            algorithm,
            init,
            sequential,
            format,
            out: Some(PathBuf::from("out.csv")),
            ..Settings::default()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips(s in settings()) {
        let toml_text = toml::to_string(&s).unwrap();
        prop_assert_eq!(&Settings::from_toml(&toml_text, Path::new("x.toml")).unwrap(), &s);
        let json = serde_json::to_string(&s).unwrap();
        prop_assert_eq!(&serde_json::from_str::<Settings>(&json).unwrap(), &s);
    }

    #[test]
    fn emitted_json_round_trips(theta in 0.2..5.0f64, n in 1usize..30, seed in any::<u64>()) {
        let theta = theta.to_string();
        let n = n.to_string();
        let seed = seed.to_string();
        let o = tiltcrm(&["exact", "--preset", "dirichlet", "--theta", &theta, "--n", &n, "--format", "json"]);
        let text = String::from_utf8(o.stdout).unwrap();
        let law: SizeDistribution = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(serde_json::to_string_pretty(&law).unwrap() + "\n", text);

        let o = tiltcrm(&[
            "simulate", "--preset", "dirichlet", "--theta", &theta, "--n", &n, "--samples", "20",
            "--seed", &seed, "--algorithm", "A4", "--burn-in", "3", "--format", "json",
        ]);
        let text = String::from_utf8(o.stdout).unwrap();
        let sim: SimulateOutput = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(serde_json::to_string_pretty(&sim).unwrap() + "\n", text);
    }
}
