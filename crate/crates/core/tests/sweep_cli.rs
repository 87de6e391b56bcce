use std::process::Command;

use tnc_core::bep::{
    bep_approx_qfunction, bep_asymptotic, bep_conditional, bep_rician_adaptive, bep_rician_gl,
    BepMethod,
};
use tnc_core::config::RunConfig;
use tnc_core::sweep::{run_sweep, write_csv, CSV_COLUMNS};
use tnc_core::{optimal_threshold, ChannelModel, SystemParams, ThresholdRule};

const SWEEP: &str = r#"
variable = "delta"
from = 0.1
to = 100.0
points = 7
scale = "log"
alpha = 8.0
n_samples = 30
channel = "rician"
k_factor = 3.0
methods = ["gl", "adaptive", "approx", "asymptotic", "mc"]
rules = ["opt", "subopt"]
n_bits = 20000
seed = 7
"#;

fn csv_for(text: &str) -> String {
    let spec = RunConfig::from_toml(text).unwrap().sweep_spec().unwrap();
    let mut buf = Vec::new();
    write_csv(&run_sweep(&spec).unwrap(), &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

fn field<'a>(rec: &'a csv::StringRecord, name: &str) -> &'a str {
    let i = CSV_COLUMNS.iter().position(|&c| c == name).unwrap();
    &rec[i]
}

fn num(rec: &csv::StringRecord, name: &str) -> f64 {
    field(rec, name).parse().unwrap()
}

#[test]
fn output_is_byte_identical_across_runs() {
    assert_eq!(csv_for(SWEEP), csv_for(SWEEP));
}

#[test]
fn analytic_rows_reproduce_from_their_echo() {
    let text = csv_for(SWEEP);
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), CSV_COLUMNS);
    let mut analytic = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        assert_eq!(field(&rec, "error"), "");
        let method: BepMethod = field(&rec, "method").parse().unwrap();
        if method == BepMethod::MonteCarlo {
            assert!(num(&rec, "ci_low") <= num(&rec, "bep") && num(&rec, "bep") <= num(&rec, "ci_high"));
            assert_eq!(field(&rec, "seed"), "7");
            continue;
        }
        assert_eq!(field(&rec, "ci_low"), "");
        let rule: ThresholdRule = field(&rec, "rule").parse().unwrap();
        let p = SystemParams::new(num(&rec, "alpha"), num(&rec, "delta"), num(&rec, "sigma_w2"), num(&rec, "n_samples") as u32).unwrap();
        let k = num(&rec, "K_factor");
        let direct = match method {
            BepMethod::RicianGaussLaguerre => bep_rician_gl(&p, k, rule, num(&rec, "N_a") as usize).unwrap().value,
            BepMethod::RicianAdaptiveOracle => bep_rician_adaptive(&p, k, rule, 1e-9).unwrap().value,
            BepMethod::ApproxQFunction => bep_approx_qfunction(&p, ChannelModel::Rician { k_factor: k }, 1e-9).unwrap().value,
            BepMethod::AsymptoticFloor => bep_asymptotic(p.alpha(), p.n_samples()).unwrap().value,
            other => panic!("unexpected {other}"),
        };
        assert_eq!(num(&rec, "bep"), direct, "{rec:?}");
        analytic += 1;
    }
    assert_eq!(analytic, 7 * 4 * 2);
}

#[test]
fn gamma_sweep_bottoms_out_at_the_optimal_threshold() {
    let text = csv_for(
        "variable = \"gamma\"\nfrom = 1.3\nto = 5.0\npoints = 400\nalpha = 8.0\ndelta = 0.3\nn_samples = 30\nmethods = [\"exact\"]",
    );
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<(f64, f64)> = reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (num(&r, "sweep_value"), num(&r, "bep"))
        })
        .collect();
    let best = rows.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    let opt = optimal_threshold(&SystemParams::new(8.0, 0.3, 1.0, 30).unwrap(), 1.0).unwrap();
    let step = (5.0 - 1.3) / 399.0;
    assert!((best - opt).abs() <= 0.5 * step + 1e-12, "{best} vs {opt}");
    let exact = bep_conditional(&SystemParams::new(8.0, 0.3, 1.0, 30).unwrap(), 1.0, ThresholdRule::Fixed(best)).unwrap().value;
    assert_eq!(rows.iter().find(|r| r.0 == best).unwrap().1, exact);
}

#[test]
fn rician_curve_meets_the_floor() {
    let text = csv_for(
        "variable = \"delta\"\nvalues = [1.0, 10.0, 30.0, 100.0, 1000.0]\nalpha = 8.0\nn_samples = 30\nk_factor = 10.0\nmethods = [\"gl\", \"asymptotic\"]",
    );
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let recs: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    let floor = num(&recs[1], "bep");
    let gl: Vec<f64> = recs.iter().filter(|r| field(r, "method") == "gl").map(|r| num(r, "bep")).collect();
    assert!(gl.windows(2).all(|w| w[1] <= w[0]));
    assert!(gl[4] / floor < 1.05 && gl[0] / floor > 100.0);
}

fn tnc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tnc")).args(args).output().unwrap()
}

#[test]
fn cli_threshold_and_bep() {
    let out = tnc(&["threshold", "--alpha", "8", "--delta", "0.8"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("gamma_opt = 3.3625705761e0"), "{text}");
    assert!(text.contains("gamma_subopt = 2.8956521739e0"), "{text}");

    let out = tnc(&["bep", "--alpha", "8", "--delta", "0.8", "-n", "50", "--rule", "subopt"]);
    assert!(out.status.success());
    let v: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    let p = SystemParams::new(8.0, 0.8, 1.0, 50).unwrap();
    assert_eq!(v, bep_conditional(&p, 1.0, ThresholdRule::SuboptimalGaussian).unwrap().value);
}

#[test]
fn cli_sweep_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    let csv_path = dir.path().join("out.csv");
    std::fs::write(&cfg, "variable = \"N\"\nvalues = [5, 10, 20]\nchannel = \"rician\"\nk_factor = 3.0\nmethods = [\"gl\"]\n").unwrap();
    let out = tnc(&["sweep", "--config", cfg.to_str().unwrap(), "--k-factor", "10", "--output", csv_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let recs: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(recs.len(), 3);
    assert!(recs.iter().all(|r| field(r, "K_factor") == "1.0000000000000000e1"));
}

#[test]
fn cli_exit_codes() {
    assert_eq!(tnc(&["bep", "--alpha", "0.5"]).status.code(), Some(1));
    assert_eq!(tnc(&["bep", "--method", "magic"]).status.code(), Some(1));
    let out = tnc(&["sweep", "--variable", "delta", "--values", "1,2", "--methods", ""]);
    assert_eq!(out.status.code(), Some(1));

    let out = tnc(&["selftest", "--skip-mc", "--perturb-gl-weights", "1e-3"]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("FAIL Gauss-Laguerre order consistency")), "{text}");
}
