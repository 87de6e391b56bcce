use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tnc_core::bep::{
    bep_approx_qfunction, bep_asymptotic, bep_conditional, bep_rician_adaptive, bep_rician_gl,
    BepMethod,
};
use tnc_core::config::RunConfig;
use tnc_core::mc::estimate_bep;
use tnc_core::selftest::{run_selftest, SelftestOptions};
use tnc_core::sweep::{run_sweep, write_csv};
use tnc_core::system::{optimal_threshold, received_variances, suboptimal_threshold, ChannelModel};
use tnc_core::Error;

#[derive(Parser)]
#[command(name = "tnc", version, about = "Bit-error probability of thermal-noise communication links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the optimal and Gaussian-approximation thresholds.
    Threshold(PointArgs),
    /// Evaluate one operating point with one method.
    Bep {
        #[command(flatten)]
        point: PointArgs,
        /// exact, gl, adaptive, approx, asymptotic or mc
        #[arg(long, default_value = "exact")]
        method: String,
        /// opt, subopt or fixed:<gamma>
        #[arg(long, default_value = "opt")]
        rule: String,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Generate curve data as CSV.
    Sweep {
        /// TOML file with sweep keys; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write CSV here instead of standard output.
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long)]
        variable: Option<String>,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        /// linear or log
        #[arg(long)]
        scale: Option<String>,
        /// Explicit comma-separated values instead of a range.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        rules: Option<Vec<String>>,
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Run a standalone Monte Carlo simulation.
    Mc {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, default_value = "opt")]
        rule: String,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Run the built-in checks; exits with status 2 if any fails.
    Selftest {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Skip the long simulations.
        #[arg(long)]
        skip_mc: bool,
        /// Scale every Gauss-Laguerre weight by 1 + EPS.
        #[arg(long, value_name = "EPS")]
        perturb_gl_weights: Option<f64>,
    },
}

#[derive(Args, Default)]
struct PointArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    sigma_w2: Option<f64>,
    #[arg(long = "n-samples", short = 'n')]
    n_samples: Option<u32>,
    /// constant or rician
    #[arg(long)]
    channel: Option<String>,
    #[arg(long)]
    h_mag: Option<f64>,
    #[arg(long = "k-factor", short = 'k')]
    k_factor: Option<f64>,
    /// Gauss-Laguerre order.
    #[arg(long)]
    n_a: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
}

#[derive(Args, Default)]
struct McArgs {
    #[arg(long)]
    n_bits: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_errors: Option<u64>,
    /// statistical or physical
    #[arg(long)]
    path: Option<String>,
    #[arg(long)]
    streams: Option<u32>,
}

impl PointArgs {
    fn config(&self, mc: &McArgs) -> RunConfig {
        RunConfig {
            alpha: self.alpha,
            delta: self.delta,
            sigma_w2: self.sigma_w2,
            n_samples: self.n_samples,
            channel: self.channel.clone(),
            h_mag: self.h_mag,
            k_factor: self.k_factor,
            n_a: self.n_a,
            rel_tol: self.rel_tol,
            n_bits: mc.n_bits,
            seed: mc.seed,
            max_errors: mc.max_errors,
            path: mc.path.clone(),
            streams: mc.streams,
            ..Default::default()
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation { .. } | Error::Domain(_) | Error::DegenerateChannel => 1,
        Error::Convergence { .. } | Error::Numerical(_) => 3,
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Threshold(point) => {
            let cfg = point.config(&McArgs::default());
            let p = cfg.params()?;
            let h = match cfg.channel()? {
                ChannelModel::Constant { h_mag } => h_mag,
                ChannelModel::Rician { .. } => {
                    return Err(Error::Validation {
                        field: "channel".into(),
                        message: "thresholds need a constant channel magnitude".into(),
                    })
                }
            };
            let (s0, s1) = received_variances(&p, h);
            writeln!(out, "sigma_x0^2 = {s0:.10e}").ok();
            writeln!(out, "sigma_x1^2 = {s1:.10e}").ok();
            writeln!(out, "gamma_opt = {:.10e}", optimal_threshold(&p, h)?).ok();
            writeln!(out, "gamma_subopt = {:.10e}", suboptimal_threshold(&p, h)?).ok();
        }
        Command::Bep { point, method, rule, mc } => {
            let cfg = point.config(&mc);
            let p = cfg.params()?;
            let channel = cfg.channel()?;
            let rule = rule.parse()?;
            let method: BepMethod = method.parse()?;
            let rician = |channel: ChannelModel| match channel {
                ChannelModel::Rician { k_factor } => Ok(k_factor),
                ChannelModel::Constant { .. } => Err(Error::Validation {
                    field: "channel".into(),
                    message: format!("method {method} needs a Rician channel"),
                }),
            };
            let value = match method {
                BepMethod::ExactConditional => match channel {
                    ChannelModel::Constant { h_mag } => bep_conditional(&p, h_mag, rule)?.value,
                    ChannelModel::Rician { .. } => {
                        return Err(Error::Validation {
                            field: "channel".into(),
                            message: "method exact needs a constant channel".into(),
                        })
                    }
                },
                BepMethod::RicianGaussLaguerre => {
                    bep_rician_gl(&p, rician(channel)?, rule, cfg.quadrature_order())?.value
                }
                BepMethod::RicianAdaptiveOracle => {
                    bep_rician_adaptive(&p, rician(channel)?, rule, cfg.rel_tol())?.value
                }
                BepMethod::ApproxQFunction => bep_approx_qfunction(&p, channel, cfg.rel_tol())?.value,
                BepMethod::AsymptoticFloor => bep_asymptotic(p.alpha(), p.n_samples())?.value,
                BepMethod::MonteCarlo => {
                    let r = estimate_bep(&p, channel, rule, &cfg.trial_config()?)?;
                    writeln!(out, "{:.16e} [{:.16e}, {:.16e}]", r.bep_hat, r.ci_low, r.ci_high).ok();
                    return Ok(ExitCode::SUCCESS);
                }
            };
            writeln!(out, "{value:.16e}").ok();
        }
        Command::Mc { point, rule, mc } => {
            let cfg = point.config(&mc);
            let r = estimate_bep(&cfg.params()?, cfg.channel()?, rule.parse()?, &cfg.trial_config()?)?;
            writeln!(out, "errors = {}", r.errors).ok();
            writeln!(out, "trials = {}", r.trials).ok();
            writeln!(out, "bep = {:.16e}", r.bep_hat).ok();
            writeln!(out, "ci95 = [{:.16e}, {:.16e}]", r.ci_low, r.ci_high).ok();
            writeln!(out, "seed = {}", r.seed).ok();
            writeln!(out, "streams = {}", r.streams).ok();
        }
        Command::Sweep {
            config,
            output,
            variable,
            from,
            to,
            points,
            scale,
            values,
            methods,
            rules,
            point,
            mc,
        } => {
            let file = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default(),
            };
            let flags = RunConfig {
                variable,
                from,
                to,
                points,
                scale,
                values,
                methods,
                rules,
                ..point.config(&mc)
            };
            let spec = file.overlay(flags).sweep_spec()?;
            let rows = run_sweep(&spec)?;
            match output {
                Some(path) => {
                    let f = File::create(&path).map_err(|e| Error::Validation {
                        field: "output".into(),
                        message: format!("{}: {e}", path.display()),
                    })?;
                    write_csv(&rows, BufWriter::new(f))?;
                }
                None => write_csv(&rows, out)?,
            }
        }
        Command::Selftest {
            seed,
            skip_mc,
            perturb_gl_weights,
        } => {
            let report = run_selftest(&SelftestOptions {
                seed,
                gl_weight_perturbation: perturb_gl_weights,
                include_monte_carlo: !skip_mc,
            });
            writeln!(out, "{report}").ok();
            if !report.all_passed() {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
