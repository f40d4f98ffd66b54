use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use propel::config::{ConfigError, Method, RunConfig};
use propel::drl::RewardMode;
use propel::learn::RcSign;
use propel::mip::{parse_mps, MipInstance};
use propel::pipeline::{self, PipelineError};
use propel::scp::{build_mip, ScpInstance};
use propel::solve::{external_solve, solve_mip, write_solution_file, SolveLimits};

#[derive(Parser)]
#[command(
    name = "propel",
    version,
    about = "Learned variable fixing for supply-chain planning MIPs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate instances and the train/test split manifest.
    Generate {
        #[arg(long)]
        out: PathBuf,
        /// Replace the instances of a non-empty output directory.
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Label, train the fixing models and the Q-network.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the methods on the test split and write results.csv and traces.json.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        /// Directory written by `train`; not needed for OPT alone.
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated subset of OPT, PROPB, PROP, PROPEL.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[command(flatten)]
        common: Common,
    },
    /// Summarize a results file into reduction tables and plot data.
    Report {
        #[arg(long)]
        results: PathBuf,
        /// Defaults to traces.json next to the results file, when present.
        #[arg(long)]
        traces: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one MPS model, JSON model or generated instance file.
    Solve {
        input: PathBuf,
        /// `builtin` or `external:<command template>` with {input}, {output}
        /// and optionally {time_limit}.
        #[arg(long, default_value = "builtin")]
        solver: String,
        /// Seconds, or nodes with --deterministic.
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
        #[arg(long, default_value_t = 0.01)]
        gap: f64,
        #[arg(long)]
        node_limit: Option<u64>,
        #[arg(long)]
        deterministic: bool,
        /// Solution file to write.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct Common {
    /// TOML run configuration; `PROPEL_<FIELD>` variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_parser = ["objective", "gap"])]
    reward: Option<String>,
    /// Use unnormalized objective rewards.
    #[arg(long)]
    raw_reward: bool,
    /// One classifier over all variables with a role one-hot.
    #[arg(long)]
    shared_model: bool,
    /// Weight false negatives by labeled values instead of nonzero flags.
    #[arg(long)]
    weights_by_value: bool,
    /// Additive instead of relative uniform demand noise.
    #[arg(long)]
    noise_absolute: bool,
    /// Cumulative demand rows with backlog.
    #[arg(long)]
    demand_window: bool,
    /// Score minimization reduced costs without negation.
    #[arg(long)]
    rc_min_form: bool,
    /// Wall-clock timing instead of node ticks.
    #[arg(long)]
    wall_clock: bool,
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(s) = self.scale {
            cfg.scale = s;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.tau {
            cfg.tau = t;
        }
        if let Some(r) = &self.reward {
            cfg.reward = if r == "gap" {
                RewardMode::Gap
            } else {
                RewardMode::Objective
            };
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg.raw_reward |= self.raw_reward;
        cfg.shared_model |= self.shared_model;
        cfg.weights_by_value |= self.weights_by_value;
        cfg.noise_absolute |= self.noise_absolute;
        cfg.demand_window |= self.demand_window;
        if self.rc_min_form {
            cfg.rc_sign = RcSign::MinForm;
        }
        if self.wall_clock {
            cfg.deterministic = false;
        }
        cfg.check()?;
        Ok(cfg)
    }
}

fn read_model(path: &Path) -> Result<MipInstance, PipelineError> {
    let text = std::fs::read_to_string(path)?;
    let bad = |e: String| PipelineError::Data(format!("{}: {e}", path.display()));
    if !path.extension().is_some_and(|e| e == "json") {
        return parse_mps(&text).map_err(|e| bad(e.to_string()));
    }
    match MipInstance::from_json(&text) {
        Ok(m) => Ok(m),
        // generated instance files hold planning data rather than a model
        Err(e) => match serde_json::from_str::<ScpInstance>(&text) {
            Ok(inst) => Ok(build_mip(&inst)?),
            Err(_) => Err(bad(e.to_string())),
        },
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.cmd {
        Cmd::Generate { out, force, common } => {
            let cfg = common.resolve()?;
            let m = pipeline::generate(&cfg, &out, force)?;
            println!(
                "wrote {} instances ({} sl, {} rl, {} test) to {}",
                m.hashes.len(),
                m.train_sl.len(),
                m.train_rl.len(),
                m.test.len(),
                out.display()
            );
        }
        Cmd::Train { data, out, common } => {
            let cfg = common.resolve()?;
            let s = pipeline::train(&cfg, &data, &out)?;
            println!(
                "labeled {} instances; {} RL instances above tolerance",
                s.labeled,
                s.rl_selected.len()
            );
            if s.qnet_trained {
                println!("trained Q-network for {} episodes", s.episodes);
            } else {
                println!("notice: Q-network skipped, PROPEL degrades to PROP");
            }
        }
        Cmd::Evaluate {
            data,
            models,
            out,
            methods,
            common,
        } => {
            let mut cfg = common.resolve()?;
            if let Some(ms) = methods {
                cfg.methods = ms
                    .iter()
                    .map(|m| m.parse::<Method>())
                    .collect::<Result<_, _>>()?;
            }
            let ev = pipeline::evaluate(&cfg, &data, models.as_deref(), &out)?;
            for n in &ev.notices {
                println!("notice: {n}");
            }
            println!(
                "wrote {} rows to {}",
                ev.rows.len(),
                out.join(pipeline::RESULTS).display()
            );
        }
        Cmd::Report {
            results,
            traces,
            out,
        } => {
            let rows = pipeline::read_results(&results)?;
            let traces_path = traces.or_else(|| {
                let p = results.with_file_name(pipeline::TRACES);
                p.exists().then_some(p)
            });
            let traces = traces_path.map(|p| pipeline::read_traces(&p)).transpose()?;
            let rep = pipeline::report(&rows, traces.as_deref())?;
            pipeline::write_report(&rep, &out)?;
            print!("{}", pipeline::render_report(&rep));
        }
        Cmd::Solve {
            input,
            solver,
            time_limit,
            gap,
            node_limit,
            deterministic,
            output,
        } => {
            let mip = read_model(&input)?;
            let lim = SolveLimits {
                time_limit,
                rel_gap: gap,
                node_limit,
                deterministic_clock: deterministic,
            };
            let res = match solver.as_str() {
                "builtin" => solve_mip(&mip, &lim)?,
                s => match s.strip_prefix("external:") {
                    Some(template) => external_solve(&mip, template, &lim)?,
                    None => {
                        return Err(ConfigError::Invalid(format!("unknown solver {s:?}")).into());
                    }
                },
            };
            println!(
                "status {:?} objective {} bound {} nodes {}",
                res.status, res.best_objective, res.bound, res.node_count
            );
            if let Some(out) = output {
                std::fs::write(out, write_solution_file(&mip, &res))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("PROPEL_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
