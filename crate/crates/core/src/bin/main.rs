use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tdlab::agent::{OptimizerParams, System};
use tdlab::featurize::Preprocessing;
use tdlab::harness::emit::{self, TTestRow};
use tdlab::harness::plot::{line_plot, PlotSpec, Series};
use tdlab::harness::{
    compare, network_size_sweep, prepare_dataset, run_sweep, train_network, ConfigOverrides,
    ExperimentConfig, Profile, SizeAxis, SweepResult, Task,
};
use tdlab::net::response_map;
use tdlab::stats::{two_sample_ttest_with, TTestKind};
use tdlab::{Error, Result};

#[derive(Parser)]
#[command(name = "tdlab", version, about = "TD learning experiments with neural network value functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimizer setting for every seed.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        setting: Setting,
    },
    /// Sweep the step-size (and beta) grid and keep the best setting.
    Sweep(Common),
    /// Sweep two preprocessings and t-test their best AUCs.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Preprocessing of the second arm.
        #[arg(long, default_value = "raw")]
        preprocessing_b: Preprocessing,
        /// System of the second arm; defaults to the first arm's.
        #[arg(long)]
        system_b: Option<System>,
    },
    /// Build the prediction evaluation dataset.
    EvalDataset(Common),
    /// Prediction sweep with interference snapshots.
    Interference(Common),
    /// Time-averaged interference across network sizes.
    NetSizeSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "units")]
        axis: SizeAxis,
    },
    /// Hidden-unit activations over a 2-D state grid after training.
    ResponseMap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        setting: Setting,
        #[arg(long, default_value_t = 50)]
        grid: usize,
    },
    /// Two-sample t-test on a column of two CSV files.
    Ttest {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value = "auc")]
        column: String,
        #[arg(long)]
        welch: bool,
        /// Also write the result row here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render `x,mean,stderr` CSV files as an SVG line plot.
    Plot {
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "")]
        title: String,
        #[arg(long)]
        log_x: bool,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// JSON file with any subset of the experiment fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    profile: Option<Profile>,
    #[arg(long)]
    task: Option<Task>,
    #[arg(long)]
    preprocessing: Option<Preprocessing>,
    #[arg(long)]
    system: Option<System>,
    /// Base seed; run r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// Replaces the step-size grid.
    #[arg(long, value_delimiter = ',')]
    step_sizes: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    beta1s: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    beta2s: Option<Vec<f64>>,
    /// Evaluation dataset CSV (read, or written by eval-dataset).
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    walk_steps: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also render SVG plots next to the CSVs.
    #[arg(long)]
    svg: bool,
}

#[derive(Args, Clone)]
struct Setting {
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        self.overrides()?.resolve()
    }

    fn overrides(&self) -> Result<ConfigOverrides> {
        let file = match &self.config {
            Some(p) => ExperimentConfig::from_json_file(p)?,
            None => ConfigOverrides::default(),
        };
        let flags = ConfigOverrides {
            profile: self.profile,
            task: self.task,
            preprocessing: self.preprocessing,
            system: self.system,
            base_seed: self.seed,
            runs: self.runs,
            episodes: self.episodes,
            hidden_layers: self.hidden.clone(),
            step_size_grid: self.step_sizes.clone(),
            beta1_grid: self.beta1s.clone(),
            beta2_grid: self.beta2s.clone(),
            dataset_path: self.dataset.clone().filter(|p| p.exists()),
            walk_steps: self.walk_steps,
            sample_size: self.samples,
            workers: self.workers,
            ..Default::default()
        };
        Ok(file.merge(flags))
    }
}

impl Setting {
    /// The requested setting, defaulting to the first grid entry.
    fn params(&self, cfg: &ExperimentConfig) -> OptimizerParams {
        let first = cfg.settings()[0];
        let step_size = self.step_size.unwrap_or(first.step_size);
        if cfg.system.uses_adam() {
            OptimizerParams::adam(
                step_size,
                self.beta1.or(first.beta1).unwrap_or(0.9),
                self.beta2.or(first.beta2).unwrap_or(0.999),
            )
        } else {
            OptimizerParams::sgd(step_size)
        }
    }
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_json()).map_err(|e| Error::io(&path, e))
}

fn csv_series(path: &Path) -> Result<Series> {
    let (header, _) = emit::read_csv(path)?;
    if header.len() < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            msg: "need at least x and y columns".into(),
        });
    }
    let col = |i: usize| emit::read_column(path, &header[i]);
    Ok(Series {
        name: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        xs: col(0)?,
        ys: col(1)?,
        err: if header.len() > 2 { Some(col(2)?) } else { None },
    })
}

fn render(inputs: &[PathBuf], out: &Path, spec: PlotSpec) -> Result<()> {
    let series = inputs.iter().map(|p| csv_series(p)).collect::<Result<Vec<_>>>()?;
    let svg = line_plot(&spec, &series)?;
    std::fs::write(out, svg).map_err(|e| Error::io(out, e))
}

fn metric_label(cfg: &ExperimentConfig) -> &'static str {
    if cfg.task.is_prediction() {
        "value error"
    } else {
        "steps per episode"
    }
}

fn emit_sweep(dir: &Path, cfg: &ExperimentConfig, sweep: &SweepResult, svg: bool) -> Result<()> {
    write_config(dir, cfg)?;
    let best = sweep.best();
    emit::write_sweep_summary(&dir.join("sweep.csv"), &sweep.settings)?;
    emit::write_sensitivity(&dir.join("sensitivity.csv"), &sweep.sensitivity())?;
    emit::write_learning_curve(&dir.join("learning_curve.csv"), &best.records)?;
    emit::write_runs(&dir.join("runs.csv"), &best.records)?;
    emit::write_aucs(&dir.join("aucs.csv"), best)?;
    if cfg.measure_interference {
        emit::write_interference(&dir.join("interference.csv"), &best.records)?;
    }
    if svg {
        let title = format!("{} {} {}", cfg.task, cfg.preprocessing, cfg.system);
        render(
            &[dir.join("learning_curve.csv")],
            &dir.join("learning_curve.svg"),
            PlotSpec {
                title: title.clone(),
                x_label: "episode".into(),
                y_label: metric_label(cfg).into(),
                log_x: false,
            },
        )?;
        render(
            &[dir.join("sensitivity.csv")],
            &dir.join("sensitivity.svg"),
            PlotSpec {
                title: title.clone(),
                x_label: "step size".into(),
                y_label: "area under curve".into(),
                log_x: true,
            },
        )?;
        if cfg.measure_interference {
            render(
                &[dir.join("interference.csv")],
                &dir.join("interference.svg"),
                PlotSpec {
                    title,
                    x_label: "episode".into(),
                    y_label: "pairwise interference".into(),
                    log_x: false,
                },
            )?;
        }
    }
    let p = best.params;
    println!(
        "best: step_size={} beta1={} beta2={} mean_auc={} stderr={}",
        p.step_size,
        p.beta1.map_or("-".into(), |b| b.to_string()),
        p.beta2.map_or("-".into(), |b| b.to_string()),
        best.mean_auc,
        best.stderr
    );
    println!("wrote {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, setting } => {
            let mut cfg = common.config()?;
            let params = setting.params(&cfg);
            cfg.step_size_grid = vec![params.step_size];
            cfg.beta1_grid = params.beta1.into_iter().collect();
            cfg.beta2_grid = params.beta2.into_iter().collect();
            let sweep = run_sweep(&cfg, prepare_dataset(&cfg)?.as_ref())?;
            emit_sweep(&common.out, &cfg, &sweep, common.svg)
        }
        Command::Sweep(common) => {
            let cfg = common.config()?;
            let sweep = run_sweep(&cfg, prepare_dataset(&cfg)?.as_ref())?;
            emit_sweep(&common.out, &cfg, &sweep, common.svg)
        }
        Command::Interference(common) => {
            let mut o = common.overrides()?;
            o.task = Some(Task::McPrediction);
            o.measure_interference = Some(true);
            let cfg = o.resolve()?;
            let sweep = run_sweep(&cfg, prepare_dataset(&cfg)?.as_ref())?;
            emit_sweep(&common.out, &cfg, &sweep, common.svg)
        }
        Command::Compare {
            common,
            preprocessing_b,
            system_b,
        } => {
            let a = common.config()?;
            let mut ob = common.overrides()?;
            ob.preprocessing = Some(preprocessing_b);
            ob.system = Some(system_b.unwrap_or(a.system));
            if ob.system != Some(a.system) {
                ob.beta1_grid = None;
                ob.beta2_grid = None;
            }
            let b = ob.resolve()?;
            let dataset = prepare_dataset(&a)?;
            let cmp = compare(&a, &b, dataset.as_ref())?;
            emit_sweep(&common.out.join("a"), &a, &cmp.a, common.svg)?;
            emit_sweep(&common.out.join("b"), &b, &cmp.b, common.svg)?;
            let row = TTestRow {
                task: a.task.to_string(),
                system: if a.system == b.system {
                    a.system.to_string()
                } else {
                    format!("{}|{}", a.system, b.system)
                },
                preprocessing_a: a.preprocessing.to_string(),
                preprocessing_b: b.preprocessing.to_string(),
                result: cmp.ttest,
            };
            emit::write_ttest(&common.out.join("ttest.csv"), &[row])?;
            println!(
                "t={} df={} p={} significant={}",
                cmp.ttest.t_statistic, cmp.ttest.degrees_of_freedom, cmp.ttest.p_value, cmp.ttest.significant_at_5pct
            );
            Ok(())
        }
        Command::EvalDataset(common) => {
            let mut o = common.overrides()?;
            o.task = Some(Task::McPrediction);
            o.dataset_path = None;
            let cfg = o.resolve()?;
            let ds = prepare_dataset(&cfg)?.ok_or(Error::Empty("eval dataset"))?;
            let path = common.dataset.clone().unwrap_or_else(|| common.out.join("eval_dataset.csv"));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            ds.write_csv(&path)?;
            println!("wrote {} states to {}", ds.len(), path.display());
            Ok(())
        }
        Command::NetSizeSweep { common, axis } => {
            let mut o = common.overrides()?;
            o.task = Some(Task::McPrediction);
            o.measure_interference = Some(true);
            let cfg = o.resolve()?;
            let dataset = prepare_dataset(&cfg)?.ok_or(Error::Empty("eval dataset"))?;
            let rows = network_size_sweep(&cfg, axis, &dataset)?;
            write_config(&common.out, &cfg)?;
            let path = common.out.join("net_size.csv");
            emit::write_net_size(&path, &rows)?;
            if common.svg {
                render(
                    std::slice::from_ref(&path),
                    &common.out.join("net_size.svg"),
                    PlotSpec {
                        title: format!("{} {}", cfg.preprocessing, cfg.system),
                        x_label: "size".into(),
                        y_label: "pairwise interference".into(),
                        log_x: false,
                    },
                )?;
            }
            for r in &rows {
                println!("size={} mean_pi={} sd={} step_size={}", r.size, r.mean_pi, r.sd, r.best.step_size);
            }
            Ok(())
        }
        Command::ResponseMap { common, setting, grid } => {
            let cfg = common.config()?;
            let params = setting.params(&cfg);
            let mut net = train_network(&cfg, params, cfg.base_seed)?;
            let mut featurizer = cfg.featurizer()?;
            let rows = response_map(&mut net, &mut featurizer, grid)?;
            write_config(&common.out, &cfg)?;
            emit::write_response_map(&common.out.join("response_map.csv"), &rows)?;
            println!("wrote {} rows to {}", rows.len(), common.out.display());
            Ok(())
        }
        Command::Ttest {
            a,
            b,
            column,
            welch,
            out,
        } => {
            let xa = emit::read_column(&a, &column)?;
            let xb = emit::read_column(&b, &column)?;
            let kind = if welch { TTestKind::Welch } else { TTestKind::Pooled };
            let r = two_sample_ttest_with(&xa, &xb, kind)?;
            println!("t={} df={} p={} significant={}", r.t_statistic, r.degrees_of_freedom, r.p_value, r.significant_at_5pct);
            if let Some(out) = out {
                let label = |p: &Path| p.display().to_string().replace(',', "_");
                let row = TTestRow {
                    task: String::new(),
                    system: String::new(),
                    preprocessing_a: label(&a),
                    preprocessing_b: label(&b),
                    result: r,
                };
                emit::write_ttest(&out, &[row])?;
            }
            Ok(())
        }
        Command::Plot {
            inputs,
            out,
            title,
            log_x,
        } => {
            let (header, _) = emit::read_csv(&inputs[0])?;
            let spec = PlotSpec {
                title,
                x_label: header.first().cloned().unwrap_or_default(),
                y_label: header.get(1).cloned().unwrap_or_default(),
                log_x,
            };
            render(&inputs, &out, spec)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}
