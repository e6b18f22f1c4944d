use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use softhebb::config::{ConfigMap, Experiment, RunConfig, DATA_DIR_ENV, KEYS};
use softhebb::experiments;
use softhebb::manifest::RunManifest;
use softhebb::{Error, Result};

/// Soft winner-take-all Hebbian learning experiments.
///
/// COMMAND is an experiment (train-softhebb, train-hardwta, train-mlp,
/// train-readout, label-neurons, eval, posthoc-xent, attack, noise-eval,
/// interpolate, verify-theory), `plot MANIFEST` to re-render SVGs, or `keys`
/// to list every configuration key with its default.
#[derive(Parser, Debug)]
#[command(name = "softhebb", version)]
struct Cli {
    command: String,
    /// Manifest path for `plot`.
    manifest: Option<PathBuf>,
    /// TOML file of dotted keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds to run; repeat or separate with commas.
    #[arg(long = "seed", value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    activation: Option<String>,
    #[arg(long)]
    base: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    eta_start: Option<f64>,
    #[arg(long)]
    eta_end: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    train_limit: Option<usize>,
    #[arg(long)]
    test_limit: Option<usize>,
    /// Any key: `--set readout.lr=0.01`. Applied after the flags above.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn toml_str(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

impl Cli {
    fn overrides(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !self.seeds.is_empty() {
            let list: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
            v.push(format!("run.seeds=[{}]", list.join(", ")));
        }
        if let Some(p) = &self.out {
            v.push(format!("run.out={}", toml_str(&p.to_string_lossy())));
        }
        if let Some(p) = &self.data_dir {
            v.push(format!("data.dir={}", toml_str(&p.to_string_lossy())));
        }
        if let Some(d) = &self.dataset {
            v.push(format!("data.dataset={}", toml_str(d)));
        }
        if let Some(a) = &self.activation {
            v.push(format!("model.activation={}", toml_str(a)));
        }
        let num = [
            ("model.k", self.k.map(|x| x.to_string())),
            ("model.base", self.base.map(|x| format!("{x:?}"))),
            ("model.temperature", self.temperature.map(|x| format!("{x:?}"))),
            ("train.eta_start", self.eta_start.map(|x| format!("{x:?}"))),
            ("train.eta_end", self.eta_end.map(|x| format!("{x:?}"))),
            ("train.epochs", self.epochs.map(|x| x.to_string())),
            ("data.train_limit", self.train_limit.map(|x| x.to_string())),
            ("data.test_limit", self.test_limit.map(|x| x.to_string())),
        ];
        v.extend(num.into_iter().filter_map(|(k, x)| x.map(|x| format!("{k}={x}"))));
        v.extend(self.set.iter().cloned());
        v
    }
}

fn run_experiment(cli: &Cli, experiment: Experiment) -> Result<RunManifest> {
    let mut map = ConfigMap::default();
    if let Some(p) = &cli.config {
        map.merge_file(p)?;
    }
    for o in cli.overrides() {
        map.merge_override(&o)?;
    }
    let env = std::env::var(DATA_DIR_ENV).ok();
    let cfg = RunConfig::resolve(experiment, map, env.as_deref())?;
    let m = experiments::run(&cfg)?;
    let dir = experiments::run_dir(&cfg);
    for (k, s) in &m.summary {
        println!("{k}: {:.6} ± {:.6} (n = {})", s.mean, s.std, s.n);
    }
    println!("manifest: {}", dir.join(softhebb::manifest::MANIFEST_FILE).display());
    Ok(m)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command.as_str() {
        "keys" => {
            for (k, default, doc) in KEYS {
                println!("{k} = {default}    # {doc}");
            }
            Ok(0)
        }
        "plot" => (|| {
            let path = cli.manifest.clone().ok_or_else(|| Error::config("manifest", "plot needs a manifest path"))?;
            let m = RunManifest::load(&path)?;
            let dir = path.parent().map(PathBuf::from).unwrap_or_default();
            for svg in experiments::emit_plots(&m, &dir)? {
                println!("{}", dir.join(svg).display());
            }
            Ok(0)
        })(),
        name => name.parse::<Experiment>().and_then(|e| run_experiment(&cli, e)).map(|m| {
            let failed = m.failed_seeds();
            if failed > 0 {
                eprintln!("{failed} of {} seeds failed; see the manifest", m.seeds.len());
                3
            } else {
                0
            }
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
