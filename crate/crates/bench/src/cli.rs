use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pihqcd::qsim::AnsatzFamily;

use crate::config::{apply_config_file, parse_seeds, ExperimentConfig};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "pihqcd", version, about = "Hybrid quantum-classical dispatch experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the hybrid optimizer on a case for every seed.
    Solve(Common),
    /// Gradient variance against register size, topology vs generic ansatz.
    VarianceStudy(VarianceArgs),
    /// Terminal cost degradation as the shot budget shrinks.
    NoiseSweep(Common),
    /// Per-iteration traces of the hybrid, generic, annealing and classical solvers.
    ConvergenceCompare(Common),
    /// Aggregate experiment CSVs under a directory into mean ± std tables.
    Report(ReportArgs),
}

#[derive(Debug, Clone)]
pub struct Seeds(pub Vec<u64>);

fn seeds_arg(s: &str) -> std::result::Result<Seeds, String> {
    parse_seeds(s).map(Seeds)
}

#[derive(Debug, Args)]
pub struct Common {
    /// Case file (JSON).
    #[arg(long)]
    pub case: Option<PathBuf>,
    /// Bits per continuous decision.
    #[arg(long)]
    pub bits: Option<usize>,
    /// topology, linear_chain or all_to_all.
    #[arg(long)]
    pub ansatz: Option<AnsatzFamily>,
    /// `0..10`, `1,4,9` or a single seed.
    #[arg(long, value_parser = seeds_arg)]
    pub seeds: Option<Seeds>,
    /// Shots per expectation, comma separated (noise-sweep grid; first value elsewhere).
    #[arg(long, value_delimiter = ',')]
    pub shots: Option<Vec<u64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON config laid over the flags; a previous run's manifest.json replays it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VarianceArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Layers of the topology ansatz.
    #[arg(long)]
    pub depth: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding experiment outputs.
    pub dir: PathBuf,
    /// Defaults to the input directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Common {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(c) = &self.case {
            cfg.case = Some(c.clone());
        }
        if let Some(b) = self.bits {
            cfg.bits = b;
        }
        if let Some(a) = self.ansatz {
            cfg.ansatz = a;
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.0.clone();
        }
        if let Some(s) = &self.shots {
            if cfg.command == "noise-sweep" {
                cfg.noise_grid = s.clone();
            } else {
                cfg.shots = s.clone();
            }
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
    }
}

impl Cli {
    pub fn into_config(self) -> Result<ExperimentConfig> {
        let (name, common, config) = match &self.command {
            Command::Solve(c) => ("solve", Some(c), c.config.clone()),
            Command::VarianceStudy(v) => ("variance-study", Some(&v.common), v.common.config.clone()),
            Command::NoiseSweep(c) => ("noise-sweep", Some(c), c.config.clone()),
            Command::ConvergenceCompare(c) => ("convergence-compare", Some(c), c.config.clone()),
            Command::Report(r) => ("report", None, r.config.clone()),
        };
        let mut cfg = ExperimentConfig { command: name.into(), ..Default::default() };
        if let Some(c) = common {
            c.apply(&mut cfg);
        }
        match &self.command {
            Command::VarianceStudy(v) => {
                let vc = &mut cfg.variance;
                vc.n_min = v.n_min.unwrap_or(vc.n_min);
                vc.n_max = v.n_max.unwrap_or(vc.n_max);
                vc.trials = v.trials.unwrap_or(vc.trials);
                vc.depth = v.depth.unwrap_or(vc.depth);
            }
            Command::Report(r) => {
                cfg.input = Some(r.dir.clone());
                cfg.out = r.out.clone().unwrap_or_else(|| r.dir.clone());
            }
            _ => {}
        }
        match config {
            Some(path) => apply_config_file(&cfg, &path),
            None => Ok(cfg),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> ExperimentConfig {
        Cli::try_parse_from(std::iter::once("pihqcd").chain(args.iter().copied())).unwrap().into_config().unwrap()
    }

    #[test]
    fn flags_fill_the_config() {
        let c = parse(&["solve", "--case", "x.json", "--bits", "3", "--ansatz", "all_to_all", "--seeds", "0..3", "--shots", "128"]);
        assert_eq!(c.command, "solve");
        assert_eq!((c.bits, c.ansatz, c.seeds.clone(), c.shots.clone()), (3, AnsatzFamily::AllToAll, vec![0, 1, 2], vec![128]));
        let n = parse(&["noise-sweep", "--shots", "64,256"]);
        assert_eq!(n.noise_grid, vec![64, 256]);
        let v = parse(&["variance-study", "--n-min", "3", "--n-max", "5", "--trials", "4"]);
        assert_eq!(v.variance.n_list(), vec![3, 4, 5]);
        let r = parse(&["report", "runs"]);
        assert_eq!((r.input, r.out), (Some(PathBuf::from("runs")), PathBuf::from("runs")));
    }

    #[test]
    fn bad_flags_are_usage_errors() {
        assert!(Cli::try_parse_from(["pihqcd", "solve", "--ansatz", "ring"]).is_err());
        assert!(Cli::try_parse_from(["pihqcd", "solve", "--seeds", "x"]).is_err());
        assert!(Cli::try_parse_from(["pihqcd", "unknown"]).is_err());
    }
}
