use std::path::{Path, PathBuf};
use std::process::Command;

use anyhow::{bail, Context, Result};
use clap::Args;
use corpusforge::merge::{dare_ties, grid_search, MergeConfig, ParameterMap};

use crate::util::{emit, settings};
use crate::Globals;

#[derive(Debug, Args)]
pub struct Knobs {
    /// DARE drop probability.
    #[arg(long = "drop")]
    drop_prob: Option<f64>,
    /// TIES density: fraction of each task vector kept by magnitude.
    #[arg(long)]
    density: Option<f64>,
}

impl Knobs {
    fn config(&self, g: &Globals) -> Result<MergeConfig> {
        let mut cfg: MergeConfig = settings(g)?;
        cfg.seed = g.seed;
        if let Some(p) = self.drop_prob {
            cfg.drop_prob = p;
        }
        if let Some(d) = self.density {
            cfg.density = d;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// Base checkpoint directory.
    #[arg(long)]
    base: PathBuf,
    /// Fine-tuned checkpoint as DIR:WEIGHT; repeatable.
    #[arg(long = "model", required = true)]
    models: Vec<String>,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    knobs: Knobs,
}

fn parse_weighted(spec: &str) -> Result<(PathBuf, f64)> {
    let (dir, w) = spec
        .rsplit_once(':')
        .with_context(|| format!("expected DIR:WEIGHT, got {spec:?}"))?;
    let w: f64 = w.parse().with_context(|| format!("bad weight in {spec:?}"))?;
    if !w.is_finite() {
        bail!("weight in {spec:?} is not finite");
    }
    Ok((PathBuf::from(dir), w))
}

pub fn merge(a: MergeArgs, g: &Globals) -> Result<()> {
    let cfg = a.knobs.config(g)?;
    let base = ParameterMap::load(&a.base)?;
    let models = a
        .models
        .iter()
        .map(|s| {
            let (dir, w) = parse_weighted(s)?;
            Ok((ParameterMap::load(&dir)?, w))
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<(&ParameterMap, f64)> = models.iter().map(|(m, w)| (m, *w)).collect();
    let merged = dare_ties(&base, &refs, &cfg)?;
    merged.save(&a.output)?;
    emit(&serde_json::json!({ "config": cfg, "tensors": merged.len() }), g)
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    base: PathBuf,
    /// Checkpoint weighted 0.5 + w.
    #[arg(long)]
    a: PathBuf,
    /// Checkpoint weighted 0.5 - w.
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    /// Shell command run with the merged checkpoint directory appended as
    /// its last argument; the last line of its stdout must be a number.
    #[arg(long)]
    scorer_cmd: String,
    /// Save the best merge here.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    knobs: Knobs,
}

fn run_scorer(cmd: &str, dir: &Path) -> corpusforge::Result<f64> {
    let fail = |m: String| corpusforge::Error::Stage {
        stage: "scorer".into(),
        message: m,
    };
    let out = Command::new("sh")
        .arg("-c")
        .arg(format!("{cmd} \"$1\""))
        .arg("sh")
        .arg(dir)
        .output()
        .map_err(|e| fail(format!("could not start scorer: {e}")))?;
    if !out.status.success() {
        return Err(fail(format!(
            "scorer exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    let last = stdout.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("");
    last.trim()
        .parse()
        .map_err(|_| fail(format!("scorer printed {last:?}, expected a number")))
}

pub fn grid(a: GridArgs, g: &Globals) -> Result<()> {
    let cfg = a.knobs.config(g)?;
    let base = ParameterMap::load(&a.base)?;
    let ma = ParameterMap::load(&a.a)?;
    let mb = ParameterMap::load(&a.b)?;
    let scratch = tempfile::tempdir()?;
    let mut round = 0;
    let result = grid_search(
        &base,
        &ma,
        &mb,
        |merged| {
            round += 1;
            let dir = scratch.path().join(format!("point{round:02}"));
            merged.save(&dir)?;
            let score = run_scorer(&a.scorer_cmd, &dir);
            let _ = std::fs::remove_dir_all(&dir);
            score
        },
        a.step,
        &cfg,
    )?;
    if let Some(out) = &a.output {
        let best = dare_ties(
            &base,
            &[(&ma, result.best.weight_a), (&mb, result.best.weight_b)],
            &cfg,
        )?;
        best.save(out)?;
    }
    emit(&result, g)
}
