//! Flat key-value experiment configuration.
//!
//! One `key = value` pair per line, `#` comments, no nesting. The full key
//! set is documented in the README. Symbolic parameters (`run.alpha =
//! recommended`, `run.k = auto`) resolve through the rate formulas, and the
//! resolution is echoed into the run summary with its formula and inputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::gtsvrg::RunConfig;
use crate::objectives::Problem;
use crate::theory;
use crate::topology::{self, Graph, MixingMatrix, TopologyKind};
use crate::trace::Method;

/// Parsed but unresolved key-value configuration.
#[derive(Debug, Clone, Default)]
pub struct ExperimentConfig {
    map: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || value.is_empty() {
                return Err(Error::Config(format!(
                    "line {}: empty key or value",
                    lineno + 1
                )));
            }
            if map.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
        }
        Ok(ExperimentConfig { map })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    fn parse_key<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| Error::Config(format!("key `{key}`: bad value `{raw}`: {e}"))),
        }
    }

    fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parse_key(key)?.unwrap_or(default))
    }
}

/// How a symbolic parameter was resolved.
#[derive(Debug, Clone, Serialize)]
pub struct Resolution {
    pub mode: String,
    pub value: f64,
    pub formula: Option<String>,
    pub sigma: f64,
    pub q: f64,
    pub ell: f64,
}

/// Fully resolved experiment: concrete problem, weights, and run inputs.
#[derive(Debug)]
pub struct Experiment {
    pub problem: Problem,
    pub graph: Option<Graph>,
    pub w: MixingMatrix,
    pub run: RunConfig,
    pub methods: Vec<Method>,
    pub out_dir: PathBuf,
    pub alpha_resolution: Resolution,
    pub k_resolution: Resolution,
    pub trials: usize,
    pub max_states: usize,
    pub compare_target: f64,
}

fn build_topology(cfg: &ExperimentConfig) -> Result<(Option<Graph>, MixingMatrix)> {
    let kind = cfg.require("topology.kind")?;
    if kind == "file" {
        let path = cfg.require("topology.file")?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read matrix file {path}: {e}")))?;
        return Ok((None, MixingMatrix::parse_text(&text)?));
    }
    let n: usize = cfg
        .parse_key("topology.n")?
        .ok_or_else(|| Error::Config("missing required key `topology.n`".into()))?;
    let seed: u64 = cfg.parse_or("topology.seed", 0)?;
    let tk = match kind {
        "ring" => TopologyKind::Ring,
        "path" => TopologyKind::Path,
        "complete" => TopologyKind::Complete,
        "grid2d" => TopologyKind::Grid2d {
            rows: cfg
                .parse_key("topology.rows")?
                .ok_or_else(|| Error::Config("grid2d needs `topology.rows`".into()))?,
            cols: cfg
                .parse_key("topology.cols")?
                .ok_or_else(|| Error::Config("grid2d needs `topology.cols`".into()))?,
        },
        "erdos_renyi" => TopologyKind::ErdosRenyi {
            prob: cfg
                .parse_key("topology.prob")?
                .ok_or_else(|| Error::Config("erdos_renyi needs `topology.prob`".into()))?,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown topology.kind `{other}` \
                 (ring | path | grid2d | complete | erdos_renyi | file)"
            )))
        }
    };
    let graph = topology::build_graph(tk, n, seed)?;
    let weights = cfg.get("topology.weights").unwrap_or("metropolis");
    let w = match weights {
        "metropolis" => topology::metropolis_weights(&graph)?,
        "uniform" => {
            if kind != "complete" {
                return Err(Error::Config(
                    "uniform weights are defined for the complete topology only".into(),
                ));
            }
            topology::uniform_complete(n)?
        }
        other => {
            return Err(Error::Config(format!(
                "unknown topology.weights `{other}` (metropolis | uniform)"
            )))
        }
    };
    Ok((Some(graph), w))
}

fn parse_counts(raw: &str, n: usize) -> Result<Vec<usize>> {
    let parts: std::result::Result<Vec<usize>, _> =
        raw.split(',').map(|t| t.trim().parse::<usize>()).collect();
    let parts = parts.map_err(|e| Error::Config(format!("problem.m: bad value `{raw}`: {e}")))?;
    match parts.len() {
        1 => Ok(vec![parts[0]; n]),
        len if len == n => Ok(parts),
        len => Err(Error::Config(format!(
            "problem.m lists {len} counts for {n} nodes"
        ))),
    }
}

fn build_problem(cfg: &ExperimentConfig, n: usize) -> Result<Problem> {
    if let Some(path) = cfg.get("problem.file") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read problem file {path}: {e}")))?;
        let problem = Problem::parse_text(&text)?;
        if problem.n() != n {
            return Err(Error::Config(format!(
                "problem file has {} nodes but the topology has {n}",
                problem.n()
            )));
        }
        return Ok(problem);
    }
    let family = cfg.require("problem.family")?;
    let m = parse_counts(cfg.require("problem.m")?, n)?;
    let p: usize = cfg.parse_or("problem.p", 1)?;
    let seed: u64 = cfg.parse_or("problem.seed", 0)?;
    match family {
        "quadratic" => {
            let mu: f64 = cfg.parse_or("problem.mu", 1.0)?;
            let ell: f64 = cfg.parse_or("problem.ell", 10.0)?;
            Problem::make_quadratic(n, &m, p, mu, ell, seed)
        }
        "reglog" => {
            let lambda: f64 = cfg.parse_or("problem.lambda", 0.1)?;
            Problem::make_reglog(n, &m, p, lambda, seed)
        }
        other => Err(Error::Config(format!(
            "unknown problem.family `{other}` (quadratic | reglog)"
        ))),
    }
}

/// Resolve the whole experiment. `seed_override` (the CLI `--seed` flag)
/// replaces `run.seed`.
pub fn build(cfg: &ExperimentConfig, seed_override: Option<u64>) -> Result<Experiment> {
    let (graph, w) = build_topology(cfg)?;
    let problem = build_problem(cfg, w.n())?;
    let consts = problem.constants();
    let sigma = w.sigma();

    let alpha_raw = cfg.get("run.alpha").unwrap_or("recommended");
    let alpha_resolution = match alpha_raw {
        "recommended" => Resolution {
            mode: "recommended".into(),
            value: theory::recommended_step(sigma, consts.q, consts.ell),
            formula: Some("(1-sigma^2)^2 / (200 * Q * L)".into()),
            sigma,
            q: consts.q,
            ell: consts.ell,
        },
        "max" => Resolution {
            mode: "max".into(),
            value: theory::max_step_size(sigma, consts.q, consts.ell),
            formula: Some("(1-sigma^2)^2 / (105 * Q * L)".into()),
            sigma,
            q: consts.q,
            ell: consts.ell,
        },
        raw => Resolution {
            mode: "explicit".into(),
            value: raw
                .parse()
                .map_err(|e| Error::Config(format!("run.alpha: bad value `{raw}`: {e}")))?,
            formula: None,
            sigma,
            q: consts.q,
            ell: consts.ell,
        },
    };

    let c: f64 = cfg.parse_or("run.c", 1.0)?;
    let k_raw = cfg.get("run.k").unwrap_or("auto");
    let k_resolution = match k_raw {
        "auto" => {
            let k = theory::inner_loop_length(sigma, consts.q, c)?;
            Resolution {
                mode: "auto".into(),
                value: k as f64,
                formula: Some(format!(
                    "ceil(801 * Q^2 / (1-sigma^2)^2 * ln(20 * c)), c = {c}"
                )),
                sigma,
                q: consts.q,
                ell: consts.ell,
            }
        }
        raw => Resolution {
            mode: "explicit".into(),
            value: raw
                .parse::<usize>()
                .map_err(|e| Error::Config(format!("run.k: bad value `{raw}`: {e}")))?
                as f64,
            formula: None,
            sigma,
            q: consts.q,
            ell: consts.ell,
        },
    };
    let inner_len = k_resolution.value as usize;

    let outer_len: usize = cfg.parse_or("run.t", 10)?;
    let seed = match seed_override {
        Some(s) => s,
        None => cfg.parse_or("run.seed", 0)?,
    };
    // long inner loops default to boundary-only recording
    let default_record = if inner_len > 1000 { inner_len } else { 1 };
    let record_every: usize = cfg.parse_or("run.record_every", default_record)?;
    let exec: ExecMode = match cfg.get("run.exec") {
        None => ExecMode::default(),
        Some(raw) => raw.parse().map_err(Error::Config)?,
    };
    let x0 = match cfg.get("run.x0").unwrap_or("zero") {
        "zero" => None,
        "gaussian" => {
            use rand::Rng;
            use rand::SeedableRng;
            let scale: f64 = cfg.parse_or("run.x0_scale", 1.0)?;
            let mut prng = rand_chacha::ChaCha12Rng::seed_from_u64(seed ^ 0x7830_5f67);
            Some(
                (0..problem.n() * problem.p())
                    .map(|_| scale * prng.sample::<f64, _>(rand_distr::StandardNormal))
                    .collect(),
            )
        }
        other => {
            return Err(Error::Config(format!(
                "unknown run.x0 `{other}` (zero | gaussian)"
            )))
        }
    };
    let target_mean_dist: Option<f64> = cfg.parse_key("run.target")?;

    let run = RunConfig {
        alpha: alpha_resolution.value,
        inner_len,
        outer_len,
        seed,
        x0,
        record_every,
        exec,
        target_mean_dist,
    };
    run.validate(problem.n(), problem.p())?;

    let methods: Vec<Method> = match (cfg.get("run.methods"), cfg.get("run.method")) {
        (Some(list), _) => list
            .split(',')
            .map(|t| t.trim())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse())
            .collect::<Result<Vec<Method>>>()?,
        (None, Some(one)) => vec![one.parse()?],
        (None, None) => vec![Method::GtSvrg],
    };

    let out_dir = PathBuf::from(cfg.get("output.dir").unwrap_or("out"));

    Ok(Experiment {
        problem,
        graph,
        w,
        run,
        methods,
        out_dir,
        alpha_resolution,
        k_resolution,
        trials: cfg.parse_or("verify.trials", 10_000)?,
        max_states: cfg.parse_or("verify.max_states", 60)?,
        compare_target: cfg.parse_or("run.target", 1e-6)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
# smallest useful experiment
topology.kind = ring
topology.n = 4
problem.family = quadratic
problem.m = 3
problem.p = 2
problem.mu = 1.0
problem.ell = 5.0
problem.seed = 7
run.alpha = recommended
run.k = 20
run.t = 2
run.seed = 11
";

    #[test]
    fn minimal_config_resolves() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let exp = build(&cfg, None).unwrap();
        assert_eq!(exp.problem.n(), 4);
        assert_eq!(exp.problem.m(), &[3, 3, 3, 3]);
        assert_eq!(exp.run.inner_len, 20);
        assert_eq!(exp.run.seed, 11);
        assert_eq!(exp.alpha_resolution.mode, "recommended");
        let c = exp.problem.constants();
        let expect = theory::recommended_step(exp.w.sigma(), c.q, c.ell);
        assert_eq!(exp.run.alpha, expect);
        assert_eq!(exp.methods, vec![Method::GtSvrg]);
    }

    #[test]
    fn seed_override_wins() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let exp = build(&cfg, Some(99)).unwrap();
        assert_eq!(exp.run.seed, 99);
    }

    #[test]
    fn auto_inner_len_uses_formula() {
        let text = MINIMAL.replace("run.k = 20", "run.k = auto");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let exp = build(&cfg, None).unwrap();
        let c = exp.problem.constants();
        let expect = theory::inner_loop_length(exp.w.sigma(), c.q, 1.0).unwrap();
        assert_eq!(exp.run.inner_len, expect);
        assert_eq!(exp.k_resolution.mode, "auto");
        // long loops default to boundary-only recording
        assert_eq!(exp.run.record_every, expect);
    }

    #[test]
    fn per_node_counts_and_method_list() {
        let text = MINIMAL.replace("problem.m = 3", "problem.m = 5,1,2,8")
            + "run.methods = gtsvrg, gt, dsgd\n";
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let exp = build(&cfg, None).unwrap();
        assert_eq!(exp.problem.m(), &[5, 1, 2, 8]);
        assert_eq!(exp.methods, vec![Method::GtSvrg, Method::Gt, Method::Dsgd]);
    }

    #[test]
    fn malformed_configs_are_rejected() {
        assert!(ExperimentConfig::parse("topology.kind ring").is_err());
        assert!(ExperimentConfig::parse("a = 1\na = 2").is_err());
        let cfg = ExperimentConfig::parse("topology.kind = moebius\ntopology.n = 4").unwrap();
        assert!(matches!(build(&cfg, None), Err(Error::Config(_))));
        let cfg = ExperimentConfig::parse(&MINIMAL.replace(
            "problem.m = 3",
            "problem.m = 1,2",
        ))
        .unwrap();
        assert!(build(&cfg, None).is_err());
    }

    #[test]
    fn file_round_trip_through_serialized_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let exp = build(&cfg, None).unwrap();
        let ppath = dir.path().join("problem.txt");
        let wpath = dir.path().join("mixing.txt");
        std::fs::write(&ppath, exp.problem.to_text()).unwrap();
        std::fs::write(&wpath, exp.w.to_text()).unwrap();
        let replay = format!(
            "topology.kind = file\ntopology.file = {}\nproblem.file = {}\nrun.k = 20\nrun.t = 2\n",
            wpath.display(),
            ppath.display()
        );
        let cfg2 = ExperimentConfig::parse(&replay).unwrap();
        let exp2 = build(&cfg2, None).unwrap();
        assert_eq!(exp.problem.minimizer(), exp2.problem.minimizer());
        assert_eq!(exp.w.dense(), exp2.w.dense());
    }
}
