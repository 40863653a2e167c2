//! Experiment configuration: a flat `key = value` text format.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist_zoo::DistributionSpec;
use crate::error::{Error, Result};
use crate::gev_fit::{BlockSize, MleOptions};
use crate::kernel_est::KernelId;
use crate::metrics::DEFAULT_MISE_NODES;
use crate::semiparam::{HGrid, DEFAULT_CV_NODES, DEFAULT_P_TOLERANCE};

/// Grammar and defaults of the configuration file, shown by `--help`.
pub const CONFIG_HELP: &str = "\
Configuration file: one `key = value` per line, `#` starts a comment.
Unknown keys are rejected. Keys other than `cell` may appear once.

  cell = <spec>; n=<int>; m=<int>   repeatable, at least one; m <= n
                                    e.g. cell = burr:c=1/2,l=1/2; n=256; m=16
  reps = <int>                      default 100
  master_seed = <int>               default 1
  methods = <list>                  default parametric,nonparametric,ml_mix,cv_mix
  block_size = auto|<int>           default auto (min(m, n/20), at least 2)
  kernel = auto|gaussian|epanechnikov
                                    default auto (epanechnikov for revburr,
                                    gaussian otherwise)
  gamma_bounds = <lo>,<hi>          default -0.99,5
  optimizer_max_iter = <int>        default 500
  p_tolerance = <real>              default 1e-6
  h_grid.min_factor = <real>        default 0.0001 (times robust scale)
  h_grid.max_factor = <real>        default 10000
  h_grid.points = <int>             default 129
  cv_nodes = <odd int>              default 513
  window_padding_factor = <real>    default 1
  loo_refit_gev = true|false        default false
  mise_nodes = <odd int>            default 2049
";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Parametric,
    Nonparametric,
    MlMix,
    CvMix,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Parametric,
        Method::Nonparametric,
        Method::MlMix,
        Method::CvMix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Parametric => "parametric",
            Method::Nonparametric => "nonparametric",
            Method::MlMix => "ml_mix",
            Method::CvMix => "cv_mix",
        }
    }

    /// Whether the method reports a mixing weight.
    pub fn is_mixture(self) -> bool {
        matches!(self, Method::MlMix | Method::CvMix)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Accepts the long names and the short CLI forms `par`, `np`, `ml`, `cv`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "parametric" | "par" => Ok(Method::Parametric),
            "nonparametric" | "np" => Ok(Method::Nonparametric),
            "ml_mix" | "ml" => Ok(Method::MlMix),
            "cv_mix" | "cv" => Ok(Method::CvMix),
            _ => Err(Error::parse(
                s.trim(),
                "unknown method (expected parametric|nonparametric|ml_mix|cv_mix)",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    /// Epanechnikov for the reversed Burr family, Gaussian otherwise.
    #[default]
    Auto,
    Fixed(KernelId),
}

impl KernelChoice {
    pub fn resolve(self, spec: Option<&DistributionSpec>) -> KernelId {
        match self {
            KernelChoice::Fixed(k) => k,
            KernelChoice::Auto => match spec {
                Some(DistributionSpec::ReversedBurr { .. }) => KernelId::Epanechnikov,
                _ => KernelId::Gaussian,
            },
        }
    }
}

impl fmt::Display for KernelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelChoice::Auto => f.write_str("auto"),
            KernelChoice::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for KernelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("auto") {
            Ok(KernelChoice::Auto)
        } else {
            s.parse().map(KernelChoice::Fixed)
        }
    }
}

/// Tuning shared by the simulation harness and the `fit` command.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorKnobs {
    pub block_size: BlockSize,
    pub kernel: KernelChoice,
    pub mle: MleOptions,
    pub p_tolerance: f64,
    pub h_grid: HGrid,
    pub cv_nodes: usize,
    pub window_padding_factor: f64,
    pub loo_refit_gev: bool,
    pub mise_nodes: usize,
}

impl Default for EstimatorKnobs {
    fn default() -> Self {
        EstimatorKnobs {
            block_size: BlockSize::Auto,
            kernel: KernelChoice::Auto,
            mle: MleOptions::default(),
            p_tolerance: DEFAULT_P_TOLERANCE,
            h_grid: HGrid::default(),
            cv_nodes: DEFAULT_CV_NODES,
            window_padding_factor: 1.0,
            loo_refit_gev: false,
            mise_nodes: DEFAULT_MISE_NODES,
        }
    }
}

fn odd_nodes(key: &str, nodes: usize) -> Result<()> {
    if nodes < 3 || nodes.is_multiple_of(2) {
        Err(Error::parse(
            key,
            format!("must be an odd integer >= 3, got {nodes}"),
        ))
    } else {
        Ok(())
    }
}

impl EstimatorKnobs {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.mle.gamma_bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::parse("gamma_bounds", "need finite lo < hi"));
        }
        if self.mle.max_iter == 0 {
            return Err(Error::parse("optimizer_max_iter", "must be at least 1"));
        }
        if !(self.p_tolerance > 0.0 && self.p_tolerance < 1.0) {
            return Err(Error::parse("p_tolerance", "must lie in (0, 1)"));
        }
        let g = &self.h_grid;
        if !(g.min_factor > 0.0 && g.min_factor.is_finite()) {
            return Err(Error::parse("h_grid.min_factor", "must be positive"));
        }
        if !(g.max_factor >= g.min_factor && g.max_factor.is_finite()) {
            return Err(Error::parse(
                "h_grid.max_factor",
                "must be finite and >= h_grid.min_factor",
            ));
        }
        if g.points == 0 || (g.points == 1 && g.min_factor != g.max_factor) {
            return Err(Error::parse(
                "h_grid.points",
                "need at least two points for a range",
            ));
        }
        odd_nodes("cv_nodes", self.cv_nodes)?;
        odd_nodes("mise_nodes", self.mise_nodes)?;
        if !(self.window_padding_factor >= 0.0 && self.window_padding_factor.is_finite()) {
            return Err(Error::parse(
                "window_padding_factor",
                "must be finite and >= 0",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub spec: DistributionSpec,
    pub n: usize,
    pub m: usize,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}; n={}; m={}", self.spec, self.n, self.m)
    }
}

impl FromStr for Cell {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(';');
        let spec: DistributionSpec = parts.next().unwrap_or("").trim().parse()?;
        let (mut n, mut m) = (None, None);
        for part in parts {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::parse(part, "expected `n=<int>` or `m=<int>`"))?;
            let key = key.trim().to_ascii_lowercase();
            let value: usize = value
                .trim()
                .parse()
                .map_err(|_| Error::parse(part, "not a nonnegative integer"))?;
            let slot = match key.as_str() {
                "n" => &mut n,
                "m" => &mut m,
                _ => return Err(Error::parse(key, "unknown cell field (expected n or m)")),
            };
            if slot.replace(value).is_some() {
                return Err(Error::parse(key, "given twice in one cell"));
            }
        }
        let n = n.ok_or_else(|| Error::parse("cell", "missing n"))?;
        let m = m.ok_or_else(|| Error::parse("cell", "missing m"))?;
        let cell = Cell { spec, n, m };
        cell.validate()?;
        Ok(cell)
    }
}

impl Cell {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::parse(
                "cell",
                format!("n must be at least 2, got {}", self.n),
            ));
        }
        if self.m < 1 || self.m > self.n {
            return Err(Error::parse(
                "cell",
                format!(
                    "m must satisfy 1 <= m <= n, got m={} with n={}",
                    self.m, self.n
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub cells: Vec<Cell>,
    /// Distinct methods in canonical order.
    pub methods: Vec<Method>,
    pub reps: usize,
    pub master_seed: u64,
    pub knobs: EstimatorKnobs,
}

pub const DEFAULT_REPS: usize = 100;
pub const DEFAULT_MASTER_SEED: u64 = 1;

/// Reversed Burr cells use c ∈ {-1/2,-1,-3} and ℓ ∈ {-1/3,-1,-2}.
pub fn standard_zoo() -> Vec<DistributionSpec> {
    use DistributionSpec::*;
    let mut zoo = Vec::new();
    for l in [0.5, 1.0, 3.0, 10.0] {
        zoo.push(Pareto { l });
    }
    for l in [0.5, 1.0, 3.0, 10.0] {
        zoo.push(StudentT { l });
    }
    for l in [0.5, 1.0, 3.0] {
        for c in [0.5, 1.0, 3.0] {
            zoo.push(Burr { c, l });
        }
    }
    for gamma in [5.0, 2.0, 1.0, 0.5, 0.25] {
        zoo.push(Frechet { gamma });
    }
    for kappa in [0.5, 1.0, 3.0, 10.0] {
        zoo.push(Weibull { kappa });
    }
    for l in [-1.0 / 3.0, -1.0, -2.0] {
        for c in [-0.5, -1.0, -3.0] {
            zoo.push(ReversedBurr { c, l });
        }
    }
    zoo.push(RVonMises);
    zoo
}

/// Horizons `n^{1/4}, n^{1/2}, n^{3/4}`, rounded to the nearest integer.
pub fn standard_horizons(n: usize) -> [usize; 3] {
    let nf = n as f64;
    [0.25, 0.5, 0.75].map(|e| nf.powf(e).round().max(1.0) as usize)
}

impl ExperimentConfig {
    pub fn new(cells: Vec<Cell>) -> Self {
        ExperimentConfig {
            cells,
            methods: Method::ALL.to_vec(),
            reps: DEFAULT_REPS,
            master_seed: DEFAULT_MASTER_SEED,
            knobs: EstimatorKnobs::default(),
        }
    }

    /// Every family in the zoo at sample size `n` and the three standard
    /// horizons.
    pub fn full_zoo(n: usize) -> Self {
        let cells = standard_zoo()
            .into_iter()
            .flat_map(|spec| standard_horizons(n).map(|m| Cell { spec, n, m }))
            .collect();
        ExperimentConfig::new(cells)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::parse("cell", "at least one cell is required"));
        }
        for c in &self.cells {
            c.validate()?;
        }
        if self.methods.is_empty() {
            return Err(Error::parse("methods", "at least one method is required"));
        }
        if self.reps == 0 {
            return Err(Error::parse("reps", "must be at least 1"));
        }
        self.knobs.validate()
    }

    /// Canonical text: non-default settings in a fixed order, then cells.
    pub fn to_text(&self) -> String {
        let d = EstimatorKnobs::default();
        let k = &self.knobs;
        let mut out = String::new();
        let mut put = |key: &str, value: String| {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value);
            out.push('\n');
        };
        if self.reps != DEFAULT_REPS {
            put("reps", self.reps.to_string());
        }
        if self.master_seed != DEFAULT_MASTER_SEED {
            put("master_seed", self.master_seed.to_string());
        }
        if self.methods != Method::ALL {
            let names: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
            put("methods", names.join(","));
        }
        if k.block_size != d.block_size {
            put("block_size", k.block_size.to_string());
        }
        if k.kernel != d.kernel {
            put("kernel", k.kernel.to_string());
        }
        if k.mle.gamma_bounds != d.mle.gamma_bounds {
            put(
                "gamma_bounds",
                format!("{},{}", k.mle.gamma_bounds.0, k.mle.gamma_bounds.1),
            );
        }
        if k.mle.max_iter != d.mle.max_iter {
            put("optimizer_max_iter", k.mle.max_iter.to_string());
        }
        if k.p_tolerance != d.p_tolerance {
            put("p_tolerance", k.p_tolerance.to_string());
        }
        if k.h_grid.min_factor != d.h_grid.min_factor {
            put("h_grid.min_factor", k.h_grid.min_factor.to_string());
        }
        if k.h_grid.max_factor != d.h_grid.max_factor {
            put("h_grid.max_factor", k.h_grid.max_factor.to_string());
        }
        if k.h_grid.points != d.h_grid.points {
            put("h_grid.points", k.h_grid.points.to_string());
        }
        if k.cv_nodes != d.cv_nodes {
            put("cv_nodes", k.cv_nodes.to_string());
        }
        if k.window_padding_factor != d.window_padding_factor {
            put("window_padding_factor", k.window_padding_factor.to_string());
        }
        if k.loo_refit_gev != d.loo_refit_gev {
            put("loo_refit_gev", k.loo_refit_gev.to_string());
        }
        if k.mise_nodes != d.mise_nodes {
            put("mise_nodes", k.mise_nodes.to_string());
        }
        for c in &self.cells {
            put("cell", c.to_string());
        }
        out
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_config(s)
    }
}

fn value_of<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::parse(key, format!("invalid value `{value}`")))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value_of(key, value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::parse(key, format!("invalid value `{value}`")))
    }
}

fn parse_methods(value: &str) -> Result<Vec<Method>> {
    let mut methods = Vec::new();
    for tok in value.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        let m: Method = tok
            .parse()
            .map_err(|_| Error::parse("methods", format!("unknown method `{tok}`")))?;
        methods.push(m);
    }
    methods.sort();
    methods.dedup();
    Ok(methods)
}

/// Parses the configuration text; errors name the offending key.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(Vec::new());
    let mut seen: Vec<String> = Vec::new();
    for raw in text.lines() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(line, "expected `key = value`"))?;
        let key = key.trim();
        let value = value.trim();
        if key != "cell" {
            if seen.iter().any(|k| k == key) {
                return Err(Error::parse(key, "key given more than once"));
            }
            seen.push(key.to_string());
        }
        let k = &mut cfg.knobs;
        match key {
            "cell" => {
                let cell: Cell = value.parse().map_err(|e| match e {
                    Error::Parse { token, reason } if token == "cell" => {
                        Error::parse("cell", reason)
                    }
                    Error::Parse { token, reason } => {
                        Error::parse("cell", format!("`{token}`: {reason}"))
                    }
                    other => other,
                })?;
                cfg.cells.push(cell);
            }
            "reps" => cfg.reps = value_of(key, value)?,
            "master_seed" => cfg.master_seed = value_of(key, value)?,
            "methods" => cfg.methods = parse_methods(value)?,
            "block_size" => k.block_size = value_of(key, value)?,
            "kernel" => k.kernel = value_of(key, value)?,
            "gamma_bounds" => {
                let (lo, hi) = value
                    .split_once(',')
                    .ok_or_else(|| Error::parse(key, "expected `<lo>,<hi>`"))?;
                k.mle.gamma_bounds = (parse_f64(key, lo.trim())?, parse_f64(key, hi.trim())?);
            }
            "optimizer_max_iter" => k.mle.max_iter = value_of(key, value)?,
            "p_tolerance" => k.p_tolerance = parse_f64(key, value)?,
            "h_grid.min_factor" => k.h_grid.min_factor = parse_f64(key, value)?,
            "h_grid.max_factor" => k.h_grid.max_factor = parse_f64(key, value)?,
            "h_grid.points" => k.h_grid.points = value_of(key, value)?,
            "cv_nodes" => k.cv_nodes = value_of(key, value)?,
            "window_padding_factor" => k.window_padding_factor = parse_f64(key, value)?,
            "loo_refit_gev" => k.loo_refit_gev = value_of(key, value)?,
            "mise_nodes" => k.mise_nodes = value_of(key, value)?,
            _ => return Err(Error::parse(key, "unknown key")),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn token(e: Error) -> String {
        match e {
            Error::Parse { token, .. } => token,
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_roundtrip() {
        let text = "cell = pareto:l=1; n=256; m=16\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.reps, 100);
        assert_eq!(cfg.methods, Method::ALL);
        assert_eq!(cfg.to_text(), text);
    }

    #[test]
    fn full_roundtrip() {
        let text = "\
# comment line
reps = 7
master_seed = 42   # trailing comment
methods = cv_mix, parametric
block_size = 8
kernel = epanechnikov
gamma_bounds = -0.5,2
optimizer_max_iter = 300
p_tolerance = 0.0001
h_grid.min_factor = 0.001
h_grid.max_factor = 100
h_grid.points = 65
cv_nodes = 257
window_padding_factor = 2.5
loo_refit_gev = true
mise_nodes = 1025
cell = burr:c=1/2,l=1/2; n=256; m=16
cell = rvonmises; m=4; n=256
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.methods, vec![Method::Parametric, Method::CvMix]);
        assert_eq!(cfg.knobs.block_size, BlockSize::Fixed(8));
        assert_eq!(cfg.cells.len(), 2);
        let again = parse_config(&cfg.to_text()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_text(), cfg.to_text());
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_config("repz = 100\ncell = pareto:l=1; n=256; m=16\n").unwrap_err();
        assert_eq!(token(e), "repz");
    }

    #[test]
    fn invariant_errors() {
        let e = parse_config("cell = pareto:l=1; n=16; m=32\n").unwrap_err();
        assert_eq!(token(e), "cell");
        let e = parse_config("reps = 0\ncell = pareto:l=1; n=16; m=4\n").unwrap_err();
        assert_eq!(token(e), "reps");
        let e = parse_config("methods = \ncell = pareto:l=1; n=16; m=4\n").unwrap_err();
        assert_eq!(token(e), "methods");
        assert_eq!(token(parse_config("").unwrap_err()), "cell");
        let e = parse_config("cv_nodes = 512\ncell = pareto:l=1; n=16; m=4\n").unwrap_err();
        assert_eq!(token(e), "cv_nodes");
    }

    #[test]
    fn type_mismatch_names_key() {
        let e = parse_config("reps = many\ncell = pareto:l=1; n=16; m=4\n").unwrap_err();
        assert_eq!(token(e), "reps");
        let e = parse_config("loo_refit_gev = yes\ncell = pareto:l=1; n=16; m=4\n").unwrap_err();
        assert_eq!(token(e), "loo_refit_gev");
    }

    #[test]
    fn duplicate_key() {
        let e = parse_config("reps = 1\nreps = 2\ncell = pareto:l=1; n=16; m=4\n").unwrap_err();
        assert_eq!(token(e), "reps");
    }

    #[test]
    fn kernel_rule() {
        let rb: DistributionSpec = "revburr:c=-1,l=-2".parse().unwrap();
        let p: DistributionSpec = "pareto:l=1".parse().unwrap();
        assert_eq!(
            KernelChoice::Auto.resolve(Some(&rb)),
            KernelId::Epanechnikov
        );
        assert_eq!(KernelChoice::Auto.resolve(Some(&p)), KernelId::Gaussian);
        assert_eq!(KernelChoice::Auto.resolve(None), KernelId::Gaussian);
        let g = KernelChoice::Fixed(KernelId::Gaussian);
        assert_eq!(g.resolve(Some(&rb)), KernelId::Gaussian);
    }

    #[test]
    fn zoo_and_horizons() {
        assert_eq!(standard_zoo().len(), 36);
        assert_eq!(standard_horizons(256), [4, 16, 64]);
        assert_eq!(standard_horizons(4096), [8, 64, 512]);
        let cfg = ExperimentConfig::full_zoo(256);
        assert_eq!(cfg.cells.len(), 108);
        cfg.validate().unwrap();
        assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
    }
}
