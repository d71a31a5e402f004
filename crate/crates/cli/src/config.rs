use anyhow::{bail, Context, Result};
use channelfield::markov::KernelVariant;
use channelfield::{Point, Rect};
use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// Effective run parameters: defaults, then the config file, then flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub alpha: f64,
    pub window: [f64; 4],
    pub epsilon: f64,
    pub seed: u64,
    pub step: f64,
    pub t_end: f64,
    pub n_max: usize,
    pub quadrature_order: usize,
    pub mc_samples: usize,
    pub replicas: usize,
    pub out: PathBuf,
    pub smoke: bool,
    pub kernel_exponent: u8,
    pub start: Option<[f64; 2]>,
    pub input: Option<PathBuf>,
    pub empty_field: bool,
    pub grid: usize,
    pub criteria: Vec<usize>,
    pub lags: Vec<f64>,
    pub zeta_max: f64,
    pub zeta_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            alpha: 1.5,
            window: [-10.0, -10.0, 40.0, 40.0],
            epsilon: 1e-3,
            seed: 1,
            step: channelfield::flow::DEFAULT_STEP,
            t_end: 100.0,
            n_max: channelfield::chains::DEFAULT_N_MAX,
            quadrature_order: channelfield::mollify::DEFAULT_ORDER,
            mc_samples: 10_000,
            replicas: 1,
            out: PathBuf::from("out"),
            smoke: false,
            kernel_exponent: 2,
            start: None,
            input: None,
            empty_field: false,
            grid: 64,
            criteria: Vec::new(),
            lags: vec![5.0, 10.0, 20.0, 40.0],
            zeta_max: 1e4,
            zeta_points: 41,
        }
    }
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [a, b] => Ok([a, b]),
        _ => Err(format!("expected x,y, got {s:?}")),
    }
}

fn parse_window(s: &str) -> std::result::Result<[f64; 4], String> {
    Rect::parse(s).map(|r| r.to_array()).map_err(|e| e.to_string())
}

/// Flags shared by every subcommand.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Window as x0,y0,x1,y1.
    #[arg(long, global = true, value_parser = parse_window, allow_hyphen_values = true)]
    pub window: Option<[f64; 4]>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub step: Option<f64>,
    #[arg(long, global = true)]
    pub t_end: Option<f64>,
    #[arg(long, global = true)]
    pub n_max: Option<usize>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub smoke: bool,
    /// Exponent c in the kernel tail weight e^{-c/x}.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub kernel_exponent: Option<u8>,
    #[arg(long, global = true)]
    pub quadrature_order: Option<usize>,
    #[arg(long, global = true)]
    pub mc_samples: Option<usize>,
    /// Start point x,y for integrate and chain.
    #[arg(long, global = true, value_parser = parse_pair, allow_hyphen_values = true)]
    pub start: Option<[f64; 2]>,
    /// Configuration JSON-lines file to use instead of sampling.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Integrate in the empty field.
    #[arg(long, global = true)]
    pub empty_field: bool,
    /// Grid resolution per axis for `field`.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Comma-separated criterion ids for `verify`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub criteria: Option<Vec<usize>>,
    /// Comma-separated lags along e1 for `mixing`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub lags: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub zeta_max: Option<f64>,
    #[arg(long, global = true)]
    pub zeta_points: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            bail!("config {} has schema_version {}, expected {SCHEMA_VERSION}", path.display(), cfg.schema_version);
        }
        Ok(cfg)
    }

    pub fn resolve(o: &Overrides) -> Result<Self> {
        let mut c = match &o.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = o.$f.clone() { c.$f = v; })*};
        }
        set!(alpha, seed, window, epsilon, step, t_end, n_max, replicas, out, kernel_exponent, quadrature_order, mc_samples, grid, criteria, lags, zeta_max, zeta_points);
        if o.start.is_some() {
            c.start = o.start;
        }
        if o.input.is_some() {
            c.input = o.input.clone();
        }
        c.smoke |= o.smoke;
        c.empty_field |= o.empty_field;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            bail!("alpha must lie in (1, 2), got {}", self.alpha);
        }
        self.rect()?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            bail!("epsilon must lie in (0, 1), got {}", self.epsilon);
        }
        if !(self.step > 0.0 && self.t_end > 0.0 && self.step.is_finite() && self.t_end.is_finite()) {
            bail!("step and t_end must be positive");
        }
        if self.replicas == 0 || self.mc_samples == 0 || self.grid < 2 || self.zeta_points < 2 {
            bail!("replicas and mc_samples must be positive, grid and zeta_points at least 2");
        }
        if !(1..=2).contains(&self.kernel_exponent) {
            bail!("kernel_exponent must be 1 or 2");
        }
        if !(self.zeta_max > 1.0) {
            bail!("zeta_max must exceed 1");
        }
        channelfield::mollify::MollifierSpec::new(self.quadrature_order)?;
        Ok(())
    }

    pub fn rect(&self) -> Result<Rect> {
        let [x0, y0, x1, y1] = self.window;
        Ok(Rect::nondegenerate(x0, y0, x1, y1)?)
    }

    pub fn variant(&self) -> KernelVariant {
        if self.kernel_exponent == 1 {
            KernelVariant::Strength
        } else {
            KernelVariant::Block
        }
    }

    pub fn start_or(&self, default: Point) -> Point {
        self.start.unwrap_or(default)
    }

    /// Parameters that determine the results: everything but the output directory.
    pub fn reported(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("config is an object").remove("out");
        v
    }

    /// SHA-256 of the canonical JSON form of [`reported`](Self::reported).
    pub fn hash(&self) -> String {
        let json = self.reported().to_string();
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_and_overrides() {
        let c = RunConfig { seed: 9, start: Some([1.0, 2.0]), ..RunConfig::default() };
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
        let o = Overrides { alpha: Some(1.3), smoke: true, ..Overrides::default() };
        let r = RunConfig::resolve(&o).unwrap();
        assert_eq!(r.alpha, 1.3);
        assert!(r.smoke);
        assert_ne!(r.hash(), RunConfig::default().hash());
        let moved = RunConfig { out: PathBuf::from("elsewhere"), ..r.clone() };
        assert_eq!(moved.hash(), r.hash());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::resolve(&Overrides { alpha: Some(2.5), ..Overrides::default() }).is_err());
        assert!(RunConfig::resolve(&Overrides { window: Some([0.0, 0.0, 0.0, 1.0]), ..Overrides::default() }).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
        assert!(parse_pair("1,2,3").is_err());
        assert_eq!(parse_window("-1,-2,3,4").unwrap(), [-1.0, -2.0, 3.0, 4.0]);
    }
}
