use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use cliffbif::bifurcation::ContinuationConfig;
use cliffbif::flow::FlowConfig;
use cliffbif::lift::{DEFAULT_NPSI, DEFAULT_NT_PER_WINDING};
use cliffbif::ode::OdeConfig;
use cliffbif::profile::DEFAULT_QUAD_TOL;
use cliffbif::shooting::{RootOptions, ROOT_F_TOL, ROOT_X_TOL};

#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

macro_rules! usage {
    ($($arg:tt)*) => {
        anyhow::Error::new($crate::config::UsageError(format!($($arg)*)))
    };
}
pub(crate) use usage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Obj,
}

/// Flags shared by every subcommand. Each one may also be set in the config file
/// under the same name with dashes replaced by underscores.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Ellipsoid semi-axis a
    #[arg(long, global = true)]
    pub a: Option<f64>,
    /// Shooting parameter s in (-1, 1)
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub s: Option<f64>,
    #[arg(long, global = true)]
    pub j: Option<u32>,
    /// Number of diameter crossings
    #[arg(long, global = true)]
    pub k: Option<u32>,
    #[arg(long, global = true)]
    pub kmax: Option<u32>,
    #[arg(long, global = true)]
    pub ode_rtol: Option<f64>,
    #[arg(long, global = true)]
    pub ode_atol: Option<f64>,
    #[arg(long, global = true)]
    pub ode_max_step: Option<f64>,
    #[arg(long, global = true)]
    pub root_tol: Option<f64>,
    #[arg(long, global = true)]
    pub quad_tol: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub a_min: Option<f64>,
    #[arg(long, global = true)]
    pub a_max: Option<f64>,
    #[arg(long, global = true)]
    pub ds0: Option<f64>,
    #[arg(long, global = true)]
    pub ds_max: Option<f64>,
    #[arg(long, global = true)]
    pub max_points: Option<usize>,
    /// Rows of trajectory output
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Grid points for the sign-change scan of `solve` and `lift --j`
    #[arg(long, global = true)]
    pub scan: Option<usize>,
    #[arg(long, global = true)]
    pub n_t: Option<usize>,
    #[arg(long, global = true)]
    pub n_psi: Option<usize>,
    /// Coordinate dropped for the OBJ projection: 0 Re z, 1 Im z, 2 Re w, 3 Im w
    #[arg(long, global = true)]
    pub drop_axis: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Settings {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| usage!("invalid config {}: {e}", path.display()))
    }

    /// Fields set here win over `other`.
    pub fn or(self, other: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: self.$f.or(other.$f)),* } };
        }
        pick!(
            a,
            s,
            j,
            k,
            kmax,
            ode_rtol,
            ode_atol,
            ode_max_step,
            root_tol,
            quad_tol,
            out,
            format,
            threads,
            seed,
            a_min,
            a_max,
            ds0,
            ds_max,
            max_points,
            samples,
            scan,
            n_t,
            n_psi,
            drop_axis,
            config
        )
    }
}

/// Fully resolved settings, echoed into every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub a: Option<f64>,
    pub s: Option<f64>,
    pub j: Option<u32>,
    pub k: Option<u32>,
    pub kmax: u32,
    pub ode_rtol: f64,
    pub ode_atol: f64,
    pub ode_max_step: f64,
    pub root_tol: f64,
    pub quad_tol: f64,
    pub out: PathBuf,
    pub format: Option<Format>,
    pub threads: usize,
    pub seed: u64,
    pub a_min: Option<f64>,
    pub a_max: f64,
    pub ds0: f64,
    pub ds_max: f64,
    pub max_points: usize,
    pub samples: usize,
    pub scan: usize,
    pub n_t: usize,
    pub n_psi: usize,
    pub drop_axis: usize,
}

fn positive(name: &str, v: f64) -> anyhow::Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(usage!("--{name} must be positive and finite, got {v}"))
    }
}

impl RunConfig {
    pub fn resolve(command: &str, cli: Settings) -> anyhow::Result<Self> {
        let file = match &cli.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        let s = cli.or(file);
        let ode = OdeConfig::default();
        let cc = ContinuationConfig::default();
        let cfg = RunConfig {
            command: command.to_string(),
            a: s.a.map(|v| positive("a", v)).transpose()?,
            s: s.s
                .map(|v| {
                    if v.is_finite() && v.abs() < 1.0 {
                        Ok(v)
                    } else {
                        Err(usage!("--s must lie in (-1, 1), got {v}"))
                    }
                })
                .transpose()?,
            j: s.j,
            k: s.k
                .map(|k| {
                    if k == 0 {
                        Err(usage!("--k must be at least 1"))
                    } else {
                        Ok(k)
                    }
                })
                .transpose()?,
            kmax: s.kmax.unwrap_or(3),
            ode_rtol: positive("ode-rtol", s.ode_rtol.unwrap_or(ode.rtol))?,
            ode_atol: positive("ode-atol", s.ode_atol.unwrap_or(ode.atol))?,
            ode_max_step: positive("ode-max-step", s.ode_max_step.unwrap_or(ode.max_step))?,
            root_tol: positive("root-tol", s.root_tol.unwrap_or(ROOT_F_TOL))?,
            quad_tol: positive("quad-tol", s.quad_tol.unwrap_or(DEFAULT_QUAD_TOL))?,
            out: s.out.unwrap_or_else(|| PathBuf::from("out")),
            format: s.format,
            threads: s.threads.unwrap_or(1).max(1),
            seed: s.seed.unwrap_or(20_240_601),
            a_min: s.a_min.map(|v| positive("a-min", v)).transpose()?,
            a_max: positive("a-max", s.a_max.unwrap_or(cc.a_max))?,
            ds0: positive("ds0", s.ds0.unwrap_or(cc.ds0))?,
            ds_max: positive("ds-max", s.ds_max.unwrap_or(cc.ds_max))?,
            max_points: s.max_points.unwrap_or(cc.max_points),
            samples: s.samples.unwrap_or(1000).max(1),
            scan: s.scan.unwrap_or(400).max(2),
            n_t: s.n_t.unwrap_or(DEFAULT_NT_PER_WINDING).max(3),
            n_psi: s.n_psi.unwrap_or(DEFAULT_NPSI).max(3),
            drop_axis: s.drop_axis.unwrap_or(3),
        };
        if cfg.drop_axis > 3 {
            return Err(usage!("--drop-axis must be 0, 1, 2 or 3"));
        }
        if cfg.kmax == 0 {
            return Err(usage!("--kmax must be at least 1"));
        }
        if let Some(lo) = cfg.a_min {
            if lo >= cfg.a_max {
                return Err(usage!("empty a-window [{lo}, {}]", cfg.a_max));
            }
        }
        Ok(cfg)
    }

    pub fn flow(&self) -> FlowConfig {
        FlowConfig {
            ode: OdeConfig {
                rtol: self.ode_rtol,
                atol: self.ode_atol,
                max_step: self.ode_max_step,
                ..OdeConfig::default()
            },
            ..FlowConfig::default()
        }
    }

    pub fn root_options(&self) -> RootOptions {
        RootOptions {
            f_tol: self.root_tol,
            x_tol: ROOT_X_TOL,
            ..RootOptions::default()
        }
    }

    /// Continuation window for a branch issuing at `a_jk`: unless set, the
    /// lower end is `0.25`, or `a_jk / 2` for instants below `0.5`.
    pub fn continuation(&self, a_jk: f64) -> ContinuationConfig {
        ContinuationConfig {
            ds0: self.ds0,
            ds_max: self.ds_max,
            a_min: self.a_min.unwrap_or(0.25f64.min(0.5 * a_jk)),
            a_max: self.a_max,
            max_points: self.max_points,
            f_tol: self.root_tol,
            quad_tol: self.quad_tol,
            flow: self.flow(),
            ..ContinuationConfig::default()
        }
    }

    pub fn require_a(&self) -> anyhow::Result<f64> {
        self.a
            .ok_or_else(|| usage!("--a is required for `{}`", self.command))
    }

    pub fn require_k(&self) -> anyhow::Result<u32> {
        self.k
            .ok_or_else(|| usage!("--k is required for `{}`", self.command))
    }

    pub fn require_j(&self) -> anyhow::Result<u32> {
        self.j
            .ok_or_else(|| usage!("--j is required for `{}`", self.command))
    }

    pub fn wants(&self, f: Format) -> bool {
        self.format.is_none_or(|g| g == f)
    }

    /// Comment line carrying the resolved configuration, for CSV and OBJ headers.
    pub fn header(&self) -> String {
        format!(
            "# config: {}\n",
            serde_json::to_string(self).expect("config serializes")
        )
    }
}
