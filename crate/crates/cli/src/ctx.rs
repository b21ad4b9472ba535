use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Context as _;
use gaia_core::config::KeyValues;
use gaia_core::evaluator::{CachedEvaluator, EvalCache, Evaluator, ExecEvaluator, SimConfig, Simulator};

use crate::errors::UsageError;

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_OUT: &str = "gaia-out";

pub type DynEvaluator = Box<dyn Evaluator + Send>;

pub struct Ctx {
    pub seed: u64,
    pub out: PathBuf,
    pub config: KeyValues,
    pub cache: Option<PathBuf>,
}

impl Ctx {
    pub fn new(seed: Option<u64>, out: Option<PathBuf>, config: Option<&Path>, cache: Option<PathBuf>) -> anyhow::Result<Self> {
        let config = match config {
            Some(p) => KeyValues::load(p)?,
            None => KeyValues::default(),
        };
        let seed = match seed {
            Some(s) => s,
            None => config.parse_value("seed")?.unwrap_or(DEFAULT_SEED),
        };
        let out = out
            .or_else(|| config.get("out").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        let cache = cache
            .or_else(|| std::env::var_os("GAIA_CACHE").map(PathBuf::from))
            .or_else(|| config.get("cache").map(PathBuf::from))
            .map(|c| if c.is_relative() { out.join(c) } else { c });
        Ok(Self { seed, out, config, cache })
    }

    /// Flag value, else `key` from the config file, else `default`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str, default: T) -> anyhow::Result<T>
    where
        T: FromStr,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        Ok(self.config.parse_value(key)?.unwrap_or(default))
    }

    pub fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> anyhow::Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => Ok(self.config.parse_value(key)?),
        }
    }

    /// Writes `name` under the output directory and returns its path.
    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// `sim` or `exec:<command>`, wrapped in the cache when one is set.
    pub fn evaluator(&self, spec: &str, sim: SimConfig, processes: usize) -> anyhow::Result<DynEvaluator> {
        let inner: DynEvaluator = if spec == "sim" {
            Box::new(Simulator::new(sim, self.seed))
        } else if let Some(command) = spec.strip_prefix("exec:") {
            Box::new(ExecEvaluator::spawn(command, processes)?)
        } else {
            return Err(usage(format!("--evaluator must be sim or exec:<command>, got {spec:?}")));
        };
        Ok(match &self.cache {
            Some(path) => Box::new(CachedEvaluator::new(inner, EvalCache::open(path)?)),
            None => inner,
        })
    }

    /// Simulator constants from the `[sim]` section.
    pub fn sim_config(&self) -> anyhow::Result<SimConfig> {
        let mut c = SimConfig::default();
        let kv = &self.config;
        let set = |field: &mut f64, key: &str| -> anyhow::Result<()> {
            if let Some(v) = kv.parse_value(key)? {
                *field = v;
            }
            Ok(())
        };
        set(&mut c.beta0, "sim.beta0")?;
        set(&mut c.beta1, "sim.beta1")?;
        set(&mut c.beta2, "sim.beta2")?;
        set(&mut c.rho_star, "sim.rho_star")?;
        set(&mut c.sigma_rho, "sim.sigma_rho")?;
        set(&mut c.sigma_full, "sim.sigma_full")?;
        set(&mut c.sigma_fast, "sim.sigma_fast")?;
        set(&mut c.sigma_direct, "sim.sigma_direct")?;
        set(&mut c.direct_bias, "sim.direct_bias")?;
        set(&mut c.flops_ref, "sim.flops_ref")?;
        Ok(c)
    }
}

pub fn usage(msg: impl Display) -> anyhow::Error {
    UsageError(msg.to_string()).into()
}

pub fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// `lo,hi` pair.
pub fn pair<T: FromStr>(raw: &str, what: &str) -> anyhow::Result<(T, T)> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    match parts[..] {
        [a, b] => match (a.parse(), b.parse()) {
            (Ok(a), Ok(b)) => Ok((a, b)),
            _ => Err(usage(format!("{what}: cannot parse {raw:?}"))),
        },
        _ => Err(usage(format!("{what}: expected lo,hi, got {raw:?}"))),
    }
}
