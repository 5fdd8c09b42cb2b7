//! Implementations of the CLI verbs. Each writes its artifacts into an
//! output directory and returns a summary for the caller to print.

pub mod analyze;
pub mod eval;
pub mod filters;
pub mod train;

use std::path::Path;

use modfront_core::learn::{FrontEndConfig, ParamVector};

use crate::checkpoint::Checkpoint;
use crate::config::Config;
use crate::error::{CliError, CliResult};

/// Parameters plus the configuration they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: Config,
    pub class_names: Vec<String>,
    pub params: ParamVector,
}

impl Model {
    /// Freshly initialized parameters, one class per synthetic rate.
    pub fn fresh(config: Config) -> CliResult<Self> {
        let class_names: Vec<String> = config.class_rates.iter().map(|r| format!("{r}hz")).collect();
        let params = config.front_end(class_names.len()).init_params(config.init_seed)?;
        Ok(Self {
            config,
            class_names,
            params,
        })
    }

    /// Loads trained parameters. When `expected` is given its digest must
    /// match the one the checkpoint was trained under.
    pub fn from_checkpoint(path: &Path, expected: Option<&Config>) -> CliResult<Self> {
        let ck = Checkpoint::load(path)?;
        if let Some(cfg) = expected {
            let (have, want) = (ck.config.digest(), cfg.digest());
            if have != want {
                return Err(CliError::Config(format!(
                    "{}: checkpoint config digest {have} does not match supplied config digest {want}",
                    path.display()
                )));
            }
        }
        Ok(Self {
            config: ck.config,
            class_names: ck.class_names,
            params: ck.state.params,
        })
    }

    pub fn front_end(&self) -> FrontEndConfig {
        self.config.front_end(self.class_names.len())
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Formats an optional metric, leaving undefined values empty.
pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
