//! JSON experiment configuration consumed by most subcommands.

use momentlyap::dynamics::SystemSpec;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    pub run: RunConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub t_max: usize,
    pub runs: usize,
    /// Master seed; mandatory so every artifact is reproducible.
    pub seed: u64,
    #[serde(default = "default_p_list")]
    pub p_list: Vec<u32>,
    pub fit_window: (usize, usize),
}

fn default_p_list() -> Vec<u32> {
    vec![1, 2]
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Subset of {mc, exact, perturbation, iteration, large_noise,
    /// critical} to include in reports; everything when absent.
    #[serde(default)]
    pub methods: Option<Vec<String>>,
    /// Iteration order for the transfer-matrix method.
    #[serde(default = "default_r")]
    pub r: usize,
    /// Explicit lambda grid for the phase subcommand.
    #[serde(default)]
    pub lambda_grid: Option<Vec<f64>>,
}

fn default_r() -> usize {
    6
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub directory: Option<String>,
    /// Any of "csv", "json"; both when empty.
    #[serde(default)]
    pub formats: Vec<String>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| format!("config parse error: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.system.validate().map_err(|e| format!("invalid system: {e}"))?;
        let (lo, hi) = self.run.fit_window;
        if hi > self.run.t_max {
            return Err(format!(
                "fit window end {hi} exceeds t_max {}",
                self.run.t_max
            ));
        }
        if lo >= hi {
            return Err(format!("fit window [{lo},{hi}] is empty"));
        }
        if self.run.runs == 0 {
            return Err("runs must be >= 1".into());
        }
        if self.run.p_list.is_empty() {
            return Err("p_list must be nonempty".into());
        }
        if let Some(methods) = &self.analysis.methods {
            const KNOWN: [&str; 6] =
                ["mc", "exact", "perturbation", "iteration", "large_noise", "critical"];
            for m in methods {
                if !KNOWN.contains(&m.as_str()) {
                    return Err(format!("unknown analysis method {m:?}"));
                }
            }
        }
        for f in &self.output.formats {
            if f != "csv" && f != "json" {
                return Err(format!("unknown output format {f:?}"));
            }
        }
        Ok(())
    }

    pub fn wants_format(&self, fmt: &str) -> bool {
        self.output.formats.is_empty() || self.output.formats.iter().any(|f| f == fmt)
    }

    pub fn wants_method(&self, method: &str) -> bool {
        match &self.analysis.methods {
            None => true,
            Some(list) => list.iter().any(|m| m == method),
        }
    }
}
