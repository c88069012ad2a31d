use clap::Args;
use esn2::{CubatureControls, DpParams};

use crate::CliError;

const FLAGS: [&str; 8] = ["xi1", "xi2", "omega11", "omega12", "omega22", "alpha1", "alpha2", "tau"];

/// Parameter flags: a θ-ordered tuple plus per-component overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct DpArgs {
    /// Comma-separated (xi1,xi2,omega11,omega12,omega22,alpha1,alpha2,tau)
    #[arg(long, allow_hyphen_values = true)]
    pub dp: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub xi1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub xi2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub omega11: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub omega12: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub omega22: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<f64>,
}

impl DpArgs {
    fn named(&self) -> [Option<f64>; 8] {
        [self.xi1, self.xi2, self.omega11, self.omega12, self.omega22, self.alpha1, self.alpha2, self.tau]
    }

    /// Merged components; `None` where neither source gave a value.
    pub fn components(&self) -> Result<[Option<f64>; 8], CliError> {
        let mut out = [None; 8];
        if let Some(text) = &self.dp {
            let parts: Vec<&str> = text.split(',').map(str::trim).collect();
            if parts.len() != 8 {
                return Err(CliError::usage(format!("--dp needs 8 comma-separated values, got {}", parts.len())));
            }
            for (k, p) in parts.iter().enumerate() {
                let v: f64 =
                    p.parse().map_err(|_| CliError::usage(format!("--dp entry {} ('{p}') is not a number", k + 1)))?;
                out[k] = Some(v);
            }
        }
        for (k, named) in self.named().into_iter().enumerate() {
            let Some(v) = named else { continue };
            let flag = FLAGS[k];
            match out[k] {
                Some(prev) if prev.to_bits() != v.to_bits() => {
                    return Err(CliError::usage(format!("--{flag} {v} conflicts with --dp value {prev}")));
                }
                _ => out[k] = Some(v),
            }
        }
        for (k, v) in out.iter().enumerate() {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(CliError::usage(format!("--{} must be finite, got {v}", FLAGS[k])));
                }
            }
        }
        Ok(out)
    }

    /// Fully specified, validated parameters.
    pub fn resolve(&self) -> Result<DpParams, CliError> {
        self.resolve_with(|_| None)
    }

    /// Like [`resolve`](Self::resolve), filling missing components from `fallback`.
    pub fn resolve_with(&self, fallback: impl Fn(usize) -> Option<f64>) -> Result<DpParams, CliError> {
        let parts = self.components()?;
        let mut theta = [0.0; 8];
        for k in 0..8 {
            theta[k] = parts[k]
                .or_else(|| fallback(k))
                .ok_or_else(|| CliError::usage(format!("missing parameter: pass --dp or --{}", FLAGS[k])))?;
        }
        DpParams::from_array(theta).map_err(|e| CliError::usage(format!("invalid parameters: {e}")))
    }
}

#[derive(Debug, Clone, Args)]
pub struct CubatureArgs {
    #[arg(long, default_value_t = CubatureControls::default().rel_tol)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = CubatureControls::default().abs_tol)]
    pub abs_tol: f64,
    #[arg(long, default_value_t = CubatureControls::default().max_evals)]
    pub max_evals: usize,
}

impl CubatureArgs {
    pub fn controls(&self) -> Result<CubatureControls, CliError> {
        let c = CubatureControls { rel_tol: self.rel_tol, abs_tol: self.abs_tol, max_evals: self.max_evals };
        c.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(c)
    }
}
