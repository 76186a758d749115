//! Pipeline configuration: built-in defaults, overridable by a plain-text
//! `key = value` file with dotted sections and then by command-line flags.
//!
//! ```text
//! # comment
//! phantom.n_fr = 48
//! kernel.kind = gaussian_modulus
//! recon.lambda2 = auto
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::acquisition::PhantomSpec;
use crate::error::{Error, Result};
use crate::kernels::KernelKind;
use crate::recon::{InitStrategy, ModelConfig, ReconConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhantomConfig {
    pub n_p: usize,
    pub n_f: usize,
    pub n_fr: usize,
    pub n_cycles: usize,
    pub seed: u64,
    pub noise_std: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            n_p: 64,
            n_f: 64,
            n_fr: 48,
            n_cycles: 4,
            seed: 7,
            noise_std: 0.0,
        }
    }
}

impl PhantomConfig {
    pub fn spec(&self) -> PhantomSpec {
        PhantomSpec {
            noise_std: self.noise_std,
            ..PhantomSpec::new(self.n_p, self.n_f, self.n_fr, self.n_cycles, self.seed)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskConfig {
    /// Target acceleration rate, `> 1`.
    pub rate: f64,
    /// Number of central navigator lines.
    pub nu: usize,
    pub seed: u64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            rate: 8.0,
            nu: 4,
            seed: 7,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PipelineConfig {
    pub phantom: PhantomConfig,
    pub mask: MaskConfig,
    pub model: ModelConfig,
    pub recon: ReconConfig,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{value}`")))
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn opt_text<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "auto".to_string(), |v| v.to_string())
}

impl PipelineConfig {
    /// Every recognized key, in the order written by [`Self::to_text`].
    pub const KEYS: &'static [&'static str] = &[
        "phantom.n_p",
        "phantom.n_f",
        "phantom.n_fr",
        "phantom.n_cycles",
        "phantom.seed",
        "phantom.noise_std",
        "mask.rate",
        "mask.nu",
        "mask.seed",
        "kernel.kind",
        "kernel.gamma",
        "kernel.c",
        "kernel.r",
        "model.n_l",
        "model.d",
        "model.lambda_w",
        "model.weight_tol",
        "model.weight_max_iter",
        "model.init",
        "recon.lambda1",
        "recon.lambda2",
        "recon.lambda3",
        "recon.c_d",
        "recon.tau_d",
        "recon.tau_b",
        "recon.zeta",
        "recon.gamma0",
        "recon.outer_max_iter",
        "recon.inner_max_iter",
        "recon.outer_tol",
        "recon.inner_tol",
    ];

    /// Sets one key. Optional values accept `auto`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let (p, m, k, r) = (
            &mut self.phantom,
            &mut self.mask,
            &mut self.model,
            &mut self.recon,
        );
        match key {
            "phantom.n_p" => p.n_p = parse(key, v)?,
            "phantom.n_f" => p.n_f = parse(key, v)?,
            "phantom.n_fr" => p.n_fr = parse(key, v)?,
            "phantom.n_cycles" => p.n_cycles = parse(key, v)?,
            "phantom.seed" => p.seed = parse(key, v)?,
            "phantom.noise_std" => p.noise_std = parse(key, v)?,
            "mask.rate" => m.rate = parse(key, v)?,
            "mask.nu" => m.nu = parse(key, v)?,
            "mask.seed" => m.seed = parse(key, v)?,
            "kernel.kind" => k.kernel = v.parse::<KernelKind>()?,
            "kernel.gamma" => k.kernel_gamma = parse_opt(key, v)?,
            "kernel.c" => k.kernel_c = parse(key, v)?,
            "kernel.r" => k.kernel_r = parse(key, v)?,
            "model.n_l" => k.n_l = parse_opt(key, v)?,
            "model.d" => k.d = parse_opt(key, v)?,
            "model.lambda_w" => k.lambda_w = parse_opt(key, v)?,
            "model.weight_tol" => k.weight_tol = parse(key, v)?,
            "model.weight_max_iter" => k.weight_max_iter = parse(key, v)?,
            "model.init" => k.init = v.parse::<InitStrategy>()?,
            "recon.lambda1" => r.lambda1 = parse(key, v)?,
            "recon.lambda2" => r.lambda2 = parse_opt(key, v)?,
            "recon.lambda3" => r.lambda3 = parse_opt(key, v)?,
            "recon.c_d" => r.c_d = parse_opt(key, v)?,
            "recon.tau_d" => r.tau_d = parse(key, v)?,
            "recon.tau_b" => r.tau_b = parse(key, v)?,
            "recon.zeta" => r.zeta = parse(key, v)?,
            "recon.gamma0" => r.gamma0 = parse(key, v)?,
            "recon.outer_max_iter" => r.outer_max_iter = parse(key, v)?,
            "recon.inner_max_iter" => r.inner_max_iter = parse(key, v)?,
            "recon.outer_tol" => r.outer_tol = parse(key, v)?,
            "recon.inner_tol" => r.inner_tol = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment. `origin` names the
    /// source in error messages.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{origin}:{}: expected `key = value`", n + 1))
            })?;
            self.set(key.trim(), value)
                .map_err(|e| Error::Config(format!("{origin}:{}: {}", n + 1, strip_prefix(e))))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "override `{assignment}` is not of the form key=value"
            ))
        })?;
        self.set(key.trim(), value)
    }

    /// Checks everything that can be checked before data exist.
    pub fn validate(&self) -> Result<()> {
        let p = &self.phantom;
        for (key, v) in [
            ("phantom.n_p", p.n_p),
            ("phantom.n_f", p.n_f),
            ("phantom.n_fr", p.n_fr),
            ("phantom.n_cycles", p.n_cycles),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("key `{key}`: must be positive")));
            }
        }
        if !(p.noise_std >= 0.0 && p.noise_std.is_finite()) {
            return Err(Error::Config(
                "key `phantom.noise_std`: must be non-negative".into(),
            ));
        }
        if !(self.mask.rate > 1.0 && self.mask.rate.is_finite()) {
            return Err(Error::Config(format!(
                "key `mask.rate`: must exceed 1, got {}",
                self.mask.rate
            )));
        }
        if self.mask.nu == 0 || self.mask.nu > p.n_p {
            return Err(Error::Config(format!(
                "key `mask.nu`: must lie in 1..={}, got {}",
                p.n_p, self.mask.nu
            )));
        }
        self.recon
            .validate()
            .map_err(|e| Error::Config(strip_prefix(e)))?;
        self.model
            .validate(p.n_fr)
            .map_err(|e| Error::Config(strip_prefix(e)))
    }

    /// Canonical text form; reading it back yields the same configuration.
    pub fn to_text(&self) -> String {
        let (p, m, k, r) = (&self.phantom, &self.mask, &self.model, &self.recon);
        let values = [
            p.n_p.to_string(),
            p.n_f.to_string(),
            p.n_fr.to_string(),
            p.n_cycles.to_string(),
            p.seed.to_string(),
            p.noise_std.to_string(),
            m.rate.to_string(),
            m.nu.to_string(),
            m.seed.to_string(),
            k.kernel.to_string(),
            opt_text(k.kernel_gamma),
            k.kernel_c.to_string(),
            k.kernel_r.to_string(),
            opt_text(k.n_l),
            opt_text(k.d),
            opt_text(k.lambda_w),
            k.weight_tol.to_string(),
            k.weight_max_iter.to_string(),
            k.init.to_string(),
            r.lambda1.to_string(),
            opt_text(r.lambda2),
            opt_text(r.lambda3),
            opt_text(r.c_d),
            r.tau_d.to_string(),
            r.tau_b.to_string(),
            r.zeta.to_string(),
            r.gamma0.to_string(),
            r.outer_max_iter.to_string(),
            r.inner_max_iter.to_string(),
            r.outer_tol.to_string(),
            r.inner_tol.to_string(),
        ];
        let mut out = String::new();
        for (key, value) in Self::KEYS.iter().zip(values) {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}

/// Error text without the variant prefix, for re-wrapping.
fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(msg) => msg,
        Error::Parameter { name, reason } => format!("key `{name}`: {reason}"),
        other => other.to_string(),
    }
}
