use std::path::Path;

use anyhow::{bail, Context, Result};
use ktorus::lattice::Lattice;
use ktorus::metric::{ConformalFactor, FourierMode};
use ktorus::pipeline::PipelineOptions;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub e1: [f64; 2],
    pub e2: [f64; 2],
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub k: [i32; 2],
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Optional overrides of the numerical tolerances.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Geodesic and isoline integration.
    pub ode_tol: Option<f64>,
    /// Closure accepted for a closed geodesic.
    pub tol_close: Option<f64>,
    /// Critical zone `tol_crit_rel · max ‖∇K‖` around critical points of `K`.
    pub tol_crit_rel: Option<f64>,
    /// Relative tolerance of the iterative linear solvers.
    pub solver_tol: Option<f64>,
    /// Singular values below this count as kernel.
    pub kernel_threshold: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub lattice: LatticeConfig,
    /// Half-space listing is enough; conjugate partners are filled in.
    pub mu_fourier: Vec<ModeConfig>,
    pub grid_n: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Off-diagonal metric coefficient. Only conformal metrics are
    /// supported, so anything but zero is rejected.
    #[serde(default, skip_serializing)]
    pub g12: Option<f64>,
}

/// A validated configuration.
pub struct Metric {
    pub cf: ConformalFactor,
    pub grid_n: usize,
    pub tolerances: Tolerances,
}

impl MetricConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("malformed config {}", path.display()))
    }

    pub fn build(&self) -> Result<Metric> {
        if let Some(g) = self.g12 {
            if g != 0.0 {
                bail!("field `g12`: only conformal metrics e^(2mu)(dx^2 + dy^2) are supported, got g12 = {g}");
            }
        }
        let lattice = Lattice::new(self.lattice.e1, self.lattice.e2).context("field `lattice`")?;
        for (i, m) in self.mu_fourier.iter().enumerate() {
            if !(m.re.is_finite() && m.im.is_finite()) {
                bail!("field `mu_fourier[{i}]`: coefficients must be finite");
            }
        }
        let modes = self.mu_fourier.iter().map(|m| FourierMode {
            k: (m.k[0], m.k[1]),
            amp: Complex64::new(m.re, m.im),
        });
        let cf = ConformalFactor::with_hermitian_closure(lattice, modes).context("field `mu_fourier`")?;
        let min_n = cf.min_grid_n();
        let grid_n = match self.grid_n {
            Some(n) if n < min_n => {
                eprintln!("warning: grid_n = {n} is below 4·max_degree; raised to {min_n}");
                min_n
            }
            Some(n) => n,
            None => cf.default_grid_n(),
        };
        let t = &self.tolerances;
        for (name, v) in [
            ("ode_tol", t.ode_tol),
            ("tol_close", t.tol_close),
            ("tol_crit_rel", t.tol_crit_rel),
            ("solver_tol", t.solver_tol),
            ("kernel_threshold", t.kernel_threshold),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    bail!("field `tolerances.{name}`: must be positive, got {v}");
                }
            }
        }
        Ok(Metric {
            cf,
            grid_n,
            tolerances: t.clone(),
        })
    }
}

impl Metric {
    pub fn pipeline_options(&self) -> PipelineOptions {
        let mut o = PipelineOptions::for_metric(&self.cf);
        o.grid_n = self.grid_n;
        let t = &self.tolerances;
        if let Some(v) = t.ode_tol {
            o.closed.ode_tol = v;
            o.isoline.ode_tol = v;
        }
        if let Some(v) = t.tol_close {
            o.closed.tol_close = v;
        }
        if let Some(v) = t.tol_crit_rel {
            o.isoline.tol_crit_rel = v;
        }
        if let Some(v) = t.solver_tol {
            o.potential.atol = v;
            o.potential.btol = v;
            o.fourth.tol = v;
        }
        o
    }

    pub fn kernel_threshold(&self) -> f64 {
        self.tolerances.kernel_threshold.unwrap_or(1e-10)
    }
}

/// Serializes a metric back to a config, listing the half-space modes.
#[cfg(test)]
pub fn config_of(cf: &ConformalFactor, grid_n: usize) -> MetricConfig {
    let lat = cf.lattice();
    let mu_fourier = cf
        .modes()
        .into_iter()
        .filter(|m| m.k.0 > 0 || (m.k.0 == 0 && m.k.1 >= 0))
        .map(|m| ModeConfig {
            k: [m.k.0, m.k.1],
            re: m.amp.re,
            im: m.amp.im,
        })
        .collect();
    MetricConfig {
        lattice: LatticeConfig {
            e1: lat.e1(),
            e2: lat.e2(),
        },
        mu_fourier,
        grid_n: Some(grid_n),
        tolerances: Tolerances::default(),
        g12: None,
    }
}
