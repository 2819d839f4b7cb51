//! Seeded data-generating process for cointegrating systems with breaks.
//!
//! ```text
//! Y_t = A_t X_t + delta_t t + mu + B_t w_t + u_t
//! X_t = X_{t-1} + xi_t
//! w_t = Phi w_{t-1} + e_t
//! ```
//!
//! Regime `k` uses `A_k = A_0 + k c 2E`, `B_k = B_0 + k c 2E` and
//! `delta_k = delta_0 + k c 2 1`, with `A_0 = B_0 = 2E`, `delta_0 = 2 1` and
//! `E` the selector with a one at `(i, i mod cols)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BreakSet, TimeSeriesPanel};

/// Model family being simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Integrated regressors, trend, intercept and stationary regressors.
    Full,
    /// No integrated regressors and no trend.
    Sur,
    /// Full model with a third equation and the same break magnitudes.
    Q3,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Self::Full),
            "sur" => Ok(Self::Sur),
            "q3" => Ok(Self::Q3),
            other => Err(Error::InvalidConfig(format!("unknown variant '{other}'"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::Sur => "sur",
            Self::Q3 => "q3",
        })
    }
}

/// Whether the DGP coefficients multiply the raw regressors or the
/// normalized ones `(T^{-1/2} X_t, t/T, 1, w_t)` used by the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientScale {
    Normalized,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub t_len: usize,
    pub q: usize,
    pub r: usize,
    pub s: usize,
    pub break_fractions: Vec<f64>,
    /// Break magnitude factor.
    pub c: f64,
    pub variant: Variant,
    pub sigma_u: f64,
    pub sigma_xi: f64,
    pub sigma_e: f64,
    /// `s x s` VAR(1) matrix, row-major.
    pub phi: Vec<f64>,
    pub mu: Vec<f64>,
    pub coefficient_scale: CoefficientScale,
    pub burn_in: usize,
    pub seed: u64,
}

impl DgpConfig {
    /// Full two-equation model with the default magnitudes.
    pub fn new(t_len: usize, break_fractions: Vec<f64>, seed: u64) -> Self {
        let (q, s) = (2, 2);
        Self {
            t_len,
            q,
            r: 2,
            s,
            break_fractions,
            c: 1.0,
            variant: Variant::Full,
            sigma_u: 1.0,
            sigma_xi: 1.0,
            sigma_e: 1.0,
            phi: diag(s, 0.5),
            mu: vec![2.0; q],
            coefficient_scale: CoefficientScale::Normalized,
            burn_in: 100,
            seed,
        }
    }

    /// Switches to a model variant, adjusting the dimensions it implies.
    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        match variant {
            Variant::Full => {}
            Variant::Sur => self.r = 0,
            Variant::Q3 => {
                self.q = 3;
                self.mu = vec![self.mu.first().copied().unwrap_or(2.0); 3];
            }
        }
        self
    }

    pub fn noiseless(mut self) -> Self {
        self.sigma_u = 0.0;
        self
    }

    pub fn includes_trend(&self) -> bool {
        self.variant != Variant::Sur
    }

    /// 1-based break indices `round(tau T)`.
    pub fn break_indices(&self) -> Vec<usize> {
        self.break_fractions
            .iter()
            .map(|&f| (f * self.t_len as f64).round() as usize)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.t_len < 2 || self.q == 0 {
            return bad("T must be at least 2 and q at least 1".into());
        }
        if self.variant == Variant::Q3 && self.q != 3 {
            return bad("q3 variant requires q = 3".into());
        }
        if self.variant == Variant::Sur && self.r != 0 {
            return bad("SUR variant has no integrated regressors".into());
        }
        for (name, v) in [
            ("sigma_u", self.sigma_u),
            ("sigma_xi", self.sigma_xi),
            ("sigma_e", self.sigma_e),
            ("c", self.c),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        if self.mu.len() != self.q {
            return bad(format!("mu has {} entries, expected {}", self.mu.len(), self.q));
        }
        if self.phi.len() != self.s * self.s {
            return bad(format!("phi has {} entries, expected {}", self.phi.len(), self.s * self.s));
        }
        if self.s > 0 {
            let phi = DMatrix::from_row_slice(self.s, self.s, &self.phi);
            let radius = phi
                .complex_eigenvalues()
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            if radius >= 1.0 {
                return bad(format!("phi has spectral radius {radius} >= 1"));
            }
        }
        let mut prev = 0.0;
        for &f in &self.break_fractions {
            if !(f > prev && f < 1.0) {
                return bad(format!("break fractions must increase inside (0, 1): {:?}", self.break_fractions));
            }
            prev = f;
        }
        BreakSet::new(self.break_indices(), self.t_len).map(|_| ())
    }
}

fn diag(n: usize, v: f64) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = v;
    }
    m
}

/// Ground truth accompanying a simulated panel.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedTruth {
    pub breaks: BreakSet,
    /// One `q x p` matrix per regime in estimator row order
    /// (integrated, trend, intercept, stationary).
    pub coefficients: Vec<DMatrix<f64>>,
    /// Whether `coefficients` refer to the normalized regressors.
    pub normalized: bool,
}

/// Coefficients of regime `k` in estimator row order.
pub fn regime_coefficients(config: &DgpConfig, k: usize) -> DMatrix<f64> {
    let (q, r, s) = (config.q, config.r, config.s);
    let trend = config.includes_trend();
    let p = r + usize::from(trend) + 1 + s;
    let level = 2.0 + 2.0 * config.c * k as f64;
    let mut coef = DMatrix::zeros(q, p);
    for i in 0..q {
        if r > 0 && config.variant != Variant::Sur {
            coef[(i, i % r)] = level;
        }
        let mut col = r;
        if trend {
            coef[(i, col)] = level;
            col += 1;
        }
        coef[(i, col)] = config.mu[i];
        col += 1;
        if s > 0 {
            coef[(i, col + i % s)] = level;
        }
    }
    coef
}

/// Simulates one panel. Deterministic given `config.seed`.
pub fn simulate_dgp(config: &DgpConfig) -> Result<(TimeSeriesPanel, SimulatedTruth)> {
    config.validate()?;
    let (t_len, q, r, s) = (config.t_len, config.q, config.r, config.s);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut normal = move |sd: f64| sd * rng.sample::<f64, _>(StandardNormal);

    let phi = DMatrix::from_row_slice(s, s, &config.phi);
    let mut w_state = vec![0.0; s];
    let step_w = |normal: &mut dyn FnMut(f64) -> f64, state: &mut Vec<f64>| {
        let next: Vec<f64> = (0..s)
            .map(|i| (0..s).map(|j| phi[(i, j)] * state[j]).sum::<f64>() + normal(config.sigma_e))
            .collect();
        *state = next;
    };
    for _ in 0..config.burn_in {
        step_w(&mut normal, &mut w_state);
    }

    // The SUR variant still draws the random walk so seeds line up across
    // variants, but it never enters the responses.
    let x_dim = if config.variant == Variant::Sur { 2 } else { r };
    let mut x_state = vec![0.0; x_dim];
    let mut x = DMatrix::zeros(r, t_len);
    let mut w = DMatrix::zeros(s, t_len);
    let mut y = DMatrix::zeros(q, t_len);
    let breaks = BreakSet::new(config.break_indices(), t_len)?;
    let regimes = breaks.regimes();
    let coefs: Vec<DMatrix<f64>> = (0..regimes.len()).map(|k| regime_coefficients(config, k)).collect();
    let trend = config.includes_trend();
    let p = r + usize::from(trend) + 1 + s;
    let normalized = config.coefficient_scale == CoefficientScale::Normalized;
    let tf = t_len as f64;
    let x_scale = if normalized { tf.powf(-0.5) } else { 1.0 };
    let trend_scale = if normalized { 1.0 / tf } else { 1.0 };

    let mut regime = 0;
    let mut z = vec![0.0; p];
    for t in 0..t_len {
        while !regimes[regime].contains(&t) {
            regime += 1;
        }
        step_w(&mut normal, &mut w_state);
        for v in x_state.iter_mut() {
            *v += normal(config.sigma_xi);
        }
        for i in 0..r {
            x[(i, t)] = x_state[i];
            z[i] = x_state[i] * x_scale;
        }
        let mut col = r;
        if trend {
            z[col] = (t + 1) as f64 * trend_scale;
            col += 1;
        }
        z[col] = 1.0;
        col += 1;
        for i in 0..s {
            w[(i, t)] = w_state[i];
            z[col + i] = w_state[i];
        }
        let coef = &coefs[regime];
        for e in 0..q {
            let mean: f64 = (0..p).map(|k| coef[(e, k)] * z[k]).sum();
            y[(e, t)] = mean + normal(config.sigma_u);
        }
    }
    let panel = TimeSeriesPanel::new(y, x, w, trend, true)?;
    Ok((
        panel,
        SimulatedTruth {
            breaks,
            coefficients: coefs,
            normalized,
        },
    ))
}

/// Named break configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// One break at `tau = 0.5`.
    SB1,
    /// Two breaks at `tau = (0.33, 0.67)`.
    SB2,
    /// Four breaks at `tau = (0.2, 0.4, 0.6, 0.8)`.
    SB4,
    /// One break near the end of the sample, `tau = 0.9`.
    SB1Edge,
}

impl Scenario {
    pub fn fractions(self) -> Vec<f64> {
        match self {
            Self::SB1 => vec![0.5],
            Self::SB2 => vec![0.33, 0.67],
            Self::SB4 => vec![0.2, 0.4, 0.6, 0.8],
            Self::SB1Edge => vec![0.9],
        }
    }

    pub fn n_breaks(self) -> usize {
        self.fractions().len()
    }

    /// Sample sizes of the standard ladder (50 observations per regime at
    /// the smallest size, then doubling).
    pub fn sample_ladder(self) -> [usize; 4] {
        match self {
            Self::SB1 | Self::SB1Edge => [100, 200, 400, 800],
            Self::SB2 => [150, 300, 600, 1200],
            Self::SB4 => [250, 500, 1000, 2000],
        }
    }

    pub fn all() -> [Scenario; 4] {
        [Self::SB1, Self::SB2, Self::SB4, Self::SB1Edge]
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "SB1" => Ok(Self::SB1),
            "SB2" => Ok(Self::SB2),
            "SB4" => Ok(Self::SB4),
            "SB1_EDGE" => Ok(Self::SB1Edge),
            _ => Err(Error::InvalidConfig(format!("unknown scenario '{s}'"))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SB1 => "SB1",
            Self::SB2 => "SB2",
            Self::SB4 => "SB4",
            Self::SB1Edge => "SB1_EDGE",
        })
    }
}

/// Canonical configuration of a named scenario at sample size `t_len`.
pub fn scenario_preset(scenario: Scenario, t_len: usize) -> Result<DgpConfig> {
    let m = scenario.n_breaks();
    if t_len < 50 * (m + 1) {
        return Err(Error::InvalidConfig(format!(
            "{scenario} needs T >= {} (50 observations per regime), got {t_len}",
            50 * (m + 1)
        )));
    }
    let config = DgpConfig::new(t_len, scenario.fractions(), 0);
    config.validate()?;
    Ok(config)
}
