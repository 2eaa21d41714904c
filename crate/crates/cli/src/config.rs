//! Config parsing and validation.
//!
//! Configs are TOML documents of flat `key = value` pairs. Parsing is
//! strict — unknown keys are errors, not warnings — and validation reports
//! every violation it finds rather than stopping at the first, so a bad
//! config round-trips to a fixable list in one attempt.

// The `!(x >= 0.0)` comparisons below are deliberate: the negated form
// rejects NaN together with the out-of-range values, which `x < 0.0`
// would silently accept.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use serde::Deserialize;
use spde_ftle::amplitude::AmplitudeSpec;
use spde_ftle::experiment::{
    gate_violations, AmplitudeCampaign, OrderCampaign, Regime, RegimeReport, SpdeCampaign,
};
use spde_ftle::model::ModelKind;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub regime: Option<String>,
    pub model: Option<String>,
    pub nu: Option<f64>,
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
    pub n_modes: Option<usize>,
    pub dt: Option<f64>,
    pub slow_horizon: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub output_path: Option<String>,
    pub epsilon_grid: Option<Vec<f64>>,
}

/// A validated campaign ready to execute.
#[derive(Debug, Clone)]
pub enum CampaignPlan {
    Spde {
        regime: Regime,
        campaign: SpdeCampaign,
    },
    Order(OrderCampaign),
    Amplitude {
        regime: Regime,
        campaign: AmplitudeCampaign,
    },
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub plan: CampaignPlan,
    /// From the config; the environment can still override it.
    pub output_path: Option<String>,
}

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_N_MODES: usize = 32;

fn default_slow_horizon(regime: Regime) -> f64 {
    match regime {
        Regime::I => 10.0,
        Regime::II | Regime::III | Regime::ApproxOrder => 1.0,
        Regime::IVCritical | Regime::IVSmallNu | Regime::Birkhoff => 50.0,
        Regime::Density => 0.0, // only the attractor at time 0 is sampled
    }
}

/// Parse and validate a config document. Returns the executable plan or
/// every violation found.
pub fn validate(text: &str) -> Result<Plan, Vec<String>> {
    let raw: RawConfig = match toml::from_str(text) {
        Ok(r) => r,
        Err(e) => return Err(vec![format!("config parse error: {e}")]),
    };
    let mut errs = Vec::new();

    let regime = match raw.regime.as_deref() {
        None => {
            errs.push("missing required key: regime".to_string());
            None
        }
        Some(s) => match Regime::parse(s) {
            Some(r) => Some(r),
            None => {
                errs.push(format!(
                    "unknown regime {s:?} (expected I, II, III, IV-critical, \
                     IV-small-nu, approx-order, density, or birkhoff)"
                ));
                None
            }
        },
    };

    let model = match raw.model.as_deref() {
        None => None,
        Some(s) => match ModelKind::parse(s) {
            Some(m) => Some(m),
            None => {
                errs.push(format!(
                    "unknown model {s:?} (expected allen-cahn, swift-hohenberg, \
                     or surface-growth)"
                ));
                None
            }
        },
    };

    // universal range checks on whatever was provided
    if let Some(s) = raw.sigma {
        if !(s >= 0.0) {
            errs.push(format!("sigma must be >= 0, got {s}"));
        }
    }
    if let Some(e) = raw.epsilon {
        if !(e > 0.0) {
            errs.push(format!("epsilon must be > 0, got {e}"));
        }
    }
    if let Some(d) = raw.dt {
        if !(d > 0.0) {
            errs.push(format!("dt must be > 0, got {d}"));
        }
    }
    if let Some(t) = raw.slow_horizon {
        if !(t > 0.0) {
            errs.push(format!("slow_horizon must be > 0, got {t}"));
        }
    }
    if let Some(n) = raw.samples {
        if n == 0 {
            errs.push("samples must be >= 1".to_string());
        }
    }
    if let Some(n) = raw.n_modes {
        if n < 2 {
            errs.push(format!("n_modes must be >= 2, got {n}"));
        }
    }
    if raw.samples.is_none() {
        errs.push("missing required key: samples".to_string());
    }
    if raw.seed.is_none() {
        errs.push("missing required key: seed".to_string());
    }

    let regime = match regime {
        Some(r) => r,
        None => return Err(errs),
    };

    let dt = raw.dt.unwrap_or(DEFAULT_DT);
    let n_modes = raw.n_modes.unwrap_or(DEFAULT_N_MODES);
    let slow_horizon = raw.slow_horizon.unwrap_or_else(|| default_slow_horizon(regime));
    let samples = raw.samples.unwrap_or(1);
    let seed = raw.seed.unwrap_or(0);

    let require = |field: Option<f64>, name: &str, errs: &mut Vec<String>| -> f64 {
        match field {
            Some(v) => v,
            None => {
                errs.push(format!("missing required key for this regime: {name}"));
                f64::NAN
            }
        }
    };

    let plan = match regime {
        Regime::I | Regime::II | Regime::III | Regime::IVCritical | Regime::IVSmallNu => {
            let nu = require(raw.nu, "nu", &mut errs);
            let sigma = require(raw.sigma, "sigma", &mut errs);
            // regime I never touches the slow scale, so epsilon is optional
            let eps = if regime == Regime::I {
                raw.epsilon.unwrap_or(1.0)
            } else {
                require(raw.epsilon, "epsilon", &mut errs)
            };
            let model = match model {
                Some(m) => m,
                None => {
                    errs.push("missing required key for this regime: model".to_string());
                    ModelKind::AllenCahn
                }
            };
            let campaign = SpdeCampaign {
                model,
                n_modes,
                nu,
                sigma,
                eps,
                dt,
                slow_horizon,
                n_samples: samples,
                master_seed: seed,
                substeps: None,
            };
            if nu.is_finite() && sigma.is_finite() && eps.is_finite() {
                errs.extend(gate_violations(regime, &campaign));
            }
            CampaignPlan::Spde { regime, campaign }
        }
        Regime::ApproxOrder => {
            let model = match model {
                Some(m) => m,
                None => {
                    errs.push("missing required key for this regime: model".to_string());
                    ModelKind::AllenCahn
                }
            };
            let eps_grid = match raw.epsilon_grid {
                Some(g) => g,
                None => {
                    errs.push("missing required key for this regime: epsilon_grid".to_string());
                    Vec::new()
                }
            };
            let campaign = OrderCampaign {
                model,
                n_modes,
                eps_grid,
                dt,
                slow_horizon,
                n_samples: samples,
                master_seed: seed,
            };
            errs.extend(campaign.gate_violations());
            CampaignPlan::Order(campaign)
        }
        Regime::Density | Regime::Birkhoff => {
            // amplitude variant from (nu, sigma) with the normalized cubic:
            // nu = 0 -> the critical equation, nu > 0 -> the supercritical
            // one at ratio sigma/nu
            let nu = raw.nu.unwrap_or(0.0);
            let spec = if nu == 0.0 {
                AmplitudeSpec::critical(-1.0).expect("fixed coefficients")
            } else if nu < 0.0 {
                errs.push(format!(
                    "amplitude campaigns need nu >= 0, got {nu}"
                ));
                AmplitudeSpec::critical(-1.0).expect("fixed coefficients")
            } else {
                let sigma = raw.sigma.unwrap_or(f64::NAN);
                if !(sigma > 0.0) {
                    errs.push(format!(
                        "amplitude campaigns with nu > 0 need sigma > 0, got {sigma}"
                    ));
                    AmplitudeSpec::critical(-1.0).expect("fixed coefficients")
                } else {
                    AmplitudeSpec::supercritical(sigma / nu, -1.0).expect("fixed coefficients")
                }
            };
            let campaign = AmplitudeCampaign {
                spec,
                dt_slow: dt,
                horizon: slow_horizon,
                n_samples: samples,
                master_seed: seed,
            };
            CampaignPlan::Amplitude { regime, campaign }
        }
    };

    if errs.is_empty() {
        Ok(Plan {
            plan,
            output_path: raw.output_path,
        })
    } else {
        Err(errs)
    }
}

/// Dispatch a validated plan to its runner.
pub fn execute(plan: &CampaignPlan) -> RegimeReport {
    use spde_ftle::experiment as ex;
    match plan {
        CampaignPlan::Spde { regime, campaign } => match regime {
            Regime::I => ex::run_regime_i(campaign),
            Regime::II => ex::run_regime_ii(campaign),
            Regime::III => ex::run_regime_iii(campaign),
            Regime::IVCritical | Regime::IVSmallNu => ex::run_regime_iv(campaign),
            _ => unreachable!("validated plan carries an SPDE regime"),
        },
        CampaignPlan::Order(campaign) => ex::run_approx_order(campaign),
        CampaignPlan::Amplitude { regime, campaign } => match regime {
            Regime::Density => ex::run_density(campaign),
            Regime::Birkhoff => ex::run_birkhoff(campaign),
            _ => unreachable!("validated plan carries an amplitude regime"),
        },
    }
}
