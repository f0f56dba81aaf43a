use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::acquisition::{SgaConfig, ThompsonConfig};
use crate::domain::DesignBox;
use crate::gp::FitOptions;
use crate::preference::{Likelihood, DEFAULT_SAMPLES};
use crate::problems::ProblemId;
use crate::stats::derive_seed;
use crate::utility::{ThetaPrior, UtilityFamily};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Policy {
    #[serde(rename = "EI-UU")]
    EiUu,
    #[serde(rename = "TS-UU")]
    TsUu,
    /// EI-UU with θ held at its prior.
    #[serde(rename = "EI-UU-npl")]
    EiUuNpl,
    #[serde(rename = "TS-UU-npl")]
    TsUuNpl,
    #[serde(rename = "Random")]
    Random,
}

impl Policy {
    pub const ALL: [Policy; 5] = [Policy::EiUu, Policy::TsUu, Policy::EiUuNpl, Policy::TsUuNpl, Policy::Random];

    pub fn name(self) -> &'static str {
        match self {
            Policy::EiUu => "EI-UU",
            Policy::TsUu => "TS-UU",
            Policy::EiUuNpl => "EI-UU-npl",
            Policy::TsUuNpl => "TS-UU-npl",
            Policy::Random => "Random",
        }
    }

    /// Whether responses update the θ distribution.
    pub fn learns_preferences(self) -> bool {
        matches!(self, Policy::EiUu | Policy::TsUu)
    }

    /// Whether a GP is fitted to choose designs.
    pub fn uses_model(self) -> bool {
        self != Policy::Random
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown policy '{s}'")))
    }
}

/// Independent seeds for the evaluation stream (initial design), the
/// simulated DM, and the policy (queries, posterior draws, GP fits,
/// acquisition).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub evaluation: u64,
    pub dm: u64,
    pub policy: u64,
}

impl Seeds {
    pub fn from_base(base: u64) -> Self {
        Self {
            evaluation: derive_seed(base, &[0]),
            dm: derive_seed(base, &[1]),
            policy: derive_seed(base, &[2]),
        }
    }
}

/// Numerical budgets. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    /// θ posterior samples handed to the acquisition.
    pub theta_samples: usize,
    pub gp: FitOptions,
    /// Hyperparameters are re-inferred every `refit_period` evaluations and
    /// reused in between.
    pub refit_period: usize,
    pub sga: SgaConfig,
    pub thompson: ThompsonConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            theta_samples: DEFAULT_SAMPLES,
            gp: FitOptions::default(),
            refit_period: 1,
            sga: SgaConfig::default(),
            thompson: ThompsonConfig::default(),
        }
    }
}

/// One optimization run. Either `problem` is set (its box, attribute count,
/// utility family and prior become defaults) or `design_box`, `attributes`,
/// `family` and `prior` are all given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_box: Option<DesignBox<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<UtilityFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<ThetaPrior<f64>>,
    pub policy: Policy,
    /// Evaluations after the initial design (`N`).
    pub evaluations: usize,
    /// Initial uniform designs; defaults to `2(d + 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_count: Option<usize>,
    #[serde(default)]
    pub likelihood: Likelihood,
    #[serde(default)]
    pub seeds: Seeds,
    /// θ of the simulated DM. Drawn from the prior with the DM seed when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_true: Option<Vec<f64>>,
    /// Known optimum `U*` for log-regret; computed from the problem when
    /// absent and possible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimum: Option<f64>,
    #[serde(default)]
    pub settings: Settings,
}

/// Fully determined problem description derived from a config.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub design_box: DesignBox<f64>,
    pub attributes: usize,
    pub family: UtilityFamily,
    pub prior: ThetaPrior<f64>,
    pub init_count: usize,
}

impl ExperimentConfig {
    /// A config for a built-in problem with its default family and prior.
    pub fn for_problem(problem: ProblemId, policy: Policy, evaluations: usize, seeds: Seeds) -> Self {
        Self {
            problem: Some(problem),
            design_box: None,
            attributes: None,
            family: None,
            prior: None,
            policy,
            evaluations,
            init_count: None,
            likelihood: Likelihood::default(),
            seeds,
            theta_true: None,
            optimum: None,
            settings: Settings::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve()?;
        Ok(cfg)
    }

    /// Validates the config and fills in problem defaults. Errors are
    /// [`Error::InvalidField`] naming the offending field.
    pub fn resolve(&self) -> Result<Resolved> {
        let invalid = |field: &str, message: String| Error::InvalidField {
            field: field.to_string(),
            message,
        };
        let missing = |field: &str| invalid(field, "required when no problem is given".into());
        let design_box = match (&self.design_box, self.problem) {
            (Some(b), _) => b.clone(),
            (None, Some(p)) => p.design_box(),
            (None, None) => return Err(missing("design_box")),
        };
        design_box.validate().map_err(|e| invalid("design_box", e.to_string()))?;
        let attributes = match (self.attributes, self.problem) {
            (Some(k), _) => k,
            (None, Some(p)) => p.attributes(),
            (None, None) => return Err(missing("attributes")),
        };
        let family = match (self.family, self.problem) {
            (Some(f), _) => f,
            (None, Some(p)) => p.default_family(),
            (None, None) => return Err(missing("family")),
        };
        let prior = match (&self.prior, self.problem) {
            (Some(p), _) => p.clone(),
            (None, Some(p)) => p.default_prior(),
            (None, None) => return Err(missing("prior")),
        };
        if let Some(p) = self.problem {
            if design_box.dim() != p.dim() {
                return Err(invalid("design_box", format!("{p} has d = {}, the box has {}", p.dim(), design_box.dim())));
            }
            if attributes != p.attributes() {
                return Err(invalid("attributes", format!("{p} has k = {}, not {attributes}", p.attributes())));
            }
            let own = p.design_box::<f64>();
            if !own.contains(&design_box.lower) || !own.contains(&design_box.upper) {
                return Err(invalid("design_box", format!("must lie inside the {p} box")));
            }
        }
        if attributes == 0 {
            return Err(invalid("attributes", "must be at least 1".into()));
        }
        prior.validate().map_err(|e| invalid("prior", e.to_string()))?;
        let probe = prior.sample(&mut crate::stats::rng_from_seed(0));
        family
            .check_theta(&probe, attributes)
            .map_err(|e| invalid("prior", format!("does not match the {family:?} family: {e}")))?;
        if let Some(t) = &self.theta_true {
            family.check_theta(t, attributes).map_err(|e| invalid("theta_true", e.to_string()))?;
        }
        let init_count = self.init_count.unwrap_or(2 * (design_box.dim() + 1));
        if init_count < 2 {
            return Err(invalid("init_count", "must be at least 2 so a pair can be queried".into()));
        }
        self.likelihood.validate().map_err(|e| invalid("likelihood", e.to_string()))?;
        let s = &self.settings;
        for (field, value) in [
            ("settings.theta_samples", s.theta_samples),
            ("settings.refit_period", s.refit_period),
            ("settings.gp.ensemble_size", s.gp.ensemble_size),
        ] {
            if value == 0 {
                return Err(invalid(field, "must be at least 1".into()));
            }
        }
        s.sga.validate().map_err(|e| invalid("settings.sga", e.to_string()))?;
        if s.thompson.probes == 0 || !(s.thompson.initial_step > 0.0) {
            return Err(invalid("settings.thompson", "needs at least one probe and a positive step".into()));
        }
        if self.optimum.is_some_and(|u| !u.is_finite()) {
            return Err(invalid("optimum", "must be finite".into()));
        }
        Ok(Resolved {
            design_box,
            attributes,
            family,
            prior,
            init_count,
        })
    }
}
