//! Run configuration: the map family and per-command parameters, read from
//! a JSON document. Every field except `family` has a default, and the
//! resolved form (defaults filled in) is echoed in command output.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::expr::Expr;
use crate::geometry::{ConeParams, CustomFamily, PiecewiseMap, DEFAULT_N_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Baker,
    Lueroth,
    PerturbedLueroth,
    Custom,
}

/// Expressions of a custom family in x, y and the branch index n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expressions {
    pub f1: String,
    pub f2: String,
    pub f1x: String,
    pub f1y: String,
    pub f2x: String,
    pub f2y: String,
    pub f1xx: String,
    pub f1xy: String,
    pub f1yy: String,
    pub f2xx: String,
    pub f2xy: String,
    pub f2yy: String,
    /// Post bounds as functions of y and n.
    pub x_left: String,
    pub x_right: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Parameters {
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(rename = "N_max", skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    /// Custom families: number of branches (absent = countable).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branches: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expressions: Option<Expressions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disjoint_strips: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub affine: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckParams {
    pub nx: usize,
    pub ny: usize,
    pub branch_lo: usize,
    pub branch_hi: usize,
    /// Branches summed in the G3 series of countable families.
    pub g3_terms: usize,
}

impl Default for CheckParams {
    fn default() -> Self {
        CheckParams { nx: 32, ny: 32, branch_lo: 1, branch_hi: 100, g3_terms: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ItineraryParams {
    pub point: [f64; 2],
    pub length: usize,
    pub strict: bool,
    /// Cylinders of the prefixes up to this depth are reported.
    pub cylinder_depth: usize,
}

impl Default for ItineraryParams {
    fn default() -> Self {
        ItineraryParams { point: [0.3, 0.5], length: 20, strict: false, cylinder_depth: 6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Unstable,
    Stable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManifoldParams {
    pub kind: ManifoldKind,
    /// Symbols (oldest first for unstable, a₀ first for stable); drawn from
    /// the seed when absent.
    pub symbols: Option<Vec<usize>>,
    pub length: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub grid: usize,
}

impl Default for ManifoldParams {
    fn default() -> Self {
        ManifoldParams { kind: ManifoldKind::Unstable, symbols: None, length: 40, tol: 1e-10, max_iter: 80, grid: 257 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistortionParams {
    pub depth_lo: usize,
    pub depth_hi: usize,
    pub depth_step: usize,
    pub points: usize,
    pub c: f64,
    /// Cylinder word; drawn from the seed (symbols 1 and 2) when absent.
    pub word: Option<Vec<usize>>,
}

impl Default for DistortionParams {
    fn default() -> Self {
        DistortionParams { depth_lo: 2, depth_hi: 16, depth_step: 2, points: 48, c: 1.0, word: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BirkhoffParams {
    pub seeds: usize,
    pub n: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub bins: usize,
}

impl Default for BirkhoffParams {
    fn default() -> Self {
        BirkhoffParams { seeds: 64, n: 100_000, burn_in: 1000, thin: 1, bins: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PushforwardParams {
    pub points: usize,
    pub n: usize,
    pub depth: usize,
    pub burn_in: usize,
    pub bins: usize,
    pub groups: usize,
    /// Past of the seed curve (oldest first); drawn from the seed when absent.
    pub past: Option<Vec<usize>>,
}

impl Default for PushforwardParams {
    fn default() -> Self {
        PushforwardParams { points: 4096, n: 300, depth: 20, burn_in: 50, bins: 64, groups: 16, past: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HolonomyParams {
    pub depths: Vec<usize>,
    pub pairs: usize,
    pub bins: usize,
    pub past_gamma: Option<Vec<usize>>,
    pub past_eta: Option<Vec<usize>>,
}

impl Default for HolonomyParams {
    fn default() -> Self {
        HolonomyParams { depths: vec![6, 10], pairs: 256, bins: 16, past_gamma: None, past_eta: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RouteChoice {
    All,
    DerivativeGrowth,
    Directional,
    Cylinder,
    Integral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyParams {
    pub route: RouteChoice,
    pub seeds: usize,
    pub n: usize,
    pub cylinder_seeds: usize,
    pub cylinder_depths: [usize; 2],
    pub cylinder_n: usize,
    /// Keep every `integral_stride`-th Birkhoff point for the integral route.
    pub integral_stride: usize,
}

impl Default for EntropyParams {
    fn default() -> Self {
        EntropyParams {
            route: RouteChoice::All,
            seeds: 64,
            n: 100_000,
            cylinder_seeds: 8,
            cylinder_depths: [1, 2],
            cylinder_n: 1_000_000,
            integral_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: FamilyName,
    #[serde(default)]
    pub parameters: Parameters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone: Option<ConeParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    /// Work with F^power.
    #[serde(default = "one")]
    pub power: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub check: CheckParams,
    #[serde(default)]
    pub itinerary: ItineraryParams,
    #[serde(default)]
    pub manifold: ManifoldParams,
    #[serde(default)]
    pub distortion: DistortionParams,
    #[serde(default)]
    pub birkhoff: BirkhoffParams,
    #[serde(default)]
    pub pushforward: PushforwardParams,
    #[serde(default)]
    pub holonomy: HolonomyParams,
    #[serde(default)]
    pub entropy: EntropyParams,
}

fn one() -> usize {
    1
}

/// Branch cap when building power maps of countable families.
const POWER_DEPTH_LIMIT: usize = 1_000_000;

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The default configuration for `family` with no parameters.
    pub fn for_family(family: FamilyName) -> Self {
        Self::from_json(&format!("{{\"family\": {}}}", serde_json::to_string(&family).unwrap())).unwrap()
    }

    /// Fill family defaults (N, ε, N_max, cone, C0) and validate.
    pub fn resolved(&self) -> Result<Self> {
        let mut c = self.clone();
        let p = &mut c.parameters;
        match c.family {
            FamilyName::Baker => {
                let n = *p.n.get_or_insert(2);
                c.cone.get_or_insert(ConeParams { alpha: 0.5, k0: n as f64 });
            }
            FamilyName::Lueroth => {
                p.n_max.get_or_insert(DEFAULT_N_MAX);
                c.cone.get_or_insert(ConeParams { alpha: 0.5, k0: 2.0 });
            }
            FamilyName::PerturbedLueroth => {
                p.epsilon.get_or_insert(0.01);
                p.n_max.get_or_insert(DEFAULT_N_MAX);
                c.cone.get_or_insert(ConeParams { alpha: 0.5, k0: 1.5 });
            }
            FamilyName::Custom => {
                if p.expressions.is_none() {
                    return Err(Error::ConfigInvalid("custom family needs parameters.expressions".into()));
                }
                if c.cone.is_none() {
                    return Err(Error::ConfigInvalid("custom family needs an explicit cone".into()));
                }
                if p.branches.is_none() {
                    p.n_max.get_or_insert(DEFAULT_N_MAX);
                }
                p.disjoint_strips.get_or_insert(false);
                p.affine.get_or_insert(false);
            }
        }
        c.c0.get_or_insert(1.0);
        if c.power == 0 {
            return Err(Error::ConfigInvalid("power must be at least 1".into()));
        }
        c.build()?;
        Ok(c)
    }

    /// The map described by a resolved configuration.
    pub fn build(&self) -> Result<PiecewiseMap> {
        let p = &self.parameters;
        let mut map = match self.family {
            FamilyName::Baker => PiecewiseMap::baker(p.n.unwrap_or(2))?,
            FamilyName::Lueroth => PiecewiseMap::lueroth(),
            FamilyName::PerturbedLueroth => PiecewiseMap::perturbed_lueroth(p.epsilon.unwrap_or(0.01))?,
            FamilyName::Custom => {
                let e = p.expressions.as_ref().ok_or_else(|| Error::ConfigInvalid("missing expressions".into()))?;
                let cone = self.cone.ok_or_else(|| Error::ConfigInvalid("missing cone".into()))?;
                let fam = CustomFamily {
                    label: "config".into(),
                    branches: p.branches,
                    f1: Expr::parse(&e.f1)?,
                    f2: Expr::parse(&e.f2)?,
                    first: [Expr::parse(&e.f1x)?, Expr::parse(&e.f1y)?, Expr::parse(&e.f2x)?, Expr::parse(&e.f2y)?],
                    second: [
                        Expr::parse(&e.f1xx)?,
                        Expr::parse(&e.f1xy)?,
                        Expr::parse(&e.f1yy)?,
                        Expr::parse(&e.f2xx)?,
                        Expr::parse(&e.f2xy)?,
                        Expr::parse(&e.f2yy)?,
                    ],
                    x_left: Expr::parse(&e.x_left)?,
                    x_right: Expr::parse(&e.x_right)?,
                    disjoint: p.disjoint_strips.unwrap_or(false),
                    affine: p.affine.unwrap_or(false),
                };
                PiecewiseMap::new(fam, cone, self.c0.unwrap_or(1.0), p.n_max.unwrap_or(DEFAULT_N_MAX))
            }
        };
        if let Some(cone) = self.cone {
            map = map.with_cone(ConeParams::new(cone.alpha, cone.k0)?);
        }
        if let Some(n_max) = p.n_max {
            map = map.with_n_max(n_max);
        }
        if let Some(c0) = self.c0 {
            map.c0 = c0;
        }
        if self.power > 1 {
            map = map.power(self.power, POWER_DEPTH_LIMIT)?;
        }
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_filled() {
        let c = RunConfig::from_json(r#"{"family": "baker", "parameters": {"N": 3}}"#).unwrap().resolved().unwrap();
        assert_eq!(c.cone, Some(ConeParams { alpha: 0.5, k0: 3.0 }));
        assert_eq!(c.check.nx, 32);
        let m = c.build().unwrap();
        assert_eq!(m.branch_limit(), 3);
        let p = RunConfig::for_family(FamilyName::PerturbedLueroth).resolved().unwrap();
        assert_eq!(p.parameters.epsilon, Some(0.01));
    }

    #[test]
    fn unknown_fields_and_bad_values_are_rejected() {
        assert!(matches!(RunConfig::from_json(r#"{"family": "baker", "colour": 1}"#), Err(Error::ConfigInvalid(_))));
        assert!(matches!(RunConfig::from_json(r#"{"family": "tent"}"#), Err(Error::ConfigInvalid(_))));
        let c = RunConfig::from_json(r#"{"family": "perturbed_lueroth", "parameters": {"epsilon": 0.5}}"#).unwrap();
        assert!(c.resolved().is_err());
        assert!(RunConfig::from_json(r#"{"family": "custom"}"#).unwrap().resolved().is_err());
    }

    #[test]
    fn custom_family_from_expressions() {
        let text = r#"{
            "family": "custom",
            "cone": {"alpha": 0.5, "K0": 3},
            "parameters": {
                "branches": 3,
                "affine": true,
                "disjoint_strips": true,
                "expressions": {
                    "f1": "3*x - (n - 1)", "f2": "(y + n - 1)/3",
                    "f1x": "3", "f1y": "0", "f2x": "0", "f2y": "1/3",
                    "f1xx": "0", "f1xy": "0", "f1yy": "0", "f2xx": "0", "f2xy": "0", "f2yy": "0",
                    "x_left": "(n - 1)/3", "x_right": "n/3"
                }
            }
        }"#;
        let c = RunConfig::from_json(text).unwrap().resolved().unwrap();
        let m = c.build().unwrap();
        let z = crate::Point2::new(0.5, 0.2);
        let (hit, w) = m.step(z).unwrap();
        assert_eq!(hit.index, 2);
        assert!((w.x - 0.5).abs() < 1e-15 && (w.y - 1.2 / 3.0).abs() < 1e-15);
    }
}
