//! Scenario files: one JSON document per scenario.
//!
//! ```json
//! {"alphabet": [2, 2, 3],
//!  "marginals": [[0.5, 0.5], [0.3, 0.7], [0.2, 0.3, 0.5]],
//!  "A": [[0, 1, 2], [1, 1, 0]],
//!  "psi": {"family": "psi_c", "c": 1.0},
//!  "gamma": {"family": "c_log_inv", "c": 1.0},
//!  "t_grid": [0, 0.5, 1],
//!  "checks": ["exp_moment", "tail_bound"],
//!  "mc": {"samples": 100000, "seed": 7}}
//! ```
//!
//! `A` may instead be `{"generator": "random", "size": k, "seed": s}`.
//! `marginals` defaults to uniform. Optional extras: `c_values` (exponents for
//! the `fpsic_bound` check) and `enumeration_cap`.

use std::path::Path;

use anyhow::{bail, Context};
use serde::Deserialize;

use hullconc::g_transform::GammaSpec;
use hullconc::product_space::{Alphabet, PointSet, ProductMeasure};
use hullconc::psi::{psi_c, PsiSpec};
use hullconc::verify::{random_point_set, CheckKind, McConfig, Scenario};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    alphabet: Vec<usize>,
    #[serde(default)]
    marginals: Option<Vec<Vec<f64>>>,
    #[serde(rename = "A")]
    set: SetFile,
    #[serde(default)]
    psi: Option<PsiFile>,
    #[serde(default)]
    gamma: Option<GammaFile>,
    #[serde(default)]
    t_grid: Option<Vec<f64>>,
    #[serde(default)]
    c_values: Option<Vec<f64>>,
    #[serde(default)]
    checks: Option<Vec<String>>,
    #[serde(default)]
    mc: Option<McFile>,
    #[serde(default)]
    enumeration_cap: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SetFile {
    Points(Vec<Vec<usize>>),
    Generator(GeneratorFile),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorFile {
    generator: String,
    size: usize,
    seed: u64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiFile {
    family: PsiFamily,
    #[serde(default)]
    c: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PsiFamily {
    Quadratic,
    PsiC,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaFile {
    family: GammaFamily,
    #[serde(default)]
    c: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum GammaFamily {
    LogInv,
    CLogInv,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct McFile {
    samples: usize,
    #[serde(default)]
    seed: Option<u64>,
}

/// A parsed scenario plus the run options it carries.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    /// Checks named in the file, if any.
    pub checks: Option<Vec<CheckKind>>,
    /// Monte Carlo sample count; the seed may still be missing.
    pub mc_samples: Option<usize>,
    pub mc_seed: Option<u64>,
}

impl PsiFile {
    fn build(self) -> anyhow::Result<PsiSpec> {
        match (self.family, self.c) {
            (PsiFamily::Quadratic, None) => Ok(PsiSpec::Quadratic),
            (PsiFamily::Quadratic, Some(_)) => bail!("psi family 'quadratic' takes no parameter c"),
            (PsiFamily::PsiC, Some(c)) => Ok(psi_c(c)?),
            (PsiFamily::PsiC, None) => bail!("psi family 'psi_c' needs a parameter c"),
        }
    }
}

impl GammaFile {
    fn build(self) -> anyhow::Result<GammaSpec> {
        match (self.family, self.c) {
            (GammaFamily::LogInv, None) => Ok(GammaSpec::LogInv),
            (GammaFamily::LogInv, Some(_)) => bail!("gamma family 'log_inv' takes no parameter c"),
            (GammaFamily::CLogInv, Some(c)) => Ok(GammaSpec::c_log_inv(c)?),
            (GammaFamily::CLogInv, None) => bail!("gamma family 'c_log_inv' needs a parameter c"),
        }
    }
}

/// Parses a scenario document. Syntax errors keep serde_json's line and
/// column.
pub fn parse_scenario(text: &str) -> anyhow::Result<LoadedScenario> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    let alphabet = Alphabet::new(file.alphabet)?;
    let measure = match file.marginals {
        Some(m) => ProductMeasure::new(alphabet.clone(), m)?,
        None => ProductMeasure::uniform(alphabet.clone()),
    };
    let set = match file.set {
        SetFile::Points(points) => PointSet::from_symbols(alphabet, points)?,
        SetFile::Generator(g) => {
            if g.generator != "random" {
                bail!("unknown set generator '{}'", g.generator);
            }
            random_point_set(&alphabet, g.size, g.seed)?
        }
    };
    let psi = file.psi.map(PsiFile::build).transpose()?.unwrap_or(PsiSpec::Quadratic);
    let gamma = file.gamma.map(GammaFile::build).transpose()?.unwrap_or(GammaSpec::LogInv);
    let mut scenario = Scenario::new(measure, set, psi, gamma)?;
    if let Some(t) = file.t_grid {
        if t.iter().any(|v| !v.is_finite()) {
            bail!("t_grid entries must be finite");
        }
        scenario.t_grid = t;
    }
    if let Some(cs) = file.c_values {
        for &c in &cs {
            psi_c(c)?;
        }
        scenario.c_values = cs;
    }
    if let Some(cap) = file.enumeration_cap {
        scenario.enumeration_cap = cap;
    }
    let checks = file
        .checks
        .map(|names| names.iter().map(|n| n.parse::<CheckKind>()).collect::<Result<Vec<_>, _>>())
        .transpose()?;
    Ok(LoadedScenario {
        scenario,
        checks,
        mc_samples: file.mc.map(|m| m.samples),
        mc_seed: file.mc.and_then(|m| m.seed),
    })
}

pub fn load_scenario(path: &Path) -> anyhow::Result<LoadedScenario> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_scenario(&text).with_context(|| format!("in scenario {}", path.display()))
}

impl LoadedScenario {
    /// Resolves the Monte Carlo settings; `seed` overrides the file's seed.
    pub fn resolve_mc(&mut self, seed: Option<u64>) {
        if let Some(samples) = self.mc_samples {
            if let Some(seed) = seed.or(self.mc_seed) {
                self.scenario.mc = Some(McConfig { samples, seed });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"{"alphabet":[2,2],"A":[[0,0],[1,1]]}"#;

    #[test]
    fn defaults_are_uniform_quadratic() {
        let s = parse_scenario(BASIC).unwrap();
        assert_eq!(s.scenario.psi, PsiSpec::Quadratic);
        assert_eq!(s.scenario.gamma, GammaSpec::LogInv);
        assert_eq!(s.scenario.measure.marginals(), &[vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert_eq!(s.scenario.set.len(), 2);
        assert!(s.checks.is_none());
    }

    #[test]
    fn full_document() {
        let text = r#"{
            "alphabet": [2, 3],
            "marginals": [[0.25, 0.75], [0.2, 0.3, 0.5]],
            "A": {"generator": "random", "size": 3, "seed": 11},
            "psi": {"family": "psi_c", "c": 2.0},
            "gamma": {"family": "c_log_inv", "c": 2.0},
            "t_grid": [0, 1],
            "c_values": [1, 2],
            "checks": ["exp_moment", "monte_carlo"],
            "mc": {"samples": 2000, "seed": 5}
        }"#;
        let mut s = parse_scenario(text).unwrap();
        assert_eq!(s.scenario.set.len(), 3);
        assert_eq!(s.scenario.psi, psi_c(2.0).unwrap());
        assert_eq!(s.scenario.t_grid, vec![0.0, 1.0]);
        assert_eq!(s.scenario.c_values, vec![1.0, 2.0]);
        assert_eq!(s.checks, Some(vec![CheckKind::ExpMoment, CheckKind::MonteCarlo]));
        s.resolve_mc(None);
        assert_eq!(s.scenario.mc, Some(McConfig { samples: 2000, seed: 5 }));
        s.resolve_mc(Some(9));
        assert_eq!(s.scenario.mc.unwrap().seed, 9);
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let err = parse_scenario("{\n \"alphabet\": [2,\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn rejects_bad_content() {
        for text in [
            r#"{"alphabet":[2],"A":[]}"#,
            r#"{"alphabet":[2],"A":[[2]]}"#,
            r#"{"alphabet":[2],"A":[[0]],"psi":{"family":"psi_c"}}"#,
            r#"{"alphabet":[2],"A":[[0]],"psi":{"family":"cubic"}}"#,
            r#"{"alphabet":[2],"A":[[0]],"checks":["nope"]}"#,
            r#"{"alphabet":[2],"A":[[0]],"marginals":[[0.5,0.6]]}"#,
            r#"{"alphabet":[2],"A":[[0]],"extra":1}"#,
        ] {
            assert!(parse_scenario(text).is_err(), "{text}");
        }
    }
}
