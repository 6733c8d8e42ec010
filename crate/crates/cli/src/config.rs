//! Run configuration: JSON file, `--set` overrides, validation, hashing.

use std::path::Path;

use fk_core::model::Harmonic;
use fk_core::{Forcing, Interaction, Potential};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialSpec {
    Standard {
        k: f64,
    },
    /// Site potential given by its table of Fourier modes.
    Generalized {
        kappa: f64,
        #[serde(default)]
        site: Vec<Harmonic>,
        #[serde(default)]
        mixed: f64,
    },
}

impl PotentialSpec {
    pub fn build(&self) -> Potential {
        match self {
            PotentialSpec::Standard { k } => Potential::standard(*k),
            PotentialSpec::Generalized { kappa, site, mixed } => Potential::Generalized { kappa: *kappa, site: site.clone(), mixed: *mixed },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lattice {
    pub n: usize,
    pub m: i64,
}

impl Default for Lattice {
    fn default() -> Self {
        Lattice { n: 32, m: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSpec {
    pub dt: f64,
    pub dt_out: f64,
    pub horizon: f64,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        IntegratorSpec { dt: 1e-2, dt_out: 0.05, horizon: 200.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub tol_eq: f64,
    pub tol_per: f64,
    pub tol_v: f64,
    pub tol_event: f64,
    pub tol_tangency: f64,
    pub tol_z: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_eq: fk_core::sliding::TOL_EQ,
            tol_per: fk_core::sliding::TOL_PER,
            tol_v: fk_core::sliding::TOL_V,
            tol_event: fk_core::zeroset::TOL_EVENT,
            tol_tangency: fk_core::zeroset::TOL_TANGENCY,
            tol_z: 1e-9,
        }
    }
}

impl Tolerances {
    fn entries(&self) -> [(&'static str, f64); 6] {
        [
            ("tol_eq", self.tol_eq),
            ("tol_per", self.tol_per),
            ("tol_v", self.tol_v),
            ("tol_event", self.tol_event),
            ("tol_tangency", self.tol_tangency),
            ("tol_z", self.tol_z),
        ]
    }
}

/// Initial condition: explicit lift values, or a seeded random state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSpec {
    pub amplitude: f64,
    pub state: Option<Vec<f64>>,
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec { amplitude: 0.3, state: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSpec {
    pub max_horizon: f64,
    pub orbit_nodes: usize,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        SimulateSpec { max_horizon: 3200.0, orbit_nodes: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroAuditSpec {
    /// Site windows `[m, n)`; empty means one period.
    pub windows: Vec<(i64, i64)>,
}

impl Default for ZeroAuditSpec {
    fn default() -> Self {
        ZeroAuditSpec { windows: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureSpec {
    pub members: usize,
    /// Windings assigned to members in turn.
    pub windings: Vec<i64>,
    pub mc_threshold: usize,
    pub mc_pairs: usize,
}

impl Default for MeasureSpec {
    fn default() -> Self {
        MeasureSpec { members: 16, windings: vec![0, 1], mc_threshold: 64, mc_pairs: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmSpec {
    pub p: i64,
    pub q: i64,
    pub n_avg: usize,
    pub orbit_nodes: usize,
    /// Support samples written to the characteristic-map table.
    pub samples: usize,
}

impl Default for AmSpec {
    fn default() -> Self {
        AmSpec { p: 1, q: 3, n_avg: 64, orbit_nodes: 256, samples: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepinSpec {
    pub f_min: f64,
    pub f_max: f64,
    pub points: usize,
    pub blocks: usize,
    pub orbit_nodes: usize,
}

impl Default for DepinSpec {
    fn default() -> Self {
        DepinSpec { f_min: 0.0, f_max: 0.4, points: 41, blocks: 4, orbit_nodes: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidenceSpec {
    pub members: usize,
    pub windings: Vec<i64>,
    pub horizons: Vec<f64>,
    pub eps: f64,
    pub time_samples: usize,
}

impl Default for ResidenceSpec {
    fn default() -> Self {
        ResidenceSpec { members: 16, windings: vec![0, 1], horizons: vec![20.0, 200.0], eps: 1e-2, time_samples: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    pub forcing: Forcing,
    pub lattice: Lattice,
    pub integrator: IntegratorSpec,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub output: String,
    pub initial: InitialSpec,
    pub simulate: SimulateSpec,
    pub zero_audit: ZeroAuditSpec,
    pub measure: MeasureSpec,
    pub am: AmSpec,
    pub depin: DepinSpec,
    pub residence: ResidenceSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            potential: PotentialSpec::Standard { k: 1.0 },
            forcing: Forcing::dc(0.0),
            lattice: Lattice::default(),
            integrator: IntegratorSpec::default(),
            tolerances: Tolerances::default(),
            seed: 0,
            output: "out".into(),
            initial: InitialSpec::default(),
            simulate: SimulateSpec::default(),
            zero_audit: ZeroAuditSpec::default(),
            measure: MeasureSpec::default(),
            am: AmSpec::default(),
            depin: DepinSpec::default(),
            residence: ResidenceSpec::default(),
        }
    }
}

/// Keys that select an enum variant; changing one discards the sibling keys.
const TAGS: [&str; 2] = ["kind", "family"];

/// Overlay `top` onto `base` object by object. A section whose tag changes
/// is replaced rather than merged.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            let retagged = TAGS.iter().any(|k| matches!((b.get(*k), t.get(*k)), (Some(x), Some(y)) if x != y));
            if retagged {
                b.clear();
            }
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

/// Set `path` (dot separated) in `root` to `raw`, parsed as JSON when possible.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::config(assignment, "expected key=value"))?;
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(CliError::config(path, "empty key segment"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::config(segments[..i].join("."), "not an object"))?;
        if i + 1 == segments.len() {
            if TAGS.contains(seg) && obj.get(*seg).is_some_and(|old| *old != value) {
                obj.clear();
            }
            obj.insert(seg.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(seg.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split always yields a segment")
}

impl RunConfig {
    pub fn from_value(value: Value) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read `path` (or start from the defaults) and apply the overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut value = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::config("--config", format!("{}: {e}", p.display())))?;
            let file: Value = serde_json::from_str(&text).map_err(|e| CliError::config("--config", format!("{}: {e}", p.display())))?;
            if !file.is_object() {
                return Err(CliError::config("--config", "top level must be an object"));
            }
            merge(&mut value, file);
        }
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_value(value)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |key: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(CliError::config(key, format!("must be positive and finite, got {x}")))
            }
        };
        for (k, v) in self.tolerances.entries() {
            positive(&format!("tolerances.{k}"), v)?;
        }
        if self.lattice.n < 1 {
            return Err(CliError::config("lattice.n", "N must be at least 1"));
        }
        positive("integrator.dt", self.integrator.dt)?;
        positive("integrator.dt_out", self.integrator.dt_out)?;
        positive("integrator.horizon", self.integrator.horizon)?;
        if self.integrator.dt >= self.integrator.dt_out {
            return Err(CliError::config("integrator.dt", "dt must be smaller than dt_out"));
        }
        match &self.potential {
            PotentialSpec::Standard { k } if !k.is_finite() => return Err(CliError::config("potential.k", "must be finite")),
            PotentialSpec::Generalized { kappa, mixed, .. } => {
                positive("potential.kappa", *kappa)?;
                let delta = Interaction::twist_delta(&self.potential.build());
                if !(delta > 0.0) {
                    return Err(CliError::config("potential.mixed", format!("twist condition fails: kappa - 4 pi^2 |mixed| = {delta:.3e} with mixed = {mixed}")));
                }
            }
            _ => {}
        }
        match &self.forcing {
            Forcing::Dc { value } if !value.is_finite() => return Err(CliError::config("forcing.value", "must be finite")),
            Forcing::Ac { harmonics, .. } if harmonics.iter().any(|h| h.index == 0) => {
                return Err(CliError::config("forcing.harmonics", "harmonic indices start at 1"))
            }
            _ => {}
        }
        if let Some(u) = &self.initial.state {
            if u.len() != self.lattice.n {
                return Err(CliError::config("initial.state", format!("expected {} values, got {}", self.lattice.n, u.len())));
            }
        }
        if !(self.initial.amplitude >= 0.0) {
            return Err(CliError::config("initial.amplitude", "must be non-negative"));
        }
        positive("simulate.max_horizon", self.simulate.max_horizon)?;
        if self.simulate.orbit_nodes < 2 {
            return Err(CliError::config("simulate.orbit_nodes", "need at least 2 nodes"));
        }
        for (i, &(m, n)) in self.zero_audit.windows.iter().enumerate() {
            if n <= m {
                return Err(CliError::config(format!("zero_audit.windows[{i}]"), "window must satisfy m < n"));
            }
        }
        if self.measure.members == 0 {
            return Err(CliError::config("measure.members", "need at least one member"));
        }
        if self.measure.windings.is_empty() {
            return Err(CliError::config("measure.windings", "need at least one winding"));
        }
        if self.am.q == 0 {
            return Err(CliError::config("am.q", "q must be nonzero"));
        }
        if self.am.n_avg == 0 {
            return Err(CliError::config("am.n_avg", "must be positive"));
        }
        if self.depin.points == 0 {
            return Err(CliError::config("depin.points", "need at least one point"));
        }
        if !(self.depin.f_max >= self.depin.f_min) {
            return Err(CliError::config("depin.f_max", "must not be below f_min"));
        }
        if self.residence.members == 0 {
            return Err(CliError::config("residence.members", "need at least one member"));
        }
        if self.residence.windings.is_empty() {
            return Err(CliError::config("residence.windings", "need at least one winding"));
        }
        if self.residence.horizons.is_empty() {
            return Err(CliError::config("residence.horizons", "need at least one horizon"));
        }
        for (i, &s) in self.residence.horizons.iter().enumerate() {
            positive(&format!("residence.horizons[{i}]"), s)?;
        }
        positive("residence.eps", self.residence.eps)?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON of everything except the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.clear();
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_create_nested_keys() {
        let mut v = serde_json::json!({});
        apply_override(&mut v, "lattice.n=8").unwrap();
        apply_override(&mut v, "output=results").unwrap();
        let cfg = RunConfig::from_value(v).unwrap();
        assert_eq!(cfg.lattice.n, 8);
        assert_eq!(cfg.output, "results");
    }

    #[test]
    fn tagged_sections_merge_or_reset() {
        let mut v = serde_json::to_value(RunConfig::default()).unwrap();
        apply_override(&mut v, "forcing.value=0.7").unwrap();
        assert_eq!(RunConfig::from_value(v.clone()).unwrap().forcing, Forcing::dc(0.7));
        apply_override(&mut v, "forcing.kind=ac").unwrap();
        apply_override(&mut v, "forcing.mean=0.1").unwrap();
        apply_override(&mut v, "forcing.harmonics=[]").unwrap();
        assert_eq!(RunConfig::from_value(v).unwrap().forcing, Forcing::ac(0.1, vec![]));

        let mut base = serde_json::to_value(RunConfig::default()).unwrap();
        merge(&mut base, serde_json::json!({"potential": {"family": "generalized", "kappa": 2.0}}));
        let cfg = RunConfig::from_value(base).unwrap();
        assert_eq!(cfg.potential, PotentialSpec::Generalized { kappa: 2.0, site: vec![], mixed: 0.0 });
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::from_value(serde_json::json!({"lattice": {"nn": 3}})).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("lattice.nn"), "{err}");
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = RunConfig::default();
        let b = RunConfig { output: "elsewhere".into(), ..RunConfig::default() };
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig { seed: 1, ..RunConfig::default() };
        assert_ne!(a.hash(), c.hash());
    }
}
