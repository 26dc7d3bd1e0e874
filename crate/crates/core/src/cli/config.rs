//! Run configuration: a JSON file, then flags on top, resolved into one
//! explicit record that every report echoes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DomainGeometry;
use crate::harness::CertOpts;
use crate::kernel::KernelParams;
use crate::measure::{DensityFn, JumpFunctionalSpec, MeasureSpec};
use crate::models::{preset, PresetOverrides};
use crate::pipeline::{CompareSetup, SeriesSetup};

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<String>,
    pub d: Option<usize>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub c0: Option<f64>,
    /// Mass parameter of the relativistic preset.
    pub m: Option<f64>,
    pub geometry: Option<DomainGeometry>,
    pub mu: Option<MeasureSpec>,
    pub jump: Option<JumpFunctionalSpec>,
    /// Overrides every command-level seed.
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub kernel: KernelSection,
    pub kato: KatoSection,
    pub series: SeriesSetup,
    pub mc: McSection,
    pub certify: CertifySection,
    pub compare: CompareSetup,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("config at '{path}': {}", e.inner()))
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        ConfigFile::parse(&text)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KatoTarget {
    Measure,
    Jump,
    /// `N_{|mu|} + N_{|F|}`.
    Combined,
}

impl KatoTarget {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "measure" => Ok(KatoTarget::Measure),
            "jump" => Ok(KatoTarget::Jump),
            "combined" => Ok(KatoTarget::Combined),
            _ => Err(Error::Config(format!("unknown norm target '{s}'; expected measure, jump or combined"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KatoSection {
    /// Inferred from which of `mu`, `F` is nonzero when absent.
    pub target: Option<KatoTarget>,
    /// `4^{-k}`, `k <= levels`, when empty.
    pub times: Vec<f64>,
    pub levels: usize,
    /// Cheaper quadrature and no refinement cross-check.
    pub fast: bool,
}

impl Default for KatoSection {
    fn default() -> Self {
        KatoSection { target: None, times: vec![], levels: 8, fast: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub t: f64,
    /// Start point; the origin when empty.
    pub x: Vec<f64>,
    /// Bin range in the first coordinate; `x ± 6 t^{1/alpha}` when absent.
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub bins: usize,
    pub n_paths: usize,
    pub seed: u64,
    /// Jump cutoff `eps_factor t^{1/alpha}`.
    pub eps_factor: f64,
}

impl Default for McSection {
    fn default() -> Self {
        McSection { t: 0.1, x: vec![], lo: None, hi: None, bins: 20, n_paths: 100_000, seed: 7, eps_factor: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifySection {
    /// Inequality names, or `all`.
    pub ineqs: Vec<String>,
    pub n_samples: usize,
    pub seed: u64,
    pub t_min: f64,
    pub t_max: f64,
    pub refine_budget: usize,
    pub refine_starts: usize,
    pub probes: usize,
}

impl Default for CertifySection {
    fn default() -> Self {
        let o = CertOpts::new(100_000, 1);
        CertifySection {
            ineqs: vec!["clip-identity".into(), "clip-product".into(), "ratio-sandwich".into(), "q-sandwich".into(), "ppp".into()],
            n_samples: o.n_samples,
            seed: o.seed,
            t_min: o.t_min,
            t_max: o.t_max,
            refine_budget: o.refine_budget,
            refine_starts: o.refine_starts,
            probes: o.probes,
        }
    }
}

impl CertifySection {
    pub fn opts(&self) -> CertOpts {
        CertOpts {
            n_samples: self.n_samples,
            seed: self.seed,
            t_min: self.t_min,
            t_max: self.t_max,
            refine_budget: self.refine_budget,
            refine_starts: self.refine_starts,
            probes: self.probes,
            ..CertOpts::new(self.n_samples, self.seed)
        }
    }
}

/// The model shared by every command, after presets and overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub preset: Option<String>,
    pub m: Option<f64>,
    pub params: KernelParams,
    pub geometry: DomainGeometry,
    pub mu: MeasureSpec,
    pub jump: JumpFunctionalSpec,
}

/// Model-level values collected from the file and the flags, flags last.
#[derive(Debug, Clone, Default)]
pub struct ModelInput {
    pub preset: Option<String>,
    pub d: Option<usize>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub c0: Option<f64>,
    pub m: Option<f64>,
    pub geometry: Option<DomainGeometry>,
    pub mu: Option<MeasureSpec>,
    pub jump: Option<JumpFunctionalSpec>,
}

impl ModelInput {
    pub fn from_file(f: &ConfigFile) -> Self {
        ModelInput {
            preset: f.preset.clone(),
            d: f.d,
            alpha: f.alpha,
            gamma: f.gamma,
            c0: f.c0,
            m: f.m,
            geometry: f.geometry.clone(),
            mu: f.mu.clone(),
            jump: f.jump.clone(),
        }
    }

    pub fn resolve(&self) -> Result<Model> {
        let mut model = match &self.preset {
            Some(name) => {
                let ov = PresetOverrides { d: self.d, alpha: self.alpha, c0: self.c0, m: self.m };
                let p = preset(name, &ov)?;
                Model {
                    preset: Some(p.name),
                    m: (name == "relativistic").then(|| self.m.unwrap_or(1.0)),
                    params: p.params,
                    geometry: p.geometry,
                    mu: p.mu,
                    jump: p.jump,
                }
            }
            None => {
                let d = self.d.unwrap_or(1);
                let alpha = self.alpha.unwrap_or(1.0);
                let c0 = self.c0.unwrap_or(if d == 1 && alpha == 1.0 { 2.0 * std::f64::consts::PI } else { 10.0 });
                Model {
                    preset: None,
                    m: None,
                    params: KernelParams { d, alpha, gamma: 0.0, c0 },
                    geometry: DomainGeometry::WholeSpace,
                    mu: MeasureSpec::Zero,
                    jump: JumpFunctionalSpec::zero(),
                }
            }
        };
        if let Some(g) = self.gamma {
            model.params.gamma = g;
        }
        if let Some(g) = &self.geometry {
            model.geometry = g.clone();
        }
        if let Some(mu) = &self.mu {
            model.mu = mu.clone();
        }
        if let Some(f) = &self.jump {
            model.jump = f.clone();
        }
        model.params.validate()?;
        model.geometry.validate(model.params.d)?;
        model.mu.validate(model.params.d, &model.geometry)?;
        model.jump.validate()?;
        Ok(model)
    }
}

fn nums(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Config(format!("{what}: '{v}' is not a number"))))
        .collect()
}

fn json_or<T: for<'de> Deserialize<'de>>(s: &str, what: &str) -> Option<Result<T>> {
    s.trim_start().starts_with('{').then(|| {
        let de = &mut serde_json::Deserializer::from_str(s);
        serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Config(format!("{what} at '{}': {}", e.path(), e.inner())))
    })
}

/// `whole`, `half`, `ball:R`, `exterior:R`, `interval:a,b`,
/// `intervals:a,b;c,d`, or inline JSON. Balls are centered at the origin.
pub fn parse_geometry(s: &str, d: usize) -> Result<DomainGeometry> {
    if let Some(r) = json_or(s, "geometry") {
        return r;
    }
    let (head, rest) = s.split_once(':').unwrap_or((s, ""));
    let one = |what: &str| -> Result<f64> {
        let v = nums(rest, what)?;
        (v.len() == 1).then_some(v[0]).ok_or_else(|| Error::Config(format!("{what} takes one number")))
    };
    match head {
        "whole" | "whole-space" => Ok(DomainGeometry::WholeSpace),
        "half" | "half-space" => Ok(DomainGeometry::HalfSpace),
        "ball" => Ok(DomainGeometry::ball(vec![0.0; d], one("ball radius")?)),
        "exterior" => Ok(DomainGeometry::exterior(vec![0.0; d], one("exterior radius")?)),
        "interval" | "intervals" => {
            let iv = rest
                .split(';')
                .map(|p| {
                    let v = nums(p, "interval")?;
                    (v.len() == 2).then_some((v[0], v[1])).ok_or_else(|| Error::Config(format!("interval '{p}' needs two ends")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(DomainGeometry::intervals(iv))
        }
        _ => Err(Error::Config(format!("unknown geometry '{s}'"))),
    }
}

/// `zero`, `const:v`, `box:v:lo,hi` (first axis; other axes unbounded in
/// effect through a wide box), or inline JSON.
pub fn parse_mu(s: &str, d: usize) -> Result<MeasureSpec> {
    if let Some(r) = json_or(s, "mu") {
        return r;
    }
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["zero"] => Ok(MeasureSpec::Zero),
        ["const", v] => Ok(MeasureSpec::constant(nums(v, "mu")?[0])),
        ["box", v, range] => {
            let value = nums(v, "mu")?[0];
            let r = nums(range, "mu box")?;
            if r.len() != 2 {
                return Err(Error::Config("mu box needs lo,hi".into()));
            }
            let mut lo = vec![-1e6; d];
            let mut hi = vec![1e6; d];
            lo[0] = r[0];
            hi[0] = r[1];
            Ok(MeasureSpec::density(DensityFn::Box { value, lo, hi }))
        }
        _ => Err(Error::Config(format!("unknown measure '{s}'"))),
    }
}

/// `zero`, `power-cap:a,beta`, `const:v` or `const:v:cutoff`, or inline
/// JSON.
pub fn parse_jump(s: &str) -> Result<JumpFunctionalSpec> {
    if let Some(r) = json_or(s, "jump") {
        return r;
    }
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["zero"] => Ok(JumpFunctionalSpec::zero()),
        ["power-cap", ab] => {
            let v = nums(ab, "power-cap")?;
            if v.len() != 2 {
                return Err(Error::Config("power-cap needs a,beta".into()));
            }
            Ok(JumpFunctionalSpec::power_cap(v[0], v[1]))
        }
        ["const", v] => Ok(JumpFunctionalSpec::constant(nums(v, "jump")?[0], None)),
        ["const", v, c] => Ok(JumpFunctionalSpec::constant(nums(v, "jump")?[0], Some(nums(c, "cutoff")?[0]))),
        _ => Err(Error::Config(format!("unknown jump functional '{s}'"))),
    }
}

/// A point as comma-separated coordinates.
pub fn parse_point(s: &str, d: usize) -> Result<Vec<f64>> {
    let v = nums(s, "point")?;
    if v.len() != d {
        return Err(Error::Config(format!("point '{s}' has {} coordinates, expected {d}", v.len())));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_field_names_its_path() {
        let e = ConfigFile::parse(r#"{"series": {"nx": 11, "bogus": 1}}"#).unwrap_err();
        assert!(e.to_string().contains("series"), "{e}");
        let e = ConfigFile::parse(r#"{"mc": {"t": "soon"}}"#).unwrap_err();
        assert!(e.to_string().contains("mc.t"), "{e}");
    }

    #[test]
    fn shorthand_geometries() {
        assert_eq!(parse_geometry("half", 1).unwrap(), DomainGeometry::HalfSpace);
        assert_eq!(parse_geometry("intervals:-2,-0.5;0.5,2", 1).unwrap(), DomainGeometry::intervals(vec![(-2.0, -0.5), (0.5, 2.0)]));
        assert_eq!(parse_geometry("ball:2", 2).unwrap(), DomainGeometry::ball(vec![0.0, 0.0], 2.0));
        assert_eq!(parse_geometry(r#"{"shape": "half-space"}"#, 1).unwrap(), DomainGeometry::HalfSpace);
        assert!(parse_geometry("torus", 1).is_err());
    }

    #[test]
    fn preset_then_overrides() {
        let m = ModelInput { preset: Some("killed-stable".into()), alpha: Some(1.5), ..Default::default() }.resolve().unwrap();
        assert_eq!(m.params.gamma, 0.75);
        let m = ModelInput { preset: Some("killed-stable".into()), gamma: Some(0.0), ..Default::default() }.resolve().unwrap();
        assert_eq!(m.params.gamma, 0.0);
        assert!(ModelInput { preset: Some("nope".into()), ..Default::default() }.resolve().is_err());
    }
}
