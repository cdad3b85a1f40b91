//! Line-oriented `key = value` configuration with `[domain]`,
//! `[coefficients]`, `[cone]`, and `[solver]` sections. Flags layered on
//! top by the CLI override individual keys.

use std::collections::BTreeMap;

use crate::decomp::norm;
use crate::error::{Error, Result};
use crate::field::{AlphaDescriptor, BDescriptor, CoefficientPair, Cone, Domain};
use crate::maxmin::{InnerOptions, OuterOptions};

/// Fully resolved run configuration (concrete `f64`, the CLI scalar type).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dimension: usize,
    pub half_width: f64,
    pub nodes: usize,

    pub a_inf: f64,
    pub a0: f64,
    pub alpha: AlphaDescriptor<f64>,
    pub b: BDescriptor<f64>,
    pub p: f64,
    pub q: f64,

    pub eta: f64,
    pub cone: Cone<f64>,
    pub cone_c: f64,
    pub zeta: [f64; 2],
    pub d: f64,

    pub seed: u64,
    pub energy_tol: f64,
    pub residual_tol: f64,
    pub max_sweeps: usize,
    pub submerged_iters: usize,
    pub emerging_steps: usize,
    pub ray_starts: usize,
    pub random_starts: usize,
    pub eval_budget: usize,
    pub flat_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dimension: 2,
            half_width: 12.0,
            nodes: 129,
            a_inf: 1.0,
            a0: 1.0,
            alpha: AlphaDescriptor::Zero,
            b: BDescriptor::Zero,
            p: 3.0,
            q: 2.0,
            eta: 0.5,
            cone: Cone::Full,
            cone_c: 1.0,
            zeta: [1.0, 0.0],
            d: 0.5,
            seed: 7,
            energy_tol: 1e-9,
            residual_tol: 1e-6,
            max_sweeps: 200,
            submerged_iters: 160,
            emerging_steps: 40,
            ray_starts: 3,
            random_starts: 2,
            eval_budget: 60,
            flat_tol: 0.02,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let sections = parse_sections(text)?;
        cfg.apply_sections(&sections)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_sections(&mut self, sections: &BTreeMap<String, BTreeMap<String, String>>) -> Result<()> {
        if let Some(dom) = sections.get("domain") {
            set_usize(dom, "dimension", &mut self.dimension)?;
            set_f64(dom, "half_width", &mut self.half_width)?;
            set_usize(dom, "nodes", &mut self.nodes)?;
        }
        if let Some(co) = sections.get("coefficients") {
            set_f64(co, "a_inf", &mut self.a_inf)?;
            set_f64(co, "p", &mut self.p)?;
            set_f64(co, "q", &mut self.q)?;
            if let Some(kind) = co.get("alpha") {
                self.alpha = match kind.as_str() {
                    "zero" => AlphaDescriptor::Zero,
                    "exponential" => AlphaDescriptor::Exponential {
                        c: get_f64(co, "alpha_c")?,
                        kappa: get_f64(co, "alpha_kappa")?,
                    },
                    "indicator_well" => AlphaDescriptor::IndicatorWell {
                        depth: get_f64(co, "alpha_depth")?,
                        radius: get_f64(co, "alpha_radius")?,
                    },
                    other => return Err(Error::Config(format!("unknown alpha family: {other}"))),
                };
            }
            if let Some(kind) = co.get("b") {
                self.b = match kind.as_str() {
                    "zero" => BDescriptor::Zero,
                    "rational" => BDescriptor::Rational {
                        amplitude: get_f64(co, "b_amplitude")?,
                        power: get_f64(co, "b_power")?,
                    },
                    "exponential" => BDescriptor::Exponential {
                        amplitude: get_f64(co, "b_amplitude")?,
                        kappa: get_f64(co, "b_kappa")?,
                    },
                    "compact" => BDescriptor::CompactTent {
                        amplitude: get_f64(co, "b_amplitude")?,
                        radius: get_f64(co, "b_radius")?,
                    },
                    other => return Err(Error::Config(format!("unknown b family: {other}"))),
                };
            }
            // declared infimum defaults to the value at the deepest point of
            // the radial families
            self.a0 = self.a_inf - self.alpha.eval(0.0);
            set_f64(co, "a0", &mut self.a0)?;
        }
        if let Some(cone) = sections.get("cone") {
            set_f64(cone, "eta", &mut self.eta)?;
            set_f64(cone, "c", &mut self.cone_c)?;
            set_f64(cone, "d", &mut self.d)?;
            let full = cone.get("full").map(|v| v == "true").unwrap_or(true);
            if full {
                self.cone = Cone::Full;
            } else {
                self.cone = Cone::Angular {
                    lo: get_f64(cone, "theta_lo")?,
                    hi: get_f64(cone, "theta_hi")?,
                };
            }
            if let Some(z) = cone.get("zeta") {
                let parts: Vec<&str> = z.split(',').collect();
                if parts.len() != 2 {
                    return Err(Error::Config("zeta must be 'x,y'".into()));
                }
                self.zeta = [
                    parts[0].trim().parse().map_err(|_| Error::Config("bad zeta".into()))?,
                    parts[1].trim().parse().map_err(|_| Error::Config("bad zeta".into()))?,
                ];
            }
        }
        if let Some(sv) = sections.get("solver") {
            set_u64(sv, "seed", &mut self.seed)?;
            set_f64(sv, "energy_tol", &mut self.energy_tol)?;
            set_f64(sv, "residual_tol", &mut self.residual_tol)?;
            set_usize(sv, "max_sweeps", &mut self.max_sweeps)?;
            set_usize(sv, "submerged_iters", &mut self.submerged_iters)?;
            set_usize(sv, "emerging_steps", &mut self.emerging_steps)?;
            set_usize(sv, "ray_starts", &mut self.ray_starts)?;
            set_usize(sv, "random_starts", &mut self.random_starts)?;
            set_usize(sv, "eval_budget", &mut self.eval_budget)?;
            set_f64(sv, "flat_tol", &mut self.flat_tol)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 1.0 && self.p > self.q) {
            return Err(Error::Config(format!(
                "exponents must satisfy 1 < q < p, got q = {}, p = {}",
                self.q, self.p
            )));
        }
        if self.dimension != 1 && self.dimension != 2 {
            return Err(Error::Config("dimension must be 1 or 2".into()));
        }
        // no Sobolev-critical guard is needed for N <= 2
        let zn = norm(self.zeta);
        if zn == 0.0 {
            return Err(Error::Config("zeta must be nonzero".into()));
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain<f64>> {
        Domain::new(self.dimension, self.half_width, self.nodes)
    }

    pub fn pair(&self) -> CoefficientPair<f64> {
        let zn = norm(self.zeta);
        CoefficientPair {
            a_inf: self.a_inf,
            alpha: self.alpha,
            b: self.b,
            a0: self.a0,
            eta: self.eta,
            cone: self.cone,
            cone_c: self.cone_c,
            zeta: [self.zeta[0] / zn, self.zeta[1] / zn],
            d: self.d,
        }
    }

    pub fn inner_options(&self) -> InnerOptions<f64> {
        InnerOptions {
            energy_tol: self.energy_tol,
            residual_tol: self.residual_tol,
            max_sweeps: self.max_sweeps,
            submerged_iters: self.submerged_iters,
            emerging_steps: self.emerging_steps,
        }
    }

    pub fn outer_options(&self) -> OuterOptions<f64> {
        OuterOptions {
            ray_starts: self.ray_starts,
            random_starts: self.random_starts,
            seed: self.seed,
            eval_budget: self.eval_budget,
            flat_tol: self.flat_tol,
            inner: self.inner_options(),
        }
    }

    /// Key/value echo of the resolved configuration, for the audit trail in
    /// result records.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut kv = vec![
            ("dimension".into(), self.dimension.to_string()),
            ("half_width".into(), self.half_width.to_string()),
            ("nodes".into(), self.nodes.to_string()),
            ("a_inf".into(), self.a_inf.to_string()),
            ("a0".into(), self.a0.to_string()),
            ("alpha".into(), format!("{:?}", self.alpha)),
            ("b".into(), format!("{:?}", self.b)),
            ("p".into(), self.p.to_string()),
            ("q".into(), self.q.to_string()),
            ("eta".into(), self.eta.to_string()),
            ("cone".into(), format!("{:?}", self.cone)),
            ("cone_c".into(), self.cone_c.to_string()),
            ("zeta".into(), format!("{},{}", self.zeta[0], self.zeta[1])),
            ("d".into(), self.d.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("energy_tol".into(), self.energy_tol.to_string()),
            ("residual_tol".into(), self.residual_tol.to_string()),
            ("max_sweeps".into(), self.max_sweeps.to_string()),
            ("submerged_iters".into(), self.submerged_iters.to_string()),
            ("emerging_steps".into(), self.emerging_steps.to_string()),
            ("ray_starts".into(), self.ray_starts.to_string()),
            ("random_starts".into(), self.random_starts.to_string()),
            ("eval_budget".into(), self.eval_budget.to_string()),
            ("flat_tol".into(), self.flat_tol.to_string()),
        ];
        kv.sort();
        kv
    }
}

fn parse_sections(text: &str) -> Result<BTreeMap<String, BTreeMap<String, String>>> {
    let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut current = String::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(Error::Config(format!("line {}: malformed section header", line_no + 1)));
            }
            current = line[1..line.len() - 1].trim().to_lowercase();
            sections.entry(current.clone()).or_default();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected key = value", line_no + 1)));
        };
        if current.is_empty() {
            return Err(Error::Config(format!("line {}: key outside any section", line_no + 1)));
        }
        sections
            .get_mut(&current)
            .unwrap()
            .insert(key.trim().to_lowercase(), value.trim().to_string());
    }
    Ok(sections)
}

fn get_f64(map: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    map.get(key)
        .ok_or_else(|| Error::Config(format!("missing key: {key}")))?
        .parse()
        .map_err(|_| Error::Config(format!("bad number for key: {key}")))
}

fn set_f64(map: &BTreeMap<String, String>, key: &str, out: &mut f64) -> Result<()> {
    if let Some(v) = map.get(key) {
        *out = v.parse().map_err(|_| Error::Config(format!("bad number for key: {key}")))?;
    }
    Ok(())
}

fn set_usize(map: &BTreeMap<String, String>, key: &str, out: &mut usize) -> Result<()> {
    if let Some(v) = map.get(key) {
        *out = v.parse().map_err(|_| Error::Config(format!("bad integer for key: {key}")))?;
    }
    Ok(())
}

fn set_u64(map: &BTreeMap<String, String>, key: &str, out: &mut u64) -> Result<()> {
    if let Some(v) = map.get(key) {
        *out = v.parse().map_err(|_| Error::Config(format!("bad integer for key: {key}")))?;
    }
    Ok(())
}
