//! Chaotic flows and the fixed-step fourth-order Runge-Kutta integrator.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Any component beyond this magnitude is treated as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttractorKind {
    Lorenz,
    Rossler,
    Chen,
    Chua,
    BurkeShaw,
    Sprott,
}

impl AttractorKind {
    pub const ALL: [AttractorKind; 6] = [
        AttractorKind::Lorenz,
        AttractorKind::Rossler,
        AttractorKind::Chen,
        AttractorKind::Chua,
        AttractorKind::BurkeShaw,
        AttractorKind::Sprott,
    ];

    /// Coefficient names in storage order.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            AttractorKind::Lorenz => &["sigma", "beta", "rho"],
            AttractorKind::Rossler | AttractorKind::Chen => &["a", "b", "c"],
            AttractorKind::Chua => &["a", "b", "c", "d"],
            AttractorKind::BurkeShaw | AttractorKind::Sprott => &["a", "b"],
        }
    }

    /// Benchmark coefficients for each flow (Chen uses its canonical set).
    pub fn default_params(self) -> &'static [f64] {
        match self {
            AttractorKind::Lorenz => &[10.0, 8.0 / 3.0, 28.0],
            AttractorKind::Rossler => &[0.2, 0.2, 5.7],
            // The tabulated (60, 2.667, 97) is unbounded in this form.
            AttractorKind::Chen => &[35.0, 3.0, 28.0],
            AttractorKind::Chua => &[9.0, 100.0 / 7.0, 8.0 / 7.0, 5.0 / 7.0],
            AttractorKind::BurkeShaw => &[10.0, 4.272],
            AttractorKind::Sprott => &[2.07, 1.79],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AttractorKind::Lorenz => "lorenz",
            AttractorKind::Rossler => "rossler",
            AttractorKind::Chen => "chen",
            AttractorKind::Chua => "chua",
            AttractorKind::BurkeShaw => "burke_shaw",
            AttractorKind::Sprott => "sprott",
        }
    }
}

impl fmt::Display for AttractorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A chaotic flow together with its coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NamedSpec", into = "NamedSpec")]
pub struct AttractorSpec {
    kind: AttractorKind,
    params: [f64; 4],
}

#[derive(Serialize, Deserialize)]
struct NamedSpec {
    kind: AttractorKind,
    params: BTreeMap<String, f64>,
}

impl TryFrom<NamedSpec> for AttractorSpec {
    type Error = Error;

    fn try_from(n: NamedSpec) -> Result<Self> {
        let named: Vec<(&str, f64)> = n.params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        AttractorSpec::from_named(n.kind, &named)
    }
}

impl From<AttractorSpec> for NamedSpec {
    fn from(s: AttractorSpec) -> Self {
        NamedSpec {
            kind: s.kind,
            params: s
                .kind
                .param_names()
                .iter()
                .zip(s.params())
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        }
    }
}

impl AttractorSpec {
    /// Builds a spec from named coefficients. Every name the flow needs must
    /// appear exactly once and nothing else may appear.
    pub fn from_named(kind: AttractorKind, named: &[(&str, f64)]) -> Result<Self> {
        let names = kind.param_names();
        let mut params = [0.0; 4];
        let mut seen = [false; 4];
        for &(name, value) in named {
            let idx = names.iter().position(|n| *n == name).ok_or_else(|| {
                Error::InvalidSpec(format!("unknown parameter `{name}` for {kind}"))
            })?;
            if seen[idx] {
                return Err(Error::InvalidSpec(format!("duplicate parameter `{name}`")));
            }
            if !value.is_finite() {
                return Err(Error::InvalidSpec(format!("parameter `{name}` is not finite")));
            }
            seen[idx] = true;
            params[idx] = value;
        }
        if let Some(missing) = names.iter().zip(seen).find(|(_, s)| !s) {
            return Err(Error::InvalidSpec(format!(
                "missing parameter `{}` for {kind}",
                missing.0
            )));
        }
        Ok(AttractorSpec { kind, params })
    }

    pub fn lorenz(sigma: f64, beta: f64, rho: f64) -> Result<Self> {
        Self::from_named(
            AttractorKind::Lorenz,
            &[("sigma", sigma), ("beta", beta), ("rho", rho)],
        )
    }

    /// Lorenz with sigma = 10, beta = 8/3 and the given rho.
    pub fn lorenz_rho(rho: f64) -> Result<Self> {
        Self::lorenz(10.0, 8.0 / 3.0, rho)
    }

    pub fn default_for(kind: AttractorKind) -> Self {
        let mut params = [0.0; 4];
        let d = kind.default_params();
        params[..d.len()].copy_from_slice(d);
        AttractorSpec { kind, params }
    }

    pub fn kind(&self) -> AttractorKind {
        self.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params[..self.kind.param_names().len()]
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.kind
            .param_names()
            .iter()
            .position(|n| *n == name)
            .map(|i| self.params[i])
    }

    /// Returns a copy with one coefficient replaced.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let idx = self
            .kind
            .param_names()
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| {
                Error::InvalidSpec(format!("unknown parameter `{name}` for {}", self.kind))
            })?;
        if !value.is_finite() {
            return Err(Error::InvalidSpec(format!("parameter `{name}` is not finite")));
        }
        let mut out = *self;
        out.params[idx] = value;
        Ok(out)
    }

    /// Vector field without input checks; used on the integrator hot path.
    #[inline]
    pub(crate) fn field(&self, s: State3) -> State3 {
        let p = &self.params;
        let State3 { x, y, z } = s;
        match self.kind {
            AttractorKind::Lorenz => {
                let (sigma, beta, rho) = (p[0], p[1], p[2]);
                State3::new(-sigma * x + sigma * y, -x * z + rho * x - y, x * y - beta * z)
            }
            AttractorKind::Rossler => {
                let (a, b, c) = (p[0], p[1], p[2]);
                State3::new(-y - z, x + a * y, b + z * (x - c))
            }
            AttractorKind::Chen => {
                let (a, b, c) = (p[0], p[1], p[2]);
                State3::new(a * (y - x), (c - a) * x - x * z + c * y, x * y - b * z)
            }
            AttractorKind::Chua => {
                let (a, b) = (p[0], p[1]);
                let (m0, m1) = (-p[2], -p[3]);
                let diode = m1 * x + 0.5 * (m0 - m1) * ((x + 1.0).abs() - (x - 1.0).abs());
                State3::new(a * (y - x - diode), x - y + z, -b * y)
            }
            AttractorKind::BurkeShaw => {
                let (a, b) = (p[0], p[1]);
                State3::new(-a * (x + y), -y - a * x * z, a * x * y + b)
            }
            AttractorKind::Sprott => {
                let (a, b) = (p[0], p[1]);
                State3::new(y + a * x * y + x * z, 1.0 - b * x * x + y * z, x - x * x - y * y)
            }
        }
    }
}

impl fmt::Display for AttractorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.kind)?;
        for (i, (n, v)) in self.kind.param_names().iter().zip(self.params()).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{n}={v}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl State3 {
    pub const ZERO: State3 = State3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        State3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for State3 {
    type Output = State3;
    #[inline]
    fn add(self, o: State3) -> State3 {
        State3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for State3 {
    type Output = State3;
    #[inline]
    fn sub(self, o: State3) -> State3 {
        State3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for State3 {
    type Output = State3;
    #[inline]
    fn mul(self, k: f64) -> State3 {
        State3::new(self.x * k, self.y * k, self.z * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntegration")]
pub struct IntegrationConfig {
    pub dt: f64,
    pub n_steps: usize,
}

#[derive(Deserialize)]
struct RawIntegration {
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_steps")]
    n_steps: usize,
}

fn default_dt() -> f64 {
    1e-2
}

fn default_steps() -> usize {
    100
}

impl TryFrom<RawIntegration> for IntegrationConfig {
    type Error = Error;
    fn try_from(r: RawIntegration) -> Result<Self> {
        IntegrationConfig::new(r.dt, r.n_steps)
    }
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig {
            dt: default_dt(),
            n_steps: default_steps(),
        }
    }
}

impl IntegrationConfig {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidConfig("n_steps must be at least 1".into()));
        }
        Ok(IntegrationConfig { dt, n_steps })
    }
}

/// Time derivative of the flow at `s`.
pub fn derivative(spec: &AttractorSpec, s: State3) -> Result<State3> {
    if !s.is_finite() {
        return Err(Error::NonFiniteState);
    }
    Ok(spec.field(s))
}

/// One classical RK4 step of an arbitrary autonomous field.
#[inline]
pub fn rk4_step_with<F: Fn(State3) -> State3>(field: F, s: State3, dt: f64) -> State3 {
    let k1 = field(s);
    let k2 = field(s + k1 * (0.5 * dt));
    let k3 = field(s + k2 * (0.5 * dt));
    let k4 = field(s + k3 * dt);
    s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

#[inline]
fn diverged(s: &State3) -> bool {
    !s.is_finite() || s.max_abs() > DIVERGENCE_THRESHOLD
}

pub fn rk4_step(spec: &AttractorSpec, s: State3, dt: f64) -> Result<State3> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    if !s.is_finite() {
        return Err(Error::NonFiniteState);
    }
    let next = rk4_step_with(|u| spec.field(u), s, dt);
    if diverged(&next) {
        return Err(Error::Diverged { step: 0 });
    }
    Ok(next)
}

/// Runs `n_steps` RK4 steps and records every state after each step; the
/// initial state is not part of the output.
pub fn integrate(spec: &AttractorSpec, init: State3, cfg: &IntegrationConfig) -> Result<Vec<State3>> {
    let mut out = Vec::with_capacity(cfg.n_steps);
    integrate_into(|u| spec.field(u), init, cfg, |s| out.push(s))?;
    Ok(out)
}

/// Streams the trajectory of an arbitrary field into `sink`.
pub(crate) fn integrate_into<F, S>(field: F, init: State3, cfg: &IntegrationConfig, mut sink: S) -> Result<()>
where
    F: Fn(State3) -> State3,
    S: FnMut(State3),
{
    if !init.is_finite() {
        return Err(Error::NonFiniteState);
    }
    let mut s = init;
    for step in 0..cfg.n_steps {
        s = rk4_step_with(&field, s, cfg.dt);
        if diverged(&s) {
            return Err(Error::Diverged { step });
        }
        sink(s);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn classic() -> AttractorSpec {
        AttractorSpec::lorenz_rho(28.0).unwrap()
    }

    #[test]
    fn lorenz_derivative_examples() {
        assert_eq!(derivative(&classic(), State3::ZERO).unwrap(), State3::ZERO);

        let d = derivative(&classic(), State3::new(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(d.x, 0.0);
        assert_eq!(d.y, 26.0);
        assert_relative_eq!(d.z, -5.0 / 3.0, epsilon = 1e-15);

        // Substitution by hand: (-10*2 + 10*1.05, -(2*-2) + 97*2 - 1.05, 2*1.05 + (8/3)*2).
        let spec = AttractorSpec::lorenz_rho(97.0).unwrap();
        let d = derivative(&spec, State3::new(2.0, 1.05, -2.0)).unwrap();
        assert_relative_eq!(d.x, -9.5, epsilon = 1e-12);
        assert_relative_eq!(d.y, 196.95, epsilon = 1e-12);
        assert_relative_eq!(d.z, 2.1 + 16.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(d.z, 7.433_333_333_333_333, epsilon = 1e-12);
    }

    #[test]
    fn derivative_rejects_non_finite() {
        let err = derivative(&classic(), State3::new(f64::NAN, 0.0, 0.0)).unwrap_err();
        assert_eq!(err.to_string(), "non-finite state");
    }

    #[test]
    fn spec_construction_validates_names() {
        assert!(AttractorSpec::from_named(AttractorKind::Lorenz, &[("sigma", 10.0), ("beta", 2.0)]).is_err());
        assert!(AttractorSpec::from_named(
            AttractorKind::Lorenz,
            &[("sigma", 10.0), ("beta", 2.0), ("rho", 28.0), ("a", 1.0)]
        )
        .is_err());
        assert!(AttractorSpec::from_named(
            AttractorKind::Lorenz,
            &[("sigma", 10.0), ("beta", 2.0), ("rho", f64::INFINITY)]
        )
        .is_err());
        assert!(AttractorSpec::from_named(
            AttractorKind::Lorenz,
            &[("sigma", 10.0), ("sigma", 10.0), ("rho", 28.0)]
        )
        .is_err());
        let s = AttractorSpec::from_named(
            AttractorKind::Lorenz,
            &[("rho", 28.0), ("beta", 2.0), ("sigma", 10.0)],
        )
        .unwrap();
        assert_eq!(s.params(), &[10.0, 2.0, 28.0]);
    }

    #[test]
    fn spec_serde_uses_named_params() {
        let s = AttractorSpec::lorenz_rho(97.0).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"rho\":97.0"));
        let back: AttractorSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"kind":"lorenz","params":{"sigma":10.0,"rho":28.0}}"#;
        assert!(serde_json::from_str::<AttractorSpec>(bad).is_err());
    }

    #[test]
    fn rk4_preserves_fixed_point() {
        assert_eq!(rk4_step(&classic(), State3::ZERO, 0.01).unwrap(), State3::ZERO);
        let traj = integrate(&classic(), State3::ZERO, &IntegrationConfig::default()).unwrap();
        assert_eq!(traj.len(), 100);
        assert!(traj.iter().all(|s| *s == State3::ZERO));
        // Nontrivial equilibrium C+ = (sqrt(beta(rho-1)), same, rho-1) with beta = 8/3 exactly
        // representable choice: beta=2, rho=3 gives (2, 2, 2).
        let spec = AttractorSpec::lorenz(10.0, 2.0, 3.0).unwrap();
        let c = State3::new(2.0, 2.0, 2.0);
        assert_eq!(derivative(&spec, c).unwrap(), State3::ZERO);
        assert_eq!(rk4_step(&spec, c, 0.01).unwrap(), c);
    }

    #[test]
    fn rk4_scalar_decay_by_hand() {
        // dx/dt = -x, dt = 0.1: 1 - h + h^2/2 - h^3/6 + h^4/24.
        let s = rk4_step_with(|u| State3::new(-u.x, 0.0, 0.0), State3::new(1.0, 0.0, 0.0), 0.1);
        assert_relative_eq!(s.x, 0.904_837_5, epsilon = 1e-12);
        assert_eq!((s.y, s.z), (0.0, 0.0));
    }

    #[test]
    fn rk4_halving_step_cuts_error_sixteenfold() {
        let field = |u: State3| State3::new(-u.x, 0.0, 0.0);
        let err = |h: f64| {
            let n = (1.0 / h).round() as usize;
            let mut s = State3::new(1.0, 0.0, 0.0);
            for _ in 0..n {
                s = rk4_step_with(field, s, h);
            }
            (s.x - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn rk4_step_rejects_bad_dt() {
        assert!(rk4_step(&classic(), State3::ZERO, 0.0).is_err());
        assert!(rk4_step(&classic(), State3::ZERO, -1.0).is_err());
    }

    #[test]
    fn integrate_excludes_init_and_has_prefix_property() {
        let init = State3::new(1.0, 1.05, -1.0);
        let long = integrate(&classic(), init, &IntegrationConfig::new(1e-2, 100).unwrap()).unwrap();
        let short = integrate(&classic(), init, &IntegrationConfig::new(1e-2, 50).unwrap()).unwrap();
        assert_eq!(long[49], short[49]);
        assert_eq!(long[0], rk4_step(&classic(), init, 1e-2).unwrap());
        assert_ne!(long[0], init);
    }

    #[test]
    fn integrate_reports_divergence_step() {
        // Lorenz with huge rho blows past the threshold quickly from a large start.
        let spec = AttractorSpec::lorenz(10.0, 8.0 / 3.0, 1e9).unwrap();
        let err = integrate(&spec, State3::new(10.0, 10.0, 10.0), &IntegrationConfig::new(0.1, 100).unwrap())
            .unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err}");
    }

    #[test]
    fn integration_config_validates() {
        assert!(IntegrationConfig::new(0.0, 10).is_err());
        assert!(IntegrationConfig::new(0.01, 0).is_err());
        let c: IntegrationConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, IntegrationConfig::default());
        assert!(serde_json::from_str::<IntegrationConfig>(r#"{"dt": -1.0}"#).is_err());
    }

    #[test]
    fn all_flows_stay_bounded_from_table_defaults() {
        for kind in AttractorKind::ALL {
            let spec = AttractorSpec::default_for(kind);
            let init = State3::new(0.5, 1.05, -0.5);
            let traj = integrate(&spec, init, &IntegrationConfig::new(1e-2, 500).unwrap());
            assert!(traj.is_ok(), "{kind} diverged: {:?}", traj.err());
        }
    }

    #[test]
    fn tabulated_chen_coefficients_diverge() {
        let spec = AttractorSpec::from_named(AttractorKind::Chen, &[("a", 60.0), ("b", 2.667), ("c", 97.0)]).unwrap();
        let res = integrate(&spec, State3::new(0.5, 1.05, -0.5), &IntegrationConfig::new(1e-2, 500).unwrap());
        assert!(matches!(res, Err(Error::Diverged { .. })));
    }
}
