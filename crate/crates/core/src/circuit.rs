//! Behavioral model of the analog Lorenz computer: resistor values set ρ and
//! β, node voltages follow the scaled flow, and the power budget is the
//! sum of per-component maxima.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::attractor::{integrate_into, AttractorSpec, IntegrationConfig, State3};
use crate::error::{Error, Result};
use crate::transform::{transform_flow, Encoding, TrajectoryTensor};

/// Gain-setting resistance numerator for ρ and β (1 MΩ).
pub const GAIN_OHMS: f64 = 1e6;
pub const MULTIPLIER_MW: f64 = 108.0;
pub const OPAMP_MW: f64 = 45.0;

pub const DEFAULT_R9: f64 = 33_000.0;
/// Chosen so that R9 = 33 kΩ gives ρ = 28 exactly.
pub const DEFAULT_R8: f64 = GAIN_OHMS / 28.0 - DEFAULT_R9;
/// R4 + R5 = 375 kΩ gives β = 8/3.
pub const DEFAULT_R4: f64 = 187_500.0;
pub const DEFAULT_R5: f64 = 187_500.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CircuitConfig {
    pub r4: f64,
    pub r5: f64,
    pub r8: f64,
    pub r9: f64,
    /// σ is fixed by the integrator stage, not by a tunable resistor.
    pub sigma: f64,
    /// Seconds per recorded circuit step.
    pub dt: f64,
    pub n_steps: usize,
    /// Dimensionless flow time advanced per circuit step.
    pub tau_per_step: f64,
    /// Volts per dimensionless unit.
    pub voltage_scale: f64,
    pub n_multipliers: u32,
    pub n_opamps: u32,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        CircuitConfig {
            r4: DEFAULT_R4,
            r5: DEFAULT_R5,
            r8: DEFAULT_R8,
            r9: DEFAULT_R9,
            sigma: 10.0,
            dt: 1e-5,
            n_steps: 1000,
            tau_per_step: 1e-2,
            voltage_scale: 1.0,
            n_multipliers: 2,
            n_opamps: 3,
        }
    }
}

impl CircuitConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("R4", self.r4), ("R5", self.r5), ("R8", self.r8), ("R9", self.r9)] {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be a positive resistance, got {r}")));
            }
        }
        for (name, v) in [
            ("dt", self.dt),
            ("tau_per_step", self.tau_per_step),
            ("voltage_scale", self.voltage_scale),
            ("sigma", self.sigma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidConfig("n_steps must be positive".into()));
        }
        Ok(())
    }

    /// Sets R9 for the requested ρ, keeping R8.
    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        self.r9 = rho_to_r9(rho, self.r8)?;
        Ok(self)
    }

    /// Integrator RC constant implied by the time alignment.
    pub fn time_constant(&self) -> f64 {
        self.dt / self.tau_per_step
    }

    pub fn spec(&self) -> Result<AttractorSpec> {
        let (rho, beta) = resistors_to_params(self)?;
        AttractorSpec::lorenz(self.sigma, beta, rho)
    }

    pub fn integration(&self) -> Result<IntegrationConfig> {
        IntegrationConfig::new(self.tau_per_step, self.n_steps)
    }
}

/// `(ρ, β) = (1 MΩ / (R8 + R9), 1 MΩ / (R4 + R5))`.
pub fn resistors_to_params(cfg: &CircuitConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    Ok((GAIN_OHMS / (cfg.r8 + cfg.r9), GAIN_OHMS / (cfg.r4 + cfg.r5)))
}

pub fn rho_to_r9(rho: f64, r8: f64) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) || !(r8 > 0.0 && r8.is_finite()) {
        return Err(Error::InvalidConfig(format!("need rho > 0 and R8 > 0, got {rho}, {r8}")));
    }
    let r9 = GAIN_OHMS / rho - r8;
    if r9 <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "rho {rho} needs R8 + R9 = {:.1} Ω, below R8 = {r8:.1} Ω",
            GAIN_OHMS / rho
        )));
    }
    Ok(r9)
}

fn voltage_field(spec: AttractorSpec, scale: f64) -> impl Fn(State3) -> State3 + Sync {
    let inv = 1.0 / scale;
    move |v: State3| spec.field(v * inv) * scale
}

/// Node voltages after each circuit step (the initial state is not
/// included).
pub fn simulate_circuit(cfg: &CircuitConfig, init_voltages: State3) -> Result<Vec<State3>> {
    let spec = cfg.spec()?;
    let steps = cfg.integration()?;
    let mut out = Vec::with_capacity(cfg.n_steps);
    integrate_into(voltage_field(spec, cfg.voltage_scale), init_voltages, &steps, |s| out.push(s))?;
    Ok(out)
}

/// The chaotic transform run on the circuit model: predictors are encoded,
/// scaled to volts, and the recorded node voltages become features.
pub fn circuit_transform(x: &DMatrix<f64>, cfg: &CircuitConfig, encoding: &Encoding) -> Result<TrajectoryTensor> {
    let spec = cfg.spec()?;
    let steps = cfg.integration()?;
    let scale = cfg.voltage_scale;
    transform_flow(x, &spec, &steps, encoding, |v| encoding.encode(v) * scale, voltage_field(spec, scale))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentPower {
    pub component: String,
    pub count: u32,
    pub unit_mw: f64,
    pub total_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub components: Vec<ComponentPower>,
    pub total_mw: f64,
    pub note: String,
}

pub fn power_estimate(cfg: &CircuitConfig) -> PowerReport {
    let components = vec![
        ComponentPower {
            component: "analog multiplier".into(),
            count: cfg.n_multipliers,
            unit_mw: MULTIPLIER_MW,
            total_mw: cfg.n_multipliers as f64 * MULTIPLIER_MW,
        },
        ComponentPower {
            component: "quad op-amp".into(),
            count: cfg.n_opamps,
            unit_mw: OPAMP_MW,
            total_mw: cfg.n_opamps as f64 * OPAMP_MW,
        },
    ];
    PowerReport {
        total_mw: components.iter().map(|c| c.total_mw).sum(),
        components,
        note: "Upper bound from maximum supply ratings; during oscillation the parts draw less.".into(),
    }
}
