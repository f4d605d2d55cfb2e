//! The chaotic feature map: every scalar predictor seeds one attractor
//! trajectory, and the recorded states become features.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attractor::{integrate_into, AttractorSpec, IntegrationConfig, State3};
use crate::error::{Error, Result};

/// Maps a scalar `v` to the initial condition `(v, y0, z_factor * v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    #[serde(default = "default_y0")]
    pub y0: f64,
    #[serde(default = "default_z_factor")]
    pub z_factor: f64,
}

fn default_y0() -> f64 {
    1.05
}

fn default_z_factor() -> f64 {
    -1.0
}

impl Default for Encoding {
    fn default() -> Self {
        Encoding {
            y0: default_y0(),
            z_factor: default_z_factor(),
        }
    }
}

impl Encoding {
    pub fn encode(&self, v: f64) -> State3 {
        State3::new(v, self.y0, self.z_factor * v)
    }
}

/// `(v, 1.05, -v)`.
pub fn encode_initial(v: f64) -> State3 {
    Encoding::default().encode(v)
}

/// States indexed by (sample, variable, iteration, axis).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTensor {
    n_samples: usize,
    n_vars: usize,
    n_steps: usize,
    values: Vec<f64>,
    pub spec: AttractorSpec,
    pub integration: IntegrationConfig,
    pub encoding: Encoding,
}

impl TrajectoryTensor {
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.n_samples, self.n_vars, self.n_steps, 3)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn offset(&self, sample: usize, var: usize, step: usize) -> usize {
        ((sample * self.n_vars + var) * self.n_steps + step) * 3
    }

    pub fn state(&self, sample: usize, var: usize, step: usize) -> State3 {
        let o = self.offset(sample, var, step);
        State3::new(self.values[o], self.values[o + 1], self.values[o + 2])
    }

    /// Rebuilds a tensor from per-iteration feature slices (the inverse of
    /// [`slice_iteration`] over all iterations).
    pub fn from_slices(slices: &[FeatureMatrix], spec: AttractorSpec, integration: IntegrationConfig, encoding: Encoding) -> Result<Self> {
        let n_steps = slices.len();
        let first = slices.first().ok_or_else(|| Error::invalid("no slices"))?;
        let n_samples = first.values.nrows();
        if first.values.ncols() % 3 != 0 {
            return Err(Error::invalid("slice width is not a multiple of 3"));
        }
        let n_vars = first.values.ncols() / 3;
        let mut values = vec![0.0; n_samples * n_vars * n_steps * 3];
        for (k, s) in slices.iter().enumerate() {
            if s.values.shape() != (n_samples, n_vars * 3) {
                return Err(Error::invalid("slices differ in shape"));
            }
            for i in 0..n_samples {
                for j in 0..n_vars {
                    let o = ((i * n_vars + j) * n_steps + k) * 3;
                    for a in 0..3 {
                        values[o + a] = s.values[(i, 3 * j + a)];
                    }
                }
            }
        }
        Ok(TrajectoryTensor {
            n_samples,
            n_vars,
            n_steps,
            values,
            spec,
            integration,
            encoding,
        })
    }
}

/// One iteration's features: samples x (3 * vars * transformers).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: DMatrix<f64>,
    /// 0-based iteration index.
    pub iteration: usize,
    pub specs: Vec<AttractorSpec>,
}

pub fn transform(x: &DMatrix<f64>, spec: &AttractorSpec, cfg: &IntegrationConfig) -> Result<TrajectoryTensor> {
    transform_with(x, spec, cfg, &Encoding::default())
}

/// Integrates every (sample, variable) pair independently. Samples are
/// processed in parallel; the output layout does not depend on scheduling.
pub fn transform_with(
    x: &DMatrix<f64>,
    spec: &AttractorSpec,
    cfg: &IntegrationConfig,
    encoding: &Encoding,
) -> Result<TrajectoryTensor> {
    transform_flow(x, spec, cfg, encoding, |v| encoding.encode(v), |u| spec.field(u))
}

/// Shared driver: `init` maps a predictor to a starting state and `field`
/// is the vector field actually integrated. `spec` and `encoding` are only
/// recorded in the output.
pub(crate) fn transform_flow<I, F>(
    x: &DMatrix<f64>,
    spec: &AttractorSpec,
    cfg: &IntegrationConfig,
    encoding: &Encoding,
    init: I,
    field: F,
) -> Result<TrajectoryTensor>
where
    I: Fn(f64) -> State3 + Sync,
    F: Fn(State3) -> State3 + Sync,
{
    let (n_samples, n_vars) = x.shape();
    let n_steps = cfg.n_steps;
    let block = n_vars * n_steps * 3;
    let mut values = vec![0.0; n_samples * block];
    if block > 0 {
        // Collect per-sample outcomes so the reported failure is always the
        // lowest (sample, variable), independent of scheduling.
        let outcomes: Vec<Result<()>> = values
            .par_chunks_mut(block)
            .enumerate()
            .map(|(i, out)| -> Result<()> {
                for j in 0..n_vars {
                    let start = init(x[(i, j)]);
                    let base = j * n_steps * 3;
                    let mut k = 0;
                    integrate_into(&field, start, cfg, |s| {
                        out[base + 3 * k] = s.x;
                        out[base + 3 * k + 1] = s.y;
                        out[base + 3 * k + 2] = s.z;
                        k += 1;
                    })
                    .map_err(|e| match e {
                        Error::Diverged { step } => Error::TransformDiverged {
                            sample: i,
                            variable: j,
                            step,
                        },
                        Error::NonFiniteState => Error::TransformDiverged {
                            sample: i,
                            variable: j,
                            step: 0,
                        },
                        other => other,
                    })?;
                }
                Ok(())
            })
            .collect();
        outcomes.into_iter().collect::<Result<()>>()?;
    }
    Ok(TrajectoryTensor {
        n_samples,
        n_vars,
        n_steps,
        values,
        spec: *spec,
        integration: *cfg,
        encoding: *encoding,
    })
}

/// Row `i` is the concatenation over variables of (x, y, z) at iteration `k`.
pub fn slice_iteration(t: &TrajectoryTensor, k: usize) -> Result<FeatureMatrix> {
    if k >= t.n_steps {
        return Err(Error::OutOfRange {
            index: k,
            len: t.n_steps,
        });
    }
    let values = DMatrix::from_fn(t.n_samples, 3 * t.n_vars, |i, c| {
        let (j, a) = (c / 3, c % 3);
        t.values[t.offset(i, j, k) + a]
    });
    Ok(FeatureMatrix {
        values,
        iteration: k,
        specs: vec![t.spec],
    })
}

/// Horizontal concatenation of several transformers' slices at the same
/// iteration.
pub fn stack_slices(tensors: &[TrajectoryTensor], k: usize) -> Result<FeatureMatrix> {
    let first = tensors.first().ok_or_else(|| Error::invalid("no tensors to slice"))?;
    if tensors.len() == 1 {
        return slice_iteration(first, k);
    }
    let parts: Vec<FeatureMatrix> = tensors.iter().map(|t| slice_iteration(t, k)).collect::<Result<_>>()?;
    let n = first.n_samples;
    if parts.iter().any(|p| p.values.nrows() != n) {
        return Err(Error::invalid("tensors disagree on sample count"));
    }
    let width: usize = parts.iter().map(|p| p.values.ncols()).sum();
    let mut values = DMatrix::zeros(n, width);
    let mut col = 0;
    for p in &parts {
        values.columns_mut(col, p.values.ncols()).copy_from(&p.values);
        col += p.values.ncols();
    }
    Ok(FeatureMatrix {
        values,
        iteration: k,
        specs: tensors.iter().map(|t| t.spec).collect(),
    })
}

/// Two parallel transformers of the same flow with different coefficients,
/// sliced at the same iteration and concatenated.
pub fn dual_transform(
    x: &DMatrix<f64>,
    spec_a: &AttractorSpec,
    spec_b: &AttractorSpec,
    cfg: &IntegrationConfig,
    k: usize,
) -> Result<FeatureMatrix> {
    if spec_a.kind() != spec_b.kind() {
        return Err(Error::InvalidSpec(format!(
            "dual transformers must share a flow ({} vs {})",
            spec_a.kind(),
            spec_b.kind()
        )));
    }
    let a = transform(x, spec_a, cfg)?;
    let b = transform(x, spec_b, cfg)?;
    stack_slices(&[a, b], k)
}

/// Features at iteration `k` without materializing the whole tensor.
pub fn transform_slice(x: &DMatrix<f64>, spec: &AttractorSpec, cfg: &IntegrationConfig, k: usize) -> Result<FeatureMatrix> {
    if k >= cfg.n_steps {
        return Err(Error::OutOfRange {
            index: k,
            len: cfg.n_steps,
        });
    }
    let upto = IntegrationConfig::new(cfg.dt, k + 1)?;
    let t = transform(x, spec, &upto)?;
    let mut fm = slice_iteration(&t, k)?;
    fm.specs = vec![*spec];
    Ok(fm)
}

const TENSOR_MAGIC: &[u8; 8] = b"CHAOSTT1";

#[derive(Serialize, Deserialize)]
struct TensorHeader {
    n_samples: usize,
    n_vars: usize,
    n_steps: usize,
    dt: f64,
    spec: AttractorSpec,
    encoding: Encoding,
}

/// Binary layout: 8-byte magic `CHAOSTT1`, u32 little-endian header length,
/// JSON header (dims, dt, spec, encoding), then the values as little-endian
/// f64 in (sample, variable, iteration, axis) order.
pub fn write_tensor<W: Write>(t: &TrajectoryTensor, mut w: W) -> Result<()> {
    let header = serde_json::to_vec(&TensorHeader {
        n_samples: t.n_samples,
        n_vars: t.n_vars,
        n_steps: t.n_steps,
        dt: t.integration.dt,
        spec: t.spec,
        encoding: t.encoding,
    })?;
    w.write_all(TENSOR_MAGIC)?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(t.values.len() * 8);
    for v in &t.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<TrajectoryTensor> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != TENSOR_MAGIC {
        return Err(Error::parse(0, "not a trajectory tensor file"));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_le_bytes(len) as usize;
    let mut header = vec![0u8; len];
    r.read_exact(&mut header)?;
    let h: TensorHeader = serde_json::from_slice(&header).map_err(|e| Error::parse(12, e.to_string()))?;
    let count = h.n_samples * h.n_vars * h.n_steps * 3;
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    let data_offset = (12 + len) as u64;
    if raw.len() != count * 8 {
        return Err(Error::parse(
            data_offset,
            format!("payload has {} bytes, header implies {}", raw.len(), count * 8),
        ));
    }
    let values: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::parse(data_offset, "non-finite tensor entry"));
    }
    Ok(TrajectoryTensor {
        n_samples: h.n_samples,
        n_vars: h.n_vars,
        n_steps: h.n_steps,
        values,
        spec: h.spec,
        integration: IntegrationConfig::new(h.dt, h.n_steps)?,
        encoding: h.encoding,
    })
}

pub fn save_tensor(t: &TrajectoryTensor, path: impl AsRef<Path>) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_tensor(t, f)
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<TrajectoryTensor> {
    read_tensor(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// CSV with a header `v{j}_{axis}` and one row per sample.
pub fn write_slice_csv<W: Write>(fm: &FeatureMatrix, mut w: W) -> Result<()> {
    let vars = fm.values.ncols() / 3;
    let header: Vec<String> = (0..vars)
        .flat_map(|j| ["x", "y", "z"].into_iter().map(move |a| format!("v{j}_{a}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for row in fm.values.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attractor::rk4_step;

    fn lorenz97() -> AttractorSpec {
        AttractorSpec::lorenz_rho(97.0).unwrap()
    }

    #[test]
    fn encoding_examples() {
        assert_eq!(encode_initial(0.0), State3::new(0.0, 1.05, 0.0));
        assert_eq!(encode_initial(2.0), State3::new(2.0, 1.05, -2.0));
        assert_eq!(encode_initial(-1.3), State3::new(-1.3, 1.05, 1.3));
    }

    #[test]
    fn tensor_shape_and_entries() {
        let x = DMatrix::from_row_slice(3, 2, &[0.1, -0.4, 1.2, 0.0, -2.0, 0.7]);
        let cfg = IntegrationConfig::new(1e-2, 20).unwrap();
        let t = transform(&x, &lorenz97(), &cfg).unwrap();
        assert_eq!(t.dims(), (3, 2, 20, 3));
        let direct = crate::attractor::integrate(&lorenz97(), encode_initial(0.7), &cfg).unwrap();
        for k in 0..20 {
            assert_eq!(t.state(2, 1, k), direct[k]);
        }
    }

    #[test]
    fn zero_input_leaves_the_origin_plane() {
        // (0, 1.05, 0) is not an equilibrium: one RK4 step moves x and z.
        let x = DMatrix::from_element(1, 1, 0.0);
        let t = transform(&x, &lorenz97(), &IntegrationConfig::default()).unwrap();
        let first = t.state(0, 0, 0);
        assert_eq!(first, rk4_step(&lorenz97(), State3::new(0.0, 1.05, 0.0), 1e-2).unwrap());
        assert_ne!(first, encode_initial(0.0));
        assert!(first.x > 0.0);
    }

    #[test]
    fn identical_rows_give_identical_slices() {
        let x = DMatrix::from_row_slice(2, 2, &[0.3, -1.1, 0.3, -1.1]);
        let t = transform(&x, &lorenz97(), &IntegrationConfig::default()).unwrap();
        let s = slice_iteration(&t, 57).unwrap();
        assert_eq!(s.values.row(0), s.values.row(1));
    }

    #[test]
    fn slicing_widths_and_inverse() {
        let x = DMatrix::from_fn(5, 4, |i, j| (i as f64 - 2.0) * 0.3 + j as f64 * 0.1);
        let cfg = IntegrationConfig::new(1e-2, 12).unwrap();
        let t = transform(&x, &lorenz97(), &cfg).unwrap();
        let slices: Vec<FeatureMatrix> = (0..12).map(|k| slice_iteration(&t, k).unwrap()).collect();
        assert_eq!(slices[0].values.ncols(), 12);
        let back = TrajectoryTensor::from_slices(&slices, t.spec, t.integration, t.encoding).unwrap();
        assert_eq!(back, t);
        assert!(matches!(slice_iteration(&t, 12), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn dual_transform_halves() {
        let x = DMatrix::from_fn(4, 1, |i, _| i as f64 * 0.5 - 1.0);
        let cfg = IntegrationConfig::default();
        let same = dual_transform(&x, &lorenz97(), &lorenz97(), &cfg, 30).unwrap();
        assert_eq!(same.values.ncols(), 6);
        assert_eq!(same.values.columns(0, 3), same.values.columns(3, 3));
        let other = AttractorSpec::lorenz_rho(28.0).unwrap();
        let mixed = dual_transform(&x, &lorenz97(), &other, &cfg, 30).unwrap();
        assert_ne!(mixed.values.columns(0, 3), mixed.values.columns(3, 3));
        let rossler = AttractorSpec::default_for(crate::AttractorKind::Rossler);
        assert!(dual_transform(&x, &lorenz97(), &rossler, &cfg, 30).is_err());
    }

    #[test]
    fn streamed_slice_matches_materialized() {
        let x = DMatrix::from_fn(6, 2, |i, j| ((i + j) as f64).sin());
        let cfg = IntegrationConfig::default();
        let t = transform(&x, &lorenz97(), &cfg).unwrap();
        assert_eq!(transform_slice(&x, &lorenz97(), &cfg, 41).unwrap(), slice_iteration(&t, 41).unwrap());
    }

    #[test]
    fn divergence_names_sample_variable_step() {
        let spec = AttractorSpec::lorenz(10.0, 8.0 / 3.0, 1e9).unwrap();
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 0.0, 5.0, 1.0, 1.0]);
        let cfg = IntegrationConfig::new(0.1, 50).unwrap();
        for _ in 0..5 {
            let err = transform(&x, &spec, &cfg).unwrap_err();
            assert!(matches!(err, Error::TransformDiverged { sample: 0, variable: 0, .. }), "{err}");
        }
    }

    #[test]
    fn tensor_binary_round_trip() {
        let x = DMatrix::from_fn(3, 2, |i, j| i as f64 * 0.2 - j as f64 * 0.3);
        let t = transform(&x, &lorenz97(), &IntegrationConfig::new(1e-2, 7).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_tensor(&t, &mut buf).unwrap();
        assert_eq!(read_tensor(&buf[..]).unwrap(), t);
        let truncated = &buf[..buf.len() - 8];
        assert!(matches!(read_tensor(truncated), Err(Error::Parse { .. })));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_tensor(&bad[..]).is_err());
    }

    #[test]
    fn slice_csv_layout() {
        let x = DMatrix::from_fn(2, 2, |i, j| (i + j) as f64 * 0.1);
        let t = transform(&x, &lorenz97(), &IntegrationConfig::new(1e-2, 3).unwrap()).unwrap();
        let mut out = Vec::new();
        write_slice_csv(&slice_iteration(&t, 2).unwrap(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "v0_x,v0_y,v0_z,v1_x,v1_y,v1_z");
        assert_eq!(lines.count(), 2);
    }
}
