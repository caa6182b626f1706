//! Fixed-step RK4 co-simulation of a plant and its reduced-order observer.
//!
//! Plant and observer are integrated as one coupled system with state
//! `[x; z]`, so the observer sees `y = C x` at exactly the stage points the
//! plant uses.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::observer::{estimate_state, Plant, RealVector, ReducedObserver};

/// Guard for `decay_ratio` when the initial error is exactly zero.
pub const DECAY_RATIO_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub enum InputSignal {
    Zero,
    Constant(RealVector),
    /// `amplitude * sin(frequency * t + phase)`, frequency in rad/s.
    Sinusoid {
        amplitude: RealVector,
        frequency: f64,
        phase: f64,
    },
}

impl InputSignal {
    pub fn eval(&self, t: f64, inputs: usize) -> RealVector {
        match self {
            InputSignal::Zero => RealVector::zeros(inputs),
            InputSignal::Constant(u) => u.clone(),
            InputSignal::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t + phase).sin(),
        }
    }

    fn width(&self) -> Option<usize> {
        match self {
            InputSignal::Zero => None,
            InputSignal::Constant(u) => Some(u.len()),
            InputSignal::Sinusoid { amplitude, .. } => Some(amplitude.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub t_final: f64,
    pub dt: f64,
    pub input: InputSignal,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            t_final: 10.0,
            dt: 1e-3,
            input: InputSignal::Zero,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<usize> {
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.dt > self.t_final {
            return Err(Error::InvalidConfig(format!(
                "dt = {} exceeds t_final = {}",
                self.dt, self.t_final
            )));
        }
        let steps = (self.t_final / self.dt).round() as usize;
        Ok(steps.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    pub x: Vec<RealVector>,
    pub z: Vec<RealVector>,
    /// `z - T x`, recomputed at every sample.
    pub e: Vec<RealVector>,
    pub xhat: Vec<RealVector>,
    pub e_norm: Vec<f64>,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    pub final_error_norm: f64,
    pub decay_ratio: f64,
    pub estimate_final_error: f64,
}

pub fn simulate(
    plant: &Plant,
    obs: &ReducedObserver,
    x0: &RealVector,
    z0: &RealVector,
    cfg: &SimulationConfig,
) -> Result<SimulationTrace> {
    obs.check_compatible(plant)?;
    let steps = cfg.validate()?;
    let (n, r, m) = (plant.states(), obs.order(), plant.inputs());
    if x0.len() != n || z0.len() != r {
        return Err(Error::DimensionMismatch(format!(
            "initial state lengths x0={} z0={}, expected {n} and {r}",
            x0.len(),
            z0.len()
        )));
    }
    if let Some(w) = cfg.input.width() {
        if w != m {
            return Err(Error::DimensionMismatch(format!(
                "input signal has width {w}, plant has {m} inputs"
            )));
        }
    }

    let h = cfg.t_final / steps as f64;
    let gc = &obs.g * plant.c();
    let rhs = |t: f64, x: &RealVector, z: &RealVector| -> (RealVector, RealVector) {
        let u = cfg.input.eval(t, m);
        let dx = plant.a() * x + plant.b() * &u;
        let dz = &obs.f * z + &gc * x + &obs.p * &u;
        (dx, dz)
    };

    let mut trace = SimulationTrace {
        times: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        z: Vec::with_capacity(steps + 1),
        e: Vec::with_capacity(steps + 1),
        xhat: Vec::with_capacity(steps + 1),
        e_norm: Vec::with_capacity(steps + 1),
    };
    let mut record = |t: f64, x: &RealVector, z: &RealVector| -> Result<()> {
        let e = z - &obs.t * x;
        let xhat = estimate_state(obs, &(plant.c() * x), z)?;
        trace.times.push(t);
        trace.e_norm.push(e.norm());
        trace.x.push(x.clone());
        trace.z.push(z.clone());
        trace.e.push(e);
        trace.xhat.push(xhat);
        Ok(())
    };

    let mut x = x0.clone();
    let mut z = z0.clone();
    record(0.0, &x, &z)?;
    for i in 0..steps {
        let t = i as f64 * h;
        let (k1x, k1z) = rhs(t, &x, &z);
        let (k2x, k2z) = rhs(
            t + 0.5 * h,
            &(&x + &k1x * (0.5 * h)),
            &(&z + &k1z * (0.5 * h)),
        );
        let (k3x, k3z) = rhs(
            t + 0.5 * h,
            &(&x + &k2x * (0.5 * h)),
            &(&z + &k2z * (0.5 * h)),
        );
        let (k4x, k4z) = rhs(t + h, &(&x + &k3x * h), &(&z + &k3z * h));
        x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
        z += (k1z + k2z * 2.0 + k3z * 2.0 + k4z) * (h / 6.0);
        record((i + 1) as f64 * h, &x, &z)?;
    }
    Ok(trace)
}

pub fn error_metrics(trace: &SimulationTrace) -> Result<ErrorMetrics> {
    let (Some(first), Some(last)) = (trace.e_norm.first(), trace.e_norm.last()) else {
        return Err(Error::EmptyTrace);
    };
    let (Some(x), Some(xhat)) = (trace.x.last(), trace.xhat.last()) else {
        return Err(Error::EmptyTrace);
    };
    Ok(ErrorMetrics {
        final_error_norm: *last,
        decay_ratio: last / first.max(DECAY_RATIO_FLOOR),
        estimate_final_error: (xhat - x).norm(),
    })
}

/// Writes `t, x_1..x_n, z_1..z_r, e_1..e_r, xhat_1..xhat_n, e_norm` with 17
/// significant digits per value.
pub fn write_trace_csv<W: Write>(trace: &SimulationTrace, mut out: W) -> io::Result<()> {
    let n = trace.x.first().map_or(0, |v| v.len());
    let r = trace.z.first().map_or(0, |v| v.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=r).map(|i| format!("z_{i}")));
    header.extend((1..=r).map(|i| format!("e_{i}")));
    header.extend((1..=n).map(|i| format!("xhat_{i}")));
    header.push("e_norm".into());
    writeln!(out, "{}", header.join(","))?;

    for i in 0..trace.len() {
        let row: Vec<String> = std::iter::once(trace.times[i])
            .chain(trace.x[i].iter().copied())
            .chain(trace.z[i].iter().copied())
            .chain(trace.e[i].iter().copied())
            .chain(trace.xhat[i].iter().copied())
            .chain(std::iter::once(trace.e_norm[i]))
            .map(|v| format!("{v:.16e}"))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{matrix, RealMatrix};
    use crate::observer::synthesize_observer;
    use crate::stabilize::PoleSet;
    use crate::tolerance::Tolerances;

    fn setup() -> (Plant, ReducedObserver) {
        let t = Tolerances::default();
        let plant = Plant::new(
            matrix(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap(),
            matrix(2, 1, &[0.0, 1.0]).unwrap(),
            matrix(1, 2, &[1.0, 0.0]).unwrap(),
            &t,
        )
        .unwrap();
        let obs = synthesize_observer(&plant, Some(&PoleSet::real(&[-1.0])), &t).unwrap();
        (plant, obs)
    }

    fn v(data: &[f64]) -> RealVector {
        RealVector::from_column_slice(data)
    }

    #[test]
    fn config_validation() {
        let bad = |t_final: f64, dt: f64| SimulationConfig {
            t_final,
            dt,
            input: InputSignal::Zero,
        };
        assert!(bad(0.0, 0.1).validate().is_err());
        assert!(bad(1.0, -0.1).validate().is_err());
        assert!(bad(1.0, 2.0).validate().is_err());
        assert!(bad(1.0, f64::NAN).validate().is_err());
        assert_eq!(bad(1.0, 1e-3).validate().unwrap(), 1000);
        assert_eq!(bad(1.0, 0.3).validate().unwrap(), 3);
    }

    #[test]
    fn zero_initial_error_stays_zero() {
        let (plant, obs) = setup();
        let x0 = v(&[1.0, -2.0]);
        let z0 = &obs.t * &x0;
        let cfg = SimulationConfig {
            t_final: 2.0,
            dt: 1e-2,
            input: InputSignal::Sinusoid {
                amplitude: v(&[1.0]),
                frequency: 3.0,
                phase: 0.2,
            },
        };
        let trace = simulate(&plant, &obs, &x0, &z0, &cfg).unwrap();
        assert_eq!(trace.len(), 201);
        let bound = 1e-9 * (1.0 + x0.norm());
        assert!(trace.e_norm.iter().all(|&e| e <= bound));
        let metrics = error_metrics(&trace).unwrap();
        assert!(metrics.final_error_norm <= 1e-9);
        assert!(metrics.decay_ratio.is_finite());
    }

    #[test]
    fn scalar_error_follows_exponential() {
        let (plant, obs) = setup();
        let cfg = SimulationConfig {
            t_final: 1.0,
            ..SimulationConfig::default()
        };
        let trace = simulate(&plant, &obs, &v(&[0.0, 0.0]), &v(&[1.0]), &cfg).unwrap();
        let metrics = error_metrics(&trace).unwrap();
        assert!((metrics.final_error_norm - (-1f64).exp()).abs() < 1e-6);
        assert!((metrics.decay_ratio - (-1f64).exp()).abs() < 1e-6);
        assert!(metrics.estimate_final_error <= 2.0 * metrics.final_error_norm);
    }

    #[test]
    fn recorded_error_and_estimate_are_recomputed() {
        let (plant, obs) = setup();
        let cfg = SimulationConfig {
            t_final: 0.5,
            dt: 0.05,
            input: InputSignal::Constant(v(&[0.3])),
        };
        let trace = simulate(&plant, &obs, &v(&[1.0, 1.0]), &v(&[0.0]), &cfg).unwrap();
        for i in 0..trace.len() {
            assert_eq!(trace.e[i], &trace.z[i] - &obs.t * &trace.x[i]);
            let xhat = estimate_state(&obs, &(plant.c() * &trace.x[i]), &trace.z[i]).unwrap();
            assert_eq!(trace.xhat[i], xhat);
        }
    }

    #[test]
    fn dimension_errors() {
        let (plant, obs) = setup();
        let cfg = SimulationConfig::default();
        assert!(matches!(
            simulate(&plant, &obs, &v(&[0.0]), &v(&[0.0]), &cfg),
            Err(Error::DimensionMismatch(_))
        ));
        let wide = SimulationConfig {
            input: InputSignal::Constant(v(&[1.0, 2.0])),
            ..SimulationConfig::default()
        };
        assert!(matches!(
            simulate(&plant, &obs, &v(&[0.0, 0.0]), &v(&[0.0]), &wide),
            Err(Error::DimensionMismatch(_))
        ));
        let mut other = obs.clone();
        other.t = RealMatrix::zeros(1, 3);
        assert!(simulate(&plant, &other, &v(&[0.0, 0.0]), &v(&[0.0]), &cfg).is_err());
    }

    #[test]
    fn empty_trace_has_no_metrics() {
        let trace = SimulationTrace {
            times: vec![],
            x: vec![],
            z: vec![],
            e: vec![],
            xhat: vec![],
            e_norm: vec![],
        };
        assert_eq!(error_metrics(&trace), Err(Error::EmptyTrace));
    }

    #[test]
    fn csv_layout() {
        let (plant, obs) = setup();
        let cfg = SimulationConfig {
            t_final: 0.2,
            dt: 0.1,
            input: InputSignal::Zero,
        };
        let trace = simulate(&plant, &obs, &v(&[1.0, 0.0]), &v(&[0.0]), &cfg).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x_1,x_2,z_1,e_1,xhat_1,xhat_2,e_norm");
        assert_eq!(lines.len(), 4);
        let first: Vec<f64> = lines[1].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(first.len(), 8);
        assert_eq!(first[0], 0.0);
        // e(0) = 0 - T x0 = 1
        assert_eq!(first[4], 1.0);
        let last: Vec<f64> = lines[3].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(last[7], trace.e_norm[2]);
    }
}
