//! Explicit integration of the negative gradient flow
//! `d a^{0,1}/dt = −∂̄_A^* F^{0,2}_A`.
//!
//! The state stays in the band representable on the base grid; the vector
//! field is the gradient projected onto that band, which is the gradient of
//! the functional restricted to it, so accepted steps descend.

use std::fmt;

use crate::connection::Connection;
use crate::error::{Error, Result};
use crate::field::C64;
use crate::forms::FormPQ;
use crate::calculus::dbar_star_capped;
use crate::geometry::TorusGeometry;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub dt0: f64,
    pub safety: f64,
    pub max_steps: usize,
    pub stop_grad: f64,
    pub stop_energy: f64,
    /// Snapshot every this many accepted steps; 0 disables.
    pub snapshot_every: usize,
}

impl FlowConfig {
    /// `dt0 = safety · (L/(πN))²`, the explicit stability scale of a
    /// second-order operator at the grid's highest resolved wavenumber.
    pub fn for_geometry(geom: &TorusGeometry, safety: f64) -> Self {
        let n = *geom.dims().iter().max().expect("at least one axis") as f64;
        let h = geom.period() / (std::f64::consts::PI * n);
        Self { dt0: safety * h * h, safety, max_steps: 200, stop_grad: 1e-12, stop_energy: 0.0, snapshot_every: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt0 > 0.0 && self.dt0.is_finite()) {
            return Err(Error::Config(format!("dt0 must be positive, got {}", self.dt0)));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::Config(format!("safety must lie in (0, 1], got {}", self.safety)));
        }
        if !(self.stop_grad >= 0.0) || !(self.stop_energy >= 0.0) {
            return Err(Error::Config("stopping thresholds must be non-negative".into()));
        }
        Ok(())
    }

    /// Steps below this size end the run.
    pub fn dt_floor(&self) -> f64 {
        self.dt0 * 2f64.powi(-20)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub energy: f64,
    pub grad_norm: f64,
    pub f02_norm: f64,
    pub f11_norm: f64,
    pub accepted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    MaxSteps,
    GradientBelowThreshold,
    EnergyBelowThreshold,
    StepUnderflow,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MaxSteps => "maximum steps reached",
            Self::GradientBelowThreshold => "gradient below threshold",
            Self::EnergyBelowThreshold => "energy below threshold",
            Self::StepUnderflow => "step size underflow",
        })
    }
}

/// Row 0 is the initial state; later rows are attempted steps.
#[derive(Clone, Debug, Default)]
pub struct FlowTrace {
    pub records: Vec<TraceRecord>,
    /// Trace rows at which a snapshot was taken.
    pub snapshots: Vec<usize>,
}

impl FlowTrace {
    pub fn accepted(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.accepted)
    }

    /// `t` strictly increasing and energy non-increasing over accepted rows.
    pub fn is_monotone(&self) -> bool {
        let acc: Vec<&TraceRecord> = self.accepted().collect();
        acc.windows(2).all(|w| w[1].t > w[0].t && w[1].energy <= w[0].energy)
    }
}

#[derive(Clone, Debug)]
pub struct FlowRun {
    pub trace: FlowTrace,
    pub final_state: Connection,
    pub termination: Termination,
    pub snapshots: Vec<(usize, Connection)>,
}

fn velocity(a: &Connection, f02: &FormPQ) -> FormPQ {
    dbar_star_capped(a, f02, &a.geom().base_band()).scale_re(-1.0)
}

fn rk4(a: &Connection, k1: &FormPQ, dt: f64) -> Result<Connection> {
    let a0 = a.a01();
    let at = |k: &FormPQ, h: f64| a.with_a01(a0.axpy(C64::new(h, 0.0), k));
    let eval = |b: Connection| velocity(&b, &b.f02());
    let k2 = eval(at(k1, 0.5 * dt)?);
    let k3 = eval(at(&k2, 0.5 * dt)?);
    let k4 = eval(at(&k3, dt)?);
    let incr = k1.add(&k2.scale_re(2.0)).add(&k3.scale_re(2.0)).add(&k4);
    let next = a0.axpy(C64::new(dt / 6.0, 0.0), &incr);
    if !next.is_finite() {
        return Err(Error::BlowUp { step: 0 });
    }
    a.with_a01(next)
}

/// One classical RK4 step of `d a^{0,1}/dt = −(projected gradient)`.
/// Non-finite output is a blow-up error.
pub fn step(a: &Connection, dt: f64) -> Result<Connection> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("step size must be positive, got {dt}")));
    }
    rk4(a, &velocity(a, &a.f02()), dt)
}

/// State carried between steps so that nothing is evaluated twice.
struct Current {
    a: Connection,
    energy: f64,
    velocity: FormPQ,
}

impl Current {
    fn new(a: Connection) -> Self {
        let f02 = a.f02();
        Self::with_f02(a, f02)
    }

    fn with_f02(a: Connection, f02: FormPQ) -> Self {
        Self { energy: 0.5 * f02.norm_sq(), velocity: velocity(&a, &f02), a }
    }

    fn record(&self, step: usize, t: f64, dt: f64) -> TraceRecord {
        TraceRecord {
            step,
            t,
            dt,
            energy: self.energy,
            grad_norm: self.velocity.norm(),
            f02_norm: (2.0 * self.energy).sqrt(),
            f11_norm: self.a.f11().norm(),
            accepted: true,
        }
    }
}

/// Adaptive run: a step that raises the energy (or blows up) is rejected
/// and `dt` halved; after 10 consecutive accepts `dt` grows by 1.25, never
/// past `dt0`.
pub fn run(a0: &Connection, cfg: &FlowConfig) -> Result<FlowRun> {
    cfg.validate()?;
    let mut cur = Current::new(a0.clone());
    let mut t = 0.0;
    let mut dt = cfg.dt0;
    let mut trace = FlowTrace::default();
    let mut snapshots = Vec::new();
    trace.records.push(cur.record(0, t, 0.0));
    let stop = |r: &TraceRecord| {
        if r.grad_norm <= cfg.stop_grad {
            Some(Termination::GradientBelowThreshold)
        } else if r.energy <= cfg.stop_energy {
            Some(Termination::EnergyBelowThreshold)
        } else {
            None
        }
    };
    let finish = |trace, cur: Current, termination, snapshots| {
        Ok(FlowRun { trace, final_state: cur.a, termination, snapshots })
    };
    if let Some(reason) = stop(&trace.records[0]) {
        return finish(trace, cur, reason, snapshots);
    }
    let mut streak = 0;
    let mut accepted_count = 0;
    for attempt in 1..=cfg.max_steps {
        let candidate = match rk4(&cur.a, &cur.velocity, dt) {
            Ok(c) => {
                let f02 = c.f02();
                let e = 0.5 * f02.norm_sq();
                Some((c, f02, e))
            }
            Err(Error::BlowUp { .. }) => None,
            Err(e) => return Err(e),
        };
        match candidate {
            Some((c, f02, e)) if e.is_finite() && e <= cur.energy => {
                cur = Current::with_f02(c, f02);
                t += dt;
                let row = cur.record(attempt, t, dt);
                trace.records.push(row);
                accepted_count += 1;
                if cfg.snapshot_every > 0 && accepted_count % cfg.snapshot_every == 0 {
                    trace.snapshots.push(trace.records.len() - 1);
                    snapshots.push((attempt, cur.a.clone()));
                }
                if let Some(reason) = stop(&row) {
                    return finish(trace, cur, reason, snapshots);
                }
                streak += 1;
                if streak >= 10 {
                    dt = (dt * 1.25).min(cfg.dt0);
                    streak = 0;
                }
            }
            rejected => {
                trace.records.push(TraceRecord {
                    step: attempt,
                    t,
                    dt,
                    energy: rejected.map_or(f64::NAN, |r| r.2),
                    grad_norm: f64::NAN,
                    f02_norm: f64::NAN,
                    f11_norm: f64::NAN,
                    accepted: false,
                });
                dt *= 0.5;
                streak = 0;
                if dt < cfg.dt_floor() {
                    return finish(trace, cur, Termination::StepUnderflow, snapshots);
                }
            }
        }
    }
    finish(trace, cur, Termination::MaxSteps, snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::{gauge_unitary, GaugeTransform};
    use crate::field::{I, ONE};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn torus() -> Arc<TorusGeometry> {
        TorusGeometry::new(2, 8, 2.0 * PI, true).unwrap()
    }

    #[test]
    fn default_step_scale() {
        let cfg = FlowConfig::for_geometry(&torus(), 0.2);
        assert!((cfg.dt0 - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn flat_start_stops_immediately() {
        let g = torus();
        let a = Connection::trivial(&g, 2).unwrap();
        let run = run(&a, &FlowConfig::for_geometry(&g, 0.2)).unwrap();
        assert_eq!(run.termination, Termination::GradientBelowThreshold);
        assert_eq!(run.trace.records.len(), 1);
    }

    #[test]
    fn fixture_is_stationary() {
        let g = torus();
        let a = Connection::holomorphic_pair_fixture(&g).unwrap();
        let b = step(&a, 0.01).unwrap();
        assert!(b.a01().max_abs() <= 1e-12);
    }

    #[test]
    fn descent_and_gauge_equivariance() {
        let g = torus();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = Connection::random(&g, 2, 0.1, 2, &mut rng).unwrap();
        let mut cfg = FlowConfig::for_geometry(&g, 0.2);
        cfg.max_steps = 5;
        cfg.stop_grad = 0.0;
        let r = run(&a, &cfg).unwrap();
        assert!(r.trace.is_monotone());
        let rows = &r.trace.records;
        assert!(rows[1].accepted && rows[1].energy < rows[0].energy);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = GaugeTransform::constant(&g, 2, &[ONE * s, I * s, I * s, ONE * s], true).unwrap();
        let ga = gauge_unitary(&a, &u).unwrap();
        let rg = run(&ga, &cfg).unwrap();
        let want = gauge_unitary(&r.final_state, &u).unwrap();
        assert!(rg.final_state.a01().sub(want.a01()).max_abs() < 1e-12);
    }
}
