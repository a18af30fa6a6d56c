//! Fixed-step RK4 integration of `dS/dt = Q(S)` (optionally `+ (2/t) S`)
//! with cone monitoring at saved states.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acvt::{check_dim, q_map, validate_acvt, AlgCurvTensor, ContractionMetric};
use crate::cone::{cone_membership_with, MembershipOptions};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct IntegratorConfig {
    pub step: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub save_every: usize,
    /// Abort once `|S| > blowup_guard * |S0|`.
    pub blowup_guard: f64,
    pub contraction: ContractionMetric,
    /// Adds the `(2/t) S` term; needs `t_start > 0`.
    pub reaction_term: bool,
    /// Cone membership options for saved states; `None` skips monitoring.
    pub monitor: Option<MembershipOptions>,
    /// Monitor every step rather than every saved state.
    pub monitor_every_step: bool,
}

impl IntegratorConfig {
    pub fn new(step: f64, t_end: f64, contraction: ContractionMetric) -> IntegratorConfig {
        IntegratorConfig {
            step,
            t_start: 0.0,
            t_end,
            save_every: 10,
            blowup_guard: 1e4,
            contraction,
            reaction_term: false,
            monitor: Some(MembershipOptions::default()),
            monitor_every_step: false,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<AlgCurvTensor>,
    /// Membership minimum of each saved state (empty without monitoring).
    pub cone_mins: Vec<f64>,
    /// Time at which the blow-up guard fired, if it did.
    pub blowup_at: Option<f64>,
}

impl OdeTrajectory {
    pub fn last(&self) -> &AlgCurvTensor {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// Smallest `cone_min / max(|S|, tiny)` along the trajectory.
    pub fn worst_relative_cone_min(&self) -> f64 {
        self.cone_mins
            .iter()
            .zip(&self.states)
            .map(|(m, s)| m / s.norm().max(f64::MIN_POSITIVE))
            .fold(f64::INFINITY, f64::min)
    }

    /// CSV with columns `time,|S|,cone_min` (`cone_min` blank when unmonitored).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,|S|,cone_min\n");
        for (k, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            let m = self.cone_mins.get(k).map(|m| m.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{t},{},{m}", s.norm());
        }
        out
    }

    /// Writes each saved state as `state_<k>.acvt` into `dir`.
    pub fn write_states(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (k, s) in self.states.iter().enumerate() {
            std::fs::write(dir.join(format!("state_{k:05}.acvt")), s.to_text())?;
        }
        Ok(())
    }
}

/// Summary record for reports.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub saved_states: usize,
    pub final_time: f64,
    pub final_norm: f64,
    pub worst_relative_cone_min: f64,
    pub blowup_at: Option<f64>,
}

impl From<&OdeTrajectory> for TrajectorySummary {
    fn from(t: &OdeTrajectory) -> Self {
        TrajectorySummary {
            saved_states: t.states.len(),
            final_time: *t.times.last().unwrap_or(&0.0),
            final_norm: t.last().norm(),
            worst_relative_cone_min: t.worst_relative_cone_min(),
            blowup_at: t.blowup_at,
        }
    }
}

/// `(2/t) S`.
pub fn scaled_ode_step_term(s: &AlgCurvTensor, t: f64) -> Result<AlgCurvTensor> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("reaction term needs t > 0, got {t}")));
    }
    Ok(s * (2.0 / t))
}

fn rhs(s: &AlgCurvTensor, t: f64, cfg: &IntegratorConfig) -> Result<AlgCurvTensor> {
    let q = q_map(s, &cfg.contraction)?;
    if cfg.reaction_term {
        Ok(&q + &scaled_ode_step_term(s, t)?)
    } else {
        Ok(q)
    }
}

fn axpy(s: &AlgCurvTensor, k: &AlgCurvTensor, h: f64) -> AlgCurvTensor {
    s + &(k * h)
}

/// Classical RK4 on the components. The step is shrunk so that `t_end` is hit exactly.
pub fn integrate_ode(s0: &AlgCurvTensor, cfg: &IntegratorConfig) -> Result<OdeTrajectory> {
    check_dim(s0.dim(), cfg.contraction.dim())?;
    if !(cfg.step > 0.0) || !(cfg.t_end > cfg.t_start) {
        return Err(Error::InvalidArgument(format!(
            "need step > 0 and t_end > t_start (step={}, t_start={}, t_end={})",
            cfg.step, cfg.t_start, cfg.t_end
        )));
    }
    if cfg.reaction_term && !(cfg.t_start > 0.0) {
        return Err(Error::InvalidArgument("the (2/t) S term needs t_start > 0".into()));
    }
    let report = validate_acvt(s0, 1e-10);
    if !report.is_valid() {
        return Err(Error::InvalidTensor(format!("{:?} (max residual {:e})", report.violations, report.max_residual())));
    }
    let span = cfg.t_end - cfg.t_start;
    let nsteps = (span / cfg.step).ceil().max(1.0) as usize;
    let h = span / nsteps as f64;
    let save_every = cfg.save_every.max(1);
    let guard = cfg.blowup_guard * s0.norm().max(f64::MIN_POSITIVE);

    let monitor = |s: &AlgCurvTensor| -> Result<Option<f64>> {
        match &cfg.monitor {
            Some(opts) => Ok(Some(cone_membership_with(s, opts)?.min_value)),
            None => Ok(None),
        }
    };

    let mut traj = OdeTrajectory::default();
    let mut s = s0.clone();
    traj.times.push(cfg.t_start);
    traj.states.push(s.clone());
    if let Some(m) = monitor(&s)? {
        traj.cone_mins.push(m);
    }
    let mut worst_unsaved: Option<f64> = None;
    for k in 1..=nsteps {
        let t = cfg.t_start + (k - 1) as f64 * h;
        let k1 = rhs(&s, t, cfg)?;
        let k2 = rhs(&axpy(&s, &k1, 0.5 * h), t + 0.5 * h, cfg)?;
        let k3 = rhs(&axpy(&s, &k2, 0.5 * h), t + 0.5 * h, cfg)?;
        let k4 = rhs(&axpy(&s, &k3, h), t + h, cfg)?;
        let incr = &(&(&k1 + &(&k2 * 2.0)) + &(&k3 * 2.0)) + &k4;
        s = axpy(&s, &incr, h / 6.0);
        let tn = if k == nsteps { cfg.t_end } else { cfg.t_start + k as f64 * h };
        let norm = s.norm();
        let blown = !norm.is_finite() || norm > guard;
        if blown {
            traj.blowup_at = Some(tn);
            break;
        }
        let save = k % save_every == 0 || k == nsteps;
        if cfg.monitor_every_step && !save {
            if let Some(m) = monitor(&s)? {
                let rel = m / norm.max(f64::MIN_POSITIVE);
                worst_unsaved = Some(worst_unsaved.map_or(rel, |w: f64| w.min(rel)));
            }
        }
        if save {
            traj.times.push(tn);
            traj.states.push(s.clone());
            if let Some(m) = monitor(&s)? {
                traj.cone_mins.push(m);
            }
        }
    }
    if let (Some(w), Some(last)) = (worst_unsaved, traj.cone_mins.last_mut()) {
        // fold unsaved-step violations into the last record so they are not lost
        let norm = traj.states.last().map(|s| s.norm()).unwrap_or(1.0);
        *last = last.min(w * norm);
    }
    Ok(traj)
}
