//! Euler–Maruyama integration of the multi-species CBO system
//!
//! ```text
//! dX^{m,i} = -λ (X^{m,i} − ξ C_m) dt + σ D(X^{m,i} − ξ C_m) dB^{m,i}
//! ```
//!
//! with `C_m` the consensus point of player `m`, frozen at the start of each
//! step, and `ξ = 1` for the plain dynamics.

use serde::{Deserialize, Serialize};

use crate::consensus::{consensus_all, ConsensusSet};
use crate::ensemble::{norm, Ensemble, Law};
use crate::error::{check_len, Error, Result};
use crate::game::GameSpec;
use crate::noise::NoiseStream;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Diffusion {
    /// `D(v) = |v| · Id`
    Isotropic,
    /// `D(v) = diag(v)`
    Anisotropic,
}

impl std::str::FromStr for Diffusion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isotropic" => Ok(Self::Isotropic),
            "anisotropic" => Ok(Self::Anisotropic),
            other => Err(Error::Input(format!(
                "unknown diffusion `{other}` (isotropic | anisotropic)"
            ))),
        }
    }
}

impl std::fmt::Display for Diffusion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Isotropic => "isotropic",
            Self::Anisotropic => "anisotropic",
        })
    }
}

/// `D(v) · noise`.
pub fn diffusion_apply(kind: Diffusion, v: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
    check_len("noise", v.len(), noise.len())?;
    let mut out = vec![0.0; v.len()];
    apply_into(kind, v, noise, &mut out);
    Ok(out)
}

#[inline]
fn apply_into(kind: Diffusion, v: &[f64], noise: &[f64], out: &mut [f64]) {
    match kind {
        Diffusion::Isotropic => {
            let r = norm(v);
            for (o, z) in out.iter_mut().zip(noise) {
                *o = r * z;
            }
        }
        Diffusion::Anisotropic => {
            for ((o, x), z) in out.iter_mut().zip(v).zip(noise) {
                *o = x * z;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CboParams {
    pub lambda: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub xi: f64,
    pub dt: f64,
    pub t_end: f64,
    pub diffusion: Diffusion,
}

impl Default for CboParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            sigma: 0.5,
            alpha: 40.0,
            xi: 1.0,
            dt: 0.01,
            t_end: 10.0,
            diffusion: Diffusion::Anisotropic,
        }
    }
}

impl CboParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("lambda", self.lambda),
            ("sigma", self.sigma),
            ("alpha", self.alpha),
            ("xi", self.xi),
            ("dt", self.dt),
            ("t_end", self.t_end),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Config(format!("{name} must be finite, got {v}")));
        }
        if self.lambda < 0.0 || self.sigma < 0.0 || self.alpha < 0.0 {
            return Err(Error::Config("lambda, sigma and alpha must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.xi) {
            return Err(Error::Config(format!("xi must lie in [0, 1], got {}", self.xi)));
        }
        if !(self.dt > 0.0 && self.t_end > 0.0) {
            return Err(Error::Config("dt and t_end must be positive".into()));
        }
        if self.dt > self.t_end {
            return Err(Error::Config(format!(
                "dt = {} exceeds the horizon t_end = {}",
                self.dt, self.t_end
            )));
        }
        Ok(())
    }

    /// `K = ceil(t_end / dt)`, ignoring round-off just above an integer.
    pub fn num_steps(&self) -> usize {
        let ratio = self.t_end / self.dt;
        let k = ratio.round();
        if (ratio - k).abs() <= 1e-9 * k.max(1.0) {
            k as usize
        } else {
            ratio.ceil() as usize
        }
    }

    /// Time at grid index `k`; the last grid point is exactly `t_end`.
    pub fn time_at(&self, k: usize) -> f64 {
        if k >= self.num_steps() {
            self.t_end
        } else {
            k as f64 * self.dt
        }
    }

    /// Length of step `k`: exactly `dt`, except a final step truncated to
    /// land on `t_end` when the horizon is not a multiple of `dt`.
    pub fn step_size(&self, k: usize) -> f64 {
        let n = self.num_steps();
        if k + 1 < n {
            return self.dt;
        }
        let rest = self.t_end - (n - 1) as f64 * self.dt;
        if (rest - self.dt).abs() <= 1e-9 * self.dt {
            self.dt
        } else {
            rest
        }
    }
}

/// One explicit step from `ens`, consensus frozen at the pre-step state.
pub fn step_em(game: &GameSpec, ens: &Ensemble, params: &CboParams, noise: &NoiseStream, k: usize) -> Result<Ensemble> {
    params.validate()?;
    let mut next = ens.clone();
    let consensus = consensus_all(game, ens, params.alpha)?;
    advance_into(ens, &mut next, &consensus, params, noise, k, None)?;
    Ok(next)
}

fn advance_into(
    ens: &Ensemble,
    next: &mut Ensemble,
    consensus: &ConsensusSet,
    params: &CboParams,
    noise: &NoiseStream,
    k: usize,
    labels: Option<&[u64]>,
) -> Result<()> {
    let (n, d) = (ens.particles(), ens.dim());
    let h = params.step_size(k);
    let drift = params.lambda * h;
    let scale = params.sigma * h.sqrt();
    let (xi, kind) = (params.xi, params.diffusion);
    let with_noise = params.sigma != 0.0;
    par::for_each_chunk(next.as_mut_slice(), d, |idx, out| {
        let (m, i) = (idx / n, idx % n);
        let x = ens.particle(m, i);
        let c = &consensus.points[m];
        let mut buf = Scratch::new(d);
        let (diff, eta, kick) = buf.split();
        for j in 0..d {
            diff[j] = x[j] - xi * c[j];
            out[j] = x[j] - drift * diff[j];
        }
        if with_noise {
            let label = labels.map_or(i as u64, |l| l[i]);
            noise.fill(m, label, k, eta);
            apply_into(kind, diff, eta, kick);
            for j in 0..d {
                out[j] += scale * kick[j];
            }
        }
    });
    if let Some(pos) = next.as_slice().iter().position(|v| !v.is_finite()) {
        let idx = pos / d;
        return Err(Error::BlowUp {
            player: idx / n,
            particle: idx % n,
            step: k,
            partial: Box::default(),
        });
    }
    Ok(())
}

/// Three length-`d` work vectors, on the stack for small `d`.
enum Scratch {
    Stack([f64; 24], usize),
    Heap(Vec<f64>, usize),
}

impl Scratch {
    fn new(d: usize) -> Self {
        if d <= 8 {
            Scratch::Stack([0.0; 24], d)
        } else {
            Scratch::Heap(vec![0.0; 3 * d], d)
        }
    }

    fn split(&mut self) -> (&mut [f64], &mut [f64], &mut [f64]) {
        let (buf, d) = match self {
            Scratch::Stack(a, d) => (&mut a[..], *d),
            Scratch::Heap(v, d) => (&mut v[..], *d),
        };
        let (a, rest) = buf.split_at_mut(d);
        let (b, rest) = rest.split_at_mut(d);
        (a, b, &mut rest[..d])
    }
}

/// Output of [`simulate`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Full time grid `t_0 = 0 < … < t_K = t_end`.
    pub times: Vec<f64>,
    /// Grid indices at which state was recorded.
    pub recorded_steps: Vec<usize>,
    /// Ensembles at `recorded_steps` (empty when snapshots are disabled).
    pub snapshots: Vec<Ensemble>,
    /// Consensus points at `recorded_steps`.
    pub consensus_path: Vec<ConsensusSet>,
    /// Last finite state.
    pub terminal: Option<Ensemble>,
}

impl Trajectory {
    pub fn recorded_times(&self) -> Vec<f64> {
        self.recorded_steps.iter().map(|&k| self.times[k]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Recording {
    pub every: usize,
    pub snapshots: bool,
}

impl Recording {
    pub fn every(every: usize) -> Self {
        Self {
            every,
            snapshots: true,
        }
    }
}

/// Stepwise driver for the particle system. Particle `(m, i)` draws its
/// noise from the stream labelled `labels[i]` (default `i`).
pub struct Simulator<'g> {
    game: &'g GameSpec,
    params: CboParams,
    noise: NoiseStream,
    labels: Option<Vec<u64>>,
    state: Ensemble,
    next: Ensemble,
    step: usize,
    steps_total: usize,
}

impl<'g> Simulator<'g> {
    pub fn new(game: &'g GameSpec, init: Ensemble, params: CboParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if init.players() != game.players() || init.dim() != game.dim() {
            return Err(Error::Input(format!(
                "initial ensemble (M={}, d={}) does not match the game (M={}, d={})",
                init.players(),
                init.dim(),
                game.players(),
                game.dim()
            )));
        }
        Ok(Self {
            game,
            params,
            noise: NoiseStream::new(seed),
            labels: None,
            next: init.clone(),
            state: init,
            step: 0,
            steps_total: params.num_steps(),
        })
    }

    /// Overrides the noise-stream label of each particle index.
    pub fn with_labels(mut self, labels: Vec<u64>) -> Result<Self> {
        check_len("labels", self.state.particles(), labels.len())?;
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn state(&self) -> &Ensemble {
        &self.state
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.params.time_at(self.step)
    }

    pub fn steps_total(&self) -> usize {
        self.steps_total
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.steps_total
    }

    pub fn consensus(&self) -> Result<ConsensusSet> {
        consensus_all(self.game, &self.state, self.params.alpha)
    }

    /// Advances one step and returns the consensus used for it.
    pub fn advance(&mut self) -> Result<ConsensusSet> {
        let consensus = self.consensus()?;
        self.advance_with(consensus)
    }

    /// Like [`Self::advance`], handing the pre-step state and its consensus
    /// to `observe` before the update.
    pub fn advance_observed(&mut self, observe: impl FnOnce(&Ensemble, &ConsensusSet)) -> Result<ConsensusSet> {
        let consensus = self.consensus()?;
        observe(&self.state, &consensus);
        self.advance_with(consensus)
    }

    fn advance_with(&mut self, consensus: ConsensusSet) -> Result<ConsensusSet> {
        if self.is_done() {
            return Err(Error::Input("simulation already reached t_end".into()));
        }
        advance_into(
            &self.state,
            &mut self.next,
            &consensus,
            &self.params,
            &self.noise,
            self.step,
            self.labels.as_deref(),
        )?;
        std::mem::swap(&mut self.state, &mut self.next);
        self.step += 1;
        Ok(consensus)
    }

    /// Runs to the horizon, recording every `rec.every`-th grid point plus
    /// the terminal one.
    pub fn run(mut self, rec: Recording) -> Result<Trajectory> {
        if rec.every == 0 {
            return Err(Error::Input("record_every must be >= 1".into()));
        }
        let mut traj = Trajectory {
            times: (0..=self.steps_total).map(|k| self.params.time_at(k)).collect(),
            ..Trajectory::default()
        };
        loop {
            let consensus = match self.consensus() {
                Ok(c) => c,
                Err(e) => return Err(attach(e, traj, &self.state)),
            };
            let record = self.step.is_multiple_of(rec.every) || self.is_done();
            if record {
                traj.recorded_steps.push(self.step);
                traj.consensus_path.push(consensus.clone());
                if rec.snapshots {
                    traj.snapshots.push(self.state.clone());
                }
            }
            if self.is_done() {
                break;
            }
            if let Err(e) = self.advance_with(consensus) {
                return Err(attach(e, traj, &self.state));
            }
        }
        traj.terminal = Some(self.state);
        Ok(traj)
    }
}

fn attach(err: Error, mut traj: Trajectory, last: &Ensemble) -> Error {
    match err {
        Error::BlowUp {
            player,
            particle,
            step,
            ..
        } => {
            traj.terminal = Some(last.clone());
            Error::BlowUp {
                player,
                particle,
                step,
                partial: Box::new(traj),
            }
        }
        other => other,
    }
}

/// Integrates from `init` to `params.t_end`, keeping every
/// `record_every`-th snapshot.
pub fn simulate(game: &GameSpec, init: &Ensemble, params: &CboParams, seed: u64, record_every: usize) -> Result<Trajectory> {
    Simulator::new(game, init.clone(), *params, seed)?.run(Recording::every(record_every))
}

/// A size-`n_small` system and a size-`n_ref` reference system that share
/// initial positions and noise streams on their common particle indices.
pub fn simulate_coupled(
    game: &GameSpec,
    init_law: &Law,
    params: &CboParams,
    n_small: usize,
    n_ref: usize,
    seed: u64,
    rec: Recording,
) -> Result<(Trajectory, Trajectory)> {
    if n_small == 0 || n_small > n_ref {
        return Err(Error::Input(format!(
            "need 1 <= n_small <= n_ref, got n_small={n_small}, n_ref={n_ref}"
        )));
    }
    let reference = init_law.sample_ensemble(game.players(), n_ref, game.dim(), seed)?;
    let small = reference.truncated(n_small);
    let a = Simulator::new(game, small, *params, seed)?.run(rec)?;
    let b = Simulator::new(game, reference, *params, seed)?.run(rec)?;
    Ok((a, b))
}
