//! Per-user water-filling and the network-wide Gauss–Seidel power loop.

use serde::{Deserialize, Serialize};

use crate::assignment::AssociationTensor;
use crate::channel::{interference, ChannelParams, ChannelTensor, InterferenceModel};
use crate::error::{Error, Result};
use crate::tensor::{Dims, Tensor3};

/// Transmit powers in watts; zero wherever the association is inactive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTensor(Tensor3<f64>);

impl PowerTensor {
    pub fn zeros(dims: Dims) -> Self {
        Self(Tensor3::filled(dims, 0.0))
    }

    /// `value` on every active entry of `x`, zero elsewhere.
    pub fn uniform_on(x: &AssociationTensor, value: f64) -> Self {
        Self(Tensor3::from_fn(x.dims(), |i, j, k| {
            if x.is_active(i, j, k) {
                value
            } else {
                0.0
            }
        }))
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.0.dims()
    }

    #[inline]
    pub fn at(&self, user: usize, bs: usize, sub: usize) -> f64 {
        self.0.at(user, bs, sub)
    }

    #[inline]
    pub fn set(&mut self, user: usize, bs: usize, sub: usize, watts: f64) {
        self.0.set(user, bs, sub, watts)
    }

    pub fn user_slice(&self, user: usize) -> &[f64] {
        self.0.user_slice(user)
    }

    /// Sum of one user's transmit powers.
    pub fn user_total(&self, user: usize) -> f64 {
        self.0.user_slice(user).iter().sum()
    }

    pub fn tensor(&self) -> &Tensor3<f64> {
        &self.0
    }
}

/// One `(bs, sub-channel)` slot of a user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntryId {
    pub bs: usize,
    pub sub: usize,
}

/// Interference-plus-noise over own gain for each active entry of one user,
/// so that the entry's rate is `log2(1 + p / ξ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveNoiseVector {
    pub entries: Vec<(EntryId, f64)>,
}

impl EffectiveNoiseVector {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|&(_, xi)| xi).collect()
    }
}

pub fn effective_noise(
    user: usize,
    x: &AssociationTensor,
    p: &PowerTensor,
    h: &ChannelTensor,
    params: &ChannelParams,
) -> Result<EffectiveNoiseVector> {
    let noise = params.noise_watts();
    let entries: Vec<_> = x
        .user_entries(user)
        .map(|e| {
            let i = interference(user, e.bs, e.sub, x, p, h, params.interference);
            let xi = (i + noise) / h.gain(user, e.bs, e.sub);
            (e, xi)
        })
        .collect();
    if entries.is_empty() {
        return Err(Error::NoActiveEntries { user });
    }
    Ok(EffectiveNoiseVector { entries })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterFill {
    /// Water level μ; every positive power satisfies `p + ξ = μ`.
    pub level: f64,
    pub powers: Vec<f64>,
}

/// Maximizes `Σ log2(1 + p_k/ξ_k)` subject to `Σ p_k = budget`, `p ≥ 0`.
///
/// Exact sorted-breakpoint solution: `p_k = max(0, μ − ξ_k)` with μ chosen so
/// that the powers spend the whole budget.
pub fn water_fill(budget: f64, xi: &[f64]) -> Result<WaterFill> {
    if xi.is_empty() {
        return Err(Error::Contract("water-filling over zero entries".into()));
    }
    if !(budget.is_finite() && budget > 0.0) {
        return Err(Error::Contract(format!("water-filling budget {budget} must be > 0")));
    }
    if let Some(bad) = xi.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Contract(format!("effective noise {bad} must be > 0 and finite")));
    }
    Ok(water_fill_unchecked(budget, xi))
}

pub(crate) fn water_fill_unchecked(budget: f64, xi: &[f64]) -> WaterFill {
    let mut order: Vec<usize> = (0..xi.len()).collect();
    order.sort_by(|&a, &b| xi[a].total_cmp(&xi[b]).then(a.cmp(&b)));

    let mut prefix = 0.0;
    let mut level = 0.0;
    for (m, &idx) in order.iter().enumerate() {
        prefix += xi[idx];
        level = (budget + prefix) / (m + 1) as f64;
        match order.get(m + 1) {
            Some(&next) if level > xi[next] => continue,
            _ => break,
        }
    }
    let powers = xi.iter().map(|&v| (level - v).max(0.0)).collect();
    WaterFill { level, powers }
}

/// Record of one power-convergence stage: the initial solve, or the
/// re-convergence after a pruning step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    /// Entry pruned right before this stage, if any.
    pub removed: Option<RemovedEntry>,
    /// Active association entries during the stage.
    pub active_entries: usize,
    /// Network sum rate (bps/Hz) at the end of the stage.
    pub sum_rate: f64,
    /// Largest per-entry power change (W) in the stage's last sweep.
    pub max_delta: f64,
    pub sweeps: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovedEntry {
    pub user: usize,
    pub bs: usize,
    pub sub: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    /// Stopping tolerance on the per-entry power change (W).
    pub tol: f64,
    pub stages: Vec<StageRecord>,
}

impl ConvergenceTrace {
    pub fn all_converged(&self) -> bool {
        self.stages.iter().all(|s| s.converged)
    }
}

/// Power loop settings. `tol` is absolute (watts).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSettings {
    pub p_max: f64,
    pub noise: f64,
    pub tol: f64,
    pub max_sweeps: usize,
    pub model: InterferenceModel,
}

impl PowerSettings {
    pub fn new(params: &ChannelParams, tol: f64, max_sweeps: usize) -> Self {
        Self {
            p_max: params.p_max_watts(),
            noise: params.noise_watts(),
            tol,
            max_sweeps,
            model: params.interference,
        }
    }
}

/// Outcome of one `run_to_convergence` call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOutcome {
    pub sweeps: usize,
    pub max_delta: f64,
    pub converged: bool,
}

/// Running sums that make the interference of any entry O(1):
///
/// * `tx_on_sub[l][k]`: total power user `l` spends on sub-channel `k`.
/// * `all_rx[j][k]`: power received at BS `j` on `k` from every user.
/// * `cross_rx[j][k]`: the part of `all_rx[j][k]` carried by entries
///   addressed to BSs other than `j`.
///
/// The interference of `(i, j, k)` is the relevant sum minus user `i`'s own
/// share of it. Sums are rebuilt from scratch once per sweep.
#[derive(Debug, Clone)]
pub(crate) struct InterferenceField {
    dims: Dims,
    model: InterferenceModel,
    tx_on_sub: Vec<f64>,
    all_rx: Vec<f64>,
    cross_rx: Vec<f64>,
}

impl InterferenceField {
    pub(crate) fn new(p: &PowerTensor, h: &ChannelTensor, model: InterferenceModel) -> Self {
        let dims = h.dims();
        let mut field = Self {
            dims,
            model,
            tx_on_sub: vec![0.0; dims.users * dims.subchannels],
            all_rx: vec![0.0; dims.bss * dims.subchannels],
            cross_rx: vec![0.0; dims.bss * dims.subchannels],
        };
        field.rebuild(p, h);
        field
    }

    pub(crate) fn rebuild(&mut self, p: &PowerTensor, h: &ChannelTensor) {
        let Dims {
            users,
            bss,
            subchannels,
        } = self.dims;
        self.tx_on_sub.fill(0.0);
        self.all_rx.fill(0.0);
        self.cross_rx.fill(0.0);
        for l in 0..users {
            for k in 0..subchannels {
                let total: f64 = (0..bss).map(|s| p.at(l, s, k)).sum();
                self.tx_on_sub[l * subchannels + k] = total;
                if total == 0.0 {
                    continue;
                }
                for j in 0..bss {
                    let g = h.gain(l, j, k);
                    self.all_rx[j * subchannels + k] += g * total;
                    self.cross_rx[j * subchannels + k] += g * (total - p.at(l, j, k));
                }
            }
        }
    }

    #[inline]
    pub(crate) fn interference(
        &self,
        user: usize,
        bs: usize,
        sub: usize,
        p: &PowerTensor,
        h: &ChannelTensor,
    ) -> f64 {
        let k = self.dims.subchannels;
        let g = h.gain(user, bs, sub);
        let tx = self.tx_on_sub[user * k + sub];
        let rx = match self.model {
            InterferenceModel::CoChannel => self.all_rx[bs * k + sub] - g * tx,
            InterferenceModel::OtherCells => {
                self.cross_rx[bs * k + sub] - g * (tx - p.at(user, bs, sub))
            }
        };
        rx.max(0.0)
    }

    /// Folds the change of `user`'s powers on `sub` (`old` → current `p`)
    /// into the running sums.
    pub(crate) fn update_user_sub(
        &mut self,
        user: usize,
        sub: usize,
        old: &[f64],
        p: &PowerTensor,
        h: &ChannelTensor,
    ) {
        let Dims {
            bss, subchannels, ..
        } = self.dims;
        let old_total: f64 = old.iter().sum();
        let new_total: f64 = (0..bss).map(|s| p.at(user, s, sub)).sum();
        for s in 0..bss {
            let g = h.gain(user, s, sub);
            let cross = (new_total - p.at(user, s, sub)) - (old_total - old[s]);
            self.all_rx[s * subchannels + sub] += g * (new_total - old_total);
            self.cross_rx[s * subchannels + sub] += g * cross;
        }
        self.tx_on_sub[user * subchannels + sub] = new_total;
    }

    /// Network sum rate (bps/Hz) over the active entries of `x`.
    pub(crate) fn sum_rate(
        &self,
        x: &AssociationTensor,
        p: &PowerTensor,
        h: &ChannelTensor,
        noise: f64,
    ) -> f64 {
        let d = self.dims;
        let mut total = 0.0;
        for i in 0..d.users {
            for e in x.user_entries(i) {
                let signal = p.at(i, e.bs, e.sub) * h.gain(i, e.bs, e.sub);
                let ipn = self.interference(i, e.bs, e.sub, p, h) + noise;
                total += (signal / ipn).ln_1p();
            }
        }
        total / std::f64::consts::LN_2
    }
}

/// Reusable Gauss–Seidel power solver over a fixed channel.
pub(crate) struct PowerLoop<'a> {
    h: &'a ChannelTensor,
    settings: PowerSettings,
    field: InterferenceField,
    entries: Vec<EntryId>,
    xi: Vec<f64>,
    old: Vec<f64>,
    touched: Vec<bool>,
}

impl<'a> PowerLoop<'a> {
    pub(crate) fn new(h: &'a ChannelTensor, p: &PowerTensor, settings: PowerSettings) -> Self {
        let d = h.dims();
        Self {
            h,
            settings,
            field: InterferenceField::new(p, h, settings.model),
            entries: Vec::new(),
            xi: Vec::new(),
            old: vec![0.0; d.bss],
            touched: vec![false; d.subchannels],
        }
    }

    pub(crate) fn field(&self) -> &InterferenceField {
        &self.field
    }

    pub(crate) fn refresh(&mut self, p: &PowerTensor) {
        self.field.rebuild(p, self.h);
    }

    /// Water-fills one user against the current interference and folds the
    /// result back into the field. Returns the largest power change.
    pub(crate) fn update_user(&mut self, user: usize, x: &AssociationTensor, p: &mut PowerTensor) -> f64 {
        let h = self.h;
        self.entries.clear();
        self.entries.extend(x.user_entries(user));
        if self.entries.is_empty() {
            return 0.0;
        }
        self.xi.clear();
        for e in &self.entries {
            let ipn = self.field.interference(user, e.bs, e.sub, p, h) + self.settings.noise;
            self.xi.push(ipn / h.gain(user, e.bs, e.sub));
        }
        let fill = water_fill_unchecked(self.settings.p_max, &self.xi);

        let bss = h.dims().bss;
        let mut max_delta: f64 = 0.0;
        self.touched.fill(false);
        for e in &self.entries {
            self.touched[e.sub] = true;
        }
        for sub in 0..self.touched.len() {
            if !self.touched[sub] {
                continue;
            }
            for s in 0..bss {
                self.old[s] = p.at(user, s, sub);
            }
            for (e, &new) in self.entries.iter().zip(&fill.powers) {
                if e.sub == sub {
                    max_delta = max_delta.max((new - self.old[e.bs]).abs());
                    p.set(user, e.bs, sub, new);
                }
            }
            self.field.update_user_sub(user, sub, &self.old, p, h);
        }
        max_delta
    }

    /// Sweeps users in index order until the largest per-entry change of a
    /// sweep drops below `tol`. If `max_sweeps` runs out first, `p` is left
    /// at the sweep-end iterate with the highest sum rate.
    pub(crate) fn run_to_convergence(&mut self, x: &AssociationTensor, p: &mut PowerTensor) -> SweepOutcome {
        let users = self.h.dims().users;
        let mut max_delta = f64::INFINITY;
        let mut best: Option<(f64, PowerTensor)> = None;
        for sweep in 1..=self.settings.max_sweeps {
            self.refresh(p);
            if sweep > 1 {
                let rate = self.sum_rate(x, p);
                if best.as_ref().is_none_or(|(r, _)| rate > *r) {
                    best = Some((rate, p.clone()));
                }
            }
            max_delta = (0..users)
                .map(|i| self.update_user(i, x, p))
                .fold(0.0, f64::max);
            if max_delta < self.settings.tol {
                self.refresh(p);
                return SweepOutcome {
                    sweeps: sweep,
                    max_delta,
                    converged: true,
                };
            }
        }
        self.refresh(p);
        let rate = self.sum_rate(x, p);
        if let Some((best_rate, best_p)) = best {
            if best_rate > rate {
                *p = best_p;
                self.refresh(p);
            }
        }
        SweepOutcome {
            sweeps: self.settings.max_sweeps,
            max_delta,
            converged: false,
        }
    }

    pub(crate) fn sum_rate(&self, x: &AssociationTensor, p: &PowerTensor) -> f64 {
        self.field.sum_rate(x, p, self.h, self.settings.noise)
    }
}

fn check_power_tensor(x: &AssociationTensor, p: &PowerTensor, h: &ChannelTensor) -> Result<()> {
    if x.dims() != h.dims() || p.dims() != h.dims() {
        return Err(Error::Contract("association, power and channel dimensions differ".into()));
    }
    let d = h.dims();
    for i in 0..d.users {
        for j in 0..d.bss {
            for k in 0..d.subchannels {
                let v = p.at(i, j, k);
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::Contract(format!("power {v} at ({i}, {j}, {k}) is invalid")));
                }
                if v != 0.0 && !x.is_active(i, j, k) {
                    return Err(Error::Contract(format!(
                        "non-zero power on inactive entry ({i}, {j}, {k})"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Runs the Gauss–Seidel power update to convergence: users in index order,
/// each water-filling `p_max` over its active entries against the latest
/// interference. Users without active entries keep zero power.
/// Non-convergence is reported through the trace, not as an error.
pub fn update_powers(
    x: &AssociationTensor,
    p: PowerTensor,
    h: &ChannelTensor,
    params: &ChannelParams,
    tol: f64,
    max_iters: usize,
) -> Result<(PowerTensor, ConvergenceTrace)> {
    check_power_tensor(x, &p, h)?;
    if max_iters == 0 || tol.is_nan() || tol <= 0.0 {
        return Err(Error::Contract("update_powers needs tol > 0 and max_iters >= 1".into()));
    }
    let mut p = p;
    let settings = PowerSettings::new(params, tol, max_iters);
    let mut solver = PowerLoop::new(h, &p, settings);
    let outcome = solver.run_to_convergence(x, &mut p);
    let trace = ConvergenceTrace {
        tol,
        stages: vec![StageRecord {
            stage: 0,
            removed: None,
            active_entries: x.total_active(),
            sum_rate: solver.sum_rate(x, &p),
            max_delta: outcome.max_delta,
            sweeps: outcome.sweeps,
            converged: outcome.converged,
        }],
    };
    Ok((p, trace))
}
