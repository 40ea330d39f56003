//! Sub-channel pruning: the δ removal criterion, the fairness guard, and the
//! outer loop that alternates pruning with power re-convergence.

use serde::{Deserialize, Serialize};

use crate::channel::{
    interference, ChannelParams, ChannelTensor, InterferenceModel, NetworkTopology,
};
use crate::error::{Error, Result};
use crate::metrics::user_rates;
use crate::power::{
    ConvergenceTrace, EntryId, InterferenceField, PowerLoop, PowerSettings, PowerTensor,
    RemovedEntry, StageRecord,
};
use crate::tensor::{Dims, Tensor3};

/// Binary association `x[user][bs][sub]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationTensor(Tensor3<bool>);

impl AssociationTensor {
    pub fn empty(dims: Dims) -> Self {
        Self(Tensor3::filled(dims, false))
    }

    /// Every user on every sub-channel each BS is allowed to use.
    pub fn full(topology: &NetworkTopology) -> Self {
        Self(Tensor3::from_fn(topology.dims(), |_, j, k| topology.is_allowed(j, k)))
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.0.dims()
    }

    #[inline]
    pub fn is_active(&self, user: usize, bs: usize, sub: usize) -> bool {
        self.0.at(user, bs, sub)
    }

    pub fn set(&mut self, user: usize, bs: usize, sub: usize, active: bool) {
        self.0.set(user, bs, sub, active)
    }

    /// Active entries of `user`, BS-major then sub-channel.
    pub fn user_entries(&self, user: usize) -> impl Iterator<Item = EntryId> + '_ {
        let k = self.dims().subchannels;
        self.0
            .user_slice(user)
            .iter()
            .enumerate()
            .filter(|(_, on)| **on)
            .map(move |(idx, _)| EntryId {
                bs: idx / k,
                sub: idx % k,
            })
    }

    pub fn entry_count(&self, user: usize) -> usize {
        self.0.user_slice(user).iter().filter(|on| **on).count()
    }

    pub fn users_on(&self, bs: usize, sub: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.dims().users).filter(move |&i| self.is_active(i, bs, sub))
    }

    pub fn occupancy(&self, bs: usize, sub: usize) -> usize {
        self.users_on(bs, sub).count()
    }

    pub fn total_active(&self) -> usize {
        self.0.as_slice().iter().filter(|on| **on).count()
    }

    /// BSs each user holds at least one entry with.
    pub fn serving_bss(&self) -> Vec<Vec<usize>> {
        let d = self.dims();
        (0..d.users)
            .map(|i| {
                (0..d.bss)
                    .filter(|&j| (0..d.subchannels).any(|k| self.is_active(i, j, k)))
                    .collect()
            })
            .collect()
    }
}

/// A user that could be pruned from a contested `(bs, sub)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemovalCandidate {
    pub user: usize,
    pub bs: usize,
    pub sub: usize,
    /// Sum-rate change (bps/Hz) if the entry were dropped at frozen powers.
    pub delta: f64,
}

/// `ln(1 + s / a) - ln(1 + s / b)` for interference-plus-noise `a <= b`.
#[inline]
fn ln_gain(signal: f64, after: f64, before: f64) -> f64 {
    (signal / after).ln_1p() - (signal / before).ln_1p()
}

fn check_candidate(user: usize, bs: usize, sub: usize, x: &AssociationTensor) -> Result<()> {
    let d = x.dims();
    if user >= d.users || bs >= d.bss || sub >= d.subchannels {
        return Err(Error::Contract(format!("entry ({user}, {bs}, {sub}) out of range")));
    }
    if !x.is_active(user, bs, sub) {
        return Err(Error::Contract(format!("entry ({user}, {bs}, {sub}) is not active")));
    }
    Ok(())
}

/// BSs whose receivers hear an entry addressed to `bs`.
fn victim_bss(bss: usize, bs: usize, model: InterferenceModel) -> impl Iterator<Item = usize> {
    (0..bss).filter(move |&s| model == InterferenceModel::CoChannel || s != bs)
}

/// Sum-rate change from dropping `(user, bs, sub)` with every other power
/// held fixed. Only sub-channel `sub` is affected: the user's own rate there
/// is lost, and other users' entries on `sub` stop seeing its transmission.
pub fn delta_for_removal(
    user: usize,
    bs: usize,
    sub: usize,
    x: &AssociationTensor,
    p: &PowerTensor,
    h: &ChannelTensor,
    params: &ChannelParams,
) -> Result<f64> {
    check_candidate(user, bs, sub, x)?;
    let noise = params.noise_watts();
    let removed = p.at(user, bs, sub);
    let d = x.dims();
    let own_ipn = interference(user, bs, sub, x, p, h, params.interference) + noise;
    let mut delta = -(removed * h.gain(user, bs, sub) / own_ipn).ln_1p();
    if removed > 0.0 {
        for s in victim_bss(d.bss, bs, params.interference) {
            let relief = removed * h.gain(user, s, sub);
            for l in (0..d.users).filter(|&l| l != user && x.is_active(l, s, sub)) {
                let before = interference(l, s, sub, x, p, h, params.interference) + noise;
                let after = (before - relief).max(noise);
                delta += ln_gain(p.at(l, s, sub) * h.gain(l, s, sub), after, before);
            }
        }
    }
    Ok(delta / std::f64::consts::LN_2)
}

/// Same quantity as [`delta_for_removal`], reading interference from the
/// running sums.
#[allow(clippy::too_many_arguments)]
fn delta_with_field(
    field: &InterferenceField,
    user: usize,
    bs: usize,
    sub: usize,
    x: &AssociationTensor,
    p: &PowerTensor,
    h: &ChannelTensor,
    noise: f64,
    model: InterferenceModel,
) -> f64 {
    let d = x.dims();
    let removed = p.at(user, bs, sub);
    let own_ipn = field.interference(user, bs, sub, p, h) + noise;
    let mut delta = -(removed * h.gain(user, bs, sub) / own_ipn).ln_1p();
    if removed > 0.0 {
        for s in victim_bss(d.bss, bs, model) {
            let relief = removed * h.gain(user, s, sub);
            for l in (0..d.users).filter(|&l| l != user && x.is_active(l, s, sub)) {
                let before = field.interference(l, s, sub, p, h) + noise;
                let after = (before - relief).max(noise);
                delta += ln_gain(p.at(l, s, sub) * h.gain(l, s, sub), after, before);
            }
        }
    }
    delta / std::f64::consts::LN_2
}

/// Picks the entry to drop from `candidates`: highest δ first, ties to the
/// lower user index, then the lower BS index. Candidates for which
/// `protected` holds are skipped; `None` means every candidate is protected.
fn choose_removal(
    candidates: &mut [RemovalCandidate],
    protected: impl Fn(&RemovalCandidate) -> bool,
) -> Option<RemovalCandidate> {
    candidates.sort_by(|a, b| {
        b.delta
            .total_cmp(&a.delta)
            .then(a.user.cmp(&b.user))
            .then(a.bs.cmp(&b.bs))
    });
    candidates.iter().find(|c| !protected(c)).copied()
}

fn remove_entry(c: &RemovalCandidate, x: &mut AssociationTensor, p: &mut PowerTensor) {
    x.set(c.user, c.bs, c.sub, false);
    p.set(c.user, c.bs, c.sub, 0.0);
}

/// Drops one user from a contested `(bs, sub)`: the one whose removal gains
/// the most sum rate. Under fairness a user down to its last entry is
/// skipped in favour of the next one. Returns the removed candidate, or
/// `None` when fairness protects every user on the slot.
pub fn prune_subchannel(
    bs: usize,
    sub: usize,
    x: &mut AssociationTensor,
    p: &mut PowerTensor,
    h: &ChannelTensor,
    params: &ChannelParams,
    fairness: bool,
) -> Result<Option<RemovalCandidate>> {
    let users: Vec<usize> = x.users_on(bs, sub).collect();
    if users.len() < 2 {
        return Err(Error::Contract(format!(
            "({bs}, {sub}) hosts {} user(s); pruning needs at least two",
            users.len()
        )));
    }
    let mut candidates = users
        .into_iter()
        .map(|user| {
            Ok(RemovalCandidate {
                user,
                bs,
                sub,
                delta: delta_for_removal(user, bs, sub, x, p, h, params)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let chosen = choose_removal(&mut candidates, |c| fairness && x.entry_count(c.user) <= 1);
    if let Some(c) = &chosen {
        remove_entry(c, x, p);
    }
    Ok(chosen)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub fairness: bool,
    /// Power loop tolerance (W).
    pub tol: f64,
    pub max_sweeps: usize,
}

impl SolveOptions {
    pub fn new(params: &ChannelParams, fairness: bool) -> Self {
        Self {
            fairness,
            tol: 1e-6 * params.p_max_watts(),
            max_sweeps: 200,
        }
    }
}

/// A contested `(bs, sub)` left with several users because fairness
/// protected all of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairnessConflict {
    pub bs: usize,
    pub sub: usize,
    pub users: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub association: AssociationTensor,
    pub powers: PowerTensor,
    /// Per-user rate (bps/Hz), recomputed directly from the final state.
    pub user_rates: Vec<f64>,
    pub sum_rate: f64,
    pub trace: ConvergenceTrace,
    pub removals: usize,
    pub conflicts: Vec<FairnessConflict>,
    /// Every power stage met the tolerance.
    pub converged: bool,
    /// BSs each user was associated with before and after pruning.
    pub initial_bss: Vec<Vec<usize>>,
    pub final_bss: Vec<Vec<usize>>,
}

impl AllocationResult {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        association: AssociationTensor,
        powers: PowerTensor,
        h: &ChannelTensor,
        params: &ChannelParams,
        trace: ConvergenceTrace,
        removals: usize,
        conflicts: Vec<FairnessConflict>,
        initial_bss: Vec<Vec<usize>>,
    ) -> Self {
        let rates = user_rates(&association, &powers, h, params);
        let converged = trace.all_converged();
        let final_bss = association.serving_bss();
        Self {
            sum_rate: rates.iter().sum(),
            user_rates: rates,
            association,
            powers,
            trace,
            removals,
            conflicts,
            converged,
            initial_bss,
            final_bss,
        }
    }

    pub fn subchannels_per_user(&self) -> Vec<usize> {
        (0..self.association.dims().users)
            .map(|i| self.association.entry_count(i))
            .collect()
    }
}

/// Joint power control, sub-channel assignment and cell association.
///
/// Starts with every user on every allowed `(bs, sub)` at `p_max / (M·K)`,
/// converges the powers, then visits BSs and sub-channels in index order,
/// pruning one user at a time from each contested slot and re-converging
/// the powers after every removal.
///
/// With fairness on, a user is never pruned from its last entry, and a slot
/// keeps an unsecured user whenever the slots left to visit could not
/// otherwise serve every user still without a final slot. Conflicts are
/// recorded only when no user is removable (more users than slots).
pub fn solve(
    topology: &NetworkTopology,
    h: &ChannelTensor,
    params: &ChannelParams,
    options: &SolveOptions,
) -> Result<AllocationResult> {
    let dims = topology.dims();
    if h.dims() != dims {
        return Err(Error::Contract("channel tensor does not match topology".into()));
    }
    params.validate()?;
    let settings = PowerSettings::new(params, options.tol, options.max_sweeps);

    let mut x = AssociationTensor::full(topology);
    let initial = settings.p_max / (dims.bss * dims.subchannels) as f64;
    let mut p = PowerTensor::uniform_on(&x, initial);
    let initial_bss = x.serving_bss();

    let mut solver = PowerLoop::new(h, &p, settings);
    let mut trace = ConvergenceTrace {
        tol: options.tol,
        stages: Vec::new(),
    };
    let run_stage = |solver: &mut PowerLoop,
                         x: &AssociationTensor,
                         p: &mut PowerTensor,
                         removed: Option<RemovedEntry>,
                         trace: &mut ConvergenceTrace| {
        let outcome = solver.run_to_convergence(x, p);
        trace.stages.push(StageRecord {
            stage: trace.stages.len(),
            removed,
            active_entries: x.total_active(),
            sum_rate: solver.sum_rate(x, p),
            max_delta: outcome.max_delta,
            sweeps: outcome.sweeps,
            converged: outcome.converged,
        });
    };
    run_stage(&mut solver, &x, &mut p, None, &mut trace);

    let max_removals = dims.len();
    let mut removals = 0;
    let mut conflicts = Vec::new();
    let mut candidates = Vec::with_capacity(dims.users);

    // Slots in visiting order. A slot is final once visited, so its sole
    // holder keeps it; users holding no final slot are "unsecured". Users are
    // never pruned from unvisited slots, so every unvisited slot can still
    // go to any unsecured user.
    let slots: Vec<(usize, usize)> = (0..dims.bss)
        .flat_map(|j| topology.allowed_subchannels[j].iter().map(move |&k| (j, k)))
        .collect();
    let mut secured = vec![false; dims.users];
    let mut unsecured = dims.users;

    for (pos, &(bs, sub)) in slots.iter().enumerate() {
        let slots_after = slots.len() - pos - 1;
        while x.occupancy(bs, sub) > 1 {
            candidates.clear();
            for user in x.users_on(bs, sub) {
                candidates.push(RemovalCandidate {
                    user,
                    bs,
                    sub,
                    delta: delta_with_field(
                        solver.field(),
                        user,
                        bs,
                        sub,
                        &x,
                        &p,
                        h,
                        settings.noise,
                        settings.model,
                    ),
                });
            }
            // With more unsecured users than later slots, this slot has to
            // end up with an unsecured holder.
            let must_keep_unsecured = unsecured > slots_after;
            let unsecured_here = x.users_on(bs, sub).filter(|&u| !secured[u]).count();
            let chosen = choose_removal(&mut candidates, |c| {
                options.fairness
                    && (x.entry_count(c.user) <= 1
                        || (must_keep_unsecured && !secured[c.user] && unsecured_here <= 1))
            });
            let Some(chosen) = chosen else {
                conflicts.push(FairnessConflict {
                    bs,
                    sub,
                    users: x.users_on(bs, sub).collect(),
                });
                break;
            };
            let before = x.total_active();
            remove_entry(&chosen, &mut x, &mut p);
            removals += 1;
            if x.total_active() >= before || removals > max_removals {
                return Err(Error::Contract(format!(
                    "pruning step {removals} did not shrink the association"
                )));
            }
            let removed = RemovedEntry {
                user: chosen.user,
                bs,
                sub,
            };
            run_stage(&mut solver, &x, &mut p, Some(removed), &mut trace);
        }
        let mut holders = x.users_on(bs, sub);
        if let (Some(holder), None) = (holders.next(), holders.next()) {
            if !secured[holder] {
                secured[holder] = true;
                unsecured -= 1;
            }
        }
    }

    Ok(AllocationResult::assemble(
        x, p, h, params, trace, removals, conflicts, initial_bss,
    ))
}
