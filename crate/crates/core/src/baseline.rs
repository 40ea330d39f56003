//! Max-SINR association with equal channel shares and equal power.

use crate::assignment::{AllocationResult, AssociationTensor};
use crate::channel::{ChannelParams, ChannelTensor, NetworkTopology};
use crate::error::{Error, Result};
use crate::power::{ConvergenceTrace, PowerTensor};

/// Each user joins the single BS with the largest mean gain over that BS's
/// allowed sub-channels (under equal power and common noise this is the
/// max-SINR choice). Each BS deals its sub-channels round-robin to its users
/// in index order; users split `p_max` evenly over what they get. Users left
/// without a channel keep zero rate.
pub fn max_sinr_baseline(
    topology: &NetworkTopology,
    h: &ChannelTensor,
    params: &ChannelParams,
) -> Result<AllocationResult> {
    let dims = topology.dims();
    if h.dims() != dims {
        return Err(Error::Contract("channel tensor does not match topology".into()));
    }
    let mean_gain = |i: usize, j: usize| {
        let allowed = &topology.allowed_subchannels[j];
        allowed.iter().map(|&k| h.gain(i, j, k)).sum::<f64>() / allowed.len() as f64
    };

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); dims.bss];
    for i in 0..dims.users {
        let best = (0..dims.bss)
            .filter(|&j| !topology.allowed_subchannels[j].is_empty())
            .fold(None, |best: Option<(usize, f64)>, j| {
                let g = mean_gain(i, j);
                match best {
                    Some((_, bg)) if bg >= g => best,
                    _ => Some((j, g)),
                }
            })
            .map(|(j, _)| j)
            .expect("macro always has an allowed sub-channel");
        members[best].push(i);
    }

    let mut x = AssociationTensor::empty(dims);
    for (j, users) in members.iter().enumerate() {
        if users.is_empty() {
            continue;
        }
        for (turn, &k) in topology.allowed_subchannels[j].iter().enumerate() {
            x.set(users[turn % users.len()], j, k, true);
        }
    }

    let p_max = params.p_max_watts();
    let mut p = PowerTensor::zeros(dims);
    for i in 0..dims.users {
        let count = x.entry_count(i);
        if count == 0 {
            continue;
        }
        let share = p_max / count as f64;
        let entries: Vec<_> = x.user_entries(i).collect();
        for e in entries {
            p.set(i, e.bs, e.sub, share);
        }
    }

    let serving = x.serving_bss();
    Ok(AllocationResult::assemble(
        x,
        p,
        h,
        params,
        ConvergenceTrace::default(),
        0,
        Vec::new(),
        serving,
    ))
}
