//! Network drops, large-scale path loss with log-normal shadowing, Rayleigh
//! fast fading, and the uplink SINR.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::assignment::AssociationTensor;
use crate::config::{FemtoLayout, Placement, SimConfig};
use crate::error::{Error, Result};
use crate::power::PowerTensor;
use crate::tensor::{Dims, Tensor3};

/// Index of the macro BS in every BS-indexed collection.
pub const MACRO_BS: usize = 0;

const TOPOLOGY_STREAM: u64 = 1;
const CHANNEL_STREAM: u64 = 2;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[inline]
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Macro,
    Femto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Which transmissions count as interference at a receiving BS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterferenceModel {
    /// Every other user transmitting on the sub-channel, whatever BS it
    /// addresses.
    #[default]
    CoChannel,
    /// Only other users addressing *other* BSs on the sub-channel; users
    /// sharing the receiving BS's slot do not interfere with each other.
    OtherCells,
}

/// Radio parameters. Defaults are the two-tier LTE uplink setup: 20
/// sub-channels of 180 kHz, -111.45 dBm noise per sub-channel, 20 dBm
/// per-user budget, macro `34 + 40 log10 d`, femto `37 + 30 log10 d`,
/// 8 dB shadowing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub macro_fixed_loss_db: f64,
    pub femto_fixed_loss_db: f64,
    pub macro_exponent: f64,
    pub femto_exponent: f64,
    pub shadow_sigma_db: f64,
    /// Noise power over one sub-channel (N0·Δf), dBm.
    pub noise_power_dbm: f64,
    pub subchannel_bandwidth_hz: f64,
    pub p_max_dbm: f64,
    /// Distances below this are clamped before taking the logarithm.
    pub min_distance_m: f64,
    pub interference: InterferenceModel,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            macro_fixed_loss_db: 34.0,
            femto_fixed_loss_db: 37.0,
            macro_exponent: 4.0,
            femto_exponent: 3.0,
            shadow_sigma_db: 8.0,
            noise_power_dbm: -111.45,
            subchannel_bandwidth_hz: 180e3,
            p_max_dbm: 20.0,
            min_distance_m: 1.0,
            interference: InterferenceModel::CoChannel,
        }
    }
}

impl ChannelParams {
    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm)
    }

    pub fn p_max_watts(&self) -> f64 {
        dbm_to_watts(self.p_max_dbm)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("macro_fixed_loss_db", self.macro_fixed_loss_db),
            ("femto_fixed_loss_db", self.femto_fixed_loss_db),
            ("macro_exponent", self.macro_exponent),
            ("femto_exponent", self.femto_exponent),
            ("shadow_sigma_db", self.shadow_sigma_db),
            ("noise_power_dbm", self.noise_power_dbm),
            ("p_max_dbm", self.p_max_dbm),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {v}")));
            }
        }
        if self.shadow_sigma_db < 0.0 {
            return Err(Error::Config("shadow_sigma_db must be >= 0".into()));
        }
        if !(self.subchannel_bandwidth_hz.is_finite() && self.subchannel_bandwidth_hz > 0.0) {
            return Err(Error::Config("subchannel_bandwidth_hz must be > 0".into()));
        }
        if !(self.min_distance_m.is_finite() && self.min_distance_m > 0.0) {
            return Err(Error::Config("min_distance_m must be > 0".into()));
        }
        let p = self.p_max_watts();
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::Config(format!("p_max_dbm {} is not a usable power", self.p_max_dbm)));
        }
        let n = self.noise_watts();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Config(format!(
                "noise_power_dbm {} is not a usable power",
                self.noise_power_dbm
            )));
        }
        Ok(())
    }
}

/// `L_fixed + 10 α log10(max(d, d_min))` in dB.
pub fn path_loss_db(distance: f64, tier: Tier, params: &ChannelParams) -> f64 {
    let d = distance.max(params.min_distance_m);
    let (fixed, alpha) = match tier {
        Tier::Macro => (params.macro_fixed_loss_db, params.macro_exponent),
        Tier::Femto => (params.femto_fixed_loss_db, params.femto_exponent),
    };
    fixed + 10.0 * alpha * d.log10()
}

/// One drop's geometry. BS 0 is the macro; BSs `1..` are femtos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub area_side: f64,
    pub bs_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
    pub num_subchannels: usize,
    /// Sorted allowed sub-channel indices per BS.
    pub allowed_subchannels: Vec<Vec<usize>>,
}

impl NetworkTopology {
    /// Builds a topology with the contiguous-prefix reuse rule: the macro
    /// may use `0..macro_subchannels`, every femto uses all sub-channels.
    pub fn new(
        area_side: f64,
        femto_positions: Vec<Point>,
        user_positions: Vec<Point>,
        num_subchannels: usize,
        macro_subchannels: usize,
    ) -> Result<Self> {
        if user_positions.is_empty() {
            return Err(Error::Config("topology needs at least one user".into()));
        }
        if num_subchannels == 0 {
            return Err(Error::Config("topology needs at least one sub-channel".into()));
        }
        if macro_subchannels == 0 || macro_subchannels > num_subchannels {
            return Err(Error::Config(format!(
                "macro_subchannels must lie in 1..={num_subchannels}"
            )));
        }
        let mut bs_positions = Vec::with_capacity(1 + femto_positions.len());
        bs_positions.push(Point::ORIGIN);
        bs_positions.extend(femto_positions);
        let mut allowed = vec![(0..macro_subchannels).collect::<Vec<_>>()];
        allowed.extend((1..bs_positions.len()).map(|_| (0..num_subchannels).collect()));
        Ok(Self {
            area_side,
            bs_positions,
            user_positions,
            num_subchannels,
            allowed_subchannels: allowed,
        })
    }

    pub fn num_users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn num_bss(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.num_users(), self.num_bss(), self.num_subchannels)
    }

    pub fn tier(&self, bs: usize) -> Tier {
        if bs == MACRO_BS {
            Tier::Macro
        } else {
            Tier::Femto
        }
    }

    pub fn distance(&self, user: usize, bs: usize) -> f64 {
        self.user_positions[user].distance(&self.bs_positions[bs])
    }

    pub fn is_allowed(&self, bs: usize, sub: usize) -> bool {
        self.allowed_subchannels[bs].binary_search(&sub).is_ok()
    }
}

fn uniform_in_square(rng: &mut impl Rng, half: f64) -> Point {
    let x = half * (2.0 * rng.gen::<f64>() - 1.0);
    let y = half * (2.0 * rng.gen::<f64>() - 1.0);
    Point::new(x, y)
}

fn uniform_in_disk(rng: &mut impl Rng, center: Point, radius: f64, half: f64) -> Point {
    let r = radius * rng.gen::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.gen::<f64>();
    Point::new(
        (center.x + r * theta.cos()).clamp(-half, half),
        (center.y + r * theta.sin()).clamp(-half, half),
    )
}

/// Draws one drop: macro at the origin, femtos per `config.femto_layout`,
/// users per `config.placement`.
pub fn generate_topology(config: &SimConfig, seed: u64) -> Result<NetworkTopology> {
    config.validate()?;
    let mut rng = stream_rng(seed, TOPOLOGY_STREAM);
    let half = config.area_side / 2.0;

    let femtos: Vec<Point> = match config.femto_layout {
        FemtoLayout::Ring => {
            let radius = config.area_side / (2.0 * std::f64::consts::SQRT_2);
            let n = config.num_femtos as f64;
            (0..config.num_femtos)
                .map(|f| {
                    let theta = std::f64::consts::FRAC_PI_4 + std::f64::consts::TAU * f as f64 / n;
                    Point::new(radius * theta.cos(), radius * theta.sin())
                })
                .collect()
        }
        FemtoLayout::Uniform => (0..config.num_femtos)
            .map(|_| uniform_in_square(&mut rng, half))
            .collect(),
        FemtoLayout::Explicit => config
            .femto_positions
            .iter()
            .map(|&[x, y]| Point::new(x, y))
            .collect(),
    };

    let users = (0..config.num_users)
        .map(|_| match config.placement {
            Placement::Uniform => uniform_in_square(&mut rng, half),
            Placement::NearMacro => {
                uniform_in_disk(&mut rng, Point::ORIGIN, config.near_macro_radius, half)
            }
            Placement::NearFemto => {
                let f = rng.gen_range(0..femtos.len());
                uniform_in_disk(&mut rng, femtos[f], config.near_femto_radius, half)
            }
        })
        .collect();

    NetworkTopology::new(
        config.area_side,
        femtos,
        users,
        config.num_subchannels,
        config.macro_subchannels,
    )
}

/// Fast-fading law. `Unit` pins every fading power to 1 and exists for
/// deterministic checks of the large-scale model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fading {
    #[default]
    Rayleigh,
    Unit,
}

/// Linear uplink power gains `h[user][bs][sub]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTensor {
    pub gains: Tensor3<f64>,
    /// Linear large-scale gain per `(user, bs)`, row-major; `E[h] = g`.
    pub large_scale: Vec<f64>,
    pub seed: u64,
}

impl ChannelTensor {
    #[inline]
    pub fn dims(&self) -> Dims {
        self.gains.dims()
    }

    #[inline]
    pub fn gain(&self, user: usize, bs: usize, sub: usize) -> f64 {
        self.gains.at(user, bs, sub)
    }

    pub fn large_scale_gain(&self, user: usize, bs: usize) -> f64 {
        self.large_scale[user * self.dims().bss + bs]
    }

    /// Wraps hand-built gains (tests, external channel data).
    pub fn from_gains(gains: Tensor3<f64>) -> Result<Self> {
        if let Some(g) = gains.as_slice().iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::Contract(format!("channel gain {g} is not positive and finite")));
        }
        let d = gains.dims();
        let large_scale = (0..d.users)
            .flat_map(|i| (0..d.bss).map(move |j| (i, j)))
            .map(|(i, j)| {
                (0..d.subchannels).map(|k| gains.at(i, j, k)).sum::<f64>() / d.subchannels as f64
            })
            .collect();
        Ok(Self {
            gains,
            large_scale,
            seed: 0,
        })
    }
}

pub fn generate_channel_tensor(
    topology: &NetworkTopology,
    params: &ChannelParams,
    seed: u64,
) -> ChannelTensor {
    generate_channel_tensor_with(topology, params, seed, Fading::Rayleigh)
}

/// Shadowing is drawn once per `(user, bs)` and shared by all sub-channels;
/// fast-fading power is drawn per `(user, bs, sub)`.
pub fn generate_channel_tensor_with(
    topology: &NetworkTopology,
    params: &ChannelParams,
    seed: u64,
    fading: Fading,
) -> ChannelTensor {
    let dims = topology.dims();
    let mut rng = stream_rng(seed, CHANNEL_STREAM);
    let shadow = Normal::new(0.0, params.shadow_sigma_db).expect("validated sigma");
    let mut large_scale = Vec::with_capacity(dims.users * dims.bss);
    let mut data = Vec::with_capacity(dims.len());
    for i in 0..dims.users {
        for j in 0..dims.bss {
            let loss = path_loss_db(topology.distance(i, j), topology.tier(j), params);
            let s = if params.shadow_sigma_db > 0.0 {
                shadow.sample(&mut rng)
            } else {
                0.0
            };
            let g = 10f64.powf(-(loss + s) / 10.0);
            large_scale.push(g);
            for _ in 0..dims.subchannels {
                let f = match fading {
                    Fading::Rayleigh => {
                        let f: f64 = Exp1.sample(&mut rng);
                        f.max(f64::MIN_POSITIVE)
                    }
                    Fading::Unit => 1.0,
                };
                data.push((g * f).max(f64::MIN_POSITIVE));
            }
        }
    }
    let mut it = data.into_iter();
    let gains = Tensor3::from_fn(dims, |_, _, _| it.next().expect("sized"));
    ChannelTensor {
        gains,
        large_scale,
        seed,
    }
}

/// Interference at `bs` on `sub` seen by `user`, by direct summation over
/// the other users' active entries on `sub`. Under
/// [`InterferenceModel::OtherCells`] entries addressed to `bs` itself are
/// left out.
pub fn interference(
    user: usize,
    bs: usize,
    sub: usize,
    x: &AssociationTensor,
    p: &PowerTensor,
    h: &ChannelTensor,
    model: InterferenceModel,
) -> f64 {
    let d = h.dims();
    let mut total = 0.0;
    for l in (0..d.users).filter(|&l| l != user) {
        let gain = h.gain(l, bs, sub);
        for s in 0..d.bss {
            if model == InterferenceModel::OtherCells && s == bs {
                continue;
            }
            if x.is_active(l, s, sub) {
                total += p.at(l, s, sub) * gain;
            }
        }
    }
    total
}

/// SINR at BS `bs` from `user` on `sub`, by direct summation.
pub fn sinr(
    user: usize,
    bs: usize,
    sub: usize,
    x: &AssociationTensor,
    p: &PowerTensor,
    h: &ChannelTensor,
    params: &ChannelParams,
) -> Result<f64> {
    if !x.is_active(user, bs, sub) {
        return Err(Error::Contract(format!(
            "SINR requested for inactive entry ({user}, {bs}, {sub})"
        )));
    }
    let signal = p.at(user, bs, sub) * h.gain(user, bs, sub);
    let i = interference(user, bs, sub, x, p, h, params.interference);
    Ok(signal / (i + params.noise_watts()))
}
