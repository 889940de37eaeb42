//! Two-tier downlink model that turns radio geometry into assignment
//! instances: base stations and users sampled uniformly on a disc, RF links
//! with power-law path loss and unit-mean exponential fading, sub-terahertz
//! links with molecular absorption and probabilistic beam alignment. The
//! per-link spectral efficiencies form the profit matrix of a unit-weight
//! [`GapInstance`] whose capacities are the per-BS user quota.

use crate::dataset::{Dataset, DatasetHeader, Example};
use crate::error::{Error, Result};
use crate::gap::GapInstance;
use crate::seed::{stream_rng, TAG_EXAMPLE, TAG_TOPOLOGY};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// Speed of light in m/s, as used by the free-space reference gain.
pub const C_LIGHT: f64 = 3.0e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Rf,
    Thz,
}

/// How aggregate interference at a receiver is assembled.
///
/// `PerUserOtherBs` (default) sums, for user i evaluating BS j, the links
/// from every other same-tier BS to user i — the standard downlink model.
/// `AsPrintedAllPairs` instead sums over every same-tier (user, BS) pair
/// except the serving one, reproducing a literal double-sum formulation that
/// counts other users' receive channels as interference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceMode {
    #[default]
    PerUserOtherBs,
    AsPrintedAllPairs,
}

impl FromStr for InterferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_user_other_bs" => Ok(Self::PerUserOtherBs),
            "as_printed_all_pairs" => Ok(Self::AsPrintedAllPairs),
            other => Err(Error::InvalidValue(format!(
                "unknown interference mode {other:?} (expected per_user_other_bs or as_printed_all_pairs)"
            ))),
        }
    }
}

/// Scenario description: network size, cell geometry, and per-tier channel
/// parameters. Angles are radians, gains dB, noise dBm; conversion to linear
/// units happens inside the channel functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n_users: usize,
    pub n_bs: usize,
    pub n_rf_bs: usize,
    pub n_thz_bs: usize,
    pub radius: f64,
    pub f_rf: f64,
    pub f_thz: f64,
    pub alpha: f64,
    pub k_abs: f64,
    pub p_rf: f64,
    pub p_thz: f64,
    pub g_tx_max_db: f64,
    pub g_rx_max_db: f64,
    pub g_tx_min_db: f64,
    pub g_rx_min_db: f64,
    pub beamwidth_tx: f64,
    pub beamwidth_rx: f64,
    pub rf_gain_db: f64,
    pub noise_power_dbm: f64,
    pub bandwidth: f64,
    pub min_distance: f64,
    pub bs_quota: usize,
    pub interference_mode: InterferenceMode,
}

impl Default for NetworkConfig {
    /// Four users, two RF + two sub-THz base stations on a 100 m disc:
    /// 2.1 GHz / 1 THz carriers, path-loss exponent 2.5, absorption
    /// 0.05 m⁻¹, 1 W transmit power, 25 dB main-lobe and 0 dB side-lobe
    /// beam gains, 30° beamwidths, −70 dBm noise, unit bandwidth.
    fn default() -> Self {
        Self {
            n_users: 4,
            n_bs: 4,
            n_rf_bs: 2,
            n_thz_bs: 2,
            radius: 100.0,
            f_rf: 2.1e9,
            f_thz: 1.0e12,
            alpha: 2.5,
            k_abs: 0.05,
            p_rf: 1.0,
            p_thz: 1.0,
            g_tx_max_db: 25.0,
            g_rx_max_db: 25.0,
            g_tx_min_db: 0.0,
            g_rx_min_db: 0.0,
            beamwidth_tx: std::f64::consts::PI / 6.0,
            beamwidth_rx: std::f64::consts::PI / 6.0,
            rf_gain_db: 0.0,
            noise_power_dbm: -70.0,
            bandwidth: 1.0,
            min_distance: 1.0,
            bs_quota: 1,
            interference_mode: InterferenceMode::PerUserOtherBs,
        }
    }
}

/// Smallest uniform per-BS quota that keeps assigning every user feasible.
pub fn default_quota(n_users: usize, n_bs: usize) -> usize {
    n_users.div_ceil(n_bs)
}

impl NetworkConfig {
    /// Default parameters resized to `n_users` × `n_bs`: tiers split as
    /// evenly as possible (RF gets the extra BS when odd) and the quota set
    /// to the smallest feasible uniform value.
    pub fn with_network_size(n_users: usize, n_bs: usize) -> Self {
        let n_rf_bs = n_bs.div_ceil(2);
        Self {
            n_users,
            n_bs,
            n_rf_bs,
            n_thz_bs: n_bs - n_rf_bs,
            bs_quota: default_quota(n_users.max(1), n_bs.max(1)),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_bs == 0 {
            return Err(Error::InvalidValue("network needs at least one user and one BS".into()));
        }
        if self.n_rf_bs + self.n_thz_bs != self.n_bs {
            return Err(Error::InvalidValue(format!(
                "tier sizes {} + {} != n_bs {}",
                self.n_rf_bs, self.n_thz_bs, self.n_bs
            )));
        }
        if !(self.min_distance > 0.0 && self.radius > self.min_distance) {
            return Err(Error::InvalidValue(format!(
                "need radius > min_distance > 0, got {} and {}",
                self.radius, self.min_distance
            )));
        }
        if self.f_rf <= 0.0 || self.f_thz <= 0.0 {
            return Err(Error::InvalidValue("carrier frequencies must be positive".into()));
        }
        if self.alpha <= 0.0 {
            return Err(Error::InvalidValue(format!("path-loss exponent {}", self.alpha)));
        }
        if self.k_abs < 0.0 {
            return Err(Error::InvalidValue(format!("absorption coefficient {}", self.k_abs)));
        }
        if self.p_rf <= 0.0 || self.p_thz <= 0.0 {
            return Err(Error::InvalidValue("transmit powers must be positive".into()));
        }
        if self.bandwidth <= 0.0 {
            return Err(Error::InvalidValue(format!("bandwidth {}", self.bandwidth)));
        }
        for w in [self.beamwidth_tx, self.beamwidth_rx] {
            if !(w > 0.0 && w < 2.0 * std::f64::consts::PI) {
                return Err(Error::InvalidValue(format!(
                    "beamwidth {w} rad outside (0, 2π)"
                )));
            }
        }
        let finite = [
            self.radius,
            self.f_rf,
            self.f_thz,
            self.alpha,
            self.k_abs,
            self.p_rf,
            self.p_thz,
            self.g_tx_max_db,
            self.g_rx_max_db,
            self.g_tx_min_db,
            self.g_rx_min_db,
            self.beamwidth_tx,
            self.beamwidth_rx,
            self.rf_gain_db,
            self.noise_power_dbm,
            self.bandwidth,
            self.min_distance,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("network parameter".into()));
        }
        if self.bs_quota == 0 {
            return Err(Error::InvalidValue("bs_quota must be at least 1".into()));
        }
        if self.bs_quota * self.n_bs < self.n_users {
            return Err(Error::Infeasible(format!(
                "total quota {}×{} cannot serve {} users",
                self.bs_quota, self.n_bs, self.n_users
            )));
        }
        Ok(())
    }

    /// Fraction of the circle covered by the transmit main lobe.
    pub fn f_tx(&self) -> f64 {
        self.beamwidth_tx / (2.0 * std::f64::consts::PI)
    }

    /// Fraction of the circle covered by the receive main lobe.
    pub fn f_rx(&self) -> f64 {
        self.beamwidth_rx / (2.0 * std::f64::consts::PI)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Free-space reference gain γ = (c / 4πf)² at carrier frequency `f` Hz.
pub fn gamma(f: f64) -> f64 {
    let x = C_LIGHT / (4.0 * std::f64::consts::PI * f);
    x * x
}

/// One sampled network: positions, per-pair distances, and the random
/// channel state (RF fading, sub-THz alignment gains) for every link.
///
/// Base stations occupy columns 0..n_rf_bs (RF) then n_rf_bs..n_bs (THz);
/// `rf_fading` is indexed by RF column, `alignment_gains` by THz column
/// offset by n_rf_bs.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRealization {
    pub user_positions: Vec<[f64; 2]>,
    pub bs_positions: Vec<[f64; 2]>,
    pub bs_tiers: Vec<Tier>,
    pub rf_fading: Array2<f64>,
    pub alignment_gains: Array2<f64>,
    pub distances: Array2<f64>,
}

fn sample_disc_point(rng: &mut ChaCha8Rng, radius: f64) -> [f64; 2] {
    // Area-uniform: radius via square root of a uniform draw.
    let r = radius * rng.gen::<f64>().sqrt();
    let theta = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
    [r * theta.cos(), r * theta.sin()]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Beam-alignment gain for one interfering sub-THz link: one uniform draw
/// selects among the four lobe combinations with probabilities
/// {F_tx·F_rx, F_tx(1−F_rx), (1−F_tx)F_rx, (1−F_tx)(1−F_rx)}.
pub fn draw_alignment_gain(rng: &mut ChaCha8Rng, cfg: &NetworkConfig) -> f64 {
    let (f_tx, f_rx) = (cfg.f_tx(), cfg.f_rx());
    let g_tx_max = db_to_linear(cfg.g_tx_max_db);
    let g_rx_max = db_to_linear(cfg.g_rx_max_db);
    let g_tx_min = db_to_linear(cfg.g_tx_min_db);
    let g_rx_min = db_to_linear(cfg.g_rx_min_db);
    let u = rng.gen::<f64>();
    let c1 = f_tx * f_rx;
    let c2 = c1 + f_tx * (1.0 - f_rx);
    let c3 = c2 + (1.0 - f_tx) * f_rx;
    if u < c1 {
        g_tx_max * g_rx_max
    } else if u < c2 {
        g_tx_max * g_rx_min
    } else if u < c3 {
        g_tx_min * g_rx_max
    } else {
        g_tx_min * g_rx_min
    }
}

fn sample_topology_with_rng(cfg: &NetworkConfig, rng: &mut ChaCha8Rng) -> NetworkRealization {
    let (i_n, j_n) = (cfg.n_users, cfg.n_bs);

    // Draw order is a reproducibility contract: BS positions, then each
    // user's position (with resampling), then RF fading row-major, then
    // alignment gains row-major.
    let bs_positions: Vec<[f64; 2]> = (0..j_n).map(|_| sample_disc_point(rng, cfg.radius)).collect();
    let bs_tiers: Vec<Tier> = (0..j_n)
        .map(|j| if j < cfg.n_rf_bs { Tier::Rf } else { Tier::Thz })
        .collect();

    let mut user_positions = Vec::with_capacity(i_n);
    let mut distances = Array2::zeros((i_n, j_n));
    for i in 0..i_n {
        // Resample users that land inside any BS's exclusion radius; after
        // a generous cap, keep the position and clamp the offending
        // distances so the far-field channel models stay well defined.
        let mut pos = sample_disc_point(rng, cfg.radius);
        for _ in 0..10_000 {
            if bs_positions.iter().all(|b| dist(pos, *b) >= cfg.min_distance) {
                break;
            }
            pos = sample_disc_point(rng, cfg.radius);
        }
        for j in 0..j_n {
            distances[[i, j]] = dist(pos, bs_positions[j]).max(cfg.min_distance);
        }
        user_positions.push(pos);
    }

    let rf_fading = Array2::from_shape_fn((i_n, cfg.n_rf_bs), |_| Exp1.sample(rng));
    let alignment_gains =
        Array2::from_shape_fn((i_n, cfg.n_thz_bs), |_| draw_alignment_gain(rng, cfg));

    NetworkRealization {
        user_positions,
        bs_positions,
        bs_tiers,
        rf_fading,
        alignment_gains,
        distances,
    }
}

/// Sample user and BS positions uniformly on the disc plus all per-link
/// channel state. Deterministic per (cfg, seed).
pub fn sample_topology(cfg: &NetworkConfig, seed: u64) -> Result<NetworkRealization> {
    cfg.validate()?;
    let mut rng = stream_rng(seed, 0, TAG_TOPOLOGY);
    Ok(sample_topology_with_rng(cfg, &mut rng))
}

/// RF link power gain γ_R · d^(−α) · χ.
pub fn rf_channel_power(distance: f64, fading: f64, cfg: &NetworkConfig) -> f64 {
    gamma(cfg.f_rf) * distance.powf(-cfg.alpha) * fading
}

/// Sub-THz link power gain γ_T · exp(−k_abs·d) / d² (absorption times
/// spreading loss).
pub fn thz_channel_power(distance: f64, cfg: &NetworkConfig) -> f64 {
    gamma(cfg.f_thz) * (-cfg.k_abs * distance).exp() / (distance * distance)
}

fn check_realization(real: &NetworkRealization, cfg: &NetworkConfig) -> Result<()> {
    if real.user_positions.len() != cfg.n_users
        || real.bs_positions.len() != cfg.n_bs
        || real.bs_tiers.len() != cfg.n_bs
        || real.distances.dim() != (cfg.n_users, cfg.n_bs)
        || real.rf_fading.dim() != (cfg.n_users, cfg.n_rf_bs)
        || real.alignment_gains.dim() != (cfg.n_users, cfg.n_thz_bs)
    {
        return Err(Error::DimensionMismatch("realization does not match config".into()));
    }
    Ok(())
}

/// Linear SINR for every (user, BS) pair. Serving sub-THz links see the
/// max·max beam gain (aligned by assumption); interfering ones use their
/// drawn alignment gains. The tiers occupy disjoint bands, so interference
/// never crosses tiers; aggregation follows `cfg.interference_mode`.
pub fn sinr_matrix(real: &NetworkRealization, cfg: &NetworkConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    check_realization(real, cfg)?;
    let (i_n, j_n, n_rf) = (cfg.n_users, cfg.n_bs, cfg.n_rf_bs);
    let noise = dbm_to_watts(cfg.noise_power_dbm);
    let rf_gain = db_to_linear(cfg.rf_gain_db);
    let g_serving = db_to_linear(cfg.g_tx_max_db) * db_to_linear(cfg.g_rx_max_db);

    // Received powers per same-tier link: RF links carry the same power
    // whether serving or interfering; sub-THz links differ (aligned gain
    // when serving, drawn lobe product when interfering).
    let mut rf_power = Array2::zeros((i_n, n_rf));
    for i in 0..i_n {
        for m in 0..n_rf {
            rf_power[[i, m]] = cfg.p_rf
                * rf_gain
                * rf_channel_power(real.distances[[i, m]], real.rf_fading[[i, m]], cfg);
        }
    }
    let n_thz = cfg.n_thz_bs;
    let mut thz_serving = Array2::zeros((i_n, n_thz));
    let mut thz_interfering = Array2::zeros((i_n, n_thz));
    for i in 0..i_n {
        for m in 0..n_thz {
            let h = thz_channel_power(real.distances[[i, n_rf + m]], cfg);
            thz_serving[[i, m]] = cfg.p_thz * g_serving * h;
            thz_interfering[[i, m]] = cfg.p_thz * real.alignment_gains[[i, m]] * h;
        }
    }

    let rf_total: f64 = rf_power.sum();
    let thz_interfering_total: f64 = thz_interfering.sum();

    let mut sinr = Array2::zeros((i_n, j_n));
    for i in 0..i_n {
        let rf_row: f64 = rf_power.row(i).sum();
        let thz_row: f64 = thz_interfering.row(i).sum();
        for j in 0..j_n {
            let (signal, interference) = if j < n_rf {
                let agg = match cfg.interference_mode {
                    InterferenceMode::PerUserOtherBs => rf_row - rf_power[[i, j]],
                    InterferenceMode::AsPrintedAllPairs => rf_total - rf_power[[i, j]],
                };
                (rf_power[[i, j]], agg)
            } else {
                let m = j - n_rf;
                let agg = match cfg.interference_mode {
                    InterferenceMode::PerUserOtherBs => thz_row - thz_interfering[[i, m]],
                    InterferenceMode::AsPrintedAllPairs => {
                        thz_interfering_total - thz_interfering[[i, m]]
                    }
                };
                (thz_serving[[i, m]], agg)
            };
            sinr[[i, j]] = signal / (noise + interference);
        }
    }
    Ok(sinr)
}

/// Shannon spectral efficiency of one link, scaled by the bandwidth.
pub fn rate_from_sinr(sinr: f64, bandwidth: f64) -> f64 {
    bandwidth * (1.0 + sinr).log2()
}

/// Achievable rate W·log₂(1 + SINR) for every (user, BS) pair — the profit
/// matrix of the association problem.
pub fn rate_matrix(real: &NetworkRealization, cfg: &NetworkConfig) -> Result<Array2<f64>> {
    Ok(sinr_matrix(real, cfg)?.mapv(|s| rate_from_sinr(s, cfg.bandwidth)))
}

/// Build one assignment instance from a sampled network: profits are the
/// rates, every user consumes one slot, every BS offers `bs_quota` slots.
pub fn instance_from_realization(
    real: &NetworkRealization,
    cfg: &NetworkConfig,
) -> Result<GapInstance> {
    let rates = rate_matrix(real, cfg)?;
    let capacities = ndarray::Array1::from_elem(cfg.n_bs, cfg.bs_quota as f64);
    GapInstance::with_unit_weights(rates, capacities)
}

/// Sample `n_examples` independent networks; each example's feature vector
/// is its row-major flattened rate matrix and its instance the matching
/// unit-weight assignment problem. Example k draws from a private stream
/// keyed by (seed, k), so generation order cannot leak between examples.
pub fn generate_dataset(cfg: &NetworkConfig, n_examples: usize, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    if n_examples == 0 {
        return Err(Error::EmptyInput("dataset size"));
    }
    let mut examples = Vec::with_capacity(n_examples);
    for k in 0..n_examples {
        let mut rng = stream_rng(seed, k as u64, TAG_EXAMPLE);
        let real = sample_topology_with_rng(cfg, &mut rng);
        let instance = instance_from_realization(&real, cfg)?;
        let features = instance.profits().iter().copied().collect();
        examples.push(Example { features, instance });
    }
    Ok(Dataset {
        header: DatasetHeader {
            version: 1,
            config: cfg.clone(),
            seed,
            n: n_examples,
        },
        examples,
    })
}
