//! Simulation parameters: parsing, validation, defaults, and the master seed.
//!
//! The on-disk format is a flat `key=value` document. Keys match the field
//! names below; omitted keys fall back to the default highway scenario.
//! Unknown keys are rejected so typos cannot silently change a run.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// How `optimal_graph` scores candidate graphs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimalObjective {
    /// Sum of per-OBU utilities (default).
    TotalUtility,
    /// Expected packets delivered in the slot.
    ExpectedPackets,
}

impl OptimalObjective {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptimalObjective::TotalUtility => "utility",
            OptimalObjective::ExpectedPackets => "packets",
        }
    }
}

/// Two-lane one-way freeway parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MobilityConfig {
    /// Minimal speed, m/s.
    pub v_min: f64,
    /// Maximal speed, m/s.
    pub v_max: f64,
    /// Security distance between subsequent same-lane vehicles, m.
    pub d_min: f64,
    /// Maximum distance before a follower accelerates, m.
    pub d_max: f64,
    /// Acceleration step, m/s^2.
    pub accel: f64,
    /// Probability of a speed change per slot (each direction).
    pub p_speed_change: f64,
    /// Initial length of the fleet window, m.
    pub fleet_length: f64,
    /// Initial distance from the RSU to the head of the fleet window, m.
    pub rsu_distance: f64,
    /// Fixed RSU coordinate, m.
    pub rsu_position: f64,
}

/// All simulation parameters. Immutable after load; safe to share across
/// concurrent scenario runs.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    /// Number of OBUs in the network (N).
    pub n_obus: usize,
    /// Number of packets of the entire file (M).
    pub m_packets: usize,
    /// Size of one packet, bits (s).
    pub packet_size: f64,
    /// Number of V2V cognitive-radio channels (K).
    pub k_channels: usize,
    /// Number of channels each OBU senses per slot (K').
    pub k_sensed: usize,
    /// Bandwidth of the V2R channel, Hz (W).
    pub w_v2r: f64,
    /// Bandwidth of each V2V channel, Hz (W').
    pub w_v2v: f64,
    /// Linear SNR scale factor for V2R links (beta); the default is 15 dB.
    pub beta_v2r: f64,
    /// Linear SNR scale factor for V2V links (beta'); the default is 10 dB.
    pub beta_v2v: f64,
    /// Broadcasting rate of the RSU, bits/s (R_0).
    pub r0: f64,
    /// Pricing factor on received packets.
    pub gamma_in: f64,
    /// Pricing factor on transmitted packets.
    pub gamma_out: f64,
    /// Pricing factor on interference cost.
    pub gamma_cost: f64,
    /// Probability of missing a primary-user detection (P_m).
    pub p_miss: f64,
    /// Probability of a false primary-user alarm (P_f).
    pub p_false: f64,
    /// Primary-traffic arrival rate per slot (lambda).
    pub lambda_primary: f64,
    /// Slot length, seconds (T).
    pub slot_t: f64,
    /// Sensing time per channel, seconds (tau).
    pub tau_sense: f64,
    /// Strategy-history threshold that breaks formation cycles (sigma).
    pub sigma_history: u32,
    /// Line-of-sight range for V2V links, m.
    pub los_range: f64,
    /// Reference distance of the fading model, m: link SNR is
    /// `beta * |alpha|^2 * (d / ref_distance)^-4`, i.e. the configured dB
    /// figures are the mean SNR at this distance. Set to 1 to feed raw
    /// meters into the path-loss law.
    pub ref_distance: f64,
    /// Master random seed; all per-slot streams derive from it.
    pub seed: u64,
    /// Objective used by the enumeration baseline.
    pub optimal_objective: OptimalObjective,
    pub mobility: MobilityConfig,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key=value`, got `{text}`")]
    Parse { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value `{value}` for key `{key}`")]
    InvalidValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("invariant violation: {0}")]
    Invariant(String),
}

/// Parsed-but-unvalidated configuration. Unset fields take defaults when
/// finalized; `tau_sense` and `fleet_length` are derived from other fields
/// unless given explicitly.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    n_obus: Option<usize>,
    m_packets: Option<usize>,
    packet_size: Option<f64>,
    k_channels: Option<usize>,
    k_sensed: Option<usize>,
    w_v2r: Option<f64>,
    w_v2v: Option<f64>,
    beta_v2r: Option<f64>,
    beta_v2v: Option<f64>,
    r0: Option<f64>,
    gamma_in: Option<f64>,
    gamma_out: Option<f64>,
    gamma_cost: Option<f64>,
    p_miss: Option<f64>,
    p_false: Option<f64>,
    lambda_primary: Option<f64>,
    slot_t: Option<f64>,
    tau_sense: Option<f64>,
    sigma_history: Option<u32>,
    los_range: Option<f64>,
    ref_distance: Option<f64>,
    seed: Option<u64>,
    optimal_objective: Option<OptimalObjective>,
    v_min: Option<f64>,
    v_max: Option<f64>,
    d_min: Option<f64>,
    d_max: Option<f64>,
    accel: Option<f64>,
    p_speed_change: Option<f64>,
    fleet_length: Option<f64>,
    rsu_distance: Option<f64>,
    rsu_position: Option<f64>,
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl RawConfig {
    /// Parses a flat key=value document. Blank lines and `#` comments are
    /// skipped. Later assignments override earlier ones.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Parse {
                line: line_no,
                text: body.to_string(),
            })?;
            raw.set(key.trim(), value.trim(), line_no)?;
        }
        Ok(raw)
    }

    /// Assigns one key. Used both by the file parser and by CLI `--set`
    /// overrides.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        fn num<T: std::str::FromStr>(
            key: &str,
            value: &str,
            line: usize,
        ) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::InvalidValue {
                line,
                key: key.to_string(),
                value: value.to_string(),
            })
        }
        match key {
            "n_obus" => self.n_obus = Some(num(key, value, line)?),
            "m_packets" => self.m_packets = Some(num(key, value, line)?),
            "packet_size" => self.packet_size = Some(num(key, value, line)?),
            "k_channels" => self.k_channels = Some(num(key, value, line)?),
            "k_sensed" => self.k_sensed = Some(num(key, value, line)?),
            "w_v2r" => self.w_v2r = Some(num(key, value, line)?),
            "w_v2v" => self.w_v2v = Some(num(key, value, line)?),
            "beta_v2r" => self.beta_v2r = Some(num(key, value, line)?),
            "beta_v2v" => self.beta_v2v = Some(num(key, value, line)?),
            "r0" => self.r0 = Some(num(key, value, line)?),
            "gamma_in" => self.gamma_in = Some(num(key, value, line)?),
            "gamma_out" => self.gamma_out = Some(num(key, value, line)?),
            "gamma_cost" => self.gamma_cost = Some(num(key, value, line)?),
            "p_miss" => self.p_miss = Some(num(key, value, line)?),
            "p_false" => self.p_false = Some(num(key, value, line)?),
            "lambda_primary" => self.lambda_primary = Some(num(key, value, line)?),
            "slot_t" => self.slot_t = Some(num(key, value, line)?),
            "tau_sense" => self.tau_sense = Some(num(key, value, line)?),
            "sigma_history" => self.sigma_history = Some(num(key, value, line)?),
            "los_range" => self.los_range = Some(num(key, value, line)?),
            "ref_distance" => self.ref_distance = Some(num(key, value, line)?),
            "seed" => self.seed = Some(num(key, value, line)?),
            "optimal_objective" => {
                self.optimal_objective = Some(match value {
                    "utility" => OptimalObjective::TotalUtility,
                    "packets" => OptimalObjective::ExpectedPackets,
                    _ => {
                        return Err(ConfigError::InvalidValue {
                            line,
                            key: key.to_string(),
                            value: value.to_string(),
                        })
                    }
                })
            }
            "v_min" => self.v_min = Some(num(key, value, line)?),
            "v_max" => self.v_max = Some(num(key, value, line)?),
            "d_min" => self.d_min = Some(num(key, value, line)?),
            "d_max" => self.d_max = Some(num(key, value, line)?),
            "accel" => self.accel = Some(num(key, value, line)?),
            "p_speed_change" => self.p_speed_change = Some(num(key, value, line)?),
            "fleet_length" => self.fleet_length = Some(num(key, value, line)?),
            "rsu_distance" => self.rsu_distance = Some(num(key, value, line)?),
            "rsu_position" => self.rsu_position = Some(num(key, value, line)?),
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Fills defaults, derives dependent fields, and validates.
    pub fn finalize(&self) -> Result<Config, ConfigError> {
        let n_obus = self.n_obus.unwrap_or(10);
        let k_channels = self.k_channels.unwrap_or(10);
        let slot_t = self.slot_t.unwrap_or(1.0);
        let cfg = Config {
            n_obus,
            m_packets: self.m_packets.unwrap_or(100),
            packet_size: self.packet_size.unwrap_or(1e6),
            k_channels,
            k_sensed: self.k_sensed.unwrap_or(4),
            w_v2r: self.w_v2r.unwrap_or(75e6),
            w_v2v: self.w_v2v.unwrap_or(10e6),
            beta_v2r: self.beta_v2r.unwrap_or_else(|| db_to_linear(15.0)),
            beta_v2v: self.beta_v2v.unwrap_or_else(|| db_to_linear(10.0)),
            r0: self.r0.unwrap_or(5e6),
            gamma_in: self.gamma_in.unwrap_or(1.0),
            gamma_out: self.gamma_out.unwrap_or(0.5),
            gamma_cost: self.gamma_cost.unwrap_or(0.1),
            p_miss: self.p_miss.unwrap_or(0.1),
            p_false: self.p_false.unwrap_or(0.1),
            lambda_primary: self.lambda_primary.unwrap_or(0.2),
            slot_t,
            // T = K tau unless the sensing time is given explicitly.
            tau_sense: self.tau_sense.unwrap_or(slot_t / k_channels as f64),
            sigma_history: self.sigma_history.unwrap_or(3),
            los_range: self.los_range.unwrap_or(150.0),
            ref_distance: self.ref_distance.unwrap_or(6.0),
            seed: self.seed.unwrap_or(42),
            optimal_objective: self
                .optimal_objective
                .unwrap_or(OptimalObjective::TotalUtility),
            mobility: MobilityConfig {
                v_min: self.v_min.unwrap_or(10.0),
                v_max: self.v_max.unwrap_or(30.0),
                d_min: self.d_min.unwrap_or(50.0),
                d_max: self.d_max.unwrap_or(100.0),
                accel: self.accel.unwrap_or(2.0),
                p_speed_change: self.p_speed_change.unwrap_or(0.1),
                // Table scaling: the fleet window grows with the network.
                fleet_length: self.fleet_length.unwrap_or(50.0 * n_obus as f64),
                rsu_distance: self.rsu_distance.unwrap_or(350.0),
                rsu_position: self.rsu_position.unwrap_or(0.0),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses, defaults, and validates a flat key=value document.
pub fn load_config(text: &str) -> Result<Config, ConfigError> {
    RawConfig::parse(text)?.finalize()
}

impl Default for Config {
    fn default() -> Self {
        RawConfig::default().finalize().expect("defaults are valid")
    }
}

impl Config {
    // Negated comparisons reject NaN values, which `<=` would let through.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn fail(msg: impl Into<String>) -> Result<(), ConfigError> {
            Err(ConfigError::Invariant(msg.into()))
        }
        if self.n_obus == 0 {
            return fail("n_obus must be positive");
        }
        if self.m_packets == 0 {
            return fail("m_packets must be positive");
        }
        if !(self.packet_size > 0.0) {
            return fail("packet_size must be positive");
        }
        if self.k_channels == 0 {
            return fail("k_channels must be positive");
        }
        if self.k_sensed == 0 || self.k_sensed > self.k_channels {
            return fail("k_sensed must satisfy 1 <= k_sensed <= k_channels");
        }
        if !(self.w_v2r > 0.0) || !(self.w_v2v > 0.0) {
            return fail("bandwidths w_v2r and w_v2v must be positive");
        }
        if !(self.beta_v2r > 0.0) || !(self.beta_v2v > 0.0) {
            return fail("beta_v2r and beta_v2v must be positive");
        }
        if !(self.r0 > 0.0) {
            return fail("r0 must be positive");
        }
        if !(self.gamma_in > 0.0) || !(self.gamma_out > 0.0) || !(self.gamma_cost > 0.0) {
            return fail("pricing factors gamma_in, gamma_out, gamma_cost must be positive");
        }
        if !(0.0..=1.0).contains(&self.p_miss) {
            return fail("p_miss must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.p_false) {
            return fail("p_false must lie in [0, 1]");
        }
        if !(self.lambda_primary >= 0.0) {
            return fail("lambda_primary must be nonnegative");
        }
        if !(self.slot_t > 0.0) {
            return fail("slot_t must be positive");
        }
        if !(self.tau_sense >= 0.0) {
            return fail("tau_sense must be nonnegative");
        }
        if self.slot_t < self.k_sensed as f64 * self.tau_sense {
            return fail("slot_t must be at least k_sensed * tau_sense");
        }
        if self.sigma_history == 0 {
            return fail("sigma_history must be positive");
        }
        if !(self.los_range > 0.0) {
            return fail("los_range must be positive");
        }
        if !(self.ref_distance > 0.0) {
            return fail("ref_distance must be positive");
        }
        // Keeps the channel-availability base (K*P0 - 1)/(K*P0) positive.
        if self.k_channels as f64 * (-self.lambda_primary).exp() <= 1.0 {
            return fail("k_channels * exp(-lambda_primary) must exceed 1");
        }
        let m = &self.mobility;
        if !(m.v_min > 0.0 && m.v_max > m.v_min) {
            return fail("mobility speeds must satisfy 0 < v_min < v_max");
        }
        if !(m.d_min > 0.0 && m.d_max > m.d_min) {
            return fail("mobility distances must satisfy 0 < d_min < d_max");
        }
        if !(0.0..=0.5).contains(&m.p_speed_change) {
            return fail("p_speed_change must lie in [0, 0.5] so 1 - 2p stays a probability");
        }
        if !(m.accel > 0.0) {
            return fail("accel must be positive");
        }
        if !(m.fleet_length > 0.0) {
            return fail("fleet_length must be positive");
        }
        if !(m.rsu_distance >= 0.0) {
            return fail("rsu_distance must be nonnegative");
        }
        Ok(())
    }

    /// Non-fatal configuration oddities worth surfacing to the user.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.gamma_out <= self.gamma_in {
            out.push(format!(
                "gamma_out ({}) <= gamma_in ({}); transmitters are priced below receivers",
                self.gamma_out, self.gamma_in
            ));
        }
        out
    }

    /// Serializes all fields back to the key=value format. Reloading the
    /// result reproduces this config exactly.
    pub fn to_text(&self) -> String {
        let m = &self.mobility;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        kv("n_obus", self.n_obus.to_string());
        kv("m_packets", self.m_packets.to_string());
        kv("packet_size", self.packet_size.to_string());
        kv("k_channels", self.k_channels.to_string());
        kv("k_sensed", self.k_sensed.to_string());
        kv("w_v2r", self.w_v2r.to_string());
        kv("w_v2v", self.w_v2v.to_string());
        kv("beta_v2r", self.beta_v2r.to_string());
        kv("beta_v2v", self.beta_v2v.to_string());
        kv("r0", self.r0.to_string());
        kv("gamma_in", self.gamma_in.to_string());
        kv("gamma_out", self.gamma_out.to_string());
        kv("gamma_cost", self.gamma_cost.to_string());
        kv("p_miss", self.p_miss.to_string());
        kv("p_false", self.p_false.to_string());
        kv("lambda_primary", self.lambda_primary.to_string());
        kv("slot_t", self.slot_t.to_string());
        kv("tau_sense", self.tau_sense.to_string());
        kv("sigma_history", self.sigma_history.to_string());
        kv("los_range", self.los_range.to_string());
        kv("ref_distance", self.ref_distance.to_string());
        kv("seed", self.seed.to_string());
        kv("optimal_objective", self.optimal_objective.as_str().into());
        kv("v_min", m.v_min.to_string());
        kv("v_max", m.v_max.to_string());
        kv("d_min", m.d_min.to_string());
        kv("d_max", m.d_max.to_string());
        kv("accel", m.accel.to_string());
        kv("p_speed_change", m.p_speed_change.to_string());
        kv("fleet_length", m.fleet_length.to_string());
        kv("rsu_distance", m.rsu_distance.to_string());
        kv("rsu_position", m.rsu_position.to_string());
        s
    }
}

/// Derives a named, reproducible RNG stream from the master seed.
///
/// Every consumer of randomness gets its own `(label, indices)` stream, so a
/// module can be re-run in isolation and still see the exact draws a full
/// scenario would have given it.
pub fn stream(master_seed: u64, label: &str, indices: &[u64]) -> ChaCha12Rng {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    for ix in indices {
        h.update(ix.to_le_bytes());
    }
    ChaCha12Rng::from_seed(h.finalize().into())
}
