//! Experiment configuration: flat `key = value` text with `#` comments.
//!
//! Every physical parameter defaults to the reference scenario (1 W PA cap,
//! 22% efficiency at the cap, 10 dB back-off, -96 dBm noise, 15 W fixed and
//! 0.7 W per-antenna circuit power, users between 35 m and 250 m), so an
//! empty file is a valid configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::{CellGeometry, ChannelKind, FrequencyCorrelation, LosPhase, DEFAULT_SINR_REFERENCE};
use crate::error::{Error, Result};
use crate::model::{BsModel, PaModel, DEFAULT_ACTIVE_THRESHOLD};
use crate::oracle::{OracleSettings, SizeGuard};
use crate::precoding::FixedPointConfig;
use crate::{db_to_linear, dbm_to_watts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrecoderKind {
    Zf,
    MinPa,
    Saturating,
}

impl PrecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            PrecoderKind::Zf => "zf",
            PrecoderKind::MinPa => "min_pa",
            PrecoderKind::Saturating => "saturating",
        }
    }

    /// Solvers that assume the per-antenna cap is never binding.
    pub fn ignores_power_cap(self) -> bool {
        !matches!(self, PrecoderKind::Saturating)
    }
}

impl FromStr for PrecoderKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "zf" => Ok(PrecoderKind::Zf),
            "min_pa" => Ok(PrecoderKind::MinPa),
            "saturating" => Ok(PrecoderKind::Saturating),
            other => Err(format!("unknown precoder `{other}` (expected zf, min_pa, saturating)")),
        }
    }
}

/// Physical scenario and the grid of array sizes to sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub pa: PaModel,
    pub bs: BsModel,
    pub noise_power: f64,
    pub geometry: CellGeometry,
    pub sinr_reference: f64,
    pub antennas: Vec<usize>,
    pub users: Vec<usize>,
    pub subcarriers: Vec<usize>,
    pub channel: ChannelKind,
    pub los_phase: LosPhase,
    pub correlation: FrequencyCorrelation,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            pa: PaModel::reference(),
            bs: BsModel::reference(),
            noise_power: dbm_to_watts(-96.0),
            geometry: CellGeometry::reference(),
            sinr_reference: DEFAULT_SINR_REFERENCE,
            antennas: vec![32],
            users: vec![4],
            subcarriers: vec![1],
            channel: ChannelKind::Rayleigh,
            los_phase: LosPhase::Random,
            correlation: FrequencyCorrelation::Independent,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub realizations: usize,
    pub precoders: Vec<PrecoderKind>,
    pub discard_over_pmax: bool,
    pub output: Option<PathBuf>,
    pub fixed_point: FixedPointConfig,
    pub oracle: OracleSettings,
    /// Subcarrier counts for the finite-Q accuracy curves.
    pub finite_q: Vec<usize>,
    /// Multiplies the PA constant used by the library path during
    /// validation; anything other than 1 is a deliberate fault.
    pub fault_alpha_scale: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            realizations: 200,
            precoders: vec![PrecoderKind::Zf, PrecoderKind::MinPa],
            discard_over_pmax: true,
            output: None,
            fixed_point: FixedPointConfig::default(),
            oracle: OracleSettings::default(),
            finite_q: Vec::new(),
            fault_alpha_scale: 1.0,
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config { line, message: format!("invalid value `{value}` for `{key}`") })
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config { line, message: format!("`{key}` expects true or false, got `{value}`") }),
    }
}

/// Comma-separated counts, where `a..b` is an inclusive range.
fn parse_counts(line: usize, key: &str, value: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((lo, hi)) = item.split_once("..") {
            let lo: usize = parse_value(line, key, lo.trim())?;
            let hi: usize = parse_value(line, key, hi.trim())?;
            if lo > hi {
                return Err(Error::Config { line, message: format!("empty range `{item}` for `{key}`") });
            }
            out.extend(lo..=hi);
        } else {
            out.push(parse_value(line, key, item)?);
        }
    }
    if out.is_empty() || out.contains(&0) {
        return Err(Error::Config { line, message: format!("`{key}` needs one or more positive counts") });
    }
    Ok(out)
}

/// Raw physical values, turned into models once the whole file is read.
struct Physical {
    p_max: f64,
    eta_max: f64,
    backoff_db: f64,
    p_fix: f64,
    circuit: f64,
    threshold: f64,
    u_min: f64,
    u_max: f64,
    taps: Option<usize>,
    decay: f64,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut phys = Physical {
            p_max: 1.0,
            eta_max: 0.22,
            backoff_db: 10.0,
            p_fix: 15.0,
            circuit: 0.7,
            threshold: DEFAULT_ACTIVE_THRESHOLD,
            u_min: 35.0,
            u_max: 250.0,
            taps: None,
            decay: 0.5,
        };
        let mut guard = SizeGuard::default();
        let mut last_line = 0;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            last_line = line;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Config { line, message: format!("expected `key = value`, got `{content}`") });
            };
            let (key, value) = (key.trim(), value.trim());
            let s = &mut cfg.scenario;
            match key {
                "p_max_watts" => phys.p_max = parse_value(line, key, value)?,
                "eta_max" => phys.eta_max = parse_value(line, key, value)?,
                "backoff_db" => phys.backoff_db = parse_value(line, key, value)?,
                "noise_dbm" => s.noise_power = dbm_to_watts(parse_value(line, key, value)?),
                "p_fix_watts" => phys.p_fix = parse_value(line, key, value)?,
                "circuit_watts" => phys.circuit = parse_value(line, key, value)?,
                "active_threshold_watts" => phys.threshold = parse_value(line, key, value)?,
                "u_min_m" => phys.u_min = parse_value(line, key, value)?,
                "u_max_m" => phys.u_max = parse_value(line, key, value)?,
                "sinr_reference" => s.sinr_reference = parse_value(line, key, value)?,
                "m" => s.antennas = parse_counts(line, key, value)?,
                "k" => s.users = parse_counts(line, key, value)?,
                "q" => s.subcarriers = parse_counts(line, key, value)?,
                "channel" => {
                    s.channel = match value {
                        "rayleigh" => ChannelKind::Rayleigh,
                        "los" => ChannelKind::Los,
                        _ => return Err(Error::Config { line, message: format!("unknown channel `{value}`") }),
                    }
                }
                "los_random_phase" => {
                    s.los_phase = if parse_bool(line, key, value)? { LosPhase::Random } else { LosPhase::Zero }
                }
                "correlation_taps" => phys.taps = Some(parse_value(line, key, value)?),
                "correlation_decay" => phys.decay = parse_value(line, key, value)?,
                "seed" => s.seed = parse_value(line, key, value)?,
                "realizations" => cfg.realizations = parse_value(line, key, value)?,
                "precoders" => {
                    cfg.precoders = value
                        .split(',')
                        .map(|p| p.trim().parse().map_err(|message| Error::Config { line, message }))
                        .collect::<Result<_>>()?;
                    cfg.precoders.sort();
                    cfg.precoders.dedup();
                }
                "discard_over_pmax" => cfg.discard_over_pmax = parse_bool(line, key, value)?,
                "output" => cfg.output = Some(PathBuf::from(value)),
                "tolerance" => cfg.fixed_point.tolerance = parse_value(line, key, value)?,
                "max_iterations" => cfg.fixed_point.max_iterations = parse_value(line, key, value)?,
                "initial_power" => cfg.fixed_point.initial_power = parse_value(line, key, value)?,
                "dead_antenna_floor" => cfg.fixed_point.dead_antenna_floor = parse_value(line, key, value)?,
                "regularization" => cfg.fixed_point.regularization = parse_value(line, key, value)?,
                "oracle_starts" => cfg.oracle.starts = parse_value(line, key, value)?,
                "oracle_max_antennas" => guard.max_antennas = parse_value(line, key, value)?,
                "oracle_max_users" => guard.max_users = parse_value(line, key, value)?,
                "oracle_max_subcarriers" => guard.max_subcarriers = parse_value(line, key, value)?,
                "finite_q" => cfg.finite_q = parse_counts(line, key, value)?,
                "fault_alpha_scale" => cfg.fault_alpha_scale = parse_value(line, key, value)?,
                _ => return Err(Error::Config { line, message: format!("unknown key `{key}`") }),
            }
        }

        let at_end = |e: Error| match e {
            Error::Config { .. } => e,
            other => Error::Config { line: last_line, message: other.to_string() },
        };
        let s = &mut cfg.scenario;
        s.pa = PaModel::new(phys.p_max, phys.eta_max, db_to_linear(phys.backoff_db)).map_err(at_end)?;
        s.bs = BsModel::new(phys.p_fix, phys.circuit, phys.threshold).map_err(at_end)?;
        s.geometry = CellGeometry::new(phys.u_min, phys.u_max).map_err(at_end)?;
        if let Some(taps) = phys.taps {
            s.correlation = FrequencyCorrelation::ExponentialPdp { taps, decay: phys.decay };
        }
        cfg.oracle.guard = guard;
        cfg.oracle.seed = s.seed;
        cfg.validate().map_err(at_end)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        if self.realizations == 0 {
            return bad("realizations must be >= 1".into());
        }
        if self.precoders.is_empty() {
            return bad("at least one precoder is required".into());
        }
        if !(self.scenario.noise_power > 0.0) || !(self.scenario.sinr_reference > 0.0) {
            return bad("noise power and SINR reference must be positive".into());
        }
        if !(self.fault_alpha_scale > 0.0) {
            return bad("fault_alpha_scale must be positive".into());
        }
        if self.oracle.starts == 0 {
            return bad("oracle_starts must be >= 1".into());
        }
        self.fixed_point.validate()
    }
}
