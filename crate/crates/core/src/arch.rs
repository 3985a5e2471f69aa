//! DRAM architecture power-state specifications.
//!
//! A [`DramArchSpec`] is an ordered chain of power states: `ACT` first, then
//! the low-power states `S1..SM` in descending normalized power. Energies are
//! expressed in "ACT power x CPU cycle" units throughout the crate.

use std::{fs, path::Path};

use serde::{Deserialize, Serialize};

/// Default CPU clock used to convert nanoseconds into cycles.
pub const DEFAULT_CPU_FREQ_GHZ: f64 = 2.66;

/// Names accepted by [`load_arch_spec`] for the compiled-in architectures.
pub const BUILTIN_ARCHS: [&str; 3] = ["ddr3", "ddr2", "lpddr2"];

#[derive(Debug, thiserror::Error)]
pub enum ArchError {
    #[error("unknown architecture `{0}` (expected one of ddr3, ddr2, lpddr2 or a spec file)")]
    UnknownArch(String),
    #[error("failed to read spec file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed spec file: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("invalid spec `{arch}`: {reason}")]
    Invalid { arch: String, reason: String },
    #[error("state index {0} is not part of the architecture")]
    NoSuchState(usize),
    #[error("state `{0}` is not a low-power state")]
    NotLowPower(String),
    #[error("break-even threshold of `{0}` is unbounded (state saves no power)")]
    Unbounded(String),
}

/// One power state of a rank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerStateSpec {
    pub name: String,
    /// Fraction of ACT power drawn in this state.
    pub normalized_power: f64,
    /// Time to return to ACT, in nanoseconds.
    pub resync_time_ns: f64,
    /// Resynchronization energy in ACT-power x cycle units. When absent the
    /// rank is assumed to draw ACT power for the whole resync interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resync_energy: Option<f64>,
}

impl PowerStateSpec {
    fn new(name: &str, normalized_power: f64, resync_time_ns: f64) -> Self {
        Self {
            name: name.to_owned(),
            normalized_power,
            resync_time_ns,
            resync_energy: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DramArchSpec {
    pub name: String,
    /// `states[0]` is ACT; `states[1..]` are `S1..SM`.
    pub states: Vec<PowerStateSpec>,
    #[serde(default = "default_freq")]
    pub cpu_freq_ghz: f64,
}

fn default_freq() -> f64 {
    DEFAULT_CPU_FREQ_GHZ
}

impl DramArchSpec {
    /// DDR3 DRx4 at 1333 MHz.
    pub fn ddr3() -> Self {
        Self {
            name: "ddr3".into(),
            states: vec![
                PowerStateSpec::new("ACT", 1.0, 0.0),
                PowerStateSpec::new("ACT_PDN", 0.612, 6.0),
                PowerStateSpec::new("PRE_PDN_FAST", 0.520, 18.0),
                PowerStateSpec::new("PRE_PDN_SLOW", 0.299, 24.0),
                PowerStateSpec::new("SR_FAST", 0.170, 768.0),
                PowerStateSpec::new("SR_SLOW", 0.104, 6768.0),
            ],
            cpu_freq_ghz: DEFAULT_CPU_FREQ_GHZ,
        }
    }

    /// DDR2 DRx8 at 800 MHz.
    pub fn ddr2() -> Self {
        Self {
            name: "ddr2".into(),
            states: vec![
                PowerStateSpec::new("ACT", 1.0, 0.0),
                PowerStateSpec::new("ACT_PDN_FAST", 0.619, 5.0),
                PowerStateSpec::new("ACT_PDN_SLOW", 0.325, 18.0),
                PowerStateSpec::new("PRE_PDN", 0.237, 25.0),
                PowerStateSpec::new("SR", 0.178, 500.0),
            ],
            cpu_freq_ghz: DEFAULT_CPU_FREQ_GHZ,
        }
    }

    /// LPDDR2 DRx16 at 800 MHz (deep power-down excluded: it loses data).
    pub fn lpddr2() -> Self {
        Self {
            name: "lpddr2".into(),
            states: vec![
                PowerStateSpec::new("ACT", 1.0, 0.0),
                PowerStateSpec::new("ACT_PDN", 0.523, 8.0),
                PowerStateSpec::new("PRE_PDN", 0.303, 26.0),
                PowerStateSpec::new("SR", 0.194, 100.0),
            ],
            cpu_freq_ghz: DEFAULT_CPU_FREQ_GHZ,
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "ddr3" => Some(Self::ddr3()),
            "ddr2" => Some(Self::ddr2()),
            "lpddr2" => Some(Self::lpddr2()),
            _ => None,
        }
    }

    /// Parses and validates a JSON spec.
    pub fn from_json(text: &str) -> Result<Self, ArchError> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Number of low-power states `M`.
    pub fn num_low_power(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn act_power(&self) -> f64 {
        self.states[0].normalized_power
    }

    pub fn state(&self, index: usize) -> Result<&PowerStateSpec, ArchError> {
        self.states.get(index).ok_or(ArchError::NoSuchState(index))
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states
            .iter()
            .position(|s| s.name.eq_ignore_ascii_case(name))
    }

    /// Keeps ACT and the first `n` low-power states of the chain.
    pub fn restricted(&self, n: usize) -> Result<Self, ArchError> {
        if n == 0 || n > self.num_low_power() {
            return Err(ArchError::Invalid {
                arch: self.name.clone(),
                reason: format!(
                    "cannot restrict to {n} low-power states (have {})",
                    self.num_low_power()
                ),
            });
        }
        let mut spec = self.clone();
        spec.states.truncate(n + 1);
        spec.name = format!("{}[{n}]", self.name);
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ArchError> {
        let invalid = |reason: String| ArchError::Invalid {
            arch: self.name.clone(),
            reason,
        };
        if !(self.cpu_freq_ghz > 0.0 && self.cpu_freq_ghz.is_finite()) {
            return Err(invalid(format!("cpu_freq_ghz must be positive, got {}", self.cpu_freq_ghz)));
        }
        let Some(act) = self.states.first() else {
            return Err(invalid("no states".into()));
        };
        if act.normalized_power != 1.0 || act.resync_time_ns != 0.0 {
            return Err(invalid(format!(
                "first state `{}` must be ACT with power 1.0 and resync 0",
                act.name
            )));
        }
        if self.states.len() < 2 {
            return Err(invalid("at least one low-power state is required".into()));
        }
        for s in &self.states[1..] {
            if !(s.normalized_power > 0.0 && s.normalized_power <= 1.0) {
                return Err(invalid(format!("state `{}` power {} outside (0, 1]", s.name, s.normalized_power)));
            }
            if !(s.resync_time_ns >= 0.0 && s.resync_time_ns.is_finite()) {
                return Err(invalid(format!("state `{}` has invalid resync time", s.name)));
            }
            if let Some(e) = s.resync_energy {
                if !(e >= 0.0 && e.is_finite()) {
                    return Err(invalid(format!("state `{}` has invalid resync energy", s.name)));
                }
            }
        }
        for pair in self.states.windows(2) {
            let (hi, lo) = (&pair[0], &pair[1]);
            if lo.normalized_power >= hi.normalized_power {
                return Err(invalid(format!(
                    "power must strictly decrease along the chain: `{}` ({}) then `{}` ({})",
                    hi.name, hi.normalized_power, lo.name, lo.normalized_power
                )));
            }
            if lo.resync_time_ns < hi.resync_time_ns {
                return Err(invalid(format!(
                    "resync time must not decrease along the chain: `{}` then `{}`",
                    hi.name, lo.name
                )));
            }
        }
        Ok(())
    }

    /// `ceil(resync_time_ns * cpu_freq_ghz)`.
    pub fn resync_cycles(&self, index: usize) -> Result<u64, ArchError> {
        let s = self.state(index)?;
        Ok(ns_to_cycles(s.resync_time_ns, self.cpu_freq_ghz))
    }

    /// Resynchronization energy, defaulting to `P_ACT * resync_cycles`.
    pub fn resync_energy(&self, index: usize) -> Result<f64, ArchError> {
        let s = self.state(index)?;
        Ok(match s.resync_energy {
            Some(e) => e,
            None => self.act_power() * self.resync_cycles(index)? as f64,
        })
    }

    /// Smallest idle length for which demoting to `index` right away beats
    /// staying in ACT: `ceil(E_S / (P_ACT - P_S))`.
    pub fn break_even_threshold(&self, index: usize) -> Result<u64, ArchError> {
        let s = self.state(index)?;
        if index == 0 {
            return Err(ArchError::NotLowPower(s.name.clone()));
        }
        break_even_cycles(self.act_power(), s.normalized_power, self.resync_energy(index)?)
            .ok_or_else(|| ArchError::Unbounded(s.name.clone()))
    }
}

/// Break-even idle length for a state with power `p_state` and resync
/// energy `energy`; `None` when the state saves nothing.
pub fn break_even_cycles(p_act: f64, p_state: f64, energy: f64) -> Option<u64> {
    let saving = p_act - p_state;
    if saving <= 0.0 {
        return None;
    }
    Some(ceil_cycles(energy / saving))
}

pub fn ns_to_cycles(ns: f64, ghz: f64) -> u64 {
    ceil_cycles(ns * ghz)
}

// Products like 100 * 2.66 land a hair above the integer in binary floating
// point; absorb that before taking the ceiling.
fn ceil_cycles(x: f64) -> u64 {
    if x <= 0.0 {
        return 0;
    }
    (x - 1e-9).ceil().max(0.0) as u64
}

/// Resolves a built-in name or a path to a JSON spec file.
pub fn load_arch_spec(source: &str) -> Result<DramArchSpec, ArchError> {
    if let Some(spec) = DramArchSpec::builtin(source) {
        return Ok(spec);
    }
    let path = Path::new(source);
    if !path.exists() {
        return Err(ArchError::UnknownArch(source.to_owned()));
    }
    let text = fs::read_to_string(path).map_err(|source_err| ArchError::Io {
        path: source.to_owned(),
        source: source_err,
    })?;
    DramArchSpec::from_json(&text)
}
