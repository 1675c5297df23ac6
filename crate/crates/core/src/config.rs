//! Machine and timing configuration, loadable from INI-style `key=value` files.

use std::fmt::Write as _;
use std::str::FromStr;

use ini::Ini;
use thiserror::Error;

use crate::timing::TimingParams;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Hardware parameters of the emulated long-vector machine.
///
/// Defaults describe a 16 Kbit VPU with eight lanes: 256 doubles per register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineConfig {
    pub vlen_bits: u64,
    pub lanes: u64,
    pub elen_bits: u64,
    pub memory_bytes: u64,
    pub timing: TimingParams,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            vlen_bits: 16384,
            lanes: 8,
            elen_bits: 64,
            memory_bytes: 1 << 28,
            timing: TimingParams::default(),
        }
    }
}

impl MachineConfig {
    /// VLMAX for e64/m1.
    pub fn vlmax_e64(&self) -> u64 {
        self.vlen_bits / 64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.vlen_bits.is_power_of_two() || self.vlen_bits < 128 {
            return Err(ConfigError::Invalid(format!(
                "vlen_bits must be a power of two >= 128, got {}",
                self.vlen_bits
            )));
        }
        if self.elen_bits != 64 {
            return Err(ConfigError::Invalid(format!(
                "elen_bits must be 64, got {}",
                self.elen_bits
            )));
        }
        let elems = self.vlen_bits / self.elen_bits;
        if self.lanes == 0 || elems % self.lanes != 0 {
            return Err(ConfigError::Invalid(format!(
                "lanes ({}) must divide vlen_bits/elen_bits ({elems})",
                self.lanes
            )));
        }
        if self.memory_bytes == 0 {
            return Err(ConfigError::Invalid("memory_bytes must be positive".into()));
        }
        self.timing.validate()
    }

    /// Parses a machine file. Timing keys may appear in the same file; keys
    /// not mentioned keep their defaults, and `arith_elems_per_cycle`
    /// follows `lanes` unless set explicitly.
    pub fn from_ini_str(text: &str) -> Result<Self, ConfigError> {
        let entries = ini_entries(text)?;
        let mut cfg = MachineConfig::default();
        let mut timing_entries = Vec::new();
        for (key, value) in entries {
            match key.as_str() {
                "vlen_bits" => cfg.vlen_bits = parse_value(&key, &value)?,
                "lanes" => cfg.lanes = parse_value(&key, &value)?,
                "elen_bits" => cfg.elen_bits = parse_value(&key, &value)?,
                "memory_bytes" => cfg.memory_bytes = parse_value(&key, &value)?,
                _ => timing_entries.push((key, value)),
            }
        }
        cfg.timing = TimingParams::for_lanes(cfg.lanes);
        cfg.timing.apply_entries(&timing_entries)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_ini_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "vlen_bits = {}", self.vlen_bits);
        let _ = writeln!(s, "lanes = {}", self.lanes);
        let _ = writeln!(s, "elen_bits = {}", self.elen_bits);
        let _ = writeln!(s, "memory_bytes = {}", self.memory_bytes);
        s.push_str(&self.timing.to_ini_string());
        s
    }
}

/// All `key = value` pairs of an INI document, sections flattened, in file order.
pub(crate) fn ini_entries(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let doc = Ini::load_from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let mut out = Vec::new();
    for (_, props) in doc.iter() {
        for (k, v) in props.iter() {
            out.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
    }
    Ok(out)
}

pub(crate) fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    let bad = || ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    };
    if let Some(hex) = value.strip_prefix("0x") {
        let n = u64::from_str_radix(hex, 16).map_err(|_| bad())?;
        return n.to_string().parse().map_err(|_| bad());
    }
    value.parse().map_err(|_| bad())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_design_point() {
        let cfg = MachineConfig::default();
        assert_eq!(cfg.vlmax_e64(), 256);
        assert_eq!(cfg.lanes, 8);
        assert_eq!(cfg.memory_bytes, 1 << 28);
        cfg.validate().unwrap();
    }

    #[test]
    fn ini_overrides_and_lane_following() {
        let cfg = MachineConfig::from_ini_str("vlen_bits = 4096\nlanes = 4\n# c\nmem_latency_cycles=12\n")
            .unwrap();
        assert_eq!(cfg.vlmax_e64(), 64);
        assert_eq!(cfg.timing.arith_elems_per_cycle, 4);
        assert_eq!(cfg.timing.mem_latency_cycles, 12);
        let text = cfg.to_ini_string();
        assert_eq!(MachineConfig::from_ini_str(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(
            MachineConfig::from_ini_str("vlen_bits = 1000"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            MachineConfig::from_ini_str("lanes = 3"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            MachineConfig::from_ini_str("vlen = 5"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            MachineConfig::from_ini_str("lanes = many"),
            Err(ConfigError::BadValue { .. })
        ));
    }
}
