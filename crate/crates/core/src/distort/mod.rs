//! Seeded audio distortions and the parameter grids used to sweep them.

mod apply;
mod grid;
mod sweep;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use apply::{
    apply_distortion, mel_encode, pops, quantize, reverb, MEL_NARROW_RANGE, MEL_WIDE_RANGE,
};
pub use grid::{builtin_grid, GridSource, SweepGrid};
pub use sweep::{run_sweep, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    GaussianNoise,
    Pops,
    Lowpass,
    Highpass,
    Quantization,
    GriffinLim,
    GriffinLimZero,
    MelWide,
    MelNarrow,
    Speed,
    SpeedPp,
    Pitch,
    Reverb,
}

impl Family {
    pub const ALL: [Family; 13] = [
        Family::GaussianNoise,
        Family::Pops,
        Family::Lowpass,
        Family::Highpass,
        Family::Quantization,
        Family::GriffinLim,
        Family::GriffinLimZero,
        Family::MelWide,
        Family::MelNarrow,
        Family::Speed,
        Family::SpeedPp,
        Family::Pitch,
        Family::Reverb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::GaussianNoise => "gaussian_noise",
            Family::Pops => "pops",
            Family::Lowpass => "lowpass",
            Family::Highpass => "highpass",
            Family::Quantization => "quantization",
            Family::GriffinLim => "griffin_lim",
            Family::GriffinLimZero => "griffin_lim_zero",
            Family::MelWide => "mel_wide",
            Family::MelNarrow => "mel_narrow",
            Family::Speed => "speed",
            Family::SpeedPp => "speed_pp",
            Family::Pitch => "pitch",
            Family::Reverb => "reverb",
        }
    }

    /// Parameter names the family takes, in canonical order.
    pub fn params(self) -> &'static [&'static str] {
        match self {
            Family::GaussianNoise => &["stddev"],
            Family::Pops => &["percentage"],
            Family::Lowpass | Family::Highpass => &["critical_freq"],
            Family::Quantization => &["bits"],
            Family::GriffinLim | Family::GriffinLimZero => &["iterations"],
            Family::MelWide | Family::MelNarrow => &["num_bands"],
            Family::Speed | Family::SpeedPp => &["factor"],
            Family::Pitch => &["semitones"],
            Family::Reverb => &["dampening", "delay", "echos"],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Spec(format!("unknown distortion family {s:?}")))
    }
}

/// One distortion configuration: a family, its parameters and a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionSpec {
    family: Family,
    params: BTreeMap<String, f64>,
    pub seed: u64,
}

impl DistortionSpec {
    /// Validates that `params` holds exactly the family's keys with values
    /// in range.
    pub fn new(family: Family, params: BTreeMap<String, f64>, seed: u64) -> Result<Self> {
        for key in params.keys() {
            if !family.params().contains(&key.as_str()) {
                return Err(Error::Spec(format!("{family} does not take parameter {key:?}")));
            }
        }
        for key in family.params() {
            if !params.contains_key(*key) {
                return Err(Error::Spec(format!("{family} requires parameter {key:?}")));
            }
        }
        let spec = Self { family, params, seed };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a spec from `(key, value)` pairs.
    pub fn from_pairs(family: Family, pairs: &[(&str, f64)], seed: u64) -> Result<Self> {
        Self::new(family, pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect(), seed)
    }

    /// Parses the `name=value;name=value` parameter form.
    pub fn parse(family: &str, params: &str, seed: u64) -> Result<Self> {
        let family: Family = family.trim().parse()?;
        let mut map = BTreeMap::new();
        for item in params.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Spec(format!("parameter {item:?} is not name=value")))?;
            let value: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Spec(format!("parameter {k:?} has non-numeric value {v:?}")))?;
            if map.insert(k.trim().to_string(), value).is_some() {
                return Err(Error::Spec(format!("parameter {k:?} given twice")));
            }
        }
        Self::new(family, map, seed)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Spec(format!("{}: {msg}", self.family)));
        for (k, v) in &self.params {
            if !v.is_finite() {
                return bad(format!("{k} must be finite"));
            }
        }
        let whole = |k: &str| self.param(k).fract() == 0.0;
        match self.family {
            Family::GaussianNoise if self.param("stddev") < 0.0 => bad("stddev must be >= 0".into()),
            Family::Pops if !(0.0..=100.0).contains(&self.param("percentage")) => {
                bad("percentage must lie in [0, 100]".into())
            }
            Family::Lowpass | Family::Highpass if self.param("critical_freq") <= 0.0 => {
                bad("critical_freq must be positive".into())
            }
            Family::Quantization if !whole("bits") || !(1.0..=32.0).contains(&self.param("bits")) => {
                bad("bits must be an integer in [1, 32]".into())
            }
            Family::GriffinLim | Family::GriffinLimZero
                if !whole("iterations") || self.param("iterations") < 0.0 =>
            {
                bad("iterations must be a nonnegative integer".into())
            }
            Family::MelWide | Family::MelNarrow
                if !whole("num_bands") || self.param("num_bands") < 1.0 =>
            {
                bad("num_bands must be a positive integer".into())
            }
            Family::Speed | Family::SpeedPp if self.param("factor") <= 0.0 => {
                bad("factor must be positive".into())
            }
            Family::Reverb
                if self.param("delay") <= 0.0 || !whole("echos") || self.param("echos") < 0.0 =>
            {
                bad("delay must be positive and echos a nonnegative integer".into())
            }
            _ => Ok(()),
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Value of a parameter the family is known to carry.
    pub fn param(&self, key: &str) -> f64 {
        self.params[key]
    }

    /// Canonical `name=value;...` rendering in the family's parameter order.
    pub fn params_string(&self) -> String {
        self.family
            .params()
            .iter()
            .map(|k| format!("{k}={}", self.params[*k]))
            .collect::<Vec<_>>()
            .join(";")
    }

    /// Stable configuration label, `family:params`.
    pub fn label(&self) -> String {
        format!("{}:{}", self.family, self.params_string())
    }

    /// File-system friendly variant of the label, used for output folders.
    pub fn slug(&self) -> String {
        let params = self
            .family
            .params()
            .iter()
            .map(|k| format!("{k}-{}", self.params[*k]))
            .collect::<Vec<_>>()
            .join("_");
        format!("{params}_seed-{}", self.seed)
    }
}

impl fmt::Display for DistortionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (seed {})", self.label(), self.seed)
    }
}
