use std::path::Path;

use super::{DistortionSpec, Family};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSource {
    Builtin,
    File,
}

/// Ordered list of distortion configurations to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    entries: Vec<DistortionSpec>,
    source: GridSource,
}

const NOISE_LEVELS: [f64; 8] = [0.0001, 0.00031, 0.001, 0.0031, 0.01, 0.031, 0.1, 0.31];
const SLOW_FACTORS: [f64; 13] = [1.01, 1.02, 1.05, 1.1, 1.2, 1.3, 1.5, 1.7, 2.0, 2.5, 3.0, 4.0, 5.0];
const FAST_FACTORS: [f64; 11] = [0.99, 0.98, 0.95, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.2, 0.1];
const SEMITONES: [f64; 14] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0];
const DAMPENING: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
const REVERB_LAYOUTS: [(f64, f64); 4] = [(1.0, 3.0), (0.5, 3.0), (0.25, 3.0), (0.25, 5.0)];
// 5000 Hz comes from the human-evaluated set rather than the main sweep.
const LOWPASS: [f64; 10] = [5000.0, 4000.0, 3000.0, 2000.0, 1500.0, 1000.0, 750.0, 500.0, 400.0, 300.0];
const HIGHPASS: [f64; 10] = [200.0, 300.0, 400.0, 500.0, 750.0, 1000.0, 1500.0, 2000.0, 3000.0, 4000.0];
const BITS: [f64; 8] = [9.0, 8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0];
const ITERATIONS: [f64; 8] = [500.0, 200.0, 100.0, 50.0, 20.0, 10.0, 5.0, 1.0];
const MEL_WIDE_BANDS: [f64; 4] = [264.0, 128.0, 64.0, 32.0];
const MEL_NARROW_BANDS: [f64; 6] = [264.0, 128.0, 64.0, 32.0, 16.0, 8.0];

/// The full published distortion grid, every spec with seed 0.
pub fn builtin_grid() -> SweepGrid {
    let mut entries = Vec::new();
    let mut push = |family: Family, pairs: &[(&str, f64)]| {
        entries.push(DistortionSpec::from_pairs(family, pairs, 0).expect("builtin grid entry is valid"));
    };
    for f in SLOW_FACTORS.iter().chain(&FAST_FACTORS) {
        push(Family::Speed, &[("factor", *f)]);
    }
    for f in SLOW_FACTORS.iter().chain(&FAST_FACTORS) {
        push(Family::SpeedPp, &[("factor", *f)]);
    }
    for s in SEMITONES.iter().chain(&SEMITONES.map(|s| -s)) {
        push(Family::Pitch, &[("semitones", *s)]);
    }
    for (delay, echos) in REVERB_LAYOUTS {
        for d in DAMPENING {
            push(Family::Reverb, &[("dampening", d), ("delay", delay), ("echos", echos)]);
        }
    }
    for s in NOISE_LEVELS {
        push(Family::GaussianNoise, &[("stddev", s)]);
    }
    for p in NOISE_LEVELS {
        push(Family::Pops, &[("percentage", p)]);
    }
    for f in LOWPASS {
        push(Family::Lowpass, &[("critical_freq", f)]);
    }
    for f in HIGHPASS {
        push(Family::Highpass, &[("critical_freq", f)]);
    }
    for b in BITS {
        push(Family::Quantization, &[("bits", b)]);
    }
    for family in [Family::GriffinLim, Family::GriffinLimZero] {
        for i in ITERATIONS {
            push(family, &[("iterations", i)]);
        }
    }
    for b in MEL_WIDE_BANDS {
        push(Family::MelWide, &[("num_bands", b)]);
    }
    for b in MEL_NARROW_BANDS {
        push(Family::MelNarrow, &[("num_bands", b)]);
    }
    SweepGrid {
        entries,
        source: GridSource::Builtin,
    }
}

impl SweepGrid {
    pub fn new(entries: Vec<DistortionSpec>) -> Self {
        Self {
            entries,
            source: GridSource::File,
        }
    }

    pub fn entries(&self) -> &[DistortionSpec] {
        &self.entries
    }

    pub fn source(&self) -> GridSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Keeps only the entries of the given families, preserving order.
    pub fn only(&self, families: &[Family]) -> Self {
        Self {
            entries: self.entries.iter().filter(|s| families.contains(&s.family())).cloned().collect(),
            source: self.source,
        }
    }

    /// Replaces the seed of every entry.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.entries.iter_mut().for_each(|s| s.seed = seed);
        self
    }

    /// Parses `family,name=value;...,seed` rows. A `family,params,seed`
    /// header and `#` comment lines are allowed.
    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut entries = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            if i == 0 && record.get(0) == Some("family") {
                continue;
            }
            if record.len() != 3 {
                return Err(Error::Spec(format!(
                    "grid row {} has {} fields, expected family,params,seed",
                    i + 1,
                    record.len()
                )));
            }
            let seed: u64 = record[2]
                .parse()
                .map_err(|_| Error::Spec(format!("grid row {}: bad seed {:?}", i + 1, &record[2])))?;
            entries.push(DistortionSpec::parse(&record[0], &record[1], seed)?);
        }
        Ok(Self::new(entries))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn write(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["family", "params", "seed"])?;
        for s in &self.entries {
            w.write_record([s.family().name(), &s.params_string(), &s.seed.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<grid>", e))?;
        Ok(())
    }
}
