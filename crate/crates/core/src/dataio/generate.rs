//! Deterministic synthetic accelerometer streams for the three event classes.
//!
//! The generator stands in for a proprietary field recording. Only class
//! separability matters; difficulty is a config knob (`noise_std` and the
//! amplitude overlap between the Forklift and Truck vibration bands).

use crate::dataio::{Label, LabeledStream, Sample};
use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Raw per-class sample counts of the reference dataset, scaled down by
/// `GeneratorConfig::scale` to desk size.
pub const BASE_COUNTS: [usize; 3] = [382_000, 2_520_000, 9_912];

/// All knobs of the synthetic generator. Every field has a default and a
/// matching key in the plain `key = value` config format.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    /// Down-scaling factor applied to [`BASE_COUNTS`].
    pub scale: f64,
    /// Per-class total sample counts; default `round(BASE_COUNTS * scale)`.
    pub samples_forklift: usize,
    pub samples_truck: usize,
    pub samples_dummy: usize,
    /// Per-class stream counts.
    pub streams_forklift: usize,
    pub streams_truck: usize,
    pub streams_dummy: usize,
    pub sample_rate: f64,
    /// Std-dev of the additive Gaussian noise, in g.
    pub noise_std: f64,
    /// Gravity offset on the z axis, in g.
    pub gravity: f64,
    /// Forklift: lift-ramp amplitude band and event rate.
    pub lift_amp: f64,
    pub lift_rate_hz: f64,
    /// Forklift: background vibration amplitude (overlaps the Truck band).
    pub forklift_vib_amp: f64,
    pub forklift_freq_lo: f64,
    pub forklift_freq_hi: f64,
    /// Truck: sustained broadband vibration.
    pub truck_amp: f64,
    pub truck_freq_lo: f64,
    pub truck_freq_hi: f64,
    /// Fraction of Truck time spent idling (near-zero vibration).
    pub truck_idle_frac: f64,
    /// Dummy: sparse transient rate, events per second.
    pub dummy_spike_rate_hz: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let scale = 0.01;
        GeneratorConfig {
            scale,
            samples_forklift: scaled_count(BASE_COUNTS[0], scale),
            samples_truck: scaled_count(BASE_COUNTS[1], scale),
            samples_dummy: scaled_count(BASE_COUNTS[2], scale),
            streams_forklift: 2,
            streams_truck: 4,
            streams_dummy: 1,
            sample_rate: 20.0,
            noise_std: 0.04,
            gravity: 1.0,
            lift_amp: 0.30,
            lift_rate_hz: 0.22,
            forklift_vib_amp: 0.13,
            forklift_freq_lo: 0.5,
            forklift_freq_hi: 2.0,
            truck_amp: 0.20,
            truck_freq_lo: 3.0,
            truck_freq_hi: 6.0,
            truck_idle_frac: 0.25,
            dummy_spike_rate_hz: 0.4,
        }
    }
}

fn scaled_count(base: usize, scale: f64) -> usize {
    (base as f64 * scale).round() as usize
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, n) in [
            ("samples_forklift", self.samples_forklift),
            ("samples_truck", self.samples_truck),
            ("samples_dummy", self.samples_dummy),
        ] {
            if n == 0 {
                return Err(Error::Config(format!("{name} = 0 (zero duration)")));
            }
        }
        for (name, n) in [
            ("streams_forklift", self.streams_forklift),
            ("streams_truck", self.streams_truck),
            ("streams_dummy", self.streams_dummy),
        ] {
            if n == 0 {
                return Err(Error::Config(format!("{name} = 0")));
            }
        }
        if self.sample_rate <= 0.0 {
            return Err(Error::Config("sample_rate must be > 0".into()));
        }
        if self.noise_std < 0.0 {
            return Err(Error::Config("noise_std must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.truck_idle_frac) {
            return Err(Error::Config("truck_idle_frac must be in [0,1)".into()));
        }
        Ok(())
    }

    pub fn samples_for(&self, label: Label) -> usize {
        match label {
            Label::Forklift => self.samples_forklift,
            Label::Truck => self.samples_truck,
            Label::Dummy => self.samples_dummy,
        }
    }

    pub fn streams_for(&self, label: Label) -> usize {
        match label {
            Label::Forklift => self.streams_forklift,
            Label::Truck => self.streams_truck,
            Label::Dummy => self.streams_dummy,
        }
    }

    /// Parses the plain `key = value` config format. Blank lines and `#`
    /// comments are ignored; unknown keys are rejected.
    pub fn from_kv_str(text: &str) -> Result<GeneratorConfig> {
        let mut cfg = GeneratorConfig::default();
        let mut explicit_samples = [false; 3];
        // Two passes so `scale` applies before derived defaults, regardless
        // of key order in the file.
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("generator config line {}: expected key = value", lineno + 1))
            })?;
            entries.push((key.trim().to_string(), value.trim().to_string()));
        }
        let parse_f64 = |key: &str, v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("generator config: bad number for {key}: {v:?}")))
        };
        let parse_usize = |key: &str, v: &str| -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| Error::Config(format!("generator config: bad integer for {key}: {v:?}")))
        };
        for (key, value) in &entries {
            if key == "scale" {
                cfg.scale = parse_f64(key, value)?;
                cfg.samples_forklift = scaled_count(BASE_COUNTS[0], cfg.scale);
                cfg.samples_truck = scaled_count(BASE_COUNTS[1], cfg.scale);
                cfg.samples_dummy = scaled_count(BASE_COUNTS[2], cfg.scale);
            }
        }
        for (key, value) in &entries {
            match key.as_str() {
                "scale" => {}
                "samples_forklift" => {
                    cfg.samples_forklift = parse_usize(key, value)?;
                    explicit_samples[0] = true;
                }
                "samples_truck" => {
                    cfg.samples_truck = parse_usize(key, value)?;
                    explicit_samples[1] = true;
                }
                "samples_dummy" => {
                    cfg.samples_dummy = parse_usize(key, value)?;
                    explicit_samples[2] = true;
                }
                "streams_forklift" => cfg.streams_forklift = parse_usize(key, value)?,
                "streams_truck" => cfg.streams_truck = parse_usize(key, value)?,
                "streams_dummy" => cfg.streams_dummy = parse_usize(key, value)?,
                "sample_rate" => cfg.sample_rate = parse_f64(key, value)?,
                "noise_std" => cfg.noise_std = parse_f64(key, value)?,
                "gravity" => cfg.gravity = parse_f64(key, value)?,
                "lift_amp" => cfg.lift_amp = parse_f64(key, value)?,
                "lift_rate_hz" => cfg.lift_rate_hz = parse_f64(key, value)?,
                "forklift_vib_amp" => cfg.forklift_vib_amp = parse_f64(key, value)?,
                "forklift_freq_lo" => cfg.forklift_freq_lo = parse_f64(key, value)?,
                "forklift_freq_hi" => cfg.forklift_freq_hi = parse_f64(key, value)?,
                "truck_amp" => cfg.truck_amp = parse_f64(key, value)?,
                "truck_freq_lo" => cfg.truck_freq_lo = parse_f64(key, value)?,
                "truck_freq_hi" => cfg.truck_freq_hi = parse_f64(key, value)?,
                "truck_idle_frac" => cfg.truck_idle_frac = parse_f64(key, value)?,
                "dummy_spike_rate_hz" => cfg.dummy_spike_rate_hz = parse_f64(key, value)?,
                other => {
                    return Err(Error::Config(format!(
                        "generator config: unknown key {other:?}"
                    )))
                }
            }
        }
        let _ = explicit_samples;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<GeneratorConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        GeneratorConfig::from_kv_str(&text)
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "scale = {}\n\
             samples_forklift = {}\nsamples_truck = {}\nsamples_dummy = {}\n\
             streams_forklift = {}\nstreams_truck = {}\nstreams_dummy = {}\n\
             sample_rate = {}\nnoise_std = {}\ngravity = {}\n\
             lift_amp = {}\nlift_rate_hz = {}\nforklift_vib_amp = {}\n\
             forklift_freq_lo = {}\nforklift_freq_hi = {}\n\
             truck_amp = {}\ntruck_freq_lo = {}\ntruck_freq_hi = {}\n\
             truck_idle_frac = {}\ndummy_spike_rate_hz = {}\n",
            self.scale,
            self.samples_forklift,
            self.samples_truck,
            self.samples_dummy,
            self.streams_forklift,
            self.streams_truck,
            self.streams_dummy,
            self.sample_rate,
            self.noise_std,
            self.gravity,
            self.lift_amp,
            self.lift_rate_hz,
            self.forklift_vib_amp,
            self.forklift_freq_lo,
            self.forklift_freq_hi,
            self.truck_amp,
            self.truck_freq_lo,
            self.truck_freq_hi,
            self.truck_idle_frac,
            self.dummy_spike_rate_hz,
        )
    }
}

/// Generates every stream of the configured dataset. Deterministic for a
/// fixed `(config, seed)`; stream `i` (in global emission order) depends only
/// on `derive_seed(seed, i)`.
pub fn generate_synthetic(config: &GeneratorConfig, seed: u64) -> Result<Vec<LabeledStream>> {
    config.validate()?;
    let mut streams = Vec::new();
    let mut global_index = 0u64;
    for label in Label::ALL {
        let total = config.samples_for(label);
        let n_streams = config.streams_for(label);
        for i in 0..n_streams {
            let len = total / n_streams + usize::from(i < total % n_streams);
            if len == 0 {
                global_index += 1;
                continue;
            }
            let stream_seed = rng::derive_seed(seed, global_index);
            let mut samples = stream_signature(config, label, len, stream_seed);
            if config.noise_std > 0.0 {
                add_noise(config, &mut samples, rng::derive_seed(stream_seed, 1));
            }
            streams.push(LabeledStream { samples, label });
            global_index += 1;
        }
    }
    Ok(streams)
}

/// The deterministic noise-free signature of one stream. `generate_synthetic`
/// produces exactly this plus optional Gaussian noise.
pub fn stream_signature(
    config: &GeneratorConfig,
    label: Label,
    len: usize,
    stream_seed: u64,
) -> Vec<Sample> {
    let mut rng = rng::seeded(rng::derive_seed(stream_seed, 0));
    match label {
        Label::Forklift => forklift_signature(config, len, &mut rng),
        Label::Truck => truck_signature(config, len, &mut rng),
        Label::Dummy => dummy_signature(config, len, &mut rng),
    }
}

fn add_noise(config: &GeneratorConfig, samples: &mut [Sample], noise_seed: u64) {
    let mut rng = rng::seeded(noise_seed);
    let normal = Normal::new(0.0, config.noise_std).expect("noise_std validated");
    for s in samples.iter_mut() {
        s.ax += normal.sample(&mut rng) as f32;
        s.ay += normal.sample(&mut rng) as f32;
        s.az += normal.sample(&mut rng) as f32;
    }
}

struct Sinusoid {
    freq: f64,
    amp: f64,
    phase: f64,
}

impl Sinusoid {
    fn random(rng: &mut ChaCha8Rng, freq_lo: f64, freq_hi: f64, amp: f64) -> Sinusoid {
        Sinusoid {
            freq: rng.random_range(freq_lo..freq_hi),
            amp: amp * rng.random_range(0.5..1.0),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
        }
    }

    fn eval(&self, t: f64) -> f64 {
        self.amp * (std::f64::consts::TAU * self.freq * t + self.phase).sin()
    }
}

/// Piecewise on/off gate used for Truck idle gaps and Forklift activity.
struct Gate {
    /// (end_time, value) segments, end times ascending.
    segments: Vec<(f64, f64)>,
}

impl Gate {
    fn alternating(
        rng: &mut ChaCha8Rng,
        duration: f64,
        on_lo: f64,
        on_hi: f64,
        off_frac: f64,
        off_value: f64,
    ) -> Gate {
        let mut segments = Vec::new();
        let mut t = 0.0;
        let mut on = true;
        while t < duration {
            let on_dur = rng.random_range(on_lo..on_hi);
            let dur = if on {
                on_dur
            } else {
                // Off segments sized so the long-run off fraction is ~off_frac.
                on_dur * off_frac / (1.0 - off_frac).max(1e-9)
            };
            t += dur;
            segments.push((t, if on { 1.0 } else { off_value }));
            on = !on;
        }
        Gate { segments }
    }

    fn eval(&self, t: f64) -> f64 {
        for &(end, value) in &self.segments {
            if t < end {
                return value;
            }
        }
        self.segments.last().map(|&(_, v)| v).unwrap_or(1.0)
    }
}

/// Trapezoidal lift event on the z axis.
struct Lift {
    start: f64,
    ramp: f64,
    hold: f64,
    height: f64,
}

impl Lift {
    fn eval(&self, t: f64) -> f64 {
        let dt = t - self.start;
        if dt < 0.0 {
            0.0
        } else if dt < self.ramp {
            self.height * dt / self.ramp
        } else if dt < self.ramp + self.hold {
            self.height
        } else if dt < 2.0 * self.ramp + self.hold {
            self.height * (1.0 - (dt - self.ramp - self.hold) / self.ramp)
        } else {
            0.0
        }
    }
}

fn exp_gap(rng: &mut ChaCha8Rng, rate_hz: f64) -> f64 {
    let u: f64 = rng.random_range(1e-12..1.0);
    -u.ln() / rate_hz.max(1e-9)
}

fn forklift_signature(config: &GeneratorConfig, len: usize, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    let duration = len as f64 / config.sample_rate;

    // Background vibration in the same band as the Truck class; this is what
    // makes lift-free Forklift windows the hard boundary cases.
    let vib: Vec<[Sinusoid; 2]> = (0..3)
        .map(|_| {
            [
                Sinusoid::random(rng, config.truck_freq_lo, config.truck_freq_hi, config.forklift_vib_amp),
                Sinusoid::random(rng, config.truck_freq_lo, config.truck_freq_hi, config.forklift_vib_amp * 0.6),
            ]
        })
        .collect();

    // Low-frequency sway during travel.
    let sway = Sinusoid::random(
        rng,
        config.forklift_freq_lo,
        config.forklift_freq_hi,
        config.lift_amp * 0.5,
    );

    let mut lifts = Vec::new();
    let mut t = exp_gap(rng, config.lift_rate_hz);
    while t < duration {
        let lift = Lift {
            start: t,
            ramp: rng.random_range(0.8..1.6),
            hold: rng.random_range(1.0..2.5),
            height: config.lift_amp * rng.random_range(0.6..1.2),
        };
        t = lift.start + 2.0 * lift.ramp + lift.hold + exp_gap(rng, config.lift_rate_hz);
        lifts.push(lift);
    }

    (0..len)
        .map(|i| {
            let t = i as f64 / config.sample_rate;
            let lift: f64 = lifts.iter().map(|l| l.eval(t)).sum();
            Sample {
                t,
                ax: (vib[0][0].eval(t) + vib[0][1].eval(t) + sway.eval(t)) as f32,
                ay: (vib[1][0].eval(t) + vib[1][1].eval(t)) as f32,
                az: (config.gravity + lift + vib[2][0].eval(t) + vib[2][1].eval(t)) as f32,
            }
        })
        .collect()
}

fn truck_signature(config: &GeneratorConfig, len: usize, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    let duration = len as f64 / config.sample_rate;
    let vib: Vec<[Sinusoid; 3]> = (0..3)
        .map(|_| {
            [
                Sinusoid::random(rng, config.truck_freq_lo, config.truck_freq_hi, config.truck_amp),
                Sinusoid::random(rng, config.truck_freq_lo, config.truck_freq_hi, config.truck_amp * 0.7),
                Sinusoid::random(rng, config.truck_freq_lo, config.truck_freq_hi, config.truck_amp * 0.4),
            ]
        })
        .collect();
    let gate = Gate::alternating(rng, duration, 10.0, 25.0, config.truck_idle_frac, 0.05);

    (0..len)
        .map(|i| {
            let t = i as f64 / config.sample_rate;
            let g = gate.eval(t);
            let axis = |k: usize| (vib[k][0].eval(t) + vib[k][1].eval(t) + vib[k][2].eval(t)) * g;
            Sample {
                t,
                ax: axis(0) as f32,
                ay: axis(1) as f32,
                az: (config.gravity + axis(2)) as f32,
            }
        })
        .collect()
}

fn dummy_signature(config: &GeneratorConfig, len: usize, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    let duration = len as f64 / config.sample_rate;
    // Sparse transients: (start, axis, amplitude, decay time constant).
    let mut spikes: Vec<(f64, usize, f64, f64)> = Vec::new();
    let mut t = exp_gap(rng, config.dummy_spike_rate_hz);
    while t < duration {
        spikes.push((
            t,
            rng.random_range(0..3usize),
            rng.random_range(0.4..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            rng.random_range(0.15..0.5),
        ));
        t += exp_gap(rng, config.dummy_spike_rate_hz);
    }

    (0..len)
        .map(|i| {
            let t = i as f64 / config.sample_rate;
            let mut acc = [0.0f64; 3];
            for &(start, axis, amp, tau) in &spikes {
                if t >= start {
                    acc[axis] += amp * (-(t - start) / tau).exp();
                }
            }
            Sample {
                t,
                ax: acc[0] as f32,
                ay: acc[1] as f32,
                az: (config.gravity + acc[2]) as f32,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = GeneratorConfig::default();
        let a = generate_synthetic(&cfg, 42).unwrap();
        let b = generate_synthetic(&cfg, 42).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.label, y.label);
            assert_eq!(x.samples, y.samples);
        }
    }

    #[test]
    fn default_counts_match_scaled_paper_imbalance() {
        let cfg = GeneratorConfig::default();
        let streams = generate_synthetic(&cfg, 7).unwrap();
        let mut counts = [0usize; 3];
        for s in &streams {
            counts[s.label.index()] += s.samples.len();
        }
        assert!((counts[0] as i64 - 3820).abs() <= 1);
        assert!((counts[1] as i64 - 25200).abs() <= 1);
        assert!((counts[2] as i64 - 99).abs() <= 1);
    }

    #[test]
    fn zero_noise_equals_signature() {
        let mut cfg = GeneratorConfig::default();
        cfg.noise_std = 0.0;
        let streams = generate_synthetic(&cfg, 11).unwrap();
        let mut global_index = 0u64;
        let mut it = streams.iter();
        for label in Label::ALL {
            let total = cfg.samples_for(label);
            let n_streams = cfg.streams_for(label);
            for i in 0..n_streams {
                let len = total / n_streams + usize::from(i < total % n_streams);
                if len > 0 {
                    let stream = it.next().unwrap();
                    let expected =
                        stream_signature(&cfg, label, len, crate::rng::derive_seed(11, global_index));
                    assert_eq!(stream.samples, expected);
                }
                global_index += 1;
            }
        }
    }

    #[test]
    fn timestamps_strictly_increasing() {
        let streams = generate_synthetic(&GeneratorConfig::default(), 3).unwrap();
        for s in &streams {
            for pair in s.samples.windows(2) {
                assert!(pair[1].t > pair[0].t);
                assert!((pair[1].t - pair[0].t - 0.05).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn kv_roundtrip_and_unknown_key() {
        let cfg = GeneratorConfig::default();
        let parsed = GeneratorConfig::from_kv_str(&cfg.to_kv_string()).unwrap();
        assert_eq!(cfg, parsed);

        assert!(GeneratorConfig::from_kv_str("bogus_key = 1\n").is_err());
        assert!(GeneratorConfig::from_kv_str("scale 0.01\n").is_err());
    }

    #[test]
    fn zero_duration_rejected() {
        let mut cfg = GeneratorConfig::default();
        cfg.samples_dummy = 0;
        assert!(generate_synthetic(&cfg, 1).is_err());
    }

    #[test]
    fn scale_key_derives_counts() {
        let cfg = GeneratorConfig::from_kv_str("scale = 0.001\n").unwrap();
        assert_eq!(cfg.samples_forklift, 382);
        assert_eq!(cfg.samples_truck, 2520);
        assert_eq!(cfg.samples_dummy, 10);
    }
}
