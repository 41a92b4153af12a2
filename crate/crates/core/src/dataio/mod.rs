//! Dataset plumbing: sample streams, windowing, stratified splits.

pub mod csvio;
mod generate;
pub mod manifest;

pub use csvio::{read_csv, read_csv_from, write_csv, write_csv_to};
pub use generate::{generate_synthetic, stream_signature, GeneratorConfig};

use crate::error::{Error, Result};
use crate::rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Number of accelerometer axes (x, y, z).
pub const AXES: usize = 3;

/// Sampling frequency of the sensor in Hz.
pub const SAMPLE_RATE_HZ: f64 = 20.0;

/// Event classes. `Dummy` doubles as the rejection target for low-confidence
/// predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Forklift,
    Truck,
    Dummy,
}

/// Total number of classes, Dummy included.
pub const NUM_CLASSES: usize = 3;

/// Classes whose precision/recall is reported; Dummy is excluded.
pub const TARGET_CLASSES: [Label; 2] = [Label::Forklift, Label::Truck];

impl Label {
    pub const ALL: [Label; NUM_CLASSES] = [Label::Forklift, Label::Truck, Label::Dummy];

    pub fn index(self) -> usize {
        match self {
            Label::Forklift => 0,
            Label::Truck => 1,
            Label::Dummy => 2,
        }
    }

    pub fn from_index(idx: usize) -> Option<Label> {
        Label::ALL.get(idx).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Forklift => "Forklift",
            Label::Truck => "Truck",
            Label::Dummy => "Dummy",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "Forklift" => Some(Label::Forklift),
            "Truck" => Some(Label::Truck),
            "Dummy" => Some(Label::Dummy),
            _ => None,
        }
    }
}

/// One accelerometer reading. Accelerations are in g.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub ax: f32,
    pub ay: f32,
    pub az: f32,
}

/// A contiguous recording from one sensor, all samples sharing one label.
#[derive(Debug, Clone)]
pub struct LabeledStream {
    pub samples: Vec<Sample>,
    pub label: Label,
}

/// One classification input: `v_l` consecutive tri-axial samples, stored
/// row-major as `[t0x, t0y, t0z, t1x, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeWindow {
    values: Vec<f32>,
    v_l: usize,
    pub label: Option<Label>,
}

impl TimeWindow {
    pub fn new(values: Vec<f32>, v_l: usize, label: Option<Label>) -> Result<TimeWindow> {
        if v_l == 0 || values.len() != v_l * AXES {
            return Err(Error::Config(format!(
                "window expects {} values for v_l={}, got {}",
                v_l * AXES,
                v_l,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("window contains non-finite values".into()));
        }
        Ok(TimeWindow { values, v_l, label })
    }

    pub fn from_samples(samples: &[Sample], label: Option<Label>) -> Result<TimeWindow> {
        let mut values = Vec::with_capacity(samples.len() * AXES);
        for s in samples {
            values.extend_from_slice(&[s.ax, s.ay, s.az]);
        }
        TimeWindow::new(values, samples.len(), label)
    }

    pub fn v_l(&self) -> usize {
        self.v_l
    }

    /// Flattened values, time-major.
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn value(&self, t: usize, axis: usize) -> f32 {
        self.values[t * AXES + axis]
    }

    /// Squared Euclidean distance on the flattened vectors.
    pub fn dist_sq(&self, other: &TimeWindow) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| {
                let d = (*a as f64) - (*b as f64);
                d * d
            })
            .sum()
    }
}

/// A collection of labeled windows sharing one `v_l`.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    windows: Vec<TimeWindow>,
    class_counts: [usize; NUM_CLASSES],
}

impl LabeledDataset {
    pub fn new(windows: Vec<TimeWindow>) -> Result<LabeledDataset> {
        let mut class_counts = [0usize; NUM_CLASSES];
        let mut v_l = None;
        for w in &windows {
            let label = w
                .label
                .ok_or_else(|| Error::Config("dataset window without label".into()))?;
            class_counts[label.index()] += 1;
            match v_l {
                None => v_l = Some(w.v_l),
                Some(v) if v != w.v_l => {
                    return Err(Error::Config(format!(
                        "mixed window lengths in dataset: {} vs {}",
                        v, w.v_l
                    )))
                }
                _ => {}
            }
        }
        Ok(LabeledDataset {
            windows,
            class_counts,
        })
    }

    pub fn windows(&self) -> &[TimeWindow] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn class_count(&self, label: Label) -> usize {
        self.class_counts[label.index()]
    }

    pub fn class_counts(&self) -> &[usize; NUM_CLASSES] {
        &self.class_counts
    }

    pub fn v_l(&self) -> Option<usize> {
        self.windows.first().map(|w| w.v_l)
    }

    pub fn of_class(&self, label: Label) -> Vec<TimeWindow> {
        self.windows
            .iter()
            .filter(|w| w.label == Some(label))
            .cloned()
            .collect()
    }

    /// Appends windows, keeping the count table consistent.
    pub fn extend(&mut self, windows: Vec<TimeWindow>) -> Result<()> {
        let mut merged = std::mem::take(&mut self.windows);
        merged.extend(windows);
        *self = LabeledDataset::new(merged)?;
        Ok(())
    }
}

/// Fractions for the train/val/test split plus the shuffle seed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64, seed: u64) -> Result<SplitSpec> {
        let spec = SplitSpec {
            train_frac,
            val_frac,
            test_frac,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("train_frac", self.train_frac),
            ("val_frac", self.val_frac),
            ("test_frac", self.test_frac),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("{name} = {f} not in [0,1]")));
            }
        }
        let sum = self.train_frac + self.val_frac + self.test_frac;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_frac: 0.70,
            val_frac: 0.15,
            test_frac: 0.15,
            seed: 42,
        }
    }
}

/// Result of [`split_dataset`]. Warnings flag classes too small to stratify.
#[derive(Debug)]
pub struct SplitOutput {
    pub train: LabeledDataset,
    pub val: LabeledDataset,
    pub test: LabeledDataset,
    pub warnings: Vec<String>,
}

/// Cuts a stream into windows of `v_l` samples every `stride` samples.
/// A stream shorter than `v_l` yields no windows.
pub fn window_stream(
    samples: &[Sample],
    v_l: usize,
    stride: usize,
    label: Option<Label>,
) -> Result<Vec<TimeWindow>> {
    if v_l == 0 {
        return Err(Error::Config("v_l must be >= 1".into()));
    }
    if stride == 0 {
        return Err(Error::Config("stride must be >= 1".into()));
    }
    let mut windows = Vec::new();
    if samples.len() < v_l {
        return Ok(windows);
    }
    let count = (samples.len() - v_l) / stride + 1;
    for i in 0..count {
        let start = i * stride;
        windows.push(TimeWindow::from_samples(&samples[start..start + v_l], label)?);
    }
    Ok(windows)
}

/// Stratified, seeded split. Per class: `floor(n*val)` to val, `floor(n*test)`
/// to test, remainder to train. Classes with fewer than 3 windows go entirely
/// to train.
pub fn split_dataset(ds: &LabeledDataset, spec: &SplitSpec) -> Result<SplitOutput> {
    spec.validate()?;
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    let mut warnings = Vec::new();

    for label in Label::ALL {
        let mut indices: Vec<usize> = ds
            .windows
            .iter()
            .enumerate()
            .filter(|(_, w)| w.label == Some(label))
            .map(|(i, _)| i)
            .collect();
        if indices.is_empty() {
            continue;
        }
        if indices.len() < 3 {
            warnings.push(format!(
                "class {} has only {} windows; assigning all to train",
                label.name(),
                indices.len()
            ));
            train.extend(indices.iter().map(|&i| ds.windows[i].clone()));
            continue;
        }
        let mut rng = rng::seeded(rng::derive_seed(spec.seed, label.index() as u64));
        indices.shuffle(&mut rng);
        let n = indices.len();
        let n_val = (n as f64 * spec.val_frac).floor() as usize;
        let n_test = (n as f64 * spec.test_frac).floor() as usize;
        let (val_idx, rest) = indices.split_at(n_val);
        let (test_idx, train_idx) = rest.split_at(n_test);
        val.extend(val_idx.iter().map(|&i| ds.windows[i].clone()));
        test.extend(test_idx.iter().map(|&i| ds.windows[i].clone()));
        train.extend(train_idx.iter().map(|&i| ds.windows[i].clone()));
    }

    Ok(SplitOutput {
        train: LabeledDataset::new(train)?,
        val: LabeledDataset::new(val)?,
        test: LabeledDataset::new(test)?,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn const_window(v: f32, v_l: usize, label: Option<Label>) -> TimeWindow {
        TimeWindow::new(vec![v; v_l * AXES], v_l, label).unwrap()
    }

    fn stream(n: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| Sample {
                t: i as f64 / SAMPLE_RATE_HZ,
                ax: i as f32,
                ay: -(i as f32),
                az: 1.0,
            })
            .collect()
    }

    #[test]
    fn window_counts() {
        let s = stream(10);
        let w = window_stream(&s, 4, 4, None).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].value(0, 0), 0.0);
        assert_eq!(w[1].value(0, 0), 4.0);

        let s = stream(128);
        let w = window_stream(&s, 128, 1, None).unwrap();
        assert_eq!(w.len(), 1);
        for i in 0..128 {
            assert_eq!(w[0].value(i, 0), i as f32);
        }

        let s = stream(100);
        assert!(window_stream(&s, 128, 1, None).unwrap().is_empty());
    }

    #[test]
    fn window_never_fabricates() {
        let s = stream(50);
        for w in window_stream(&s, 16, 7, None).unwrap() {
            for t in 0..16 {
                let v = w.value(t, 0);
                assert!(s.iter().any(|smp| smp.ax == v));
            }
        }
    }

    #[test]
    fn rejects_nonfinite() {
        assert!(TimeWindow::new(vec![f32::NAN; 3], 1, None).is_err());
    }

    #[test]
    fn split_exact_division() {
        let windows: Vec<_> = (0..100)
            .map(|_| const_window(0.0, 4, Some(Label::Truck)))
            .collect();
        let ds = LabeledDataset::new(windows).unwrap();
        let spec = SplitSpec::new(0.70, 0.15, 0.15, 1).unwrap();
        let out = split_dataset(&ds, &spec).unwrap();
        assert_eq!(out.train.len(), 70);
        assert_eq!(out.val.len(), 15);
        assert_eq!(out.test.len(), 15);
    }

    #[test]
    fn split_rounding_rule() {
        // 7 windows at 70/15/15: floor(7*0.15)=1 each for val/test, 5 to train.
        let windows: Vec<_> = (0..7)
            .map(|i| const_window(i as f32, 4, Some(Label::Forklift)))
            .collect();
        let ds = LabeledDataset::new(windows).unwrap();
        let out = split_dataset(&ds, &SplitSpec::default()).unwrap();
        assert_eq!(
            (out.train.len(), out.val.len(), out.test.len()),
            (5, 1, 1)
        );
    }

    #[test]
    fn split_deterministic_and_partition() {
        let mut windows = Vec::new();
        for i in 0..40 {
            windows.push(const_window(i as f32, 4, Some(Label::Forklift)));
        }
        for i in 0..60 {
            windows.push(const_window(100.0 + i as f32, 4, Some(Label::Truck)));
        }
        let ds = LabeledDataset::new(windows).unwrap();
        let spec = SplitSpec::default();
        let a = split_dataset(&ds, &spec).unwrap();
        let b = split_dataset(&ds, &spec).unwrap();
        assert_eq!(a.train.windows(), b.train.windows());
        assert_eq!(a.val.windows(), b.val.windows());
        assert_eq!(a.test.windows(), b.test.windows());

        let total = a.train.len() + a.val.len() + a.test.len();
        assert_eq!(total, ds.len());

        // Stratification: per-class train fraction within 1/count of target.
        for label in [Label::Forklift, Label::Truck] {
            let n = ds.class_count(label) as f64;
            let frac = a.train.class_count(label) as f64 / n;
            assert!((frac - spec.train_frac).abs() <= 1.0 / n + 1e-12);
        }
    }

    #[test]
    fn tiny_class_goes_to_train() {
        let mut windows = vec![const_window(0.0, 4, Some(Label::Dummy))];
        for i in 0..10 {
            windows.push(const_window(i as f32, 4, Some(Label::Truck)));
        }
        let ds = LabeledDataset::new(windows).unwrap();
        let out = split_dataset(&ds, &SplitSpec::default()).unwrap();
        assert_eq!(out.train.class_count(Label::Dummy), 1);
        assert!(!out.warnings.is_empty());
    }

    #[test]
    fn bad_split_spec() {
        assert!(SplitSpec::new(0.5, 0.5, 0.5, 0).is_err());
        assert!(SplitSpec::new(-0.1, 0.6, 0.5, 0).is_err());
    }
}
