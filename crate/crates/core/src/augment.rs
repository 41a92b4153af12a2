//! Minority oversampling for time-series windows: SMOTE and ADASYN, both
//! interpolating whole windows with a single coefficient per synthetic window
//! so the generated series stay continuous.

use crate::dataio::TimeWindow;
use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OversampleMode {
    Smote,
    Adasyn,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OversampleConfig {
    /// Neighbor count K.
    pub k: usize,
    /// Balance level: the fraction of the class-size gap to close.
    pub beta: f64,
    pub mode: OversampleMode,
    pub seed: u64,
}

impl Default for OversampleConfig {
    fn default() -> Self {
        OversampleConfig {
            k: 5,
            beta: 0.4,
            mode: OversampleMode::Adasyn,
            seed: 42,
        }
    }
}

impl OversampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta {} not in [0,1]", self.beta)));
        }
        Ok(())
    }
}

/// Interpolation provenance of one synthetic window: indices into the
/// minority pool of the two parents plus the coefficient.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Provenance {
    pub selected: usize,
    pub neighbor: usize,
    pub alpha: f32,
}

/// Synthetic windows with per-window parent records.
#[derive(Debug, Clone)]
pub struct SyntheticBatch {
    pub windows: Vec<TimeWindow>,
    pub provenance: Vec<Provenance>,
}

/// The k pool members nearest to `query` under Euclidean distance on the
/// flattened windows; ties break by ascending pool index.
pub fn knn(query: &TimeWindow, pool: &[TimeWindow], k: usize) -> Result<Vec<usize>> {
    knn_excluding(query, pool, k, None)
}

fn knn_excluding(
    query: &TimeWindow,
    pool: &[TimeWindow],
    k: usize,
    exclude: Option<usize>,
) -> Result<Vec<usize>> {
    let available = pool.len() - usize::from(exclude.map_or(false, |e| e < pool.len()));
    if available < k {
        return Err(Error::Config(format!(
            "k = {k} but only {available} pool members available"
        )));
    }
    let mut dists: Vec<(f64, usize)> = pool
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, w)| (query.dist_sq(w), i))
        .collect();
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    Ok(dists.into_iter().take(k).map(|(_, i)| i).collect())
}

fn interpolate(a: &TimeWindow, b: &TimeWindow, alpha: f32) -> Result<TimeWindow> {
    let values: Vec<f32> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| x + alpha * (y - x))
        .collect();
    TimeWindow::new(values, a.v_l(), a.label)
}

fn check_minority(minority: &[TimeWindow], k: usize) -> Result<()> {
    if minority.len() <= k {
        return Err(Error::Config(format!(
            "minority size {} must exceed k = {k}",
            minority.len()
        )));
    }
    Ok(())
}

/// Precomputed within-minority neighbor lists (no self-neighbor).
fn minority_neighbors(minority: &[TimeWindow], k: usize) -> Result<Vec<Vec<usize>>> {
    (0..minority.len())
        .map(|i| knn_excluding(&minority[i], minority, k, Some(i)))
        .collect()
}

/// SMOTE: `count` synthetic windows, each interpolating a random minority
/// window toward one of its k minority neighbors with a single alpha drawn
/// uniformly from [0,1].
pub fn smote_generate(
    minority: &[TimeWindow],
    count: usize,
    cfg: &OversampleConfig,
) -> Result<SyntheticBatch> {
    cfg.validate()?;
    if count == 0 {
        return Ok(SyntheticBatch {
            windows: vec![],
            provenance: vec![],
        });
    }
    check_minority(minority, cfg.k)?;
    let neighbors = minority_neighbors(minority, cfg.k)?;
    let mut rng = rng::seeded(cfg.seed);
    let mut windows = Vec::with_capacity(count);
    let mut provenance = Vec::with_capacity(count);
    for _ in 0..count {
        let selected = rng.random_range(0..minority.len());
        let neighbor = neighbors[selected][rng.random_range(0..cfg.k)];
        let alpha: f32 = rng.random_range(0.0..=1.0);
        windows.push(interpolate(&minority[selected], &minority[neighbor], alpha)?);
        provenance.push(Provenance {
            selected,
            neighbor,
            alpha,
        });
    }
    Ok(SyntheticBatch {
        windows,
        provenance,
    })
}

/// The ADASYN synthetic budget `G = round((m_l - m_s) * beta)`.
pub fn adasyn_budget(majority_count: usize, minority_count: usize, beta: f64) -> Result<usize> {
    if majority_count <= minority_count {
        return Err(Error::Config("no imbalance to correct".into()));
    }
    Ok((((majority_count - minority_count) as f64) * beta).round() as usize)
}

fn round_half_even(x: f64) -> usize {
    let floor = x.floor();
    let frac = x - floor;
    let f = floor as i64;
    let r = if frac > 0.5 {
        f + 1
    } else if frac < 0.5 {
        f
    } else if f % 2 == 0 {
        f
    } else {
        f + 1
    };
    r.max(0) as usize
}

/// Per-minority-window synthetic counts `g_i = round(r_hat_i * G)`, where
/// `r_i = Delta_i / K` counts majority members among the K nearest neighbors
/// of minority window i within minority ∪ majority. A zero density sum falls
/// back to a uniform distribution.
pub fn adasyn_counts(
    minority: &[TimeWindow],
    majority: &[TimeWindow],
    cfg: &OversampleConfig,
) -> Result<Vec<usize>> {
    cfg.validate()?;
    check_minority(minority, cfg.k)?;
    let budget = adasyn_budget(majority.len(), minority.len(), cfg.beta)?;

    // Union pool: minority first, then majority; Delta counts indices >= m_s.
    let mut pool: Vec<TimeWindow> = Vec::with_capacity(minority.len() + majority.len());
    pool.extend_from_slice(minority);
    pool.extend_from_slice(majority);

    let mut density: Vec<f64> = Vec::with_capacity(minority.len());
    for (i, w) in minority.iter().enumerate() {
        let nbrs = knn_excluding(w, &pool, cfg.k, Some(i))?;
        let delta = nbrs.iter().filter(|&&j| j >= minority.len()).count();
        density.push(delta as f64 / cfg.k as f64);
    }
    let sum: f64 = density.iter().sum();
    let normalized: Vec<f64> = if sum == 0.0 {
        vec![1.0 / minority.len() as f64; minority.len()]
    } else {
        density.iter().map(|r| r / sum).collect()
    };
    Ok(normalized
        .iter()
        .map(|r| round_half_even(r * budget as f64))
        .collect())
}

/// ADASYN: generates `g_i` synthetics per minority window, interpolating
/// toward random minority neighbors (same formula as SMOTE). Boundary
/// windows (many majority neighbors) parent proportionally more synthetics.
pub fn adasyn_generate(
    minority: &[TimeWindow],
    majority: &[TimeWindow],
    cfg: &OversampleConfig,
) -> Result<SyntheticBatch> {
    let counts = adasyn_counts(minority, majority, cfg)?;
    let neighbors = minority_neighbors(minority, cfg.k)?;
    let mut rng = rng::seeded(cfg.seed);
    let total: usize = counts.iter().sum();
    let mut windows = Vec::with_capacity(total);
    let mut provenance = Vec::with_capacity(total);
    for (i, &g) in counts.iter().enumerate() {
        for _ in 0..g {
            let neighbor = neighbors[i][rng.random_range(0..cfg.k)];
            let alpha: f32 = rng.random_range(0.0..=1.0);
            windows.push(interpolate(&minority[i], &minority[neighbor], alpha)?);
            provenance.push(Provenance {
                selected: i,
                neighbor,
                alpha,
            });
        }
    }
    Ok(SyntheticBatch {
        windows,
        provenance,
    })
}

/// SMOTE is run with the same synthetic count as ADASYN so the two
/// techniques are compared at equal dataset sizes.
pub fn match_smote_count(adasyn_total: usize) -> usize {
    adasyn_total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{Label, AXES};

    fn const_window(v: f32, v_l: usize) -> TimeWindow {
        TimeWindow::new(vec![v; v_l * AXES], v_l, Some(Label::Forklift)).unwrap()
    }

    #[test]
    fn knn_exact_member() {
        let pool = vec![const_window(0.0, 4), const_window(1.0, 4)];
        let idx = knn(&const_window(1.0, 4), &pool, 1).unwrap();
        assert_eq!(idx, vec![1]);
    }

    #[test]
    fn knn_constant_windows_brute_force() {
        let v_l = 8;
        let pool = vec![
            const_window(0.0, v_l),
            const_window(1.0, v_l),
            const_window(2.0, v_l),
        ];
        let query = const_window(0.0, v_l);
        let idx = knn(&query, &pool, 3).unwrap();
        assert_eq!(idx, vec![0, 1, 2]);
        // Brute-force distances: sqrt(3*v_l)*{0,1,2}.
        let d1 = query.dist_sq(&pool[1]).sqrt();
        assert!((d1 - (3.0 * v_l as f64).sqrt()).abs() < 1e-6);
        let idx2 = knn(&query, &pool[1..], 2).unwrap();
        assert_eq!(idx2, vec![0, 1]);
    }

    #[test]
    fn knn_pool_too_small() {
        let pool = vec![const_window(0.0, 4)];
        assert!(knn(&const_window(0.0, 4), &pool, 2).is_err());
    }

    #[test]
    fn interpolation_endpoints() {
        let a = const_window(0.0, 4);
        let b = const_window(2.0, 4);
        assert_eq!(interpolate(&a, &b, 0.0).unwrap().values(), a.values());
        assert_eq!(interpolate(&a, &b, 1.0).unwrap().values(), b.values());
        let mid = interpolate(&a, &b, 0.5).unwrap();
        assert!(mid.values().iter().all(|&v| v == 1.0));
    }

    fn minority_pool(n: usize) -> Vec<TimeWindow> {
        (0..n).map(|i| const_window(i as f32 * 0.1, 4)).collect()
    }

    #[test]
    fn smote_count_and_convexity() {
        let minority = minority_pool(10);
        let cfg = OversampleConfig::default();
        let batch = smote_generate(&minority, 37, &cfg).unwrap();
        assert_eq!(batch.windows.len(), 37);
        for (w, p) in batch.windows.iter().zip(&batch.provenance) {
            assert_eq!(w.label, Some(Label::Forklift));
            let a = &minority[p.selected];
            let b = &minority[p.neighbor];
            for ((&s, &x), &y) in w.values().iter().zip(a.values()).zip(b.values()) {
                assert!(s >= x.min(y) - 1e-6 && s <= x.max(y) + 1e-6);
            }
        }
    }

    #[test]
    fn smote_zero_count_is_empty() {
        let minority = minority_pool(10);
        let batch = smote_generate(&minority, 0, &OversampleConfig::default()).unwrap();
        assert!(batch.windows.is_empty());
    }

    #[test]
    fn smote_minority_too_small() {
        let minority = minority_pool(5);
        assert!(smote_generate(&minority, 3, &OversampleConfig::default()).is_err());
    }

    #[test]
    fn smote_deterministic() {
        let minority = minority_pool(12);
        let cfg = OversampleConfig::default();
        let a = smote_generate(&minority, 20, &cfg).unwrap();
        let b = smote_generate(&minority, 20, &cfg).unwrap();
        assert_eq!(a.windows.len(), b.windows.len());
        for (x, y) in a.windows.iter().zip(&b.windows) {
            assert_eq!(x.values(), y.values());
        }
    }

    #[test]
    fn budget_formula() {
        // The reference dataset's arithmetic: (2,520,000 - 382,000) * 0.4.
        assert_eq!(adasyn_budget(2_520_000, 382_000, 0.4).unwrap(), 855_200);
        assert!(adasyn_budget(100, 100, 0.4).is_err());
        assert!(adasyn_budget(50, 100, 0.4).is_err());
    }

    #[test]
    fn density_ratio_formula() {
        // Delta = 3 of K = 5 -> r = 0.6, exercised through adasyn_counts on
        // a constructed neighborhood: one minority window surrounded by 3
        // near-identical majority and 2 near-identical minority windows.
        let mk = |v: f32| const_window(v, 4);
        // Minority: 3 boundary windows near 0 plus a self-contained far
        // cluster of 6 (each far window's 5 nearest are all minority).
        let mut minority = vec![mk(0.0), mk(0.01), mk(0.02)];
        for i in 0..6 {
            minority.push(mk(1000.0 + 0.01 * i as f32));
        }
        // Majority: 3 interleaved at the boundary, the rest far from both
        // minority clusters.
        let mut majority = vec![mk(0.003), mk(0.006), mk(0.009)];
        for i in 0..27 {
            majority.push(mk(20_000.0 + i as f32));
        }
        let cfg = OversampleConfig::default();
        let counts = adasyn_counts(&minority, &majority, &cfg).unwrap();
        // Boundary windows: Delta = 3 of K = 5 -> r = 0.6 each; far cluster
        // r = 0. G = round((30 - 9) * 0.4) = 8, so each boundary window gets
        // round(8/3) = 3 and the far cluster gets nothing.
        assert_eq!(&counts[..3], &[3, 3, 3]);
        assert_eq!(&counts[3..], &[0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn normalization_example() {
        // r = (0.2, 0.6), G = 100 -> r_hat = (0.25, 0.75) -> g = (25, 75).
        let r = [0.2, 0.6];
        let sum: f64 = r.iter().sum();
        let g: Vec<usize> = r.iter().map(|x| round_half_even(x / sum * 100.0)).collect();
        assert_eq!(g, vec![25, 75]);
    }

    #[test]
    fn uniform_fallback_when_far_from_boundary() {
        // All minority windows clustered far from the majority: every
        // Delta_i = 0, so counts fall back to uniform (differ by <= 1).
        let minority: Vec<TimeWindow> = (0..8).map(|i| const_window(i as f32 * 0.01, 4)).collect();
        let majority: Vec<TimeWindow> =
            (0..20).map(|i| const_window(100.0 + i as f32, 4)).collect();
        let cfg = OversampleConfig::default();
        let counts = adasyn_counts(&minority, &majority, &cfg).unwrap();
        let min = counts.iter().min().unwrap();
        let max = counts.iter().max().unwrap();
        assert!(max - min <= 1, "{counts:?}");
    }

    #[test]
    fn budget_slack() {
        let minority: Vec<TimeWindow> = (0..10).map(|i| const_window(i as f32, 4)).collect();
        let majority: Vec<TimeWindow> =
            (0..40).map(|i| const_window(i as f32 * 0.5, 4)).collect();
        let cfg = OversampleConfig::default();
        let counts = adasyn_counts(&minority, &majority, &cfg).unwrap();
        let total: usize = counts.iter().sum();
        let budget = adasyn_budget(40, 10, cfg.beta).unwrap();
        assert!((total as i64 - budget as i64).unsigned_abs() as usize <= minority.len());
    }

    #[test]
    fn boundary_cluster_parents_most_synthetics() {
        // Cluster A sits adjacent to the majority; cluster B far away.
        // A must parent >= 90% of synthetics.
        let mut minority = Vec::new();
        for i in 0..6 {
            minority.push(const_window(1.0 + i as f32 * 0.01, 4)); // cluster A
        }
        for i in 0..6 {
            minority.push(const_window(500.0 + i as f32 * 0.01, 4)); // cluster B
        }
        let majority: Vec<TimeWindow> =
            (0..60).map(|i| const_window(1.0 + i as f32 * 0.02, 4)).collect();
        let cfg = OversampleConfig::default();
        let batch = adasyn_generate(&minority, &majority, &cfg).unwrap();
        assert!(!batch.windows.is_empty());
        let from_a = batch
            .provenance
            .iter()
            .filter(|p| p.selected < 6)
            .count();
        assert!(
            from_a as f64 >= 0.9 * batch.provenance.len() as f64,
            "{from_a} of {}",
            batch.provenance.len()
        );
    }

    #[test]
    fn zero_count_window_parents_nothing() {
        let minority: Vec<TimeWindow> = (0..6).map(|i| const_window(i as f32, 4)).collect();
        let majority: Vec<TimeWindow> =
            (0..30).map(|i| const_window(i as f32 * 0.1, 4)).collect();
        let cfg = OversampleConfig::default();
        let counts = adasyn_counts(&minority, &majority, &cfg).unwrap();
        let batch = adasyn_generate(&minority, &majority, &cfg).unwrap();
        for (i, &g) in counts.iter().enumerate() {
            let parented = batch.provenance.iter().filter(|p| p.selected == i).count();
            assert_eq!(parented, g);
        }
    }

    #[test]
    fn match_count_is_identity() {
        assert_eq!(match_smote_count(855_200), 855_200);
        assert_eq!(match_smote_count(0), 0);
        assert_eq!(match_smote_count(100), 100);
    }

    #[test]
    fn round_half_even_cases() {
        assert_eq!(round_half_even(2.5), 2);
        assert_eq!(round_half_even(3.5), 4);
        assert_eq!(round_half_even(2.4), 2);
        assert_eq!(round_half_even(2.6), 3);
    }
}
