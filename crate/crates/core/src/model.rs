//! Switched linear-in-parameter systems: feature maps, datasets, parameter
//! matrices, switching generators and forward simulation.
//!
//! A switched system produces `y_t = x_t . a_{sigma(t)} + v_t` where the
//! regressor `x_t` is a known (possibly nonlinear) lifting of an observed
//! vector `z_t`. For ARX structure `z_t` stacks past outputs, the current
//! input and past inputs. Time is 1-based in every external format; all
//! vectors here are 0-based.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{LsmError, Result};

/// How a raw observation `z_t` is lifted to the regressor `x_t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureMap {
    /// `x_t = z_t`.
    Identity { dim: usize },
    /// `x_t = [y_{t-1} .. y_{t-na}, u_t, u_{t-1} .. u_{t-nb}]`, `u_t` of size `nu`.
    Arx { na: usize, nb: usize, nu: usize },
    /// All monomials of the entries of `z_t` up to `degree`, constant included,
    /// in graded lexicographic order.
    Polynomial { input_dim: usize, degree: usize },
}

impl FeatureMap {
    pub fn output_dim(&self) -> usize {
        match *self {
            FeatureMap::Identity { dim } => dim,
            FeatureMap::Arx { na, nb, nu } => na + (nb + 1) * nu,
            FeatureMap::Polynomial { input_dim, degree } => {
                crate::linalg::binomial(input_dim + degree, degree) as usize
            }
        }
    }

    /// Dimension of one raw input sample (`u_t` for ARX, `z_t` otherwise).
    pub fn input_dim(&self) -> usize {
        match *self {
            FeatureMap::Identity { dim } => dim,
            FeatureMap::Arx { nu, .. } => nu,
            FeatureMap::Polynomial { input_dim, .. } => input_dim,
        }
    }

    /// Number of leading raw samples consumed as lag history.
    pub fn warmup(&self) -> usize {
        match *self {
            FeatureMap::Arx { na, nb, .. } => na.max(nb),
            _ => 0,
        }
    }

    pub fn is_dynamic(&self) -> bool {
        matches!(self, FeatureMap::Arx { na, .. } if *na > 0)
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            FeatureMap::Identity { dim } => dim >= 1,
            FeatureMap::Arx { na, nb, nu } => nu >= 1 && na + (nb + 1) * nu >= 1,
            FeatureMap::Polynomial { input_dim, degree } => input_dim >= 1 && degree >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(LsmError::InvalidArgument(format!(
                "degenerate feature map {self:?}"
            )))
        }
    }

    /// Lifts a static observation `z` (identity and polynomial maps).
    pub fn lift(&self, z: &[f64]) -> Result<Vec<f64>> {
        match *self {
            FeatureMap::Identity { dim } => {
                check_len(z.len(), dim, "observation")?;
                Ok(z.to_vec())
            }
            FeatureMap::Polynomial { input_dim, degree } => {
                check_len(z.len(), input_dim, "observation")?;
                Ok(monomials(z, degree))
            }
            FeatureMap::Arx { .. } => Err(LsmError::InvalidArgument(
                "ARX regressors depend on the output history; use build_regressors".into(),
            )),
        }
    }
}

fn check_len(got: usize, want: usize, what: &str) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(LsmError::DimensionMismatch(format!(
            "{what} has length {got}, expected {want}"
        )))
    }
}

/// Monomials of total degree `0..=degree`, graded then lexicographic in the
/// exponent vectors: for `(a, b)` and degree 2 this is `1, a, b, a^2, ab, b^2`.
fn monomials(z: &[f64], degree: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    // Each entry: (value, index of the last variable used), so products are
    // generated with non-decreasing variable indices.
    let mut frontier: Vec<(f64, usize)> = vec![(1.0, 0)];
    for _ in 0..degree {
        let mut next = Vec::new();
        for &(value, last) in &frontier {
            for (k, &zk) in z.iter().enumerate().skip(last) {
                next.push((value * zk, k));
            }
        }
        out.extend(next.iter().map(|(v, _)| *v));
        frontier = next;
    }
    out
}

/// Builds the regressor matrix (`n x T`) from raw series.
///
/// For static maps `inputs[t]` is `z_t` and `outputs` is ignored. For ARX the
/// two series are aligned in time, and column `k` of the result is the
/// regressor at raw index `warmup + k`; warm-up samples are dropped.
pub fn build_regressors(
    inputs: &[Vec<f64>],
    outputs: &[f64],
    map: &FeatureMap,
) -> Result<DMatrix<f64>> {
    map.validate()?;
    let n = map.output_dim();
    match *map {
        FeatureMap::Identity { .. } | FeatureMap::Polynomial { .. } => {
            let mut x = DMatrix::zeros(n, inputs.len());
            for (t, z) in inputs.iter().enumerate() {
                let col = map.lift(z)?;
                x.column_mut(t).copy_from_slice(&col);
            }
            Ok(x)
        }
        FeatureMap::Arx { na, nb, nu } => {
            if outputs.len() != inputs.len() {
                return Err(LsmError::DimensionMismatch(format!(
                    "{} inputs but {} outputs",
                    inputs.len(),
                    outputs.len()
                )));
            }
            let start = na.max(nb);
            if inputs.len() <= start {
                return Err(LsmError::LagUnderflow {
                    needed: start + 1,
                    available: inputs.len(),
                });
            }
            for u in inputs {
                check_len(u.len(), nu, "input sample")?;
            }
            let cols = inputs.len() - start;
            let mut x = DMatrix::zeros(n, cols);
            for k in 0..cols {
                let col = arx_regressor(inputs, outputs, start + k, na, nb);
                x.column_mut(k).copy_from_slice(&col);
            }
            Ok(x)
        }
    }
}

fn arx_regressor(inputs: &[Vec<f64>], outputs: &[f64], t: usize, na: usize, nb: usize) -> Vec<f64> {
    let mut col = Vec::with_capacity(na + (nb + 1) * inputs[t].len());
    for lag in 1..=na {
        col.push(outputs[t - lag]);
    }
    for lag in 0..=nb {
        col.extend_from_slice(&inputs[t - lag]);
    }
    col
}

/// `n x s` matrix whose columns are the per-mode parameter vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterMatrix(DMatrix<f64>);

impl ParameterMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(LsmError::DimensionMismatch(
                "parameter matrix must be at least 1x1".into(),
            ));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(LsmError::NonFinite("parameter matrix"));
        }
        Ok(ParameterMatrix(matrix))
    }

    /// From a list of columns (one per mode).
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let s = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(LsmError::DimensionMismatch(
                "ragged parameter columns".into(),
            ));
        }
        Self::new(DMatrix::from_fn(n, s, |i, j| columns[j][i]))
    }

    pub fn zeros(n: usize, s: usize) -> Self {
        ParameterMatrix(DMatrix::zeros(n, s))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn s(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn column(&self, i: usize) -> DVector<f64> {
        self.0.column(i).into_owned()
    }

    pub fn set_column(&mut self, i: usize, a: &DVector<f64>) {
        self.0.set_column(i, a);
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.s())
            .map(|i| self.0.column(i).iter().copied().collect())
            .collect()
    }

    /// `[a_{pi(0)}, ..., a_{pi(s-1)}]`.
    pub fn permuted(&self, pi: &[usize]) -> Self {
        ParameterMatrix(DMatrix::from_fn(self.n(), self.s(), |r, c| {
            self.0[(r, pi[c])]
        }))
    }

    /// Whether all columns are pairwise distinct (Euclidean distance > `tol`).
    pub fn has_distinct_columns(&self, tol: f64) -> bool {
        (0..self.s())
            .all(|i| (i + 1..self.s()).all(|j| (self.0.column(i) - self.0.column(j)).norm() > tol))
    }

    /// Smallest pairwise Euclidean column distance (infinite when `s = 1`).
    pub fn min_column_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.s() {
            for j in i + 1..self.s() {
                best = best.min((self.0.column(i) - self.0.column(j)).norm());
            }
        }
        best
    }
}

/// Ground truth stored alongside simulated data.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub a_true: ParameterMatrix,
    /// 0-based mode labels.
    pub sigma: Vec<usize>,
    pub v: Vec<f64>,
}

/// Regressors (`n x N`, one column per sample), outputs and optional truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    truth: Option<Truth>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, truth: Option<Truth>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(LsmError::DimensionMismatch(
                "dataset needs n >= 1 and N >= 1".into(),
            ));
        }
        if y.len() != x.ncols() {
            return Err(LsmError::DimensionMismatch(format!(
                "{} regressors but {} outputs",
                x.ncols(),
                y.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LsmError::NonFinite("regressors"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(LsmError::NonFinite("outputs"));
        }
        if let Some(tr) = &truth {
            let n_samples = x.ncols();
            if tr.a_true.n() != x.nrows() {
                return Err(LsmError::DimensionMismatch(
                    "true parameters do not match n".into(),
                ));
            }
            if tr.sigma.len() != n_samples || tr.v.len() != n_samples {
                return Err(LsmError::DimensionMismatch(
                    "truth series do not match N".into(),
                ));
            }
            if let Some(&bad) = tr.sigma.iter().find(|&&l| l >= tr.a_true.s()) {
                return Err(LsmError::InvalidLabel {
                    label: bad + 1,
                    modes: tr.a_true.s(),
                });
            }
        }
        Ok(Dataset { x, y, truth })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn truth(&self) -> Option<&Truth> {
        self.truth.as_ref()
    }

    pub fn regressor(&self, t: usize) -> nalgebra::DVectorView<'_, f64> {
        self.x.column(t)
    }

    /// Sub-dataset on the given sample indices (truth is dropped).
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let x = crate::linalg::select_columns(&self.x, idx);
        let y = DVector::from_iterator(idx.len(), idx.iter().map(|&t| self.y[t]));
        Dataset { x, y, truth: None }
    }

    pub fn without_truth(&self) -> Dataset {
        Dataset {
            x: self.x.clone(),
            y: self.y.clone(),
            truth: None,
        }
    }

    /// Largest reconstruction residual `|y_t - x_t . a_{sigma(t)} - v_t|`
    /// scaled by `1 + |y_t|`; `None` without truth.
    pub fn reconstruction_error(&self) -> Option<f64> {
        let tr = self.truth.as_ref()?;
        let mut worst = 0.0f64;
        for t in 0..self.len() {
            let pred = self.x.column(t).dot(&tr.a_true.0.column(tr.sigma[t]));
            let err = (self.y[t] - pred - tr.v[t]).abs() / (1.0 + self.y[t].abs());
            worst = worst.max(err);
        }
        Some(worst)
    }
}

/// Dense noise component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DenseNoise {
    #[default]
    None,
    Gaussian {
        std: f64,
    },
    Uniform {
        bound: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutlierSign {
    #[default]
    Random,
    Fixed,
}

/// Sparse outliers: `count` distinct positions with magnitudes uniform in
/// `magnitude_range`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseNoise {
    #[serde(default)]
    pub count: usize,
    #[serde(default = "default_magnitude")]
    pub magnitude_range: [f64; 2],
    #[serde(default)]
    pub sign: OutlierSign,
}

fn default_magnitude() -> [f64; 2] {
    [1.0, 1.0]
}

impl Default for SparseNoise {
    fn default() -> Self {
        SparseNoise {
            count: 0,
            magnitude_range: default_magnitude(),
            sign: OutlierSign::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub dense: DenseNoise,
    #[serde(default)]
    pub sparse: SparseNoise,
    #[serde(default)]
    pub seed: u64,
}

/// A realised noise sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSample {
    pub v: Vec<f64>,
    /// 0-based outlier positions, sorted.
    pub outliers: Vec<usize>,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        NoiseSpec::default()
    }

    fn validate(&self, len: usize) -> Result<()> {
        match self.dense {
            DenseNoise::Gaussian { std } if !(std >= 0.0 && std.is_finite()) => {
                return Err(LsmError::InvalidArgument(
                    "gaussian std must be finite and >= 0".into(),
                ))
            }
            DenseNoise::Uniform { bound } if !(bound >= 0.0 && bound.is_finite()) => {
                return Err(LsmError::InvalidArgument(
                    "uniform bound must be finite and >= 0".into(),
                ))
            }
            _ => {}
        }
        let [lo, hi] = self.sparse.magnitude_range;
        if self.sparse.count > 0 && !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(LsmError::InvalidArgument(
                "outlier magnitude range must satisfy lo <= hi".into(),
            ));
        }
        if self.sparse.count > len {
            return Err(LsmError::OutOfRange {
                name: "outlier count",
                value: self.sparse.count,
                lo: 0,
                hi: len,
            });
        }
        Ok(())
    }

    /// Draws the noise sequence; a pure function of `(self, len)`.
    pub fn sample(&self, len: usize) -> Result<NoiseSample> {
        self.validate(len)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut v: Vec<f64> = match self.dense {
            DenseNoise::None => vec![0.0; len],
            DenseNoise::Gaussian { std } => (0..len)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    std * z
                })
                .collect(),
            DenseNoise::Uniform { bound } => (0..len)
                .map(|_| rng.random_range(-1.0..=1.0) * bound)
                .collect(),
        };
        let mut outliers = sample(&mut rng, len, self.sparse.count).into_vec();
        outliers.sort_unstable();
        let [lo, hi] = self.sparse.magnitude_range;
        for &t in &outliers {
            let mag = if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            };
            let sign = match self.sparse.sign {
                OutlierSign::Fixed => 1.0,
                OutlierSign::Random => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            v[t] += sign * mag;
        }
        Ok(NoiseSample { v, outliers })
    }
}

/// Switching-signal generators. Labels are 1-based in `Periodic`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SwitchingKind {
    IidUniform,
    /// Independent draws with mode probabilities proportional to `weights`.
    IidWeighted {
        weights: Vec<f64>,
    },
    /// Piecewise-constant signal whose runs all last at least `min_dwell`.
    Dwell {
        min_dwell: usize,
    },
    Periodic {
        pattern: Vec<usize>,
    },
}

/// Generates a 0-based switching signal of length `len` over `s` modes.
pub fn switching_generator(
    kind: &SwitchingKind,
    len: usize,
    s: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if s == 0 {
        return Err(LsmError::InvalidArgument("s must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        SwitchingKind::IidUniform => Ok((0..len).map(|_| rng.random_range(0..s)).collect()),
        SwitchingKind::IidWeighted { weights } => {
            if weights.len() != s || weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
                return Err(LsmError::InvalidArgument(
                    "weights must be s finite nonnegative numbers".into(),
                ));
            }
            let total: f64 = weights.iter().sum();
            if total <= 0.0 {
                return Err(LsmError::InvalidArgument(
                    "weights must not all be zero".into(),
                ));
            }
            Ok((0..len)
                .map(|_| {
                    let mut u = rng.random::<f64>() * total;
                    for (i, w) in weights.iter().enumerate() {
                        if u < *w {
                            return i;
                        }
                        u -= w;
                    }
                    s - 1
                })
                .collect())
        }
        SwitchingKind::Dwell { min_dwell } => {
            let dwell = (*min_dwell).max(1);
            let mut out = Vec::with_capacity(len);
            let mut label = rng.random_range(0..s);
            while out.len() < len {
                let remaining = len - out.len();
                let mut run = dwell + rng.random_range(0..=dwell);
                if remaining < run + dwell {
                    run = remaining;
                }
                out.extend(std::iter::repeat_n(label, run));
                if s > 1 {
                    let shift = rng.random_range(1..s);
                    label = (label + shift) % s;
                }
            }
            Ok(out)
        }
        SwitchingKind::Periodic { pattern } => {
            if pattern.is_empty() {
                return Err(LsmError::EmptyPattern);
            }
            if let Some(&bad) = pattern.iter().find(|&&l| l == 0 || l > s) {
                return Err(LsmError::InvalidLabel {
                    label: bad,
                    modes: s,
                });
            }
            Ok((0..len).map(|t| pattern[t % pattern.len()] - 1).collect())
        }
    }
}

/// Raw excitation for [`simulate`]: one input sample per raw time index and,
/// for ARX maps, the outputs that precede the first regression time.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSequence {
    pub samples: Vec<Vec<f64>>,
    pub initial_outputs: Vec<f64>,
}

impl InputSequence {
    pub fn static_inputs(samples: Vec<Vec<f64>>) -> Self {
        InputSequence {
            samples,
            initial_outputs: Vec::new(),
        }
    }

    /// iid standard Gaussian excitation for `len` regression times under `map`
    /// (warm-up samples and initial outputs included for ARX).
    pub fn gaussian(map: &FeatureMap, len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let warm = map.warmup();
        let dim = map.input_dim();
        let samples = (0..len + warm)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let initial_outputs = (0..warm).map(|_| StandardNormal.sample(&mut rng)).collect();
        InputSequence {
            samples,
            initial_outputs,
        }
    }

    /// iid uniform excitation on `[-1, 1]`.
    pub fn uniform(map: &FeatureMap, len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let warm = map.warmup();
        let dim = map.input_dim();
        let samples = (0..len + warm)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect();
        let initial_outputs = (0..warm).map(|_| rng.random_range(-1.0..=1.0)).collect();
        InputSequence {
            samples,
            initial_outputs,
        }
    }
}

/// Output of [`simulate`]: the dataset plus the raw series it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub dataset: Dataset,
    pub raw_inputs: Vec<Vec<f64>>,
    /// Full output series aligned with `raw_inputs` (warm-up included).
    pub raw_outputs: Vec<f64>,
    pub outliers: Vec<usize>,
}

/// Runs the switched system forward. For ARX maps each output feeds later
/// regressors. `sigma` is 0-based and has one entry per regression time.
pub fn simulate(
    a_true: &ParameterMatrix,
    sigma: &[usize],
    inputs: &InputSequence,
    map: &FeatureMap,
    noise: &NoiseSpec,
) -> Result<Simulation> {
    map.validate()?;
    let n = map.output_dim();
    if a_true.n() != n {
        return Err(LsmError::DimensionMismatch(format!(
            "feature map produces n = {n}, parameters have n = {}",
            a_true.n()
        )));
    }
    let s = a_true.s();
    if let Some(&bad) = sigma.iter().find(|&&l| l >= s) {
        return Err(LsmError::InvalidLabel {
            label: bad + 1,
            modes: s,
        });
    }
    let len = sigma.len();
    let warm = map.warmup();
    if inputs.samples.len() != len + warm {
        return Err(LsmError::DimensionMismatch(format!(
            "{} input samples for {} regression times (warm-up {warm})",
            inputs.samples.len(),
            len
        )));
    }
    let noise_sample = noise.sample(len)?;
    let v = noise_sample.v;

    let (x, y, raw_outputs) = match *map {
        FeatureMap::Arx { na, nb, nu } => {
            if inputs.initial_outputs.len() != warm {
                return Err(LsmError::DimensionMismatch(format!(
                    "{} initial outputs, expected {warm}",
                    inputs.initial_outputs.len()
                )));
            }
            for u in &inputs.samples {
                check_len(u.len(), nu, "input sample")?;
            }
            let mut raw = inputs.initial_outputs.clone();
            let mut x = DMatrix::zeros(n, len);
            let mut y = DVector::zeros(len);
            for k in 0..len {
                let t = warm + k;
                let col = arx_regressor(&inputs.samples, &raw, t, na, nb);
                let xt = DVector::from_vec(col);
                let yt = xt.dot(&a_true.0.column(sigma[k])) + v[k];
                if !yt.is_finite() {
                    return Err(LsmError::SimulationDiverged { index: k + 1 });
                }
                x.set_column(k, &xt);
                y[k] = yt;
                raw.push(yt);
            }
            (x, y, raw)
        }
        _ => {
            let x = build_regressors(&inputs.samples, &[], map)?;
            let mut y = DVector::zeros(len);
            for k in 0..len {
                let yt = x.column(k).dot(&a_true.0.column(sigma[k])) + v[k];
                if !yt.is_finite() {
                    return Err(LsmError::SimulationDiverged { index: k + 1 });
                }
                y[k] = yt;
            }
            let raw = y.iter().copied().collect();
            (x, y, raw)
        }
    };
    let truth = Truth {
        a_true: a_true.clone(),
        sigma: sigma.to_vec(),
        v,
    };
    Ok(Simulation {
        dataset: Dataset::new(x, y, Some(truth))?,
        raw_inputs: inputs.samples.clone(),
        raw_outputs,
        outliers: noise_sample.outliers,
    })
}

/// Random true parameter matrix with iid standard Gaussian entries. For ARX
/// maps the autoregressive block of every column is rescaled so its absolute
/// sum is at most 0.9, which keeps the recursion stable under any switching.
pub fn random_parameter_matrix(map: &FeatureMap, s: usize, seed: u64) -> ParameterMatrix {
    let n = map.output_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::from_fn(n, s, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    if let FeatureMap::Arx { na, .. } = *map {
        for j in 0..s {
            let l1: f64 = (0..na).map(|i| m[(i, j)].abs()).sum();
            if l1 > 0.9 {
                for i in 0..na {
                    m[(i, j)] *= 0.9 / l1;
                }
            }
        }
    }
    ParameterMatrix(m)
}

/// Root-seed splitting rule for independent trials: `root XOR index`.
pub fn trial_seed(root: u64, index: u64) -> u64 {
    root ^ index
}

/// Deterministic derived seed for a named sub-stream (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
