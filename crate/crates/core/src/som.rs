//! Kohonen self-organizing map and the 1-D SOM discretizer built on it.
//!
//! Input vectors are `f64` slices; a `NaN` component is treated as missing
//! and left out of distances and updates.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{data, usage, Error, Result};
use crate::table::{scale_minmax, DecisionTable, InformationSystem, Scale};

/// Order in which each epoch presents the training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Presentation {
    /// Data order, every epoch.
    Cyclic,
    /// A fresh seeded permutation per epoch.
    Shuffled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SomConfig {
    /// Grid width and height; the map has `nx * ny` nodes.
    pub grid: (usize, usize),
    pub epochs: usize,
    pub eta0: f64,
    pub radius0: f64,
    pub order: Presentation,
    pub seed: u64,
}

impl Default for SomConfig {
    fn default() -> Self {
        SomConfig { grid: (3, 3), epochs: 100, eta0: 0.5, radius0: 1.0, order: Presentation::Cyclic, seed: 0 }
    }
}

impl SomConfig {
    fn validate(&self) -> Result<()> {
        if self.grid.0 == 0 || self.grid.1 == 0 {
            return usage("SOM grid dimensions must be positive");
        }
        if self.epochs == 0 {
            return usage("SOM needs at least one epoch");
        }
        if !(self.eta0 > 0.0 && self.eta0 <= 1.0) {
            return usage(format!("learning rate {} outside (0, 1]", self.eta0));
        }
        if self.radius0.is_nan() || self.radius0 < 0.0 {
            return usage(format!("negative neighborhood radius {}", self.radius0));
        }
        Ok(())
    }
}

/// A trained (or hand-built) map. Node `i` sits at grid cell
/// `(i % nx, i / nx)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomMap {
    grid: (usize, usize),
    weights: Vec<Vec<f64>>,
    /// Quantization error on the training data: entry 0 before training,
    /// then one entry per epoch.
    error_trace: Vec<f64>,
}

/// Squared Euclidean distance over the components present in `x`.
fn sq_dist(x: &[f64], w: &[f64]) -> f64 {
    x.iter().zip(w).filter(|(xj, _)| !xj.is_nan()).map(|(xj, wj)| (xj - wj).powi(2)).sum()
}

impl SomMap {
    pub fn from_weights(grid: (usize, usize), weights: Vec<Vec<f64>>) -> Result<Self> {
        if grid.0 * grid.1 != weights.len() || weights.is_empty() {
            return usage(format!("{} weight vectors for a {}x{} grid", weights.len(), grid.0, grid.1));
        }
        let dim = weights[0].len();
        if weights.iter().any(|w| w.len() != dim || w.iter().any(|v| !v.is_finite())) {
            return usage("weight vectors must share a dimension and be finite");
        }
        Ok(SomMap { grid, weights, error_trace: Vec::new() })
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn error_trace(&self) -> &[f64] {
        &self.error_trace
    }

    fn coords(&self, node: usize) -> (usize, usize) {
        (node % self.grid.0, node / self.grid.0)
    }

    fn grid_distance(&self, a: usize, b: usize) -> usize {
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        ax.abs_diff(bx).max(ay.abs_diff(by))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return usage(format!("input has dimension {}, map expects {}", x.len(), self.dim()));
        }
        Ok(())
    }

    /// Best-matching node: smallest squared distance, lowest index on ties.
    pub fn winner(&self, x: &[f64]) -> Result<usize> {
        self.check_dim(x)?;
        Ok(self.winner_unchecked(x).0)
    }

    fn winner_unchecked(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, w) in self.weights.iter().enumerate() {
            let d = sq_dist(x, w);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    /// One presentation: moves the winner and every node within Chebyshev
    /// grid distance `radius` by `eta * (x - w)`. Returns the winner.
    pub fn update(&mut self, x: &[f64], eta: f64, radius: f64) -> Result<usize> {
        self.check_dim(x)?;
        Ok(self.update_unchecked(x, eta, radius))
    }

    fn update_unchecked(&mut self, x: &[f64], eta: f64, radius: f64) -> usize {
        let (win, _) = self.winner_unchecked(x);
        for node in 0..self.weights.len() {
            if self.grid_distance(win, node) as f64 > radius {
                continue;
            }
            for (wj, xj) in self.weights[node].iter_mut().zip(x) {
                if !xj.is_nan() {
                    *wj += eta * (xj - *wj);
                }
            }
        }
        win
    }
}

fn check_data(inputs: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = inputs.first() else {
        return data("SOM needs at least one input vector");
    };
    let dim = first.len();
    if dim == 0 || inputs.iter().any(|x| x.len() != dim) {
        return usage("input vectors must share a non-zero dimension");
    }
    Ok(dim)
}

/// Online SOM training with linearly decaying learning rate and radius.
///
/// Weights start as seeded uniform draws over the data's bounding box. Each
/// epoch presents every datum once, in the configured order.
pub fn train(data: &[Vec<f64>], config: &SomConfig) -> Result<SomMap> {
    config.validate()?;
    let dim = check_data(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let bounds: Vec<(f64, f64)> = (0..dim)
        .map(|j| {
            let present = data.iter().map(|x| x[j]).filter(|v| !v.is_nan());
            let (lo, hi) = present.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if lo.is_finite() {
                (lo, hi)
            } else {
                (0.0, 0.0)
            }
        })
        .collect();
    let nodes = config.grid.0 * config.grid.1;
    let weights = (0..nodes)
        .map(|_| bounds.iter().map(|&(lo, hi)| lo + rng.gen::<f64>() * (hi - lo)).collect())
        .collect();
    let mut map = SomMap { grid: config.grid, weights, error_trace: Vec::with_capacity(config.epochs + 1) };
    map.error_trace.push(mean_error(&map, data));

    let total = (config.epochs * data.len()) as f64;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut t = 0usize;
    for _ in 0..config.epochs {
        if config.order == Presentation::Shuffled {
            order.shuffle(&mut rng);
        }
        for &i in &order {
            let decay = 1.0 - t as f64 / total;
            map.update_unchecked(&data[i], config.eta0 * decay, config.radius0 * decay);
            t += 1;
        }
        map.error_trace.push(mean_error(&map, data));
    }
    Ok(map)
}

fn mean_error(map: &SomMap, data: &[Vec<f64>]) -> f64 {
    data.iter().map(|x| map.winner_unchecked(x).1).sum::<f64>() / data.len() as f64
}

/// Mean squared distance from each datum to its winner.
pub fn quantization_error(map: &SomMap, inputs: &[Vec<f64>]) -> Result<f64> {
    if inputs.is_empty() {
        return data("quantization error of an empty data set");
    }
    for x in inputs {
        map.check_dim(x)?;
    }
    Ok(mean_error(map, inputs))
}

/// A non-empty map node and the positions of the data it wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prototype {
    pub node: usize,
    pub weights: Vec<f64>,
    pub members: Vec<usize>,
}

/// Groups `data` by winning node; empty nodes are dropped.
pub fn reduce_prototypes(map: &SomMap, data: &[Vec<f64>]) -> Result<Vec<Prototype>> {
    let mut members = vec![Vec::new(); map.nodes()];
    for (i, x) in data.iter().enumerate() {
        members[map.winner(x)?].push(i);
    }
    Ok(members
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(node, members)| Prototype { node, weights: map.weights[node].clone(), members })
        .collect())
}

/// Min-max scaled condition and decision vectors of a raw table, after each
/// attribute's scale transform. Missing cells become `NaN`.
pub fn scaled_rows(table: &DecisionTable) -> Result<Vec<Vec<f64>>> {
    let mut cols = Vec::with_capacity(table.specs().len());
    for (c, spec) in table.specs().iter().enumerate() {
        let transformed: Vec<_> = table.column(c).into_iter().map(|v| v.map(|v| spec.scale.forward(v))).collect();
        let (scaled, _) = scale_minmax(&transformed)
            .map_err(|_| Error::Data(format!("attribute `{}` has no values", spec.name)))?;
        cols.push(scaled);
    }
    Ok((0..table.len()).map(|r| cols.iter().map(|col| col[r].unwrap_or(f64::NAN)).collect()).collect())
}

/// Training schedule of the 1-D maps behind [`fit_discretizer`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizerTraining {
    pub epochs: usize,
    pub eta0: f64,
    /// Initial radius as a fraction of the granule count.
    pub radius_fraction: f64,
    pub order: Presentation,
    /// Independent seeded maps; the one with the lowest quantization error
    /// and distinct centers wins.
    pub restarts: usize,
}

impl Default for DiscretizerTraining {
    fn default() -> Self {
        DiscretizerTraining { epochs: 200, eta0: 0.5, radius_fraction: 0.34, order: Presentation::Shuffled, restarts: 16 }
    }
}

/// Ordinal quantizer for one attribute. Label 1 is the highest granule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretizer {
    pub attribute: String,
    pub scale: Scale,
    /// Cluster centers in raw units, strictly decreasing.
    pub centers: Vec<f64>,
    /// Raw-unit thresholds between adjacent centers, strictly decreasing.
    pub cuts: Vec<f64>,
}

impl Discretizer {
    pub fn granules(&self) -> u32 {
        self.centers.len() as u32
    }

    /// Label `g` covers `(cuts[g-1], cuts[g-2]]`; a value equal to a cut
    /// falls in the lower granule.
    pub fn assign(&self, v: f64) -> u32 {
        1 + self.cuts.iter().filter(|&&c| v <= c).count() as u32
    }

    /// Raw-unit interval `(lower, upper]` covered by labels `lo..=hi`;
    /// `None` marks an unbounded side.
    pub fn label_bounds(&self, lo: u32, hi: u32) -> (Option<f64>, Option<f64>) {
        let g = self.granules();
        let lower = (hi < g).then(|| self.cuts[hi as usize - 1]);
        let upper = (lo > 1).then(|| self.cuts[lo as usize - 2]);
        (lower, upper)
    }

    /// `name scale centers=c1,... cuts=k1,...`, values 6-decimal fixed point
    /// in the attribute's scale domain (log10 units for log10 attributes).
    pub fn to_record(&self) -> String {
        let fmt = |vals: &[f64]| {
            vals.iter().map(|v| format!("{:.6}", self.scale.forward(*v))).collect::<Vec<_>>().join(",")
        };
        format!("{} {} centers={} cuts={}", self.attribute, self.scale, fmt(&self.centers), fmt(&self.cuts))
    }

    pub fn parse_record(line: &str) -> Result<Self> {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [name, scale, centers, cuts] = parts.as_slice() else {
            return data(format!("malformed discretizer record `{line}`"));
        };
        let scale: Scale = scale.parse()?;
        let list = |field: &str, key: &str| -> Result<Vec<f64>> {
            let Some(body) = field.strip_prefix(key) else {
                return data(format!("expected `{key}` in `{line}`"));
            };
            if body.is_empty() {
                return Ok(Vec::new());
            }
            body.split(',')
                .map(|v| {
                    v.parse::<f64>()
                        .map(|v| scale.inverse(v))
                        .map_err(|_| Error::Data(format!("bad number `{v}` in `{line}`")))
                })
                .collect()
        };
        Ok(Discretizer {
            attribute: name.to_string(),
            scale,
            centers: list(centers, "centers=")?,
            cuts: list(cuts, "cuts=")?,
        })
    }
}

pub fn render_records(discretizers: &[Discretizer]) -> String {
    let mut out = String::new();
    for d in discretizers {
        let _ = writeln!(out, "{}", d.to_record());
    }
    out
}

/// Fits a `granules x 1` SOM to one attribute's values (after its scale
/// transform, rescaled to [0, 1]) and derives ordered centers and midpoint
/// cuts.
pub fn fit_discretizer(attribute: &str, values: &[f64], granules: u32, scale: Scale, seed: u64) -> Result<Discretizer> {
    fit_discretizer_with(attribute, values, granules, scale, seed, &DiscretizerTraining::default())
}

pub fn fit_discretizer_with(
    attribute: &str,
    values: &[f64],
    granules: u32,
    scale: Scale,
    seed: u64,
    training: &DiscretizerTraining,
) -> Result<Discretizer> {
    if granules < 2 {
        return usage("a discretizer needs at least two granules");
    }
    let transformed: Vec<f64> = values.iter().map(|v| scale.forward(*v)).collect();
    if transformed.is_empty() {
        return data(format!("attribute `{attribute}` has no values to discretize"));
    }
    if let Some(bad) = transformed.iter().position(|v| !v.is_finite()) {
        return data(format!("attribute `{attribute}`: value {} invalid under {scale} scale", values[bad]));
    }
    let mut distinct = transformed.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < granules as usize {
        return data(format!(
            "attribute `{attribute}` has {} distinct values, fewer than {granules} granules",
            distinct.len()
        ));
    }

    let lo = distinct[0];
    let hi = distinct[distinct.len() - 1];
    let inputs: Vec<Vec<f64>> = transformed.iter().map(|&v| vec![(v - lo) / (hi - lo)]).collect();
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..training.restarts.max(1) {
        let config = SomConfig {
            grid: (granules as usize, 1),
            epochs: training.epochs,
            eta0: training.eta0,
            radius0: granules as f64 * training.radius_fraction,
            order: training.order,
            seed: seeds.gen(),
        };
        let map = train(&inputs, &config)?;
        let mut centers: Vec<f64> = map.weights().iter().map(|w| lo + w[0] * (hi - lo)).collect();
        centers.sort_by(|a, b| b.total_cmp(a));
        if centers.windows(2).any(|w| w[0] <= w[1]) {
            continue;
        }
        let qe = mean_error(&map, &inputs);
        if best.as_ref().is_none_or(|(e, _)| qe < *e) {
            best = Some((qe, centers));
        }
    }
    let Some((_, centers)) = best else {
        return data(format!("attribute `{attribute}`: SOM produced coincident granule centers"));
    };
    let cuts: Vec<f64> = centers.windows(2).map(|w| scale.inverse((w[0] + w[1]) / 2.0)).collect();
    let centers = centers.into_iter().map(|c| scale.inverse(c)).collect();
    Ok(Discretizer { attribute: attribute.to_string(), scale, centers, cuts })
}

/// One discretizer per attribute of `table`, each seeded from `seed` plus the
/// column index.
pub fn fit_table(table: &DecisionTable, granules: u32, seed: u64) -> Result<Vec<Discretizer>> {
    table
        .specs()
        .iter()
        .enumerate()
        .map(|(c, spec)| {
            let values: Vec<f64> = table.column(c).into_iter().flatten().collect();
            fit_discretizer(&spec.name, &values, granules, spec.scale, seed.wrapping_add(c as u64))
        })
        .collect()
}
