//! Planar single-block slope model used to manufacture decision tables with
//! a known generating parameter vector.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::table::{AttributeSpec, DecisionTable, Scale};

pub const DEFAULT_ALPHA: f64 = 5.0;

/// Column names of generated tables, in order.
pub const PARAMETERS: [&str; 5] = ["c", "phi", "theta", "W", "A"];
pub const RESPONSE: &str = "disp";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeParams {
    /// Cohesion, kPa.
    pub c: f64,
    /// Friction angle, degrees.
    pub phi: f64,
    /// Slope angle, degrees.
    pub theta: f64,
    /// Block weight, kN.
    pub w: f64,
    /// Failure-plane area, m².
    pub a: f64,
    pub alpha: f64,
}

impl SlopeParams {
    pub fn new(c: f64, phi: f64, theta: f64, w: f64, a: f64) -> Self {
        SlopeParams { c, phi, theta, w, a, alpha: DEFAULT_ALPHA }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.c, self.phi, self.theta, self.w, self.a, self.alpha];
        if all.iter().any(|v| !v.is_finite()) {
            return usage("slope parameters must be finite");
        }
        // c = 0 is the frictional limit case and stays allowed
        if self.c < 0.0 || self.w <= 0.0 || self.a <= 0.0 || self.alpha <= 0.0 {
            return usage("slope parameters must be positive");
        }
        if !(self.phi > 0.0 && self.phi < 90.0) || !(self.theta >= 0.0 && self.theta < 90.0) {
            return usage("angles must lie in (0, 90) degrees");
        }
        Ok(())
    }

    /// Values in `PARAMETERS` order.
    pub fn values(&self) -> [f64; 5] {
        [self.c, self.phi, self.theta, self.w, self.a]
    }
}

/// `(c A + W cos θ tan φ) / (W sin θ)`.
pub fn factor_of_safety(p: &SlopeParams) -> Result<f64> {
    p.validate()?;
    let theta = p.theta.to_radians();
    let driving = p.w * theta.sin();
    if theta.sin() < 1e-9 {
        return usage("slope angle too close to zero for a driving force");
    }
    Ok((p.c * p.a + p.w * theta.cos() * p.phi.to_radians().tan()) / driving)
}

pub fn displacement_proxy(fs: f64, alpha: f64) -> f64 {
    (-alpha * (fs - 1.0)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateRanges {
    pub c: (f64, f64),
    pub phi: (f64, f64),
    pub theta: (f64, f64),
    pub w: (f64, f64),
    pub a: (f64, f64),
    pub alpha: f64,
}

impl Default for SurrogateRanges {
    fn default() -> Self {
        SurrogateRanges {
            c: (5.0, 50.0),
            phi: (20.0, 40.0),
            theta: (25.0, 45.0),
            w: (2000.0, 10000.0),
            a: (10.0, 50.0),
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl SurrogateRanges {
    fn bounds(&self) -> [(f64, f64); 5] {
        [self.c, self.phi, self.theta, self.w, self.a]
    }

    fn validate(&self) -> Result<()> {
        for ((lo, hi), name) in self.bounds().into_iter().zip(PARAMETERS) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return usage(format!("range for `{name}` must be a non-degenerate interval"));
            }
        }
        // corners must themselves be admissible
        SlopeParams { alpha: self.alpha, ..SlopeParams::new(self.c.0, self.phi.0, self.theta.0, self.w.0, self.a.0) }.validate()?;
        SlopeParams { alpha: self.alpha, ..SlopeParams::new(self.c.1, self.phi.1, self.theta.1, self.w.1, self.a.1) }.validate()
    }
}

pub fn schema() -> Vec<AttributeSpec> {
    let units = ["kPa", "deg", "deg", "kN", "m2"];
    let mut specs: Vec<AttributeSpec> =
        PARAMETERS.iter().zip(units).map(|(n, u)| AttributeSpec::condition(*n).with_units(u)).collect();
    specs.push(AttributeSpec::decision(RESPONSE).with_scale(Scale::Log10));
    specs
}

/// Latin-hypercube sample of `count` parameter vectors with their
/// displacement proxy.
pub fn generate_table(ranges: &SurrogateRanges, count: usize, seed: u64) -> Result<DecisionTable> {
    ranges.validate()?;
    if count == 0 {
        return usage("surrogate table needs at least one row");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = Vec::with_capacity(5);
    for (lo, hi) in ranges.bounds() {
        let mut strata: Vec<usize> = (0..count).collect();
        strata.shuffle(&mut rng);
        let col: Vec<f64> = strata
            .into_iter()
            .map(|s| lo + (s as f64 + rng.gen::<f64>()) / count as f64 * (hi - lo))
            .collect();
        columns.push(col);
    }
    let mut rows = Vec::with_capacity(count);
    for i in 0..count {
        let p = SlopeParams {
            alpha: ranges.alpha,
            ..SlopeParams::new(columns[0][i], columns[1][i], columns[2][i], columns[3][i], columns[4][i])
        };
        let disp = displacement_proxy(factor_of_safety(&p)?, p.alpha);
        let mut row: Vec<Option<f64>> = p.values().iter().map(|v| Some(*v)).collect();
        row.push(Some(disp));
        rows.push(row);
    }
    DecisionTable::new(schema(), rows)
}
