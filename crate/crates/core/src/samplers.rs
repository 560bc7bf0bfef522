//! Seeded generators for the supported distribution families.
//!
//! Every draw is `x = mu + shape^{1/2} y` (elliptical: `x = mu + z shape^{1/2} y`
//! with `y` uniform on the unit sphere). The generator is ChaCha8 seeded
//! with [`rng_from_seed`]; independent tasks derive their seeds with
//! [`derive_seed`], so no generator is ever shared across tasks.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, Pareto, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Provenance, ScatterMatrix};

/// Smoothing level used by the permuted-smoothed family unless overridden.
pub const DEFAULT_SMOOTHING: f64 = 0.01;

/// Law of the positive radial variable `z` of the elliptical family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "law", content = "param")]
pub enum RadialLaw {
    /// `z = c` almost surely.
    Constant(f64),
    /// `z = sqrt(chi^2_k)`; with `k = p` the elliptical draw is standard Gaussian.
    ChiLike(u32),
    /// Pareto with unit scale and tail index `a > 2` (finite second moment).
    Pareto(f64),
}

impl RadialLaw {
    fn validate(&self) -> Result<()> {
        match *self {
            RadialLaw::Constant(c) if !(c > 0.0 && c.is_finite()) => Err(Error::InvalidInput(
                format!("constant radial law needs c > 0, got {c}"),
            )),
            RadialLaw::ChiLike(0) => Err(Error::InvalidInput(
                "chi-like radial law needs k >= 1".into(),
            )),
            RadialLaw::Pareto(a) if !(a > 2.0 && a.is_finite()) => Err(Error::InvalidInput(
                format!("pareto radial law needs a > 2, got {a}"),
            )),
            _ => Ok(()),
        }
    }

    /// Parse `constant:c`, `chi:k` or `pareto:a`.
    pub fn parse(s: &str) -> Result<Self> {
        let (name, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("radial law {s:?} needs name:param")))?;
        let bad = || Error::InvalidInput(format!("bad radial parameter in {s:?}"));
        let law = match name {
            "constant" => RadialLaw::Constant(arg.parse().map_err(|_| bad())?),
            "chi" | "chi-like" => RadialLaw::ChiLike(arg.parse().map_err(|_| bad())?),
            "pareto" => RadialLaw::Pareto(arg.parse().map_err(|_| bad())?),
            _ => return Err(Error::InvalidInput(format!("unknown radial law {name:?}"))),
        };
        law.validate()?;
        Ok(law)
    }

    fn describe(&self) -> String {
        match self {
            RadialLaw::Constant(c) => format!("constant:{c}"),
            RadialLaw::ChiLike(k) => format!("chi:{k}"),
            RadialLaw::Pareto(a) => format!("pareto:{a}"),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            RadialLaw::Constant(c) => c,
            RadialLaw::ChiLike(k) => {
                let chi2: f64 = ChiSquared::new(k as f64).expect("k >= 1").sample(rng);
                chi2.sqrt()
            }
            RadialLaw::Pareto(a) => Pareto::new(1.0, a).expect("a > 2").sample(rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum Family {
    Gaussian,
    /// i.i.d. coordinates with density `exp(-sqrt2 |y|)/sqrt2` (unit variance).
    LaplaceIid,
    /// `(A + sigma Z)/sqrt(1 + sigma^2)` with `A` a uniform balanced sign vector.
    PermutedSmoothed {
        sigma: f64,
    },
    /// `z * Y` with `Y` uniform on the unit sphere (so `E[YY^T] = I/p`).
    Elliptical {
        radial: RadialLaw,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::LaplaceIid => "laplace-iid",
            Family::PermutedSmoothed { .. } => "permuted-smoothed",
            Family::Elliptical { .. } => "elliptical",
        }
    }

    /// Build from a family name plus the optional family parameters.
    pub fn from_name(name: &str, sigma: Option<f64>, radial: Option<RadialLaw>) -> Result<Self> {
        match name {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "laplace" | "laplace-iid" => Ok(Family::LaplaceIid),
            "permuted-smoothed" | "permuted" => Ok(Family::PermutedSmoothed {
                sigma: sigma.unwrap_or(DEFAULT_SMOOTHING),
            }),
            "elliptical" => Ok(Family::Elliptical {
                radial: radial.ok_or_else(|| {
                    Error::InvalidInput("elliptical family needs a radial law".into())
                })?,
            }),
            _ => Err(Error::InvalidInput(format!("unknown family {name:?}"))),
        }
    }
}

/// Full description of a sampling law: family, location and shape.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    pub family: Family,
    pub mean: Option<DVector<f64>>,
    pub shape: Option<ScatterMatrix>,
}

impl DistributionSpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            mean: None,
            shape: None,
        }
    }

    pub fn gaussian() -> Self {
        Self::new(Family::Gaussian)
    }

    pub fn laplace() -> Self {
        Self::new(Family::LaplaceIid)
    }

    pub fn permuted_smoothed(sigma: f64) -> Self {
        Self::new(Family::PermutedSmoothed { sigma })
    }

    pub fn elliptical(radial: RadialLaw) -> Self {
        Self::new(Family::Elliptical { radial })
    }

    pub fn with_shape(mut self, shape: ScatterMatrix) -> Self {
        self.shape = Some(shape);
        self
    }

    pub fn with_mean(mut self, mean: DVector<f64>) -> Self {
        self.mean = Some(mean);
        self
    }

    /// Family name with its parameters, e.g. `elliptical/pareto:2.5`.
    pub fn describe(&self) -> String {
        match self.family {
            Family::Elliptical { radial } => format!("elliptical/{}", radial.describe()),
            Family::PermutedSmoothed { sigma } => format!("permuted-smoothed/sigma={sigma}"),
            f => f.name().to_string(),
        }
    }

    /// `p^{-1} Tr shape` (1 for the default identity shape).
    pub fn tau(&self) -> f64 {
        self.shape.as_ref().map_or(1.0, ScatterMatrix::tau)
    }

    fn validate(&self, p: usize) -> Result<()> {
        match self.family {
            Family::PermutedSmoothed { sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "smoothing level must be positive, got {sigma}"
                    )));
                }
                if !p.is_multiple_of(2) {
                    return Err(Error::InvalidInput(format!(
                        "permuted-smoothed needs even p, got {p}"
                    )));
                }
            }
            Family::Elliptical { radial } => radial.validate()?,
            _ => {}
        }
        if let Some(shape) = &self.shape {
            if shape.p() != p {
                return Err(Error::DimensionMismatch {
                    expected: format!("{p}x{p} shape"),
                    found: format!("{0}x{0}", shape.p()),
                });
            }
            shape.require_spd("distribution shape")?;
        }
        if let Some(mean) = &self.mean {
            if mean.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: format!("mean of length {p}"),
                    found: format!("{}", mean.len()),
                });
            }
        }
        Ok(())
    }
}

/// Seed-derivation rule for independent tasks: one SplitMix64 finalizer
/// round over `base` combined with the mixed `stream` index.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream.wrapping_add(0x632B_E59B_D9B4_E019)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn laplace_unit_variance(rng: &mut ChaCha8Rng) -> f64 {
    // difference of two Exp(1) is Laplace with scale 1; rescale to variance 1
    let a: f64 = Exp1.sample(rng);
    let b: f64 = Exp1.sample(rng);
    (a - b) / std::f64::consts::SQRT_2
}

/// Draw the isotropic (or spherical) part `y` for every row.
fn draw_base(family: &Family, n: usize, p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(n, p);
    match *family {
        Family::Gaussian => {
            for i in 0..n {
                for j in 0..p {
                    y[(i, j)] = rng.sample(StandardNormal);
                }
            }
        }
        Family::LaplaceIid => {
            for i in 0..n {
                for j in 0..p {
                    y[(i, j)] = laplace_unit_variance(rng);
                }
            }
        }
        Family::PermutedSmoothed { sigma } => {
            let scale = 1.0 / (1.0 + sigma * sigma).sqrt();
            let mut signs: Vec<f64> = (0..p).map(|j| if j < p / 2 { 1.0 } else { -1.0 }).collect();
            for i in 0..n {
                signs.shuffle(rng);
                for j in 0..p {
                    let z: f64 = rng.sample(StandardNormal);
                    y[(i, j)] = scale * (signs[j] + sigma * z);
                }
            }
        }
        Family::Elliptical { radial } => {
            let mut g = vec![0.0; p];
            for i in 0..n {
                let norm = loop {
                    for v in g.iter_mut() {
                        *v = rng.sample(StandardNormal);
                    }
                    let nrm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if nrm > 0.0 {
                        break nrm;
                    }
                };
                let z = radial.draw(rng);
                for j in 0..p {
                    y[(i, j)] = z * g[j] / norm;
                }
            }
        }
    }
    y
}

/// Draw `n` i.i.d. rows of dimension `p`; deterministic in `(spec, n, p, seed)`.
pub fn sample(spec: &DistributionSpec, n: usize, p: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidInput(format!(
            "need n >= 1 and p >= 1, got n={n}, p={p}"
        )));
    }
    spec.validate(p)?;
    let mut rng = rng_from_seed(seed);
    let mut x = draw_base(&spec.family, n, p, &mut rng);
    if let Some(shape) = &spec.shape {
        if !shape.is_identity() {
            x = &x * shape.sqrt();
        }
    }
    if let Some(mean) = &spec.mean {
        for mut r in x.row_iter_mut() {
            r += mean.transpose();
        }
    }
    let provenance = Provenance {
        family: spec.describe(),
        seed: Some(seed),
        shape: spec
            .shape
            .as_ref()
            .map(|s| format!("{0}x{0} matrix, trace {1}", s.p(), s.trace())),
        mean: spec
            .mean
            .as_ref()
            .map(|m| format!("vector of length {}, norm {}", m.len(), m.norm())),
    };
    Ok(Dataset::new(x)?.with_provenance(provenance))
}

/// Transform every row by the symmetric square root of `shape`.
pub fn apply_shape(data: &Dataset, shape: &ScatterMatrix) -> Result<Dataset> {
    if shape.p() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0} shape", data.p()),
            found: format!("{0}x{0}", shape.p()),
        });
    }
    shape.require_spd("shape")?;
    // rows are transposed samples: (R x)^T = x^T R for symmetric R
    let x = data.samples() * shape.sqrt();
    let mut provenance = data.provenance().cloned().unwrap_or_default();
    provenance.shape = Some(format!(
        "{0}x{0} matrix, trace {1}",
        shape.p(),
        shape.trace()
    ));
    Ok(Dataset::new(x)?.with_provenance(provenance))
}

/// Pair row `i` with row `i + n` and return `(x_i - x_{i+n}) / sqrt2`.
pub fn symmetrize(data: &Dataset) -> Result<Dataset> {
    let rows = data.n();
    if !rows.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "symmetrization needs an even number of rows, got {rows}"
        )));
    }
    let half = rows / 2;
    let x = data.samples();
    let out = DMatrix::from_fn(half, data.p(), |i, j| {
        (x[(i, j)] - x[(i + half, j)]) / std::f64::consts::SQRT_2
    });
    let mut provenance = data.provenance().cloned().unwrap_or_default();
    provenance.family = format!("symmetrized({})", provenance.family);
    provenance.mean = None;
    Ok(Dataset::new(out)?.with_provenance(provenance))
}
