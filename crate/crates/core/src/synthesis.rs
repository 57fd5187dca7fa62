//! Planted instances `Y = R ⊗ D + ε` and the noise models of the experiments.
//!
//! Every sampler takes an explicit RNG. Streams are ChaCha8 generators keyed
//! by a SplitMix64 hash of `(master_seed, grid_index, trial_index)`, so a
//! trial's draws do not depend on which thread runs it or in what order.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ShapeBuilder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CsdlError, Result};
use crate::tensor_ops::{multi_convolve, Dictionary, EncodingMatrix, Signal};

/// The RNG used for every stochastic component of the crate.
pub type CsdlRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a sequence of words into one seed.
pub fn derive_seed(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6A09_E667_F3BC_C909, |acc, w| splitmix64(acc ^ splitmix64(*w)))
}

/// Seed of trial `trial_index` at grid point `grid_index`.
pub fn trial_seed(master_seed: u64, grid_index: u64, trial_index: u64) -> u64 {
    derive_seed(&[master_seed, grid_index, trial_index])
}

pub fn rng_from_seed(seed: u64) -> CsdlRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Which family the noise comes from; also the CSV label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Iid,
    Correlated,
    GeneralizedPareto,
}

impl NoiseKind {
    pub fn label(self) -> &'static str {
        match self {
            NoiseKind::Iid => "iid",
            NoiseKind::Correlated => "correlated",
            NoiseKind::GeneralizedPareto => "generalized_pareto",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for NoiseKind {
    type Err = CsdlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" | "iid_gaussian" => Ok(NoiseKind::Iid),
            "correlated" | "correlated_gaussian" => Ok(NoiseKind::Correlated),
            "generalized_pareto" | "gp" => Ok(NoiseKind::GeneralizedPareto),
            other => Err(CsdlError::Parameter(format!("unknown noise kind '{other}'"))),
        }
    }
}

/// Distribution of the additive noise `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// Independent `N(0, σ²)` entries.
    IidGaussian { sigma: f64 },
    /// One `N(0, σ²)` draw added to every entry.
    CorrelatedGaussian { sigma: f64 },
    /// Independent draws from the symmetric generalized Pareto law with
    /// density `(1/2s)(1 + ξ(|x| - θ)/s)^{-1/ξ - 1}` on `|x| ≥ θ`.
    GeneralizedPareto { location: f64, scale: f64, shape: f64 },
}

impl NoiseModel {
    pub fn iid(sigma: f64) -> Self {
        NoiseModel::IidGaussian { sigma }
    }

    pub fn correlated(sigma: f64) -> Self {
        NoiseModel::CorrelatedGaussian { sigma }
    }

    /// Heavy-tailed defaults: location 2, scale 1, shape 1/2 (finite moments of order < 2 only).
    pub fn heavy_tailed() -> Self {
        NoiseModel::GeneralizedPareto {
            location: 2.0,
            scale: 1.0,
            shape: 0.5,
        }
    }

    pub fn gaussian(kind: NoiseKind, sigma: f64) -> Result<Self> {
        match kind {
            NoiseKind::Iid => Ok(Self::iid(sigma)),
            NoiseKind::Correlated => Ok(Self::correlated(sigma)),
            NoiseKind::GeneralizedPareto => Err(CsdlError::Parameter(
                "generalized Pareto noise is not Gaussian".into(),
            )),
        }
    }

    pub fn kind(&self) -> NoiseKind {
        match self {
            NoiseModel::IidGaussian { .. } => NoiseKind::Iid,
            NoiseModel::CorrelatedGaussian { .. } => NoiseKind::Correlated,
            NoiseModel::GeneralizedPareto { .. } => NoiseKind::GeneralizedPareto,
        }
    }

    /// Gaussian standard deviation, if the model is Gaussian.
    pub fn sigma(&self) -> Option<f64> {
        match *self {
            NoiseModel::IidGaussian { sigma } | NoiseModel::CorrelatedGaussian { sigma } => {
                Some(sigma)
            }
            NoiseModel::GeneralizedPareto { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::IidGaussian { sigma } | NoiseModel::CorrelatedGaussian { sigma } => {
                if !(sigma >= 0.0) || !sigma.is_finite() {
                    return Err(CsdlError::Parameter(format!("sigma must be >= 0, got {sigma}")));
                }
            }
            NoiseModel::GeneralizedPareto {
                location,
                scale,
                shape,
            } => {
                if !location.is_finite() || !(scale > 0.0) || !(shape > 0.0) {
                    return Err(CsdlError::Parameter(format!(
                        "generalized Pareto needs finite location, scale > 0, shape > 0; got ({location}, {scale}, {shape})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Magnitude of a generalized Pareto draw by inverting the CDF at `u ∈ [0, 1)`.
pub fn gp_magnitude(u: f64, location: f64, scale: f64, shape: f64) -> f64 {
    location + (scale / shape) * ((1.0 - u).powf(-shape) - 1.0)
}

/// `K` atoms drawn uniformly from the unit sphere in `R^n`.
pub fn sample_dictionary<R: Rng + ?Sized>(n: usize, atoms: usize, rng: &mut R) -> Result<Dictionary> {
    if n == 0 || atoms == 0 {
        return Err(CsdlError::Parameter(format!(
            "dictionary needs n >= 1 and K >= 1, got n = {n}, K = {atoms}"
        )));
    }
    let mut d = Array2::zeros((n, atoms).f());
    for mut col in d.columns_mut() {
        loop {
            col.iter_mut().for_each(|v: &mut f64| *v = rng.sample(StandardNormal));
            let norm = col.dot(&col).sqrt();
            if norm > 0.0 {
                col.mapv_inplace(|v| v / norm);
                break;
            }
        }
    }
    Ok(Dictionary::from_array_unchecked(d))
}

/// Starts from zero and adds 1 at `target_sparsity` uniformly random
/// coordinates (with replacement), so `‖R‖_{1,1}` equals the target exactly.
pub fn sample_encoding<R: Rng + ?Sized>(
    signal_length: usize,
    n: usize,
    atoms: usize,
    target_sparsity: u64,
    rng: &mut R,
) -> Result<EncodingMatrix> {
    if n == 0 || signal_length < n {
        return Err(CsdlError::Dimension(format!(
            "need 1 <= n <= N, got n = {n}, N = {signal_length}"
        )));
    }
    if atoms == 0 {
        return Err(CsdlError::Parameter("encoding needs K >= 1".into()));
    }
    let rows = signal_length - n + 1;
    let mut r = Array2::<f64>::zeros((rows, atoms).f());
    let cells = rows * atoms;
    let flat = r.as_slice_memory_order_mut().expect("fresh array");
    for _ in 0..target_sparsity {
        flat[rng.gen_range(0..cells)] += 1.0;
    }
    Ok(EncodingMatrix::from_array_unchecked(r))
}

/// Draws a noise vector of length `len`.
pub fn sample_noise<R: Rng + ?Sized>(len: usize, model: &NoiseModel, rng: &mut R) -> Result<Signal> {
    if len == 0 {
        return Err(CsdlError::Dimension("noise length must be >= 1".into()));
    }
    model.validate()?;
    let values: Array1<f64> = match *model {
        NoiseModel::IidGaussian { sigma } => {
            (0..len).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
        }
        NoiseModel::CorrelatedGaussian { sigma } => {
            let shared = sigma * rng.sample::<f64, _>(StandardNormal);
            Array1::from_elem(len, shared)
        }
        NoiseModel::GeneralizedPareto {
            location,
            scale,
            shape,
        } => (0..len)
            .map(|_| {
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let u: f64 = rng.gen();
                sign * gp_magnitude(u, location, scale, shape)
            })
            .collect(),
    };
    Ok(Signal::from_array_unchecked(values))
}

/// Parameters a planted instance was generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantParams {
    pub signal_length: usize,
    pub atom_length: usize,
    pub atoms: usize,
    pub target_sparsity: u64,
    pub noise: NoiseModel,
    pub seed: u64,
}

/// A draw from the generative model together with its ground truth.
#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub encoding: EncodingMatrix,
    pub dictionary: Dictionary,
    /// Clean signal `X = R ⊗ D`.
    pub clean: Signal,
    /// Observation `Y = X + ε`.
    pub observed: Signal,
    /// Realized noise `ε`.
    pub noise: Signal,
    pub params: PlantParams,
}

impl PlantedInstance {
    pub fn signal_length(&self) -> usize {
        self.params.signal_length
    }

    /// Realized `‖R‖_{1,1}`.
    pub fn sparsity(&self) -> f64 {
        self.encoding.l11_norm()
    }
}

/// Samples `D`, then `R`, then `ε` from one stream seeded by `seed`.
pub fn plant_instance(
    signal_length: usize,
    atom_length: usize,
    atoms: usize,
    target_sparsity: u64,
    noise: NoiseModel,
    seed: u64,
) -> Result<PlantedInstance> {
    if atom_length == 0 || signal_length < atom_length {
        return Err(CsdlError::Dimension(format!(
            "need 1 <= n <= N, got n = {atom_length}, N = {signal_length}"
        )));
    }
    noise.validate()?;
    let mut rng = rng_from_seed(seed);
    let dictionary = sample_dictionary(atom_length, atoms, &mut rng)?;
    let encoding = sample_encoding(signal_length, atom_length, atoms, target_sparsity, &mut rng)?;
    let clean = multi_convolve(encoding.view(), dictionary.view())?;
    let eps = sample_noise(signal_length, &noise, &mut rng)?;
    let observed = Signal::from_array_unchecked(clean.values() + eps.values());
    // Y - X is recomputed from the stored observation so that it equals ε bit for bit.
    let noise_signal = Signal::from_array_unchecked(observed.values() - clean.values());
    Ok(PlantedInstance {
        encoding,
        dictionary,
        clean,
        observed,
        noise: noise_signal,
        params: PlantParams {
            signal_length,
            atom_length,
            atoms,
            target_sparsity,
            noise,
            seed,
        },
    })
}
