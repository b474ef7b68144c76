//! Declarative architecture specs (TOML) and network construction.
//!
//! A spec names the feature geometry (retained bins, context radius,
//! channels) and the hidden-layer stack; the output layer is always a
//! dense linear map back to the per-frame feature width, and every hidden
//! layer is followed by a ReLU.

use super::{Layer, Network, NnError};
use crate::tt::ModeFactorization;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Input handling: dense nets consume all retained bins, TT nets drop the
/// DC bin from inputs/targets and pass it through unchanged at synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    Dense,
    Tt,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchSpec {
    pub mode: NetKind,
    /// Retained LPS bins per frame (the full scale uses 257).
    pub bins: usize,
    /// Context radius M; each row stacks 2M+1 frames per channel.
    pub context: usize,
    pub channels: usize,
    pub hidden: Vec<HiddenSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HiddenSpec {
    pub kind: NetKind,
    /// Dense width; ignored for TT layers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_modes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_modes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranks: Option<Vec<usize>>,
}

impl ArchSpec {
    pub fn from_toml(text: &str) -> Result<Self, NnError> {
        toml::from_str(text).map_err(|e| NnError::BadArch(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    /// Width of one feature frame as seen by the network.
    pub fn frame_width(&self) -> usize {
        match self.mode {
            NetKind::Dense => self.bins,
            NetKind::Tt => self.bins - 1,
        }
    }

    /// Full input row width: frame_width * (2M+1) * B.
    pub fn input_dim(&self) -> usize {
        self.frame_width() * (2 * self.context + 1) * self.channels
    }

    /// Cap every interior TT bond at `rank` (used by CLI overrides).
    pub fn set_uniform_tt_rank(&mut self, rank: usize) {
        for h in &mut self.hidden {
            if h.kind == NetKind::Tt {
                if let Some(modes) = &h.input_modes {
                    let order = modes.len();
                    let mut ranks = vec![rank; order + 1];
                    ranks[0] = 1;
                    ranks[order] = 1;
                    h.ranks = Some(ranks);
                }
            }
        }
    }
}

/// Build the network a spec describes. Per-layer seeds are drawn from a
/// ChaCha stream over `seed`, so the same spec and seed always produce the
/// same initialization.
pub fn build_network(spec: &ArchSpec, seed: u64) -> Result<Network, NnError> {
    if spec.bins < 2 || spec.channels == 0 {
        return Err(NnError::BadArch(format!(
            "bins {} and channels {} must be >= 2 and >= 1",
            spec.bins, spec.channels
        )));
    }
    if spec.hidden.is_empty() {
        return Err(NnError::BadArch("at least one hidden layer".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(2 * spec.hidden.len() + 1);
    let mut width = spec.input_dim();
    for (i, h) in spec.hidden.iter().enumerate() {
        let layer_seed: u64 = rng.random();
        match h.kind {
            NetKind::Dense => {
                let units = h.units.ok_or_else(|| {
                    NnError::BadArch(format!("hidden layer {i}: dense layer needs `units`"))
                })?;
                layers.push(Layer::dense_random(width, units, layer_seed));
                width = units;
            }
            NetKind::Tt => {
                let (im, om) = match (&h.input_modes, &h.output_modes) {
                    (Some(im), Some(om)) => (im.clone(), om.clone()),
                    _ => {
                        return Err(NnError::BadArch(format!(
                            "hidden layer {i}: tt layer needs `input_modes` and `output_modes`"
                        )))
                    }
                };
                let ranks = h.ranks.clone().ok_or_else(|| {
                    NnError::BadArch(format!("hidden layer {i}: tt layer needs `ranks`"))
                })?;
                let fact = ModeFactorization::new(im, om, ranks)?;
                if fact.input_dim() != width {
                    return Err(NnError::BadArch(format!(
                        "hidden layer {i}: input modes multiply to {}, expected {width}",
                        fact.input_dim()
                    )));
                }
                width = fact.output_dim();
                layers.push(Layer::tt_random(&fact, layer_seed));
            }
        }
        layers.push(Layer::relu());
    }
    // Linear output back to the per-frame feature width.
    let out_seed: u64 = rng.random();
    layers.push(Layer::dense_random(width, spec.frame_width(), out_seed));
    Network::new(layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DENSE_TOML: &str = r#"
mode = "dense"
bins = 64
context = 2
channels = 1

[[hidden]]
kind = "dense"
units = 32

[[hidden]]
kind = "dense"
units = 32
"#;

    const TT_TOML: &str = r#"
mode = "tt"
bins = 64
context = 2
channels = 1

[[hidden]]
kind = "tt"
input_modes = [5, 63]
output_modes = [8, 8]
ranks = [1, 3, 1]
"#;

    #[test]
    fn dense_spec_builds_expected_geometry() {
        let spec = ArchSpec::from_toml(DENSE_TOML).unwrap();
        assert_eq!(spec.input_dim(), 64 * 5);
        let net = build_network(&spec, 1).unwrap();
        assert_eq!(net.input_dim(), 320);
        assert_eq!(net.output_dim(), 64);
        // 2 hidden + 2 relu + output
        assert_eq!(net.layers().len(), 5);
    }

    #[test]
    fn tt_spec_drops_dc_bin() {
        let spec = ArchSpec::from_toml(TT_TOML).unwrap();
        assert_eq!(spec.frame_width(), 63);
        assert_eq!(spec.input_dim(), 63 * 5);
        let net = build_network(&spec, 1).unwrap();
        assert_eq!(net.input_dim(), 315);
        assert_eq!(net.output_dim(), 63);
    }

    #[test]
    fn same_seed_same_network() {
        let spec = ArchSpec::from_toml(TT_TOML).unwrap();
        let a = build_network(&spec, 9).unwrap();
        let b = build_network(&spec, 9).unwrap();
        assert_eq!(a, b);
        let c = build_network(&spec, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn mode_product_mismatch_is_rejected() {
        let mut spec = ArchSpec::from_toml(TT_TOML).unwrap();
        spec.hidden[0].input_modes = Some(vec![4, 63]);
        assert!(matches!(
            build_network(&spec, 0),
            Err(NnError::BadArch(_))
        ));
    }

    #[test]
    fn uniform_rank_override() {
        let mut spec = ArchSpec::from_toml(TT_TOML).unwrap();
        spec.set_uniform_tt_rank(5);
        assert_eq!(spec.hidden[0].ranks.as_deref(), Some(&[1, 5, 1][..]));
    }

    #[test]
    fn round_trips_through_toml() {
        let spec = ArchSpec::from_toml(TT_TOML).unwrap();
        let again = ArchSpec::from_toml(&spec.to_toml()).unwrap();
        assert_eq!(again.input_dim(), spec.input_dim());
        assert_eq!(again.hidden.len(), spec.hidden.len());
    }
}
