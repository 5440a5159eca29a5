//! Tabular feature rows for the in-context regressor.

use super::{taxi, EnvState};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub features: Vec<f64>,
    pub label: Option<f64>,
    /// Discrete (state, action) the row was built from, if any.
    pub key: Option<(usize, usize)>,
}

impl FeatureRow {
    pub fn labeled(features: Vec<f64>, label: f64) -> Self {
        Self { features, label: Some(label), key: None }
    }

    pub fn query(features: Vec<f64>) -> Self {
        Self { features, label: None, key: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureSpec {
    pub include_timestep: bool,
    pub include_initial_tag: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self { include_timestep: true, include_initial_tag: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Decoder {
    Grid { ncol: usize },
    Taxi,
    Continuous,
    Index,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureEncoder {
    decoder: Decoder,
    spec: FeatureSpec,
    tag_len: usize,
}

impl FeatureEncoder {
    pub(crate) fn new(decoder: Decoder, spec: FeatureSpec, tag_len: usize) -> Self {
        Self { decoder, spec, tag_len }
    }

    pub fn spec(&self) -> FeatureSpec {
        self.spec
    }

    pub fn state_len(&self) -> usize {
        match self.decoder {
            Decoder::Grid { .. } => 2,
            Decoder::Taxi | Decoder::Continuous => 4,
            Decoder::Index => 1,
        }
    }

    /// Total feature length: state components, action, then the optional
    /// timestep and initial-state tag.
    pub fn len(&self) -> usize {
        self.state_len()
            + 1
            + usize::from(self.spec.include_timestep)
            + if self.spec.include_initial_tag { self.tag_len } else { 0 }
    }

    pub fn decode(&self, state: &EnvState) -> Vec<f64> {
        match (self.decoder, state.discrete_index, state.continuous) {
            (Decoder::Grid { ncol }, Some(i), _) => vec![(i / ncol) as f64, (i % ncol) as f64],
            (Decoder::Taxi, Some(i), _) => {
                let t = taxi::decode(i);
                vec![t.row as f64, t.col as f64, t.passenger as f64, t.destination as f64]
            }
            (Decoder::Index, Some(i), _) => vec![i as f64],
            (Decoder::Continuous, _, Some(p)) => p.to_vec(),
            _ => panic!("state payload does not match the encoder"),
        }
    }

    pub fn encode(&self, state: &EnvState, action: usize) -> FeatureRow {
        let mut features = self.decode(state);
        features.reserve(self.len() - features.len());
        features.push(action as f64);
        if self.spec.include_timestep {
            features.push(state.episode_step as f64);
        }
        if self.spec.include_initial_tag {
            features.extend(state.initial_tag.features());
        }
        FeatureRow { features, label: None, key: state.discrete_index.map(|s| (s, action)) }
    }
}

#[cfg(test)]
mod tests {
    use crate::env::{EnvId, EnvOptions, EnvState, Environment, FeatureSpec, InitialCondition};

    #[test]
    fn taxi_index_zero() {
        let env = Environment::new(EnvId::Taxi, EnvOptions::default(), 0).unwrap();
        let row = env.encoder(FeatureSpec::default()).encode(&EnvState::discrete(EnvId::Taxi, 0, 7, 0), 3);
        assert_eq!(row.features, vec![0.0, 0.0, 0.0, 0.0, 3.0, 7.0]);
        assert_eq!(row.key, Some((0, 3)));
    }

    #[test]
    fn cliff_start_decodes_to_row_col() {
        let env = Environment::new(EnvId::CliffWalking, EnvOptions::default(), 0).unwrap();
        let s = EnvState::discrete(EnvId::CliffWalking, 36, 0, 36);
        assert_eq!(env.decode(&s), vec![3.0, 0.0]);
    }

    #[test]
    fn cartpole_passthrough_and_tag() {
        let mut env = Environment::new(EnvId::CartPole, EnvOptions::default(), 0).unwrap();
        let s = env.reset(Some(InitialCondition::Continuous([0.0; 4]))).unwrap();
        let plain = env.encoder(FeatureSpec::default());
        assert_eq!(plain.encode(&s, 1).features, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let tagged = env.encoder(FeatureSpec { include_timestep: true, include_initial_tag: true });
        assert_eq!(tagged.len(), 10);
        assert_eq!(tagged.encode(&s, 0).features.len(), 10);
    }
}
