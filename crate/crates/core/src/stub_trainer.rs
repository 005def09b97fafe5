//! Deterministic stand-in for a training run.
//!
//! The "model" is a small weight vector drawn from a ChaCha20 stream seeded
//! with a SHA-256 fingerprint of every training input, so identical inputs
//! always yield byte-identical model blobs and any input change yields a
//! different one. Used by fixtures and the reproducibility audit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::model::canonical::{to_canonical_bytes, value_to_canonical_bytes};
use crate::model::{Algorithm, Environment, Parameter, Split};

const N_WEIGHTS: usize = 16;

/// Everything a training run consumes.
#[derive(Debug, Clone, Copy)]
pub struct TrainingInputs<'a> {
    pub datasets: &'a [(Vec<u8>, Split)],
    pub code: &'a [u8],
    pub environment: &'a Environment,
    pub algorithm: &'a Algorithm,
    pub parameters: &'a [Parameter],
}

pub fn fingerprint(inputs: &TrainingInputs<'_>) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"mlk-stub-trainer/1\n");
    for (payload, split) in inputs.datasets {
        h.update(Sha256::digest(payload));
        h.update(split.as_str().as_bytes());
    }
    h.update(Sha256::digest(inputs.code));
    let mut params: Vec<&Parameter> = inputs.parameters.iter().collect();
    params.sort_by(|a, b| a.name.cmp(&b.name));
    for part in [
        to_canonical_bytes(inputs.environment),
        to_canonical_bytes(inputs.algorithm),
        to_canonical_bytes(&params),
    ] {
        h.update(part.expect("training inputs have no floats"));
        h.update(b"\n");
    }
    h.finalize().into()
}

/// Model bytes for the given inputs.
pub fn train(inputs: &TrainingInputs<'_>) -> Vec<u8> {
    let seed = fingerprint(inputs);
    let mut rng = ChaCha20Rng::from_seed(seed);
    // Integers keep the output free of float formatting questions.
    let weights: Vec<i64> = (0..N_WEIGHTS)
        .map(|_| rng.random_range(-1_000_000..=1_000_000))
        .collect();
    value_to_canonical_bytes(&json!({
        "algorithm": inputs.algorithm.name,
        "fingerprint": hex::encode(seed),
        "weights": weights,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParameterType;
    use std::collections::BTreeMap;

    fn env() -> Environment {
        Environment {
            env_id: "py311".into(),
            name: "python".into(),
            runtime_descriptors: BTreeMap::from([("python".into(), "3.11".into())]),
            hardware: "cpu".into(),
        }
    }

    fn param(name: &str, value: &str) -> Parameter {
        Parameter {
            name: name.into(),
            value: value.into(),
            value_type: ParameterType::Int,
        }
    }

    #[test]
    fn same_inputs_same_bytes_and_sensitive_to_change() {
        let data = vec![(b"a,b\n1,2\n".to_vec(), Split::Train)];
        let algo = Algorithm {
            name: "random_forest".into(),
            family: "ensemble".into(),
        };
        let env = env();
        let p1 = [param("depth", "3"), param("trees", "100")];
        let p1_reordered = [param("trees", "100"), param("depth", "3")];
        let p2 = [param("depth", "4"), param("trees", "100")];
        let run = |params: &[Parameter]| {
            train(&TrainingInputs {
                datasets: &data,
                code: b"fit()",
                environment: &env,
                algorithm: &algo,
                parameters: params,
            })
        };
        assert_eq!(run(&p1), run(&p1));
        assert_eq!(run(&p1), run(&p1_reordered));
        assert_ne!(run(&p1), run(&p2));
    }
}
