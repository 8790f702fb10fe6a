//! JSON checkpoints of trained networks.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{LstmHyperParams, LstmModel, NetworkConfig, Normalization, Topology};
use crate::error::{ForecastError, Result};

pub const CHECKPOINT_FORMAT: &str = "airq-lstm";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Tensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: NetworkConfig,
    hyper: LstmHyperParams,
    normalization: Normalization,
    trained_epochs: usize,
    // JSON has no infinity; an untrained model stores null
    best_val_loss: Option<f64>,
    tensors: Vec<Tensor>,
}

pub fn save_checkpoint<W: Write>(model: &LstmModel, out: W) -> Result<()> {
    let tensors = model
        .topology
        .tensors()
        .into_iter()
        .map(|(name, shape, range)| Tensor {
            name,
            shape,
            data: model.params[range].to_vec(),
        })
        .collect();
    let ck = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        config: model.config,
        hyper: model.hyper.clone(),
        normalization: model.normalization,
        trained_epochs: model.trained_epochs,
        best_val_loss: model
            .best_val_loss
            .is_finite()
            .then_some(model.best_val_loss),
        tensors,
    };
    serde_json::to_writer(out, &ck).map_err(|e| ForecastError::Io(e.to_string()))
}

pub fn load_checkpoint<R: Read>(input: R) -> Result<LstmModel> {
    let ck: Checkpoint =
        serde_json::from_reader(input).map_err(|e| ForecastError::Parse(e.to_string()))?;
    if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
        return Err(ForecastError::Parse(format!(
            "unsupported checkpoint {} v{}",
            ck.format, ck.version
        )));
    }
    ck.hyper.validate()?;
    let topology = Topology::new(ck.config.kind, ck.hyper.hidden_units());
    let expected = topology.tensors();
    if expected.len() != ck.tensors.len() {
        return Err(ForecastError::Shape(format!(
            "expected {} tensors, found {}",
            expected.len(),
            ck.tensors.len()
        )));
    }
    let mut params = vec![0.0; topology.param_count];
    for ((name, shape, range), t) in expected.into_iter().zip(&ck.tensors) {
        if t.name != name || t.shape != shape || t.data.len() != range.len() {
            return Err(ForecastError::Shape(format!(
                "tensor {} {:?} does not fit {name} {shape:?}",
                t.name, t.shape
            )));
        }
        params[range].copy_from_slice(&t.data);
    }
    Ok(LstmModel {
        config: ck.config,
        topology,
        params,
        normalization: ck.normalization,
        hyper: ck.hyper,
        trained_epochs: ck.trained_epochs,
        best_val_loss: ck.best_val_loss.unwrap_or(f64::INFINITY),
    })
}

#[cfg(test)]
mod tests {
    use super::super::NetworkKind;
    use super::*;

    fn model(kind: NetworkKind) -> LstmModel {
        let hyper = LstmHyperParams {
            window_len: 3,
            units_coefficient: 1,
            seed: 11,
            ..Default::default()
        };
        let mut m = LstmModel::initialized(
            NetworkConfig::new(kind),
            hyper,
            Normalization {
                min: 1.5,
                max: 97.25,
            },
        )
        .unwrap();
        m.params
            .iter_mut()
            .enumerate()
            .for_each(|(i, p)| *p += 1e-17 * i as f64 + 0.1 / 3.0);
        m.trained_epochs = 17;
        m.best_val_loss = 0.012345678901234567;
        m
    }

    #[test]
    fn round_trip_is_exact() {
        for kind in NetworkKind::ALL {
            let m = model(kind);
            let mut buf = Vec::new();
            save_checkpoint(&m, &mut buf).unwrap();
            let back = load_checkpoint(buf.as_slice()).unwrap();
            assert_eq!(back, m);
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&back.params), bits(&m.params));
        }
    }

    #[test]
    fn untrained_loss_survives() {
        let mut m = model(NetworkKind::Simple);
        m.best_val_loss = f64::INFINITY;
        let mut buf = Vec::new();
        save_checkpoint(&m, &mut buf).unwrap();
        assert_eq!(
            load_checkpoint(buf.as_slice()).unwrap().best_val_loss,
            f64::INFINITY
        );
    }

    #[test]
    fn rejects_mismatched_shapes_and_formats() {
        let m = model(NetworkKind::Stacked);
        let mut buf = Vec::new();
        save_checkpoint(&m, &mut buf).unwrap();
        let mut json: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        json["hyper"]["units_coefficient"] = 2.into();
        let err = load_checkpoint(json.to_string().as_bytes()).unwrap_err();
        assert!(matches!(err, ForecastError::Shape(_)));

        let mut json: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        json["format"] = "other".into();
        assert!(matches!(
            load_checkpoint(json.to_string().as_bytes()),
            Err(ForecastError::Parse(_))
        ));
        assert!(matches!(
            load_checkpoint(&b"{"[..]),
            Err(ForecastError::Parse(_))
        ));
    }
}
