//! Versioned text model format.
//!
//! ```text
//! uroevent-mlp
//! format_version 1
//! stage stage1
//! layer_dims 55 128 200 2
//! seed 7
//! config learning_rate=... epochs=50 batch_size=128 beta1=... beta2=... epsilon=... rng=chacha8
//! features 55 0 1 2 ... 54
//! scaler 55
//! <mean> <std>                      (one line per input)
//! layer 0 55 128
//! w <n_in values>                   (one line per output neuron)
//! b <n_out values>
//! ...
//! checksum sha256 <hex of every preceding byte>
//! ```
//!
//! Reals are written with 17 significant digits, so a reload reproduces
//! every parameter bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::mlp::{Layer, MlpModel, StageTag, TrainConfig, RNG_NAME};
use crate::nn::Scaler;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "uroevent-mlp";

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| real(*v)).collect::<Vec<_>>().join(" ")
}

pub fn checksum(body: &str) -> String {
    hex::encode(Sha256::digest(body.as_bytes()))
}

pub fn to_text(model: &MlpModel) -> String {
    let mut s = String::new();
    let c = &model.config;
    let dims: Vec<String> = model.dims().iter().map(usize::to_string).collect();
    let idx: Vec<String> = model.feature_index.iter().map(usize::to_string).collect();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "format_version {FORMAT_VERSION}");
    let _ = writeln!(s, "stage {}", model.stage);
    let _ = writeln!(s, "layer_dims {}", dims.join(" "));
    let _ = writeln!(s, "seed {}", model.seed);
    let _ = writeln!(
        s,
        "config learning_rate={} epochs={} batch_size={} beta1={} beta2={} epsilon={} train_seed={} rng={RNG_NAME}",
        real(c.learning_rate),
        c.epochs,
        c.batch_size,
        real(c.beta1),
        real(c.beta2),
        real(c.epsilon),
        c.seed
    );
    let _ = writeln!(s, "features {} {}", model.source_dim, idx.join(" "));
    let _ = writeln!(s, "scaler {}", model.scaler.dim());
    for (m, sd) in model.scaler.mean.iter().zip(&model.scaler.std) {
        let _ = writeln!(s, "{} {}", real(*m), real(*sd));
    }
    for (k, layer) in model.layers.iter().enumerate() {
        let _ = writeln!(s, "layer {k} {} {}", layer.n_in, layer.n_out);
        for row in layer.weights.chunks(layer.n_in) {
            let _ = writeln!(s, "w {}", join(row));
        }
        let _ = writeln!(s, "b {}", join(&layer.bias));
    }
    let sum = checksum(&s);
    let _ = writeln!(s, "checksum sha256 {sum}");
    s
}

pub fn save_model(model: &MlpModel, path: &Path) -> Result<()> {
    crate::table::write_file(path, &to_text(model))
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text)
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptFile(msg.into())
}

struct Lines<'a> {
    inner: std::str::Lines<'a>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<&'a str> {
        self.inner.next().ok_or_else(|| corrupt("unexpected end of file"))
    }

    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let line = self.next_line()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(corrupt(format!("expected {key:?} line, found {line:?}")));
        }
        Ok(parts.collect())
    }
}

fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| corrupt(format!("bad number {s:?}")))
}

fn nums<T: std::str::FromStr>(parts: &[&str]) -> Result<Vec<T>> {
    parts.iter().map(|p| num(p)).collect()
}

pub fn from_text(text: &str) -> Result<MlpModel> {
    let mut lines = Lines { inner: text.lines() };
    if lines.next_line()? != MAGIC {
        return Err(corrupt("not a model file"));
    }
    let version = lines.keyed("format_version")?;
    let version: u32 = num(version.first().ok_or_else(|| corrupt("missing version"))?)?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            supported: FORMAT_VERSION,
        });
    }

    // integrity before interpretation
    let body_end = text
        .rfind("checksum sha256 ")
        .ok_or_else(|| corrupt("missing checksum (truncated file?)"))?;
    let stated = text[body_end..]
        .trim_end()
        .strip_prefix("checksum sha256 ")
        .unwrap_or_default();
    if stated != checksum(&text[..body_end]) {
        return Err(corrupt("checksum mismatch"));
    }

    let stage: StageTag = lines
        .keyed("stage")?
        .first()
        .ok_or_else(|| corrupt("missing stage"))?
        .parse()
        .map_err(corrupt)?;
    let dims: Vec<usize> = nums(&lines.keyed("layer_dims")?)?;
    if dims.len() < 2 || dims.contains(&0) {
        return Err(corrupt("bad layer dims"));
    }
    let seed: u64 = num(lines.keyed("seed")?.first().ok_or_else(|| corrupt("missing seed"))?)?;
    let mut config = TrainConfig::default();
    for kv in lines.keyed("config")? {
        let (k, v) = kv.split_once('=').ok_or_else(|| corrupt(format!("bad config entry {kv:?}")))?;
        match k {
            "learning_rate" => config.learning_rate = num(v)?,
            "epochs" => config.epochs = num(v)?,
            "batch_size" => config.batch_size = num(v)?,
            "beta1" => config.beta1 = num(v)?,
            "beta2" => config.beta2 = num(v)?,
            "epsilon" => config.epsilon = num(v)?,
            "train_seed" => config.seed = num(v)?,
            "rng" if v == RNG_NAME => {}
            _ => return Err(corrupt(format!("unknown config entry {kv:?}"))),
        }
    }
    let feats: Vec<usize> = nums(&lines.keyed("features")?)?;
    let (source_dim, feature_index) = feats.split_first().ok_or_else(|| corrupt("missing features"))?;
    if feature_index.len() != dims[0] || feature_index.iter().any(|j| j >= source_dim) {
        return Err(corrupt("feature index does not match the input layer"));
    }
    let n_scaler: usize = num(lines.keyed("scaler")?.first().ok_or_else(|| corrupt("missing scaler"))?)?;
    if n_scaler != dims[0] {
        return Err(corrupt("scaler width does not match the input layer"));
    }
    let mut scaler = Scaler::identity(n_scaler);
    for i in 0..n_scaler {
        let pair: Vec<f64> = nums(&lines.next_line()?.split_whitespace().collect::<Vec<_>>())?;
        if pair.len() != 2 || pair[1] <= 0.0 {
            return Err(corrupt("bad scaler row"));
        }
        scaler.mean[i] = pair[0];
        scaler.std[i] = pair[1];
    }
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for k in 0..dims.len() - 1 {
        let head: Vec<usize> = nums(&lines.keyed("layer")?)?;
        let (n_in, n_out) = (dims[k], dims[k + 1]);
        if head != [k, n_in, n_out] {
            return Err(corrupt(format!("bad header for layer {k}")));
        }
        let mut weights = Vec::with_capacity(n_in * n_out);
        for _ in 0..n_out {
            let row: Vec<f64> = nums(&lines.keyed("w")?)?;
            if row.len() != n_in {
                return Err(corrupt("weight row has the wrong width"));
            }
            weights.extend(row);
        }
        let bias: Vec<f64> = nums(&lines.keyed("b")?)?;
        if bias.len() != n_out {
            return Err(corrupt("bias has the wrong width"));
        }
        layers.push(Layer {
            n_in,
            n_out,
            weights,
            bias,
        });
    }
    Ok(MlpModel {
        layers,
        scaler,
        source_dim: *source_dim,
        feature_index: feature_index.to_vec(),
        stage,
        seed,
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trained_like() -> MlpModel {
        let mut m = MlpModel::standard(55, 2, StageTag::Stage1, 77);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (mu, sd) in m.scaler.mean.iter_mut().zip(m.scaler.std.iter_mut()) {
            *mu = rng.random_range(-10.0..10.0);
            *sd = rng.random_range(0.1..5.0);
        }
        for l in &mut m.layers {
            for b in &mut l.bias {
                *b = rng.random_range(-0.1..0.1);
            }
        }
        m.config.seed = 77;
        m
    }

    #[test]
    fn round_trip_predictions_identical() {
        let m = trained_like();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.model");
        save_model(&m, &p).unwrap();
        let back = load_model(&p).unwrap();
        assert_eq!(back, m);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..100).map(|_| (0..55).map(|_| rng.random_range(-20.0..20.0)).collect()).collect();
        let x = Matrix::from_rows(&rows, 55).unwrap();
        assert_eq!(m.predict_proba(&x).unwrap(), back.predict_proba(&x).unwrap());
    }

    #[test]
    fn truncated_is_corrupt() {
        let text = to_text(&trained_like());
        let cut = &text[..text.len() / 2];
        assert!(matches!(from_text(cut), Err(Error::CorruptFile(_))));
        let tampered = text.replacen("w ", "w 1", 1);
        assert!(matches!(from_text(&tampered), Err(Error::CorruptFile(_))));
    }

    #[test]
    fn future_version_is_rejected() {
        let text = to_text(&trained_like()).replacen("format_version 1", "format_version 2", 1);
        assert!(matches!(
            from_text(&text),
            Err(Error::VersionMismatch { found: 2, supported: 1 })
        ));
    }

    #[test]
    fn reals_use_seventeen_digits() {
        assert_eq!(real(0.1), "1.0000000000000001e-1");
        assert_eq!(real(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
