//! Versioned binary serialization for trained listener models.
//!
//! Layout: magic `RFEV`, format version (u32 LE), header length (u32 LE),
//! canonical JSON header (kind, feature mode, dims, vocabulary), weight
//! count (u64 LE), then the flattened weights as f64 LE. Weights round-trip
//! bit-identically; any structural damage surfaces as a parse error rather
//! than a silently wrong model.

use std::path::Path;

use super::literal::LiteralListenerModel;
use super::nn::{FlatParams, Vocab};
use super::pragmatic::PragmaticSpeakerLM;
use crate::colorspace::FeatureMode;
use crate::jsonfmt::Json;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"RFEV";
const VERSION: u32 = 1;

/// A trained model of either listener family, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Literal(LiteralListenerModel),
    Pragmatic(PragmaticSpeakerLM),
}

impl SavedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::Literal(_) => "literal",
            SavedModel::Pragmatic(_) => "pragmatic",
        }
    }

    fn header(&self) -> Json {
        let (mode, d_e, d_h, vocab) = match self {
            SavedModel::Literal(m) => (
                m.feature_mode(),
                m.embedding_dim(),
                m.hidden_dim(),
                m.vocab_tokens(),
            ),
            SavedModel::Pragmatic(m) => (
                m.feature_mode(),
                m.embedding_dim(),
                m.hidden_dim(),
                m.vocab_tokens(),
            ),
        };
        Json::obj([
            ("kind", Json::s(self.kind())),
            ("feature_mode", Json::s(mode.as_str())),
            ("embedding_dim", Json::i(d_e as i64)),
            ("hidden_dim", Json::i(d_h as i64)),
            ("vocab", Json::arr(vocab.iter().map(Json::s))),
        ])
    }

    fn weights(&self) -> Vec<f64> {
        match self {
            SavedModel::Literal(m) => m.to_flat(),
            SavedModel::Pragmatic(m) => m.to_flat(),
        }
    }
}

pub fn save_model(model: &SavedModel, path: &Path) -> Result<()> {
    let header = model.header().to_compact().into_bytes();
    let weights = model.weights();
    let mut bytes =
        Vec::with_capacity(4 + 4 + 4 + header.len() + 8 + 8 * weights.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header);
    bytes.extend_from_slice(&(weights.len() as u64).to_le_bytes());
    for w in &weights {
        bytes.extend_from_slice(&w.to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Cursor over the raw file that turns every premature end into a parse error.
struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(Error::parse(self.path, 0, "truncated model file"));
        }
        let slice = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn header_str<'a>(path: &Path, header: &'a serde_json::Value, key: &str) -> Result<&'a str> {
    header
        .get(key)
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::parse(path, 0, format!("model header missing string {key:?}")))
}

fn header_dim(path: &Path, header: &serde_json::Value, key: &str) -> Result<usize> {
    header
        .get(key)
        .and_then(|v| v.as_u64())
        .filter(|&v| v > 0)
        .map(|v| v as usize)
        .ok_or_else(|| Error::parse(path, 0, format!("model header missing dimension {key:?}")))
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { bytes: &bytes, at: 0, path };

    if r.take(4)? != MAGIC {
        return Err(Error::parse(path, 0, "not a model file (bad magic bytes)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::parse(
            path,
            0,
            format!("unsupported model format version {version} (expected {VERSION})"),
        ));
    }

    let header_len = r.u32()? as usize;
    let header: serde_json::Value = serde_json::from_slice(r.take(header_len)?)
        .map_err(|e| Error::parse(path, 0, format!("bad model header: {e}")))?;
    let kind = header_str(path, &header, "kind")?.to_string();
    let mode = FeatureMode::parse(header_str(path, &header, "feature_mode")?)
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    let d_e = header_dim(path, &header, "embedding_dim")?;
    let d_h = header_dim(path, &header, "hidden_dim")?;
    let tokens: Vec<String> = header
        .get("vocab")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::parse(path, 0, "model header missing vocab array"))?
        .iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| Error::parse(path, 0, "vocab entry is not a string"))
        })
        .collect::<Result<_>>()?;
    if tokens.len() < 3 {
        return Err(Error::parse(path, 0, "model vocabulary is too small"));
    }
    let vocab = Vocab::from_tokens(tokens);

    let count = r.u64()? as usize;
    let mut weights = Vec::with_capacity(count);
    for _ in 0..count {
        weights.push(f64::from_le_bytes(r.take(8)?.try_into().unwrap()));
    }

    let mut model = match kind.as_str() {
        "literal" => SavedModel::Literal(LiteralListenerModel::zeros(vocab, d_e, d_h, mode)),
        "pragmatic" => SavedModel::Pragmatic(PragmaticSpeakerLM::zeros(vocab, d_e, d_h, mode)),
        other => {
            return Err(Error::parse(path, 0, format!("unknown model kind {other:?}")));
        }
    };
    let expected = match &model {
        SavedModel::Literal(m) => m.flat_len(),
        SavedModel::Pragmatic(m) => m.flat_len(),
    };
    if count != expected {
        return Err(Error::parse(
            path,
            0,
            format!("model has {count} weights, header shapes imply {expected}"),
        ));
    }
    match &mut model {
        SavedModel::Literal(m) => m.set_flat(&weights),
        SavedModel::Pragmatic(m) => m.set_flat(&weights),
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, Color, ColorContext, ColorLexicon, GenerateConfig};
    use crate::listeners::{
        literal_distribution, pragmatic_distribution, train_literal, train_pragmatic, TrainConfig,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trained_pair() -> (LiteralListenerModel, PragmaticSpeakerLM) {
        let corpus = generate_synthetic(&GenerateConfig {
            n_pairs: 6,
            refs_per_context: 2,
            seed: 5,
            lexicon: ColorLexicon::builtin(),
        })
        .unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            embedding_dim: 6,
            hidden_dim: 6,
            seed: 11,
            ..TrainConfig::default()
        };
        let (lit, _) = train_literal(&corpus, &cfg).unwrap();
        let (prag, _) = train_pragmatic(&corpus, &cfg, None).unwrap();
        (lit, prag)
    }

    fn random_ctx(rng: &mut ChaCha8Rng) -> ColorContext {
        let mut color = || {
            Color::new(
                rng.random::<f64>() * 360.0,
                rng.random::<f64>(),
                rng.random::<f64>(),
            )
            .unwrap()
        };
        ColorContext {
            context_id: "t".into(),
            pair_id: None,
            colors: [color(), color(), color()],
            target_index: 0,
        }
    }

    #[test]
    fn round_trip_is_bit_identical_and_behavior_preserving() {
        let (lit, prag) = trained_pair();
        let dir = tempfile::tempdir().unwrap();
        let utterances = ["dark blue", "the bright red one", "greenish", ""];

        let path = dir.path().join("literal.bin");
        save_model(&SavedModel::Literal(lit.clone()), &path).unwrap();
        let loaded = match load_model(&path).unwrap() {
            SavedModel::Literal(m) => m,
            other => panic!("wrong kind: {other:?}"),
        };
        assert_eq!(lit.to_flat(), loaded.to_flat());

        let path = dir.path().join("pragmatic.bin");
        save_model(&SavedModel::Pragmatic(prag.clone()), &path).unwrap();
        let loaded_prag = match load_model(&path).unwrap() {
            SavedModel::Pragmatic(m) => m,
            other => panic!("wrong kind: {other:?}"),
        };
        assert_eq!(prag.to_flat(), loaded_prag.to_flat());

        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let ctx = random_ctx(&mut rng);
            let u = utterances[rng.random_range(0..utterances.len())];
            assert_eq!(
                literal_distribution(&lit, u, &ctx).probs(),
                literal_distribution(&loaded, u, &ctx).probs()
            );
            assert_eq!(
                pragmatic_distribution(&prag, u, &ctx).probs(),
                pragmatic_distribution(&loaded_prag, u, &ctx).probs()
            );
        }
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let (lit, _) = trained_pair();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&SavedModel::Literal(lit), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        for cut in [3, 7, 10, bytes.len() / 2, bytes.len() - 1] {
            std::fs::write(&path, &bytes[..cut]).unwrap();
            assert!(
                matches!(load_model(&path), Err(Error::Parse { .. })),
                "cut at {cut} was not rejected"
            );
        }
    }

    #[test]
    fn wrong_magic_and_version_are_rejected() {
        let (lit, _) = trained_pair();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&SavedModel::Literal(lit), &path).unwrap();
        let good = std::fs::read(&path).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        match load_model(&path) {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("magic")),
            other => panic!("expected parse error, got {other:?}"),
        }

        let mut bad = good;
        bad[4] = 99;
        std::fs::write(&path, &bad).unwrap();
        match load_model(&path) {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("version")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn weight_count_must_match_header_shapes() {
        let (lit, _) = trained_pair();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&SavedModel::Literal(lit), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // Drop the final weight and patch the count field accordingly.
        let header_len =
            u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let count_at = 12 + header_len;
        let count = u64::from_le_bytes(bytes[count_at..count_at + 8].try_into().unwrap());
        bytes[count_at..count_at + 8].copy_from_slice(&(count - 1).to_le_bytes());
        bytes.truncate(bytes.len() - 8);
        std::fs::write(&path, &bytes).unwrap();
        match load_model(&path) {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("weights")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_model(Path::new("/nonexistent/model.bin"));
        assert!(matches!(err, Err(Error::Io { .. })));
    }
}
