//! Binary checkpoints for layers (`SHWL`), readouts (`SHRC`) and MLPs
//! (`SHML`), each with a JSON sidecar describing the header.
//!
//! All three share one little-endian container: 4-byte magic, `u32`
//! version, `u64` shape fields, then `f64` arrays in a fixed order. See
//! `docs/formats.md`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use softhebb_core::layer::{BiasMode, WtaLayer};
use softhebb_core::math::ActivationKind;
use softhebb_core::readout::{LinearClassifier, Mlp2};

use crate::error::{Error, Result};

pub const VERSION: u32 = 1;
pub const LAYER_MAGIC: &[u8; 4] = b"SHWL";
pub const READOUT_MAGIC: &[u8; 4] = b"SHRC";
pub const MLP_MAGIC: &[u8; 4] = b"SHML";

/// Human-readable copy of a checkpoint header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub magic: String,
    pub version: u32,
    pub shape: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation: Option<ActivationKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias_mode: Option<BiasMode>,
    pub checksum: String,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

struct Writer(Vec<u8>);

impl Writer {
    fn new(magic: &[u8; 4]) -> Self {
        let mut v = magic.to_vec();
        v.extend_from_slice(&VERSION.to_le_bytes());
        Writer(v)
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn open(bytes: &'a [u8], magic: &[u8; 4], path: &'a Path) -> Result<Self> {
        let mut r = Reader { bytes, at: 0, path };
        let found = r.take(4)?;
        if found != magic {
            return Err(Error::BadMagic {
                path: path.into(),
                expected: u32::from_be_bytes(*magic),
                found: u32::from_be_bytes([found[0], found[1], found[2], found[3]]),
            });
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::format(path, format!("unsupported version {version}")));
        }
        Ok(r)
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at + n;
        let s = self.bytes.get(self.at..end).ok_or_else(|| Error::TruncatedFile {
            path: self.path.into(),
            needed: end,
            found: self.bytes.len(),
        })?;
        self.at = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::format(self.path, "shape overflow"))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
    fn finish(self) -> Result<()> {
        if self.at != self.bytes.len() {
            return Err(Error::format(self.path, format!("{} trailing bytes", self.bytes.len() - self.at)));
        }
        Ok(())
    }
}

fn activation_tag(a: ActivationKind) -> (u8, f64) {
    match a {
        ActivationKind::NaturalExp => (0, 0.0),
        ActivationKind::BaseExp(b) => (1, b),
        ActivationKind::TemperatureExp(t) => (2, t),
        ActivationKind::Relu => (3, 0.0),
        ActivationKind::RectifiedPoly(p) => (4, p as f64),
    }
}

fn activation_from_tag(tag: u8, param: f64, path: &Path) -> Result<ActivationKind> {
    Ok(match tag {
        0 => ActivationKind::NaturalExp,
        1 => ActivationKind::BaseExp(param),
        2 => ActivationKind::TemperatureExp(param),
        3 => ActivationKind::Relu,
        4 if param >= 1.0 && param.fract() == 0.0 && param <= u32::MAX as f64 => ActivationKind::RectifiedPoly(param as u32),
        _ => return Err(Error::format(path, format!("unknown activation tag {tag} ({param})"))),
    })
}

fn bias_tag(m: BiasMode) -> u8 {
    match m {
        BiasMode::AdditiveLog => 0,
        BiasMode::MultiplicativePrior => 1,
        BiasMode::Disabled => 2,
    }
}

fn bias_from_tag(tag: u8, path: &Path) -> Result<BiasMode> {
    match tag {
        0 => Ok(BiasMode::AdditiveLog),
        1 => Ok(BiasMode::MultiplicativePrior),
        2 => Ok(BiasMode::Disabled),
        _ => Err(Error::format(path, format!("unknown bias mode {tag}"))),
    }
}

fn write_pair(path: &Path, bytes: &[u8], sidecar: &Sidecar) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_string_pretty(sidecar)? + "\n").map_err(|e| Error::io(&side, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn hex(v: u64) -> String {
    format!("{v:016x}")
}

pub fn save_layer(path: &Path, layer: &WtaLayer) -> Result<()> {
    let mut w = Writer::new(LAYER_MAGIC);
    let (k, n) = (layer.neurons() as u64, layer.inputs() as u64);
    w.u64(k);
    w.u64(n);
    let (tag, param) = activation_tag(layer.activation);
    w.u8(tag);
    w.f64s(&[param]);
    w.u8(bias_tag(layer.bias_mode));
    w.f64s(layer.weights());
    w.f64s(layer.biases());
    let side = Sidecar {
        magic: "SHWL".into(),
        version: VERSION,
        shape: vec![k, n],
        activation: Some(layer.activation),
        bias_mode: Some(layer.bias_mode),
        checksum: hex(layer.checksum()),
    };
    write_pair(path, &w.0, &side)
}

pub fn load_layer(path: &Path) -> Result<WtaLayer> {
    let bytes = read(path)?;
    let mut r = Reader::open(&bytes, LAYER_MAGIC, path)?;
    let k = r.u64()? as usize;
    let n = r.u64()? as usize;
    let tag = r.u8()?;
    let activation = activation_from_tag(tag, r.f64()?, path)?;
    let bias_mode = bias_from_tag(r.u8()?, path)?;
    let weights = r.f64s(k.saturating_mul(n))?;
    let biases = r.f64s(k)?;
    r.finish()?;
    Ok(WtaLayer::from_parts(k, n, weights, biases, activation, bias_mode)?)
}

pub fn save_readout(path: &Path, model: &LinearClassifier) -> Result<()> {
    let mut w = Writer::new(READOUT_MAGIC);
    let (c, k) = (model.classes() as u64, model.inputs() as u64);
    w.u64(c);
    w.u64(k);
    w.f64s(&model.weights);
    w.f64s(&model.biases);
    let side = Sidecar {
        magic: "SHRC".into(),
        version: VERSION,
        shape: vec![c, k],
        activation: None,
        bias_mode: None,
        checksum: hex(model.checksum()),
    };
    write_pair(path, &w.0, &side)
}

pub fn load_readout(path: &Path) -> Result<LinearClassifier> {
    let bytes = read(path)?;
    let mut r = Reader::open(&bytes, READOUT_MAGIC, path)?;
    let c = r.u64()? as usize;
    let k = r.u64()? as usize;
    let weights = r.f64s(c.saturating_mul(k))?;
    let biases = r.f64s(c)?;
    r.finish()?;
    Ok(LinearClassifier::from_parts(c, k, weights, biases)?)
}

pub fn save_mlp(path: &Path, model: &Mlp2) -> Result<()> {
    let mut w = Writer::new(MLP_MAGIC);
    let shape = [model.inputs() as u64, model.hidden() as u64, model.classes() as u64];
    for s in shape {
        w.u64(s);
    }
    for part in [&model.w1, &model.b1, &model.w2, &model.b2] {
        w.f64s(part);
    }
    let side = Sidecar {
        magic: "SHML".into(),
        version: VERSION,
        shape: shape.to_vec(),
        activation: None,
        bias_mode: None,
        checksum: hex(model.checksum()),
    };
    write_pair(path, &w.0, &side)
}

pub fn load_mlp(path: &Path) -> Result<Mlp2> {
    let bytes = read(path)?;
    let mut r = Reader::open(&bytes, MLP_MAGIC, path)?;
    let n = r.u64()? as usize;
    let h = r.u64()? as usize;
    let c = r.u64()? as usize;
    let w1 = r.f64s(h.saturating_mul(n))?;
    let b1 = r.f64s(h)?;
    let w2 = r.f64s(c.saturating_mul(h))?;
    let b2 = r.f64s(c)?;
    r.finish()?;
    Ok(Mlp2::from_parts(n, h, c, w1, b1, w2, b2)?)
}
