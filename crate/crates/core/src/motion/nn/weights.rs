//! Binary weight files (`STBW1`) and their text sidecar.

use std::path::{Path, PathBuf};

use super::network::{NetConfig, Network, Tensor};
use crate::error::{Error, Result};
use crate::io_util::{parse_key_values, read_text, write_atomic};

pub const MAGIC: &[u8; 5] = b"STBW1";

/// Which parameter pair a regressor predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// `[t_x, t_y]`
    Translation,
    /// `[theta, s]`
    RotationScale,
}

impl Role {
    pub fn code(self) -> f64 {
        match self {
            Role::Translation => 0.0,
            Role::RotationScale => 1.0,
        }
    }

    fn from_code(v: f64) -> Option<Self> {
        match v as i64 {
            0 => Some(Role::Translation),
            1 => Some(Role::RotationScale),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Translation => "translation",
            Role::RotationScale => "rotation_scale",
        }
    }
}

/// A trained regressor plus what is needed to use it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub role: Role,
    pub net: Network,
    pub target_mean: [f64; 2],
    pub target_std: [f64; 2],
    pub epochs: usize,
    /// Mean training loss per epoch (normalized target units).
    pub loss_curve: Vec<f64>,
}

impl ModelWeights {
    pub fn cfg(&self) -> &NetConfig {
        &self.net.cfg
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let cfg = &self.net.cfg;
        let c = &cfg.conv_channels;
        let header = [
            cfg.in_channels as f64,
            cfg.input_side as f64,
            c[0] as f64,
            c[1] as f64,
            c[2] as f64,
            c[3] as f64,
            cfg.pool_side as f64,
            cfg.fc_hidden[0] as f64,
            cfg.fc_hidden[1] as f64,
            cfg.dropout,
            self.role.code(),
            self.epochs as f64,
        ];
        let mut out = MAGIC.to_vec();
        put_tensor(&mut out, "meta.architecture", &[header.len()], &header);
        for t in &self.net.params {
            put_tensor(&mut out, &t.name, &t.shape, &t.data);
        }
        put_tensor(&mut out, "target.mean", &[2], &self.target_mean);
        put_tensor(&mut out, "target.std", &[2], &self.target_std);
        put_tensor(
            &mut out,
            "meta.loss_curve",
            &[self.loss_curve.len()],
            &self.loss_curve,
        );
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err("missing STBW1 magic".into());
        }
        let mut pos = MAGIC.len();
        let mut tensors = Vec::new();
        while pos < bytes.len() {
            tensors.push(take_tensor(bytes, &mut pos)?);
        }
        let mut it = tensors.into_iter();
        let arch = it.next().ok_or("no architecture record")?;
        if arch.name != "meta.architecture" || arch.data.len() != 12 {
            return Err(format!("unexpected first tensor {}", arch.name));
        }
        let h = &arch.data;
        let u = |v: f64| v as usize;
        let cfg = NetConfig {
            in_channels: u(h[0]),
            input_side: u(h[1]),
            conv_channels: [u(h[2]), u(h[3]), u(h[4]), u(h[5])],
            pool_side: u(h[6]),
            fc_hidden: [u(h[7]), u(h[8])],
            dropout: h[9],
        };
        let role = Role::from_code(h[10]).ok_or("unknown role")?;
        let n_params = cfg.tensor_shapes().len();
        let rest: Vec<Tensor> = it.collect();
        if rest.len() != n_params + 3 {
            return Err(format!(
                "expected {} tensors after header, found {}",
                n_params + 3,
                rest.len()
            ));
        }
        let (params, tail) = rest.split_at(n_params);
        let pick2 = |t: &Tensor, name: &str| -> std::result::Result<[f64; 2], String> {
            if t.name != name || t.data.len() != 2 {
                return Err(format!("expected {name}, found {}", t.name));
            }
            Ok([t.data[0], t.data[1]])
        };
        let target_mean = pick2(&tail[0], "target.mean")?;
        let target_std = pick2(&tail[1], "target.std")?;
        if tail[2].name != "meta.loss_curve" {
            return Err(format!("expected meta.loss_curve, found {}", tail[2].name));
        }
        let net = Network::from_tensors(cfg, params.to_vec()).map_err(|e| e.to_string())?;
        Ok(ModelWeights {
            role,
            net,
            target_mean,
            target_std,
            epochs: u(h[11]),
            loss_curve: tail[2].data.clone(),
        })
    }

    pub fn save(&self, path: &Path, meta: &str) -> Result<()> {
        write_atomic(path, &self.to_bytes())?;
        write_atomic(&meta_path(path), meta.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        ModelWeights::from_bytes(&bytes).map_err(|r| Error::format(path, r))
    }

    /// Reads the key=value sidecar written next to a weight file.
    pub fn load_meta(path: &Path) -> Result<std::collections::BTreeMap<String, String>> {
        let mp = meta_path(path);
        parse_key_values(&read_text(&mp)?).map_err(|r| Error::format(&mp, r))
    }
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn put_tensor(out: &mut Vec<u8>, name: &str, shape: &[usize], data: &[f64]) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn take_tensor(bytes: &[u8], pos: &mut usize) -> std::result::Result<Tensor, String> {
    let mut take = |n: usize| -> std::result::Result<&[u8], String> {
        let s = bytes.get(*pos..*pos + n).ok_or("truncated weight file")?;
        *pos += n;
        Ok(s)
    };
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap()) as usize;
    let name_len = u32_at(take(4)?);
    let name =
        String::from_utf8(take(name_len)?.to_vec()).map_err(|_| "tensor name is not UTF-8")?;
    let rank = u32_at(take(4)?);
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(u32_at(take(4)?));
    }
    let count: usize = shape.iter().product();
    let raw = take(count * 8)?;
    let data = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Tensor { name, shape, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ModelWeights {
        let cfg = NetConfig {
            in_channels: 2,
            input_side: 16,
            conv_channels: [2, 2, 3, 3],
            pool_side: 2,
            fc_hidden: [5, 4],
            dropout: 0.5,
        };
        ModelWeights {
            role: Role::RotationScale,
            net: Network::new(cfg, 9).unwrap(),
            target_mean: [0.001, 1.0],
            target_std: [0.02, 0.01],
            epochs: 3,
            loss_curve: vec![1.0, 0.5, 0.25],
        }
    }

    #[test]
    fn bytes_round_trip() {
        let w = sample();
        let bytes = w.to_bytes();
        assert_eq!(&bytes[..5], b"STBW1");
        assert_eq!(ModelWeights::from_bytes(&bytes).unwrap(), w);
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = sample().to_bytes();
        assert!(ModelWeights::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(ModelWeights::from_bytes(b"XXXX1").is_err());
        let mut bad = bytes.clone();
        bad[5 + 4 + "meta.architecture".len() + 8 + 7] ^= 0xff;
        assert!(ModelWeights::from_bytes(&bad).is_err());
    }

    #[test]
    fn save_and_load_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f_rs.bin");
        let w = sample();
        w.save(&path, "epochs=3\n").unwrap();
        assert_eq!(ModelWeights::load(&path).unwrap(), w);
        assert_eq!(ModelWeights::load_meta(&path).unwrap()["epochs"], "3");
    }
}
