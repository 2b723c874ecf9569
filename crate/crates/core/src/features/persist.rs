//! Binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "RLRM"            4 bytes magic
//! version           u16 (currently 1)
//! kind              u16 (1 = random features, 2 = two-layer, 3 = recon state)
//! d, p, h, k        4 × u64
//! activation id     u16 (0 when not applicable)
//! payload           f64 arrays, row-major, in kind-specific order
//! ```
//!
//! Random features store `V (p×d)` then `θ* (p×k)` with `h = 0`. Two-layer
//! models store `θ⁽¹⁾ (h×d)`, trained `θ⁽²⁾ (k×h)` and `θ⁽²⁾_init (k×h)`
//! with `p = h`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{Activation, ActivationKind, FeatureMap, RFModel, TwoLayerModel};
use crate::numkit::DenseMatrix;

pub const MAGIC: &[u8; 4] = b"RLRM";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 2 + 4 * 8 + 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u16)]
pub enum ContainerKind {
    RandomFeatures = 1,
    TwoLayer = 2,
    ReconState = 3,
}

impl ContainerKind {
    fn from_u16(v: u16) -> Option<Self> {
        match v {
            1 => Some(Self::RandomFeatures),
            2 => Some(Self::TwoLayer),
            3 => Some(Self::ReconState),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContainerHeader {
    pub kind: ContainerKind,
    pub d: u64,
    pub p: u64,
    pub h: u64,
    pub k: u64,
    pub activation_id: u16,
}

pub fn write_container(out: &mut impl Write, header: &ContainerHeader, arrays: &[&[f64]]) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * arrays.iter().map(|a| a.len()).sum::<usize>());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.kind as u16).to_le_bytes());
    for v in [header.d, header.p, header.h, header.k] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&header.activation_id.to_le_bytes());
    for a in arrays {
        for v in *a {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Parses the header and returns the whole payload as floats.
pub fn read_container(bytes: &[u8]) -> Result<(ContainerHeader, Vec<f64>)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format {
            offset: bytes.len(),
            message: "truncated header".into(),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "bad magic".into(),
        });
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u16_at(4);
    if version != VERSION {
        return Err(Error::Format {
            offset: 4,
            message: format!("unsupported version {version}"),
        });
    }
    let kind = ContainerKind::from_u16(u16_at(6)).ok_or_else(|| Error::Format {
        offset: 6,
        message: format!("unknown kind {}", u16_at(6)),
    })?;
    let header = ContainerHeader {
        kind,
        d: u64_at(8),
        p: u64_at(16),
        h: u64_at(24),
        k: u64_at(32),
        activation_id: u16_at(40),
    };
    let payload = &bytes[HEADER_LEN..];
    if !payload.len().is_multiple_of(8) {
        return Err(Error::Format {
            offset: HEADER_LEN + payload.len() / 8 * 8,
            message: "payload is not a whole number of f64 values".into(),
        });
    }
    let floats = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, floats))
}

/// Splits `payload` into matrices of the given shapes, checking the total size.
pub(crate) fn split_payload(payload: Vec<f64>, shapes: &[(usize, usize)]) -> Result<Vec<DenseMatrix>> {
    let expected: usize = shapes.iter().map(|(r, c)| r * c).sum();
    if payload.len() != expected {
        return Err(Error::Format {
            offset: HEADER_LEN + 8 * payload.len().min(expected),
            message: format!("payload holds {} values, header implies {expected}", payload.len()),
        });
    }
    let mut out = Vec::with_capacity(shapes.len());
    let mut rest = payload.as_slice();
    for &(r, c) in shapes {
        let (head, tail) = rest.split_at(r * c);
        out.push(DenseMatrix::new(r, c, head.to_vec())?);
        rest = tail;
    }
    Ok(out)
}

fn activation_id(act: &Activation) -> Result<u16> {
    act.kind().id().ok_or_else(|| {
        Error::InvalidArgument(format!("custom activation '{}' cannot be persisted", act.name()))
    })
}

fn activation_from_id(id: u16) -> Result<Activation> {
    ActivationKind::from_id(id)
        .and_then(Activation::from_kind)
        .ok_or_else(|| Error::Format {
            offset: 40,
            message: format!("unknown activation id {id}"),
        })
}

fn dim(v: u64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Format {
        offset: 8,
        message: format!("dimension {v} does not fit in memory"),
    })
}

#[derive(Clone, Debug)]
pub enum SavedModel {
    RandomFeatures(RFModel),
    TwoLayer(TwoLayerModel),
}

impl SavedModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        match self {
            SavedModel::RandomFeatures(m) => {
                let header = ContainerHeader {
                    kind: ContainerKind::RandomFeatures,
                    d: m.input_dim() as u64,
                    p: m.feature_dim() as u64,
                    h: 0,
                    k: m.theta_star.cols() as u64,
                    activation_id: activation_id(&m.activation)?,
                };
                write_container(&mut buf, &header, &[m.weights.as_slice(), m.theta_star.as_slice()])?;
            }
            SavedModel::TwoLayer(m) => {
                let header = ContainerHeader {
                    kind: ContainerKind::TwoLayer,
                    d: m.input_dim() as u64,
                    p: m.width() as u64,
                    h: m.width() as u64,
                    k: m.theta2.rows() as u64,
                    activation_id: activation_id(&m.activation)?,
                };
                write_container(
                    &mut buf,
                    &header,
                    &[m.theta1.as_slice(), m.theta2.as_slice(), m.theta2_init().as_slice()],
                )?;
            }
        }
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, payload) = read_container(bytes)?;
        let (d, p, h, k) = (dim(header.d)?, dim(header.p)?, dim(header.h)?, dim(header.k)?);
        match header.kind {
            ContainerKind::RandomFeatures => {
                let act = activation_from_id(header.activation_id)?;
                let mut parts = split_payload(payload, &[(p, d), (p, k)])?.into_iter();
                let (v, theta) = (parts.next().unwrap(), parts.next().unwrap());
                Ok(SavedModel::RandomFeatures(RFModel::new(v, act, theta)?))
            }
            ContainerKind::TwoLayer => {
                let act = activation_from_id(header.activation_id)?;
                let mut parts = split_payload(payload, &[(h, d), (k, h), (k, h)])?.into_iter();
                let (t1, t2, t2i) = (parts.next().unwrap(), parts.next().unwrap(), parts.next().unwrap());
                Ok(SavedModel::TwoLayer(TwoLayerModel::from_parts(t1, t2, t2i, act)?))
            }
            ContainerKind::ReconState => Err(Error::Format {
                offset: 6,
                message: "file holds a reconstruction checkpoint, not a model".into(),
            }),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn feature_map(&self) -> &dyn FeatureMap {
        match self {
            SavedModel::RandomFeatures(m) => m,
            SavedModel::TwoLayer(m) => m,
        }
    }

    pub fn readout_targets(&self) -> Vec<crate::numkit::DenseVector> {
        match self {
            SavedModel::RandomFeatures(m) => m.readout_targets(),
            SavedModel::TwoLayer(m) => m.readout_targets(),
        }
    }
}
