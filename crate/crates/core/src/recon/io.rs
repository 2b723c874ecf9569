//! Loss traces as CSV and optimizer checkpoints in the model container.
//!
//! A checkpoint header stores `d`, the candidate count in `p`, the
//! iteration counter in `h` and the trace length in `k`; the payload holds
//! `X̂`, the momentum buffer and the trace as `k × 3` rows.

use std::path::Path;

use crate::error::{Error, Result};
use crate::features::persist::{read_container, split_payload, write_container, ContainerHeader, ContainerKind};
use crate::recon::{ReconState, TracePoint};

pub fn write_trace_csv(out: impl std::io::Write, trace: &[TracePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for t in trace {
        w.serialize(t)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv(input: impl std::io::Read) -> Result<Vec<TracePoint>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

impl ReconState {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (n, d) = self.x_hat().shape();
        let header = ContainerHeader {
            kind: ContainerKind::ReconState,
            d: d as u64,
            p: n as u64,
            h: self.iteration() as u64,
            k: self.trace().len() as u64,
            activation_id: 0,
        };
        let trace: Vec<f64> = self
            .trace()
            .iter()
            .flat_map(|t| [t.iteration as f64, t.normalized_loss, t.wall_ms])
            .collect();
        let mut buf = Vec::new();
        write_container(&mut buf, &header, &[self.x_hat().as_slice(), self.momentum().as_slice(), &trace])?;
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, payload) = read_container(bytes)?;
        if header.kind != ContainerKind::ReconState {
            return Err(Error::Format {
                offset: 6,
                message: "file holds a model, not a reconstruction checkpoint".into(),
            });
        }
        let as_usize = |v: u64| {
            usize::try_from(v).map_err(|_| Error::Format {
                offset: 8,
                message: format!("count {v} does not fit in memory"),
            })
        };
        let (d, n, iteration, k) = (as_usize(header.d)?, as_usize(header.p)?, as_usize(header.h)?, as_usize(header.k)?);
        let mut parts = split_payload(payload, &[(n, d), (n, d), (k, 3)])?.into_iter();
        let (x_hat, momentum, trace) = (parts.next().unwrap(), parts.next().unwrap(), parts.next().unwrap());
        let trace = trace
            .row_iter()
            .map(|r| TracePoint {
                iteration: r[0] as usize,
                normalized_loss: r[1],
                wall_ms: r[2],
            })
            .collect();
        ReconState::from_parts(x_hat, momentum, iteration, trace)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
