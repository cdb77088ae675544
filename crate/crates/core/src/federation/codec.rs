//! Byte-exact wire encoding for protocol messages.
//!
//! Frame layout: a 4-byte little-endian length prefix covering everything
//! after it, one tag byte, then the message fields in declaration order.
//! Integers are 8-byte little-endian signed, reals 8-byte IEEE-754
//! little-endian, lists an 8-byte count followed by elements, matrices a
//! row count, a column count, and the row-major values as a list.

use super::messages::*;
use ndarray::Array2;
use thiserror::Error;

pub const TAG_HC_UPLOAD: u8 = 0x01;
pub const TAG_HC_BROADCAST: u8 = 0x02;
pub const TAG_PARAM_UPLOAD: u8 = 0x03;
pub const TAG_PARAM_BROADCAST: u8 = 0x04;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("frame is truncated or structurally invalid")]
    MalformedFrame,
    #[error("unknown message tag {0:#04x}")]
    UnknownTag(u8),
    #[error("length prefix declares {declared} bytes but frame carries {actual}")]
    LengthMismatch { declared: usize, actual: usize },
}

fn put_i64(out: &mut Vec<u8>, v: i64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_usize(out: &mut Vec<u8>, v: usize) {
    put_i64(out, v as i64);
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64_list(out: &mut Vec<u8>, values: &[f64]) {
    put_usize(out, values.len());
    for &v in values {
        put_f64(out, v);
    }
}

fn put_matrix(out: &mut Vec<u8>, m: &Array2<f64>) {
    put_usize(out, m.nrows());
    put_usize(out, m.ncols());
    put_usize(out, m.len());
    for &v in m.iter() {
        put_f64(out, v);
    }
}

/// Serialize a message into one framed byte vector.
pub fn encode_message(msg: &Message) -> Vec<u8> {
    let mut body = Vec::new();
    match msg {
        Message::HcUpload(m) => {
            body.push(TAG_HC_UPLOAD);
            put_usize(&mut body, m.client_id);
            put_usize(&mut body, m.layer);
            put_usize(&mut body, m.entries.len());
            for e in &m.entries {
                put_usize(&mut body, e.edge_id);
                put_f64_list(&mut body, &e.partial);
                put_usize(&mut body, e.local_count);
            }
        }
        Message::HcBroadcast(m) => {
            body.push(TAG_HC_BROADCAST);
            put_usize(&mut body, m.layer);
            put_usize(&mut body, m.entries.len());
            for e in &m.entries {
                put_usize(&mut body, e.edge_id);
                put_f64_list(&mut body, &e.total);
                put_usize(&mut body, e.edge_degree);
                put_f64(&mut body, e.weight);
            }
        }
        Message::ParamUpload(m) => {
            body.push(TAG_PARAM_UPLOAD);
            put_usize(&mut body, m.client_id);
            put_usize(&mut body, m.blocks.len());
            for b in &m.blocks {
                put_matrix(&mut body, b);
            }
            put_usize(&mut body, m.train_node_count);
        }
        Message::ParamBroadcast(m) => {
            body.push(TAG_PARAM_BROADCAST);
            put_usize(&mut body, m.blocks.len());
            for b in &m.blocks {
                put_matrix(&mut body, b);
            }
        }
    }
    let mut frame = Vec::with_capacity(4 + body.len());
    frame.extend_from_slice(&(body.len() as u32).to_le_bytes());
    frame.extend_from_slice(&body);
    frame
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.pos + n > self.data.len() {
            return Err(CodecError::MalformedFrame);
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn i64(&mut self) -> Result<i64, CodecError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn count(&mut self) -> Result<usize, CodecError> {
        let v = self.i64()?;
        usize::try_from(v).map_err(|_| CodecError::MalformedFrame)
    }

    fn f64(&mut self) -> Result<f64, CodecError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_list(&mut self) -> Result<Vec<f64>, CodecError> {
        let n = self.count()?;
        // a count cannot promise more elements than bytes remain
        if n > (self.data.len() - self.pos) / 8 {
            return Err(CodecError::MalformedFrame);
        }
        (0..n).map(|_| self.f64()).collect()
    }

    fn matrix(&mut self) -> Result<Array2<f64>, CodecError> {
        let rows = self.count()?;
        let cols = self.count()?;
        let values = self.f64_list()?;
        if rows.checked_mul(cols) != Some(values.len()) {
            return Err(CodecError::MalformedFrame);
        }
        Array2::from_shape_vec((rows, cols), values).map_err(|_| CodecError::MalformedFrame)
    }

    fn done(&self) -> bool {
        self.pos == self.data.len()
    }
}

/// Parse exactly one frame back into a message.
pub fn decode_message(bytes: &[u8]) -> Result<Message, CodecError> {
    if bytes.len() < 5 {
        return Err(CodecError::MalformedFrame);
    }
    let declared = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    let actual = bytes.len() - 4;
    if declared != actual {
        return Err(CodecError::LengthMismatch { declared, actual });
    }
    let tag = bytes[4];
    let mut r = Reader {
        data: &bytes[5..],
        pos: 0,
    };
    let msg = match tag {
        TAG_HC_UPLOAD => {
            let client_id = r.count()?;
            let layer = r.count()?;
            let n = r.count()?;
            let mut entries = Vec::with_capacity(n.min(1 << 16));
            for _ in 0..n {
                let edge_id = r.count()?;
                let partial = r.f64_list()?;
                let local_count = r.count()?;
                entries.push(HcEdgeUpload {
                    edge_id,
                    partial,
                    local_count,
                });
            }
            Message::HcUpload(HcUploadMsg {
                client_id,
                layer,
                entries,
            })
        }
        TAG_HC_BROADCAST => {
            let layer = r.count()?;
            let n = r.count()?;
            let mut entries = Vec::with_capacity(n.min(1 << 16));
            for _ in 0..n {
                let edge_id = r.count()?;
                let total = r.f64_list()?;
                let edge_degree = r.count()?;
                let weight = r.f64()?;
                entries.push(HcEdgeBroadcast {
                    edge_id,
                    total,
                    edge_degree,
                    weight,
                });
            }
            Message::HcBroadcast(HcBroadcastMsg { layer, entries })
        }
        TAG_PARAM_UPLOAD => {
            let client_id = r.count()?;
            let n = r.count()?;
            let mut blocks = Vec::with_capacity(n.min(1 << 16));
            for _ in 0..n {
                blocks.push(r.matrix()?);
            }
            let train_node_count = r.count()?;
            Message::ParamUpload(ParamUploadMsg {
                client_id,
                blocks,
                train_node_count,
            })
        }
        TAG_PARAM_BROADCAST => {
            let n = r.count()?;
            let mut blocks = Vec::with_capacity(n.min(1 << 16));
            for _ in 0..n {
                blocks.push(r.matrix()?);
            }
            Message::ParamBroadcast(ParamBroadcastMsg { blocks })
        }
        other => return Err(CodecError::UnknownTag(other)),
    };
    if !r.done() {
        return Err(CodecError::MalformedFrame);
    }
    Ok(msg)
}
