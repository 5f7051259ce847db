use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridcore::CellCoord;

/// Bytes before the waypoint list: id, seq, effector flag, count.
pub const HEADER_BYTES: usize = 8;

/// A broadcast of the sender's committed path in global cells.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentionMessage {
    pub agent_id: usize,
    pub seq: u32,
    /// Starts at the sender's cell at send time.
    pub waypoints: Vec<CellCoord>,
    pub effector: bool,
}

impl IntentionMessage {
    pub fn validate(&self) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(Error::input("intention message without waypoints"));
        }
        if let Some(w) = self.waypoints.windows(2).find(|w| !w[0].is_adjacent(w[1])) {
            return Err(Error::input(format!("waypoints {} and {} are not adjacent", w[0], w[1])));
        }
        Ok(())
    }

    pub fn wire_len(&self) -> usize {
        HEADER_BYTES + 4 * self.waypoints.len()
    }

    /// Little-endian: u8 id, u32 seq, u8 effector, u16 count, then
    /// (u16 col, u16 row) pairs.
    pub fn encode(&self) -> Result<Vec<u8>> {
        let id = u8::try_from(self.agent_id).map_err(|_| Error::input("agent id exceeds u8"))?;
        let count = u16::try_from(self.waypoints.len()).map_err(|_| Error::input("too many waypoints"))?;
        let mut out = Vec::with_capacity(self.wire_len());
        out.push(id);
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.push(u8::from(self.effector));
        out.extend_from_slice(&count.to_le_bytes());
        for c in &self.waypoints {
            let col = u16::try_from(c.col).map_err(|_| Error::input("column exceeds u16"))?;
            let row = u16::try_from(c.row).map_err(|_| Error::input("row exceeds u16"))?;
            out.extend_from_slice(&col.to_le_bytes());
            out.extend_from_slice(&row.to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_BYTES {
            return Err(Error::input("truncated intention message header"));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let count = u16_at(6) as usize;
        if bytes.len() != HEADER_BYTES + 4 * count {
            return Err(Error::input(format!(
                "intention message declares {count} waypoints but has {} bytes",
                bytes.len()
            )));
        }
        let effector = match bytes[5] {
            0 => false,
            1 => true,
            b => return Err(Error::input(format!("bad effector flag {b}"))),
        };
        let waypoints = (0..count)
            .map(|k| {
                let i = HEADER_BYTES + 4 * k;
                CellCoord::new(u16_at(i) as usize, u16_at(i + 2) as usize)
            })
            .collect();
        Ok(IntentionMessage {
            agent_id: bytes[0] as usize,
            seq: u32::from_le_bytes(bytes[1..5].try_into().expect("4 bytes")),
            waypoints,
            effector,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_round_trip() {
        let m = IntentionMessage {
            agent_id: 3,
            seq: 70_000,
            waypoints: vec![CellCoord::new(1, 2), CellCoord::new(2, 3), CellCoord::new(2, 4)],
            effector: true,
        };
        let bytes = m.encode().unwrap();
        assert_eq!(bytes.len(), 8 + 12);
        assert_eq!(&bytes[..8], &[3, 0x70, 0x11, 0x01, 0x00, 1, 3, 0]);
        assert_eq!(IntentionMessage::decode(&bytes).unwrap(), m);
        assert!(IntentionMessage::decode(&bytes[..bytes.len() - 1]).is_err());
    }
}
