use std::io::{Read, Write};

use super::world::{RewardEvent, RewardKind};
use crate::error::{Error, Result};

/// Event log as CSV: `tick,agent,event,magnitude`.
pub fn write_event_log<W: Write>(events: &[RewardEvent], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["tick", "agent", "event", "magnitude"])?;
    for e in events {
        out.write_record([
            e.tick.to_string(),
            e.agent.to_string(),
            e.kind.name().to_string(),
            format!("{}", e.magnitude),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_event_log<R: Read>(r: R) -> Result<Vec<RewardEvent>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut events = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::input("truncated event log row"));
        let bad = |what: &str| Error::input(format!("bad {what} in event log"));
        events.push(RewardEvent {
            tick: field(0)?.parse().map_err(|_| bad("tick"))?,
            agent: field(1)?.parse().map_err(|_| bad("agent"))?,
            kind: RewardKind::from_name(field(2)?).ok_or_else(|| bad("event kind"))?,
            magnitude: field(3)?.parse().map_err(|_| bad("magnitude"))?,
        });
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let events = vec![
            RewardEvent::fixed(3, 1, RewardKind::Success),
            RewardEvent {
                tick: 4,
                agent: 0,
                kind: RewardKind::DistanceShaping,
                magnitude: 0.01,
            },
        ];
        let mut buf = Vec::new();
        write_event_log(&events, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "tick,agent,event,magnitude\n3,1,success,1\n4,0,distance_shaping,0.01\n");
        assert_eq!(read_event_log(buf.as_slice()).unwrap(), events);
    }
}
