//! Conference namespace.
//!
//! ```text
//! /conf/<slice>/sync/state/<known_version>
//! /conf/<slice>/sync/update/<participant>/<seq>
//! /conf/<slice>/<participant>/media/<seq>
//! ```

use crate::name::Name;

pub const ROOT: &str = "conf";
pub const SYNC: &str = "sync";

pub fn slice_prefix(slice: &str) -> Name {
    Name::from_components([ROOT, slice])
}

pub fn sync_prefix(slice: &str) -> Name {
    Name::from_components([ROOT, slice, SYNC])
}

pub fn participant_prefix(slice: &str, participant: &str) -> Name {
    Name::from_components([ROOT, slice, participant])
}

pub fn sync_state(slice: &str, known: u64) -> Name {
    sync_prefix(slice).child("state").child(known.to_string())
}

pub fn sync_update(slice: &str, participant: &str, seq: u64) -> Name {
    sync_prefix(slice)
        .child("update")
        .child(participant)
        .child(seq.to_string())
}

pub fn media(slice: &str, participant: &str, seq: u64) -> Name {
    participant_prefix(slice, participant)
        .child("media")
        .child(seq.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SyncName {
    State(u64),
    Update(String, u64),
}

pub fn parse_sync(slice: &str, name: &Name) -> Option<SyncName> {
    if !sync_prefix(slice).is_prefix_of(name) {
        return None;
    }
    match (name.get(3), name.len()) {
        (Some("state"), 5) => name.get(4)?.parse().ok().map(SyncName::State),
        (Some("update"), 6) => {
            let seq = name.get(5)?.parse().ok()?;
            Some(SyncName::Update(name.get(4)?.to_string(), seq))
        }
        _ => None,
    }
}

/// (producer, seq) of a media segment name.
pub fn parse_media(slice: &str, name: &Name) -> Option<(String, u64)> {
    if name.len() != 5 || !slice_prefix(slice).is_prefix_of(name) || name.get(3) != Some("media") {
        return None;
    }
    let producer = name.get(2)?;
    if producer == SYNC {
        return None;
    }
    Some((producer.to_string(), name.get(4)?.parse().ok()?))
}

/// Participant ids become name components and must not shadow the sync prefix.
pub fn valid_participant_id(id: &str) -> bool {
    id != SYNC && Name::try_from_components([id]).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        assert_eq!(sync_state("blue", 3).to_string(), "/conf/blue/sync/state/3");
        assert_eq!(parse_sync("blue", &sync_state("blue", 3)), Some(SyncName::State(3)));
        assert_eq!(
            parse_sync("blue", &sync_update("blue", "alice", 7)),
            Some(SyncName::Update("alice".into(), 7))
        );
        assert_eq!(parse_media("blue", &media("blue", "bob", 42)), Some(("bob".into(), 42)));
    }

    #[test]
    fn foreign_names_do_not_parse() {
        assert_eq!(parse_sync("red", &sync_state("blue", 3)), None);
        assert_eq!(parse_media("red", &media("blue", "bob", 1)), None);
        assert_eq!(parse_media("blue", &Name::parse("/conf/blue/bob/media/x").unwrap()), None);
        assert_eq!(parse_sync("blue", &Name::parse("/conf/blue/sync/state").unwrap()), None);
    }

    #[test]
    fn participant_ids() {
        assert!(valid_participant_id("alice"));
        assert!(!valid_participant_id("sync"));
        assert!(!valid_participant_id(""));
        assert!(!valid_participant_id("a/b"));
    }
}
