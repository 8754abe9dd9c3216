mod common;

use common::*;
use slicenet::api::ApiError;
use slicenet::emulator::EmulatorConfig;

#[test]
fn one_handoff_repairs_stretch() {
    let (em, reports) = line_handoffs(true, 1, 50);
    let r = &reports[0];
    assert_eq!((r.from.as_str(), r.to.as_str()), ("poa1", "poa2"));
    // ingress -> poa1 -> r -> poa2 is 4 forwarders over a 2-link shortest path
    assert_eq!(r.stretch_before, Some(4.0 / 3.0));
    assert_eq!(r.stretch_after, Some(1.0));
    assert_eq!(r.interests_lost, 0);
    assert!(r.interests_late_bound >= 1);
    let kinds: Vec<_> = em.log().iter().map(|r| r.kind.as_str()).collect();
    for k in ["detach", "attach", "late_bind", "mapping_update", "ingress_update", "handoff_report"] {
        assert!(kinds.contains(&k), "{k}");
    }
}

#[test]
fn repeated_handoffs_lose_nothing() {
    let (em, reports) = line_handoffs(true, 20, 50);
    assert_eq!(reports.len(), 20);
    assert!(reports.iter().all(|r| r.interests_lost == 0), "{reports:?}");
    assert!(reports.iter().all(|r| r.stretch_after == Some(1.0)));
    let m = &em.metrics().slices[0];
    assert_eq!(m.delivered, m.published);
    assert_eq!(m.abandoned, 0);
}

#[test]
fn gap_up_to_lifetime_is_covered() {
    let (_, reports) = line_handoffs(true, 4, 3900);
    assert!(reports.iter().all(|r| r.interests_lost == 0), "{reports:?}");
}

#[test]
fn without_mobility_pending_interests_are_lost() {
    let (em, reports) = line_handoffs(false, 6, 50);
    assert_eq!(reports.len(), 6);
    assert!(reports.iter().all(|r| !r.mobility_enabled));
    assert!(reports.iter().map(|r| r.interests_lost).sum::<u64>() > 0);
    assert!(reports.iter().all(|r| r.interests_late_bound == 0 && r.stretch_before.is_none()));
    assert!(em.log().iter().any(|r| r.kind == "expire"));
}

#[test]
fn handoff_validation() {
    let mut em = line_emulator(EmulatorConfig::default());
    let same = em.submit(handoff("line", "p", "poa1", 50));
    assert!(matches!(same, Err(ApiError::InvalidHandoff(_))), "{same:?}");
    let consumer = em.submit(handoff("line", "c", "poa2", 50));
    assert!(matches!(consumer, Err(ApiError::UnknownPrefix(_))), "{consumer:?}");
    em.submit(handoff("line", "p", "poa2", 50)).unwrap();
    let again = em.submit(handoff("line", "p", "poa1", 50));
    assert!(matches!(again, Err(ApiError::HandoffInProgress(_))), "{again:?}");
    em.run_for_ms(60.0);
    em.submit(handoff("line", "p", "poa1", 50)).unwrap();
}

#[test]
fn disabled_handoff_still_moves_the_producer() {
    let mut em = line_emulator(EmulatorConfig::default());
    em.submit(mobility("line", false)).unwrap();
    let r = em.submit(handoff("line", "p", "poa2", 50));
    let Err(ApiError::MobilityDisabled { handoff_id, .. }) = r else { panic!("{r:?}") };
    assert_eq!(handoff_id, 1);
    em.run_for_ms(100.0);
    assert_eq!(em.slice_views()[0].participants.iter().find(|p| p.participant_id == "p").unwrap().poa, "poa2");
    em.submit(publish("line", "p")).unwrap();
    em.run_for_ms(1000.0);
    assert_eq!(em.participant("line", "c").unwrap().stats.delivered, 1);
}

#[test]
fn consumer_move_is_served_from_cache() {
    let (delta, refetched) = move_serve_delta(true);
    assert_eq!(refetched, 5);
    assert_eq!(delta, 0);
}

#[test]
fn consumer_move_without_cache_hits_the_producer() {
    let (delta, refetched) = move_serve_delta(false);
    assert_eq!(refetched, 5);
    assert_eq!(delta, refetched);
}

#[test]
fn multicast_aggregates_upstream() {
    let (up, del) = multicast_counts(30);
    assert_eq!(up.len(), 30);
    assert!(up.values().all(|n| *n == 1));
    assert_eq!(del.len(), 30);
    assert!(del.values().all(|n| *n == 3));
}
