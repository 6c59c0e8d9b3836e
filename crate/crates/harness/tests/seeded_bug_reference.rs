//! Reference tests demonstrating that each seeded bug is detectable by a
//! short test using only documented helpers. These enable the toggles
//! directly so they pass regardless of `harness_bugs.conf`.

use quorum_harness::{BugToggles, Cluster, Command, Decision, Entry};

#[test]
fn executed_state_amnesia_reapplies_committed_entries() {
    let toggles = BugToggles { executed_state_amnesia: true, ..Default::default() };
    let mut c = Cluster::with_toggles(5, toggles);
    c.commit(Entry::inc("x", 1));
    c.commit(Entry::inc("x", 1));
    for n in 0..5 {
        c.apply_committed(n);
    }
    assert_eq!(c.value_of(0, "x"), 2);

    c.crash(0);
    c.restart(0);
    // The volatile execution cursor was wiped; the log replays from zero.
    c.apply_committed(0);

    assert_eq!(c.value_of(0, "x"), 4, "restarted node double-applies");
    assert_eq!(c.value_of(1, "x"), 2, "non-crashed replica stays at 2");
    assert_ne!(c.value_of(0, "x"), c.value_of(1, "x"), "state divergence");
}

#[test]
fn recovery_noop_voids_committed_command() {
    let toggles = BugToggles { recovery_noop_voiding: true, ..Default::default() };
    let mut c = Cluster::with_toggles(5, toggles);

    // Fast path: {0,1,2} pre-accept; only node 2 learns the commit.
    let cmd = Command::set("k", 999);
    c.preaccept(7, cmd.clone(), &[0, 1, 2]);
    c.commit_instance_at(2, 7);
    c.execute_instance_at(2, 7);

    // Compound failure: 0 dies, 1 reboots with amnesia, 2 is partitioned.
    c.crash(0);
    c.crash(1);
    c.restart(1);
    c.partition(2);

    // Node 3 recovers the instance from quorum {3, 1, 4}: all empty.
    let decision = c.recover(3, 7);
    assert_eq!(decision, Decision::NoOp, "empty quorum is voided by the bug");

    c.heal(2);
    assert_eq!(c.value_of(2, "k"), 999, "node 2 already executed the command");
    assert_eq!(c.value_of(3, "k"), 0, "quorum voided it: permanent divergence");
}

#[test]
fn recovery_defers_without_the_bug() {
    let mut c = Cluster::new(5);
    let cmd = Command::set("k", 999);
    c.preaccept(7, cmd, &[0, 1, 2]);
    c.commit_instance_at(2, 7);
    c.execute_instance_at(2, 7);
    c.crash(0);
    c.crash(1);
    c.restart(1);
    c.partition(2);
    assert_eq!(c.recover(3, 7), Decision::Defer, "no positive evidence, no voiding");
}
