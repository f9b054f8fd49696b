//! Passenger-to-bag ownership.
//!
//! When a bag label first appears it is linked to the nearest person (by box
//! center) within `alpha_d`. If nobody is close enough the bag is retried on
//! each later frame it appears in. Entries are never changed once created.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracker::TrackedBox;
use crate::{FrameIdx, Label};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssocConfig {
    pub alpha_d: f64,
}

impl Default for AssocConfig {
    fn default() -> Self {
        Self { alpha_d: 200.0 }
    }
}

impl AssocConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_d > 0.0) {
            return Err(Error::param("alpha_d", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub person: Label,
    pub bag: Label,
    pub frame: FrameIdx,
    /// Center distance at creation.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AssociationLedger {
    entries: BTreeMap<Label, LedgerEntry>,
    /// Bags never linked, with the frame they first appeared.
    unassociated: BTreeMap<Label, FrameIdx>,
}

impl AssociationLedger {
    /// Add an entry unless the bag already has one. Returns whether it was added.
    pub fn insert(&mut self, e: LedgerEntry) -> bool {
        if self.entries.contains_key(&e.bag) {
            return false;
        }
        self.unassociated.remove(&e.bag);
        self.entries.insert(e.bag, e);
        true
    }

    /// Record a bag that has no entry yet as seen at `frame` without an owner.
    pub fn mark_unassociated(&mut self, bag: Label, frame: FrameIdx) {
        if !self.entries.contains_key(&bag) {
            self.unassociated.entry(bag).or_insert(frame);
        }
    }

    pub fn get(&self, bag: Label) -> Option<&LedgerEntry> {
        self.entries.get(&bag)
    }

    pub fn owner_of(&self, bag: Label) -> Option<Label> {
        self.entries.get(&bag).map(|e| e.person)
    }

    pub fn entries(&self) -> impl Iterator<Item = &LedgerEntry> {
        self.entries.values()
    }

    pub fn unassociated(&self) -> impl Iterator<Item = (Label, FrameIdx)> + '_ {
        self.unassociated.iter().map(|(b, f)| (*b, *f))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn by_frame(xs: &[TrackedBox]) -> BTreeMap<FrameIdx, Vec<&TrackedBox>> {
    let mut m: BTreeMap<FrameIdx, Vec<&TrackedBox>> = BTreeMap::new();
    for x in xs {
        m.entry(x.frame).or_default().push(x);
    }
    for v in m.values_mut() {
        v.sort_by_key(|x| x.label);
    }
    m
}

/// Nearest person within `alpha_d` of `bag`; ties go to the smaller label.
fn nearest(bag: &TrackedBox, persons: &[&TrackedBox], alpha_d: f64) -> Option<(Label, f64)> {
    let c = bag.bbox.center();
    persons
        .iter()
        .map(|p| (p.label, p.bbox.center().distance(&c)))
        .filter(|(_, d)| *d <= alpha_d)
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
}

pub fn associate(persons: &[TrackedBox], bags: &[TrackedBox], cfg: &AssocConfig) -> Result<AssociationLedger> {
    cfg.validate()?;
    let persons = by_frame(persons);
    let bags = by_frame(bags);
    let mut ledger = AssociationLedger::default();
    let none = Vec::new();
    for (frame, frame_bags) in &bags {
        let present = persons.get(frame).unwrap_or(&none);
        for bag in frame_bags {
            if ledger.entries.contains_key(&bag.label) {
                continue;
            }
            match nearest(bag, present, cfg.alpha_d) {
                Some((person, distance)) => {
                    ledger.insert(LedgerEntry {
                        person,
                        bag: bag.label,
                        frame: *frame,
                        distance,
                    });
                }
                None => ledger.mark_unassociated(bag.label, *frame),
            }
        }
    }
    Ok(ledger)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalEvent {
    pub bag: Label,
    /// Last frame the bag was tracked.
    pub frame: FrameIdx,
    pub owner: Option<Label>,
    /// Person nearest to the bag at that frame, within `alpha_d`.
    pub carrier: Option<Label>,
    pub matched: bool,
}

/// Compare each bag's ledger owner with the person next to it when its track
/// ends.
pub fn verify_retrieval(
    ledger: &AssociationLedger,
    persons: &[TrackedBox],
    bags: &[TrackedBox],
    cfg: &AssocConfig,
) -> Result<Vec<RetrievalEvent>> {
    cfg.validate()?;
    let persons = by_frame(persons);
    let mut last: BTreeMap<Label, &TrackedBox> = BTreeMap::new();
    for b in bags {
        let e = last.entry(b.label).or_insert(b);
        if b.frame > e.frame {
            *e = b;
        }
    }
    let none = Vec::new();
    Ok(last
        .values()
        .map(|bag| {
            let carrier = nearest(bag, persons.get(&bag.frame).unwrap_or(&none), cfg.alpha_d).map(|x| x.0);
            let owner = ledger.owner_of(bag.label);
            RetrievalEvent {
                bag: bag.label,
                frame: bag.frame,
                owner,
                carrier,
                matched: owner.is_some() && owner == carrier,
            }
        })
        .collect())
}

/// Fraction of `truth` bag-to-owner pairs reproduced by the ledger after
/// mapping labels through `bag_map` and `person_map`.
pub fn ownership_accuracy(
    ledger: &AssociationLedger,
    truth: &BTreeMap<u32, u32>,
    bag_map: &BTreeMap<Label, u32>,
    person_map: &BTreeMap<Label, u32>,
) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let mut found: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for e in ledger.entries() {
        if let (Some(b), Some(p)) = (bag_map.get(&e.bag), person_map.get(&e.person)) {
            found.entry(*b).or_default().insert(*p);
        }
    }
    let correct = truth
        .iter()
        .filter(|(b, p)| found.get(b).is_some_and(|s| s.len() == 1 && s.contains(p)))
        .count();
    correct as f64 / truth.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use crate::ObjectClass;

    fn tb(frame: FrameIdx, label: Label, cls: ObjectClass, x: f64, y: f64) -> TrackedBox {
        TrackedBox {
            frame,
            camera: 0,
            cls,
            label,
            bbox: BBox::new(x, y, 20.0, 20.0).unwrap(),
        }
    }

    #[test]
    fn nearest_person_wins() {
        let persons = [
            tb(0, 1, ObjectClass::Person, 80.0, 0.0),
            tb(0, 2, ObjectClass::Person, -120.0, 0.0),
        ];
        let bags = [tb(0, 5, ObjectClass::Bag, 0.0, 0.0)];
        let l = associate(&persons, &bags, &AssocConfig::default()).unwrap();
        assert_eq!(l.owner_of(5), Some(1));
        assert_eq!(l.get(5).unwrap().distance, 80.0);
    }

    #[test]
    fn out_of_range_stays_unassociated() {
        let persons = [tb(0, 1, ObjectClass::Person, 500.0, 0.0)];
        let bags = [
            tb(0, 5, ObjectClass::Bag, 0.0, 0.0),
            tb(1, 5, ObjectClass::Bag, 0.0, 0.0),
        ];
        let l = associate(&persons, &bags, &AssocConfig::default()).unwrap();
        assert!(l.is_empty());
        assert_eq!(l.unassociated().collect::<Vec<_>>(), vec![(5, 0)]);
    }

    #[test]
    fn retry_on_later_frames_then_freeze() {
        let persons = [
            tb(0, 1, ObjectClass::Person, 500.0, 0.0),
            tb(1, 1, ObjectClass::Person, 50.0, 0.0),
            tb(2, 2, ObjectClass::Person, 10.0, 0.0),
        ];
        let bags = [0, 1, 2].map(|f| tb(f, 5, ObjectClass::Bag, 0.0, 0.0));
        let l = associate(&persons, &bags, &AssocConfig::default()).unwrap();
        let e = l.get(5).unwrap();
        assert_eq!((e.person, e.frame), (1, 1));
        assert_eq!(l.unassociated().count(), 0);
    }

    #[test]
    fn retrieval_report() {
        let persons = [
            tb(0, 1, ObjectClass::Person, 30.0, 0.0),
            tb(9, 2, ObjectClass::Person, 30.0, 0.0),
        ];
        let bags = [
            tb(0, 5, ObjectClass::Bag, 0.0, 0.0),
            tb(9, 5, ObjectClass::Bag, 0.0, 0.0),
        ];
        let cfg = AssocConfig::default();
        let l = associate(&persons, &bags, &cfg).unwrap();
        let ev = verify_retrieval(&l, &persons, &bags, &cfg).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].carrier, Some(2));
        assert!(!ev[0].matched);
    }

    #[test]
    fn insert_is_write_once() {
        let mut l = AssociationLedger::default();
        let e = LedgerEntry {
            person: 1,
            bag: 2,
            frame: 0,
            distance: 3.0,
        };
        assert!(l.insert(e));
        assert!(!l.insert(LedgerEntry { person: 9, ..e }));
        assert_eq!(l.owner_of(2), Some(1));
    }
}
