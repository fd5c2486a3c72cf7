//! Developmental pruning: usage frequencies, chance-level disposal of rare
//! features, substitution inside stored objects, and survival bookkeeping.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::it::ObjectRepository;
use crate::v4::{FeatureRepository, PatchVector, Prototype, PATCH_LEN};

/// Birth and survival history of one live feature, keyed by its current id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureUsage {
    pub birth_stimulus: usize,
    pub survived: u64,
}

#[derive(Debug, Clone, Default)]
pub struct UsageLedger {
    pub entries: BTreeMap<u32, FeatureUsage>,
}

impl UsageLedger {
    pub fn register(&mut self, id: u32, birth_stimulus: usize) {
        self.entries.insert(
            id,
            FeatureUsage {
                birth_stimulus,
                survived: 0,
            },
        );
    }

    /// Live features born at the given stimulus.
    pub fn cohort_size(&self, birth_stimulus: usize) -> usize {
        self.entries
            .values()
            .filter(|u| u.birth_stimulus == birth_stimulus)
            .count()
    }
}

/// Per-feature usage frequency: tau normalized over the live dictionary.
pub fn relative_frequency(repo: &FeatureRepository) -> Result<BTreeMap<u32, f64>> {
    let total: u64 = repo.prototypes.iter().map(|p| p.tau).sum();
    if total == 0 {
        return Err(Error::ZeroUsage);
    }
    Ok(repo
        .prototypes
        .iter()
        .map(|p| (p.id, p.tau as f64 / total as f64))
        .collect())
}

fn squared_distance(a: &PatchVector, b: &PatchVector) -> f64 {
    let mut acc = 0i64;
    for k in 0..PATCH_LEN {
        let d = a[k] as i64 - b[k] as i64;
        acc += d * d;
    }
    acc as f64
}

/// Where each pre-disposal id went: survivors to their new dense id,
/// disposed features to the new id of their nearest surviving vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemapEntry {
    pub new_id: u32,
    pub survived: bool,
}

#[derive(Debug, Clone)]
pub struct DisposalEvent {
    pub before: usize,
    pub survived: usize,
    pub disposed: Vec<u32>,
    pub remap: BTreeMap<u32, RemapEntry>,
    /// Set when every feature sat at or below chance and one was retained to
    /// keep the dictionary alive.
    pub guard: bool,
}

/// Removes features whose usage frequency is at or below chance (1/F over
/// the pre-disposal dictionary), renumbering survivors densely. If the rule
/// would empty the dictionary, the top feature by (tau, lowest id) survives.
pub fn dispose(
    repo: &mut FeatureRepository,
    ledger: &mut UsageLedger,
    reset_counters: bool,
) -> Result<DisposalEvent> {
    let before = repo.len();
    if before == 0 {
        return Err(Error::EmptyRepository);
    }
    let fr = relative_frequency(repo)?;
    let chance = 1.0 / before as f64;
    let mut disposed: Vec<u32> = repo
        .prototypes
        .iter()
        .filter(|p| fr[&p.id] <= chance)
        .map(|p| p.id)
        .collect();
    let mut guard = false;
    if disposed.len() == before {
        let keep = repo
            .prototypes
            .iter()
            .max_by(|a, b| a.tau.cmp(&b.tau).then(b.id.cmp(&a.id)))
            .map(|p| p.id)
            .unwrap();
        disposed.retain(|&id| id != keep);
        guard = true;
    }

    let is_disposed = |id: u32| disposed.binary_search(&id).is_ok();
    let survivors: Vec<Prototype> = repo
        .prototypes
        .iter()
        .filter(|p| !is_disposed(p.id))
        .cloned()
        .collect();

    let mut remap = BTreeMap::new();
    for (k, p) in survivors.iter().enumerate() {
        remap.insert(
            p.id,
            RemapEntry {
                new_id: k as u32 + 1,
                survived: true,
            },
        );
    }
    for &old in &disposed {
        let vector = repo.get(old).unwrap().vector;
        let nearest_old = survivors
            .iter()
            .map(|s| (squared_distance(&vector, &s.vector), s.id))
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)))
            .map(|(_, id)| id)
            .unwrap();
        remap.insert(
            old,
            RemapEntry {
                new_id: remap[&nearest_old].new_id,
                survived: false,
            },
        );
    }

    let mut new_ledger = BTreeMap::new();
    for p in &survivors {
        if let Some(usage) = ledger.entries.get(&p.id) {
            new_ledger.insert(
                remap[&p.id].new_id,
                FeatureUsage {
                    birth_stimulus: usage.birth_stimulus,
                    survived: usage.survived + 1,
                },
            );
        }
    }
    ledger.entries = new_ledger;

    repo.prototypes = survivors
        .into_iter()
        .enumerate()
        .map(|(k, mut p)| {
            p.id = k as u32 + 1;
            if reset_counters {
                p.tau = 0;
            }
            p
        })
        .collect();

    Ok(DisposalEvent {
        before,
        survived: repo.len(),
        disposed,
        remap,
        guard,
    })
}

/// Rewrites every stored object map through the disposal remap and refreshes
/// each object's distance scale.
pub fn substitute(objects: &mut ObjectRepository, event: &DisposalEvent) -> Result<()> {
    let metric = objects.metric;
    for obj in &mut objects.objects {
        for entry in obj.map.iter_mut() {
            if *entry == 0 {
                continue;
            }
            let mapped = event.remap.get(entry).ok_or_else(|| {
                Error::OutOfRange(format!("object {} references unknown feature {}", obj.id, entry))
            })?;
            *entry = mapped.new_id;
        }
        obj.rescale(metric);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRow {
    pub stimulus: usize,
    pub before: usize,
    pub survived: usize,
    pub first_cohort: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SurvivalReport {
    pub rows: Vec<SurvivalRow>,
}

impl SurvivalReport {
    pub fn record(
        &mut self,
        stimulus: usize,
        before: usize,
        survived: usize,
        first_cohort: usize,
    ) -> Result<()> {
        if self.rows.iter().any(|r| r.stimulus == stimulus) {
            return Err(Error::DuplicateStimulus(stimulus));
        }
        let rate = if before == 0 {
            1.0
        } else {
            survived as f64 / before as f64
        };
        self.rows.push(SurvivalRow {
            stimulus,
            before,
            survived,
            first_cohort,
            rate,
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::it::MapMetric;

    fn repo_with(taus: &[(PatchVector, u64)]) -> FeatureRepository {
        // Fixtures bypass the admission gate: disposal semantics do not
        // depend on how the dictionary was grown.
        let mut text = String::new();
        for (k, (v, tau)) in taus.iter().enumerate() {
            let codes: Vec<String> = v.iter().map(|c| c.to_string()).collect();
            text.push_str(&format!("{} {} {}\n", k + 1, codes.join(" "), tau));
        }
        crate::v4::parse_repository(&text, 0.1, 0.1, false).unwrap()
    }

    #[test]
    fn frequencies_normalize() {
        let repo = repo_with(&[([4; 9], 3), ([1, 0, 0, 0, 0, 0, 0, 0, 0], 1)]);
        let fr = relative_frequency(&repo).unwrap();
        assert_eq!(fr[&1], 0.75);
        assert_eq!(fr[&2], 0.25);
    }

    #[test]
    fn zero_usage_is_an_error() {
        let repo = repo_with(&[([4; 9], 0)]);
        assert!(matches!(relative_frequency(&repo), Err(Error::ZeroUsage)));
    }

    #[test]
    fn below_chance_features_are_disposed() {
        let mut repo = repo_with(&[([4; 9], 3), ([1, 0, 0, 0, 0, 0, 0, 0, 0], 1)]);
        let mut ledger = UsageLedger::default();
        ledger.register(1, 1);
        ledger.register(2, 1);
        let event = dispose(&mut repo, &mut ledger, false).unwrap();
        assert_eq!(event.disposed, vec![2]);
        assert_eq!(repo.len(), 1);
        assert_eq!(repo.prototypes[0].vector, [4; 9]);
        assert!(!event.guard);
        assert_eq!(ledger.entries[&1].survived, 1);
    }

    #[test]
    fn uniform_usage_trips_the_guard() {
        let mut repo = repo_with(&[
            ([4; 9], 2),
            ([1, 0, 0, 0, 0, 0, 0, 0, 0], 2),
            ([0, 0, 0, 0, 0, 0, 0, 0, 2], 2),
        ]);
        let mut ledger = UsageLedger::default();
        for id in 1..=3 {
            ledger.register(id, 1);
        }
        let event = dispose(&mut repo, &mut ledger, false).unwrap();
        assert!(event.guard);
        assert_eq!(repo.len(), 1);
        // Tie on tau resolves to the lowest id.
        assert_eq!(repo.prototypes[0].vector, [4; 9]);
    }

    #[test]
    fn survivors_renumber_densely_and_keep_history() {
        let mut repo = repo_with(&[
            ([4; 9], 1),
            ([1, 0, 0, 0, 0, 0, 0, 0, 0], 5),
            ([0, 0, 0, 0, 0, 0, 0, 0, 2], 6),
        ]);
        let mut ledger = UsageLedger::default();
        ledger.register(1, 1);
        ledger.register(2, 1);
        ledger.register(3, 2);
        let event = dispose(&mut repo, &mut ledger, false).unwrap();
        assert_eq!(event.disposed, vec![1]);
        assert_eq!(repo.prototypes[0].id, 1);
        assert_eq!(repo.prototypes[0].vector, [1, 0, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(repo.prototypes[1].id, 2);
        assert_eq!(repo.prototypes[1].tau, 6, "counters persist by default");
        assert_eq!(ledger.cohort_size(1), 1);
        assert_eq!(ledger.cohort_size(2), 1);
    }

    #[test]
    fn counters_reset_when_configured() {
        let mut repo = repo_with(&[([4; 9], 1), ([1, 0, 0, 0, 0, 0, 0, 0, 0], 5)]);
        let mut ledger = UsageLedger::default();
        ledger.register(1, 1);
        ledger.register(2, 1);
        dispose(&mut repo, &mut ledger, true).unwrap();
        assert!(repo.prototypes.iter().all(|p| p.tau == 0));
    }

    #[test]
    fn substitution_rewrites_disposed_references() {
        let mut repo = repo_with(&[
            ([4; 9], 10),
            ([4, 4, 4, 4, 4, 4, 4, 4, 0], 1), // nearest survivor is feature 1
            ([1, 0, 0, 0, 0, 0, 0, 0, 0], 10),
        ]);
        let mut ledger = UsageLedger::default();
        for id in 1..=3 {
            ledger.register(id, 1);
        }
        let mut objects = ObjectRepository::new(0.67, MapMetric::SquaredId);
        objects
            .store(Grid::from_vec(2, 2, vec![2, 0, 3, 1]))
            .unwrap();
        let event = dispose(&mut repo, &mut ledger, false).unwrap();
        assert_eq!(event.disposed, vec![2]);
        substitute(&mut objects, &event).unwrap();
        let o = objects.get(1).unwrap();
        // Disposed feature 2 resolves to survivor 1; survivor 3 renumbers to 2.
        assert_eq!(o.map, Grid::from_vec(2, 2, vec![1, 0, 2, 1]));
        assert_eq!(o.dist_it, 1.0 + 4.0 + 1.0);
        for &e in o.map.iter() {
            assert!(e as usize <= repo.len());
        }
    }

    #[test]
    fn substitution_preserves_the_zero_pattern() {
        let mut repo = repo_with(&[([4; 9], 9), ([1, 0, 0, 0, 0, 0, 0, 0, 0], 1)]);
        let mut ledger = UsageLedger::default();
        ledger.register(1, 1);
        ledger.register(2, 1);
        let mut objects = ObjectRepository::new(0.67, MapMetric::SquaredId);
        objects
            .store(Grid::from_vec(1, 3, vec![2, 0, 1]))
            .unwrap();
        let event = dispose(&mut repo, &mut ledger, false).unwrap();
        substitute(&mut objects, &event).unwrap();
        let o = objects.get(1).unwrap();
        assert_eq!(o.map[(0, 1)], 0);
        assert_ne!(o.map[(0, 0)], 0);
    }

    #[test]
    fn survival_rows_reject_duplicates() {
        let mut report = SurvivalReport::default();
        report.record(1, 40, 12, 12).unwrap();
        assert!((report.rows[0].rate - 0.3).abs() < 1e-15);
        assert!(matches!(
            report.record(1, 10, 5, 5),
            Err(Error::DuplicateStimulus(1))
        ));
    }

    #[test]
    fn disposal_matches_the_direct_filter_on_random_ledgers() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let n = rng.gen_range(1..=12);
            let mut repo = FeatureRepository::new(0.1, 0.1, false);
            let mut made = 0;
            let mut attempts = 0;
            while made < n && attempts < 200 {
                attempts += 1;
                let mut v = [0u8; 9];
                for c in v.iter_mut() {
                    *c = rng.gen_range(0..=4);
                }
                if v.iter().all(|&c| c == 0) {
                    continue;
                }
                if let Ok((_, true)) = repo.admit(&v) {
                    made += 1;
                }
            }
            let f = repo.len();
            let mut total = 0u64;
            for p in repo.prototypes.iter_mut() {
                p.tau = rng.gen_range(0..6);
                total += p.tau;
            }
            if total == 0 {
                repo.prototypes[0].tau = 1;
                total = 1;
            }
            let expected: Vec<u32> = {
                let mut ids: Vec<u32> = repo
                    .prototypes
                    .iter()
                    .filter(|p| p.tau as f64 / total as f64 <= 1.0 / f as f64)
                    .map(|p| p.id)
                    .collect();
                if ids.len() == f {
                    let keep = repo
                        .prototypes
                        .iter()
                        .max_by(|a, b| a.tau.cmp(&b.tau).then(b.id.cmp(&a.id)))
                        .unwrap()
                        .id;
                    ids.retain(|&i| i != keep);
                }
                ids
            };
            let mut ledger = UsageLedger::default();
            for p in &repo.prototypes {
                ledger.register(p.id, 1);
            }
            let event = dispose(&mut repo, &mut ledger, false).unwrap();
            assert_eq!(event.disposed, expected);
        }
    }
}
