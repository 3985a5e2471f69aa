//! Hotness-ordered page placement across ranks.
//!
//! At an epoch boundary the MQ hotness order is cut into `R` groups of `C`
//! pages, each group is assigned to the rank it overlaps most (maximum-weight
//! assignment), and the resulting moves are scheduled as segments.

mod matching;
mod schedule;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::mq::MqStructure;

pub use matching::max_weight_assignment;
pub use schedule::{eulerian_schedule, Migration, MigrationCost, MigrationGraph, MigrationSchedule};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PlacementError {
    #[error("{pages} pages do not fit in {ranks} ranks of {capacity} pages")]
    CapacityOverflow { pages: usize, ranks: usize, capacity: usize },
    #[error("rank {rank} out of range for {ranks} ranks")]
    RankOutOfRange { rank: usize, ranks: usize },
    #[error("page {0} is not placed")]
    UnplacedPage(u64),
    #[error("page {0} is already placed")]
    AlreadyPlaced(u64),
    #[error("expected {expected} groups, got {got}")]
    GroupCount { expected: usize, got: usize },
    #[error("rank count must be positive")]
    NoRanks,
    #[error("migration invariant violated: {0}")]
    Invariant(String),
}

/// Default rank of a page before any migration.
pub fn interleave_map(page: u64, ranks: usize) -> usize {
    (page % ranks as u64) as usize
}

/// Which rank holds each allocated page.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    capacity: usize,
    rank_of_page: BTreeMap<u64, usize>,
    pages_of_rank: Vec<BTreeSet<u64>>,
}

impl Placement {
    pub fn new(ranks: usize, capacity: usize) -> Result<Self, PlacementError> {
        if ranks == 0 {
            return Err(PlacementError::NoRanks);
        }
        Ok(Self { capacity, rank_of_page: BTreeMap::new(), pages_of_rank: vec![BTreeSet::new(); ranks] })
    }

    /// Placement with `sets[r]` on rank `r`.
    pub fn from_sets(capacity: usize, sets: &[Vec<u64>]) -> Result<Self, PlacementError> {
        let mut p = Self::new(sets.len(), capacity)?;
        for (r, pages) in sets.iter().enumerate() {
            if pages.len() > capacity {
                return Err(PlacementError::CapacityOverflow { pages: pages.len(), ranks: 1, capacity });
            }
            for &page in pages {
                if p.rank_of_page.insert(page, r).is_some() {
                    return Err(PlacementError::AlreadyPlaced(page));
                }
                p.pages_of_rank[r].insert(page);
            }
        }
        Ok(p)
    }

    pub fn ranks(&self) -> usize {
        self.pages_of_rank.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.rank_of_page.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rank_of_page.is_empty()
    }

    pub fn rank_of(&self, page: u64) -> Option<usize> {
        self.rank_of_page.get(&page).copied()
    }

    pub fn pages_of(&self, rank: usize) -> &BTreeSet<u64> {
        &self.pages_of_rank[rank]
    }

    /// First-touch allocation: the interleaved home rank if it has room,
    /// else the least-loaded rank (lowest index on ties).
    pub fn allocate(&mut self, page: u64) -> Result<usize, PlacementError> {
        if self.rank_of_page.contains_key(&page) {
            return Err(PlacementError::AlreadyPlaced(page));
        }
        let home = interleave_map(page, self.ranks());
        let rank = if self.pages_of_rank[home].len() < self.capacity {
            home
        } else {
            let (r, set) = self
                .pages_of_rank
                .iter()
                .enumerate()
                .min_by_key(|(r, s)| (s.len(), *r))
                .expect("at least one rank");
            if set.len() >= self.capacity {
                return Err(PlacementError::CapacityOverflow {
                    pages: self.len() + 1,
                    ranks: self.ranks(),
                    capacity: self.capacity,
                });
            }
            r
        };
        self.rank_of_page.insert(page, rank);
        self.pages_of_rank[rank].insert(page);
        Ok(rank)
    }

    /// Moves pages along `schedule`, which must start from this placement.
    pub fn apply(&mut self, schedule: &MigrationSchedule) -> Result<(), PlacementError> {
        for m in schedule.migrations() {
            self.move_page(m)?;
        }
        if self.pages_of_rank.iter().any(|s| s.len() > self.capacity) {
            return Err(PlacementError::Invariant("rank over capacity after migration".into()));
        }
        Ok(())
    }

    /// Places a new page on `rank` without checking capacity.
    pub fn insert(&mut self, page: u64, rank: usize) -> Result<(), PlacementError> {
        if rank >= self.ranks() {
            return Err(PlacementError::RankOutOfRange { rank, ranks: self.ranks() });
        }
        if self.rank_of_page.insert(page, rank).is_some() {
            return Err(PlacementError::AlreadyPlaced(page));
        }
        self.pages_of_rank[rank].insert(page);
        Ok(())
    }

    /// Moves one page without checking capacity; a schedule executed one
    /// segment at a time may overfill a rank until it completes.
    pub fn move_page(&mut self, m: &Migration) -> Result<(), PlacementError> {
        if self.rank_of(m.page) != Some(m.src) {
            return Err(PlacementError::Invariant(format!("page {} is not on rank {}", m.page, m.src)));
        }
        if m.dst >= self.ranks() {
            return Err(PlacementError::RankOutOfRange { rank: m.dst, ranks: self.ranks() });
        }
        self.pages_of_rank[m.src].remove(&m.page);
        self.pages_of_rank[m.dst].insert(m.page);
        self.rank_of_page.insert(m.page, m.dst);
        Ok(())
    }

    pub fn is_consistent(&self) -> bool {
        let total: usize = self.pages_of_rank.iter().map(BTreeSet::len).sum();
        total == self.rank_of_page.len()
            && self.rank_of_page.iter().all(|(p, &r)| self.pages_of_rank[r].contains(p))
            && self.pages_of_rank.iter().all(|s| s.len() <= self.capacity)
    }
}

/// Translation from page to its current rank; absent pages sit at their
/// interleaved home rank.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemapTable {
    ranks: usize,
    moved: BTreeMap<u64, usize>,
}

impl RemapTable {
    pub fn new(ranks: usize) -> Self {
        Self { ranks, moved: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.moved.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moved.is_empty()
    }

    pub fn set(&mut self, page: u64, rank: usize) {
        if rank == interleave_map(page, self.ranks) {
            self.moved.remove(&page);
        } else {
            self.moved.insert(page, rank);
        }
    }
}

pub fn remap_lookup(remap: &RemapTable, page: u64) -> usize {
    remap.moved.get(&page).copied().unwrap_or_else(|| interleave_map(page, remap.ranks))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MigrationOutcome {
    pub pages: usize,
    pub segments: usize,
    pub delay_cycles: u64,
    pub energy: f64,
}

/// Records every move of `schedule` in `remap` and prices it.
pub fn apply_schedule(remap: &mut RemapTable, schedule: &MigrationSchedule, cost: &MigrationCost) -> MigrationOutcome {
    for m in schedule.migrations() {
        remap.set(m.page, m.dst);
    }
    MigrationOutcome {
        pages: schedule.num_migrations(),
        segments: schedule.segments.len(),
        delay_cycles: cost.schedule_cycles(schedule),
        energy: cost.schedule_energy(schedule),
    }
}

/// Cuts the MQ hotness order into `ranks` groups of `capacity` pages,
/// hottest first; trailing groups may be partial or empty.
pub fn group_pages(mq: &MqStructure, ranks: usize, capacity: usize) -> Result<Vec<Vec<u64>>, PlacementError> {
    group_ordered(&mq.hotness_order(), ranks, capacity)
}

pub fn group_ordered(order: &[u64], ranks: usize, capacity: usize) -> Result<Vec<Vec<u64>>, PlacementError> {
    if ranks == 0 {
        return Err(PlacementError::NoRanks);
    }
    if order.len() > ranks.saturating_mul(capacity) {
        return Err(PlacementError::CapacityOverflow { pages: order.len(), ranks, capacity });
    }
    let mut groups: Vec<Vec<u64>> = order.chunks(capacity.max(1)).map(<[u64]>::to_vec).collect();
    groups.resize(ranks, Vec::new());
    Ok(groups)
}

/// `overlap[g][r]`: pages of group `g` already on rank `r`.
pub fn overlap_matrix(prev: &Placement, groups: &[Vec<u64>]) -> Vec<Vec<i64>> {
    groups
        .iter()
        .map(|g| {
            let mut row = vec![0i64; prev.ranks()];
            for &p in g {
                if let Some(r) = prev.rank_of(p) {
                    row[r] += 1;
                }
            }
            row
        })
        .collect()
}

/// Group-to-rank assignment maximizing the pages that stay in place.
pub fn match_groups_to_ranks(prev: &Placement, groups: &[Vec<u64>]) -> Result<Vec<usize>, PlacementError> {
    if groups.len() != prev.ranks() {
        return Err(PlacementError::GroupCount { expected: prev.ranks(), got: groups.len() });
    }
    Ok(max_weight_assignment(&overlap_matrix(prev, groups)))
}

/// One edge per page whose group lands on a different rank.
pub fn build_migration_graph(prev: &Placement, groups: &[Vec<u64>], mapping: &[usize]) -> Result<MigrationGraph, PlacementError> {
    if groups.len() != mapping.len() {
        return Err(PlacementError::GroupCount { expected: mapping.len(), got: groups.len() });
    }
    let mut graph = MigrationGraph::new(prev.ranks());
    for (g, pages) in groups.iter().enumerate() {
        let dst = mapping[g];
        if dst >= prev.ranks() {
            return Err(PlacementError::RankOutOfRange { rank: dst, ranks: prev.ranks() });
        }
        for &page in pages {
            let src = prev.rank_of(page).ok_or(PlacementError::UnplacedPage(page))?;
            if src != dst {
                graph.edges.push(Migration { src, dst, page });
            }
        }
    }
    Ok(graph)
}

/// Groups, matches and schedules in one step.
pub fn plan_migration(prev: &Placement, order: &[u64]) -> Result<MigrationSchedule, PlacementError> {
    let groups = group_ordered(order, prev.ranks(), prev.capacity())?;
    let mapping = match_groups_to_ranks(prev, &groups)?;
    let graph = build_migration_graph(prev, &groups, &mapping)?;
    eulerian_schedule(&graph)
}
