//! Migration graphs and their decomposition into concurrent segments.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::PlacementError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Migration {
    pub src: usize,
    pub dst: usize,
    pub page: u64,
}

/// Directed multigraph over ranks; one edge per migrating page.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationGraph {
    pub ranks: usize,
    pub edges: Vec<Migration>,
}

impl MigrationGraph {
    pub fn new(ranks: usize) -> Self {
        Self { ranks, edges: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn out_degree(&self, rank: usize) -> usize {
        self.edges.iter().filter(|e| e.src == rank).count()
    }

    pub fn in_degree(&self, rank: usize) -> usize {
        self.edges.iter().filter(|e| e.dst == rank).count()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationSchedule {
    /// Each segment is a simple path or cycle whose moves run concurrently.
    pub segments: Vec<Vec<Migration>>,
}

impl MigrationSchedule {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn num_migrations(&self) -> usize {
        self.segments.iter().map(Vec::len).sum()
    }

    pub fn migrations(&self) -> impl Iterator<Item = &Migration> {
        self.segments.iter().flatten()
    }

    /// Every rank is a source at most once and a destination at most once
    /// within each segment.
    pub fn is_valid(&self) -> bool {
        self.segments.iter().all(|seg| segment_is_simple(seg))
    }

    /// `segment,src,dst,page` rows.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["segment", "src", "dst", "page"])?;
        for (i, seg) in self.segments.iter().enumerate() {
            for m in seg {
                w.write_record([i.to_string(), m.src.to_string(), m.dst.to_string(), m.page.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn segment_is_simple(seg: &[Migration]) -> bool {
    let mut srcs: Vec<usize> = seg.iter().map(|m| m.src).collect();
    let mut dsts: Vec<usize> = seg.iter().map(|m| m.dst).collect();
    srcs.sort_unstable();
    dsts.sort_unstable();
    srcs.windows(2).all(|w| w[0] != w[1]) && dsts.windows(2).all(|w| w[0] != w[1])
}

/// Covers every edge exactly once with trails (from surplus ranks first,
/// then closed walks), and cuts each trail into maximal runs that are
/// simple paths or cycles. Longer segments come first.
pub fn eulerian_schedule(graph: &MigrationGraph) -> Result<MigrationSchedule, PlacementError> {
    let n = graph.ranks;
    let mut out: Vec<VecDeque<Migration>> = vec![VecDeque::new(); n];
    let mut balance = vec![0i64; n];
    for e in &graph.edges {
        if e.src >= n || e.dst >= n {
            return Err(PlacementError::RankOutOfRange { rank: e.src.max(e.dst), ranks: n });
        }
        if e.src == e.dst {
            return Err(PlacementError::Invariant(format!("self-loop on rank {} for page {}", e.src, e.page)));
        }
        out[e.src].push_back(*e);
        balance[e.src] += 1;
        balance[e.dst] -= 1;
    }

    let mut trails: Vec<Vec<Migration>> = Vec::new();
    let walk = |start: usize, out: &mut Vec<VecDeque<Migration>>| {
        let mut trail = Vec::new();
        let mut at = start;
        while let Some(e) = out[at].pop_front() {
            at = e.dst;
            trail.push(e);
        }
        trail
    };
    for start in 0..n {
        while balance[start] > 0 && !out[start].is_empty() {
            let trail = walk(start, &mut out);
            let end = trail.last().expect("start has an out-edge").dst;
            balance[start] -= 1;
            balance[end] += 1;
            trails.push(trail);
        }
    }
    for start in 0..n {
        while !out[start].is_empty() {
            trails.push(walk(start, &mut out));
        }
    }

    let mut segments = Vec::new();
    for trail in trails {
        let mut seg: Vec<Migration> = Vec::new();
        for e in trail {
            let clash = seg.iter().any(|m| m.src == e.src || m.dst == e.dst);
            if clash {
                segments.push(std::mem::take(&mut seg));
            }
            seg.push(e);
        }
        if !seg.is_empty() {
            segments.push(seg);
        }
    }
    segments.sort_by_key(|s| std::cmp::Reverse(s.len()));
    let schedule = MigrationSchedule { segments };

    if !schedule.is_valid() {
        return Err(PlacementError::Invariant("segment repeats a rank".into()));
    }
    let mut covered: Vec<Migration> = schedule.migrations().copied().collect();
    let mut expected = graph.edges.clone();
    covered.sort_unstable();
    expected.sort_unstable();
    if covered != expected {
        return Err(PlacementError::Invariant("schedule does not cover the graph".into()));
    }
    Ok(schedule)
}

/// Per-page migration cost; a segment costs one page move when run
/// concurrently and one per edge when serialized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MigrationCost {
    pub cycles_per_page: u64,
    pub energy_per_page: f64,
    pub concurrent: bool,
}

impl Default for MigrationCost {
    fn default() -> Self {
        // 2048 memory cycles at 4 CPU cycles each; ranks stay at ACT power
        Self { cycles_per_page: 8192, energy_per_page: 8192.0, concurrent: true }
    }
}

impl MigrationCost {
    pub fn segment_cycles(&self, segment: &[Migration]) -> u64 {
        if segment.is_empty() {
            return 0;
        }
        let moves = if self.concurrent { 1 } else { segment.len() as u64 };
        moves * self.cycles_per_page
    }

    pub fn schedule_cycles(&self, schedule: &MigrationSchedule) -> u64 {
        schedule.segments.iter().map(|s| self.segment_cycles(s)).sum()
    }

    pub fn schedule_energy(&self, schedule: &MigrationSchedule) -> f64 {
        schedule.num_migrations() as f64 * self.energy_per_page
    }
}
