//! Multi-Queue (MQ) page hotness tracking.
//!
//! `M` LRU queues; queue `i` holds pages whose cumulative access count has
//! reached `2^i`. Pages that stay untouched past their expiration time sink
//! one queue per expiration sweep. Within a queue the head is the most
//! recently touched page.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub const DEFAULT_QUEUES: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageDescriptor {
    pub page: u64,
    pub freq_counter: u64,
    pub queue_index: usize,
    pub expiration_time: u64,
    pub last_access: u64,
    /// Accesses since the last slot boundary.
    pub slot_accesses: u64,
    /// Accesses during the previous complete slot.
    pub last_slot_accesses: u64,
    stamp: u64,
}

#[derive(Clone, Debug)]
pub struct MqStructure {
    num_queues: usize,
    lifetime: u64,
    descriptors: HashMap<u64, PageDescriptor>,
    // per queue: recency stamp -> page; the largest stamp is the head
    queues: Vec<BTreeMap<u64, u64>>,
    next_stamp: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MqLevel {
    pub level: usize,
    pub pages: usize,
    /// Mean `freq_counter`; `None` for an empty queue.
    pub mean_frequency: Option<f64>,
}

impl MqStructure {
    pub fn new(num_queues: usize, lifetime: u64) -> Self {
        assert!(num_queues >= 1, "MQ needs at least one queue");
        Self {
            num_queues,
            lifetime,
            descriptors: HashMap::new(),
            queues: vec![BTreeMap::new(); num_queues],
            next_stamp: 0,
        }
    }

    pub fn num_queues(&self) -> usize {
        self.num_queues
    }

    pub fn lifetime(&self) -> u64 {
        self.lifetime
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn get(&self, page: u64) -> Option<&PageDescriptor> {
        self.descriptors.get(&page)
    }

    fn counter_cap(&self) -> u64 {
        1u64 << self.num_queues.min(63)
    }

    fn stamp(&mut self) -> u64 {
        self.next_stamp += 1;
        self.next_stamp
    }

    /// Records an access to `page` at logical time `now`.
    pub fn on_access(&mut self, page: u64, now: u64) {
        let stamp = self.stamp();
        let cap = self.counter_cap();
        let top = self.num_queues - 1;
        let expiration = now.saturating_add(self.lifetime);
        match self.descriptors.get_mut(&page) {
            None => {
                self.descriptors.insert(
                    page,
                    PageDescriptor {
                        page,
                        freq_counter: 1,
                        queue_index: 0,
                        expiration_time: expiration,
                        last_access: now,
                        slot_accesses: 1,
                        last_slot_accesses: 0,
                        stamp,
                    },
                );
                self.queues[0].insert(stamp, page);
            }
            Some(d) => {
                self.queues[d.queue_index].remove(&d.stamp);
                d.freq_counter = (d.freq_counter + 1).min(cap);
                d.slot_accesses += 1;
                if d.queue_index < top && d.freq_counter >= 1u64 << (d.queue_index + 1) {
                    d.queue_index += 1;
                }
                d.stamp = stamp;
                d.expiration_time = expiration;
                d.last_access = now;
                self.queues[d.queue_index].insert(stamp, page);
            }
        }
    }

    /// Moves every descriptor with `expiration_time < now` down one queue.
    /// Queue-0 descriptors stay put but still get a fresh expiration time.
    pub fn expire(&mut self, now: u64) {
        let expiration = now.saturating_add(self.lifetime);
        for q in 0..self.num_queues {
            // Expiration times grow with the stamp inside a queue, so stale
            // entries form a prefix in stamp order.
            let stale: Vec<(u64, u64)> = self.queues[q]
                .iter()
                .map(|(&s, &p)| (s, p))
                .take_while(|(_, p)| self.descriptors[p].expiration_time < now)
                .collect();
            for (old_stamp, page) in stale {
                self.queues[q].remove(&old_stamp);
                let stamp = self.stamp();
                let d = self.descriptors.get_mut(&page).expect("queued page has a descriptor");
                d.queue_index = q.saturating_sub(1);
                d.stamp = stamp;
                d.expiration_time = expiration;
                self.queues[d.queue_index].insert(stamp, page);
            }
        }
    }

    /// Shifts the per-slot access counts; called at slot boundaries.
    pub fn roll_slot(&mut self) {
        for d in self.descriptors.values_mut() {
            d.last_slot_accesses = d.slot_accesses;
            d.slot_accesses = 0;
        }
    }

    /// Pages from the hottest queue down to queue 0, each queue head first.
    pub fn hotness_order(&self) -> Vec<u64> {
        self.queues
            .iter()
            .rev()
            .flat_map(|q| q.values().rev().copied())
            .collect()
    }

    /// Pages of one queue, head first.
    pub fn queue(&self, index: usize) -> Vec<u64> {
        self.queues[index].values().rev().copied().collect()
    }

    pub fn mq_level_report(&self) -> Vec<MqLevel> {
        self.queues
            .iter()
            .enumerate()
            .map(|(level, q)| {
                let total: u64 = q.values().map(|p| self.descriptors[p].freq_counter).sum();
                MqLevel {
                    level,
                    pages: q.len(),
                    mean_frequency: (!q.is_empty()).then(|| total as f64 / q.len() as f64),
                }
            })
            .collect()
    }

    #[cfg(test)]
    fn check_membership(&self) {
        let queued: usize = self.queues.iter().map(BTreeMap::len).sum();
        assert_eq!(queued, self.descriptors.len());
        for (q, queue) in self.queues.iter().enumerate() {
            for (s, p) in queue {
                let d = &self.descriptors[p];
                assert_eq!((d.queue_index, d.stamp), (q, *s));
            }
        }
    }
}
