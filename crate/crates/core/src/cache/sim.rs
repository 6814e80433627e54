//! Multi-level set-associative LRU cache simulator.
//!
//! Every level is write-back and, when configured, write-allocate. Fills
//! travel through every non-victim level on the way to L1. An inclusive
//! level back-invalidates the levels above when it evicts a line. A victim
//! last level is bypassed by fills from memory and receives every line
//! evicted from the level above it, clean or dirty.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};

use serde::{Deserialize, Serialize};

use super::stream::{address_stream, AccessKind};
use super::{link_name, LinkTraffic, Predictor, TrafficPrediction};
use crate::machine::{CacheLevelSpec, MachineModel};
use crate::stencil::{weight_arrays, GridDims, KernelIR};
use crate::{Error, Result};

#[derive(Default)]
struct LineHasher(u64);

impl Hasher for LineHasher {
    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 = (self.0 ^ *b as u64).wrapping_mul(0x100_0000_01b3);
        }
    }

    fn write_u64(&mut self, v: u64) {
        let h = v.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        self.0 = h ^ (h >> 29);
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

type LineMap = HashMap<u64, u32, BuildHasherDefault<LineHasher>>;

const NIL: u32 = u32::MAX;
const SMALL_WAYS: u64 = 32;

#[derive(Clone)]
struct Node {
    line: u64,
    dirty: bool,
    prev: u32,
    next: u32,
}

/// O(1) LRU list for highly associative sets.
struct LargeSet {
    nodes: Vec<Node>,
    map: LineMap,
    head: u32,
    tail: u32,
    free: Vec<u32>,
    ways: usize,
}

impl LargeSet {
    fn new(ways: usize) -> Self {
        LargeSet {
            nodes: Vec::with_capacity(ways),
            map: LineMap::with_capacity_and_hasher(ways, Default::default()),
            head: NIL,
            tail: NIL,
            free: Vec::new(),
            ways,
        }
    }

    fn unlink(&mut self, n: u32) {
        let (prev, next) = (self.nodes[n as usize].prev, self.nodes[n as usize].next);
        if prev != NIL {
            self.nodes[prev as usize].next = next;
        } else {
            self.head = next;
        }
        if next != NIL {
            self.nodes[next as usize].prev = prev;
        } else {
            self.tail = prev;
        }
    }

    fn push_front(&mut self, n: u32) {
        self.nodes[n as usize].prev = NIL;
        self.nodes[n as usize].next = self.head;
        if self.head != NIL {
            self.nodes[self.head as usize].prev = n;
        }
        self.head = n;
        if self.tail == NIL {
            self.tail = n;
        }
    }
}

enum Set {
    /// Least recently used first.
    Small(Vec<(u64, bool)>, usize),
    Large(Box<LargeSet>),
}

impl Set {
    fn new(ways: u64) -> Set {
        if ways <= SMALL_WAYS {
            Set::Small(Vec::with_capacity(ways as usize), ways as usize)
        } else {
            Set::Large(Box::new(LargeSet::new(ways as usize)))
        }
    }

    /// Looks up `line`, promoting it to most recently used on a hit.
    fn touch(&mut self, line: u64, make_dirty: bool) -> bool {
        match self {
            Set::Small(v, _) => match v.iter().rposition(|e| e.0 == line) {
                Some(pos) => {
                    let (l, d) = v.remove(pos);
                    v.push((l, d || make_dirty));
                    true
                }
                None => false,
            },
            Set::Large(s) => match s.map.get(&line).copied() {
                Some(n) => {
                    s.nodes[n as usize].dirty |= make_dirty;
                    if s.head != n {
                        s.unlink(n);
                        s.push_front(n);
                    }
                    true
                }
                None => false,
            },
        }
    }

    /// Marks a resident line dirty without changing its recency.
    fn mark_dirty(&mut self, line: u64) -> bool {
        match self {
            Set::Small(v, _) => match v.iter_mut().rev().find(|e| e.0 == line) {
                Some(e) => {
                    e.1 = true;
                    true
                }
                None => false,
            },
            Set::Large(s) => match s.map.get(&line) {
                Some(&n) => {
                    s.nodes[n as usize].dirty = true;
                    true
                }
                None => false,
            },
        }
    }

    fn contains(&self, line: u64) -> bool {
        match self {
            Set::Small(v, _) => v.iter().any(|e| e.0 == line),
            Set::Large(s) => s.map.contains_key(&line),
        }
    }

    fn remove(&mut self, line: u64) -> Option<bool> {
        match self {
            Set::Small(v, _) => {
                let pos = v.iter().rposition(|e| e.0 == line)?;
                Some(v.remove(pos).1)
            }
            Set::Large(s) => {
                let n = s.map.remove(&line)?;
                s.unlink(n);
                s.free.push(n);
                Some(s.nodes[n as usize].dirty)
            }
        }
    }

    /// Inserts a line that is not resident, returning the evicted line if the set was full.
    fn insert(&mut self, line: u64, dirty: bool) -> Option<(u64, bool)> {
        match self {
            Set::Small(v, ways) => {
                let evicted = if v.len() == *ways { Some(v.remove(0)) } else { None };
                v.push((line, dirty));
                evicted
            }
            Set::Large(s) => {
                let mut evicted = None;
                if s.map.len() == s.ways {
                    let t = s.tail;
                    s.unlink(t);
                    let node = &s.nodes[t as usize];
                    evicted = Some((node.line, node.dirty));
                    s.map.remove(&node.line);
                    s.free.push(t);
                }
                let n = match s.free.pop() {
                    Some(n) => {
                        s.nodes[n as usize] = Node {
                            line,
                            dirty,
                            prev: NIL,
                            next: NIL,
                        };
                        n
                    }
                    None => {
                        s.nodes.push(Node {
                            line,
                            dirty,
                            prev: NIL,
                            next: NIL,
                        });
                        (s.nodes.len() - 1) as u32
                    }
                };
                s.map.insert(line, n);
                s.push_front(n);
                evicted
            }
        }
    }

    fn len(&self) -> usize {
        match self {
            Set::Small(v, _) => v.len(),
            Set::Large(s) => s.map.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCounters {
    pub load_hits: u64,
    pub load_misses: u64,
    pub store_hits: u64,
    pub store_misses: u64,
    pub evictions: u64,
    pub writebacks: u64,
    /// Lines brought into this level from the next level or memory.
    pub fills_from_below: u64,
    /// Lines sent from this level to the next level or memory.
    pub lines_to_below: u64,
}

impl LevelCounters {
    pub fn hits(&self) -> u64 {
        self.load_hits + self.store_hits
    }

    pub fn misses(&self) -> u64 {
        self.load_misses + self.store_misses
    }
}

struct Level {
    spec: CacheLevelSpec,
    sets: Vec<Set>,
    counters: LevelCounters,
}

impl Level {
    fn set(&mut self, line: u64) -> &mut Set {
        let n = self.sets.len() as u64;
        &mut self.sets[(line % n) as usize]
    }

    fn set_ref(&self, line: u64) -> &Set {
        let n = self.sets.len() as u64;
        &self.sets[(line % n) as usize]
    }
}

pub struct CacheHierarchySim {
    levels: Vec<Level>,
    line_size: u64,
}

impl CacheHierarchySim {
    pub fn new(specs: &[CacheLevelSpec]) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidInput("cache hierarchy needs at least one level".into()));
        }
        let line_size = specs[0].line_size_bytes;
        let levels = specs
            .iter()
            .enumerate()
            .map(|(n, s)| {
                if s.line_size_bytes != line_size || s.ways == 0 || s.sets() == 0 {
                    return Err(Error::InvalidInput(format!(
                        "cache level {} has an unusable geometry",
                        s.name
                    )));
                }
                if s.victim && n == 0 {
                    return Err(Error::InvalidInput("the first level cannot be a victim cache".into()));
                }
                Ok(Level {
                    spec: s.clone(),
                    sets: (0..s.sets()).map(|_| Set::new(s.ways)).collect(),
                    counters: LevelCounters::default(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CacheHierarchySim { levels, line_size })
    }

    pub fn line_size(&self) -> u64 {
        self.line_size
    }

    pub fn counters(&self) -> Vec<LevelCounters> {
        self.levels.iter().map(|l| l.counters).collect()
    }

    pub fn reset_counters(&mut self) {
        for l in &mut self.levels {
            l.counters = LevelCounters::default();
        }
    }

    pub fn contains(&self, level: usize, line: u64) -> bool {
        self.levels[level].set_ref(line).contains(line)
    }

    pub fn resident_lines(&self, level: usize) -> usize {
        self.levels[level].sets.iter().map(Set::len).sum()
    }

    fn is_victim(&self, lvl: usize) -> bool {
        lvl < self.levels.len() && self.levels[lvl].spec.victim
    }

    /// Processes one access at byte address `addr`.
    pub fn access(&mut self, kind: AccessKind, addr: u64) {
        let line = addr / self.line_size;
        match kind {
            AccessKind::Load => self.read(0, line),
            AccessKind::Store => {
                if self.levels[0].set(line).touch(line, true) {
                    self.levels[0].counters.store_hits += 1;
                } else {
                    self.levels[0].counters.store_misses += 1;
                    if self.levels[0].spec.write_allocate {
                        self.fill(0, line, true);
                    } else {
                        self.levels[0].counters.lines_to_below += 1;
                        self.write_down(1, line, true);
                    }
                }
            }
        }
    }

    /// A load request for `line` arriving at level `lvl`.
    fn read(&mut self, lvl: usize, line: u64) {
        if self.levels[lvl].set(line).touch(line, false) {
            self.levels[lvl].counters.load_hits += 1;
        } else {
            self.levels[lvl].counters.load_misses += 1;
            self.fill(lvl, line, false);
        }
    }

    /// Brings `line` into level `lvl` from below and inserts it.
    fn fill(&mut self, lvl: usize, line: u64, dirty: bool) {
        let below = lvl + 1;
        let mut dirty = dirty;
        self.levels[lvl].counters.fills_from_below += 1;
        if below < self.levels.len() {
            if self.is_victim(below) {
                match self.levels[below].set(line).remove(line) {
                    Some(was_dirty) => {
                        self.levels[below].counters.load_hits += 1;
                        dirty |= was_dirty;
                    }
                    None => {
                        self.levels[below].counters.load_misses += 1;
                        self.levels[below].counters.fills_from_below += 1;
                    }
                }
            } else {
                self.read(below, line);
            }
        }
        self.insert(lvl, line, dirty);
    }

    fn insert(&mut self, lvl: usize, line: u64, dirty: bool) {
        let Some((victim, mut vdirty)) = self.levels[lvl].set(line).insert(line, dirty) else {
            return;
        };
        self.levels[lvl].counters.evictions += 1;
        if self.levels[lvl].spec.inclusive {
            for up in 0..lvl {
                if let Some(d) = self.levels[up].set(victim).remove(victim) {
                    vdirty |= d;
                }
            }
        }
        let below = lvl + 1;
        if self.is_victim(below) {
            self.levels[lvl].counters.lines_to_below += 1;
            if vdirty {
                self.levels[lvl].counters.writebacks += 1;
            }
            self.write_down(below, victim, vdirty);
        } else if vdirty {
            self.levels[lvl].counters.writebacks += 1;
            self.levels[lvl].counters.lines_to_below += 1;
            self.write_down(below, victim, true);
        }
    }

    /// A line evicted from level `lvl - 1` arriving at level `lvl`.
    fn write_down(&mut self, lvl: usize, line: u64, dirty: bool) {
        if lvl >= self.levels.len() {
            return;
        }
        let present = if dirty {
            self.levels[lvl].set(line).mark_dirty(line)
        } else {
            self.levels[lvl].set(line).contains(line)
        };
        if !present {
            self.insert(lvl, line, dirty);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub warmup_sweeps: usize,
    /// Largest number of grid elements, summed over all arrays, the simulator accepts.
    pub element_budget: usize,
    /// Replace every level by a fully-associative level of the same size.
    pub fully_associative: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            warmup_sweeps: 1,
            element_budget: 1 << 24,
            fully_associative: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub traffic: TrafficPrediction,
    pub counters: Vec<LevelCounters>,
    pub work_cachelines: f64,
}

/// Steady-state traffic of one sweep after `warmup_sweeps` unmeasured sweeps.
pub fn simulate_cache(
    kernel: &KernelIR,
    machine: &MachineModel,
    dims: &GridDims,
    options: SimOptions,
) -> Result<SimReport> {
    dims.validate_for(&kernel.spec)?;
    let arrays = 2 + weight_arrays(kernel).len();
    let requested = dims.len() * arrays;
    if requested > options.element_budget {
        return Err(Error::SimulationBudget {
            requested: requested as u64,
            budget: options.element_budget as u64,
        });
    }
    let specs: Vec<CacheLevelSpec> = machine
        .levels()
        .iter()
        .map(|l| {
            if options.fully_associative {
                l.fully_associative()
            } else {
                l.clone()
            }
        })
        .collect();
    let mut sim = CacheHierarchySim::new(&specs)?;
    let line = sim.line_size();
    for _ in 0..options.warmup_sweeps {
        for a in address_stream(kernel, dims, line) {
            sim.access(a.kind, a.addr);
        }
    }
    sim.reset_counters();
    for a in address_stream(kernel, dims, line) {
        sim.access(a.kind, a.addr);
    }

    let lup_per_cl = line as f64 / dims.element_size as f64;
    let work = dims.interior_points(kernel.spec.radius as usize) as f64 / lup_per_cl;
    let counters = sim.counters();
    let levels = machine.levels();
    let mut links: Vec<LinkTraffic> = levels
        .iter()
        .zip(&counters)
        .map(|(spec, c)| LinkTraffic {
            link: link_name(levels, spec),
            load_bytes_per_cl: c.fills_from_below as f64 * line as f64 / work,
            store_bytes_per_cl: c.lines_to_below as f64 * line as f64 / work,
        })
        .collect();
    // lines an upper level received from a victim level crossed that level's link
    for n in 1..levels.len() {
        if levels[n].victim {
            links[n - 1].load_bytes_per_cl = counters[n].load_hits as f64 * line as f64 / work;
        }
    }
    let ops = kernel.op_counts;
    Ok(SimReport {
        traffic: TrafficPrediction {
            predictor: Predictor::Simulation,
            reg_load_elements: ops.loads as f64,
            reg_store_elements: ops.stores as f64,
            links,
        },
        counters,
        work_cachelines: work,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::Duplex;

    fn level(name: &str, size: u64, ways: u64) -> CacheLevelSpec {
        CacheLevelSpec {
            name: name.into(),
            size_bytes: size,
            ways,
            line_size_bytes: 64,
            write_allocate: true,
            write_back: true,
            victim: false,
            inclusive: false,
            upstream_bandwidth_bytes_per_cycle: Some(32.0),
            duplex: Duplex::Full,
        }
    }

    /// 2-way, 8-set cache; lines 0, 8, 16 all map to set 0.
    #[test]
    fn hand_traced_conflict_sequence() {
        let mut sim = CacheHierarchySim::new(&[level("L1", 2 * 8 * 64, 2)]).unwrap();
        let trace = [0u64, 8, 0, 16, 8, 0, 1, 16];
        // LRU state of set 0 after each access, worked by hand:
        // 0 miss [0]; 8 miss [0,8]; 0 hit [8,0]; 16 miss evicts 8 [0,16];
        // 8 miss evicts 0 [16,8]; 0 miss evicts 16 [8,0]; 1 miss (set 1);
        // 16 miss evicts 8 [0,16]
        let expected = [false, false, true, false, false, false, false, false];
        for (line, hit) in trace.iter().zip(expected) {
            let before = sim.counters()[0].load_hits;
            sim.access(AccessKind::Load, line * 64);
            assert_eq!(sim.counters()[0].load_hits - before == 1, hit, "line {line}");
        }
        let c = sim.counters()[0];
        assert_eq!((c.load_hits, c.load_misses, c.evictions), (1, 7, 4));
        assert!(sim.contains(0, 0) && sim.contains(0, 16) && !sim.contains(0, 8));
    }

    /// 16 ways uses the vector representation, 64 ways the linked list;
    /// both are checked against a straightforward reference LRU.
    #[test]
    fn set_representations_match_reference_lru() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let trace: Vec<(bool, u64)> = (0..20_000)
            .map(|_| (rng.gen_bool(0.3), rng.gen_range(0..200u64)))
            .collect();
        for ways in [16u64, 64] {
            let mut sim = CacheHierarchySim::new(&[level("L1", ways * 64, ways)]).unwrap();
            let mut reference: Vec<(u64, bool)> = Vec::new();
            let (mut hits, mut misses, mut wb) = (0u64, 0u64, 0u64);
            for &(store, line) in &trace {
                let kind = if store { AccessKind::Store } else { AccessKind::Load };
                sim.access(kind, line * 64);
                if let Some(pos) = reference.iter().position(|e| e.0 == line) {
                    let (l, d) = reference.remove(pos);
                    reference.push((l, d || store));
                    hits += 1;
                } else {
                    misses += 1;
                    if reference.len() == ways as usize && reference.remove(0).1 {
                        wb += 1;
                    }
                    reference.push((line, store));
                }
            }
            let c = sim.counters()[0];
            assert_eq!((c.hits(), c.misses(), c.writebacks), (hits, misses, wb), "ways {ways}");
        }
    }

    #[test]
    fn inclusive_levels_contain_upper_lines() {
        use rand::{Rng, SeedableRng};
        let mut l2 = level("L2", 8 * 64, 2);
        l2.inclusive = true;
        let mut sim = CacheHierarchySim::new(&[level("L1", 4 * 64, 4), l2]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5000 {
            let line = rng.gen_range(0..64u64);
            let kind = if rng.gen_bool(0.4) {
                AccessKind::Store
            } else {
                AccessKind::Load
            };
            sim.access(kind, line * 64);
            for l in 0..64 {
                if sim.contains(0, l) {
                    assert!(sim.contains(1, l), "line {l} in L1 but not L2");
                }
            }
        }
    }

    #[test]
    fn victim_level_receives_all_evictions() {
        let mut l2 = level("L2", 8 * 64, 8);
        l2.victim = true;
        let mut sim = CacheHierarchySim::new(&[level("L1", 2 * 64, 2), l2]).unwrap();
        for line in [0u64, 1, 2, 3] {
            sim.access(AccessKind::Load, line * 64);
        }
        // lines 0 and 1 were evicted clean from L1 into the victim level
        assert!(sim.contains(1, 0) && sim.contains(1, 1));
        assert!(!sim.contains(1, 2));
        let c = sim.counters();
        assert_eq!(c[0].lines_to_below, 2);
        assert_eq!(c[1].fills_from_below, 4);
        // a hit in the victim level moves the line back up
        sim.access(AccessKind::Load, 0);
        assert!(sim.contains(0, 0) && !sim.contains(1, 0));
        assert_eq!(sim.counters()[1].load_hits, 1);
    }
}
