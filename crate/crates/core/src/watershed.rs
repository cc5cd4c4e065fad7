//! Watershed delineation under an area threshold.
//!
//! Two strategies produce the zonal partition used to constrain the risk
//! index:
//!
//! * **D8**: streams are extracted at the threshold accumulation, split into
//!   junction-to-junction links, and every cell is assigned the first link
//!   its steepest-descent path reaches. Interior zones that still fall short
//!   of the threshold are folded into their downstream neighbor until the
//!   partition is stable; zones cut off by the grid edge or a nodata margin
//!   keep their truncated size.
//! * **MFD**: flat components (cells with no strictly lower neighbor) seed
//!   zones, largest first. A zone grows by absorbing, one cell at a time,
//!   the lowest-indexed frontier cell that sheds flow into it. Once the zone
//!   reaches the threshold the next absorption opens a fresh label that
//!   inherits the frontier, so a long trace chains into threshold-sized
//!   chunks. Flat components are never split.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::flow::{
    d8_flow_direction, extract_streams, fill_pits, flow_accumulation, mfd_flow_direction,
};
use crate::grid::{GeoGrid, ZoneLabels};
use crate::streams::strahler_order;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelineationMethod {
    D8,
    Mfd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelineationConfig {
    pub method: DelineationMethod,
    /// Minimum zone area in hectares.
    pub area_threshold_ha: f64,
    /// Fill depressions before D8 routing. Ignored by MFD, which reads the
    /// terrain as-is so burned flats survive as seeds.
    pub pit_fill: bool,
}

/// Per-zone bookkeeping, indexed by final label order.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneInfo {
    pub label: u32,
    pub cell_count: usize,
    pub area_ha: f64,
    /// How the zone came to be: a D8 stream link, an MFD flat seed, or an
    /// MFD chain continuation.
    pub seed_kind: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delineation {
    pub zones: ZoneLabels,
    pub info: Vec<ZoneInfo>,
    /// Area threshold converted to whole cells.
    pub threshold_cells: u64,
}

/// Hectares to a whole-cell threshold, at least one cell.
pub fn threshold_cells(area_threshold_ha: f64, cellsize: f64) -> u64 {
    let cells = (area_threshold_ha * 10_000.0 / (cellsize * cellsize)).ceil();
    (cells.max(1.0)) as u64
}

pub fn delineate(dem: &GeoGrid, config: &DelineationConfig) -> Result<Delineation> {
    match config.method {
        DelineationMethod::D8 => delineate_d8(dem, config),
        DelineationMethod::Mfd => delineate_mfd(dem, config),
    }
}

struct UnionFind(Vec<u32>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n as u32).collect())
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.0[x as usize] != x {
            let parent = self.0[x as usize];
            self.0[x as usize] = self.0[parent as usize];
            x = parent;
        }
        x
    }

    /// Attaches the set of `child` under the set of `parent`.
    fn attach(&mut self, child: u32, parent: u32) {
        let c = self.find(child);
        let p = self.find(parent);
        self.0[c as usize] = p;
    }
}

/// Stream-link watersheds over a steepest-descent field.
pub fn delineate_d8(dem: &GeoGrid, config: &DelineationConfig) -> Result<Delineation> {
    let working = if config.pit_fill {
        fill_pits(dem)
    } else {
        dem.clone()
    };
    let geom = working.geometry();
    let t = threshold_cells(config.area_threshold_ha, geom.cellsize);
    let flow = d8_flow_direction(&working);
    let acc = flow_accumulation(&flow)?;
    let streams = extract_streams(&acc, t);
    if !streams.any() {
        return Err(Error::NoStreams { threshold_cells: t });
    }
    let net = strahler_order(&streams, &flow)?;

    // Assign every cell the link its descent path reaches first, walking
    // each unresolved path once and labeling the whole trail.
    let n = geom.len();
    let mut labels = vec![0u32; n];
    let mut resolved = vec![false; n];
    for i in 0..n {
        if net.link_ids()[i] != 0 {
            labels[i] = net.link_ids()[i];
            resolved[i] = true;
        } else if !flow.valid_cells()[i] {
            resolved[i] = true;
        }
    }
    let mut trail = Vec::new();
    for start in 0..n {
        if resolved[start] {
            continue;
        }
        trail.clear();
        let mut cur = start;
        let label = loop {
            if resolved[cur] {
                break labels[cur];
            }
            trail.push(cur);
            let (r, c) = geom.rc(cur);
            match flow.downstream(r, c) {
                Some((nr, nc)) if flow.is_valid(nr, nc) => cur = geom.idx(nr, nc),
                _ => break 0,
            }
        };
        for &i in &trail {
            labels[i] = label;
            resolved[i] = true;
        }
    }

    // Fold sub-threshold interior zones into their downstream zone until the
    // partition stops changing.
    let link_count = net.links().len();
    let mut count = vec![0usize; link_count + 1];
    let mut touches_edge = vec![false; link_count + 1];
    for (i, &raw) in labels.iter().enumerate() {
        let l = raw as usize;
        if l == 0 {
            continue;
        }
        count[l] += 1;
        let (r, c) = geom.rc(i);
        let mut edge = geom.on_edge(r, c);
        if !edge {
            for dir in 0..8 {
                if let Some((nr, nc)) = geom.neighbor(r, c, dir) {
                    if !flow.is_valid(nr, nc) {
                        edge = true;
                        break;
                    }
                }
            }
        }
        if edge {
            touches_edge[l] = true;
        }
    }
    let downstream_of_link: Vec<u32> = std::iter::once(0)
        .chain(net.links().iter().map(|l| {
            let (r, c) = l.outlet;
            match flow.downstream(r, c) {
                Some((nr, nc)) if flow.is_valid(nr, nc) => labels[geom.idx(nr, nc)],
                _ => 0,
            }
        }))
        .collect();
    // Attaching upstream onto downstream keeps each set's representative at
    // its most downstream link, so the representative's own outlet is always
    // the merged zone's drain.
    let mut uf = UnionFind::new(link_count + 1);
    loop {
        let mut changed = false;
        for l in 1..=link_count as u32 {
            if uf.find(l) != l {
                continue;
            }
            let li = l as usize;
            if touches_edge[li] || count[li] as u64 >= t {
                continue;
            }
            let down = downstream_of_link[li];
            if down == 0 {
                continue;
            }
            let target = uf.find(down);
            if target == l {
                continue;
            }
            uf.attach(l, target);
            let ti = target as usize;
            count[ti] += count[li];
            touches_edge[ti] |= touches_edge[li];
            changed = true;
        }
        if !changed {
            break;
        }
    }

    for l in labels.iter_mut() {
        if *l != 0 {
            *l = uf.find(*l);
        }
    }
    let mut zones = ZoneLabels::new(geom, labels)?;
    let zone_count = zones.canonicalize();
    let info = zone_info(&zones, zone_count, "stream-link");
    Ok(Delineation {
        zones,
        info,
        threshold_cells: t,
    })
}

/// Flat-seeded chunk growth over a multiple-direction field.
pub fn delineate_mfd(dem: &GeoGrid, config: &DelineationConfig) -> Result<Delineation> {
    let geom = dem.geometry();
    let t = threshold_cells(config.area_threshold_ha, geom.cellsize);
    let flow = mfd_flow_direction(dem);
    let n = geom.len();
    let valid = flow.valid_cells();
    let codes = flow.codes();

    // Flat components: valid cells with no strictly lower neighbor,
    // 8-connected. Largest first, ties by first row-major cell.
    let flat: Vec<bool> = (0..n).map(|i| valid[i] && codes[i] == 0).collect();
    let mut comp_of = vec![0u32; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut stack = Vec::new();
    for i in 0..n {
        if !flat[i] || comp_of[i] != 0 {
            continue;
        }
        let id = comps.len() as u32 + 1;
        comp_of[i] = id;
        stack.push(i);
        let mut members = Vec::new();
        while let Some(j) = stack.pop() {
            members.push(j);
            let (r, c) = geom.rc(j);
            for dir in 0..8 {
                if let Some((nr, nc)) = geom.neighbor(r, c, dir) {
                    let k = geom.idx(nr, nc);
                    if flat[k] && comp_of[k] == 0 {
                        comp_of[k] = id;
                        stack.push(k);
                    }
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    let mut seed_order: Vec<usize> = (0..comps.len()).collect();
    seed_order.sort_by_key(|&c| (std::cmp::Reverse(comps[c].len()), comps[c][0]));

    let mut labels = vec![0u32; n];
    let mut kinds: Vec<&'static str> = Vec::new();
    let mut frontier: BTreeSet<usize> = BTreeSet::new();
    let mut next_label = 0u32;

    // Inserts the unassigned neighbors that shed flow into `x`.
    let enqueue = |x: usize, labels: &[u32], frontier: &mut BTreeSet<usize>| {
        let (r, c) = geom.rc(x);
        for dir in 0..8 {
            if let Some((nr, nc)) = geom.neighbor(r, c, dir) {
                let u = geom.idx(nr, nc);
                if valid[u] && labels[u] == 0 && codes[u] != 0 {
                    let toward_x = (dir + 4) % 8;
                    if codes[u] & (1 << toward_x) != 0 {
                        frontier.insert(u);
                    }
                }
            }
        }
    };

    for &ci in &seed_order {
        next_label += 1;
        kinds.push("flat-seed");
        let mut count = 0u64;
        for &i in &comps[ci] {
            labels[i] = next_label;
            count += 1;
        }
        for &i in &comps[ci] {
            enqueue(i, &labels, &mut frontier);
        }
        let mut want_new = count >= t;
        while let Some(u) = frontier.pop_first() {
            if labels[u] != 0 {
                continue;
            }
            if want_new {
                next_label += 1;
                kinds.push("continuation");
                count = 0;
                want_new = false;
            }
            labels[u] = next_label;
            count += 1;
            enqueue(u, &labels, &mut frontier);
            if count >= t {
                want_new = true;
            }
        }
    }

    // Safety net: descent from any sloped cell must end in a flat component,
    // so growth reaches everything. Should a cell slip through anyway,
    // attach it to the lowest-labeled zone it sheds into.
    loop {
        let mut assigned_any = false;
        for i in 0..n {
            if !valid[i] || labels[i] != 0 {
                continue;
            }
            let (r, c) = geom.rc(i);
            let mut best = 0u32;
            for dir in 0..8 {
                if codes[i] & (1 << dir) == 0 {
                    continue;
                }
                if let Some((nr, nc)) = geom.neighbor(r, c, dir) {
                    let l = labels[geom.idx(nr, nc)];
                    if l != 0 && (best == 0 || l < best) {
                        best = l;
                    }
                }
            }
            if best != 0 {
                labels[i] = best;
                assigned_any = true;
            }
        }
        if !assigned_any {
            break;
        }
    }

    let mut zones = ZoneLabels::new(geom, labels)?;
    // Remap bookkeeping through canonical relabeling.
    let before = zones.labels().to_vec();
    let zone_count = zones.canonicalize();
    let mut kind_of = vec![""; zone_count as usize + 1];
    for (old, new) in before.iter().zip(zones.labels()) {
        if *new != 0 {
            kind_of[*new as usize] = kinds[*old as usize - 1];
        }
    }
    let mut info = zone_info(&zones, zone_count, "flat-seed");
    for zi in info.iter_mut() {
        zi.seed_kind = kind_of[zi.label as usize];
    }
    Ok(Delineation {
        zones,
        info,
        threshold_cells: t,
    })
}

fn zone_info(zones: &ZoneLabels, zone_count: u32, seed_kind: &'static str) -> Vec<ZoneInfo> {
    let cs = zones.geometry().cellsize;
    let mut count = vec![0usize; zone_count as usize + 1];
    for &l in zones.labels() {
        if l != 0 {
            count[l as usize] += 1;
        }
    }
    (1..=zone_count)
        .map(|l| ZoneInfo {
            label: l,
            cell_count: count[l as usize],
            area_ha: count[l as usize] as f64 * cs * cs / 10_000.0,
            seed_kind,
        })
        .collect()
}
