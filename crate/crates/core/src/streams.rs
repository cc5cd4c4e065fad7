//! Stream-network structure: Strahler orders and link decomposition.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::flow::{FlowField, FlowMode};
use crate::grid::{GeoGrid, GridGeometry, Mask, DEFAULT_NODATA};

/// One junction-to-junction stretch of channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamLink {
    pub id: u32,
    /// Most downstream cell of the link.
    pub outlet: (usize, usize),
    pub order: u32,
}

/// Stream cells with per-cell Strahler order and link membership.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamNetwork {
    geom: GridGeometry,
    mask: Mask,
    /// Strahler order per cell, 0 off-stream.
    orders: Vec<u32>,
    /// Link id per cell, 0 off-stream.
    link_ids: Vec<u32>,
    links: Vec<StreamLink>,
}

impl StreamNetwork {
    pub fn geometry(&self) -> GridGeometry {
        self.geom
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    pub fn order_at(&self, row: usize, col: usize) -> u32 {
        self.orders[self.geom.idx(row, col)]
    }

    pub fn link_ids(&self) -> &[u32] {
        &self.link_ids
    }

    pub fn links(&self) -> &[StreamLink] {
        &self.links
    }

    /// Orders as a raster; off-stream cells get 0.
    pub fn orders_grid(&self) -> GeoGrid {
        let cells = self.orders.iter().map(|&o| o as f64).collect();
        GeoGrid::new(self.geom, DEFAULT_NODATA, cells).expect("orders sized from geometry")
    }

    /// Assembles a network from raw parts; used to stage hand-built
    /// topologies in tests.
    #[cfg(test)]
    pub(crate) fn from_parts(
        geom: GridGeometry,
        mask: Mask,
        orders: Vec<u32>,
        link_ids: Vec<u32>,
        links: Vec<StreamLink>,
    ) -> Self {
        StreamNetwork {
            geom,
            mask,
            orders,
            link_ids,
            links,
        }
    }
}

/// Computes Strahler orders and splits the network into links.
///
/// Orders follow the junction rule: a headwater cell is order 1, and a cell
/// receiving its highest inflow order from two or more branches steps up by
/// one. Links break at junctions; the junction cell starts the downstream
/// link. Link ids count up in row-major order of each link's first cell.
pub fn strahler_order(streams: &Mask, flow: &FlowField) -> Result<StreamNetwork> {
    if flow.mode() != FlowMode::Single {
        return Err(Error::FlowMode {
            expected: "single-direction",
        });
    }
    let geom = streams.geometry();
    geom.ensure_matches(&flow.geometry(), "strahler_order")?;

    let n = geom.len();
    let on_stream: Vec<bool> = (0..n)
        .map(|i| streams.cells()[i] && flow.valid_cells()[i])
        .collect();

    // Downstream stream cell per stream cell, if any.
    let mut downstream = vec![usize::MAX; n];
    let mut indegree = vec![0u32; n];
    for i in 0..n {
        if !on_stream[i] {
            continue;
        }
        let (r, c) = geom.rc(i);
        if let Some((nr, nc)) = flow.downstream(r, c) {
            let d = geom.idx(nr, nc);
            if on_stream[d] {
                downstream[i] = d;
                indegree[d] += 1;
            }
        }
    }

    // Orders by topological sweep from the headwaters.
    let mut max_in = vec![0u32; n];
    let mut max_count = vec![0u32; n];
    let mut orders = vec![0u32; n];
    let mut pending = indegree.clone();
    let mut queue: VecDeque<usize> = (0..n)
        .filter(|&i| on_stream[i] && indegree[i] == 0)
        .collect();
    let mut processed = 0usize;
    while let Some(i) = queue.pop_front() {
        processed += 1;
        orders[i] = if max_in[i] == 0 {
            1
        } else if max_count[i] >= 2 {
            max_in[i] + 1
        } else {
            max_in[i]
        };
        let d = downstream[i];
        if d != usize::MAX {
            match orders[i].cmp(&max_in[d]) {
                std::cmp::Ordering::Greater => {
                    max_in[d] = orders[i];
                    max_count[d] = 1;
                }
                std::cmp::Ordering::Equal => max_count[d] += 1,
                std::cmp::Ordering::Less => {}
            }
            pending[d] -= 1;
            if pending[d] == 0 {
                queue.push_back(d);
            }
        }
    }
    let total = on_stream.iter().filter(|&&b| b).count();
    if processed != total {
        return Err(Error::InvalidGrid("stream network contains a cycle".into()));
    }

    // Link decomposition: headwaters and junction cells start links.
    let mut link_ids = vec![0u32; n];
    let mut links = Vec::new();
    let is_start = |i: usize| on_stream[i] && (indegree[i] == 0 || indegree[i] >= 2);
    for i in 0..n {
        if !is_start(i) {
            continue;
        }
        let id = links.len() as u32 + 1;
        let mut cur = i;
        link_ids[cur] = id;
        loop {
            let d = downstream[cur];
            if d == usize::MAX || is_start(d) {
                break;
            }
            cur = d;
            link_ids[cur] = id;
        }
        links.push(StreamLink {
            id,
            outlet: geom.rc(cur),
            order: orders[cur],
        });
    }

    let mask = Mask::new(geom, on_stream)?;
    Ok(StreamNetwork {
        geom,
        mask,
        orders,
        link_ids,
        links,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{d8_flow_direction, fill_pits, flow_accumulation};
    use crate::grid::GeoGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn field_from_codes(rows: usize, cols: usize, codes: &[f64]) -> FlowField {
        let g = GeoGrid::new(GridGeometry::new(rows, cols, 1.0), -9999.0, codes.to_vec()).unwrap();
        FlowField::from_grid(&g, FlowMode::Single).unwrap()
    }

    fn mask_of(rows: usize, cols: usize, cells: &[(usize, usize)]) -> Mask {
        let mut m = Mask::filled(GridGeometry::new(rows, cols, 1.0), false);
        for &(r, c) in cells {
            m.set(r, c, true);
        }
        m
    }

    #[test]
    fn single_chain_is_one_first_order_link() {
        // West-to-east channel across one row.
        let flow = field_from_codes(1, 4, &[1.0, 1.0, 1.0, 0.0]);
        let streams = Mask::filled(GridGeometry::new(1, 4, 1.0), true);
        let net = strahler_order(&streams, &flow).unwrap();
        assert!(net.orders().iter().all(|&o| o == 1));
        assert_eq!(net.links().len(), 1);
        assert_eq!(net.links()[0].outlet, (0, 3));
        assert_eq!(net.links()[0].order, 1);
    }

    #[test]
    fn two_tributaries_step_up_at_the_junction() {
        // Two headwaters drop into (1,0), which runs east.
        let codes = [
            4.0, 8.0, 0.0, //
            1.0, 1.0, 0.0,
        ];
        let flow = field_from_codes(2, 3, &codes);
        let streams = mask_of(2, 3, &[(0, 0), (0, 1), (1, 0), (1, 1), (1, 2)]);
        let net = strahler_order(&streams, &flow).unwrap();
        assert_eq!(net.order_at(0, 0), 1);
        assert_eq!(net.order_at(0, 1), 1);
        assert_eq!(net.order_at(1, 0), 2);
        assert_eq!(net.order_at(1, 2), 2);
        assert_eq!(net.links().len(), 3);
        // Tributary links end on their own headwater cells; the junction
        // opens the downstream link.
        let junction_link = net.links().iter().find(|l| l.order == 2).unwrap();
        assert_eq!(junction_link.outlet, (1, 2));
        assert_eq!(net.link_ids()[flow.geometry().idx(1, 0)], junction_link.id);
    }

    #[test]
    fn nested_junctions_reach_order_three() {
        // Two order-2 branches built from paired headwaters meet at (4,1).
        let mut codes = vec![0.0; 25];
        let set = |codes: &mut Vec<f64>, r: usize, c: usize, v: f64| codes[r * 5 + c] = v;
        set(&mut codes, 0, 0, 4.0); // S
        set(&mut codes, 0, 1, 8.0); // SW
        set(&mut codes, 1, 0, 4.0);
        set(&mut codes, 2, 0, 4.0);
        set(&mut codes, 3, 0, 2.0); // SE
        set(&mut codes, 0, 3, 4.0);
        set(&mut codes, 0, 4, 8.0);
        set(&mut codes, 1, 3, 8.0);
        set(&mut codes, 2, 2, 8.0);
        set(&mut codes, 3, 1, 4.0);
        let flow = field_from_codes(5, 5, &codes);
        let cells = [
            (0, 0),
            (0, 1),
            (1, 0),
            (2, 0),
            (3, 0),
            (0, 3),
            (0, 4),
            (1, 3),
            (2, 2),
            (3, 1),
            (4, 1),
        ];
        let streams = mask_of(5, 5, &cells);
        let net = strahler_order(&streams, &flow).unwrap();
        assert_eq!(net.order_at(1, 0), 2);
        assert_eq!(net.order_at(1, 3), 2);
        assert_eq!(net.order_at(4, 1), 3);
        assert_eq!(net.links().len(), 7);
        let top = net.links().iter().find(|l| l.order == 3).unwrap();
        assert_eq!(top.outlet, (4, 1));
    }

    #[test]
    fn orders_never_decrease_downstream() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let rows = rng.gen_range(8..24);
            let cols = rng.gen_range(8..24);
            let cells: Vec<f64> = (0..rows * cols)
                .map(|_| rng.gen_range(0.0..30.0) + 0.001 * rng.gen_range(0..1000) as f64)
                .collect();
            let dem = fill_pits(
                &GeoGrid::new(GridGeometry::new(rows, cols, 1.0), -9999.0, cells).unwrap(),
            );
            let flow = d8_flow_direction(&dem);
            let acc = flow_accumulation(&flow).unwrap();
            let streams = crate::flow::extract_streams(&acc, 5);
            if !streams.any() {
                continue;
            }
            let net = strahler_order(&streams, &flow).unwrap();
            let geom = dem.geometry();
            for r in 0..rows {
                for c in 0..cols {
                    if net.order_at(r, c) == 0 {
                        continue;
                    }
                    if let Some((nr, nc)) = flow.downstream(r, c) {
                        if net.order_at(nr, nc) != 0 {
                            assert!(net.order_at(nr, nc) >= net.order_at(r, c));
                        }
                    }
                    let _ = geom;
                }
            }
            // Every stream cell belongs to exactly one link and shares its
            // order with that link.
            for l in net.links() {
                let oi = geom.idx(l.outlet.0, l.outlet.1);
                assert_eq!(net.link_ids()[oi], l.id);
                assert_eq!(net.orders()[oi], l.order);
            }
            for i in 0..geom.len() {
                if net.mask().cells()[i] {
                    assert_ne!(net.link_ids()[i], 0);
                } else {
                    assert_eq!(net.link_ids()[i], 0);
                }
            }
        }
    }
}
