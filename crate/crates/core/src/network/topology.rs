use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{LinkId, NodeId};

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("duplicate node name '{0}'")]
    DuplicateNode(String),
    #[error("duplicate link name '{0}'")]
    DuplicateLink(String),
    #[error("link '{link}' references unknown node '{node}'")]
    UnknownNode { link: String, node: String },
    #[error("link '{link}' has non-positive capacity {capacity} at t={at}")]
    NonPositiveCapacity { link: String, capacity: f64, at: f64 },
    #[error("link '{link}' schedule breakpoints must strictly increase")]
    UnsortedSchedule { link: String },
    #[error("link '{link}' schedule must start at t=0")]
    ScheduleStart { link: String },
    #[error("route {src} -> {dst} references unknown node")]
    RouteUnknownNode { src: String, dst: String },
    #[error("route {src} -> {dst} references unknown link '{link}'")]
    RouteUnknownLink { src: String, dst: String, link: String },
    #[error("route {src} -> {dst} is not a connected path over its links")]
    BrokenRoute { src: String, dst: String },
    #[error("no path between '{src}' and '{dst}'")]
    Disconnected { src: String, dst: String },
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: NodeId,
    pub name: String,
}

/// A LAN/WAN link with a piecewise-constant capacity schedule and a fixed
/// round-trip contribution. Capacity is shared by all flows crossing the
/// link, whichever direction they travel.
#[derive(Debug, Clone)]
pub struct Link {
    pub id: LinkId,
    pub name: String,
    pub a: NodeId,
    pub b: NodeId,
    /// Round-trip contribution in seconds added to every path crossing this link.
    pub rtt: f64,
    /// (time, bits/s) breakpoints, first at t=0, strictly increasing.
    pub schedule: Vec<(f64, f64)>,
    /// Capacity currently in force.
    pub capacity: f64,
    /// Aggregate rate of flows crossing the link under the current allocation.
    pub current_rate: f64,
    /// Integral of used rate over time (bits).
    pub served_bits: f64,
    /// Integral of capacity over time (bits) for utilization.
    pub capacity_bits: f64,
}

#[derive(Debug, Clone)]
pub struct LinkSpec {
    pub name: String,
    pub a: String,
    pub b: String,
    pub rtt: f64,
    pub schedule: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct RouteSpec {
    pub src: String,
    pub dst: String,
    pub links: Vec<String>,
}

/// Static node/link graph with a single resolved path per (src, dst) pair.
#[derive(Debug)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    routes: BTreeMap<(NodeId, NodeId), Vec<LinkId>>,
}

impl Topology {
    /// Build from specs. Explicit routes are validated; every other pair is
    /// resolved by breadth-first search minimizing (hops, RTT) with ties
    /// broken by link declaration order, so route resolution is deterministic.
    pub fn build(
        node_names: &[String],
        link_specs: &[LinkSpec],
        route_specs: &[RouteSpec],
    ) -> Result<Topology, TopologyError> {
        let mut nodes = Vec::new();
        let mut by_name: BTreeMap<&str, NodeId> = BTreeMap::new();
        for name in node_names {
            if by_name.contains_key(name.as_str()) {
                return Err(TopologyError::DuplicateNode(name.clone()));
            }
            let id = NodeId(nodes.len() as u32);
            by_name.insert(name.as_str(), id);
            nodes.push(Node { id, name: name.clone() });
        }

        let mut links = Vec::new();
        for spec in link_specs {
            if links.iter().any(|l: &Link| l.name == spec.name) {
                return Err(TopologyError::DuplicateLink(spec.name.clone()));
            }
            let a = *by_name.get(spec.a.as_str()).ok_or_else(|| TopologyError::UnknownNode {
                link: spec.name.clone(),
                node: spec.a.clone(),
            })?;
            let b = *by_name.get(spec.b.as_str()).ok_or_else(|| TopologyError::UnknownNode {
                link: spec.name.clone(),
                node: spec.b.clone(),
            })?;
            if spec.schedule.is_empty() || spec.schedule[0].0 != 0.0 {
                return Err(TopologyError::ScheduleStart { link: spec.name.clone() });
            }
            for window in spec.schedule.windows(2) {
                if window[1].0 <= window[0].0 {
                    return Err(TopologyError::UnsortedSchedule { link: spec.name.clone() });
                }
            }
            for &(at, capacity) in &spec.schedule {
                if capacity <= 0.0 {
                    return Err(TopologyError::NonPositiveCapacity {
                        link: spec.name.clone(),
                        capacity,
                        at,
                    });
                }
            }
            links.push(Link {
                id: LinkId(links.len() as u32),
                name: spec.name.clone(),
                a,
                b,
                rtt: spec.rtt,
                capacity: spec.schedule[0].1,
                schedule: spec.schedule.clone(),
                current_rate: 0.0,
                served_bits: 0.0,
                capacity_bits: 0.0,
            });
        }

        let mut routes = BTreeMap::new();
        for spec in route_specs {
            let src = *by_name.get(spec.src.as_str()).ok_or_else(|| {
                TopologyError::RouteUnknownNode { src: spec.src.clone(), dst: spec.dst.clone() }
            })?;
            let dst = *by_name.get(spec.dst.as_str()).ok_or_else(|| {
                TopologyError::RouteUnknownNode { src: spec.src.clone(), dst: spec.dst.clone() }
            })?;
            let mut path = Vec::new();
            let mut here = src;
            for link_name in &spec.links {
                let link = links.iter().find(|l| &l.name == link_name).ok_or_else(|| {
                    TopologyError::RouteUnknownLink {
                        src: spec.src.clone(),
                        dst: spec.dst.clone(),
                        link: link_name.clone(),
                    }
                })?;
                here = if link.a == here {
                    link.b
                } else if link.b == here {
                    link.a
                } else {
                    return Err(TopologyError::BrokenRoute {
                        src: spec.src.clone(),
                        dst: spec.dst.clone(),
                    });
                };
                path.push(link.id);
            }
            if here != dst {
                return Err(TopologyError::BrokenRoute {
                    src: spec.src.clone(),
                    dst: spec.dst.clone(),
                });
            }
            routes.insert((src, dst), path.clone());
            routes.entry((dst, src)).or_insert_with(|| {
                let mut reverse = path.clone();
                reverse.reverse();
                reverse
            });
        }

        Ok(Topology { nodes, links, routes })
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.name == name).map(|n| n.id)
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.nodes[id.0 as usize].name
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0 as usize]
    }

    pub fn link_by_name(&self, name: &str) -> Option<&Link> {
        self.links.iter().find(|l| l.name == name)
    }

    /// The resolved path between two distinct nodes, deriving and caching a
    /// shortest path if no explicit route was configured.
    pub fn route(&mut self, src: NodeId, dst: NodeId) -> Option<Vec<LinkId>> {
        if let Some(path) = self.routes.get(&(src, dst)) {
            return Some(path.clone());
        }
        let path = self.shortest_path(src, dst)?;
        self.routes.insert((src, dst), path.clone());
        let mut reverse = path.clone();
        reverse.reverse();
        self.routes.entry((dst, src)).or_insert(reverse);
        self.routes.get(&(src, dst)).cloned()
    }

    /// Path RTT in seconds, or `None` if disconnected.
    pub fn path_rtt(&mut self, src: NodeId, dst: NodeId) -> Option<f64> {
        if src == dst {
            return Some(0.0);
        }
        let path = self.route(src, dst)?;
        Some(path.iter().map(|&l| self.links[l.0 as usize].rtt).sum())
    }

    fn shortest_path(&self, src: NodeId, dst: NodeId) -> Option<Vec<LinkId>> {
        // Dijkstra over (hops, rtt); neighbor exploration in link order keeps
        // tie-breaks deterministic.
        let n = self.nodes.len();
        let mut best: Vec<Option<(usize, f64)>> = vec![None; n];
        let mut prev: Vec<Option<(NodeId, LinkId)>> = vec![None; n];
        let mut queue = std::collections::BinaryHeap::new();
        best[src.0 as usize] = Some((0, 0.0));
        queue.push(std::cmp::Reverse((0usize, 0u64, src)));
        while let Some(std::cmp::Reverse((hops, rtt_bits, node))) = queue.pop() {
            let rtt = f64::from_bits(rtt_bits);
            if let Some((bh, br)) = best[node.0 as usize] {
                if (hops, rtt) > (bh, br) {
                    continue;
                }
            }
            if node == dst {
                break;
            }
            for link in &self.links {
                let next = if link.a == node {
                    link.b
                } else if link.b == node {
                    link.a
                } else {
                    continue;
                };
                let cand = (hops + 1, rtt + link.rtt);
                let better = match best[next.0 as usize] {
                    None => true,
                    Some(existing) => cand < existing,
                };
                if better {
                    best[next.0 as usize] = Some(cand);
                    prev[next.0 as usize] = Some((node, link.id));
                    queue.push(std::cmp::Reverse((cand.0, cand.1.to_bits(), next)));
                }
            }
        }
        best[dst.0 as usize]?;
        let mut path = Vec::new();
        let mut here = dst;
        while here != src {
            let (from, link) = prev[here.0 as usize]?;
            path.push(link);
            here = from;
        }
        path.reverse();
        Some(path)
    }
}
