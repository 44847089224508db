//! Quadratic-element displacement DOF layout with duplicated unknowns along
//! fracture paths.
//!
//! P2 nodes live at mesh vertices and edge midpoints. Nodes on the fracture
//! network are duplicated so the displacement can jump across fractures:
//!
//! - a fracture-edge midpoint gets one copy per side (+/-);
//! - a fracture-network vertex gets one copy per *matrix sector*, the
//!   connected components of its incident cells when adjacency through
//!   fracture edges is cut (2 on a simple path, one per branch sector at
//!   intersections);
//! - tips keep a single node (the fan stays connected), and fracture endpoints
//!   on the domain boundary are kept single as well.

use crate::mesh::{FractureNodeKind, Mesh, Point};

#[derive(Debug, Clone)]
pub struct FracTrace {
    /// Displacement nodes of the `+` side trace: [end0, midpoint, end1].
    pub plus: [usize; 3],
    /// Same for the `-` side; ends are ordered like `plus`.
    pub minus: [usize; 3],
}

#[derive(Debug, Clone)]
pub struct MechDofMap {
    /// Displacement nodes per cell, locals: 0,1,2 = vertices, 3 = mid(v0,v1),
    /// 4 = mid(v1,v2), 5 = mid(v2,v0).
    pub cell_nodes: Vec<[usize; 6]>,
    /// Number of displacement nodes (including duplicates); DOF count is twice.
    pub n_nodes: usize,
    /// Position of every displacement node.
    pub node_position: Vec<Point>,
    /// Per fracture edge, the trace nodes of both sides.
    pub frac_trace: Vec<FracTrace>,
    /// node id of each plain (non-fracture) vertex, usize::MAX otherwise.
    vertex_node: Vec<usize>,
    /// For fracture vertices: (vertex, sector cells, node id).
    sector_nodes: Vec<(usize, Vec<usize>, usize)>,
    /// node id(s) of each edge midpoint: [single, MAX] or [plus, minus].
    edge_mid_nodes: Vec<[usize; 2]>,
}

impl MechDofMap {
    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes
    }

    /// Displacement node of vertex `v` as seen from `cell`.
    pub fn vertex_node_for_cell(&self, v: usize, cell: usize) -> usize {
        if self.vertex_node[v] != usize::MAX {
            return self.vertex_node[v];
        }
        for (vv, cells, node) in &self.sector_nodes {
            if *vv == v && cells.contains(&cell) {
                return *node;
            }
        }
        unreachable!("vertex {v} has no sector containing cell {cell}");
    }

    /// All displacement nodes associated with vertex `v`.
    pub fn vertex_nodes(&self, v: usize) -> Vec<usize> {
        if self.vertex_node[v] != usize::MAX {
            vec![self.vertex_node[v]]
        } else {
            let mut out: Vec<usize> = self
                .sector_nodes
                .iter()
                .filter(|(vv, _, _)| *vv == v)
                .map(|(_, _, n)| *n)
                .collect();
            out.dedup();
            out
        }
    }

    pub fn build(mesh: &Mesh) -> MechDofMap {
        let nv = mesh.n_vertices();
        let ne = mesh.edges.len();

        // vertex -> incident cells
        let mut vertex_cells: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for (ci, c) in mesh.cells.iter().enumerate() {
            for &v in &c.v {
                vertex_cells[v].push(ci);
            }
        }
        // vertex -> incident edges
        let mut vertex_edges: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for (ei, e) in mesh.edges.iter().enumerate() {
            for &v in &e.v {
                vertex_edges[v].push(ei);
            }
        }

        let mut node_position: Vec<Point> = Vec::new();
        let mut vertex_node = vec![usize::MAX; nv];
        let mut sector_nodes: Vec<(usize, Vec<usize>, usize)> = Vec::new();

        for v in 0..nv {
            let fn_idx = mesh.fracture_node_of_vertex[v];
            let single = fn_idx == usize::MAX
                || matches!(
                    mesh.fracture_nodes[fn_idx].kind,
                    FractureNodeKind::Boundary
                );
            if single {
                if vertex_cells[v].is_empty() {
                    continue; // dangling vertex, no dof
                }
                vertex_node[v] = node_position.len();
                node_position.push(mesh.vertices[v]);
                continue;
            }
            // sectors: components of incident cells, adjacency through
            // non-fracture edges containing v
            let cells = &vertex_cells[v];
            let mut comp = vec![usize::MAX; cells.len()];
            let mut n_comp = 0;
            for start in 0..cells.len() {
                if comp[start] != usize::MAX {
                    continue;
                }
                let id = n_comp;
                n_comp += 1;
                let mut stack = vec![start];
                comp[start] = id;
                while let Some(i) = stack.pop() {
                    for j in 0..cells.len() {
                        if comp[j] != usize::MAX {
                            continue;
                        }
                        // do cells[i], cells[j] share a non-fracture edge at v?
                        let shared = vertex_edges[v].iter().any(|&ei| {
                            mesh.fracture_edge_of_edge[ei] == usize::MAX
                                && mesh.edges[ei].cells.contains(&cells[i])
                                && mesh.edges[ei].cells.contains(&cells[j])
                        });
                        if shared {
                            comp[j] = id;
                            stack.push(j);
                        }
                    }
                }
            }
            for id in 0..n_comp {
                let sector: Vec<usize> = cells
                    .iter()
                    .zip(&comp)
                    .filter(|(_, &c)| c == id)
                    .map(|(&c, _)| c)
                    .collect();
                let node = node_position.len();
                node_position.push(mesh.vertices[v]);
                sector_nodes.push((v, sector, node));
            }
        }

        // midpoints
        let mut edge_mid_nodes = vec![[usize::MAX; 2]; ne];
        for (ei, e) in mesh.edges.iter().enumerate() {
            if mesh.fracture_edge_of_edge[ei] == usize::MAX {
                edge_mid_nodes[ei][0] = node_position.len();
                node_position.push(e.midpoint);
            } else {
                edge_mid_nodes[ei][0] = node_position.len();
                node_position.push(e.midpoint);
                edge_mid_nodes[ei][1] = node_position.len();
                node_position.push(e.midpoint);
            }
        }

        let mut map = MechDofMap {
            cell_nodes: Vec::with_capacity(mesh.n_cells()),
            n_nodes: node_position.len(),
            node_position,
            frac_trace: Vec::with_capacity(mesh.fracture_edges.len()),
            vertex_node,
            sector_nodes,
            edge_mid_nodes,
        };

        for (ci, c) in mesh.cells.iter().enumerate() {
            let mut nodes = [usize::MAX; 6];
            for k in 0..3 {
                nodes[k] = map.vertex_node_for_cell(c.v[k], ci);
            }
            // local edge k+3 joins vertices (k, k+1)
            for k in 0..3 {
                let (a, b) = (c.v[k], c.v[(k + 1) % 3]);
                let ei = mesh.cell_edges[ci]
                    .iter()
                    .copied()
                    .find(|&e| {
                        let ev = mesh.edges[e].v;
                        (ev[0] == a.min(b)) && (ev[1] == a.max(b))
                    })
                    .expect("cell edge lookup");
                let fe = mesh.fracture_edge_of_edge[ei];
                nodes[3 + k] = if fe == usize::MAX {
                    map.edge_mid_nodes[ei][0]
                } else if mesh.fracture_edges[fe].cell_pos == ci {
                    map.edge_mid_nodes[ei][0]
                } else {
                    map.edge_mid_nodes[ei][1]
                };
            }
            map.cell_nodes.push(nodes);
        }

        for fe in &mesh.fracture_edges {
            let e = &mesh.edges[fe.edge];
            let ei = fe.edge;
            let plus = [
                map.vertex_node_for_cell(e.v[0], fe.cell_pos),
                map.edge_mid_nodes[ei][0],
                map.vertex_node_for_cell(e.v[1], fe.cell_pos),
            ];
            let minus = [
                map.vertex_node_for_cell(e.v[0], fe.cell_neg),
                map.edge_mid_nodes[ei][1],
                map.vertex_node_for_cell(e.v[1], fe.cell_neg),
            ];
            map.frac_trace.push(FracTrace { plus, minus });
        }
        map
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Geometry};

    #[test]
    fn no_fracture_means_no_duplicates() {
        let mesh = build_mesh(&Geometry::rectangle(0.0, 0.0, 1.0, 1.0), 0.5).unwrap();
        let map = MechDofMap::build(&mesh);
        assert_eq!(map.n_nodes, mesh.n_vertices() + mesh.edges.len());
        assert_eq!(map.n_dofs(), 2 * map.n_nodes);
    }

    #[test]
    fn duplication_counts_along_a_path() {
        // one vertical fracture crossing the domain interior, both endpoints inside
        let geom = Geometry::rectangle(0.0, 0.0, 4.0, 4.0).with_fracture(vec![[2.0, 1.0], [2.0, 3.0]]);
        let mesh = build_mesh(&geom, 1.0).unwrap();
        let map = MechDofMap::build(&mesh);
        // two fracture edges; interior path vertex duplicated (2 copies), two
        // tips single, midpoints duplicated once each
        let n_frac_edges = mesh.fracture_edges.len();
        assert_eq!(n_frac_edges, 2);
        // duplicates: 1 interior simple vertex (1 extra) + 2 midpoints (1 extra each)
        assert_eq!(map.n_nodes, mesh.n_vertices() + mesh.edges.len() + 1 + n_frac_edges);
        // traces reference distinct copies on the two sides at the midpoint
        for t in &map.frac_trace {
            assert_ne!(t.plus[1], t.minus[1]);
        }
    }

    #[test]
    fn intersection_gets_one_copy_per_sector() {
        let geom = Geometry::rectangle(0.0, 0.0, 8.0, 8.0)
            .with_fracture(vec![[2.0, 4.0], [6.0, 4.0]])
            .with_fracture(vec![[4.0, 2.0], [4.0, 4.0]])
            .with_fracture(vec![[4.0, 4.0], [4.0, 6.0]]);
        let mesh = build_mesh(&geom, 1.0).unwrap();
        let map = MechDofMap::build(&mesh);
        let center_vertex = (0..mesh.n_vertices())
            .find(|&v| {
                let p = mesh.vertices[v];
                (p[0] - 4.0).abs() < 1e-9 && (p[1] - 4.0).abs() < 1e-9
            })
            .unwrap();
        assert_eq!(map.vertex_nodes(center_vertex).len(), 4);
    }
}
