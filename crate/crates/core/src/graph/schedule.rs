use std::cmp::Reverse;
use std::collections::BinaryHeap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::flatten::FlatBlock;

/// One entry of the computation schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    /// Block indices, ascending.
    pub blocks: Vec<usize>,
    /// True when the group is an algebraic loop: a strongly connected
    /// component with more than one block, or one block feeding itself.
    pub cyclic: bool,
}

/// Orders blocks so that every current-step input is computed before it is
/// consumed. Integrator and Delay inputs are not current-step dependencies.
/// Strongly connected components become single groups. Ties are broken by
/// declaration order.
pub fn dependency_sort(blocks: &[FlatBlock]) -> Vec<Group> {
    let mut graph = DiGraph::<usize, ()>::with_capacity(blocks.len(), 0);
    let nodes: Vec<NodeIndex> = (0..blocks.len()).map(|i| graph.add_node(i)).collect();
    let mut self_loop = vec![false; blocks.len()];
    for (i, b) in blocks.iter().enumerate() {
        if !b.spec.has_current_dependency() {
            continue;
        }
        for &src in &b.inputs {
            if src == i {
                self_loop[i] = true;
            }
            graph.update_edge(nodes[src], nodes[i], ());
        }
    }

    let sccs = tarjan_scc(&graph);
    let mut component = vec![0usize; blocks.len()];
    let mut groups: Vec<Group> = sccs
        .iter()
        .enumerate()
        .map(|(c, scc)| {
            let mut members: Vec<usize> = scc.iter().map(|n| graph[*n]).collect();
            members.sort_unstable();
            for &m in &members {
                component[m] = c;
            }
            let cyclic = members.len() > 1 || self_loop[members[0]];
            Group {
                blocks: members,
                cyclic,
            }
        })
        .collect();

    // Kahn's algorithm over the condensation, lowest block index first.
    let n = groups.len();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for e in graph.edge_indices() {
        let (a, b) = graph.edge_endpoints(e).unwrap();
        let (ca, cb) = (component[graph[a]], component[graph[b]]);
        if ca != cb && !succ[ca].contains(&cb) {
            succ[ca].push(cb);
            indegree[cb] += 1;
        }
    }
    let mut ready: BinaryHeap<Reverse<(usize, usize)>> = (0..n)
        .filter(|&c| indegree[c] == 0)
        .map(|c| Reverse((groups[c].blocks[0], c)))
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((_, c))) = ready.pop() {
        order.push(c);
        for &s in &succ[c] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push(Reverse((groups[s].blocks[0], s)));
            }
        }
    }
    debug_assert_eq!(order.len(), n);
    order
        .into_iter()
        .map(|c| {
            std::mem::replace(
                &mut groups[c],
                Group {
                    blocks: vec![],
                    cyclic: false,
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::BlockSpec;

    fn fb(path: &str, spec: BlockSpec, inputs: Vec<usize>) -> FlatBlock {
        FlatBlock {
            path: path.into(),
            spec,
            inputs,
        }
    }

    fn order(groups: &[Group]) -> Vec<Vec<usize>> {
        groups.iter().map(|g| g.blocks.clone()).collect()
    }

    #[test]
    fn chain_keeps_data_order() {
        let blocks = vec![
            fb("c", BlockSpec::Constant { value: 1.0 }, vec![]),
            fb("n", BlockSpec::Negator, vec![0]),
            fb("i", BlockSpec::Integrator { init: 0.0 }, vec![1]),
        ];
        let s = dependency_sort(&blocks);
        assert_eq!(order(&s), vec![vec![0], vec![1], vec![2]]);
        assert!(s.iter().all(|g| !g.cyclic));
    }

    #[test]
    fn consumers_wait_for_producers_declared_later() {
        let blocks = vec![
            fb("n", BlockSpec::Negator, vec![1]),
            fb("c", BlockSpec::Constant { value: 1.0 }, vec![]),
        ];
        assert_eq!(order(&dependency_sort(&blocks)), vec![vec![1], vec![0]]);
    }

    #[test]
    fn self_feeding_adder_is_a_loop() {
        let blocks = vec![
            fb("c", BlockSpec::Constant { value: 1.0 }, vec![]),
            fb("a", BlockSpec::Adder { inputs: 2 }, vec![0, 1]),
        ];
        let s = dependency_sort(&blocks);
        assert_eq!(s.len(), 2);
        assert_eq!(
            s[1],
            Group {
                blocks: vec![1],
                cyclic: true
            }
        );
    }

    #[test]
    fn integrator_feedback_is_not_a_loop() {
        let blocks = vec![
            fb("i", BlockSpec::Integrator { init: 1.0 }, vec![1]),
            fb("n", BlockSpec::Negator, vec![0]),
        ];
        let s = dependency_sort(&blocks);
        assert_eq!(order(&s), vec![vec![0], vec![1]]);
        assert!(s.iter().all(|g| !g.cyclic));
    }

    #[test]
    fn two_block_cycle_is_one_group() {
        let blocks = vec![
            fb("a", BlockSpec::Adder { inputs: 2 }, vec![2, 1]),
            fb("n", BlockSpec::Negator, vec![0]),
            fb("c", BlockSpec::Constant { value: 1.0 }, vec![]),
        ];
        let s = dependency_sort(&blocks);
        assert_eq!(s[0].blocks, vec![2]);
        assert_eq!(
            s[1],
            Group {
                blocks: vec![0, 1],
                cyclic: true
            }
        );
    }
}
