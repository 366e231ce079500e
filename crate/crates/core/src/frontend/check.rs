use std::collections::{BTreeMap, BTreeSet, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use petgraph::visit::EdgeRef;

use super::{FrontendError, Program, Result, Rule};
use crate::formula::Formula;
use crate::relation::Name;

/// IDB predicates grouped into strongly connected components, dependencies
/// before dependents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strata {
    components: Vec<Vec<Name>>,
}

impl Strata {
    pub fn components(&self) -> &[Vec<Name>] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn index_of(&self, pred: &str) -> Option<usize> {
        self.components
            .iter()
            .position(|c| c.iter().any(|p| p.as_ref() == pred))
    }
}

/// Variables a formula binds positively.
fn bound(f: &Formula) -> BTreeSet<Name> {
    match f {
        Formula::Top | Formula::Bottom | Formula::Not(_) => BTreeSet::new(),
        Formula::Atom(a) => a.vars().cloned().collect(),
        Formula::And(l, r) => &bound(l) | &bound(r),
        Formula::Or(l, r) => &bound(l) & &bound(r),
        Formula::Exists(x, g) => {
            let mut b = bound(g);
            b.remove(x);
            b
        }
    }
}

fn conjuncts<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
    match f {
        Formula::And(l, r) => {
            conjuncts(l, out);
            conjuncts(r, out);
        }
        other => out.push(other),
    }
}

fn check_formula(f: &Formula, ctx: &BTreeSet<Name>) -> std::result::Result<(), Name> {
    let uncovered = |g: &Formula, ctx: &BTreeSet<Name>| {
        let b = bound(g);
        g.free_vars()
            .into_iter()
            .find(|v| !ctx.contains(v) && !b.contains(v))
    };
    match f {
        Formula::Top | Formula::Bottom | Formula::Atom(_) => Ok(()),
        Formula::And(..) => {
            let mut parts = Vec::new();
            conjuncts(f, &mut parts);
            let mut inner = ctx.clone();
            for p in &parts {
                inner.extend(bound(p));
            }
            parts.iter().try_for_each(|p| check_formula(p, &inner))
        }
        Formula::Or(l, r) => {
            for branch in [l, r] {
                if let Some(v) = uncovered(branch, ctx) {
                    return Err(v);
                }
                check_formula(branch, ctx)?;
            }
            Ok(())
        }
        Formula::Not(g) => {
            if let Some(v) = g.free_vars().into_iter().find(|v| !ctx.contains(v)) {
                return Err(v);
            }
            check_formula(g, ctx)
        }
        Formula::Exists(x, g) => {
            if !bound(g).contains(x) {
                return Err(x.clone());
            }
            let mut inner = ctx.clone();
            inner.remove(x);
            check_formula(g, &inner)
        }
    }
}

fn check_rule(rule: &Rule) -> Result<()> {
    let unsafe_var = |var: Name| FrontendError::Unsafe {
        pred: rule.head.pred.clone(),
        var,
        pos: rule.pos,
    };
    let b = bound(&rule.body);
    if let Some(v) = rule.head.vars().find(|v| !b.contains(*v)) {
        return Err(unsafe_var(v.clone()));
    }
    check_formula(&rule.body, &b).map_err(unsafe_var)
}

/// Every variable must be bound by a positive atom within its scope.
pub fn check_safety(p: &Program) -> Result<()> {
    p.rules().try_for_each(check_rule)
}

/// Predicates read by `f` with the parity of negations above each read.
fn reads(f: &Formula, negated: bool, out: &mut BTreeSet<(Name, bool)>) {
    match f {
        Formula::Top | Formula::Bottom => {}
        Formula::Atom(a) => {
            out.insert((a.pred.clone(), negated));
        }
        Formula::And(l, r) | Formula::Or(l, r) => {
            reads(l, negated, out);
            reads(r, negated, out);
        }
        Formula::Not(g) => reads(g, !negated, out),
        Formula::Exists(_, g) => reads(g, negated, out),
    }
}

/// Rejects recursion through an odd number of negations and returns the
/// evaluation order of the IDB components.
pub fn check_parity_stratification(p: &Program) -> Result<Strata> {
    let mut graph: DiGraph<Name, bool> = DiGraph::new();
    let nodes: BTreeMap<Name, NodeIndex> = p
        .idb()
        .keys()
        .map(|k| (k.clone(), graph.add_node(k.clone())))
        .collect();
    for (pred, def) in p.definitions() {
        let mut edges = BTreeSet::new();
        reads(def, false, &mut edges);
        for (dep, odd) in edges {
            if let Some(&to) = nodes.get(&dep) {
                graph.add_edge(nodes[pred], to, odd);
            }
        }
    }
    // Postorder over edges pointing at dependencies lists dependencies first.
    let sccs = tarjan_scc(&graph);
    for scc in &sccs {
        if let Some(cycle) = odd_cycle(&graph, scc) {
            return Err(FrontendError::OddCycle { cycle });
        }
    }
    let components = sccs
        .into_iter()
        .map(|scc| {
            let mut names: Vec<Name> = scc.into_iter().map(|n| graph[n].clone()).collect();
            names.sort();
            names
        })
        .collect();
    Ok(Strata { components })
}

/// Finds a dependency inside one component read under an odd number of
/// negations, and closes it into a cycle through the component.
fn odd_cycle(graph: &DiGraph<Name, bool>, scc: &[NodeIndex]) -> Option<Vec<Name>> {
    let members: BTreeSet<NodeIndex> = scc.iter().copied().collect();
    let (from, to) = graph
        .edge_references()
        .filter(|e| *e.weight() && members.contains(&e.source()) && members.contains(&e.target()))
        .map(|e| (e.source(), e.target()))
        .min_by(|a, b| (&graph[a.0], &graph[a.1]).cmp(&(&graph[b.0], &graph[b.1])))?;
    // Shortest path back from `to` to `from` inside the component.
    let mut parent: BTreeMap<NodeIndex, NodeIndex> = BTreeMap::new();
    let mut queue = VecDeque::from([to]);
    let mut seen = BTreeSet::from([to]);
    while let Some(node) = queue.pop_front() {
        if node == from {
            break;
        }
        let mut next: Vec<NodeIndex> = graph
            .neighbors(node)
            .filter(|n| members.contains(n))
            .collect();
        next.sort_by(|a, b| graph[*a].cmp(&graph[*b]));
        for n in next {
            if seen.insert(n) {
                parent.insert(n, node);
                queue.push_back(n);
            }
        }
    }
    let mut back = vec![from];
    let mut at = from;
    while at != to {
        at = parent[&at];
        back.push(at);
    }
    back.reverse();
    back.insert(0, from);
    Some(back.into_iter().map(|n| graph[n].clone()).collect())
}
