use std::ops::Range;

use super::aof::{apply_chain, AofPlan};
use super::EngineError;
use crate::dists::FittedModel;
use crate::features::{Element, FeatureKind, FeatureSpec};
use crate::scene::Scene;

/// Position of a scene element, by track, bundle and member index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scope {
    Observation { track: usize, bundle: usize, member: usize },
    Bundle { track: usize, bundle: usize },
    /// Bundles `from` and `from + 1` of a track.
    Transition { track: usize, from: usize },
    Track { track: usize },
    Scene,
}

impl Scope {
    pub fn kind(&self) -> FeatureKind {
        match self {
            Scope::Observation { .. } => FeatureKind::Observation,
            Scope::Bundle { .. } => FeatureKind::Bundle,
            Scope::Transition { .. } => FeatureKind::Transition,
            Scope::Track { .. } => FeatureKind::Track,
            Scope::Scene => FeatureKind::Scene,
        }
    }

    pub fn element<'a>(&self, scene: &'a Scene) -> Element<'a> {
        let tracks = scene.tracks();
        match *self {
            Scope::Observation { track, bundle, member } => {
                let t = &tracks[track];
                let b = &t.bundles()[bundle];
                Element::Observation {
                    observation: &b.members()[member],
                    bundle: b,
                    track: t,
                }
            }
            Scope::Bundle { track, bundle } => Element::Bundle {
                bundle: &tracks[track].bundles()[bundle],
                track: &tracks[track],
            },
            Scope::Transition { track, from } => {
                let t = &tracks[track];
                Element::Transition {
                    from: &t.bundles()[from],
                    to: &t.bundles()[from + 1],
                    track: t,
                }
            }
            Scope::Track { track } => Element::Track(&tracks[track]),
            Scope::Scene => Element::Scene,
        }
    }

    /// Id of the element: observation, bundle or track id, `from->to`
    /// bundle ids for transitions, the scene id for scenes.
    pub fn element_id(&self, scene: &Scene) -> String {
        match self.element(scene) {
            Element::Observation { observation, .. } => observation.id.clone(),
            Element::Bundle { bundle, .. } => bundle.id().to_string(),
            Element::Transition { from, to, .. } => format!("{}->{}", from.id(), to.id()),
            Element::Track(t) => t.id().to_string(),
            Element::Scene => scene.scene_id.clone(),
        }
    }
}

/// Variable node: one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub observation_id: String,
    pub track: usize,
    pub bundle: usize,
    pub member: usize,
}

/// Factor node: one feature evaluated on one element.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    /// Index into the compiled spec list.
    pub spec: usize,
    pub feature: String,
    pub scope: Scope,
    pub class_key: Option<String>,
    pub value: f64,
    pub plausibility: f64,
    /// Plausibility after the AOF chain; exact 0 means the factor gates.
    pub aof_value: f64,
    /// Range into [`FactorGraph::edges`].
    pub edges: Range<usize>,
}

impl Factor {
    pub fn arity(&self) -> usize {
        self.edges.len()
    }

    pub fn is_gated(&self) -> bool {
        self.aof_value == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub variable: usize,
    pub factor: usize,
}

/// Bipartite graph of observation variables and feature factors.
#[derive(Debug, Clone, Default)]
pub struct FactorGraph {
    pub variables: Vec<Variable>,
    pub factors: Vec<Factor>,
    pub edges: Vec<Edge>,
    var_factors: Vec<Vec<usize>>,
    /// First variable index of each bundle, per track.
    bundle_base: Vec<Vec<usize>>,
}

impl FactorGraph {
    /// Factors incident to variable `v`, in edge order.
    pub fn factors_of(&self, v: usize) -> &[usize] {
        &self.var_factors[v]
    }

    pub fn factor_variables(&self, f: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges[self.factors[f].edges.clone()].iter().map(|e| e.variable)
    }

    /// Variable indices of bundle `bundle` of track `track`.
    pub fn bundle_variables(&self, track: usize, bundle: usize) -> Range<usize> {
        let base = &self.bundle_base[track];
        let start = base[bundle];
        let end = base.get(bundle + 1).copied().unwrap_or_else(|| self.track_variables(track).end);
        start..end
    }

    pub fn track_variables(&self, track: usize) -> Range<usize> {
        let start = self.bundle_base[track].first().copied().unwrap_or(0);
        let end = self
            .bundle_base
            .get(track + 1)
            .and_then(|b| b.first().copied())
            .unwrap_or(self.variables.len());
        start..end
    }

    /// Checks by two-coloring that every edge joins a variable to a factor,
    /// and that the adjacency lists agree with the edge list.
    pub fn is_bipartite(&self) -> bool {
        let nv = self.variables.len();
        let n = nv + self.factors.len();
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            if e.variable >= nv || e.factor >= self.factors.len() {
                return false;
            }
            adj[e.variable].push(nv + e.factor);
            adj[nv + e.factor].push(e.variable);
        }
        let mut color = vec![u8::MAX; n];
        for start in 0..n {
            if color[start] != u8::MAX {
                continue;
            }
            color[start] = 0;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for &w in &adj[u] {
                    if color[w] == u8::MAX {
                        color[w] = 1 - color[u];
                        stack.push(w);
                    } else if color[w] == color[u] {
                        return false;
                    }
                }
            }
        }
        // the coloring must separate variables from factors
        let var_colour_ok = (0..nv).all(|v| adj[v].is_empty() || color[v] != color[adj[v][0]]);
        let lists_ok = self.var_factors.iter().map(Vec::len).sum::<usize>() == self.edges.len();
        var_colour_ok && lists_ok
    }
}

fn element_arity(element: &Element<'_>, scene: &Scene) -> usize {
    match element {
        Element::Observation { .. } => 1,
        Element::Bundle { bundle, .. } => bundle.len(),
        Element::Transition { from, to, .. } => from.len() + to.len(),
        Element::Track(t) => t.observation_count(),
        Element::Scene => scene.observation_count(),
    }
}

fn scopes_of(scene: &Scene, kind: FeatureKind) -> Vec<Scope> {
    let mut out = Vec::new();
    if kind == FeatureKind::Scene {
        out.push(Scope::Scene);
        return out;
    }
    for (ti, t) in scene.tracks().iter().enumerate() {
        match kind {
            FeatureKind::Observation => {
                for (bi, b) in t.bundles().iter().enumerate() {
                    for mi in 0..b.len() {
                        out.push(Scope::Observation {
                            track: ti,
                            bundle: bi,
                            member: mi,
                        });
                    }
                }
            }
            FeatureKind::Bundle => out.extend((0..t.bundles().len()).map(|bi| Scope::Bundle { track: ti, bundle: bi })),
            FeatureKind::Transition => {
                out.extend((0..t.bundles().len().saturating_sub(1)).map(|from| Scope::Transition { track: ti, from }))
            }
            FeatureKind::Track => out.push(Scope::Track { track: ti }),
            FeatureKind::Scene => unreachable!(),
        }
    }
    out
}

/// Compiles `scene` into a factor graph: one variable per observation, one
/// factor per (element, spec), and one edge between a factor and each
/// observation of its element. Transition factors join every observation of
/// both bundles.
pub fn compile(scene: &Scene, model: &FittedModel, specs: &[FeatureSpec], plan: &AofPlan) -> Result<FactorGraph, EngineError> {
    let mut g = FactorGraph::default();
    for (ti, t) in scene.tracks().iter().enumerate() {
        let mut base = Vec::with_capacity(t.bundles().len());
        for (bi, b) in t.bundles().iter().enumerate() {
            base.push(g.variables.len());
            for (mi, o) in b.members().iter().enumerate() {
                g.variables.push(Variable {
                    observation_id: o.id.clone(),
                    track: ti,
                    bundle: bi,
                    member: mi,
                });
            }
        }
        g.bundle_base.push(base);
    }
    g.var_factors = vec![Vec::new(); g.variables.len()];
    if g.variables.is_empty() {
        return Ok(g);
    }

    for (si, spec) in specs.iter().enumerate() {
        let chain = plan.chain_for(spec);
        for scope in scopes_of(scene, spec.kind()) {
            let element = scope.element(scene);
            let class_key = spec.class_key(&element);
            let dist = model.lookup(&spec.name, class_key).ok_or_else(|| EngineError::MissingDistribution {
                feature: spec.name.clone(),
                class: class_key.map(str::to_string),
            })?;
            let value = spec
                .extract(&element, scene)
                .map_err(|e| EngineError::Feature(spec.name.clone(), e))?;
            let plausibility = dist.plausibility(value);
            let aof_value = apply_chain(&chain, plausibility, &element);

            let fi = g.factors.len();
            let start = g.edges.len();
            let vars: Range<usize> = match scope {
                Scope::Observation { track, bundle, member } => {
                    let v = g.bundle_base[track][bundle] + member;
                    v..v + 1
                }
                Scope::Bundle { track, bundle } => g.bundle_variables(track, bundle),
                Scope::Transition { track, from } => {
                    let a = g.bundle_variables(track, from);
                    let b = g.bundle_variables(track, from + 1);
                    a.start..b.end
                }
                Scope::Track { track } => g.track_variables(track),
                Scope::Scene => 0..g.variables.len(),
            };
            debug_assert_eq!(vars.len(), element_arity(&element, scene));
            for v in vars {
                g.edges.push(Edge { variable: v, factor: fi });
                g.var_factors[v].push(fi);
            }
            g.factors.push(Factor {
                spec: si,
                feature: spec.name.clone(),
                scope,
                class_key: class_key.map(str::to_string),
                value,
                plausibility,
                aof_value,
                edges: start..g.edges.len(),
            });
        }
    }
    Ok(g)
}
