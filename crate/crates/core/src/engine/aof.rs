use std::fmt;
use std::sync::Arc;

use crate::dists::PLAUSIBILITY_FLOOR;
use crate::features::{Element, FeatureKind, FeatureSpec};

pub type PredicateFn = dyn Fn(&Element<'_>) -> bool + Send + Sync;
pub type MapFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Condition on the element a factor is evaluated over.
#[derive(Clone)]
pub enum Predicate {
    /// The element's track has a human or auditor observation.
    TrackHasHuman,
    TrackLacksHuman,
    /// Some bundle of the element has a human or auditor observation. For
    /// transitions either endpoint counts; track and scene elements never match.
    BundleHasHuman,
    /// The element's track has at most this many observations.
    TrackCountAtMost(usize),
    Custom(Arc<PredicateFn>),
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::TrackHasHuman => f.write_str("TrackHasHuman"),
            Predicate::TrackLacksHuman => f.write_str("TrackLacksHuman"),
            Predicate::BundleHasHuman => f.write_str("BundleHasHuman"),
            Predicate::TrackCountAtMost(n) => write!(f, "TrackCountAtMost({n})"),
            Predicate::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Predicate {
    pub fn custom(f: impl Fn(&Element<'_>) -> bool + Send + Sync + 'static) -> Self {
        Predicate::Custom(Arc::new(f))
    }

    pub fn eval(&self, element: &Element<'_>) -> bool {
        match self {
            Predicate::TrackHasHuman => element.track().is_some_and(|t| t.has_human()),
            Predicate::TrackLacksHuman => element.track().is_some_and(|t| !t.has_human()),
            Predicate::BundleHasHuman => match element {
                Element::Observation { bundle, .. } | Element::Bundle { bundle, .. } => bundle.has_human(),
                Element::Transition { from, to, .. } => from.has_human() || to.has_human(),
                Element::Track(_) | Element::Scene => false,
            },
            Predicate::TrackCountAtMost(n) => element.track().is_some_and(|t| t.observation_count() <= *n),
            Predicate::Custom(f) => f(element),
        }
    }
}

/// Application objective function: a transform of a plausibility value.
#[derive(Clone)]
pub enum Aof {
    Identity,
    /// `x -> 1 - x`
    Complement,
    ZeroIf(Predicate),
    OneIf(Predicate),
    /// Arbitrary monotone or non-monotone map; the result is clamped into
    /// `[PLAUSIBILITY_FLOOR, 1]`.
    Map(Arc<MapFn>),
}

impl fmt::Debug for Aof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aof::Identity => f.write_str("Identity"),
            Aof::Complement => f.write_str("Complement"),
            Aof::ZeroIf(p) => write!(f, "ZeroIf({p:?})"),
            Aof::OneIf(p) => write!(f, "OneIf({p:?})"),
            Aof::Map(_) => f.write_str("Map"),
        }
    }
}

impl Aof {
    pub fn map(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Aof::Map(Arc::new(f))
    }
}

fn floor(v: f64) -> f64 {
    if v.is_nan() {
        PLAUSIBILITY_FLOOR
    } else {
        v.clamp(PLAUSIBILITY_FLOOR, 1.0)
    }
}

/// Applies one AOF. Continuous transforms never produce an exact zero;
/// only a firing `ZeroIf` does.
pub fn apply_aof(aof: &Aof, p: f64, element: &Element<'_>) -> f64 {
    match aof {
        Aof::Identity => p,
        Aof::Complement => floor(1.0 - p),
        Aof::ZeroIf(pred) => {
            if pred.eval(element) {
                0.0
            } else {
                p
            }
        }
        Aof::OneIf(pred) => {
            if pred.eval(element) {
                1.0
            } else {
                p
            }
        }
        Aof::Map(f) => floor(f(p)),
    }
}

/// Applies a chain in order. Once a gate has zeroed the value it stays zero.
pub fn apply_chain<'a>(chain: impl IntoIterator<Item = &'a Aof>, p: f64, element: &Element<'_>) -> f64 {
    let mut v = p;
    for aof in chain {
        if v == 0.0 {
            break;
        }
        v = apply_aof(aof, v, element);
    }
    v
}

/// Which factors an AOF wraps.
#[derive(Debug, Clone, PartialEq)]
pub enum Selector {
    All,
    Feature(String),
    Kind(FeatureKind),
    /// Several kinds at once.
    Kinds(Vec<FeatureKind>),
}

impl Selector {
    pub fn matches(&self, spec: &FeatureSpec) -> bool {
        match self {
            Selector::All => true,
            Selector::Feature(name) => &spec.name == name,
            Selector::Kind(k) => spec.kind() == *k,
            Selector::Kinds(ks) => ks.contains(&spec.kind()),
        }
    }
}

/// Ordered list of scoped AOFs. The chain for a feature is every entry
/// whose selector matches, in declaration order.
#[derive(Debug, Clone, Default)]
pub struct AofPlan {
    entries: Vec<(Selector, Aof)>,
}

impl AofPlan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, selector: Selector, aof: Aof) -> Self {
        self.entries.push((selector, aof));
        self
    }

    pub fn push(&mut self, selector: Selector, aof: Aof) {
        self.entries.push((selector, aof));
    }

    pub fn chain_for(&self, spec: &FeatureSpec) -> Vec<Aof> {
        self.entries
            .iter()
            .filter(|(s, _)| s.matches(spec))
            .map(|(_, a)| a.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Box3D;
    use crate::scene::{Observation, ObservationBundle, Track};

    fn track(human: bool) -> Track {
        let b = Box3D::axis_aligned([0.0; 3], [1.0; 3]).unwrap();
        let mut members = vec![Observation::model("m", 0, "car", b, 0.9)];
        if human {
            members.push(Observation::human("h", 0, "car", b));
        }
        Track::new(vec![ObservationBundle::new(members).unwrap()]).unwrap()
    }

    #[test]
    fn identity_and_complement() {
        let t = track(false);
        let e = Element::Track(&t);
        assert_eq!(apply_aof(&Aof::Identity, 0.42, &e), 0.42);
        assert!((apply_aof(&Aof::Complement, 0.3, &e) - 0.7).abs() < 1e-15);
        assert_eq!(apply_aof(&Aof::Complement, 1.0, &e), PLAUSIBILITY_FLOOR);
    }

    #[test]
    fn zero_if_human_track() {
        let gate = Aof::ZeroIf(Predicate::TrackHasHuman);
        let with = track(true);
        let without = track(false);
        assert_eq!(apply_aof(&gate, 0.8, &Element::Track(&with)), 0.0);
        assert_eq!(apply_aof(&gate, 0.8, &Element::Track(&without)), 0.8);
    }

    #[test]
    fn zero_is_sticky() {
        let t = track(true);
        let chain = [Aof::ZeroIf(Predicate::TrackHasHuman), Aof::Complement, Aof::OneIf(Predicate::TrackHasHuman)];
        assert_eq!(apply_chain(&chain, 0.5, &Element::Track(&t)), 0.0);
    }

    #[test]
    fn count_gate() {
        let t = track(true);
        assert!(Predicate::TrackCountAtMost(2).eval(&Element::Track(&t)));
        assert!(!Predicate::TrackCountAtMost(1).eval(&Element::Track(&t)));
    }
}
