//! Petri nets, token replay and the timed-state encoding.

use std::collections::{HashMap, HashSet, VecDeque};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::EncodingError;
use crate::eventlog::{Event, EventLog, Timestamp, Vocabulary};

/// Upper bound on markings explored when searching for silent firings.
const SILENT_SEARCH_LIMIT: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub id: String,
    /// `None` marks a silent transition.
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetArc {
    pub from: String,
    pub to: String,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub weight: u32,
}

fn one() -> u32 {
    1
}

fn is_one(w: &u32) -> bool {
    *w == 1
}

/// JSON form of a net.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct NetFile {
    places: Vec<String>,
    transitions: Vec<Transition>,
    arcs: Vec<NetArc>,
    #[serde(default)]
    initial_marking: IndexMap<String, u32>,
}

/// A place/transition net with weighted arcs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PetriNet {
    places: Vec<String>,
    transitions: Vec<Transition>,
    arcs: Vec<NetArc>,
    initial: Vec<u32>,
    // (place index, weight) per transition
    inputs: Vec<Vec<(usize, u32)>>,
    outputs: Vec<Vec<(usize, u32)>>,
    by_label: HashMap<String, Vec<usize>>,
    silent: Vec<usize>,
}

impl PetriNet {
    pub fn new(
        places: Vec<String>,
        transitions: Vec<Transition>,
        arcs: Vec<NetArc>,
        initial_marking: &IndexMap<String, u32>,
    ) -> Result<Self, EncodingError> {
        let place_idx: HashMap<&str, usize> = places.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
        let trans_idx: HashMap<&str, usize> = transitions
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id.as_str(), i))
            .collect();
        if place_idx.len() != places.len() || trans_idx.len() != transitions.len() {
            return Err(EncodingError::InvalidNet("duplicate node id".into()));
        }
        if places.iter().any(|p| trans_idx.contains_key(p.as_str())) {
            return Err(EncodingError::InvalidNet("place and transition share an id".into()));
        }
        let mut inputs = vec![Vec::new(); transitions.len()];
        let mut outputs = vec![Vec::new(); transitions.len()];
        for arc in &arcs {
            if arc.weight == 0 {
                return Err(EncodingError::InvalidNet(format!(
                    "arc {}->{} has weight 0",
                    arc.from, arc.to
                )));
            }
            match (place_idx.get(arc.from.as_str()), trans_idx.get(arc.to.as_str())) {
                (Some(&p), Some(&t)) => inputs[t].push((p, arc.weight)),
                _ => match (trans_idx.get(arc.from.as_str()), place_idx.get(arc.to.as_str())) {
                    (Some(&t), Some(&p)) => outputs[t].push((p, arc.weight)),
                    _ => {
                        return Err(EncodingError::InvalidNet(format!(
                            "arc {}->{} must join an existing place and transition",
                            arc.from, arc.to
                        )))
                    }
                },
            }
        }
        let mut initial = vec![0; places.len()];
        for (p, count) in initial_marking {
            let i = *place_idx
                .get(p.as_str())
                .ok_or_else(|| EncodingError::InvalidNet(format!("initial marking names unknown place {p:?}")))?;
            initial[i] = *count;
        }
        let mut by_label: HashMap<String, Vec<usize>> = HashMap::new();
        let mut silent = Vec::new();
        for (i, t) in transitions.iter().enumerate() {
            match &t.label {
                Some(l) => by_label.entry(l.clone()).or_default().push(i),
                None => silent.push(i),
            }
        }
        Ok(PetriNet {
            places,
            transitions,
            arcs,
            initial,
            inputs,
            outputs,
            by_label,
            silent,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, EncodingError> {
        let f: NetFile = serde_json::from_str(text).map_err(|e| EncodingError::InvalidNet(e.to_string()))?;
        Self::new(f.places, f.transitions, f.arcs, &f.initial_marking)
    }

    pub fn to_json(&self) -> String {
        let initial_marking = self
            .places
            .iter()
            .zip(&self.initial)
            .filter(|(_, c)| **c > 0)
            .map(|(p, c)| (p.clone(), *c))
            .collect();
        let f = NetFile {
            places: self.places.clone(),
            transitions: self.transitions.clone(),
            arcs: self.arcs.clone(),
            initial_marking,
        };
        serde_json::to_string_pretty(&f).expect("net serialises")
    }

    /// Reads the PNML subset: `place` (with `initialMarking/text`),
    /// `transition` (with `name/text`; unnamed or `$invisible$` ones are
    /// silent) and `arc` elements, at any depth below `net`.
    pub fn from_pnml(text: &str) -> Result<Self, EncodingError> {
        let doc = roxmltree::Document::parse(text).map_err(|e| EncodingError::InvalidNet(e.to_string()))?;
        let net = doc
            .descendants()
            .find(|n| n.has_tag_name("net"))
            .ok_or_else(|| EncodingError::InvalidNet("no <net> element".into()))?;
        let text_of = |node: roxmltree::Node, child: &str| -> Option<String> {
            node.children()
                .find(|c| c.has_tag_name(child))
                .and_then(|c| c.children().find(|t| t.has_tag_name("text")))
                .and_then(|t| t.text())
                .map(|s| s.trim().to_owned())
        };
        let id_of = |node: roxmltree::Node| -> Result<String, EncodingError> {
            node.attribute("id")
                .map(str::to_owned)
                .ok_or_else(|| EncodingError::InvalidNet(format!("<{}> without id", node.tag_name().name())))
        };
        let mut places = Vec::new();
        let mut marking = IndexMap::new();
        let mut transitions = Vec::new();
        let mut arcs = Vec::new();
        for node in net.descendants() {
            match node.tag_name().name() {
                "place" => {
                    let id = id_of(node)?;
                    if let Some(m) = text_of(node, "initialMarking") {
                        let count: u32 = m
                            .parse()
                            .map_err(|_| EncodingError::InvalidNet(format!("bad initial marking {m:?}")))?;
                        if count > 0 {
                            marking.insert(id.clone(), count);
                        }
                    }
                    places.push(id);
                }
                "transition" => {
                    let invisible = node
                        .children()
                        .any(|c| c.has_tag_name("toolspecific") && c.attribute("activity") == Some("$invisible$"));
                    let label = text_of(node, "name").filter(|s| !s.is_empty() && !invisible);
                    transitions.push(Transition {
                        id: id_of(node)?,
                        label,
                    });
                }
                "arc" => {
                    let from = node.attribute("source");
                    let to = node.attribute("target");
                    let (Some(from), Some(to)) = (from, to) else {
                        return Err(EncodingError::InvalidNet("<arc> needs source and target".into()));
                    };
                    let weight = text_of(node, "inscription").and_then(|w| w.parse().ok()).unwrap_or(1);
                    arcs.push(NetArc {
                        from: from.to_owned(),
                        to: to.to_owned(),
                        weight,
                    });
                }
                _ => {}
            }
        }
        Self::new(places, transitions, arcs, &marking)
    }

    pub fn num_places(&self) -> usize {
        self.places.len()
    }

    pub fn places(&self) -> &[String] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn initial_marking(&self) -> &[u32] {
        &self.initial
    }

    fn enabled(&self, t: usize, marking: &[u32]) -> bool {
        self.inputs[t].iter().all(|&(p, w)| marking[p] >= w)
    }

    fn fire_on(&self, t: usize, marking: &mut [u32]) {
        for &(p, w) in &self.inputs[t] {
            marking[p] -= w;
        }
        for &(p, w) in &self.outputs[t] {
            marking[p] += w;
        }
    }

    /// Lowest-index enabled transition carrying `label`.
    fn enabled_labelled(&self, label: &str, marking: &[u32]) -> Option<usize> {
        self.by_label
            .get(label)?
            .iter()
            .copied()
            .find(|&t| self.enabled(t, marking))
    }

    /// Shortest sequence of silent firings after which a `label` transition is
    /// enabled (breadth-first, lowest transition index first).
    fn silent_path(&self, label: &str, start: &[u32]) -> Option<Vec<usize>> {
        let mut seen: HashSet<Vec<u32>> = HashSet::new();
        let mut queue: VecDeque<(Vec<u32>, Vec<usize>)> = VecDeque::new();
        seen.insert(start.to_vec());
        queue.push_back((start.to_vec(), Vec::new()));
        while let Some((marking, path)) = queue.pop_front() {
            if !path.is_empty() && self.enabled_labelled(label, &marking).is_some() {
                return Some(path);
            }
            for &t in &self.silent {
                if !self.enabled(t, &marking) {
                    continue;
                }
                let mut next = marking.clone();
                self.fire_on(t, &mut next);
                if seen.len() >= SILENT_SEARCH_LIMIT {
                    return None;
                }
                if seen.insert(next.clone()) {
                    let mut p = path.clone();
                    p.push(t);
                    queue.push_back((next, p));
                }
            }
        }
        None
    }
}

/// Replay state of a prefix: decay values `f`, token throughput `c`, current
/// marking `m` per place, and attribute-value counts `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedStateVector {
    pub f: Vec<f64>,
    pub c: Vec<f64>,
    pub m: Vec<f64>,
    pub r: Vec<f64>,
    /// Events that could not be replayed and were skipped.
    pub nonconforming: usize,
}

impl TimedStateVector {
    pub fn to_features(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.f.len() * 3 + self.r.len());
        v.extend(&self.f);
        v.extend(&self.c);
        v.extend(&self.m);
        v.extend(&self.r);
        v
    }
}

/// Timed-state encoder: a net, a decay horizon, and the attributes counted in `r`.
#[derive(Debug, Clone)]
pub struct TimedStateEncoder {
    pub net: PetriNet,
    pub decay_secs: f64,
    pub attributes: Vec<(String, Vocabulary)>,
}

impl TimedStateEncoder {
    pub fn new(net: PetriNet, decay_secs: f64, attributes: Vec<(String, Vocabulary)>) -> Result<Self, EncodingError> {
        if !(decay_secs > 0.0 && decay_secs.is_finite()) {
            return Err(EncodingError::InvalidDecay(decay_secs));
        }
        Ok(TimedStateEncoder {
            net,
            decay_secs,
            attributes,
        })
    }

    /// Fits on a training log. The decay horizon is the longest case
    /// duration (at least one second, so logs of instantaneous cases still
    /// decay) and `r` counts the values of the named attributes.
    pub fn fit(net: PetriNet, train: &EventLog, attributes: &[&str]) -> Result<Self, EncodingError> {
        let horizon = train
            .traces
            .iter()
            .map(|t| t.last_timestamp().secs_since(t.first_timestamp()))
            .fold(0.0, f64::max);
        let attributes = attributes
            .iter()
            .map(|name| {
                train
                    .attribute_vocabs
                    .get(*name)
                    .map(|v| (name.to_string(), v.clone()))
                    .ok_or_else(|| EncodingError::UnknownAttribute(name.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(net, horizon.max(1.0), attributes)
    }

    pub fn width(&self) -> usize {
        3 * self.net.num_places() + self.attributes.iter().map(|(_, v)| v.len()).sum::<usize>()
    }

    /// Replays `prefix` from the initial marking and evaluates decay at `at`.
    ///
    /// Initial tokens are counted once in `c` and stamped with the case start
    /// (the first prefix event, or `at` for an empty prefix). An event whose
    /// label cannot be fired, even after a shortest run of silent transitions,
    /// is skipped and counted in `nonconforming`. Decay is linear:
    /// `F = max(0, 1 − (at − last_visit)/decay)`, and 0 for unvisited places.
    pub fn replay(&self, prefix: &[Event], at: Timestamp) -> Result<TimedStateVector, EncodingError> {
        let net = &self.net;
        let n = net.num_places();
        let start = prefix.first().map(|e| e.timestamp).unwrap_or(at);
        let mut marking = net.initial.clone();
        let mut through: Vec<f64> = marking.iter().map(|&c| c as f64).collect();
        let mut last_visit: Vec<Option<Timestamp>> = marking.iter().map(|&c| (c > 0).then_some(start)).collect();
        let mut nonconforming = 0;

        let mut fire = |t: usize, when: Timestamp, marking: &mut Vec<u32>| {
            net.fire_on(t, marking);
            for &(p, w) in &net.outputs[t] {
                through[p] += w as f64;
                last_visit[p] = Some(when);
            }
        };

        for e in prefix {
            if let Some(t) = net.enabled_labelled(&e.activity, &marking) {
                fire(t, e.timestamp, &mut marking);
            } else if let Some(path) = net
                .by_label
                .contains_key(&e.activity)
                .then(|| net.silent_path(&e.activity, &marking))
                .flatten()
            {
                for t in path {
                    fire(t, e.timestamp, &mut marking);
                }
                let t = net
                    .enabled_labelled(&e.activity, &marking)
                    .expect("silent path enables the label");
                fire(t, e.timestamp, &mut marking);
            } else {
                nonconforming += 1;
            }
        }

        let f = last_visit
            .iter()
            .map(|lv| match lv {
                Some(t) => (1.0 - at.secs_since(*t) / self.decay_secs).clamp(0.0, 1.0),
                None => 0.0,
            })
            .collect();

        let mut r = Vec::new();
        for (name, vocab) in &self.attributes {
            let mut counts = vec![0.0; vocab.len()];
            for e in prefix {
                let label = e.attribute_label(name);
                let i = vocab
                    .index_of(label)
                    .ok_or_else(|| EncodingError::UnknownLabel(label.to_owned()))?;
                counts[i] += 1.0;
            }
            r.extend(counts);
        }
        debug_assert_eq!(through.len(), n);

        Ok(TimedStateVector {
            f,
            c: through,
            m: marking.iter().map(|&c| c as f64).collect(),
            r,
            nonconforming,
        })
    }
}

/// Functional form of [`TimedStateEncoder::replay`] with no attribute counts.
pub fn replay_timed_state(
    net: &PetriNet,
    prefix: &[Event],
    at: Timestamp,
    decay_secs: f64,
) -> Result<TimedStateVector, EncodingError> {
    TimedStateEncoder::new(net.clone(), decay_secs, Vec::new())?.replay(prefix, at)
}
