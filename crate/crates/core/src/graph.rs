//! The event graph: construction, persistence, ordering and DOT export.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event_builder::{Event, EventId};
use crate::identity::PersonId;
use crate::ingest::{FrameIndex, VideoMeta};
use crate::relations::{Relation, RelationKind};

pub const DUMP_FORMAT: &str = "gest-graph";
pub const DUMP_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("duplicate event id {0}")]
    DuplicateNode(EventId),
    #[error("edge {src} -> {dst} ({kind}) references missing event {missing}")]
    DanglingEdge {
        src: EventId,
        dst: EventId,
        kind: RelationKind,
        missing: EventId,
    },
    #[error("edge {0} -> {0} is a self loop")]
    SelfLoop(EventId),
    #[error("event {id}: {reason}")]
    InvalidEvent { id: EventId, reason: String },
    #[error("edge {src} -> {dst}: {reason}")]
    InvalidEdge { src: EventId, dst: EventId, reason: String },
    #[error("graph dump: {0}")]
    Dump(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GestGraph {
    pub meta: VideoMeta,
    pub nodes: Vec<Event>,
    pub edges: Vec<Relation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionGroup {
    pub person_id: PersonId,
    pub event_ids: Vec<EventId>,
    pub group_start_frame: FrameIndex,
}

fn check_event(e: &Event) -> Result<(), GraphError> {
    let bad = |reason: String| Err(GraphError::InvalidEvent { id: e.event_id, reason });
    if e.start_frame > e.end_frame {
        return bad(format!("start {} after end {}", e.start_frame, e.end_frame));
    }
    if e.action_label.trim().is_empty() {
        return bad("empty action label".into());
    }
    if let Some((&f, _)) = e
        .per_frame_bboxes
        .iter()
        .find(|(f, _)| !(e.start_frame..=e.end_frame).contains(*f))
    {
        return bad(format!("bbox at frame {f} outside its span"));
    }
    if let Some(c) = e
        .candidate_objects
        .iter()
        .find(|c| !(c.presence > 0.0 && c.presence <= 1.0))
    {
        return bad(format!("object `{}` has presence {}", c.label, c.presence));
    }
    Ok(())
}

/// Assembles a graph, checking ids and edge endpoints.
pub fn build_graph(events: Vec<Event>, relations: Vec<Relation>, meta: VideoMeta) -> Result<GestGraph, GraphError> {
    let mut ids = BTreeSet::new();
    for e in &events {
        check_event(e)?;
        if !ids.insert(e.event_id) {
            return Err(GraphError::DuplicateNode(e.event_id));
        }
    }
    for r in &relations {
        if r.src == r.dst {
            return Err(GraphError::SelfLoop(r.src));
        }
        for end in [r.src, r.dst] {
            if !ids.contains(&end) {
                return Err(GraphError::DanglingEdge {
                    src: r.src,
                    dst: r.dst,
                    kind: r.kind,
                    missing: end,
                });
            }
        }
        if !r.evidence.is_finite() || r.evidence < 0.0 || (r.kind == RelationKind::SpaceClose && r.evidence > 1.0) {
            return Err(GraphError::InvalidEdge {
                src: r.src,
                dst: r.dst,
                reason: format!("{} evidence {} out of range", r.kind, r.evidence),
            });
        }
    }
    Ok(GestGraph {
        meta,
        nodes: events,
        edges: relations,
    })
}

#[derive(Serialize)]
struct DumpRef<'a> {
    format: &'a str,
    version: u32,
    #[serde(flatten)]
    graph: &'a GestGraph,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DumpOwned {
    format: String,
    version: u32,
    meta: VideoMeta,
    nodes: Vec<Event>,
    edges: Vec<Relation>,
}

impl GestGraph {
    pub fn node(&self, id: EventId) -> Option<&Event> {
        self.nodes.iter().find(|e| e.event_id == id)
    }

    fn index(&self) -> HashMap<EventId, &Event> {
        self.nodes.iter().map(|e| (e.event_id, e)).collect()
    }

    /// Pretty JSON dump with a format header; byte-stable for equal graphs.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&DumpRef {
            format: DUMP_FORMAT,
            version: DUMP_VERSION,
            graph: self,
        })
        .expect("graph serializes");
        s.push('\n');
        s
    }

    /// Parses and re-validates a dump written by [`GestGraph::to_json`].
    pub fn from_json(s: &str) -> Result<GestGraph, GraphError> {
        let d: DumpOwned = serde_json::from_str(s).map_err(|e| GraphError::Dump(e.to_string()))?;
        if d.format != DUMP_FORMAT {
            return Err(GraphError::Dump(format!("unexpected format `{}`", d.format)));
        }
        if d.version != DUMP_VERSION {
            return Err(GraphError::Dump(format!("unsupported version {}", d.version)));
        }
        build_graph(d.nodes, d.edges, d.meta)
    }
}

/// Event ids by start frame, then end frame, person id and action label.
pub fn temporal_sort(g: &GestGraph) -> Vec<EventId> {
    let mut nodes: Vec<&Event> = g.nodes.iter().collect();
    nodes.sort_by(|a, b| {
        (a.start_frame, a.end_frame, a.person_id, &a.action_label, a.event_id).cmp(&(
            b.start_frame,
            b.end_frame,
            b.person_id,
            &b.action_label,
            b.event_id,
        ))
    });
    nodes.into_iter().map(|e| e.event_id).collect()
}

/// Splits a temporally sorted id list into maximal runs of one actor.
pub fn group_by_actor(sorted: &[EventId], g: &GestGraph) -> Vec<ActionGroup> {
    let index = g.index();
    let mut groups: Vec<ActionGroup> = Vec::new();
    for id in sorted {
        let Some(e) = index.get(id) else { continue };
        match groups.last_mut() {
            Some(last) if last.person_id == e.person_id => last.event_ids.push(*id),
            _ => groups.push(ActionGroup {
                person_id: e.person_id,
                event_ids: vec![*id],
                group_start_frame: e.start_frame,
            }),
        }
    }
    groups
}

/// Drops each `next` edge that is implied by a path of two or more `next` edges.
pub fn reduce_next_edges(edges: &[Relation]) -> Vec<Relation> {
    let mut succ: BTreeMap<EventId, Vec<EventId>> = BTreeMap::new();
    for r in edges.iter().filter(|r| r.kind == RelationKind::Next) {
        succ.entry(r.src).or_default().push(r.dst);
    }
    // nodes reachable from `start` through at least two edges
    let long_reach = |start: EventId| -> BTreeSet<EventId> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<EventId> = succ
            .get(&start)
            .into_iter()
            .flatten()
            .flat_map(|mid| succ.get(mid).into_iter().flatten().copied())
            .collect();
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                stack.extend(succ.get(&n).into_iter().flatten().copied());
            }
        }
        seen
    };
    let mut cache: BTreeMap<EventId, BTreeSet<EventId>> = BTreeMap::new();
    edges
        .iter()
        .filter(|r| {
            r.kind != RelationKind::Next
                || !cache.entry(r.src).or_insert_with(|| long_reach(r.src)).contains(&r.dst)
        })
        .cloned()
        .collect()
}

fn dot_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out
}

fn edge_style(kind: RelationKind) -> &'static str {
    match kind {
        RelationKind::Next => "style=solid",
        RelationKind::SameTime => "style=bold, color=blue",
        RelationKind::Meanwhile => "style=dashed, color=darkgreen",
        RelationKind::SpaceClose => "style=dotted, color=gray40, dir=none",
    }
}

/// Graphviz `digraph` with one node per event and one styled edge per relation.
pub fn export_dot(g: &GestGraph) -> String {
    let mut nodes: Vec<&Event> = g.nodes.iter().collect();
    nodes.sort_by_key(|e| e.event_id);
    let mut edges: Vec<&Relation> = g.edges.iter().collect();
    edges.sort_by_key(|r| (r.src, r.dst, r.kind));

    let mut out = String::from("digraph gest {\n");
    for e in nodes {
        let label = format!(
            "{}:{} [{}-{}]",
            e.person_id, e.action_label, e.start_frame, e.end_frame
        );
        let _ = writeln!(out, "  {} [label=\"{}\"];", e.event_id, dot_escape(&label));
    }
    for r in edges {
        let _ = writeln!(
            out,
            "  {} -> {} [label=\"{}\", {}];",
            r.src,
            r.dst,
            r.kind,
            edge_style(r.kind)
        );
    }
    out.push_str("}\n");
    out
}
