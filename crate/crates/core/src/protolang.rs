//! Proto-language: a deterministic, grammar-simple text rendering of a graph.
//!
//! ```text
//! document  := [scene] block*
//! scene     := "Scene: " LABEL "."
//! block     := "Actions of person " ID ":" statement+
//! statement := "person " ID " " VERB_PHRASE " (from " SECS "s to " SECS "s)"
//!              [", possibly involving: <" OBJ (" | " OBJ)* ">"]
//!              ("; " clause)* "."
//! clause    := "after person " ID " " VERB_PHRASE           (next)
//!            | "at the same time as person " ID " " VERB_PHRASE  (same_time)
//!            | "meanwhile person " ID " " VERB_PHRASE        (meanwhile)
//!            | "near person " ID                            (space_close)
//! ```
//!
//! Clauses hang off the later of the two events in rendering order, so every
//! clause refers back to something already described.

use std::collections::HashMap;

use serde::Serialize;

use crate::event_builder::{Event, EventId};
use crate::graph::{ActionGroup, GestGraph};
use crate::identity::PersonId;
use crate::ingest::FrameIndex;
use crate::relations::RelationKind;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtoStatement {
    pub event_id: EventId,
    pub person_id: PersonId,
    pub start_frame: FrameIndex,
    pub end_frame: FrameIndex,
    pub text: String,
    /// The object menu offered for this statement, most present first.
    pub objects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtoBlock {
    pub person_id: PersonId,
    pub intro: String,
    pub statements: Vec<ProtoStatement>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtoDocument {
    pub scene_line: Option<String>,
    pub blocks: Vec<ProtoBlock>,
}

impl ProtoDocument {
    pub fn statements(&self) -> impl Iterator<Item = &ProtoStatement> {
        self.blocks.iter().flat_map(|b| &b.statements)
    }

    pub fn is_empty(&self) -> bool {
        self.statements().next().is_none()
    }

    pub fn lines(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.scene_line.iter().map(String::as_str).collect();
        for b in &self.blocks {
            out.push(&b.intro);
            out.extend(b.statements.iter().map(|s| s.text.as_str()));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = self.lines().join("\n");
        s.push('\n');
        s
    }

    /// Machine-readable companion: statement order, event ids and frame spans.
    pub fn sidecar_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercases, turns underscores into spaces, drops parenthesized notes and
/// keeps the first of slash-separated alternatives: `Carry/hold (an object)`
/// becomes `carry`.
pub fn normalize_action(label: &str) -> String {
    let lower = label.to_lowercase().replace('_', " ");
    let mut plain = String::with_capacity(lower.len());
    let mut depth = 0usize;
    for c in lower.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            _ if depth == 0 => plain.push(c),
            _ => {}
        }
    }
    plain
        .split_whitespace()
        .map(|w| w.split('/').find(|p| !p.is_empty()).unwrap_or(w))
        .collect::<Vec<_>>()
        .join(" ")
}

fn third_person(verb: &str) -> String {
    match verb {
        "be" => return "is".into(),
        "have" => return "has".into(),
        "do" | "go" => return format!("{verb}es"),
        _ => {}
    }
    let ends = |s: &str| verb.ends_with(s);
    if ends("s") || ends("x") || ends("z") || ends("ch") || ends("sh") {
        return format!("{verb}es");
    }
    let mut chars = verb.chars().rev();
    if let (Some('y'), Some(prev)) = (chars.next(), chars.next()) {
        if !"aeiou".contains(prev) {
            return format!("{}ies", &verb[..verb.len() - 1]);
        }
    }
    format!("{verb}s")
}

/// Adverbial particles kept after the head verb, as in `sit down` or `pick up`.
const PARTICLES: [&str; 10] = ["up", "down", "out", "off", "away", "back", "around", "over", "in", "on"];

/// Head verb of the normalized action in the third person singular, with any
/// a particle directly after it. Object nouns are left to the object menu:
/// `read book` becomes `reads`, `stand up` becomes `stands up`.
pub fn verb_phrase(label: &str) -> String {
    let norm = normalize_action(label);
    let mut words = norm.split(' ');
    match words.next() {
        Some(head) if !head.is_empty() => {
            let mut s = third_person(head);
            for w in words.take(1).filter(|w| PARTICLES.contains(w)) {
                s.push(' ');
                s.push_str(w);
            }
            s
        }
        _ => "acts".into(),
    }
}

fn seconds(frame: FrameIndex, fps: f64) -> String {
    format!("{:.1}", frame as f64 / fps)
}

/// An event already rendered, and how the event being described relates to it.
#[derive(Debug, Clone, Copy)]
pub struct RelatedEvent<'a> {
    pub kind: RelationKind,
    pub other: &'a Event,
}

fn clause(r: &RelatedEvent<'_>) -> String {
    let who = r.other.person_id;
    let vp = verb_phrase(&r.other.action_label);
    match r.kind {
        RelationKind::Next => format!("after person {who} {vp}"),
        RelationKind::SameTime => format!("at the same time as person {who} {vp}"),
        RelationKind::Meanwhile => format!("meanwhile person {who} {vp}"),
        RelationKind::SpaceClose => format!("near person {who}"),
    }
}

/// One statement for one event.
pub fn describe_event(e: &Event, related: &[RelatedEvent<'_>], fps: f64) -> String {
    let mut s = format!(
        "person {} {} (from {}s to {}s)",
        e.person_id,
        single_line(&verb_phrase(&e.action_label)),
        seconds(e.start_frame, fps),
        seconds(e.end_frame, fps)
    );
    if !e.candidate_objects.is_empty() {
        let menu: Vec<String> = e.candidate_objects.iter().map(|c| single_line(&c.label)).collect();
        s.push_str(", possibly involving: <");
        s.push_str(&menu.join(" | "));
        s.push('>');
    }
    for r in related {
        s.push_str("; ");
        s.push_str(&single_line(&clause(r)));
    }
    s.push('.');
    s
}

/// Renders grouped events, prefixed by an optional scene line.
pub fn render_proto(groups: &[ActionGroup], g: &GestGraph, scene: Option<&str>) -> ProtoDocument {
    let nodes: HashMap<EventId, &Event> = g.nodes.iter().map(|e| (e.event_id, e)).collect();
    let position: HashMap<EventId, usize> = groups
        .iter()
        .flat_map(|gr| &gr.event_ids)
        .enumerate()
        .map(|(i, id)| (*id, i))
        .collect();

    // relations keyed by the later-rendered endpoint
    let mut incoming: HashMap<EventId, Vec<(usize, RelationKind, EventId)>> = HashMap::new();
    for r in &g.edges {
        let (Some(&ps), Some(&pd)) = (position.get(&r.src), position.get(&r.dst)) else { continue };
        let (later, earlier, earlier_pos) = if ps < pd { (r.dst, r.src, ps) } else { (r.src, r.dst, pd) };
        incoming.entry(later).or_default().push((earlier_pos, r.kind, earlier));
    }
    for v in incoming.values_mut() {
        v.sort();
        v.dedup();
    }

    let scene_line = scene
        .map(single_line)
        .filter(|s| !s.is_empty())
        .map(|s| format!("Scene: {s}."));

    let blocks = groups
        .iter()
        .map(|gr| ProtoBlock {
            person_id: gr.person_id,
            intro: format!("Actions of person {}:", gr.person_id),
            statements: gr
                .event_ids
                .iter()
                .filter_map(|id| nodes.get(id))
                .map(|e| {
                    let related: Vec<RelatedEvent<'_>> = incoming
                        .get(&e.event_id)
                        .into_iter()
                        .flatten()
                        .filter_map(|(_, kind, other)| nodes.get(other).map(|o| RelatedEvent { kind: *kind, other: o }))
                        .collect();
                    ProtoStatement {
                        event_id: e.event_id,
                        person_id: e.person_id,
                        start_frame: e.start_frame,
                        end_frame: e.end_frame,
                        text: describe_event(e, &related, g.meta.fps),
                        objects: e.candidate_objects.iter().map(|c| c.label.clone()).collect(),
                    }
                })
                .collect(),
        })
        .collect();

    ProtoDocument { scene_line, blocks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbox::BBox;
    use crate::event_builder::CandidateObject;
    use crate::graph::{build_graph, group_by_actor, temporal_sort};
    use crate::ingest::VideoMeta;
    use crate::relations::Relation;
    use std::collections::BTreeMap;

    fn event(id: u32, person: u32, label: &str, start: u32, end: u32) -> Event {
        Event {
            event_id: EventId(id),
            person_id: person,
            action_label: label.into(),
            start_frame: start,
            end_frame: end,
            per_frame_bboxes: [(start, BBox::new(0.0, 0.0, 1.0, 1.0))].into_iter().collect(),
            candidate_objects: Vec::new(),
            object_frame_counts: BTreeMap::new(),
        }
    }

    fn graph(nodes: Vec<Event>, edges: Vec<Relation>) -> GestGraph {
        let meta = VideoMeta {
            video_id: "v".into(),
            fps: 30.0,
            width: 640,
            height: 480,
            scene_label: None,
        };
        build_graph(nodes, edges, meta).unwrap()
    }

    fn render(g: &GestGraph, scene: Option<&str>) -> ProtoDocument {
        render_proto(&group_by_actor(&temporal_sort(g), g), g, scene)
    }

    #[test]
    fn statement_template() {
        assert_eq!(describe_event(&event(0, 1, "read", 30, 150), &[], 30.0), "person 1 reads (from 1.0s to 5.0s).");
        assert_eq!(
            describe_event(&event(0, 1, "read book", 30, 150), &[], 30.0),
            "person 1 reads (from 1.0s to 5.0s)."
        );
    }

    #[test]
    fn menu_keeps_presence_order() {
        let mut e = event(0, 1, "read", 0, 30);
        e.candidate_objects = vec![
            CandidateObject { label: "book".into(), presence: 0.8 },
            CandidateObject { label: "cup".into(), presence: 0.2 },
        ];
        let s = describe_event(&e, &[], 30.0);
        assert_eq!(s, "person 1 reads (from 0.0s to 1.0s), possibly involving: <book | cup>.");
    }

    #[test]
    fn same_time_marker_on_second_statement() {
        let g = graph(
            vec![event(0, 1, "read", 0, 90), event(1, 2, "write", 3, 92)],
            vec![Relation { src: EventId(0), dst: EventId(1), kind: RelationKind::SameTime, evidence: 88.0 }],
        );
        let doc = render(&g, None);
        let stmts: Vec<&str> = doc.statements().map(|s| s.text.as_str()).collect();
        assert!(!stmts[0].contains("same time"));
        assert_eq!(stmts[1], "person 2 writes (from 0.1s to 3.1s); at the same time as person 1 reads.");
    }

    #[test]
    fn scene_only_document() {
        let doc = render(&graph(vec![], vec![]), Some("classroom"));
        assert_eq!(doc.to_text(), "Scene: classroom.\n");
        assert!(doc.is_empty());
    }

    #[test]
    fn one_group_two_events_is_three_lines() {
        let g = graph(vec![event(0, 1, "read", 0, 10), event(1, 1, "write", 20, 30)], vec![]);
        let doc = render(&g, None);
        assert_eq!(doc.lines().len(), 3);
        assert_eq!(doc.lines()[0], "Actions of person 1:");
    }

    #[test]
    fn rendering_is_deterministic() {
        let g = graph(
            vec![event(0, 1, "read", 0, 10), event(1, 2, "walk", 5, 30), event(2, 1, "write", 12, 40)],
            vec![
                Relation { src: EventId(0), dst: EventId(2), kind: RelationKind::Next, evidence: 2.0 },
                Relation { src: EventId(1), dst: EventId(2), kind: RelationKind::Meanwhile, evidence: 19.0 },
            ],
        );
        assert_eq!(render(&g, Some("park")).to_text(), render(&g, Some("park")).to_text());
    }

    #[test]
    fn label_normalization() {
        assert_eq!(normalize_action("Carry/hold (an object)"), "carry");
        assert_eq!(normalize_action("answer_phone"), "answer phone");
        assert_eq!(verb_phrase("talk to (e.g., self, a person, a group)"), "talks");
        assert_eq!(verb_phrase("stand_up"), "stands up");
        assert_eq!(verb_phrase("pick up cup"), "picks up");
        assert_eq!(verb_phrase("lie down on bed"), "lies down");
        assert_eq!(verb_phrase("watch (a person)"), "watches");
        assert_eq!(verb_phrase("carry"), "carries");
        assert_eq!(verb_phrase("play"), "plays");
        assert_eq!(verb_phrase("go"), "goes");
        assert_eq!(verb_phrase("()"), "acts");
    }
}
