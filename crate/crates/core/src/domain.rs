//! Core domain types and the user–image–cue interaction graph.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scent::{EventKind, InteractionEvent};

/// Rectangular region inside an image, in pixels from the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct Patch {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Patch {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Patch { x, y, w, h }
    }

    /// Whether the patch is non-empty and lies fully inside a `width`×`height` image.
    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.w > 0
            && self.h > 0
            && u64::from(self.x) + u64::from(self.w) <= u64::from(width)
            && u64::from(self.y) + u64::from(self.h) <= u64::from(height)
    }
}

impl From<[u32; 4]> for Patch {
    fn from([x, y, w, h]: [u32; 4]) -> Self {
        Patch { x, y, w, h }
    }
}

impl From<Patch> for [u32; 4] {
    fn from(p: Patch) -> Self {
        [p.x, p.y, p.w, p.h]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CueKind {
    Visual,
    Text,
    /// Board/pin tag. Carries terms only.
    Bookmark,
}

impl CueKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CueKind::Visual => "visual",
            CueKind::Text => "text",
            CueKind::Bookmark => "bookmark",
        }
    }
}

/// A proximal cue attached to an image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cue {
    pub id: String,
    pub kind: CueKind,
    #[serde(rename = "bbox", default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Patch>,
    #[serde(default)]
    pub terms: Vec<String>,
}

impl Cue {
    /// Checks the cue against the bounds of the image that carries it.
    pub fn violations(&self, width: u32, height: u32) -> Vec<String> {
        let mut out = Vec::new();
        match (self.kind, &self.region) {
            (CueKind::Visual, None) => out.push(format!("cue {}: visual cue without bbox", self.id)),
            (CueKind::Visual, Some(p)) if !p.fits(width, height) => out.push(format!(
                "cue {}: bbox [{},{},{},{}] outside {}x{} image",
                self.id, p.x, p.y, p.w, p.h, width, height
            )),
            (CueKind::Text | CueKind::Bookmark, Some(_)) => {
                out.push(format!("cue {}: only visual cues carry a bbox", self.id))
            }
            _ => {}
        }
        if matches!(self.kind, CueKind::Text | CueKind::Bookmark) && self.terms.is_empty() {
            out.push(format!("cue {}: {} cue needs terms", self.id, self.kind.as_str()));
        }
        if let Some(t) = self.terms.iter().find(|t| t.is_empty() || t.chars().any(char::is_uppercase)) {
            out.push(format!("cue {}: term {t:?} is not a lowercase keyword", self.id));
        }
        out
    }
}

/// Binary interest label: 1 interested, 0 uninterested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct InterestLabel(bool);

impl InterestLabel {
    pub const INTERESTED: InterestLabel = InterestLabel(true);
    pub const UNINTERESTED: InterestLabel = InterestLabel(false);

    pub fn new(value: u8) -> Result<Self> {
        match value {
            0 => Ok(Self::UNINTERESTED),
            1 => Ok(Self::INTERESTED),
            v => Err(Error::invalid(format!("label must be 0 or 1, got {v}"))),
        }
    }

    pub fn is_interested(self) -> bool {
        self.0
    }

    pub fn value(self) -> u8 {
        u8::from(self.0)
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

impl From<bool> for InterestLabel {
    fn from(b: bool) -> Self {
        InterestLabel(b)
    }
}

impl TryFrom<u8> for InterestLabel {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        InterestLabel::new(v)
    }
}

impl From<InterestLabel> for u8 {
    fn from(l: InterestLabel) -> u8 {
        l.value()
    }
}

/// An image document: locator, shape, text metadata and attached cues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageDoc {
    pub id: String,
    pub uri: String,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<InterestLabel>,
    #[serde(default)]
    pub cues: Vec<Cue>,
}

impl ImageDoc {
    pub fn new(id: impl Into<String>, width: u32, height: u32) -> Self {
        let id = id.into();
        ImageDoc {
            uri: format!("{id}.png"),
            id,
            width,
            height,
            title: String::new(),
            description: String::new(),
            category: None,
            label: None,
            cues: Vec::new(),
        }
    }

    pub fn cue(&self, cue_id: &str) -> Option<&Cue> {
        self.cues.iter().find(|c| c.id == cue_id)
    }

    /// All invariant violations for this image, each prefixed by the image id.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.width == 0 || self.height == 0 {
            out.push(format!("image {}: non-positive dimensions {}x{}", self.id, self.width, self.height));
        }
        let mut seen = BTreeSet::new();
        for cue in &self.cues {
            if !seen.insert(cue.id.as_str()) {
                out.push(format!("image {}: duplicate cue id {}", self.id, cue.id));
            }
            out.extend(
                cue.violations(self.width, self.height)
                    .into_iter()
                    .map(|v| format!("image {}: {v}", self.id)),
            );
        }
        out
    }
}

/// Graph node. Cue ids are only unique within their image, so cue nodes
/// are keyed by the owning image as well.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    User { id: String },
    Image { id: String },
    Cue { image: String, id: String },
}

impl Node {
    pub fn user(id: impl Into<String>) -> Self {
        Node::User { id: id.into() }
    }
    pub fn image(id: impl Into<String>) -> Self {
        Node::Image { id: id.into() }
    }
    pub fn cue(image: impl Into<String>, id: impl Into<String>) -> Self {
        Node::Cue {
            image: image.into(),
            id: id.into(),
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::User { id } => write!(f, "user:{id}"),
            Node::Image { id } => write!(f, "image:{id}"),
            Node::Cue { image, id } => write!(f, "cue:{image}/{id}"),
        }
    }
}

/// An interaction attributed to a user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserEvent {
    pub user: String,
    #[serde(flatten)]
    pub event: InteractionEvent,
}

/// Undirected weighted graph over users, images and cues.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UserImageCueGraph {
    nodes: BTreeSet<Node>,
    edges: BTreeMap<(Node, Node), u64>,
}

fn edge_key(a: Node, b: Node) -> (Node, Node) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl UserImageCueGraph {
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, node: &Node) -> bool {
        self.nodes.contains(node)
    }

    /// Edges as `(a, b, weight)` with `a <= b`.
    pub fn edges(&self) -> impl Iterator<Item = (&Node, &Node, u64)> {
        self.edges.iter().map(|((a, b), w)| (a, b, *w))
    }

    pub fn weight(&self, a: &Node, b: &Node) -> u64 {
        self.edges
            .get(&edge_key(a.clone(), b.clone()))
            .copied()
            .unwrap_or(0)
    }

    fn add_edge(&mut self, a: Node, b: Node, w: u64) {
        *self.edges.entry(edge_key(a, b)).or_insert(0) += w;
    }

    fn neighbours<'a>(&'a self, node: &'a Node) -> impl Iterator<Item = (&'a Node, u64)> + 'a {
        self.edges.iter().filter_map(move |((a, b), w)| {
            if a == node {
                Some((b, *w))
            } else if b == node {
                Some((a, *w))
            } else {
                None
            }
        })
    }
}

/// Builds the interaction graph.
///
/// Every image and every attached cue becomes a node, with a weight-1
/// cue–image edge per attachment. `cue_click` events add to user–cue
/// weights and `image_select` events to user–image weights; other event
/// kinds only register the user node.
pub fn build_graph(images: &[ImageDoc], events: &[UserEvent]) -> Result<UserImageCueGraph> {
    let mut graph = UserImageCueGraph::default();
    let by_id: HashMap<&str, &ImageDoc> = images.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut cue_owners: HashMap<&str, Vec<&str>> = HashMap::new();

    for image in images {
        graph.nodes.insert(Node::image(&image.id));
        for cue in &image.cues {
            graph.nodes.insert(Node::cue(&image.id, &cue.id));
            graph.add_edge(Node::cue(&image.id, &cue.id), Node::image(&image.id), 1);
            cue_owners.entry(cue.id.as_str()).or_default().push(image.id.as_str());
        }
    }

    for UserEvent { user, event } in events {
        if let Some(image_id) = &event.image_id {
            if !by_id.contains_key(image_id.as_str()) {
                return Err(Error::UnknownId {
                    kind: "image",
                    id: image_id.clone(),
                });
            }
        }
        let user_node = Node::user(user);
        graph.nodes.insert(user_node.clone());
        match event.kind {
            EventKind::CueClick => {
                let cue_id = event.cue_id.as_deref().ok_or_else(|| {
                    Error::invalid(format!("cue_click event {} without cue id", event.seq))
                })?;
                let image_id = resolve_cue_owner(&by_id, &cue_owners, event.image_id.as_deref(), cue_id)?;
                graph.add_edge(user_node, Node::cue(image_id, cue_id), 1);
            }
            EventKind::ImageSelect => {
                let image_id = event.image_id.as_deref().ok_or_else(|| {
                    Error::invalid(format!("image_select event {} without image id", event.seq))
                })?;
                graph.add_edge(user_node, Node::image(image_id), 1);
            }
            EventKind::PreferenceSelect | EventKind::Skip | EventKind::Examine => {}
        }
    }
    Ok(graph)
}

fn resolve_cue_owner<'a>(
    by_id: &HashMap<&str, &'a ImageDoc>,
    cue_owners: &HashMap<&str, Vec<&'a str>>,
    image_id: Option<&str>,
    cue_id: &str,
) -> Result<&'a str> {
    let unknown = || Error::UnknownId {
        kind: "cue",
        id: cue_id.to_string(),
    };
    match image_id {
        Some(image_id) => {
            let image = by_id[image_id];
            image.cue(cue_id).map(|_| image.id.as_str()).ok_or_else(unknown)
        }
        None => match cue_owners.get(cue_id).map(Vec::as_slice) {
            Some([only]) => Ok(only),
            Some(_) => Err(Error::invalid(format!(
                "cue id {cue_id} is attached to several images; event must name the image"
            ))),
            None => Err(unknown()),
        },
    }
}

/// Cue–image pairs reachable from `user` through one user–cue hop and
/// then cue–image hops, ordered by descending user–cue weight, then cue id
/// and image id ascending.
pub fn cue_trail(graph: &UserImageCueGraph, user: &str) -> Result<Vec<(String, String)>> {
    let user_node = Node::user(user);
    if !graph.contains(&user_node) {
        return Err(Error::NotFound {
            kind: "user",
            id: user.to_string(),
        });
    }
    let mut trail: Vec<(u64, String, String)> = Vec::new();
    for (cue, w) in graph.neighbours(&user_node) {
        let Node::Cue { id: cue_id, .. } = cue else {
            continue;
        };
        for (img, _) in graph.neighbours(cue) {
            if let Node::Image { id } = img {
                trail.push((w, cue_id.clone(), id.clone()));
            }
        }
    }
    trail.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)).then_with(|| a.2.cmp(&b.2)));
    trail.dedup();
    Ok(trail.into_iter().map(|(_, c, i)| (c, i)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_with_cues(id: &str, cues: &[&str]) -> ImageDoc {
        let mut img = ImageDoc::new(id, 100, 100);
        img.cues = cues
            .iter()
            .map(|c| Cue {
                id: c.to_string(),
                kind: CueKind::Text,
                region: None,
                terms: vec!["pasta".into()],
            })
            .collect();
        img
    }

    fn click(user: &str, image: &str, cue: &str) -> UserEvent {
        UserEvent {
            user: user.into(),
            event: InteractionEvent::cue_click(image, cue),
        }
    }

    #[test]
    fn empty_input_gives_empty_graph() {
        let g = build_graph(&[], &[]).unwrap();
        assert_eq!(g.node_count(), 0);
        assert_eq!(g.edges().count(), 0);
    }

    #[test]
    fn single_click_graph() {
        let g = build_graph(&[image_with_cues("i1", &["c1"])], &[click("u1", "i1", "c1")]).unwrap();
        let nodes: Vec<_> = g.nodes().cloned().collect();
        assert_eq!(nodes.len(), 3);
        assert_eq!(g.weight(&Node::user("u1"), &Node::cue("i1", "c1")), 1);
        assert_eq!(g.weight(&Node::cue("i1", "c1"), &Node::image("i1")), 1);
        assert_eq!(g.edges().count(), 2);
    }

    #[test]
    fn unknown_ids_are_rejected_with_the_id() {
        let images = [image_with_cues("i1", &["c1"])];
        let err = build_graph(&images, &[click("u1", "i9", "c1")]).unwrap_err();
        assert!(err.to_string().contains("i9"));
        let err = build_graph(&images, &[click("u1", "i1", "c7")]).unwrap_err();
        assert!(err.to_string().contains("c7"));
    }

    #[test]
    fn cue_click_without_image_resolves_unique_cue() {
        let images = [image_with_cues("i1", &["c1"]), image_with_cues("i2", &["c2"])];
        let mut ev = click("u1", "i1", "c2");
        ev.event.image_id = None;
        let g = build_graph(&images, &[ev.clone()]).unwrap();
        assert_eq!(g.weight(&Node::user("u1"), &Node::cue("i2", "c2")), 1);

        let shared = [image_with_cues("i1", &["c1"]), image_with_cues("i2", &["c1"])];
        ev.event.cue_id = Some("c1".into());
        assert!(build_graph(&shared, &[ev]).is_err());
    }

    #[test]
    fn trail_orders_by_weight_then_cue_id() {
        let images = [image_with_cues("i1", &["c1", "c2"]), image_with_cues("i2", &["c0"])];
        let events = [
            click("u1", "i1", "c2"),
            click("u1", "i1", "c1"),
            click("u1", "i1", "c1"),
            click("u1", "i2", "c0"),
        ];
        let g = build_graph(&images, &events).unwrap();
        let trail = cue_trail(&g, "u1").unwrap();
        assert_eq!(
            trail,
            vec![
                ("c1".to_string(), "i1".to_string()),
                ("c0".to_string(), "i2".to_string()),
                ("c2".to_string(), "i1".to_string()),
            ]
        );
    }

    #[test]
    fn trail_for_idle_user_is_empty_and_missing_user_errors() {
        let images = [image_with_cues("i1", &["c1"])];
        let events = [UserEvent {
            user: "u2".into(),
            event: InteractionEvent::skip("i1"),
        }];
        let g = build_graph(&images, &events).unwrap();
        assert!(cue_trail(&g, "u2").unwrap().is_empty());
        assert!(matches!(cue_trail(&g, "nobody"), Err(Error::NotFound { .. })));
    }

    #[test]
    fn patch_bounds() {
        assert!(Patch::new(0, 0, 10, 10).fits(10, 10));
        assert!(!Patch::new(1, 0, 10, 10).fits(10, 10));
        assert!(!Patch::new(0, 0, 0, 10).fits(10, 10));
    }

    #[test]
    fn label_values() {
        assert!(InterestLabel::new(1).unwrap().is_interested());
        assert!(InterestLabel::new(2).is_err());
        let parsed: InterestLabel = serde_json::from_str("0").unwrap();
        assert_eq!(parsed, InterestLabel::UNINTERESTED);
    }
}
